//! Globally adaptive Gauss–Kronrod quadrature (7/15 point rule) with support
//! for semi-infinite and infinite ranges.

use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for the odd-indexed Kronrod nodes.
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub abs_err: f64,
    pub evals: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-12,
            rel_tol: 1e-12,
            max_intervals: 4000,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Piece {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.err.total_cmp(&other.err)
    }
}

fn kronrod15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Piece {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut res_k = fc * WGK[7];
    let mut res_g = fc * WG[3];
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = res_k * half;
    res_abs *= half.abs();
    res_asc *= half.abs();
    let mut err = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    Piece { a, b, value, err }
}

fn adapt<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, opts: &QuadOptions) -> Result<QuadResult> {
    let first = kronrod15(f, a, b);
    if !first.value.is_finite() {
        return Err(Error::Quadrature(format!("non-finite integrand on [{a}, {b}]")));
    }
    let mut heap = BinaryHeap::new();
    let mut total = first.value;
    let mut total_err = first.err;
    heap.push(first);
    let mut evals = 15;
    while total_err > opts.abs_tol.max(opts.rel_tol * total.abs()) {
        if heap.len() >= opts.max_intervals {
            return Err(Error::Quadrature(format!(
                "no convergence on [{a}, {b}] after {} subintervals (error estimate {total_err:.3e})",
                heap.len()
            )));
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // interval cannot be split further in floating point
            heap.push(worst);
            return Err(Error::Quadrature(format!(
                "roundoff limit reached on [{a}, {b}] (error estimate {total_err:.3e})"
            )));
        }
        let left = kronrod15(f, worst.a, mid);
        let right = kronrod15(f, mid, worst.b);
        evals += 30;
        total += left.value + right.value - worst.value;
        total_err += left.err + right.err - worst.err;
        if !total.is_finite() {
            return Err(Error::Quadrature("non-finite partial sum".into()));
        }
        heap.push(left);
        heap.push(right);
    }
    // recompute sums to shed accumulated cancellation
    let (value, abs_err) = heap
        .iter()
        .fold((0.0, 0.0), |(v, e), p| (v + p.value, e + p.err));
    Ok(QuadResult {
        value,
        abs_err,
        evals,
    })
}

/// Integral of `f` over `[a, b]`; either bound may be infinite.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, opts: &QuadOptions) -> Result<QuadResult> {
    integrate_dyn(&f, a, b, opts)
}

fn integrate_dyn(f: &dyn Fn(f64) -> f64, a: f64, b: f64, opts: &QuadOptions) -> Result<QuadResult> {
    if a.is_nan() || b.is_nan() {
        return Err(Error::Quadrature("NaN integration bound".into()));
    }
    if a == b {
        return Ok(QuadResult {
            value: 0.0,
            abs_err: 0.0,
            evals: 0,
        });
    }
    if a > b {
        let r = integrate_dyn(f, b, a, opts)?;
        return Ok(QuadResult {
            value: -r.value,
            ..r
        });
    }
    match (a.is_finite(), b.is_finite()) {
        (true, true) => adapt(&f, a, b, opts),
        (true, false) => {
            // x = a + t/(1-t)
            let g = |t: f64| {
                if t >= 1.0 {
                    return 0.0;
                }
                let s = 1.0 - t;
                let v = f(a + t / s) / (s * s);
                if v.is_finite() { v } else { 0.0 }
            };
            adapt(&g, 0.0, 1.0, opts)
        }
        (false, true) => {
            let g = |t: f64| {
                if t >= 1.0 {
                    return 0.0;
                }
                let s = 1.0 - t;
                let v = f(b - t / s) / (s * s);
                if v.is_finite() { v } else { 0.0 }
            };
            adapt(&g, 0.0, 1.0, opts)
        }
        (false, false) => {
            let left = integrate_dyn(f, f64::NEG_INFINITY, 0.0, opts)?;
            let right = integrate_dyn(f, 0.0, f64::INFINITY, opts)?;
            Ok(QuadResult {
                value: left.value + right.value,
                abs_err: left.abs_err + right.abs_err,
                evals: left.evals + right.evals,
            })
        }
    }
}

/// Integral over `[a, b]` split at the given interior breakpoints.
pub fn integrate_pieces<F: Fn(f64) -> f64>(
    f: F,
    points: &[f64],
    opts: &QuadOptions,
) -> Result<QuadResult> {
    let mut out = QuadResult {
        value: 0.0,
        abs_err: 0.0,
        evals: 0,
    };
    for w in points.windows(2) {
        let r = integrate(&f, w[0], w[1], opts)?;
        out.value += r.value;
        out.abs_err += r.abs_err;
        out.evals += r.evals;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn opts() -> QuadOptions {
        QuadOptions::default()
    }

    #[test]
    fn polynomials_and_trig() {
        let r = integrate(|x| x * x, 0.0, 3.0, &opts()).unwrap();
        assert!((r.value - 9.0).abs() < 1e-13);
        let r = integrate(f64::sin, 0.0, PI, &opts()).unwrap();
        assert!((r.value - 2.0).abs() < 1e-13);
        let r = integrate(|x| x * x, 3.0, 0.0, &opts()).unwrap();
        assert!((r.value + 9.0).abs() < 1e-13);
    }

    #[test]
    fn infinite_ranges() {
        let r = integrate(|x| (-x).exp(), 0.0, f64::INFINITY, &opts()).unwrap();
        assert!((r.value - 1.0).abs() < 1e-12);
        let r = integrate(|x| (-x * x).exp(), f64::NEG_INFINITY, f64::INFINITY, &opts()).unwrap();
        assert!((r.value - PI.sqrt()).abs() < 1e-12);
        let r = integrate(|x| 1.0 / (1.0 + x * x), f64::NEG_INFINITY, 0.0, &opts()).unwrap();
        assert!((r.value - PI / 2.0).abs() < 1e-11);
    }

    #[test]
    fn endpoint_singularity() {
        let r = integrate(|x: f64| 1.0 / x.sqrt(), 0.0, 1.0, &opts()).unwrap();
        assert!((r.value - 2.0).abs() < 1e-10, "{}", r.value);
    }

    #[test]
    fn reports_failure() {
        let tight = QuadOptions {
            max_intervals: 3,
            ..opts()
        };
        assert!(integrate(|x: f64| (50.0 * x).sin() / x.sqrt(), 0.0, 10.0, &tight).is_err());
    }
}
