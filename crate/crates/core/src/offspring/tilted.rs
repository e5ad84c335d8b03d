//! Children displaced by the exponential tilt q(x) = e^{x-1} f_S(x) of the
//! stable density without positive jumps.
//!
//! With E[N] = e, E[Σe^{-X}] = e·∫e^{-x}q = ∫f_S = 1 and
//! E[ΣXe^{-X}] = ∫x f_S = 0, and the spine step law e·e^{-x}q(x) is f_S
//! itself.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rand::Rng;

use super::table::PiecewiseLinearLaw;
use super::ChildLaw;
use crate::error::{Error, Result};
use crate::quadrature::{integrate, QuadOptions};
use crate::rng::{exp1, SimRng};
use crate::special::gamma;
use crate::stable::{StableParamsC, StableSampler};

const TABLE_LO: f64 = -30.0;
const TABLE_HI: f64 = 8.0;
const TABLE_H: f64 = 0.002;

/// Kronrod 15-point nodes and weights on [-1, 1].
const XK: [f64; 15] = [
    -0.991_455_371_120_812_6,
    -0.949_107_912_342_758_5,
    -0.864_864_423_359_769_1,
    -0.741_531_185_599_394_4,
    -0.586_087_235_467_691_1,
    -0.405_845_151_377_397_2,
    -0.207_784_955_007_898_5,
    0.0,
    0.207_784_955_007_898_5,
    0.405_845_151_377_397_2,
    0.586_087_235_467_691_1,
    0.741_531_185_599_394_4,
    0.864_864_423_359_769_1,
    0.949_107_912_342_758_5,
    0.991_455_371_120_812_6,
];
const WK: [f64; 15] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
    0.204_432_940_075_298_9,
    0.190_350_578_064_785_4,
    0.169_004_726_639_267_9,
    0.140_653_259_715_525_92,
    0.104_790_010_322_250_18,
    0.063_092_092_629_978_55,
    0.022_935_322_010_529_22,
];

/// Stable density on the uniform grid x0 + i h, i < n, by inverting the
/// characteristic function: f(x) = (1/π) ∫_0^∞ Re[e^{-itx} φ(t)] dt.
/// The t-axis uses geometrically graded panels near 0 (φ has a branch
/// point there) and panels of width 0.02 elsewhere.
pub fn stable_density_grid(p: &StableParamsC, x0: f64, h: f64, n: usize) -> Vec<f64> {
    let a = PI * p.theta() * p.alpha() / 2.0;
    let decay = p.lambda() * a.cos();
    let t_max = (45.0 / decay).powf(1.0 / p.alpha());
    let mut breaks = vec![0.0];
    let mut b = 1e-8;
    while b < 0.02 {
        breaks.push(b);
        b *= 10.0;
    }
    let mut t = 0.02;
    while t < t_max {
        breaks.push(t);
        t += 0.02;
    }
    breaks.push(t_max);
    let mut out = vec![0.0; n];
    for w in breaks.windows(2) {
        let (c, half) = (0.5 * (w[0] + w[1]), 0.5 * (w[1] - w[0]));
        for (xk, wk) in XK.iter().zip(WK) {
            let tj = c + half * xk;
            let weight = wk * half / PI;
            let phi = p.char_function(tj) * weight;
            let mut z = Complex64::from_polar(1.0, -tj * x0) * phi;
            let rot = Complex64::from_polar(1.0, -tj * h);
            for (i, o) in out.iter_mut().enumerate() {
                *o += z.re;
                z *= rot;
                // re-anchor to stop the rotation drifting
                if i % 2048 == 2047 {
                    z = Complex64::from_polar(1.0, -tj * (x0 + (i + 1) as f64 * h)) * phi;
                }
            }
        }
    }
    out
}

/// Stable density at a single point by adaptive quadrature; slow, used to
/// cross-check the grid.
pub fn stable_density_at(p: &StableParamsC, x: f64) -> Result<f64> {
    let opts = QuadOptions {
        abs_tol: 1e-14,
        rel_tol: 1e-12,
        max_intervals: 20_000,
    };
    let g = |t: f64| (Complex64::from_polar(1.0, -t * x) * p.char_function(t)).re;
    let a = PI * p.theta() * p.alpha() / 2.0;
    let t_max = (45.0 / (p.lambda() * a.cos())).powf(1.0 / p.alpha());
    Ok(integrate(g, 0.0, t_max, &opts)?.value / PI)
}

/// Asymptotic series of the stable density on the negative half-line,
/// f(-y) ~ (1/π) Σ_k (-1)^{k+1} λ^k Γ(kα+1)/k! sin(kπαρ̄) y^{-kα-1}, and of
/// its tail integrals ∫_y^∞ f(-u) du and ∫_y^∞ u f(-u) du.
#[derive(Debug, Clone)]
pub struct LeftTailSeries {
    alpha: f64,
    coef: Vec<f64>,
}

impl LeftTailSeries {
    pub fn new(p: &StableParamsC) -> Self {
        let (alpha, arb) = (p.alpha(), p.alpha_rho_bar());
        let mut coef = Vec::new();
        let mut fact = 1.0;
        for k in 1..=24 {
            let kf = f64::from(k);
            fact *= kf;
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            let sin = (kf * PI * arb).sin();
            // drop terms that vanish up to rounding
            let sin = if sin.abs() < 1e-12 { 0.0 } else { sin };
            coef.push(sign * p.lambda().powi(k) * gamma(kf * alpha + 1.0) / fact * sin / PI);
        }
        Self { alpha, coef }
    }

    /// Sums c_k y^{-kα+shift}/div(k) until the terms stop shrinking.
    fn sum(&self, y: f64, shift: f64, div: impl Fn(f64) -> f64) -> f64 {
        let mut total = 0.0;
        let mut prev = f64::INFINITY;
        for (i, c) in self.coef.iter().enumerate() {
            let k = (i + 1) as f64;
            if *c == 0.0 {
                continue;
            }
            let term = c * y.powf(-k * self.alpha + shift) / div(k);
            if term.abs() > prev {
                break;
            }
            total += term;
            if term.abs() < 1e-18 * total.abs() {
                break;
            }
            prev = term.abs();
        }
        total
    }

    pub fn density(&self, y: f64) -> f64 {
        self.sum(y, -1.0, |_| 1.0)
    }

    /// ∫_y^∞ f(-u) du.
    pub fn mass(&self, y: f64) -> f64 {
        let a = self.alpha;
        self.sum(y, 0.0, |k| k * a)
    }

    /// ∫_y^∞ u f(-u) du.
    pub fn first_moment(&self, y: f64) -> f64 {
        let a = self.alpha;
        self.sum(y, 1.0, |k| k * a - 1.0)
    }
}

/// The piece of the child law below the table, x < TABLE_LO, where
/// q(x) = e^{x} f_S(x)/m is taken from the tail series.
#[derive(Debug, Clone)]
struct LeftTail {
    series: LeftTailSeries,
    /// ∫_{-∞}^{L} q
    mass: f64,
    /// ∫_{-∞}^{L} e^{-x} q
    tilted_mass: f64,
    /// ∫_{-∞}^{L} x e^{-x} q
    tilted_first: f64,
}

impl LeftTail {
    fn new(params: &StableParamsC, mean_count: f64) -> Result<Self> {
        let series = LeftTailSeries::new(params);
        let y0 = -TABLE_LO;
        // ∫_0^∞ e^{-u} f(-(y0+u)) du, scaled by e^{-y0}
        let inner = integrate(
            |u: f64| (-u).exp() * series.density(y0 + u),
            0.0,
            f64::INFINITY,
            &QuadOptions {
                abs_tol: 0.0,
                rel_tol: 1e-13,
                max_intervals: 2000,
            },
        )?
        .value;
        Ok(Self {
            mass: (-y0).exp() * inner / mean_count,
            tilted_mass: series.mass(y0) / mean_count,
            tilted_first: -series.first_moment(y0) / mean_count,
            series,
        })
    }

    /// Draw from q restricted to x < L: L - Y with Y ~ Exp(1), accepted with
    /// probability f(-y)/f(L).
    fn sample(&self, rng: &mut SimRng) -> f64 {
        let y0 = -TABLE_LO;
        let top = self.series.density(y0);
        loop {
            let y = y0 + exp1(rng);
            if rng.random::<f64>() * top < self.series.density(y) {
                return -y;
            }
        }
    }
}

#[derive(Debug)]
struct ChildTable {
    table: PiecewiseLinearLaw,
    tail: LeftTail,
    /// P(X < L) for the combined law.
    p_tail: f64,
    /// E[e^{-X}] and E[X e^{-X}] for the combined law.
    moments: (f64, f64),
}

#[derive(Debug)]
pub struct TiltedStableChild {
    params: StableParamsC,
    mean_count: f64,
    child: Arc<ChildTable>,
    spine: StableSampler,
}

fn table_cache() -> &'static Mutex<HashMap<u64, Arc<ChildTable>>> {
    static CACHE: OnceLock<Mutex<HashMap<u64, Arc<ChildTable>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Builds the child law: a piecewise-linear table on [L, 8] plus the series
/// tail below L. The table nodes get the multiplicative correction
/// 1 + c₁x + c₂x² that makes the combined law satisfy both boundary-case
/// identities; it only absorbs the discretization error of the table.
fn build_table(params: &StableParamsC, mean_count: f64) -> Result<ChildTable> {
    let n = ((TABLE_HI - TABLE_LO) / TABLE_H).round() as usize + 1;
    let f = stable_density_grid(params, TABLE_LO, TABLE_H, n);
    let node = |i: usize| TABLE_LO + i as f64 * TABLE_H;
    let raw: Vec<f64> = f
        .iter()
        .enumerate()
        .map(|(i, &fi)| node(i).exp() * fi.max(0.0) / mean_count)
        .collect();
    let tail = LeftTail::new(params, mean_count)?;
    let shape = PiecewiseLinearLaw::new(TABLE_LO, TABLE_H, vec![1.0; n])?;
    let k0 = shape.node_kernels(|_| 1.0);
    let k1 = shape.node_kernels(|x| (-x).exp());
    let k2 = shape.node_kernels(|x| x * (-x).exp());
    let mom = |k: &[f64], pw: i32| -> f64 { (0..n).map(|i| raw[i] * node(i).powi(pw) * k[i]).sum() };
    // mass: m(M1 + A) - (M0 + P) = 0; drift: M2 + D = 0
    let m = mean_count;
    let a11 = m * mom(&k1, 1) - mom(&k0, 1);
    let a12 = m * mom(&k1, 2) - mom(&k0, 2);
    let r1 = tail.mass - m * tail.tilted_mass - (m * mom(&k1, 0) - mom(&k0, 0));
    let a21 = mom(&k2, 1);
    let a22 = mom(&k2, 2);
    let r2 = -tail.tilted_first - mom(&k2, 0);
    let det = a11 * a22 - a12 * a21;
    if det == 0.0 {
        return Err(Error::Calibration {
            iterations: 0,
            trace: "singular moment correction for the tilted-stable table".into(),
        });
    }
    let c1 = (r1 * a22 - a12 * r2) / det;
    let c2 = (a11 * r2 - a21 * r1) / det;
    let corrected: Vec<f64> = (0..n)
        .map(|i| {
            let x = node(i);
            raw[i] * (1.0 + c1 * x + c2 * x * x)
        })
        .collect();
    if corrected.iter().any(|v| *v < 0.0) || c1.abs().max(c2.abs()) > 1e-3 {
        return Err(Error::Calibration {
            iterations: 0,
            trace: format!("moment correction (c1 = {c1:e}, c2 = {c2:e}) is not a small perturbation"),
        });
    }
    let t_mass: f64 = corrected.iter().zip(&k0).map(|(v, k)| v * k).sum();
    let table = PiecewiseLinearLaw::new(TABLE_LO, TABLE_H, corrected)?;
    let total = t_mass + tail.mass;
    let mass = (t_mass * table.expect(|x| (-x).exp()) + tail.tilted_mass) / total;
    let drift = (t_mass * table.expect(|x| x * (-x).exp()) + tail.tilted_first) / total;
    Ok(ChildTable {
        table,
        p_tail: tail.mass / total,
        tail,
        moments: (mass, drift),
    })
}

impl TiltedStableChild {
    pub fn new(alpha: f64) -> Result<Self> {
        let params = StableParamsC::spectrally_negative(alpha)?;
        let mean_count = std::f64::consts::E;
        let key = alpha.to_bits();
        let cached = table_cache().lock().expect("table cache").get(&key).cloned();
        let child = match cached {
            Some(c) => c,
            None => {
                let built = Arc::new(build_table(&params, mean_count)?);
                table_cache().lock().expect("table cache").insert(key, built.clone());
                built
            }
        };
        Ok(Self {
            params,
            mean_count,
            child,
            spine: StableSampler::new(params),
        })
    }

    pub fn params(&self) -> &StableParamsC {
        &self.params
    }

    /// The tabulated part on [L, 8], normalized.
    pub fn table(&self) -> &PiecewiseLinearLaw {
        &self.child.table
    }

    /// Probability of the series tail below the table.
    pub fn tail_probability(&self) -> f64 {
        self.child.p_tail
    }

    /// Boundary-case residuals of the law actually sampled.
    pub fn table_residuals(&self) -> (f64, f64) {
        let (m, d) = self.child.moments;
        ((self.mean_count * m - 1.0).abs(), (self.mean_count * d).abs())
    }

    pub fn mean_count(&self) -> f64 {
        self.mean_count
    }

    pub fn spine_sampler(&self) -> StableSampler {
        self.spine
    }
}

/// 2^-30: the tail is chosen in two stages so that its tiny probability is
/// not rounded to a multiple of 2^-53.
const STAGE: f64 = 9.313_225_746_154_785e-10;

impl ChildLaw for TiltedStableChild {
    #[inline]
    fn sample(&self, rng: &mut SimRng) -> f64 {
        let c = &self.child;
        if rng.random::<f64>() < STAGE && rng.random::<f64>() < c.p_tail / STAGE {
            return c.tail.sample(rng);
        }
        c.table.sample(rng)
    }

    #[inline]
    fn sample_tilted(&self, rng: &mut SimRng) -> f64 {
        self.spine.sample(rng)
    }

    fn laplace(&self, t: f64) -> Option<f64> {
        // E_q[e^{-tX}] = E[e^{(1-t)S}]/e = exp((1-t)^α - 1)
        if t <= 1.0 {
            Some(((1.0 - t).powf(self.params.alpha()) - 1.0).exp())
        } else {
            None
        }
    }

    fn boundary_moments(&self) -> (f64, f64) {
        // the sampled law, not the exact values 1/e and 0
        self.child.moments
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_density_matches_adaptive_quadrature() {
        let p = StableParamsC::spectrally_negative(1.5).unwrap();
        let xs = [-20.0, -5.0, -1.0, 0.0, 0.7, 2.0, 4.0];
        for &x in &xs {
            let g = stable_density_grid(&p, x, 0.01, 1)[0];
            let a = stable_density_at(&p, x).unwrap();
            assert!((g - a).abs() < 1e-12, "x={x}: {g} vs {a}");
        }
    }

    #[test]
    fn left_tail_is_polynomial() {
        // f(-x) ≈ Γ(2.5)/π · x^{-2.5} for large x
        let p = StableParamsC::spectrally_negative(1.5).unwrap();
        let x: f64 = 25.0;
        let f = stable_density_at(&p, -x).unwrap();
        let lead = gamma(2.5) / PI * x.powf(-2.5);
        assert!((f / lead - 1.0).abs() < 0.01, "{f} vs {lead}");
        let series = LeftTailSeries::new(&p).density(x);
        assert!((f - series).abs() < 1e-14, "{f} vs {series}");
    }

    #[test]
    fn tail_series_joins_the_grid() {
        let p = StableParamsC::spectrally_negative(1.5).unwrap();
        let s = LeftTailSeries::new(&p);
        let g = stable_density_grid(&p, TABLE_LO, TABLE_H, 1)[0];
        assert!((g / s.density(-TABLE_LO) - 1.0).abs() < 1e-9);
        // tail integrals of the series density, 30-digit quadrature
        assert!((s.mass(30.0) - 0.001_716_635_182_124_598_8).abs() < 1e-16);
        assert!((s.first_moment(30.0) - 0.154_504_317_323_440_88).abs() < 1e-14);
    }

    #[test]
    fn table_satisfies_boundary_case() {
        let c = TiltedStableChild::new(1.5).unwrap();
        let (m, d) = c.table_residuals();
        assert!(m < 1e-12 && d < 1e-12, "{m:e} {d:e}");
        // normalized interpolant stays close to the exact tilt
        let t = c.table();
        let p = *c.params();
        for &x in &[-3.0, 0.0, 1.5, 3.0] {
            let exact = (x - 1.0f64).exp() * stable_density_at(&p, x).unwrap();
            assert!((t.density(x) - exact).abs() < 1e-6, "x={x}");
        }
    }
}
