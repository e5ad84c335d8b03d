//! Root finding: Brent's method in one dimension and a damped Newton iteration
//! in two, with nested bisection as the fallback.

use crate::error::{Error, Result};

/// Brent's method on a bracket `[a, b]` with `f(a)·f(b) ≤ 0`.
pub fn brent<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64, max_iter: usize) -> Result<f64> {
    let (mut a, mut b) = (a, b);
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() || fa.is_nan() || fb.is_nan() {
        return Err(Error::Infeasible(format!(
            "bracket [{a}, {b}] does not change sign (f = {fa:e}, {fb:e})"
        )));
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..max_iter {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * tol;
        let m = 0.5 * (c - b);
        if m.abs() <= tol1 || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol1 * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(m) };
        fb = f(b);
    }
    Err(Error::Calibration {
        iterations: max_iter,
        trace: format!("brent stalled near {b} (f = {fb:e})"),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution2 {
    pub x: [f64; 2],
    pub residual: [f64; 2],
    pub iterations: usize,
    pub method: &'static str,
    pub trace: Vec<String>,
}

fn norm(r: [f64; 2]) -> f64 {
    r[0].hypot(r[1])
}

/// Damped Newton iteration for `f(x) = 0` in two dimensions using a
/// forward-difference Jacobian.
pub fn newton2<F>(f: F, x0: [f64; 2], tol: f64, max_iter: usize) -> Result<Solution2>
where
    F: Fn([f64; 2]) -> Result<[f64; 2]>,
{
    let mut x = x0;
    let mut r = f(x)?;
    let mut trace = vec![format!("it=0 x=({:.6e},{:.6e}) |r|={:.3e}", x[0], x[1], norm(r))];
    for it in 1..=max_iter {
        if r[0].abs() <= tol && r[1].abs() <= tol {
            return Ok(Solution2 {
                x,
                residual: r,
                iterations: it - 1,
                method: "newton",
                trace,
            });
        }
        let mut jac = [[0.0; 2]; 2];
        for k in 0..2 {
            let h = 1e-7 * (1.0 + x[k].abs());
            let mut xp = x;
            xp[k] += h;
            let rp = f(xp)?;
            jac[0][k] = (rp[0] - r[0]) / h;
            jac[1][k] = (rp[1] - r[1]) / h;
        }
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        if det == 0.0 || !det.is_finite() {
            return Err(Error::Calibration {
                iterations: it,
                trace: format!("{}; singular Jacobian", trace.join("; ")),
            });
        }
        let step = [
            (jac[1][1] * r[0] - jac[0][1] * r[1]) / det,
            (-jac[1][0] * r[0] + jac[0][0] * r[1]) / det,
        ];
        let mut damp = 1.0;
        let current = norm(r);
        loop {
            let trial = [x[0] - damp * step[0], x[1] - damp * step[1]];
            match f(trial) {
                Ok(rt) if norm(rt) < current || damp < 1e-6 => {
                    x = trial;
                    r = rt;
                    break;
                }
                _ if damp < 1e-6 => {
                    return Err(Error::Calibration {
                        iterations: it,
                        trace: format!("{}; line search failed", trace.join("; ")),
                    })
                }
                _ => damp *= 0.5,
            }
        }
        trace.push(format!(
            "it={it} x=({:.6e},{:.6e}) |r|={:.3e} damp={damp}",
            x[0],
            x[1],
            norm(r)
        ));
    }
    if r[0].abs() <= tol && r[1].abs() <= tol {
        return Ok(Solution2 {
            x,
            residual: r,
            iterations: max_iter,
            method: "newton",
            trace,
        });
    }
    Err(Error::Calibration {
        iterations: max_iter,
        trace: trace.join("; "),
    })
}

/// Nested bisection: for each outer `x`, the inner equation `f(x, y)[1] = 0`
/// is solved for `y` within `y_bracket`, then the outer equation
/// `f(x, y(x))[0] = 0` is solved within `x_bracket`.
pub fn nested_bisection<F>(
    f: F,
    x_bracket: (f64, f64),
    y_bracket: (f64, f64),
    tol: f64,
) -> Result<Solution2>
where
    F: Fn([f64; 2]) -> Result<[f64; 2]>,
{
    let inner = |x: f64| -> Result<f64> {
        brent(
            |y| f([x, y]).map(|r| r[1]).unwrap_or(f64::NAN),
            y_bracket.0,
            y_bracket.1,
            tol * 1e-3,
            400,
        )
    };
    let outer = |x: f64| match inner(x) {
        Ok(y) => f([x, y]).map(|r| r[0]).unwrap_or(f64::NAN),
        Err(_) => f64::NAN,
    };
    let x = brent(outer, x_bracket.0, x_bracket.1, tol * 1e-3, 400)?;
    let y = inner(x)?;
    let residual = f([x, y])?;
    Ok(Solution2 {
        x: [x, y],
        residual,
        iterations: 0,
        method: "nested-bisection",
        trace: vec![format!("nested bisection converged at ({x:.12e}, {y:.12e})")],
    })
}
