//! Children with a Pareto-type left tail and an exponential right tail:
//! q(x) ∝ w e^{x}(1+|x|)^{-1-α} for x < 0 and e^{-γx} for x ≥ 0.
//!
//! The spine step law is then ∝ w(1+|x|)^{-1-α} on x < 0 and e^{-(1+γ)x} on
//! x ≥ 0: a walk with a polynomial left tail of index α and no heavy right
//! tail.

use rand::Rng;
use rand_distr::Exp;

use super::ChildLaw;
use crate::error::{Error, Result};
use crate::quadrature::{integrate, QuadOptions};
use crate::rng::{exp1, open01, SimRng};
use crate::rootfind::{nested_bisection, newton2, Solution2};

/// Integrals of the left part that do not depend on (w, γ).
#[derive(Debug, Clone, Copy)]
struct LeftIntegrals {
    /// ∫_0^∞ e^{-y}(1+y)^{-1-α} dy
    mass: f64,
    /// ∫_0^∞ (1+y)^{-1-α} dy
    tilted: f64,
    /// ∫_0^∞ y (1+y)^{-1-α} dy
    tilted_first: f64,
}

fn left_integrals(alpha: f64) -> Result<LeftIntegrals> {
    let opts = QuadOptions {
        abs_tol: 1e-14,
        rel_tol: 1e-14,
        max_intervals: 4000,
    };
    let p = -1.0 - alpha;
    Ok(LeftIntegrals {
        mass: integrate(|y: f64| (-y).exp() * (1.0 + y).powf(p), 0.0, f64::INFINITY, &opts)?.value,
        tilted: 1.0 / alpha,
        tilted_first: 1.0 / (alpha * (alpha - 1.0)),
    })
}

#[derive(Debug, Clone)]
pub struct ParetoExpChild {
    alpha: f64,
    w: f64,
    gamma: f64,
    left: LeftIntegrals,
    /// Normalizing constant of q.
    z: f64,
    p_left: f64,
    spine_p_left: f64,
    right: Exp<f64>,
    spine_right: Exp<f64>,
}

impl ParetoExpChild {
    pub fn new(alpha: f64, w: f64, gamma: f64) -> Result<Self> {
        if !(alpha > 1.0 && alpha < 2.0) {
            return Err(Error::InvalidParameter(format!("alpha = {alpha} is outside (1, 2)")));
        }
        let left = left_integrals(alpha)?;
        Self::with_integrals(alpha, w, gamma, left)
    }

    fn with_integrals(alpha: f64, w: f64, gamma: f64, left: LeftIntegrals) -> Result<Self> {
        if !(w > 0.0 && gamma > 0.0) || !w.is_finite() || !gamma.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "weight {w} and rate {gamma} must be positive"
            )));
        }
        let z = w * left.mass + 1.0 / gamma;
        let tl = w * left.tilted;
        let tr = 1.0 / (1.0 + gamma);
        Ok(Self {
            alpha,
            w,
            gamma,
            left,
            z,
            p_left: w * left.mass / z,
            spine_p_left: tl / (tl + tr),
            right: Exp::new(gamma).expect("positive rate"),
            spine_right: Exp::new(1.0 + gamma).expect("positive rate"),
        })
    }

    pub fn weight(&self) -> f64 {
        self.w
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Weight of the polynomial piece in the spine law; the spine is
    /// -(U^{-1/α} - 1) with this probability and Exp(1 + γ) otherwise.
    pub fn spine_left_weight(&self) -> f64 {
        self.spine_p_left
    }

    /// (E_q[e^{-X}], E_q[X e^{-X}]).
    pub fn moments(&self) -> (f64, f64) {
        let g1 = 1.0 + self.gamma;
        let mass = (self.w * self.left.tilted + 1.0 / g1) / self.z;
        let drift = (-self.w * self.left.tilted_first + 1.0 / (g1 * g1)) / self.z;
        (mass, drift)
    }

    /// Solves b·E_q[e^{-X}] = 1 and E_q[X e^{-X}] = 0 for (w, γ) by damped
    /// Newton, falling back to nested bisection.
    pub fn calibrate(alpha: f64, count_mean: f64, init: [f64; 2], tol: f64) -> Result<(Self, Solution2)> {
        if !(alpha > 1.0 && alpha < 2.0) {
            return Err(Error::InvalidParameter(format!("alpha = {alpha} is outside (1, 2)")));
        }
        let left = left_integrals(alpha)?;
        let residual = |p: [f64; 2]| -> Result<[f64; 2]> {
            let c = Self::with_integrals(alpha, p[0], p[1], left)?;
            let (m, d) = c.moments();
            Ok([count_mean * m - 1.0, count_mean * d])
        };
        let sol = match newton2(residual, init, tol, 100) {
            Ok(s) => s,
            Err(newton_err) => {
                // outer variable γ, inner variable w
                let swapped = |p: [f64; 2]| residual([p[1], p[0]]);
                let mut s = nested_bisection(swapped, (1e-4, 1e3), (1e-12, 1e3), tol).map_err(|e| {
                    Error::Calibration {
                        iterations: 100,
                        trace: format!("newton: {newton_err}; nested bisection: {e}"),
                    }
                })?;
                s.x = [s.x[1], s.x[0]];
                s.residual = residual(s.x)?;
                s
            }
        };
        if sol.residual.iter().any(|r| r.abs() > tol) {
            return Err(Error::Calibration {
                iterations: sol.iterations,
                trace: format!("residuals {:?} above tolerance {tol:e}", sol.residual),
            });
        }
        Ok((Self::with_integrals(alpha, sol.x[0], sol.x[1], left)?, sol))
    }
}

impl ChildLaw for ParetoExpChild {
    fn sample(&self, rng: &mut SimRng) -> f64 {
        if rng.random::<f64>() < self.p_left {
            // density ∝ e^{-y}(1+y)^{-1-α}: exponential proposal
            loop {
                let y = exp1(rng);
                if rng.random::<f64>() < (1.0 + y).powf(-1.0 - self.alpha) {
                    return -y;
                }
            }
        } else {
            rng.sample(self.right)
        }
    }

    fn sample_tilted(&self, rng: &mut SimRng) -> f64 {
        if rng.random::<f64>() < self.spine_p_left {
            // P(1 + Y > s) = s^{-α}
            1.0 - open01(rng).powf(-1.0 / self.alpha)
        } else {
            rng.sample(self.spine_right)
        }
    }

    fn laplace(&self, t: f64) -> Option<f64> {
        if t > 1.0 || t <= -self.gamma {
            return None;
        }
        let left = if t == 1.0 {
            self.left.tilted
        } else {
            let a = self.alpha;
            integrate(
                |y: f64| ((t - 1.0) * y).exp() * (1.0 + y).powf(-1.0 - a),
                0.0,
                f64::INFINITY,
                &QuadOptions::default(),
            )
            .ok()?
            .value
        };
        Some((self.w * left + 1.0 / (t + self.gamma)) / self.z)
    }

    fn boundary_moments(&self) -> (f64, f64) {
        self.moments()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn left_mass_integral() {
        // two integrations by parts down to e√π erfc(1)
        let l = left_integrals(1.5).unwrap();
        let j = std::f64::consts::E * std::f64::consts::PI.sqrt() * 0.157_299_207_050_285_13;
        assert!((l.mass - (1.0 - 2.0 * (1.0 - j)) / 1.5).abs() < 1e-13);
    }

    #[test]
    fn calibration_solves_drift_in_closed_form() {
        let (c, sol) = ParetoExpChild::calibrate(1.5, 2.0, [0.2, 1.0], 1e-12).unwrap();
        let (m, d) = c.moments();
        assert!((2.0 * m - 1.0).abs() < 1e-12 && d.abs() < 1e-12, "{sol:?}");
        // zero drift forces w = α(α-1)/(1+γ)²
        let g1 = 1.0 + c.gamma();
        assert!((c.weight() - 0.75 / (g1 * g1)).abs() < 1e-9);
    }
}
