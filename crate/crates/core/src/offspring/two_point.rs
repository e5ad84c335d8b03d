//! Children placed at ±v.

use rand::Rng;
use rand_distr::{Binomial, Distribution};

use super::ChildLaw;
use crate::error::{Error, Result};
use crate::rng::SimRng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoPointChild {
    v: f64,
    p_plus: f64,
    /// P(+v) under the tilted law e^{-x}q(x)/E_q[e^{-X}].
    tilted_plus: f64,
}

impl TwoPointChild {
    pub fn new(v: f64, p_plus: f64) -> Result<Self> {
        if !(v > 0.0 && v.is_finite()) || !(0.0..=1.0).contains(&p_plus) {
            return Err(Error::InvalidParameter(format!("two-point child needs v > 0 and p in [0, 1] (v = {v}, p = {p_plus})")));
        }
        let a = p_plus * (-v).exp();
        let b = (1.0 - p_plus) * v.exp();
        Ok(Self {
            v,
            p_plus,
            tilted_plus: a / (a + b),
        })
    }

    /// The unique two-point law on ±v that satisfies the boundary case for
    /// mean count m > 1: v = acosh(m) and P(+v) = e^{v}/(2m). Its tilted law
    /// is symmetric.
    pub fn boundary(m: f64) -> Result<Self> {
        if !(m > 1.0 && m.is_finite()) {
            return Err(Error::InvalidParameter(format!("mean count {m} must exceed 1")));
        }
        let v = m.acosh();
        Self::new(v, v.exp() / (2.0 * m))
    }

    pub fn v(&self) -> f64 {
        self.v
    }

    pub fn p_plus(&self) -> f64 {
        self.p_plus
    }

    /// Number of +v children among n.
    pub fn count_plus(&self, n: u64, rng: &mut SimRng) -> u64 {
        Binomial::new(n, self.p_plus).expect("valid probability").sample(rng)
    }
}

impl ChildLaw for TwoPointChild {
    fn sample(&self, rng: &mut SimRng) -> f64 {
        if rng.random::<f64>() < self.p_plus {
            self.v
        } else {
            -self.v
        }
    }

    fn sample_tilted(&self, rng: &mut SimRng) -> f64 {
        if rng.random::<f64>() < self.tilted_plus {
            self.v
        } else {
            -self.v
        }
    }

    fn laplace(&self, t: f64) -> Option<f64> {
        Some(self.p_plus * (-t * self.v).exp() + (1.0 - self.p_plus) * (t * self.v).exp())
    }

    fn boundary_moments(&self) -> (f64, f64) {
        let a = self.p_plus * (-self.v).exp();
        let b = (1.0 - self.p_plus) * self.v.exp();
        (a + b, self.v * (a - b))
    }

    fn atoms(&self) -> Option<[(f64, f64); 2]> {
        Some([(self.v, self.p_plus), (-self.v, 1.0 - self.p_plus)])
    }

    fn sum_functionals(&self, n: u64, arb: f64, rng: &mut SimRng) -> Option<(f64, f64)> {
        let k = self.count_plus(n, rng) as f64;
        let rest = n as f64 - k;
        let (ep, em) = ((-self.v).exp(), self.v.exp());
        Some((k * ep + rest * em, k * self.v.powf(arb) * ep))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundary_law_is_critical() {
        for m in [2.0, 2.5, 7.0] {
            let c = TwoPointChild::boundary(m).unwrap();
            let (a, b) = c.boundary_moments();
            assert!((m * a - 1.0).abs() < 1e-13 && b.abs() < 1e-13);
            assert!((c.tilted_plus - 0.5).abs() < 1e-13);
        }
        assert!(TwoPointChild::boundary(1.0).is_err());
    }
}
