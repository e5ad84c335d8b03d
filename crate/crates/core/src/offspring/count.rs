//! Laws of the number of children.

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{open01, SimRng};

/// Largest value of [`CountLaw::LogHeavy`]; the untruncated law puts mass
/// below 1e-13 beyond it.
pub const HEAVY_COUNT_CAP: u64 = 1_000_000_000_000;

#[derive(Debug, Clone, PartialEq)]
pub enum CountLaw {
    Fixed(u32),
    /// Finite support: (count, probability) pairs summing to 1.
    Finite(Vec<(u32, f64)>),
    /// P(N > k) = 1 for k < 2 and c/(k (ln k)^γ) for k ≥ 2, with
    /// c = 2 (ln 2)^γ, so N ≥ 3, truncated at [`HEAVY_COUNT_CAP`]. Without
    /// the cap the mean is finite for γ > 1 while E[N (ln N)^p] diverges
    /// for p ≥ γ - 1.
    LogHeavy { gamma: f64 },
}

impl CountLaw {
    pub fn finite(pmf: Vec<(u32, f64)>) -> Result<Self> {
        let total: f64 = pmf.iter().map(|p| p.1).sum();
        if pmf.is_empty() || pmf.iter().any(|p| !(p.1 >= 0.0)) || (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "count probabilities must be non-negative and sum to 1 (sum = {total})"
            )));
        }
        Ok(Self::Finite(pmf))
    }

    pub fn log_heavy(gamma: f64) -> Result<Self> {
        if !(gamma > 1.0) {
            return Err(Error::InvalidParameter(format!(
                "heavy count law needs gamma > 1 for a finite mean (gamma = {gamma})"
            )));
        }
        Ok(Self::LogHeavy { gamma })
    }

    fn heavy_tail(gamma: f64, k: f64) -> f64 {
        if k < 2.0 {
            1.0
        } else {
            (2.0 * 2f64.ln().powf(gamma) / (k * k.ln().powf(gamma))).min(1.0)
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            Self::Fixed(k) => f64::from(*k),
            Self::Finite(pmf) => pmf.iter().map(|&(k, p)| f64::from(k) * p).sum(),
            Self::LogHeavy { gamma } => {
                // P(N > k) summed over k < cap: direct to 1e6, then
                // Euler–Maclaurin
                let g = *gamma;
                let cut = 1_000_000u64;
                let mut total = 2.0;
                for k in 2..cut {
                    total += Self::heavy_tail(g, k as f64);
                }
                let (a, b) = (cut as f64, (HEAVY_COUNT_CAP - 1) as f64);
                let c = 2.0 * 2f64.ln().powf(g);
                let f = |x: f64| Self::heavy_tail(g, x);
                let df = |x: f64| -c * (x.ln() + g) / (x * x * x.ln().powf(g + 1.0));
                let integral = c * (a.ln().powf(1.0 - g) - b.ln().powf(1.0 - g)) / (g - 1.0);
                total + integral + 0.5 * (f(a) + f(b)) + (df(b) - df(a)) / 12.0
            }
        }
    }

    /// P(N ≥ 2).
    pub fn prob_at_least_two(&self) -> f64 {
        match self {
            Self::Fixed(k) => f64::from(u8::from(*k >= 2)),
            Self::Finite(pmf) => pmf.iter().filter(|p| p.0 >= 2).map(|p| p.1).sum(),
            Self::LogHeavy { .. } => 1.0,
        }
    }

    pub fn sample(&self, rng: &mut SimRng) -> u64 {
        match self {
            Self::Fixed(k) => u64::from(*k),
            Self::Finite(pmf) => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for &(k, p) in pmf {
                    acc += p;
                    if u < acc {
                        return u64::from(k);
                    }
                }
                u64::from(pmf.last().expect("non-empty").0)
            }
            Self::LogHeavy { gamma } => {
                // smallest k with P(N > k) < u
                let u = open01(rng);
                let (mut lo, mut hi) = (2u64, HEAVY_COUNT_CAP);
                if Self::heavy_tail(*gamma, hi as f64) >= u {
                    return hi;
                }
                while hi - lo > 1 {
                    let mid = lo + (hi - lo) / 2;
                    if Self::heavy_tail(*gamma, mid as f64) >= u {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                hi
            }
        }
    }

    /// Draw from the size-biased law k·P(N = k)/E[N].
    pub fn sample_size_biased(&self, rng: &mut SimRng) -> Result<u64> {
        match self {
            Self::Fixed(k) => Ok(u64::from(*k)),
            Self::Finite(pmf) => {
                let m = self.mean();
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for &(k, p) in pmf {
                    acc += f64::from(k) * p / m;
                    if u < acc {
                        return Ok(u64::from(k));
                    }
                }
                Ok(u64::from(pmf.iter().rev().find(|p| p.1 > 0.0).expect("non-empty").0))
            }
            Self::LogHeavy { .. } => Err(Error::Unsupported(
                "size-biased sampling of the heavy count law".into(),
            )),
        }
    }

    /// Support and probabilities when the support is finite.
    pub fn enumerate(&self) -> Option<Vec<(u32, f64)>> {
        match self {
            Self::Fixed(k) => Some(vec![(*k, 1.0)]),
            Self::Finite(pmf) => Some(pmf.clone()),
            Self::LogHeavy { .. } => None,
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Self::Fixed(k) => format!("fixed({k})"),
            Self::Finite(pmf) => {
                let parts: Vec<String> = pmf.iter().map(|(k, p)| format!("{k}:{p}")).collect();
                format!("finite({})", parts.join(";"))
            }
            Self::LogHeavy { gamma } => format!("log-heavy(gamma={gamma})"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStreams;

    #[test]
    fn means() {
        assert_eq!(CountLaw::Fixed(2).mean(), 2.0);
        let e = std::f64::consts::E;
        let l = CountLaw::finite(vec![(2, 3.0 - e), (3, e - 2.0)]).unwrap();
        assert!((l.mean() - e).abs() < 1e-15);
        assert!(CountLaw::finite(vec![(2, 0.5)]).is_err());
        assert!(CountLaw::log_heavy(1.0).is_err());
    }

    #[test]
    fn size_biased_finite_law() {
        let l = CountLaw::finite(vec![(1, 0.5), (3, 0.5)]).unwrap();
        let mut rng = RngStreams::new(9).replica(0);
        let n = 40_000;
        let threes = (0..n).filter(|_| l.sample_size_biased(&mut rng).unwrap() == 3).count();
        // P*(3) = 3·0.5/2 = 0.75
        let p = threes as f64 / n as f64;
        assert!((p - 0.75).abs() < 4.0 * (0.75f64 * 0.25 / n as f64).sqrt());
    }

    #[test]
    fn heavy_law_tail() {
        let l = CountLaw::log_heavy(1.5).unwrap();
        let mut rng = RngStreams::new(10).replica(0);
        let n = 200_000;
        let draws: Vec<u64> = (0..n).map(|_| l.sample(&mut rng)).collect();
        assert!(draws.iter().all(|&k| k >= 3));
        for k in [10u64, 100, 1000] {
            let p = draws.iter().filter(|&&d| d > k).count() as f64 / n as f64;
            let exact = CountLaw::heavy_tail(1.5, k as f64);
            assert!((p - exact).abs() < 4.0 * (exact * (1.0 - exact) / n as f64).sqrt() + 1e-9, "k={k}");
        }
        // independent evaluation: direct sum to 1e7 plus Euler–Maclaurin to the cap
        assert!((l.mean() - 4.951_414_112_032).abs() < 1e-9, "{}", l.mean());
    }
}
