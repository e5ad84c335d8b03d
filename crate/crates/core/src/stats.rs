//! Small statistics toolkit: running moments, quantiles, trimmed means,
//! bootstrap errors and empirical characteristic functions.

use num_complex::Complex64;
use rand::Rng;

/// A Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

impl Estimate {
    pub fn new(value: f64, se: f64) -> Self {
        Self { value, se }
    }

    pub fn exact(value: f64) -> Self {
        Self { value, se: 0.0 }
    }

    /// |value - target| in units of the standard error (infinite if se = 0
    /// and the values differ).
    pub fn z_score(&self, target: f64) -> f64 {
        let d = self.value - target;
        if self.se > 0.0 {
            d / self.se
        } else if d == 0.0 {
            0.0
        } else {
            d.signum() * f64::INFINITY
        }
    }

    pub fn within_se(&self, target: f64, k: f64) -> bool {
        (self.value - target).abs() <= k * self.se
    }
}

/// Welford accumulator.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunningMoments {
    n: u64,
    mean: f64,
    m2: f64,
}

impl RunningMoments {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    /// Chan's parallel merge.
    pub fn merge(&mut self, other: &Self) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        self.mean += d * other.n as f64 / n as f64;
        self.m2 += other.m2 + d * d * (self.n as f64) * (other.n as f64) / n as f64;
        self.n = n;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        if self.n > 1 {
            self.m2 / (self.n - 1) as f64
        } else {
            0.0
        }
    }

    pub fn se(&self) -> f64 {
        if self.n > 1 {
            (self.variance() / self.n as f64).sqrt()
        } else {
            0.0
        }
    }

    pub fn estimate(&self) -> Estimate {
        Estimate::new(self.mean(), self.se())
    }
}

impl FromIterator<f64> for RunningMoments {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut m = Self::new();
        for x in iter {
            m.push(x);
        }
        m
    }
}

pub fn mean_se(xs: &[f64]) -> Estimate {
    xs.iter().copied().collect::<RunningMoments>().estimate()
}

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    v
}

/// Sample quantile with linear interpolation between order statistics.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn quantile(xs: &[f64], p: f64) -> f64 {
    quantile_sorted(&sorted(xs), p)
}

pub fn median(xs: &[f64]) -> f64 {
    quantile(xs, 0.5)
}

pub fn iqr(xs: &[f64]) -> f64 {
    let s = sorted(xs);
    quantile_sorted(&s, 0.75) - quantile_sorted(&s, 0.25)
}

/// Mean after discarding the fraction `trim` of the sample at each end.
pub fn trimmed_mean(xs: &[f64], trim: f64) -> f64 {
    let s = sorted(xs);
    trimmed_mean_sorted(&s, trim)
}

fn trimmed_mean_sorted(s: &[f64], trim: f64) -> f64 {
    let k = ((s.len() as f64) * trim).floor() as usize;
    let kept = &s[k..s.len() - k];
    kept.iter().sum::<f64>() / kept.len() as f64
}

/// Bootstrap standard error of the trimmed mean.
pub fn bootstrap_trimmed_mean_se<R: Rng + ?Sized>(
    xs: &[f64],
    trim: f64,
    resamples: usize,
    rng: &mut R,
) -> f64 {
    let n = xs.len();
    let mut stats = RunningMoments::new();
    let mut buf = vec![0.0; n];
    for _ in 0..resamples {
        for slot in buf.iter_mut() {
            *slot = xs[rng.random_range(0..n)];
        }
        buf.sort_by(|a, b| a.total_cmp(b));
        stats.push(trimmed_mean_sorted(&buf, trim));
    }
    stats.variance().sqrt()
}

/// Empirical characteristic function at one frequency with per-component
/// standard errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CfEstimate {
    pub t: f64,
    pub value: Complex64,
    pub se_re: f64,
    pub se_im: f64,
}

impl CfEstimate {
    /// Standard error of the complex estimate as a whole.
    pub fn se(&self) -> f64 {
        self.se_re.hypot(self.se_im)
    }

    pub fn z(&self, exact: Complex64) -> f64 {
        (self.value - exact).norm() / self.se()
    }
}

pub fn empirical_cf(xs: &[f64], t: f64) -> CfEstimate {
    let mut re = RunningMoments::new();
    let mut im = RunningMoments::new();
    for &x in xs {
        let (s, c) = (t * x).sin_cos();
        re.push(c);
        im.push(s);
    }
    CfEstimate {
        t,
        value: Complex64::new(re.mean(), im.mean()),
        se_re: re.se(),
        se_im: im.se(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn quantiles() {
        let xs = [5.0, 1.0, 3.0, 2.0, 4.0];
        assert_eq!(median(&xs), 3.0);
        assert_eq!(quantile(&xs, 0.0), 1.0);
        assert_eq!(quantile(&xs, 1.0), 5.0);
        assert_eq!(iqr(&xs), 2.0);
        assert_eq!(median(&[1.0, 2.0]), 1.5);
    }

    #[test]
    fn trimmed_mean_drops_extremes() {
        let mut xs: Vec<f64> = (0..100).map(|i| i as f64).collect();
        xs[99] = 1e9;
        assert_eq!(trimmed_mean(&xs, 0.01), (1..99).map(|i| i as f64).sum::<f64>() / 98.0);
    }

    #[test]
    fn estimate_scores() {
        let e = Estimate::new(1.1, 0.05);
        assert!((e.z_score(1.0) - 2.0).abs() < 1e-12);
        assert!(e.within_se(1.0, 3.0));
        assert!(!e.within_se(1.0, 1.0));
        assert_eq!(Estimate::exact(2.0).z_score(2.0), 0.0);
    }

    proptest! {
        #[test]
        fn merge_equals_sequential(xs in prop::collection::vec(-1e3f64..1e3, 2..60), split in 0usize..60) {
            let split = split.min(xs.len());
            let all: RunningMoments = xs.iter().copied().collect();
            let mut a: RunningMoments = xs[..split].iter().copied().collect();
            let b: RunningMoments = xs[split..].iter().copied().collect();
            a.merge(&b);
            prop_assert_eq!(a.count(), all.count());
            prop_assert!((a.mean() - all.mean()).abs() <= 1e-9 * (1.0 + all.mean().abs()));
            prop_assert!((a.variance() - all.variance()).abs() <= 1e-7 * (1.0 + all.variance()));
        }
    }
}
