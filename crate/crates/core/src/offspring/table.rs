//! Sampling from a density that is piecewise linear on a uniform grid.

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::SimRng;

const GL3_NODES: [f64; 3] = [-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4];
const GL3_WEIGHTS: [f64; 3] = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];

#[derive(Debug, Clone)]
pub struct PiecewiseLinearLaw {
    x0: f64,
    h: f64,
    values: Vec<f64>,
    cumulative: Vec<f64>,
    guide: Vec<u32>,
}

impl PiecewiseLinearLaw {
    /// Normalizes the non-negative node values and builds the sampling
    /// tables.
    pub fn new(x0: f64, h: f64, mut values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 || !(h > 0.0) {
            return Err(Error::InvalidParameter("table needs two nodes and h > 0".into()));
        }
        if values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidParameter("table values must be finite and non-negative".into()));
        }
        let mass: f64 = values.windows(2).map(|w| 0.5 * h * (w[0] + w[1])).sum();
        if !(mass > 0.0) {
            return Err(Error::InvalidParameter("table has zero mass".into()));
        }
        values.iter_mut().for_each(|v| *v /= mass);
        let mut cumulative = Vec::with_capacity(values.len());
        let mut acc = 0.0;
        cumulative.push(0.0);
        for w in values.windows(2) {
            acc += 0.5 * h * (w[0] + w[1]);
            cumulative.push(acc);
        }
        let segments = values.len() - 1;
        let mut guide = Vec::with_capacity(segments);
        let mut seg = 0usize;
        for j in 0..segments {
            let target = j as f64 / segments as f64 * acc;
            while seg + 1 < segments && cumulative[seg + 1] <= target {
                seg += 1;
            }
            guide.push(seg as u32);
        }
        Ok(Self {
            x0,
            h,
            values,
            cumulative,
            guide,
        })
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn node(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.h
    }

    pub fn x_max(&self) -> f64 {
        self.node(self.values.len() - 1)
    }

    /// Density of the interpolant.
    pub fn density(&self, x: f64) -> f64 {
        if x < self.x0 || x > self.x_max() {
            return 0.0;
        }
        let u = (x - self.x0) / self.h;
        let i = (u.floor() as usize).min(self.values.len() - 2);
        let s = u - i as f64;
        self.values[i] * (1.0 - s) + self.values[i + 1] * s
    }

    /// ∫ g(x) hat_i(x) dx for every node, where hat_i is the piecewise-linear
    /// basis function of node i. Each segment uses 3-point Gauss–Legendre.
    pub fn node_kernels<G: Fn(f64) -> f64>(&self, g: G) -> Vec<f64> {
        let n = self.values.len();
        let mut k = vec![0.0; n];
        for i in 0..n - 1 {
            let a = self.node(i);
            for (t, w) in GL3_NODES.iter().zip(GL3_WEIGHTS) {
                let s = 0.5 * (t + 1.0);
                let gx = g(a + s * self.h) * w * 0.5 * self.h;
                k[i] += gx * (1.0 - s);
                k[i + 1] += gx * s;
            }
        }
        k
    }

    /// ∫ g(x) q(x) dx for the interpolant q.
    pub fn expect<G: Fn(f64) -> f64>(&self, g: G) -> f64 {
        self.node_kernels(g).iter().zip(&self.values).map(|(k, v)| k * v).sum()
    }

    #[inline]
    pub fn sample(&self, rng: &mut SimRng) -> f64 {
        let total = *self.cumulative.last().expect("non-empty");
        let r = rng.random::<f64>() * total;
        let segments = self.values.len() - 1;
        let mut i = self.guide[((r / total * segments as f64) as usize).min(segments - 1)] as usize;
        while i + 1 < segments && self.cumulative[i + 1] <= r {
            i += 1;
        }
        let rem = (r - self.cumulative[i]).max(0.0);
        let q0 = self.values[i];
        let slope = (self.values[i + 1] - q0) / self.h;
        // solve q0 s + slope s²/2 = rem on [0, h]
        let disc = (q0 * q0 + 2.0 * slope * rem).max(0.0);
        let denom = q0 + disc.sqrt();
        let s = if denom > 0.0 { (2.0 * rem / denom).min(self.h) } else { 0.0 };
        self.node(i) + s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStreams;
    use crate::stats::mean_se;

    #[test]
    fn triangle_law() {
        // density 2x on [0, 1]
        let t = PiecewiseLinearLaw::new(0.0, 0.5, vec![0.0, 1.0, 2.0]).unwrap();
        assert!((t.expect(|_| 1.0) - 1.0).abs() < 1e-15);
        assert!((t.expect(|x| x) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(t.density(0.25), 0.5);
        let mut rng = RngStreams::new(1).replica(0);
        let xs: Vec<f64> = (0..100_000).map(|_| t.sample(&mut rng)).collect();
        assert!(xs.iter().all(|&x| (0.0..=1.0).contains(&x)));
        let e = mean_se(&xs);
        assert!(e.within_se(2.0 / 3.0, 4.0), "{e:?}");
        let sq: Vec<f64> = xs.iter().map(|x| x * x).collect();
        assert!(mean_se(&sq).within_se(0.5, 4.0));
    }

    #[test]
    fn rejects_bad_tables() {
        assert!(PiecewiseLinearLaw::new(0.0, 1.0, vec![1.0]).is_err());
        assert!(PiecewiseLinearLaw::new(0.0, 1.0, vec![1.0, -1.0]).is_err());
        assert!(PiecewiseLinearLaw::new(0.0, 1.0, vec![0.0, 0.0]).is_err());
    }
}
