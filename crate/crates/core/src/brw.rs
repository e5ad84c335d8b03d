//! Generation-by-generation branching random walk.
//!
//! A generation is stored flat: positions plus two lineage flags, no tree.
//! Two optional kills keep the population bounded:
//!
//! * a barrier at -a removes a particle the first time it goes below -a
//!   (this runs the process behind Z^{(a)} and D'^{(a)});
//! * an upper cutoff B removes particles above B. Each removed particle
//!   carries e^{-X} ≤ e^{-B} of additive weight at removal, and its
//!   descendants carry the same amount in expectation. The generation keeps
//!   the exact removed weight, the removal count and the bound count·e^{-B}.
//!
//! The bound is a bound on expected lost mass: E[W_n(full)] = E[W_n(cut)]
//! + E[removed weight]. Along a single run the descendants of a removed
//! particle can carry more than it did.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::offspring::{CalibratedOffspring, OffspringLaw};
use crate::rng::{RngStreams, SimRng};
use crate::stable::kappa_exact;
use crate::stats::{Estimate, RunningMoments};
use crate::walk::{RenewalTable, StepSampler};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    /// Kill below -a.
    pub barrier_a: Option<f64>,
    /// Kill above B.
    pub upper_cutoff_b: Option<f64>,
    /// Generation from which the W'' flag starts checking positions.
    pub k0: usize,
    pub max_particles: usize,
    pub start_x: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            barrier_a: None,
            upper_cutoff_b: None,
            k0: 0,
            max_particles: 5_000_000,
            start_x: 0.0,
        }
    }
}

impl SimConfig {
    /// Checks the fields. The cutoff must satisfy B ≥ αρ̄ so that
    /// (x⁺)^{αρ̄}e^{-x} is decreasing beyond it.
    pub fn validate(&self, alpha_rho_bar: f64) -> Result<()> {
        if self.max_particles == 0 {
            return Err(Error::InvalidParameter("max_particles must be at least 1".into()));
        }
        if !self.start_x.is_finite() {
            return Err(Error::InvalidParameter(format!("start position {} is not finite", self.start_x)));
        }
        if let Some(a) = self.barrier_a {
            if !(a >= 0.0 && a.is_finite()) {
                return Err(Error::InvalidParameter(format!("barrier a = {a} must be finite and ≥ 0")));
            }
        }
        if let Some(b) = self.upper_cutoff_b {
            if !(b >= alpha_rho_bar && b.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "cutoff B = {b} must be finite and at least alpha*rho_bar = {alpha_rho_bar}"
                )));
            }
        }
        Ok(())
    }

    fn killed_below(&self, x: f64) -> bool {
        matches!(self.barrier_a, Some(a) if x < -a)
    }

    fn killed_above(&self, x: f64) -> bool {
        matches!(self.upper_cutoff_b, Some(b) if x > b)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generation {
    pub n: usize,
    pub positions: Vec<f64>,
    /// All ancestors (self included) at or above 0.
    pub min_ok: Vec<bool>,
    /// All ancestors of generation ≥ k0 (self included) at or above 0.
    pub min_ok_since_k0: Vec<bool>,
    pub k0: usize,
    /// Number of particles removed above B so far.
    pub killed_upper_count: u64,
    /// Exact Σ e^{-X} of the particles removed above B, at removal.
    pub killed_upper_weight: f64,
    /// killed_upper_count · e^{-B}.
    pub killed_upper_weight_bound: f64,
}

impl Generation {
    /// Generation 0: one particle at the start position, unless a kill
    /// applies to it already.
    pub fn initial(cfg: &SimConfig) -> Self {
        let x = cfg.start_x;
        let mut g = Self {
            n: 0,
            positions: Vec::new(),
            min_ok: Vec::new(),
            min_ok_since_k0: Vec::new(),
            k0: cfg.k0,
            killed_upper_count: 0,
            killed_upper_weight: 0.0,
            killed_upper_weight_bound: 0.0,
        };
        if cfg.killed_below(x) {
            return g;
        }
        if cfg.killed_above(x) {
            g.record_upper_kill(x, cfg);
            return g;
        }
        g.positions.push(x);
        g.min_ok.push(x >= 0.0);
        g.min_ok_since_k0.push(cfg.k0 > 0 || x >= 0.0);
        g
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    fn record_upper_kill(&mut self, x: f64, cfg: &SimConfig) {
        let b = cfg.upper_cutoff_b.expect("cutoff is active");
        self.killed_upper_count += 1;
        self.killed_upper_weight += (-x).exp();
        self.killed_upper_weight_bound = self.killed_upper_count as f64 * (-b).exp();
    }

    /// Bound on the Z-weight of removed particles: count · B^{αρ̄}e^{-B}.
    pub fn killed_upper_z_bound(&self, b: f64, alpha_rho_bar: f64) -> f64 {
        self.killed_upper_count as f64 * b.powf(alpha_rho_bar) * (-b).exp()
    }
}

/// Replaces every particle by its children, then applies the kills and
/// propagates the flags.
pub fn evolve<O: OffspringLaw + ?Sized>(g: &Generation, o: &O, cfg: &SimConfig, rng: &mut SimRng) -> Result<Generation> {
    if g.len() > cfg.max_particles {
        return Err(Error::Overflow {
            generation: g.n,
            count: g.len(),
            limit: cfg.max_particles,
        });
    }
    let n = g.n + 1;
    let check_k0 = n >= g.k0;
    let mut next = Generation {
        n,
        positions: Vec::with_capacity(g.len() * 2),
        min_ok: Vec::with_capacity(g.len() * 2),
        min_ok_since_k0: Vec::with_capacity(g.len() * 2),
        k0: g.k0,
        killed_upper_count: g.killed_upper_count,
        killed_upper_weight: g.killed_upper_weight,
        killed_upper_weight_bound: g.killed_upper_weight_bound,
    };
    let mut family = Vec::new();
    for i in 0..g.len() {
        family.clear();
        o.sample_into(rng, &mut family);
        let x0 = g.positions[i];
        for &dx in &family {
            let x = x0 + dx;
            if cfg.killed_below(x) {
                continue;
            }
            if cfg.killed_above(x) {
                next.record_upper_kill(x, cfg);
                continue;
            }
            next.positions.push(x);
            next.min_ok.push(g.min_ok[i] && x >= 0.0);
            next.min_ok_since_k0.push(g.min_ok_since_k0[i] && (!check_k0 || x >= 0.0));
        }
        if next.len() > cfg.max_particles {
            return Err(Error::Overflow {
                generation: n,
                count: next.len(),
                limit: cfg.max_particles,
            });
        }
    }
    Ok(next)
}

/// W_n = Σ e^{-X_u}.
pub fn additive_martingale(g: &Generation) -> f64 {
    g.positions.iter().map(|&x| (-x).exp()).sum()
}

/// Z_n = Σ (X_u⁺)^{αρ̄} e^{-X_u}.
pub fn z_functional(g: &Generation, alpha_rho_bar: f64) -> f64 {
    g.positions
        .iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| x.powf(alpha_rho_bar) * (-x).exp())
        .sum()
}

/// D_n = Σ X_u e^{-X_u}.
pub fn derivative_martingale(g: &Generation) -> f64 {
    g.positions.iter().map(|&x| x * (-x).exp()).sum()
}

/// D'_n = Σ R̂(X_u) e^{-X_u} over particles whose ancestors all stayed ≥ 0.
pub fn truncated_derivative_martingale(g: &Generation, table: &RenewalTable) -> f64 {
    g.positions
        .iter()
        .zip(&g.min_ok)
        .filter(|(_, &ok)| ok)
        .map(|(&x, _)| table.eval(x) * (-x).exp())
        .sum()
}

/// Σ se(R̂(X_u)) e^{-X_u} over the D'_n particles: how far D'_n can move
/// if every table value is off by one standard error in the same direction.
pub fn truncated_derivative_table_error(g: &Generation, table: &RenewalTable) -> f64 {
    g.positions
        .iter()
        .zip(&g.min_ok)
        .filter(|(_, &ok)| ok)
        .map(|(&x, _)| table.stderr_at(x) * (-x).exp())
        .sum()
}

/// D'^{(a)}_n = Σ R̂(X_u + a) e^{-X_u}. The barrier condition is the
/// caller's: evaluate it on a generation evolved with `barrier_a = a`.
pub fn barrier_derivative_martingale(g: &Generation, table: &RenewalTable, a: f64) -> f64 {
    g.positions.iter().map(|&x| table.eval(x + a) * (-x).exp()).sum()
}

/// (W'_n, W''_{n,k0}). The k0 must be the one the flags were built with.
pub fn restricted_additive(g: &Generation, k0: usize) -> Result<(f64, f64)> {
    if k0 > g.n {
        return Err(Error::Domain(format!("k0 = {k0} exceeds the generation index {}", g.n)));
    }
    if k0 != g.k0 {
        return Err(Error::InvalidParameter(format!(
            "flags were maintained from k0 = {}, not {k0}",
            g.k0
        )));
    }
    let (mut w1, mut w2) = (0.0, 0.0);
    for i in 0..g.len() {
        let e = (-g.positions[i]).exp();
        if g.min_ok[i] {
            w1 += e;
        }
        if g.min_ok_since_k0[i] {
            w2 += e;
        }
    }
    Ok((w1, w2))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesRecord {
    pub n: usize,
    pub count: usize,
    pub w: f64,
    pub z: f64,
    pub d: f64,
    /// NaN without a renewal table.
    pub dprime: f64,
    pub w_prime: f64,
    /// NaN while n < k0.
    pub w_pp: f64,
    pub trunc_bound: f64,
    /// D'^{(a)}_n when a barrier is configured and a table is given.
    pub dprime_barrier: Option<f64>,
    pub killed_weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MartingaleSeries {
    pub records: Vec<SeriesRecord>,
    pub seed: u64,
    pub config: SimConfig,
    pub alpha_rho_bar: f64,
    /// Extra `key = value` lines for the CSV header (calibration echo).
    pub meta: Vec<(String, String)>,
}

impl MartingaleSeries {
    /// Survived to the last recorded generation.
    pub fn survived(&self) -> bool {
        self.records.last().is_some_and(|r| r.count > 0)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# seed = {}", self.seed);
        let c = &self.config;
        let opt = |v: Option<f64>| v.map_or("none".to_string(), |x| x.to_string());
        let _ = writeln!(
            out,
            "# config: barrier_a = {}, upper_cutoff_b = {}, k0 = {}, max_particles = {}, start_x = {}, alpha_rho_bar = {}",
            opt(c.barrier_a),
            opt(c.upper_cutoff_b),
            c.k0,
            c.max_particles,
            c.start_x,
            self.alpha_rho_bar
        );
        for (k, v) in &self.meta {
            let _ = writeln!(out, "# {k} = {v}");
        }
        let barrier = self.records.iter().any(|r| r.dprime_barrier.is_some());
        out.push_str("n,count,W,Z,D,Dprime,Wprime,Wpp_k0,trunc_bound");
        out.push_str(if barrier { ",Dprime_a\n" } else { "\n" });
        for r in &self.records {
            let _ = write!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.n, r.count, r.w, r.z, r.d, r.dprime, r.w_prime, r.w_pp, r.trunc_bound
            );
            if barrier {
                let _ = write!(out, ",{}", r.dprime_barrier.unwrap_or(f64::NAN));
            }
            out.push('\n');
        }
        out
    }

    /// |Z_n - Z_{n-lag}| for every recorded n ≥ lag.
    pub fn cauchy_increments(&self, lag: usize) -> Vec<(usize, f64)> {
        self.records
            .iter()
            .skip(lag)
            .zip(&self.records)
            .map(|(r, p)| (r.n, (r.z - p.z).abs()))
            .collect()
    }
}

fn record(g: &Generation, cfg: &SimConfig, alpha_rho_bar: f64, table: Option<&RenewalTable>) -> SeriesRecord {
    let (w_prime, w_pp) = if g.n >= g.k0 {
        restricted_additive(g, g.k0).expect("k0 checked")
    } else {
        (restricted_additive_prime(g), f64::NAN)
    };
    SeriesRecord {
        n: g.n,
        count: g.len(),
        w: additive_martingale(g),
        z: z_functional(g, alpha_rho_bar),
        d: derivative_martingale(g),
        dprime: table.map_or(f64::NAN, |t| truncated_derivative_martingale(g, t)),
        w_prime,
        w_pp,
        trunc_bound: g.killed_upper_weight_bound,
        dprime_barrier: match (cfg.barrier_a, table) {
            (Some(a), Some(t)) => Some(barrier_derivative_martingale(g, t, a)),
            _ => None,
        },
        killed_weight: g.killed_upper_weight,
    }
}

fn restricted_additive_prime(g: &Generation) -> f64 {
    g.positions
        .iter()
        .zip(&g.min_ok)
        .filter(|(_, &ok)| ok)
        .map(|(&x, _)| (-x).exp())
        .sum()
}

/// One trajectory of every functional for n = 0..=n_max. Extinct runs keep
/// recording zeros.
pub fn run_series<O: OffspringLaw + ?Sized>(
    o: &O,
    cfg: &SimConfig,
    n_max: usize,
    alpha_rho_bar: f64,
    table: Option<&RenewalTable>,
    seed: u64,
    rng: &mut SimRng,
) -> Result<MartingaleSeries> {
    cfg.validate(alpha_rho_bar)?;
    let mut g = Generation::initial(cfg);
    let mut records = vec![record(&g, cfg, alpha_rho_bar, table)];
    for _ in 0..n_max {
        g = evolve(&g, o, cfg, rng)?;
        records.push(record(&g, cfg, alpha_rho_bar, table));
    }
    Ok(MartingaleSeries {
        records,
        seed,
        config: *cfg,
        alpha_rho_bar,
        meta: Vec::new(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WPrimePoint {
    pub n: u64,
    /// a_n^{αρ̄} Ê_x[W'_n].
    pub scaled: Estimate,
    /// K R̂(x) e^{-x}.
    pub target: f64,
    /// scaled / target.
    pub ratio: Estimate,
}

/// a_n^{αρ̄}·Ê_x[W'_n] over `n_list`.
///
/// Particles are removed at the first visit below 0 (they no longer count in
/// W'_n) and above `cutoff_b`. A particle removed above B at generation k
/// and position y is replaced by one spine walk started at y for the
/// remaining n - k steps, contributing e^{-y}·1{walk stays ≥ 0}. By the
/// many-to-one formula this has the same expectation as the removed subtree,
/// so the estimate is unbiased for every B; B only trades cost for variance.
pub fn mean_w_prime_scaling(
    o: &CalibratedOffspring,
    x: f64,
    n_list: &[u64],
    reps: usize,
    table: &RenewalTable,
    cutoff_b: f64,
    streams: &RngStreams,
) -> Result<Vec<WPrimePoint>> {
    let scaling = o
        .scaling()
        .ok_or_else(|| Error::Unsupported("the a_n rule of this family is unknown".into()))?;
    if x < 0.0 {
        return Err(Error::Domain(format!("start x = {x} is below 0")));
    }
    if !(cutoff_b > x) {
        return Err(Error::InvalidParameter(format!("cutoff {cutoff_b} must exceed the start {x}")));
    }
    let k = kappa_exact(scaling.alpha).map(|kap| scaling.survival_constant(kap))?;
    let target = k * table.eval(x) * (-x).exp();
    let n_max = n_list.iter().copied().max().unwrap_or(0) as usize;
    let step = o.spine_step_sampler();
    let cfg = SimConfig {
        barrier_a: None,
        upper_cutoff_b: Some(cutoff_b),
        start_x: x,
        ..SimConfig::default()
    };
    let runs = streams.map_replicas(reps, |_, rng| -> Result<Vec<f64>> {
        // compensation[m]: contribution to W'_m of removed particles
        let mut comp = vec![0.0; n_max + 1];
        let mut w = vec![0.0; n_max + 1];
        let mut g = Generation::initial(&cfg);
        w[0] = restricted_additive_prime(&g);
        for n in 1..=n_max {
            let mut next = Generation {
                n,
                positions: Vec::new(),
                min_ok: Vec::new(),
                min_ok_since_k0: Vec::new(),
                k0: 0,
                killed_upper_count: 0,
                killed_upper_weight: 0.0,
                killed_upper_weight_bound: 0.0,
            };
            let mut family = Vec::new();
            for &x0 in &g.positions {
                family.clear();
                o.sample_into(rng, &mut family);
                for &dx in &family {
                    let y = x0 + dx;
                    if y < 0.0 {
                        continue;
                    }
                    if y > cutoff_b {
                        let e = (-y).exp();
                        let mut s = y;
                        comp[n] += e;
                        for c in comp.iter_mut().skip(n + 1) {
                            s += step.sample_step(rng);
                            if s < 0.0 {
                                break;
                            }
                            *c += e;
                        }
                        continue;
                    }
                    next.positions.push(y);
                    next.min_ok.push(true);
                    next.min_ok_since_k0.push(true);
                }
                if next.len() > cfg.max_particles {
                    return Err(Error::Overflow {
                        generation: n,
                        count: next.len(),
                        limit: cfg.max_particles,
                    });
                }
            }
            w[n] = restricted_additive_prime(&next);
            g = next;
        }
        Ok(w.iter().zip(&comp).map(|(a, b)| a + b).collect())
    });
    let runs: Vec<Vec<f64>> = runs.into_iter().collect::<Result<_>>()?;
    Ok(n_list
        .iter()
        .map(|&n| {
            let m: RunningMoments = runs.iter().map(|r| r[n as usize]).collect();
            let f = scaling.a_n(n).powf(scaling.alpha_rho_bar);
            let scaled = Estimate::new(f * m.mean(), f * m.se());
            WPrimePoint {
                n,
                scaled,
                target,
                ratio: Estimate::new(scaled.value / target, scaled.se / target),
            }
        })
        .collect())
}
