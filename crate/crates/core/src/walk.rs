//! Random walks driven by a step sampler: ladder heights, the renewal
//! function of the strictly descending ladder heights, survival
//! probabilities, paths conditioned to stay non-negative and the meander
//! moment.

use std::fmt::Write as _;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng::{RngStreams, SimRng};
use crate::special::gamma;
use crate::stats::{Estimate, RunningMoments};

/// Anything that draws i.i.d. increments of a random walk.
pub trait StepSampler: Send + Sync {
    fn sample_step(&self, rng: &mut SimRng) -> f64;
}

impl<T: StepSampler + ?Sized> StepSampler for &T {
    #[inline]
    fn sample_step(&self, rng: &mut SimRng) -> f64 {
        (**self).sample_step(rng)
    }
}

impl<T: StepSampler + ?Sized> StepSampler for Box<T> {
    #[inline]
    fn sample_step(&self, rng: &mut SimRng) -> f64 {
        (**self).sample_step(rng)
    }
}

impl<T: StepSampler + ?Sized> StepSampler for Arc<T> {
    #[inline]
    fn sample_step(&self, rng: &mut SimRng) -> f64 {
        (**self).sample_step(rng)
    }
}

/// Centred Gaussian steps. `GaussianStep::unit_lambda()` has characteristic
/// function e^{-t²}, the α = 2 member of the stable family with λ = 1.
#[derive(Debug, Clone, Copy)]
pub struct GaussianStep {
    pub sd: f64,
}

impl GaussianStep {
    pub fn unit_lambda() -> Self {
        Self { sd: 2f64.sqrt() }
    }
}

impl StepSampler for GaussianStep {
    #[inline]
    fn sample_step(&self, rng: &mut SimRng) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        self.sd * z
    }
}

/// Steps of ±1 with probability 1/2 each. Its descending ladder heights are
/// all 1, so R(x) = 1 + ⌊x⌋ for x ≥ 0.
#[derive(Debug, Clone, Copy, Default)]
pub struct SimpleSymmetricStep;

impl SimpleSymmetricStep {
    pub fn exact_renewal(x: f64) -> f64 {
        if x < 0.0 {
            0.0
        } else {
            1.0 + x.floor()
        }
    }
}

impl StepSampler for SimpleSymmetricStep {
    #[inline]
    fn sample_step(&self, rng: &mut SimRng) -> f64 {
        if rng.random::<bool>() {
            1.0
        } else {
            -1.0
        }
    }
}

/// A deterministic step.
#[derive(Debug, Clone, Copy)]
pub struct ConstantStep(pub f64);

impl StepSampler for ConstantStep {
    #[inline]
    fn sample_step(&self, _rng: &mut SimRng) -> f64 {
        self.0
    }
}

/// Norming data of a spine law in the stable domain of attraction:
/// a_n = (λn)^{1/α} and the exponent αρ̄.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpineScaling {
    pub alpha: f64,
    pub alpha_rho_bar: f64,
    pub lambda: f64,
}

impl SpineScaling {
    pub fn from_stable(p: &crate::stable::StableParamsC) -> Self {
        Self {
            alpha: p.alpha(),
            alpha_rho_bar: p.alpha_rho_bar(),
            lambda: p.lambda(),
        }
    }

    /// The Gaussian case matching [`GaussianStep::unit_lambda`].
    pub fn gaussian() -> Self {
        Self {
            alpha: 2.0,
            alpha_rho_bar: 1.0,
            lambda: 1.0,
        }
    }

    pub fn a_n(&self, n: u64) -> f64 {
        (self.lambda * n as f64).powf(1.0 / self.alpha)
    }

    /// c₁ = 1/Γ(1 + αρ̄).
    pub fn c1(&self) -> f64 {
        1.0 / gamma(1.0 + self.alpha_rho_bar)
    }

    /// K = κ/c₁ for a given κ.
    pub fn survival_constant(&self, kappa: f64) -> f64 {
        kappa / self.c1()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WalkPath {
    pub start: f64,
    /// Positions S_0 = start, S_1, ..., S_n.
    pub positions: Vec<f64>,
}

impl WalkPath {
    pub fn length(&self) -> usize {
        self.positions.len() - 1
    }

    pub fn end(&self) -> f64 {
        *self.positions.last().expect("path holds its start")
    }

    pub fn increments(&self) -> Vec<f64> {
        self.positions.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn min(&self) -> f64 {
        self.positions.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

pub fn simulate_walk<S: StepSampler + ?Sized>(step: &S, n: usize, x0: f64, rng: &mut SimRng) -> WalkPath {
    let mut positions = Vec::with_capacity(n + 1);
    let mut s = x0;
    positions.push(s);
    for _ in 0..n {
        s += step.sample_step(rng);
        positions.push(s);
    }
    WalkPath { start: x0, positions }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LadderDirection {
    /// Strictly descending: new minima, heights are record - S_τ.
    Descending,
    /// Strictly ascending: new maxima.
    Ascending,
}

impl LadderDirection {
    #[inline]
    fn sign(self) -> f64 {
        match self {
            Self::Descending => -1.0,
            Self::Ascending => 1.0,
        }
    }
}

/// Default step budget per ladder epoch.
pub const DEFAULT_EPOCH_BUDGET: u64 = 1_000_000;

/// Height of the first strict ladder epoch, or `None` after `max_steps`.
pub fn first_ladder_height<S: StepSampler + ?Sized>(
    step: &S,
    direction: LadderDirection,
    max_steps: u64,
    rng: &mut SimRng,
) -> Option<f64> {
    let sign = direction.sign();
    let mut s = 0.0;
    for _ in 0..max_steps {
        s += sign * step.sample_step(rng);
        if s > 0.0 {
            return Some(s);
        }
    }
    None
}

#[derive(Debug, Clone, PartialEq)]
pub struct LadderSample {
    pub direction: LadderDirection,
    /// Observed heights, all > 0.
    pub heights: Vec<f64>,
    /// Walks that used up the step budget before the first ladder epoch.
    pub censored: usize,
    pub max_steps: u64,
    /// Set when more than 10% of the walks were censored.
    pub warning: bool,
}

impl LadderSample {
    pub fn total(&self) -> usize {
        self.heights.len() + self.censored
    }

    pub fn censored_fraction(&self) -> f64 {
        self.censored as f64 / self.total() as f64
    }

    /// s^{-αρ̄}(1 - Ê[e^{-sH₁}]). Censored epochs count as H₁ = ∞, i.e. they
    /// contribute e^{-sH₁} = 0.
    pub fn heyde_functional(&self, s: f64, alpha_rho_bar: f64) -> Estimate {
        let mut m: RunningMoments = self.heights.iter().map(|h| (-s * h).exp()).collect();
        for _ in 0..self.censored {
            m.push(0.0);
        }
        let scale = s.powf(-alpha_rho_bar);
        Estimate::new(scale * (1.0 - m.mean()), scale * m.se())
    }

    /// The same functional with censored epochs dropped from the sample.
    pub fn heyde_functional_uncensored(&self, s: f64, alpha_rho_bar: f64) -> Estimate {
        let m: RunningMoments = self.heights.iter().map(|h| (-s * h).exp()).collect();
        let scale = s.powf(-alpha_rho_bar);
        Estimate::new(scale * (1.0 - m.mean()), scale * m.se())
    }

    /// P̂(H₁ ≥ x)·x^{αρ̄}·Γ(1 - αρ̄), which tends to 1 when αρ̄ < 1.
    /// Censored epochs count as exceeding x.
    pub fn tail_ratio(&self, x: f64, alpha_rho_bar: f64) -> Result<Estimate> {
        if alpha_rho_bar >= 1.0 {
            return Err(Error::Domain("tail ratio needs alpha * rho_bar < 1".into()));
        }
        let mut m: RunningMoments = self.heights.iter().map(|&h| f64::from(u8::from(h >= x))).collect();
        for _ in 0..self.censored {
            m.push(1.0);
        }
        let scale = x.powf(alpha_rho_bar) * gamma(1.0 - alpha_rho_bar);
        Ok(Estimate::new(scale * m.mean(), scale * m.se()))
    }
}

/// `count` independent first ladder heights, one walk per replica stream.
pub fn ladder_heights<S: StepSampler + ?Sized>(
    step: &S,
    direction: LadderDirection,
    count: usize,
    max_steps: u64,
    streams: &RngStreams,
) -> LadderSample {
    let draws = streams.map_replicas(count, |_, rng| first_ladder_height(step, direction, max_steps, rng));
    let heights: Vec<f64> = draws.iter().flatten().copied().collect();
    let censored = count - heights.len();
    LadderSample {
        direction,
        heights,
        censored,
        max_steps,
        warning: censored as f64 > 0.1 * count as f64,
    }
}

pub fn descending_ladder_heights<S: StepSampler + ?Sized>(
    step: &S,
    count: usize,
    max_steps: u64,
    streams: &RngStreams,
) -> LadderSample {
    ladder_heights(step, LadderDirection::Descending, count, max_steps, streams)
}

/// Monte Carlo estimate of the renewal function R of the strict ladder
/// heights on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RenewalTable {
    pub grid: Vec<f64>,
    pub r_hat: Vec<f64>,
    pub stderr: Vec<f64>,
    pub replicas: usize,
    /// Coefficient and exponent of the power-law continuation c₁x^{αρ̄}
    /// beyond the grid.
    pub asymptote: Option<(f64, f64)>,
    /// Ladder epochs cut short by the step budget.
    pub censored_epochs: usize,
    pub warnings: Vec<String>,
}

impl RenewalTable {
    /// A table of known values (no Monte Carlo error).
    pub fn exact(grid: Vec<f64>, values: Vec<f64>, asymptote: Option<(f64, f64)>) -> Result<Self> {
        validate_grid(&grid)?;
        if values.len() != grid.len() {
            return Err(Error::InvalidParameter("grid and values differ in length".into()));
        }
        let n = grid.len();
        Ok(Self {
            grid,
            r_hat: values,
            stderr: vec![0.0; n],
            replicas: 0,
            asymptote,
            censored_epochs: 0,
            warnings: Vec::new(),
        })
    }

    pub fn x_max(&self) -> f64 {
        *self.grid.last().expect("grid is non-empty")
    }

    fn locate(&self, x: f64) -> (usize, f64) {
        let i = self.grid.partition_point(|&g| g <= x).clamp(1, self.grid.len() - 1);
        let (g0, g1) = (self.grid[i - 1], self.grid[i]);
        (i, (x - g0) / (g1 - g0))
    }

    /// R̂(x): 0 for x < 0, linear interpolation on the grid, the power-law
    /// asymptote beyond it (or the last grid value without one).
    pub fn eval(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        if x >= self.x_max() {
            return match self.asymptote {
                Some((c, e)) if x > self.x_max() => c * x.powf(e),
                _ => *self.r_hat.last().expect("non-empty"),
            };
        }
        if self.grid.len() == 1 {
            return self.r_hat[0];
        }
        let (i, w) = self.locate(x);
        self.r_hat[i - 1] + w * (self.r_hat[i] - self.r_hat[i - 1])
    }

    /// Standard error of R̂(x), interpolated like the values; beyond the grid
    /// the relative error of the last point is carried over.
    pub fn stderr_at(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        if x >= self.x_max() || self.grid.len() == 1 {
            let last = self.r_hat.len() - 1;
            let rel = if self.r_hat[last] > 0.0 { self.stderr[last] / self.r_hat[last] } else { 0.0 };
            return rel * self.eval(x);
        }
        let (i, w) = self.locate(x);
        self.stderr[i - 1] + w * (self.stderr[i] - self.stderr[i - 1])
    }

    /// Ratios R̂(x)/(c₁x^{αρ̄}) for grid points in [x_lo, x_hi].
    pub fn asymptotic_ratios(&self, c1: f64, alpha_rho_bar: f64, x_lo: f64, x_hi: f64) -> Vec<(f64, Estimate)> {
        self.grid
            .iter()
            .zip(self.r_hat.iter().zip(&self.stderr))
            .filter(|(&x, _)| x >= x_lo && x <= x_hi && x > 0.0)
            .map(|(&x, (&r, &se))| {
                let d = c1 * x.powf(alpha_rho_bar);
                (x, Estimate::new(r / d, se / d))
            })
            .collect()
    }

    /// Smallest c with R̂(x+y) ≤ c(1+x)(1+y) over grid pairs whose sum is on
    /// the grid.
    pub fn product_bound_constant(&self) -> f64 {
        let mut c: f64 = 0.0;
        for &x in &self.grid {
            for &y in &self.grid {
                if x + y > self.x_max() {
                    break;
                }
                c = c.max(self.eval(x + y) / ((1.0 + x) * (1.0 + y)));
            }
        }
        c
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,r_hat,stderr,replicas\n");
        for i in 0..self.grid.len() {
            let _ = writeln!(out, "{},{},{},{}", self.grid[i], self.r_hat[i], self.stderr[i], self.replicas);
        }
        out
    }
}

fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.first() != Some(&0.0) {
        return Err(Error::InvalidParameter("renewal grid must start at 0".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) || grid.iter().any(|g| !g.is_finite()) {
        return Err(Error::InvalidParameter("renewal grid must be finite and increasing".into()));
    }
    Ok(())
}

/// Evenly spaced grid 0, h, 2h, ..., x_max.
pub fn uniform_grid(x_max: f64, h: f64) -> Vec<f64> {
    let n = (x_max / h).round() as usize;
    (0..=n).map(|i| i as f64 * h).collect()
}

/// Cumulative ladder heights of one walk up to `x_max`; the flag reports a
/// censored epoch.
fn ladder_levels<S: StepSampler + ?Sized>(
    step: &S,
    direction: LadderDirection,
    x_max: f64,
    epoch_budget: u64,
    rng: &mut SimRng,
) -> (Vec<f64>, bool) {
    let sign = direction.sign();
    let mut levels = Vec::new();
    let mut s = 0.0;
    let mut record = 0.0;
    loop {
        let mut steps = 0;
        loop {
            if steps == epoch_budget {
                return (levels, true);
            }
            s += sign * step.sample_step(rng);
            steps += 1;
            if s > record {
                record = s;
                break;
            }
        }
        if record > x_max {
            return (levels, false);
        }
        levels.push(record);
    }
}

/// R̂(x) = 1 + mean number of ladder epochs k ≥ 1 whose cumulative height is
/// at most x. A censored epoch ends the count for its walk.
pub fn estimate_renewal_function<S: StepSampler + ?Sized>(
    step: &S,
    direction: LadderDirection,
    grid: &[f64],
    replicas: usize,
    epoch_budget: u64,
    asymptote: Option<&SpineScaling>,
    streams: &RngStreams,
) -> Result<RenewalTable> {
    validate_grid(grid)?;
    if replicas == 0 {
        return Err(Error::InvalidParameter("renewal estimate needs at least one replica".into()));
    }
    let x_max = *grid.last().expect("validated");
    let runs = streams.map_replicas(replicas, |_, rng| ladder_levels(step, direction, x_max, epoch_budget, rng));
    let mut acc = vec![RunningMoments::new(); grid.len()];
    let mut censored = 0;
    for (levels, cens) in &runs {
        censored += usize::from(*cens);
        for (g, m) in grid.iter().zip(acc.iter_mut()) {
            let count = 1 + levels.partition_point(|&l| l <= *g);
            m.push(count as f64);
        }
    }
    let mut warnings = Vec::new();
    if replicas < 100 {
        warnings.push(format!("only {replicas} replicas; standard errors are unreliable"));
    }
    if censored > 0 {
        warnings.push(format!("{censored} ladder epochs exceeded the budget of {epoch_budget} steps"));
    }
    Ok(RenewalTable {
        grid: grid.to_vec(),
        r_hat: acc.iter().map(RunningMoments::mean).collect(),
        stderr: acc.iter().map(RunningMoments::se).collect(),
        replicas,
        asymptote: asymptote.map(|s| (s.c1(), s.alpha_rho_bar)),
        censored_epochs: censored,
        warnings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarmonicityCheck {
    pub x: f64,
    pub r_hat: f64,
    pub one_step_mean: f64,
    pub residual: f64,
    /// Combined standard error: table error at x, Monte Carlo error of the
    /// one-step mean and the mean table error at the landing points, added
    /// in quadrature as if independent.
    pub se: f64,
}

impl HarmonicityCheck {
    pub fn z(&self) -> f64 {
        if self.se > 0.0 {
            self.residual / self.se
        } else if self.residual == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// R̂(x) - Ê[R̂(x + S₁); x + S₁ ≥ 0].
pub fn harmonicity_residual<S: StepSampler + ?Sized>(
    table: &RenewalTable,
    step: &S,
    x: f64,
    mc_n: usize,
    streams: &RngStreams,
) -> Result<HarmonicityCheck> {
    if x < 0.0 {
        return Err(Error::Domain(format!("harmonicity at negative x = {x}")));
    }
    if x > table.x_max() {
        return Err(Error::Domain(format!(
            "x = {x} lies beyond the renewal grid (max {})",
            table.x_max()
        )));
    }
    let draws = streams.map_replicas(mc_n, |_, rng| {
        let y = x + step.sample_step(rng);
        if y >= 0.0 {
            (table.eval(y), table.stderr_at(y))
        } else {
            (0.0, 0.0)
        }
    });
    let vals: RunningMoments = draws.iter().map(|d| d.0).collect();
    let table_se = draws.iter().map(|d| d.1).sum::<f64>() / mc_n as f64;
    let r_hat = table.eval(x);
    let residual = r_hat - vals.mean();
    let se = (table.stderr_at(x).powi(2) + vals.se().powi(2) + table_se.powi(2)).sqrt();
    Ok(HarmonicityCheck {
        x,
        r_hat,
        one_step_mean: vals.mean(),
        residual,
        se,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurvivalEstimate {
    pub x: f64,
    pub n: u64,
    pub p_hat: f64,
    pub stderr: f64,
    /// a_n^{αρ̄}·p_hat.
    pub scaled: f64,
    pub scaled_se: f64,
    pub survivors: u64,
    /// No surviving path: the estimate carries no information.
    pub unreliable: bool,
}

/// Step count at which a walk started at x first goes below 0, if within n.
#[inline]
fn exit_time<S: StepSampler + ?Sized>(step: &S, x: f64, n: u64, rng: &mut SimRng) -> Option<u64> {
    let mut s = x;
    for k in 1..=n {
        s += step.sample_step(rng);
        if s < 0.0 {
            return Some(k);
        }
    }
    None
}

/// Estimates of P_x(min_{k≤n} S_k ≥ 0) for every n in `n_list`, computed from
/// the same walks (so the estimates are nested).
pub fn survival_curve<S: StepSampler + ?Sized>(
    step: &S,
    scaling: &SpineScaling,
    x: f64,
    n_list: &[u64],
    reps: usize,
    streams: &RngStreams,
) -> Result<Vec<SurvivalEstimate>> {
    if x < 0.0 {
        return Err(Error::Domain(format!("survival from negative x = {x}")));
    }
    let n_max = n_list.iter().copied().max().unwrap_or(0);
    let exits = streams.map_replicas(reps, |_, rng| exit_time(step, x, n_max, rng));
    Ok(n_list
        .iter()
        .map(|&n| {
            let survivors = exits.iter().filter(|e| e.is_none_or(|k| k > n)).count() as u64;
            let p = survivors as f64 / reps as f64;
            let se = (p * (1.0 - p) / (reps as f64 - 1.0).max(1.0)).sqrt();
            let scale = scaling.a_n(n).powf(scaling.alpha_rho_bar);
            SurvivalEstimate {
                x,
                n,
                p_hat: p,
                stderr: se,
                scaled: scale * p,
                scaled_se: scale * se,
                survivors,
                unreliable: survivors == 0,
            }
        })
        .collect())
}

pub fn survival_probability<S: StepSampler + ?Sized>(
    step: &S,
    scaling: &SpineScaling,
    x: f64,
    n: u64,
    reps: usize,
    streams: &RngStreams,
) -> Result<SurvivalEstimate> {
    Ok(survival_curve(step, scaling, x, &[n], reps, streams)?.remove(0))
}

pub fn survival_csv(rows: &[SurvivalEstimate]) -> String {
    let mut out = String::from("x,n,p_hat,stderr,scaled\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{},{}", r.x, r.n, r.p_hat, r.stderr, r.scaled);
    }
    out
}

/// Smallest c₂ with scaled ≤ c₂·K·R(x) over the given estimates; an
/// empirical value, not a certified bound.
pub fn fitted_survival_constant(rows: &[SurvivalEstimate], k: f64, r_x: f64) -> f64 {
    rows.iter().map(|r| r.scaled / (k * r_x)).fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionedPath {
    pub path: WalkPath,
    pub rejected: u64,
}

/// Rough number of attempts per accepted path, a_n^{αρ̄}/(K·R(x0)).
pub fn expected_attempts(scaling: &SpineScaling, n: u64, k: f64, r_x0: f64) -> f64 {
    scaling.a_n(n).powf(scaling.alpha_rho_bar) / (k * r_x0)
}

/// Exact draw of the walk on [0, n] given min_{k≤n} S_k ≥ 0, by rejection.
pub fn conditioned_path<S: StepSampler + ?Sized>(
    step: &S,
    n: usize,
    x0: f64,
    max_attempts: u64,
    rng: &mut SimRng,
) -> Result<ConditionedPath> {
    if n == 0 {
        return Err(Error::InvalidParameter("conditioned path needs n >= 1".into()));
    }
    if x0 < 0.0 {
        return Err(Error::Domain(format!("conditioned path from negative x0 = {x0}")));
    }
    let mut positions = Vec::with_capacity(n + 1);
    for attempt in 0..max_attempts {
        positions.clear();
        positions.push(x0);
        let mut s = x0;
        let mut ok = true;
        for _ in 0..n {
            s += step.sample_step(rng);
            if s < 0.0 {
                ok = false;
                break;
            }
            positions.push(s);
        }
        if ok {
            return Ok(ConditionedPath {
                path: WalkPath { start: x0, positions },
                rejected: attempt,
            });
        }
    }
    Err(budget_error(max_attempts, n))
}

fn budget_error(max_attempts: u64, n: usize) -> Error {
    Error::BudgetExceeded {
        budget: max_attempts,
        context: format!(
            "no path of length {n} stayed non-negative; the expected number of attempts \
             grows like a_n^(alpha rho_bar)/(K R(x0)): raise the budget or lower n"
        ),
    }
}

/// End point and attempt count of one conditioned path, without storing it.
fn conditioned_endpoint<S: StepSampler + ?Sized>(
    step: &S,
    n: u64,
    max_attempts: u64,
    rng: &mut SimRng,
) -> Option<(f64, u64)> {
    'attempt: for attempt in 0..max_attempts {
        let mut s = 0.0;
        for _ in 0..n {
            s += step.sample_step(rng);
            if s < 0.0 {
                continue 'attempt;
            }
        }
        return Some((s, attempt + 1));
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanderEstimate {
    pub n: u64,
    pub reps: usize,
    /// Mean of (S_n/a_n)^{αρ̄} given min ≥ 0.
    pub m_hat: Estimate,
    /// 1/m_hat with a delta-method error.
    pub kappa_hat: Estimate,
    /// Mean of S_n/a_n given min ≥ 0.
    pub endpoint_mean: Estimate,
    /// Fraction of accepted attempts.
    pub acceptance: Estimate,
    pub attempts: u64,
}

/// Meander moment from 0 and the resulting estimate of κ.
pub fn meander_moment<S: StepSampler + ?Sized>(
    step: &S,
    scaling: &SpineScaling,
    n: u64,
    reps: usize,
    max_attempts: u64,
    streams: &RngStreams,
) -> Result<MeanderEstimate> {
    if n == 0 || reps == 0 {
        return Err(Error::InvalidParameter("meander moment needs n >= 1 and reps >= 1".into()));
    }
    let draws = streams.map_replicas(reps, |_, rng| conditioned_endpoint(step, n, max_attempts, rng));
    let a_n = scaling.a_n(n);
    let mut m = RunningMoments::new();
    let mut e = RunningMoments::new();
    let mut attempts = 0;
    for d in &draws {
        let (s, k) = d.ok_or_else(|| budget_error(max_attempts, n as usize))?;
        let y = s / a_n;
        m.push(y.powf(scaling.alpha_rho_bar));
        e.push(y);
        attempts += k;
    }
    let m_hat = m.estimate();
    let p = reps as f64 / attempts as f64;
    Ok(MeanderEstimate {
        n,
        reps,
        m_hat,
        kappa_hat: Estimate::new(1.0 / m_hat.value, m_hat.se / (m_hat.value * m_hat.value)),
        endpoint_mean: e.estimate(),
        acceptance: Estimate::new(p, p * ((1.0 - p) / reps as f64).sqrt()),
        attempts,
    })
}
