//! Offspring point processes in the boundary case, their spine laws and
//! diagnostics.
//!
//! Every family here has i.i.d. child displacements with law q, independent
//! of the count N. The spine child is then chosen among the size-biased
//! count with probability ∝ e^{-x}, and its displacement has law
//! e^{-x}q(x)/E_q[e^{-X}] whatever the count law is.

pub mod count;
pub mod pareto;
pub mod table;
pub mod tilted;
pub mod two_point;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;

pub use count::CountLaw;
pub use pareto::ParetoExpChild;
pub use tilted::TiltedStableChild;
pub use two_point::TwoPointChild;

use crate::error::{Error, Result};
use crate::rng::{RngStreams, SimRng};
use crate::stable::StableParamsC;
use crate::stats::{CfEstimate, Estimate, RunningMoments};
use crate::walk::{SpineScaling, StepSampler};

/// Law of one child displacement.
pub trait ChildLaw: Send + Sync + fmt::Debug {
    fn sample(&self, rng: &mut SimRng) -> f64;

    /// Draw from e^{-x}q(x)/E_q[e^{-X}].
    fn sample_tilted(&self, rng: &mut SimRng) -> f64;

    /// E_q[e^{-tX}], or `None` where it is infinite.
    fn laplace(&self, t: f64) -> Option<f64>;

    /// (E_q[e^{-X}], E_q[X e^{-X}]) for the law actually sampled.
    fn boundary_moments(&self) -> (f64, f64);

    /// Atoms and weights of a two-point law.
    fn atoms(&self) -> Option<[(f64, f64); 2]> {
        None
    }

    /// (Σ e^{-X_i}, Σ (X_i⁺)^p e^{-X_i}) over n children without drawing them
    /// one by one, when the law admits it.
    fn sum_functionals(&self, _n: u64, _p: f64, _rng: &mut SimRng) -> Option<(f64, f64)> {
        None
    }
}

/// Anything that produces the displacements of one family of children.
pub trait OffspringLaw: Send + Sync {
    /// Appends the displacements of one family to `out`.
    fn sample_into(&self, rng: &mut SimRng, out: &mut Vec<f64>);
}

/// Deterministic displacements, for tests.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedOffspring(pub Vec<f64>);

impl OffspringLaw for FixedOffspring {
    fn sample_into(&self, _rng: &mut SimRng, out: &mut Vec<f64>) {
        out.extend_from_slice(&self.0);
    }
}

/// Offspring described by a closure.
pub struct FnOffspring<F>(pub F);

impl<F> OffspringLaw for FnOffspring<F>
where
    F: Fn(&mut SimRng, &mut Vec<f64>) + Send + Sync,
{
    fn sample_into(&self, rng: &mut SimRng, out: &mut Vec<f64>) {
        (self.0)(rng, out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FamilyId {
    TiltedStable,
    ParetoExp,
    TwoPointStub,
    HeavyCount,
}

impl FamilyId {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::TiltedStable => "tilted-stable",
            Self::ParetoExp => "pareto-exp",
            Self::TwoPointStub => "two-point",
            Self::HeavyCount => "heavy-count",
        }
    }
}

impl fmt::Display for FamilyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FamilyId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tilted-stable" => Ok(Self::TiltedStable),
            "pareto-exp" => Ok(Self::ParetoExp),
            "two-point" => Ok(Self::TwoPointStub),
            "heavy-count" => Ok(Self::HeavyCount),
            _ => Err(Error::Parse(format!(
                "unknown offspring family {s:?} (expected tilted-stable, pareto-exp, two-point or heavy-count)"
            ))),
        }
    }
}

/// An uncalibrated family: identifier plus free parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct OffspringFamily {
    pub id: FamilyId,
    pub params: BTreeMap<String, f64>,
}

impl OffspringFamily {
    pub fn tilted_stable(alpha: f64) -> Self {
        Self::with(FamilyId::TiltedStable, &[("alpha", alpha)])
    }

    /// `b` children, with (w, γ) solved from the initial guess.
    pub fn pareto_exp(alpha: f64, b: u32) -> Self {
        let w0 = alpha * (alpha - 1.0) / 4.0;
        Self::with(
            FamilyId::ParetoExp,
            &[("alpha", alpha), ("b", f64::from(b)), ("w0", w0), ("gamma0", 1.0)],
        )
    }

    pub fn two_point(b: u32) -> Self {
        Self::with(FamilyId::TwoPointStub, &[("b", f64::from(b))])
    }

    pub fn heavy_count(gamma: f64) -> Self {
        Self::with(FamilyId::HeavyCount, &[("gamma", gamma)])
    }

    fn with(id: FamilyId, kv: &[(&str, f64)]) -> Self {
        Self {
            id,
            params: kv.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        }
    }

    /// Default family for `id` with the given entries overridden.
    pub fn from_params(id: FamilyId, overrides: &BTreeMap<String, f64>) -> Result<Self> {
        let mut fam = match id {
            FamilyId::TiltedStable => Self::tilted_stable(1.5),
            FamilyId::ParetoExp => Self::pareto_exp(1.5, 2),
            FamilyId::TwoPointStub => Self::two_point(2),
            FamilyId::HeavyCount => Self::heavy_count(1.5),
        };
        for (k, v) in overrides {
            if !fam.params.contains_key(k) {
                let known: Vec<&str> = fam.params.keys().map(String::as_str).collect();
                return Err(Error::Parse(format!(
                    "unknown parameter {k:?} for family {id} (known: {})",
                    known.join(", ")
                )));
            }
            fam.params.insert(k.clone(), *v);
        }
        Ok(fam)
    }

    fn get(&self, key: &str) -> Result<f64> {
        self.params
            .get(key)
            .copied()
            .ok_or_else(|| Error::InvalidParameter(format!("family {} is missing parameter {key}", self.id)))
    }

    fn get_count(&self, key: &str) -> Result<u32> {
        let v = self.get(key)?;
        if v.fract() != 0.0 || !(2.0..=1e6).contains(&v) {
            return Err(Error::InvalidParameter(format!("{key} = {v} must be an integer ≥ 2")));
        }
        Ok(v as u32)
    }
}

/// What is known about the spine step law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpineLaw {
    /// Exactly stable.
    Stable(StableParamsC),
    /// In the domain of attraction of a stable law with these exponents.
    Attraction { alpha: f64, alpha_rho_bar: f64 },
}

impl SpineLaw {
    pub fn alpha(&self) -> f64 {
        match self {
            Self::Stable(p) => p.alpha(),
            Self::Attraction { alpha, .. } => *alpha,
        }
    }

    pub fn alpha_rho_bar(&self) -> f64 {
        match self {
            Self::Stable(p) => p.alpha_rho_bar(),
            Self::Attraction { alpha_rho_bar, .. } => *alpha_rho_bar,
        }
    }

    /// ρ = 1 - ρ̄.
    pub fn rho(&self) -> f64 {
        1.0 - self.alpha_rho_bar() / self.alpha()
    }
}

/// How a_n is obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ANormRule {
    ClosedForm(SpineScaling),
    Fitted(SpineScaling),
    /// Needs [`CalibratedOffspring::lambda_calibration`].
    Unknown,
}

#[derive(Debug, Clone)]
pub struct CalibratedOffspring {
    pub family: OffspringFamily,
    pub count: CountLaw,
    pub child: Arc<dyn ChildLaw>,
    /// Calibrated parameter values, by name.
    pub params: BTreeMap<String, f64>,
    /// |E[Σe^{-X}] - 1| for the law actually sampled.
    pub residual_mass: f64,
    /// |E[ΣXe^{-X}]| for the law actually sampled.
    pub residual_drift: f64,
    pub spine: SpineLaw,
    pub a_n_rule: ANormRule,
    pub diagnostics: Vec<String>,
}

/// Default tolerance for [`calibrate_boundary`].
pub const CALIBRATION_TOL: f64 = 1e-10;

/// Solves the two boundary-case identities for the family's free
/// parameters.
pub fn calibrate_boundary(family: &OffspringFamily, tol: f64) -> Result<CalibratedOffspring> {
    let mut params = BTreeMap::new();
    let mut diagnostics = Vec::new();
    let (count, child, spine, a_n_rule): (CountLaw, Arc<dyn ChildLaw>, SpineLaw, ANormRule) = match family.id {
        FamilyId::TiltedStable => {
            let alpha = family.get("alpha")?;
            let e = std::f64::consts::E;
            let count = CountLaw::finite(vec![(2, 3.0 - e), (3, e - 2.0)])?;
            let child = TiltedStableChild::new(alpha)?;
            let p = *child.params();
            params.insert("alpha".into(), alpha);
            params.insert("theta".into(), p.theta());
            params.insert("lambda".into(), p.lambda());
            diagnostics.push(format!(
                "child law tabulated on [{}, {}] with {} nodes",
                child.table().x0(),
                child.table().x_max(),
                child.table().values().len()
            ));
            let scaling = SpineScaling::from_stable(&p);
            (count, Arc::new(child), SpineLaw::Stable(p), ANormRule::ClosedForm(scaling))
        }
        FamilyId::ParetoExp => {
            let alpha = family.get("alpha")?;
            let b = family.get_count("b")?;
            let init = [family.get("w0")?, family.get("gamma0")?];
            let (child, sol) = ParetoExpChild::calibrate(alpha, f64::from(b), init, tol)?;
            params.insert("alpha".into(), alpha);
            params.insert("b".into(), f64::from(b));
            params.insert("w".into(), child.weight());
            params.insert("gamma".into(), child.gamma());
            diagnostics.push(format!("{} converged in {} iterations", sol.method, sol.iterations));
            diagnostics.extend(sol.trace);
            let spine = SpineLaw::Attraction {
                alpha,
                alpha_rho_bar: alpha - 1.0,
            };
            (CountLaw::Fixed(b), Arc::new(child), spine, ANormRule::Unknown)
        }
        FamilyId::TwoPointStub => {
            let b = family.get_count("b")?;
            let child = TwoPointChild::boundary(f64::from(b))?;
            params.insert("b".into(), f64::from(b));
            params.insert("v".into(), child.v());
            params.insert("p_plus".into(), child.p_plus());
            let scaling = two_point_scaling(&child);
            (CountLaw::Fixed(b), Arc::new(child), gaussian_spine(), ANormRule::ClosedForm(scaling))
        }
        FamilyId::HeavyCount => {
            let gamma = family.get("gamma")?;
            let count = CountLaw::log_heavy(gamma)?;
            let m = count.mean();
            let child = TwoPointChild::boundary(m)?;
            params.insert("gamma".into(), gamma);
            params.insert("mean_count".into(), m);
            params.insert("v".into(), child.v());
            params.insert("p_plus".into(), child.p_plus());
            diagnostics.push("mean count from a direct sum to 1e6 plus an integral tail".into());
            let scaling = two_point_scaling(&child);
            (count, Arc::new(child), gaussian_spine(), ANormRule::ClosedForm(scaling))
        }
    };
    let m = count.mean();
    let (mass, drift) = child.boundary_moments();
    let residual_mass = (m * mass - 1.0).abs();
    let residual_drift = (m * drift).abs();
    if residual_mass > tol.max(1e-12) || residual_drift > tol.max(1e-12) {
        return Err(Error::Calibration {
            iterations: 0,
            trace: format!("family {}: residuals ({residual_mass:e}, {residual_drift:e}) above {tol:e}", family.id),
        });
    }
    Ok(CalibratedOffspring {
        family: family.clone(),
        count,
        child,
        params,
        residual_mass,
        residual_drift,
        spine,
        a_n_rule,
        diagnostics,
    })
}

fn gaussian_spine() -> SpineLaw {
    SpineLaw::Attraction {
        alpha: 2.0,
        alpha_rho_bar: 1.0,
    }
}

/// Symmetric ±v steps have variance v², so E[e^{itS_n}] ≈ e^{-n v² t²/2}.
fn two_point_scaling(child: &TwoPointChild) -> SpineScaling {
    SpineScaling {
        alpha: 2.0,
        alpha_rho_bar: 1.0,
        lambda: child.v() * child.v() / 2.0,
    }
}

/// Spine step sampler backed by the tilted child law.
#[derive(Debug, Clone)]
pub struct SpineStep(Arc<dyn ChildLaw>);

impl StepSampler for SpineStep {
    #[inline]
    fn sample_step(&self, rng: &mut SimRng) -> f64 {
        self.0.sample_tilted(rng)
    }
}

/// φ at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PhiValue {
    Finite(f64),
    Infinite,
    /// The numerical evaluation did not produce a finite number.
    Unstable,
}

impl PhiValue {
    pub fn finite(&self) -> Option<f64> {
        match self {
            Self::Finite(v) => Some(*v),
            _ => None,
        }
    }
}

/// Finiteness pattern of φ around t = 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhiCase {
    /// Finite on both sides of 1.
    A,
    /// Finite only to the left of 1.
    B,
    /// Finite only to the right of 1.
    BPrime,
    /// Finite only at 1.
    C,
}

impl PhiCase {
    pub fn label(&self) -> &'static str {
        match self {
            Self::A => "a",
            Self::B => "b",
            Self::BPrime => "b'",
            Self::C => "c",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhiProfile {
    pub points: Vec<(f64, PhiValue)>,
    pub case: PhiCase,
}

impl PhiProfile {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,phi,status\n");
        for (t, v) in &self.points {
            match v {
                PhiValue::Finite(x) => s.push_str(&format!("{t},{x:.12e},finite\n")),
                PhiValue::Infinite => s.push_str(&format!("{t},inf,infinite\n")),
                PhiValue::Unstable => s.push_str(&format!("{t},nan,unstable\n")),
            }
        }
        s
    }
}

/// Moment estimates with a block-size stability diagnostic.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentDiagnostic {
    pub m1: Estimate,
    pub m2: Estimate,
    /// (prefix size n, E[Y; Y ≤ n] for m1, for m2), smallest prefix first.
    pub nested: Vec<(usize, f64, f64)>,
    /// Largest relative rise of either truncated estimate from the smallest
    /// prefix to the full sample.
    pub rise: f64,
    pub stabilizing: bool,
    /// Values by enumeration when the law has finite support.
    pub exact: Option<(f64, f64)>,
}

/// Number of nested halvings in [`MomentDiagnostic`] and the rise above
/// which an estimate is flagged.
pub const MOMENT_NESTED_LEVELS: usize = 5;
pub const MOMENT_RISE_LIMIT: f64 = 0.10;

#[derive(Debug, Clone, PartialEq)]
pub struct LambdaFit {
    pub lambda: f64,
    pub theta: f64,
    /// Relative RMS residual of the fit to -log φ̂.
    pub residual: f64,
    pub scaling: SpineScaling,
    pub cf: Vec<CfEstimate>,
}

/// Fit-quality threshold for [`CalibratedOffspring::lambda_calibration`].
pub const LAMBDA_FIT_THRESHOLD: f64 = 0.1;
pub const LAMBDA_FIT_GRID: [f64; 6] = [0.2, 0.4, 0.6, 0.8, 1.0, 1.2];

impl CalibratedOffspring {
    pub fn mean_count(&self) -> f64 {
        self.count.mean()
    }

    /// a_n rule, if known.
    pub fn scaling(&self) -> Option<SpineScaling> {
        match self.a_n_rule {
            ANormRule::ClosedForm(s) | ANormRule::Fitted(s) => Some(s),
            ANormRule::Unknown => None,
        }
    }

    pub fn sample_count(&self, rng: &mut SimRng) -> u64 {
        self.count.sample(rng)
    }

    pub fn sample_offspring_vec(&self, rng: &mut SimRng) -> Vec<f64> {
        let mut out = Vec::new();
        self.sample_into(rng, &mut out);
        out
    }

    /// Displacements of one family conditioned on the spine: the count is
    /// size-biased and the spine child, chosen with probability ∝ e^{-x},
    /// is returned by index.
    pub fn size_biased_offspring(&self, rng: &mut SimRng) -> Result<(Vec<f64>, usize)> {
        if self.residual_mass > 1e-8 {
            return Err(Error::Domain(format!(
                "size-biased law needs E[Σe^(-X)] = 1; residual is {:e}",
                self.residual_mass
            )));
        }
        let n = self.count.sample_size_biased(rng)? as usize;
        let spine = rng.random_range(0..n);
        let out = (0..n)
            .map(|i| if i == spine { self.child.sample_tilted(rng) } else { self.child.sample(rng) })
            .collect();
        Ok((out, spine))
    }

    pub fn spine_step_sampler(&self) -> SpineStep {
        SpineStep(self.child.clone())
    }

    /// φ(t) = log E[Σ e^{-tX}] = log(E[N] E_q[e^{-tX}]); the grid must have
    /// points on both sides of 1.
    pub fn phi_profile(&self, t_grid: &[f64]) -> Result<PhiProfile> {
        if !t_grid.iter().any(|&t| t < 1.0) || !t_grid.iter().any(|&t| t > 1.0) {
            return Err(Error::InvalidParameter("t-grid needs points on both sides of 1".into()));
        }
        let m = self.mean_count();
        let points: Vec<(f64, PhiValue)> = t_grid
            .iter()
            .map(|&t| {
                let v = match self.child.laplace(t) {
                    None => PhiValue::Infinite,
                    Some(l) => {
                        let v = (m * l).ln();
                        if v.is_finite() {
                            PhiValue::Finite(v)
                        } else if l == f64::INFINITY {
                            PhiValue::Infinite
                        } else {
                            PhiValue::Unstable
                        }
                    }
                };
                (t, v)
            })
            .collect();
        let side = |left: bool| {
            points
                .iter()
                .filter(|(t, _)| if left { *t < 1.0 } else { *t > 1.0 })
                .any(|(_, v)| matches!(v, PhiValue::Finite(_)))
        };
        let case = match (side(true), side(false)) {
            (true, true) => PhiCase::A,
            (true, false) => PhiCase::B,
            (false, true) => PhiCase::BPrime,
            (false, false) => PhiCase::C,
        };
        Ok(PhiProfile { points, case })
    }

    /// (W₁, Z₁) for one family, Z₁ = Σ (X⁺)^{αρ̄} e^{-X}.
    pub fn first_generation(&self, rng: &mut SimRng) -> (f64, f64) {
        let arb = self.spine.alpha_rho_bar();
        let n = self.count.sample(rng);
        if let Some(s) = self.child.sum_functionals(n, arb, rng) {
            return s;
        }
        let (mut w, mut z) = (0.0, 0.0);
        for _ in 0..n {
            let x = self.child.sample(rng);
            let e = (-x).exp();
            w += e;
            if x > 0.0 {
                z += x.powf(arb) * e;
            }
        }
        (w, z)
    }

    fn moment_terms(&self, w: f64, z: f64) -> (f64, f64) {
        let lp = |x: f64| if x > 1.0 { x.ln() } else { 0.0 };
        (
            w * lp(w).powf(self.spine.alpha()),
            z * lp(z).powf(self.spine.alpha() * self.spine.rho()),
        )
    }

    /// Monte Carlo estimates of E[W₁(log₊W₁)^α] and E[Z₁(log₊Z₁)^{αρ}].
    ///
    /// On the first n_k = reps/2^k replicas (k = 5, ..., 0) the terms are
    /// averaged after truncation at n_k, which estimates E[Y; Y ≤ n_k]. For a
    /// finite moment these settle as n_k grows. The family is flagged when
    /// either truncated estimate rises by more than 10% from the smallest
    /// prefix to the full sample.
    pub fn moment_condition_estimate(&self, reps: usize, streams: &RngStreams) -> MomentDiagnostic {
        let terms = streams.map_replicas(reps, |_, rng| {
            let (w, z) = self.first_generation(rng);
            self.moment_terms(w, z)
        });
        let mut nested = Vec::new();
        for k in (0..=MOMENT_NESTED_LEVELS).rev() {
            let n = (reps >> k).max(1);
            let cap = n as f64;
            let trunc = |y: f64| if y <= cap { y } else { 0.0 };
            let a = terms[..n].iter().map(|t| trunc(t.0)).sum::<f64>() / cap;
            let b = terms[..n].iter().map(|t| trunc(t.1)).sum::<f64>() / cap;
            nested.push((n, a, b));
        }
        let m1: RunningMoments = terms.iter().map(|t| t.0).collect();
        let m2: RunningMoments = terms.iter().map(|t| t.1).collect();
        let (first, last) = (nested[0], *nested.last().expect("non-empty"));
        let rel = |base: f64, full: f64| {
            if base > 0.0 {
                full / base - 1.0
            } else if full > 0.0 {
                f64::INFINITY
            } else {
                0.0
            }
        };
        let rise = rel(first.1, last.1).max(rel(first.2, last.2));
        MomentDiagnostic {
            m1: m1.estimate(),
            m2: m2.estimate(),
            nested,
            rise,
            stabilizing: rise <= MOMENT_RISE_LIMIT,
            exact: self.exact_moment_condition(),
        }
    }

    /// Enumerates (W₁, Z₁) for a finite count law with two-point children.
    pub fn exact_moment_condition(&self) -> Option<(f64, f64)> {
        let pmf = self.count.enumerate()?;
        let [(x1, p1), (x2, _)] = self.child.atoms()?;
        let arb = self.spine.alpha_rho_bar();
        let zpart = |x: f64| if x > 0.0 { x.powf(arb) * (-x).exp() } else { 0.0 };
        let (mut a, mut b) = (0.0, 0.0);
        for (n, pn) in pmf {
            let mut binom = 1.0;
            for k in 0..=n {
                if k > 0 {
                    binom *= f64::from(n - k + 1) / f64::from(k);
                }
                let pr = pn * binom * p1.powi(k as i32) * (1.0 - p1).powi((n - k) as i32);
                let (kf, rf) = (f64::from(k), f64::from(n - k));
                let w = kf * (-x1).exp() + rf * (-x2).exp();
                let z = kf * zpart(x1) + rf * zpart(x2);
                let (ta, tb) = self.moment_terms(w, z);
                a += pr * ta;
                b += pr * tb;
            }
        }
        Some((a, b))
    }

    /// Fits (λ, θ) to the empirical CF of Y = S_n / n^{1/α} for spine walks.
    ///
    /// With L(t) = -log φ̂(t) ≈ λ|t|^α e^{-iπθα/2} = (A - iB)|t|^α for t > 0,
    /// A and B are linear least-squares coefficients.
    pub fn lambda_calibration(&self, n: usize, reps: usize, streams: &RngStreams) -> Result<LambdaFit> {
        self.lambda_calibration_on(n, reps, &LAMBDA_FIT_GRID, LAMBDA_FIT_THRESHOLD, streams)
    }

    pub fn lambda_calibration_on(
        &self,
        n: usize,
        reps: usize,
        t_grid: &[f64],
        threshold: f64,
        streams: &RngStreams,
    ) -> Result<LambdaFit> {
        if n == 0 || reps < 2 || t_grid.is_empty() {
            return Err(Error::InvalidParameter("lambda calibration needs n ≥ 1, reps ≥ 2 and a t-grid".into()));
        }
        let alpha = self.spine.alpha();
        let step = self.spine_step_sampler();
        let norm = (n as f64).powf(1.0 / alpha);
        let ys = streams.map_replicas(reps, |_, rng| {
            let mut s = 0.0;
            for _ in 0..n {
                s += step.sample_step(rng);
            }
            s / norm
        });
        let cf: Vec<CfEstimate> = t_grid.iter().map(|&t| crate::stats::empirical_cf(&ys, t)).collect();
        let logs: Vec<(f64, Complex64)> = cf.iter().map(|c| (c.t, -c.value.ln())).collect();
        let (mut sa, mut sb, mut den) = (0.0, 0.0, 0.0);
        for (t, l) in &logs {
            let ta = t.abs().powf(alpha);
            sa += l.re * ta;
            sb -= l.im * ta * t.signum();
            den += ta * ta;
        }
        let (a, b) = (sa / den, sb / den);
        let lambda = a.hypot(b);
        let theta = 2.0 * b.atan2(a) / (std::f64::consts::PI * alpha);
        let (mut num, mut tot) = (0.0, 0.0);
        for (t, l) in &logs {
            let ta = t.abs().powf(alpha);
            let fit = Complex64::new(a * ta, -b * ta * t.signum());
            num += (l - fit).norm_sqr();
            tot += l.norm_sqr();
        }
        let residual = (num / tot).sqrt();
        if !residual.is_finite() || residual > threshold {
            return Err(Error::FitQuality { residual, threshold });
        }
        let scaling = SpineScaling {
            alpha,
            alpha_rho_bar: alpha * (1.0 - theta) / 2.0,
            lambda,
        };
        Ok(LambdaFit {
            lambda,
            theta,
            residual,
            scaling,
            cf,
        })
    }

    /// Installs a fitted a_n rule.
    pub fn with_fitted_scaling(mut self, fit: &LambdaFit) -> Self {
        self.a_n_rule = ANormRule::Fitted(fit.scaling);
        self
    }
}

impl OffspringLaw for CalibratedOffspring {
    fn sample_into(&self, rng: &mut SimRng, out: &mut Vec<f64>) {
        let n = self.count.sample(rng);
        for _ in 0..n {
            out.push(self.child.sample(rng));
        }
    }
}

impl<T: OffspringLaw + ?Sized> OffspringLaw for &T {
    fn sample_into(&self, rng: &mut SimRng, out: &mut Vec<f64>) {
        (**self).sample_into(rng, out)
    }
}

impl<T: OffspringLaw + ?Sized> OffspringLaw for Arc<T> {
    fn sample_into(&self, rng: &mut SimRng, out: &mut Vec<f64>) {
        (**self).sample_into(rng, out)
    }
}
