//! The size-biased measure: a BRW with a distinguished spine.
//!
//! The spine particle reproduces with the size-biased law (count biased by
//! its size, one child chosen uniformly and drawn from e^{-x}q(x)); its other
//! children start ordinary subtrees. Under this measure the spine positions
//! form a random walk with the spine step law, which is what the
//! many-to-one formula
//!
//!   E_x[Σ_{|u|=n} e^{-X_u} h(X_{u_0}, ..., X_{u_n})] = e^{-x} E*_x[h(X_{ξ_0}, ..., X_{ξ_n})]
//!
//! expresses. [`many_to_one_check`] estimates both sides independently.

use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use num_complex::Complex64;

use crate::brw::{evolve, z_functional, Generation, SimConfig};
use crate::error::{Error, Result};
use crate::offspring::{CalibratedOffspring, FixedOffspring, SpineLaw};
use crate::rng::{RngStreams, SimRng};
use crate::stats::{empirical_cf, CfEstimate, Estimate, RunningMoments};
use crate::walk::StepSampler;

/// Contribution at the horizon of the subtrees rooted at the non-spine
/// children born in one generation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SideSummary {
    /// Generation of the roots.
    pub born: usize,
    pub roots: usize,
    pub count: usize,
    pub w: f64,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpineRealization {
    pub n: usize,
    /// X_{ξ_0}, ..., X_{ξ_n}.
    pub spine_positions: Vec<f64>,
    /// Empty when the subtrees were not simulated.
    pub side_subtree_summaries: Vec<SideSummary>,
}

impl SpineRealization {
    pub fn spine_end(&self) -> f64 {
        *self.spine_positions.last().expect("spine has its start")
    }

    /// W_n of the whole tree: the spine's term plus the side subtrees'.
    pub fn w_n(&self) -> f64 {
        (-self.spine_end()).exp() + self.side_subtree_summaries.iter().map(|s| s.w).sum::<f64>()
    }

    pub fn z_n(&self, alpha_rho_bar: f64) -> f64 {
        let x = self.spine_end();
        let spine = if x > 0.0 { x.powf(alpha_rho_bar) * (-x).exp() } else { 0.0 };
        spine + self.side_subtree_summaries.iter().map(|s| s.z).sum::<f64>()
    }
}

/// Simulates n generations under the size-biased measure from x0. With
/// `side_trees` the non-spine children start plain subtrees that are
/// evolved to the horizon under `cfg` (its start position and k0 are
/// ignored).
pub fn simulate_spine_tree(
    o: &CalibratedOffspring,
    n: usize,
    x0: f64,
    side_trees: bool,
    cfg: &SimConfig,
    rng: &mut SimRng,
) -> Result<SpineRealization> {
    let arb = o.spine.alpha_rho_bar();
    let mut spine = Vec::with_capacity(n + 1);
    spine.push(x0);
    let mut sides = Vec::new();
    let mut x = x0;
    for k in 0..n {
        let (family, idx) = o.size_biased_offspring(rng)?;
        if side_trees {
            let roots: Vec<f64> = family
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != idx)
                .map(|(_, &dx)| x + dx)
                .collect();
            let g = grow_side_trees(&roots, n - k - 1, o, cfg, rng)?;
            sides.push(SideSummary {
                born: k + 1,
                roots: roots.len(),
                count: g.len(),
                w: crate::brw::additive_martingale(&g),
                z: z_functional(&g, arb),
            });
        }
        x += family[idx];
        spine.push(x);
    }
    Ok(SpineRealization {
        n,
        spine_positions: spine,
        side_subtree_summaries: sides,
    })
}

fn grow_side_trees(
    roots: &[f64],
    generations: usize,
    o: &CalibratedOffspring,
    cfg: &SimConfig,
    rng: &mut SimRng,
) -> Result<Generation> {
    // the roots are produced by one step from a virtual parent at 0
    let sub = SimConfig {
        start_x: 0.0,
        k0: 0,
        barrier_a: None,
        upper_cutoff_b: None,
        ..*cfg
    };
    let mut g = evolve(&Generation::initial(&sub), &FixedOffspring(roots.to_vec()), cfg, rng)?;
    for _ in 0..generations {
        g = evolve(&g, o, cfg, rng)?;
    }
    Ok(g)
}

/// The registered path functionals h.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HFunctional {
    /// h ≡ 1.
    One,
    /// 1{all positions along the path ≥ 0}.
    MinNonNegative,
    /// 1{X_n ≥ t}.
    AboveThreshold(f64),
    /// exp(-X_n⁺).
    ExpNegPositivePart,
}

impl HFunctional {
    /// The three checks of the standard suite.
    pub fn suite() -> [HFunctional; 3] {
        [Self::MinNonNegative, Self::AboveThreshold(0.0), Self::ExpNegPositivePart]
    }

    pub fn id(&self) -> String {
        match self {
            Self::One => "one".into(),
            Self::MinNonNegative => "min-nonneg".into(),
            Self::AboveThreshold(t) => format!("above:{t}"),
            Self::ExpNegPositivePart => "exp-neg-pos".into(),
        }
    }

    fn on_endpoint(&self, x: f64, min_ok: bool) -> f64 {
        match *self {
            Self::One => 1.0,
            Self::MinNonNegative => f64::from(u8::from(min_ok)),
            Self::AboveThreshold(t) => f64::from(u8::from(x >= t)),
            Self::ExpNegPositivePart => (-x.max(0.0)).exp(),
        }
    }

    /// Σ_{|u|=n} e^{-X_u} h over a generation.
    pub fn weighted_sum(&self, g: &Generation) -> f64 {
        g.positions
            .iter()
            .zip(&g.min_ok)
            .map(|(&x, &ok)| (-x).exp() * self.on_endpoint(x, ok))
            .sum()
    }

    /// h along a spine path.
    pub fn on_path(&self, path: &[f64]) -> f64 {
        let x = *path.last().expect("path is non-empty");
        self.on_endpoint(x, path.iter().all(|&p| p >= 0.0))
    }
}

impl fmt::Display for HFunctional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id())
    }
}

impl FromStr for HFunctional {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "one" => Ok(Self::One),
            "min-nonneg" => Ok(Self::MinNonNegative),
            "exp-neg-pos" => Ok(Self::ExpNegPositivePart),
            _ => match s.strip_prefix("above:").map(str::parse::<f64>) {
                Some(Ok(t)) if t.is_finite() => Ok(Self::AboveThreshold(t)),
                _ => Err(Error::Parse(format!(
                    "unknown test functional '{s}' (expected one, min-nonneg, above:<t>, exp-neg-pos)"
                ))),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManyToOne {
    pub h: HFunctional,
    pub n: usize,
    pub lhs: Estimate,
    pub rhs: Estimate,
    pub z: f64,
}

impl ManyToOne {
    pub fn passes(&self, z_max: f64) -> bool {
        self.z.abs() <= z_max
    }
}

pub fn many_to_one_csv(rows: &[ManyToOne]) -> String {
    let mut out = String::from("h_id,n,lhs,lhs_se,rhs,rhs_se,z\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.h.id(),
            r.n,
            r.lhs.value,
            r.lhs.se,
            r.rhs.value,
            r.rhs.se,
            r.z
        );
    }
    out
}

/// Stream family tags of the two sides.
const LHS_FAMILY: u64 = 0x6c68_73;
const RHS_FAMILY: u64 = 0x7268_73;

/// Both sides of the many-to-one formula from x: plain-BRW ensembles on the
/// left, spine walks on the right, on disjoint stream families.
pub fn many_to_one_check(
    o: &CalibratedOffspring,
    h: HFunctional,
    n: usize,
    x: f64,
    reps: usize,
    max_particles: usize,
    streams: &RngStreams,
) -> Result<ManyToOne> {
    if reps < 2 {
        return Err(Error::InvalidParameter("many-to-one check needs at least two replicas".into()));
    }
    let cfg = SimConfig {
        start_x: x,
        max_particles,
        ..SimConfig::default()
    };
    let lhs: Vec<Result<f64>> = streams.family(LHS_FAMILY).map_replicas(reps, |_, rng| {
        let mut g = Generation::initial(&cfg);
        for _ in 0..n {
            g = evolve(&g, o, &cfg, rng).map_err(|e| match e {
                Error::Overflow { generation, count, limit } => Error::Domain(format!(
                    "plain BRW reached {count} particles (limit {limit}) at generation {generation}; use a smaller n"
                )),
                e => e,
            })?;
        }
        Ok(h.weighted_sum(&g))
    });
    let lhs: RunningMoments = lhs.into_iter().collect::<Result<Vec<_>>>()?.into_iter().collect();
    let step = o.spine_step_sampler();
    let rhs: RunningMoments = streams
        .family(RHS_FAMILY)
        .map_replicas(reps, |_, rng| {
            let mut path = Vec::with_capacity(n + 1);
            path.push(x);
            let mut s = x;
            for _ in 0..n {
                s += step.sample_step(rng);
                path.push(s);
            }
            h.on_path(&path)
        })
        .into_iter()
        .collect();
    let scale = (-x).exp();
    let lhs = lhs.estimate();
    let rhs = Estimate::new(scale * rhs.mean(), scale * rhs.se());
    let se = lhs.se.hypot(rhs.se);
    let diff = lhs.value - rhs.value;
    let z = if se > 0.0 {
        diff / se
    } else if diff == 0.0 {
        0.0
    } else {
        f64::INFINITY.copysign(diff)
    };
    Ok(ManyToOne { h, n, lhs, rhs, z })
}

/// CF of one spine step when it is known in closed form.
pub fn exact_spine_step_cf(o: &CalibratedOffspring, t: f64) -> Option<Complex64> {
    if let SpineLaw::Stable(p) = &o.spine {
        return Some(p.char_function(t));
    }
    let atoms = o.child.atoms()?;
    let weights: Vec<f64> = atoms.iter().map(|&(x, p)| p * (-x).exp()).collect();
    let total: f64 = weights.iter().sum();
    Some(
        atoms
            .iter()
            .zip(&weights)
            .map(|(&(x, _), &w)| Complex64::new(0.0, t * x).exp() * (w / total))
            .sum(),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpineCfCheck {
    pub t: f64,
    pub exact: Complex64,
    pub estimate: CfEstimate,
    pub z: f64,
}

/// Empirical CF of X_{ξ_n} - x0, with the spine driven through the
/// size-biased offspring law, against the n-th power of the step CF.
pub fn spine_marginal_cf_check(
    o: &CalibratedOffspring,
    n: usize,
    reps: usize,
    t_grid: &[f64],
    streams: &RngStreams,
) -> Result<Vec<SpineCfCheck>> {
    let ends: Vec<Result<f64>> = streams.map_replicas(reps, |_, rng| {
        simulate_spine_tree(o, n, 0.0, false, &SimConfig::default(), rng).map(|s| s.spine_end())
    });
    let ends = ends.into_iter().collect::<Result<Vec<_>>>()?;
    t_grid
        .iter()
        .map(|&t| {
            let exact = exact_spine_step_cf(o, t)
                .ok_or_else(|| Error::Unsupported("the spine step CF is not known in closed form".into()))?
                .powu(n as u32);
            let estimate = empirical_cf(&ends, t);
            let z = estimate.z(exact);
            Ok(SpineCfCheck { t, exact, estimate, z })
        })
        .collect()
}
