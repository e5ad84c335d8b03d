//! Experiment configuration.
//!
//! One TOML file with a section per command, an `[offspring]` and a
//! `[stable]` section shared by all of them, and a `[tolerances]` table that
//! holds every threshold used to decide pass or fail. All keys are optional;
//! missing keys take the defaults below. Unknown keys are rejected.
//!
//! ```toml
//! [stable]
//! alpha = 1.5
//! theta = 0.3333333333333333
//!
//! [offspring]
//! family = "tilted-stable"      # or pareto-exp, two-point, heavy-count
//! params = { alpha = 1.5 }
//!
//! [brw]
//! cutoff_b = 14.0
//!
//! [tolerances]
//! kappa_rel = 0.10
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use stable_brw::offspring::{FamilyId, OffspringFamily};
use stable_brw::stable::StableParamsC;
use stable_brw::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub stable: StableSection,
    pub offspring: OffspringSection,
    pub stable_check: StableCheckSection,
    pub renewal: RenewalSection,
    pub kappa: KappaSection,
    pub brw: BrwSection,
    pub seneta_heyde: SenetaHeydeSection,
    pub mto: MtoSection,
    pub tolerances: Tolerances,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            stable: StableSection::default(),
            offspring: OffspringSection::default(),
            stable_check: StableCheckSection::default(),
            renewal: RenewalSection::default(),
            kappa: KappaSection::default(),
            brw: BrwSection::default(),
            seneta_heyde: SenetaHeydeSection::default(),
            mto: MtoSection::default(),
            tolerances: Tolerances::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StableSection {
    pub alpha: f64,
    pub theta: f64,
    pub lambda: f64,
}

impl Default for StableSection {
    fn default() -> Self {
        Self {
            alpha: 1.5,
            theta: 1.0 / 3.0,
            lambda: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OffspringSection {
    pub family: String,
    /// Overrides of the family's default parameters.
    pub params: BTreeMap<String, f64>,
}

impl Default for OffspringSection {
    fn default() -> Self {
        Self {
            family: FamilyId::TiltedStable.to_string(),
            params: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StableCheckSection {
    pub samples: usize,
    pub cf_t: Vec<f64>,
    /// Number of (α, θ) points in the round-trip grid.
    pub grid_points: usize,
}

impl Default for StableCheckSection {
    fn default() -> Self {
        Self {
            samples: 1_000_000,
            cf_t: vec![0.25, 0.5, 1.0, 2.0, 4.0],
            grid_points: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenewalSection {
    pub x_max: f64,
    pub h: f64,
    pub replicas: usize,
    pub epoch_budget: u64,
    pub heyde_heights: usize,
    pub heyde_s: f64,
    pub harmonic_x: Vec<f64>,
    pub harmonic_draws: usize,
}

impl Default for RenewalSection {
    fn default() -> Self {
        Self {
            x_max: 50.0,
            h: 0.25,
            replicas: 20_000,
            epoch_budget: 100_000,
            heyde_heights: 1_000_000,
            heyde_s: 0.01,
            harmonic_x: vec![0.0, 1.0, 5.0, 20.0],
            harmonic_draws: 200_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KappaSection {
    pub n: u64,
    pub reps: usize,
    pub max_attempts: u64,
    /// Also run the Gaussian (α = 2) case.
    pub gaussian: bool,
    pub survival_n: Vec<u64>,
    pub survival_reps: usize,
}

impl Default for KappaSection {
    fn default() -> Self {
        Self {
            n: 2000,
            reps: 20_000,
            max_attempts: 1_000_000,
            gaussian: true,
            survival_n: vec![500, 1000, 2000],
            survival_reps: 400_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BrwSection {
    /// Horizon of the untruncated martingale-mean ensemble.
    pub martingale_n: usize,
    pub martingale_reps: usize,
    /// Horizon and size of the truncated trajectory ensembles.
    pub n_max: usize,
    pub reps: usize,
    pub cutoff_b: f64,
    pub barrier_a: f64,
    pub k0: usize,
    pub max_particles: usize,
    pub cauchy_lag: usize,
    pub cauchy_n: Vec<usize>,
    pub w_prime_n: Vec<u64>,
    pub w_prime_reps: usize,
    pub w_prime_cutoff: f64,
    /// Renewal table for D'.
    pub table_x_max: f64,
    pub table_h: f64,
    pub table_replicas: usize,
    pub table_epoch_budget: u64,
}

impl Default for BrwSection {
    fn default() -> Self {
        Self {
            martingale_n: 10,
            martingale_reps: 10_000,
            n_max: 20,
            reps: 1000,
            cutoff_b: 14.0,
            barrier_a: 5.0,
            k0: 4,
            max_particles: 5_000_000,
            cauchy_lag: 4,
            cauchy_n: vec![8, 12, 16, 20],
            w_prime_n: vec![8, 12, 16],
            w_prime_reps: 4000,
            w_prime_cutoff: 4.0,
            table_x_max: 60.0,
            table_h: 0.25,
            table_replicas: 10_000,
            table_epoch_budget: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SenetaHeydeSection {
    pub n_list: Vec<u64>,
    pub reps: usize,
    pub cutoff_b: f64,
    pub max_particles: usize,
    pub min_survivors: usize,
}

impl Default for SenetaHeydeSection {
    fn default() -> Self {
        Self {
            n_list: vec![8, 12, 16, 20],
            reps: 1000,
            cutoff_b: 14.0,
            max_particles: 5_000_000,
            min_survivors: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MtoSection {
    pub n_list: Vec<usize>,
    pub reps: usize,
    pub x: f64,
    pub functionals: Vec<String>,
    pub max_particles: usize,
    pub cf_n: usize,
    pub cf_reps: usize,
    pub cf_t: Vec<f64>,
}

impl Default for MtoSection {
    fn default() -> Self {
        Self {
            n_list: vec![1, 4, 8],
            reps: 10_000,
            x: 0.0,
            functionals: vec!["min-nonneg".into(), "above:0".into(), "exp-neg-pos".into()],
            max_particles: 5_000_000,
            cf_n: 8,
            cf_reps: 20_000,
            cf_t: vec![0.1, 0.25, 0.5, 1.0],
        }
    }
}

/// Every pass/fail threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub roundtrip_rel: f64,
    pub form_a_abs: f64,
    /// Standard errors allowed for Monte Carlo comparisons.
    pub z_max: f64,
    pub heyde_lo: f64,
    pub heyde_hi: f64,
    pub renewal_ratio_lo: f64,
    pub renewal_ratio_hi: f64,
    /// Lower end of the "top decade" as a fraction of x_max.
    pub renewal_decade: f64,
    pub censored_max: f64,
    pub survival_flat: f64,
    pub survival_k: f64,
    pub kappa_rel: f64,
    pub w_prime_flat: f64,
    pub w_prime_k: f64,
    pub barrier_ratio: f64,
    pub rho_factor: f64,
    pub trunc_rel: f64,
    pub z_stabilize: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            roundtrip_rel: 1e-12,
            form_a_abs: 1e-12,
            z_max: 3.0,
            heyde_lo: 0.85,
            heyde_hi: 1.15,
            renewal_ratio_lo: 0.9,
            renewal_ratio_hi: 1.1,
            renewal_decade: 0.1,
            censored_max: 0.01,
            survival_flat: 0.10,
            survival_k: 0.15,
            kappa_rel: 0.10,
            w_prime_flat: 0.15,
            w_prime_k: 0.25,
            barrier_ratio: 0.25,
            rho_factor: 2.0,
            trunc_rel: 1e-6,
            z_stabilize: 0.25,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Parse(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn stable_params(&self) -> Result<StableParamsC> {
        StableParamsC::new(self.stable.alpha, self.stable.theta, self.stable.lambda)
    }

    pub fn family(&self) -> Result<OffspringFamily> {
        let id: FamilyId = self.offspring.family.parse()?;
        OffspringFamily::from_params(id, &self.offspring.params)
    }

    /// Checks everything that can be checked without simulating.
    pub fn validate(&self) -> Result<()> {
        self.stable_params()?;
        self.family()?;
        let positive = |name: &str, v: usize| {
            if v == 0 {
                Err(Error::InvalidParameter(format!("{name} must be positive")))
            } else {
                Ok(())
            }
        };
        positive("stable_check.samples", self.stable_check.samples)?;
        positive("renewal.replicas", self.renewal.replicas)?;
        positive("renewal.heyde_heights", self.renewal.heyde_heights)?;
        positive("kappa.reps", self.kappa.reps)?;
        positive("kappa.survival_reps", self.kappa.survival_reps)?;
        positive("brw.martingale_reps", self.brw.martingale_reps)?;
        positive("brw.reps", self.brw.reps)?;
        positive("seneta_heyde.reps", self.seneta_heyde.reps)?;
        positive("mto.reps", self.mto.reps)?;
        if !(self.renewal.x_max > 0.0 && self.renewal.h > 0.0 && self.renewal.h <= self.renewal.x_max) {
            return Err(Error::InvalidParameter("renewal grid needs 0 < h ≤ x_max".into()));
        }
        if !(self.renewal.heyde_s > 0.0) {
            return Err(Error::InvalidParameter("renewal.heyde_s must be positive".into()));
        }
        if self.brw.cauchy_n.iter().any(|&n| n < self.brw.cauchy_lag || n > self.brw.n_max) {
            return Err(Error::InvalidParameter(format!(
                "brw.cauchy_n must lie in [cauchy_lag, n_max] = [{}, {}]",
                self.brw.cauchy_lag, self.brw.n_max
            )));
        }
        if self.seneta_heyde.n_list.is_empty() || self.mto.n_list.is_empty() || self.kappa.survival_n.is_empty() {
            return Err(Error::InvalidParameter("horizon lists must be non-empty".into()));
        }
        for h in &self.mto.functionals {
            h.parse::<stable_brw::spinal::HFunctional>()?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let c = ExperimentConfig::default();
        assert_eq!(ExperimentConfig::from_toml(&c.to_toml()).unwrap(), c);
        assert_eq!(ExperimentConfig::from_toml("").unwrap(), c);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(ExperimentConfig::from_toml("[stable]\nalpha = 1.0\n")
            .unwrap_err()
            .to_string()
            .contains("alpha = 1 is out of scope"));
        assert!(ExperimentConfig::from_toml("[brw]\ncutof_b = 3.0\n").is_err());
        assert!(ExperimentConfig::from_toml("[offspring]\nfamily = \"nope\"\n").is_err());
        assert!(ExperimentConfig::from_toml("[mto]\nfunctionals = [\"above:\"]\n").is_err());
    }
}
