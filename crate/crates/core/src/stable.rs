//! Strictly α-stable laws.
//!
//! The working parametrization (form C) has characteristic function
//!
//! ```text
//! E[exp(itX)] = exp(-λ |t|^α exp(-iπθα sgn(t) / 2))
//! ```
//!
//! with negativity parameter ρ̄ = P(X < 0) = (1 - θ)/2. Form A is the
//! classical `exp(-λ'|t|^α (1 - iβ tan(πα/2) sgn t))`. The β sign follows
//! that display literally; some references on ladder heights flip it.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;

use crate::error::{Error, Result};
use rand::Rng;
use rand_distr::Exp1;

use crate::rng::{open01, SimRng};
use crate::special::gamma;
use crate::walk::StepSampler;

const BOUND_SLACK: f64 = 1e-12;

fn check_alpha(alpha: f64) -> Result<()> {
    if !alpha.is_finite() || alpha <= 0.0 || alpha >= 2.0 {
        return Err(Error::InvalidParameter(format!("alpha = {alpha} is outside (0, 2)")));
    }
    if alpha == 1.0 {
        return Err(Error::AlphaOneOutOfScope);
    }
    Ok(())
}

/// Form (C) parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StableParamsC {
    alpha: f64,
    theta: f64,
    lambda: f64,
}

/// Form (A) parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StableParamsA {
    alpha: f64,
    beta: f64,
    lambda_prime: f64,
}

impl StableParamsC {
    pub fn new(alpha: f64, theta: f64, lambda: f64) -> Result<Self> {
        check_alpha(alpha)?;
        let bound = 1f64.min(2.0 / alpha - 1.0);
        if !theta.is_finite() || theta.abs() > bound + BOUND_SLACK {
            return Err(Error::InvalidParameter(format!(
                "|theta| = {} exceeds min(1, 2/alpha - 1) = {bound}",
                theta.abs()
            )));
        }
        if (theta.abs() - 1.0).abs() < BOUND_SLACK {
            return Err(Error::InvalidParameter("|theta| = 1 is degenerate".into()));
        }
        if !lambda.is_finite() || lambda <= 0.0 {
            return Err(Error::InvalidParameter(format!("lambda = {lambda} must be positive")));
        }
        Ok(Self { alpha, theta, lambda })
    }

    /// The spectrally negative law with λ = 1: θ = 2/α - 1, so αρ = 1.
    pub fn spectrally_negative(alpha: f64) -> Result<Self> {
        if alpha <= 1.0 {
            return Err(Error::Domain(format!(
                "no spectrally negative strictly stable law with alpha = {alpha} <= 1"
            )));
        }
        Self::new(alpha, 2.0 / alpha - 1.0, 1.0)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn rho_bar(&self) -> f64 {
        (1.0 - self.theta) / 2.0
    }

    pub fn rho(&self) -> f64 {
        1.0 - self.rho_bar()
    }

    /// Same law rescaled to λ = 1, together with the factor λ^{1/α} by which
    /// the original variable exceeds the rescaled one.
    pub fn normalized(&self) -> (Self, f64) {
        (
            Self {
                lambda: 1.0,
                ..*self
            },
            self.lambda.powf(1.0 / self.alpha),
        )
    }

    pub fn to_form_a(&self) -> StableParamsA {
        let half = PI * self.theta * self.alpha / 2.0;
        StableParamsA {
            alpha: self.alpha,
            beta: half.tan() / (FRAC_PI_2 * self.alpha).tan(),
            lambda_prime: self.lambda * half.cos(),
        }
    }

    pub fn char_function(&self, t: f64) -> Complex64 {
        if t == 0.0 {
            return Complex64::new(1.0, 0.0);
        }
        let phase = Complex64::from_polar(1.0, -PI * self.theta * self.alpha * t.signum() / 2.0);
        (-self.lambda * t.abs().powf(self.alpha) * phase).exp()
    }

    /// a_n = (λn)^{1/α}.
    pub fn norming_sequence(&self, n: u64) -> f64 {
        (self.lambda * n as f64).powf(1.0 / self.alpha)
    }

    pub fn alpha_rho_bar(&self) -> f64 {
        self.alpha * self.rho_bar()
    }
}

impl StableParamsA {
    pub fn new(alpha: f64, beta: f64, lambda_prime: f64) -> Result<Self> {
        check_alpha(alpha)?;
        if !beta.is_finite() || beta.abs() > 1.0 {
            return Err(Error::InvalidParameter(format!("beta = {beta} is outside [-1, 1]")));
        }
        if alpha < 1.0 && beta.abs() == 1.0 {
            return Err(Error::InvalidParameter(
                "|beta| = 1 with alpha < 1 is not strictly stable in form C".into(),
            ));
        }
        if !lambda_prime.is_finite() || lambda_prime <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "lambda' = {lambda_prime} must be positive"
            )));
        }
        Ok(Self {
            alpha,
            beta,
            lambda_prime,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn lambda_prime(&self) -> f64 {
        self.lambda_prime
    }

    pub fn to_form_c(&self) -> Result<StableParamsC> {
        let half = (self.beta * (FRAC_PI_2 * self.alpha).tan()).atan();
        let theta = 2.0 * half / (PI * self.alpha);
        StableParamsC::new(self.alpha, theta, self.lambda_prime / half.cos())
    }
}

/// (ρ, ρ̄) of valid form (C) parameters.
pub fn negativity_params(p: &StableParamsC) -> (f64, f64) {
    (p.rho(), p.rho_bar())
}

/// Exact sampler by the Chambers–Mallows–Stuck transform of two independent
/// variates, evaluated in form (A).
#[derive(Debug, Clone, Copy)]
pub struct StableSampler {
    params: StableParamsC,
    alpha: f64,
    shift: f64,
    scale: f64,
    inv_alpha: f64,
    one_minus_alpha: f64,
    cube_root: bool,
}

impl StableSampler {
    pub fn new(params: StableParamsC) -> Self {
        let a = params.to_form_a();
        let alpha = a.alpha();
        let tan_half = (FRAC_PI_2 * alpha).tan();
        let bt = a.beta() * tan_half;
        let shift = bt.atan() / alpha;
        let s = (1.0 + bt * bt).powf(1.0 / (2.0 * alpha));
        Self {
            params,
            alpha,
            shift,
            scale: a.lambda_prime().powf(1.0 / alpha) * s,
            inv_alpha: 1.0 / alpha,
            one_minus_alpha: 1.0 - alpha,
            cube_root: alpha == 1.5,
        }
    }

    pub fn params(&self) -> &StableParamsC {
        &self.params
    }

    #[inline]
    pub fn sample(&self, rng: &mut SimRng) -> f64 {
        let v = PI * (open01(rng) - 0.5);
        let w: f64 = rng.sample(Exp1);
        let ab = self.alpha * (v + self.shift);
        let (sv, cv) = v.sin_cos();
        let (sa, ca) = ab.sin_cos();
        // cos(v - ab)
        let c = cv * ca + sv * sa;
        // sin(ab) / cos(v)^{1/α} · (c/w)^{(1-α)/α}
        //   = sin(ab) · (cos(v)^{-1} · (c/w)^{1-α})^{1/α}
        let inner = if self.cube_root {
            (w / (c * cv * cv)).cbrt()
        } else {
            ((c / w).powf(self.one_minus_alpha) / cv).powf(self.inv_alpha)
        };
        self.scale * sa * inner
    }

    pub fn sample_n(&self, n: usize, rng: &mut SimRng) -> Vec<f64> {
        (0..n).map(|_| self.sample(rng)).collect()
    }
}

impl StepSampler for StableSampler {
    #[inline]
    fn sample_step(&self, rng: &mut SimRng) -> f64 {
        self.sample(rng)
    }
}

pub fn sample_stable(p: &StableParamsC, n: usize, rng: &mut SimRng) -> Vec<f64> {
    StableSampler::new(*p).sample_n(n, rng)
}

fn check_one_sided_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 1.0 && alpha <= 2.0) {
        return Err(Error::Domain(format!("alpha = {alpha} is outside (1, 2]")));
    }
    Ok(())
}

/// κ = 1/(Γ(α)Γ(1/α)) for the law without positive jumps.
pub fn kappa_exact(alpha: f64) -> Result<f64> {
    check_one_sided_alpha(alpha)?;
    Ok(1.0 / (gamma(alpha) * gamma(1.0 / alpha)))
}

/// c₁ = 1/Γ(1 + αρ̄).
pub fn c1_const(alpha: f64, rho_bar: f64) -> Result<f64> {
    let ar = alpha * rho_bar;
    if !(ar > 0.0 && ar <= 1.0 + BOUND_SLACK) {
        return Err(Error::Domain(format!("alpha * rho_bar = {ar} is outside (0, 1]")));
    }
    Ok(1.0 / gamma(1.0 + ar))
}

/// Scale function W(x) = x^{α-1}/Γ(α) of the process without positive jumps.
pub fn scale_function_w(alpha: f64, x: f64) -> Result<f64> {
    check_one_sided_alpha(alpha)?;
    if x < 0.0 || x.is_nan() {
        return Err(Error::Domain(format!("scale function at negative x = {x}")));
    }
    Ok(x.powf(alpha - 1.0) / gamma(alpha))
}

/// E[X 1{X > 0}] = 1/Γ(1/α) for the law without positive jumps and λ = 1.
pub fn positive_part_mean_exact(alpha: f64) -> Result<f64> {
    check_one_sided_alpha(alpha)?;
    Ok(1.0 / gamma(1.0 / alpha))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::golden::GoldenTable;
    use crate::rng::RngStreams;
    use crate::stats::empirical_cf;
    use proptest::prelude::*;

    fn main_case() -> StableParamsC {
        StableParamsC::new(1.5, 1.0 / 3.0, 1.0).unwrap()
    }

    #[test]
    fn form_a_examples() {
        let a = StableParamsC::new(1.5, 0.0, 1.0).unwrap().to_form_a();
        assert_eq!(a.beta(), 0.0);
        assert_eq!(a.lambda_prime(), 1.0);
        let a = main_case().to_form_a();
        assert!((a.beta() + 1.0).abs() < 1e-12);
        assert!((a.lambda_prime() - 0.5f64.sqrt()).abs() < 1e-12);
        let g = GoldenTable::bundled();
        let a = StableParamsC::new(0.5, 0.9, 2.0).unwrap().to_form_a();
        assert!((a.beta() - g.value("form_a_beta", Some(0.5))).abs() < 1e-12);
        assert!((a.lambda_prime() - g.value("form_a_lambda_prime@lambda=2", Some(0.5))).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert_eq!(StableParamsC::new(1.0, 0.0, 1.0), Err(Error::AlphaOneOutOfScope));
        assert!(StableParamsC::new(1.5, 0.5, 1.0).is_err());
        assert!(StableParamsC::new(0.5, 1.0, 1.0).is_err());
        assert!(StableParamsC::new(1.5, 0.0, 0.0).is_err());
        assert!(StableParamsC::new(2.0, 0.0, 1.0).is_err());
        assert!(StableParamsA::new(0.5, 1.0, 1.0).is_err());
        assert!(StableParamsA::new(1.5, 1.1, 1.0).is_err());
    }

    #[test]
    fn negativity_examples() {
        let p = StableParamsC::new(1.5, 0.0, 1.0).unwrap();
        assert_eq!(negativity_params(&p), (0.5, 0.5));
        let (rho, rho_bar) = negativity_params(&main_case());
        assert!((rho - 2.0 / 3.0).abs() < 1e-15 && (rho_bar - 1.0 / 3.0).abs() < 1e-15);
        let p = StableParamsC::new(0.8, -0.5, 1.0).unwrap();
        assert_eq!(negativity_params(&p), (0.25, 0.75));
    }

    #[test]
    fn char_function_examples() {
        let p = StableParamsC::new(1.5, 0.0, 1.0).unwrap();
        assert_eq!(p.char_function(0.0), Complex64::new(1.0, 0.0));
        assert!((p.char_function(1.0) - Complex64::new((-1f64).exp(), 0.0)).norm() < 1e-15);
    }

    #[test]
    fn norming_examples() {
        assert_eq!(main_case().norming_sequence(1), 1.0);
        assert!((main_case().norming_sequence(8) - 4.0).abs() < 1e-12);
        let p = StableParamsC::new(0.5, 0.0, 1.0).unwrap();
        assert!((p.norming_sequence(4) - 16.0).abs() < 1e-12);
    }

    #[test]
    fn constants_match_golden_table() {
        let g = GoldenTable::bundled();
        for &a in &[1.2, 1.5, 1.8, 2.0] {
            let k = kappa_exact(a).unwrap();
            assert!((k - g.value("kappa_exact", Some(a))).abs() < 1e-13);
            let m = positive_part_mean_exact(a).unwrap();
            assert!((m - g.value("positive_part_mean_exact", Some(a))).abs() < 1e-13);
            // κ = E[X⁺]/Γ(α)
            assert!((k - m / gamma(a)).abs() < 1e-15);
            assert!((k * gamma(a) * gamma(1.0 / a) - 1.0).abs() < 1e-14);
        }
        assert!((kappa_exact(1.0 + 1e-12).unwrap() - 1.0).abs() < 1e-9);
        assert!(kappa_exact(0.9).is_err());
        assert!((c1_const(2.0, 0.5).unwrap() - 1.0).abs() < 1e-15);
        assert!((c1_const(1.5, 1.0 / 3.0).unwrap() - g.value("c1@arb=0.5", None)).abs() < 1e-13);
        assert!((c1_const(1.0, 0.3).unwrap() - g.value("c1@arb=0.3", None)).abs() < 1e-13);
        assert!((scale_function_w(1.5, 4.0).unwrap() - g.value("scale_function_w@x=4", Some(1.5))).abs() < 1e-13);
        assert_eq!(scale_function_w(1.5, 0.0).unwrap(), 0.0);
        assert!((scale_function_w(2.0, 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!(scale_function_w(1.5, -1.0).is_err());
    }

    #[test]
    fn sampler_matches_cf_small() {
        let streams = RngStreams::new(20_240_501);
        for p in [
            main_case(),
            StableParamsC::new(0.7, -0.4, 1.3).unwrap(),
            StableParamsC::new(1.8, 0.0, 0.5).unwrap(),
        ] {
            let mut rng = streams.replica(0);
            let xs = sample_stable(&p, 100_000, &mut rng);
            for &t in &[0.5, 1.0, 2.0] {
                let e = empirical_cf(&xs, t);
                assert!(e.z(p.char_function(t)) < 4.0, "{p:?} t={t}");
            }
        }
    }

    #[test]
    fn spectrally_negative_has_no_positive_tail() {
        let mut rng = RngStreams::new(3).replica(0);
        let xs = sample_stable(&main_case(), 100_000, &mut rng);
        assert!(xs.iter().cloned().fold(f64::MIN, f64::max) < 8.0);
    }

    fn grid_param() -> impl Strategy<Value = StableParamsC> {
        (0.05f64..1.95, -0.999f64..0.999, 0.1f64..10.0).prop_filter_map("valid", |(a, u, l)| {
            if (a - 1.0).abs() < 1e-3 {
                return None;
            }
            let bound = 1f64.min(2.0 / a - 1.0);
            StableParamsC::new(a, u * bound, l).ok()
        })
    }

    proptest! {
        #[test]
        fn round_trip(p in grid_param()) {
            let back = p.to_form_a().to_form_c().unwrap();
            prop_assert!((back.theta() - p.theta()).abs() <= 1e-12 * p.theta().abs().max(1e-3));
            prop_assert!((back.lambda() - p.lambda()).abs() <= 1e-12 * p.lambda());
        }

        #[test]
        fn cf_modulus_and_symmetry(p in grid_param(), t in -20.0f64..20.0) {
            let v = p.char_function(t);
            prop_assert!(v.norm() <= 1.0 + 1e-15);
            if t != 0.0 { prop_assert!(v.norm() < 1.0); }
            prop_assert!((p.char_function(-t) - v.conj()).norm() < 1e-15);
            let (rho, rho_bar) = negativity_params(&p);
            prop_assert!((rho + rho_bar - 1.0).abs() < 1e-15);
            prop_assert!(p.alpha() * rho_bar <= 1.0 + 1e-12 && p.alpha() * rho <= 1.0 + 1e-12);
        }
    }
}
