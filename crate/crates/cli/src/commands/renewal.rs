//! Ladder heights, the renewal function and its harmonicity.

use std::fmt::Write as _;

use stable_brw::golden::GoldenTable;
use stable_brw::stable::StableSampler;
use stable_brw::walk::{
    estimate_renewal_function, harmonicity_residual, ladder_heights, uniform_grid, LadderDirection, SpineScaling,
};
use stable_brw::Result;

use super::Context;
use crate::bundle::{Check, ResultBundle};

pub fn run(ctx: &Context, bundle: &mut ResultBundle) -> Result<()> {
    let cfg = &ctx.config;
    let rc = &cfg.renewal;
    let tol = &cfg.tolerances;
    let p = cfg.stable_params()?;
    let step = StableSampler::new(p);
    let scaling = SpineScaling::from_stable(&p);
    let arb = p.alpha_rho_bar();

    let heights = ladder_heights(&step, LadderDirection::Descending, rc.heyde_heights, rc.epoch_budget, &ctx.streams.family(1));
    let h = heights.heyde_functional(rc.heyde_s, arb);
    let oracle = GoldenTable::bundled()
        .get(&format!("heyde_functional@s={}", rc.heyde_s), Some(p.alpha()))
        .filter(|e| e.theta.is_some_and(|t| (t - p.theta()).abs() < 1e-12))
        .map(|e| e.value);
    bundle.check(Check::estimate(
        "heyde.functional",
        h,
        oracle,
        Some(h.value >= tol.heyde_lo && h.value <= tol.heyde_hi),
        format!(
            "s^(-alpha rho_bar)(1 - E[exp(-sH)]) at s = {}; window [{}, {}]; {} of {} epochs censored at {} steps",
            rc.heyde_s,
            tol.heyde_lo,
            tol.heyde_hi,
            heights.censored,
            heights.total(),
            rc.epoch_budget
        ),
    ));
    if let Some(o) = oracle {
        bundle.check(Check::exact(
            "heyde.z_vs_quadrature",
            h.z_score(o),
            Some(0.0),
            None,
            "distance to the quadrature value in standard errors",
        ));
    }
    let mut csv = String::from("s,estimate,se,censored_fraction,oracle\n");
    let _ = writeln!(
        csv,
        "{},{},{},{},{}",
        rc.heyde_s,
        h.value,
        h.se,
        heights.censored_fraction(),
        oracle.unwrap_or(f64::NAN)
    );
    bundle.table("heyde.csv", csv);

    let grid = uniform_grid(rc.x_max, rc.h);
    let table = estimate_renewal_function(
        &step,
        LadderDirection::Descending,
        &grid,
        rc.replicas,
        rc.epoch_budget,
        Some(&scaling),
        &ctx.streams.family(2),
    )?;
    for w in &table.warnings {
        bundle.note(w.clone());
    }
    let censored = table.censored_epochs as f64 / table.replicas as f64;
    if censored > tol.censored_max {
        bundle.note(format!(
            "partial: {:.3}% of renewal walks were censored (threshold {:.3}%)",
            100.0 * censored,
            100.0 * tol.censored_max
        ));
    }
    bundle.table("renewal.csv", table.to_csv());

    let lo = tol.renewal_decade * rc.x_max;
    let ratios = table.asymptotic_ratios(scaling.c1(), arb, lo, rc.x_max);
    let mut csv = String::from("x,ratio,se\n");
    for (x, r) in &ratios {
        let _ = writeln!(csv, "{x},{},{}", r.value, r.se);
    }
    bundle.table("renewal_ratios.csv", csv);
    let (rmin, rmax) = ratios
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), (_, r)| (a.min(r.value), b.max(r.value)));
    let in_window = |r: f64| r >= tol.renewal_ratio_lo && r <= tol.renewal_ratio_hi;
    bundle.check(Check::exact(
        "renewal.ratio_min",
        rmin,
        Some(1.0),
        Some(!ratios.is_empty() && in_window(rmin)),
        format!("min of R(x)/(c1 x^alpha rho_bar) over [{lo}, {}]", rc.x_max),
    ));
    bundle.check(Check::exact(
        "renewal.ratio_max",
        rmax,
        Some(1.0),
        Some(!ratios.is_empty() && in_window(rmax)),
        format!("max of R(x)/(c1 x^alpha rho_bar) over [{lo}, {}]", rc.x_max),
    ));

    let mut csv = String::from("x,r_hat,one_step_mean,residual,se,z\n");
    for (i, &x) in rc.harmonic_x.iter().enumerate() {
        let hc = harmonicity_residual(&table, &step, x, rc.harmonic_draws, &ctx.streams.family(10 + i as u64))?;
        let z = hc.z();
        let _ = writeln!(csv, "{x},{},{},{},{},{z}", hc.r_hat, hc.one_step_mean, hc.residual, hc.se);
        bundle.check(Check::exact(
            format!("harmonic.z@x={x}"),
            z,
            Some(0.0),
            Some(z.abs() <= tol.z_max),
            format!("R(x) - E[R(x + step)] = {:.4e} ± {:.4e}", hc.residual, hc.se),
        ));
    }
    bundle.table("harmonicity.csv", csv);
    Ok(())
}
