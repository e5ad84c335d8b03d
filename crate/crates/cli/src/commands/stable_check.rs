//! Parametrization round trips, the sampler's characteristic function and
//! the positive-part mean.

use std::fmt::Write as _;

use stable_brw::stable::{positive_part_mean_exact, StableParamsA, StableParamsC, StableSampler};
use stable_brw::stats::{empirical_cf, RunningMoments};
use stable_brw::Result;

use super::{sample_chunks, Context};
use crate::bundle::{Check, ResultBundle};

fn round_trip_grid(points: usize) -> Vec<(f64, f64)> {
    let per_alpha = 5;
    let n_alpha = points.div_ceil(per_alpha);
    let mut out = Vec::with_capacity(n_alpha * per_alpha);
    for i in 0..n_alpha {
        let mut a = 0.15 + 1.8 * (i as f64 + 0.5) / n_alpha as f64;
        if (a - 1.0).abs() < 0.02 {
            a += 0.03;
        }
        let bound = 1f64.min(2.0 / a - 1.0);
        for f in [-0.95, -0.4, 0.0, 0.4, 0.95] {
            out.push((a, f * bound));
        }
    }
    out.truncate(points);
    out
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

pub fn run(ctx: &Context, bundle: &mut ResultBundle) -> Result<()> {
    let cfg = &ctx.config;
    let tol = &cfg.tolerances;
    let sc = &cfg.stable_check;

    let mut csv = String::from("alpha,theta,lambda,beta,lambda_prime,max_err\n");
    let mut worst: f64 = 0.0;
    for (i, (a, th)) in round_trip_grid(sc.grid_points).into_iter().enumerate() {
        let lambda = 0.5 + 0.25 * (i % 5) as f64;
        let c = StableParamsC::new(a, th, lambda)?;
        let fa = c.to_form_a();
        let back = fa.to_form_c()?;
        let again = StableParamsA::new(a, fa.beta(), fa.lambda_prime())?.to_form_c()?.to_form_a();
        let err = [
            rel(back.alpha(), a),
            rel(back.theta(), th),
            rel(back.lambda(), lambda),
            rel(again.beta(), fa.beta()),
            rel(again.lambda_prime(), fa.lambda_prime()),
        ]
        .into_iter()
        .fold(0.0, f64::max);
        worst = worst.max(err);
        let _ = writeln!(csv, "{a},{th},{lambda},{},{},{err}", fa.beta(), fa.lambda_prime());
    }
    bundle.table("roundtrip.csv", csv);
    bundle.check(Check::exact(
        "roundtrip.max_rel_error",
        worst,
        Some(0.0),
        Some(worst <= tol.roundtrip_rel),
        format!("form C -> A -> C and A -> C -> A over {} points", sc.grid_points),
    ));
    let main = StableParamsC::new(1.5, 1.0 / 3.0, 1.0)?.to_form_a();
    let half_root_two = std::f64::consts::FRAC_1_SQRT_2;
    bundle.check(Check::exact(
        "form_a.beta",
        main.beta(),
        Some(-1.0),
        Some((main.beta() + 1.0).abs() <= tol.form_a_abs),
        "alpha = 1.5, theta = 1/3",
    ));
    bundle.check(Check::exact(
        "form_a.lambda_prime",
        main.lambda_prime(),
        Some(half_root_two),
        Some((main.lambda_prime() - half_root_two).abs() <= tol.form_a_abs),
        "alpha = 1.5, theta = 1/3, lambda = 1",
    ));

    let p = ctx.config.stable_params()?;
    let sampler = StableSampler::new(p);
    let xs = sample_chunks(&ctx.streams.family(1), sc.samples, |rng| sampler.sample(rng));
    let mut csv = String::from("t,re,im,exact_re,exact_im,se_re,se_im,z\n");
    for &t in &sc.cf_t {
        let e = empirical_cf(&xs, t);
        let exact = p.char_function(t);
        let z = e.z(exact);
        let _ = writeln!(
            csv,
            "{t},{},{},{},{},{},{},{z}",
            e.value.re, e.value.im, exact.re, exact.im, e.se_re, e.se_im
        );
        bundle.check(Check::exact(
            format!("cf.z@t={t}"),
            z,
            Some(0.0),
            Some(z <= tol.z_max),
            format!("|empirical - exact| / se over {} samples", xs.len()),
        ));
    }
    bundle.table("stable_cf.csv", csv);

    let pos: RunningMoments = xs.iter().map(|&x| x.max(0.0)).collect();
    let neg: RunningMoments = xs.iter().map(|&x| (-x).max(0.0)).collect();
    let mut csv = String::from("quantity,mean,se\n");
    let _ = writeln!(csv, "positive_part,{},{}", pos.mean(), pos.se());
    let _ = writeln!(csv, "negative_part,{},{}", neg.mean(), neg.se());
    bundle.table("positive_part.csv", csv);
    let one_sided = p.alpha() > 1.0 && (p.theta() - (2.0 / p.alpha() - 1.0)).abs() < 1e-12;
    if one_sided {
        let exact = positive_part_mean_exact(p.alpha())? * p.lambda().powf(1.0 / p.alpha());
        let e = pos.estimate();
        bundle.check(Check::estimate(
            "positive_part_mean",
            e,
            Some(exact),
            Some(e.within_se(exact, tol.z_max)),
            "E[X+] against lambda^(1/alpha)/Gamma(1/alpha)",
        ));
    } else if p.theta() == 0.0 {
        let d: RunningMoments = xs.iter().map(|&x| x.max(0.0) - (-x).max(0.0)).collect();
        let e = d.estimate();
        bundle.check(Check::estimate(
            "symmetry.positive_minus_negative",
            e,
            Some(0.0),
            Some(e.within_se(0.0, tol.z_max)),
            "E[X+] - E[X-] for the symmetric law",
        ));
    } else {
        bundle.note("positive-part mean has no closed form for these parameters; reported only");
    }
    Ok(())
}
