//! Martingale means, the Z_n Cauchy diagnostic, the barrier comparison and
//! the scaling of E[W'_n].

use std::fmt::Write as _;

use stable_brw::brw::{
    additive_martingale, derivative_martingale, evolve, mean_w_prime_scaling, run_series, truncated_derivative_martingale,
    truncated_derivative_table_error, Generation, MartingaleSeries, SimConfig,
};
use stable_brw::offspring::{calibrate_boundary, CalibratedOffspring, CALIBRATION_TOL};
use stable_brw::rng::RngStreams;
use stable_brw::stats::RunningMoments;
use stable_brw::walk::{estimate_renewal_function, uniform_grid, LadderDirection, RenewalTable};
use stable_brw::{Error, Result};

use super::{finite_median, Context};
use crate::bundle::{Check, ResultBundle};

/// Replaces a population overflow by advice on how to avoid it.
pub fn advise_cutoff(e: Error) -> Error {
    match e {
        Error::Overflow { generation, count, limit } => Error::Domain(format!(
            "population reached {count} particles (limit {limit}) at generation {generation}; \
             set an upper cutoff, lower the horizon or raise max_particles"
        )),
        e => e,
    }
}

pub fn calibrated(ctx: &Context) -> Result<CalibratedOffspring> {
    calibrate_boundary(&ctx.config.family()?, CALIBRATION_TOL)
}

pub fn renewal_table(ctx: &Context, o: &CalibratedOffspring, streams: &RngStreams) -> Result<RenewalTable> {
    let b = &ctx.config.brw;
    estimate_renewal_function(
        &o.spine_step_sampler(),
        LadderDirection::Descending,
        &uniform_grid(b.table_x_max, b.table_h),
        b.table_replicas,
        b.table_epoch_budget,
        o.scaling().as_ref(),
        streams,
    )
}

/// `key = value` lines describing the calibrated family, for CSV headers.
pub fn calibration_echo(o: &CalibratedOffspring) -> Vec<(String, String)> {
    let mut out = vec![
        ("family".to_string(), o.family.id.as_str().to_string()),
        ("mean_count".into(), o.mean_count().to_string()),
        ("residual_mass".into(), o.residual_mass.to_string()),
        ("residual_drift".into(), o.residual_drift.to_string()),
    ];
    out.extend(o.params.iter().map(|(k, v)| (format!("param.{k}"), v.to_string())));
    out
}

/// Runs `reps` truncated trajectories on `streams`.
pub fn ensemble(
    o: &CalibratedOffspring,
    cfg: &SimConfig,
    n_max: usize,
    table: Option<&RenewalTable>,
    seed: u64,
    streams: &RngStreams,
    reps: usize,
) -> Result<Vec<MartingaleSeries>> {
    let arb = o.spine.alpha_rho_bar();
    let runs = streams.map_replicas(reps, |_, rng| run_series(o, cfg, n_max, arb, table, seed, rng));
    runs.into_iter().map(|r| r.map_err(advise_cutoff)).collect()
}

pub fn run(ctx: &Context, bundle: &mut ResultBundle) -> Result<()> {
    let b = &ctx.config.brw;
    let tol = &ctx.config.tolerances;
    let o = calibrated(ctx)?;
    let table = renewal_table(ctx, &o, &ctx.streams.family(1))?;
    for w in &table.warnings {
        bundle.note(format!("renewal table: {w}"));
    }
    bundle.table("renewal_table.csv", table.to_csv());

    martingale_means(ctx, &o, &table, bundle)?;

    // Z_n and its increments on surviving truncated runs
    let cut = SimConfig {
        upper_cutoff_b: Some(b.cutoff_b),
        k0: b.k0,
        max_particles: b.max_particles,
        ..SimConfig::default()
    };
    let runs = ensemble(&o, &cut, b.n_max, Some(&table), ctx.seed, &ctx.streams.family(3), b.reps)?;
    let survivors: Vec<&MartingaleSeries> = runs.iter().filter(|s| s.survived()).collect();
    let frac = survivors.len() as f64 / runs.len() as f64;
    bundle.check(Check::estimate(
        "survival_fraction",
        stable_brw::stats::Estimate::new(frac, (frac * (1.0 - frac) / runs.len() as f64).sqrt()),
        None,
        None,
        format!("runs alive at n = {} with cutoff B = {}", b.n_max, b.cutoff_b),
    ));
    let mut csv = String::from("n,survivors,median_increment,median_Z,median_trunc_rel\n");
    let mut medians = Vec::new();
    for &n in &b.cauchy_n {
        let inc = finite_median(survivors.iter().map(|s| (s.records[n].z - s.records[n - b.cauchy_lag].z).abs()));
        let z = finite_median(survivors.iter().map(|s| s.records[n].z));
        let rel = finite_median(survivors.iter().map(|s| s.records[n].trunc_bound / s.records[n].w));
        let _ = writeln!(csv, "{n},{},{inc},{z},{rel}", survivors.len());
        medians.push(inc);
    }
    bundle.table("cauchy.csv", csv);
    let decreasing = medians.len() >= 2 && medians.windows(2).all(|w| w[1] < w[0]);
    bundle.check(Check::exact(
        "cauchy.decreasing",
        f64::from(u8::from(decreasing)),
        Some(1.0),
        Some(decreasing),
        format!(
            "median |Z_n - Z_(n-{})| at n in {:?}: {:?}",
            b.cauchy_lag,
            b.cauchy_n,
            medians.iter().map(|m| format!("{m:.4e}")).collect::<Vec<_>>()
        ),
    ));
    if let Some(s) = runs.first() {
        let mut s = s.clone();
        s.meta = calibration_echo(&o);
        bundle.table("series_replica0.csv", s.to_csv());
    }

    // barrier comparison
    let bar = SimConfig {
        barrier_a: Some(b.barrier_a),
        ..cut
    };
    let runs = ensemble(&o, &bar, b.n_max, Some(&table), ctx.seed, &ctx.streams.family(4), b.reps)?;
    let c1 = o
        .scaling()
        .ok_or_else(|| Error::Unsupported("the a_n rule of this family is unknown".into()))?
        .c1();
    let mut csv = String::from("n,survivors,median_ratio,iqr_ratio\n");
    let mut last = f64::NAN;
    for n in 1..=b.n_max {
        let ratios: Vec<f64> = runs
            .iter()
            .filter(|s| s.records[n].count > 0)
            .filter_map(|s| s.records[n].dprime_barrier.map(|d| c1 * s.records[n].z / d))
            .filter(|r| r.is_finite())
            .collect();
        let (m, iqr) = if ratios.is_empty() {
            (f64::NAN, f64::NAN)
        } else {
            (stable_brw::stats::median(&ratios), stable_brw::stats::iqr(&ratios))
        };
        let _ = writeln!(csv, "{n},{},{m},{iqr}", ratios.len());
        last = m;
    }
    bundle.table("barrier.csv", csv);
    bundle.check(Check::exact(
        format!("barrier.ratio@n={}", b.n_max),
        last,
        Some(1.0),
        Some((last - 1.0).abs() <= tol.barrier_ratio),
        format!("median of c1 Z^(a)/D'^(a) with a = {}", b.barrier_a),
    ));

    // a_n^{αρ̄} E[W'_n] against K R(0)
    let pts = mean_w_prime_scaling(&o, 0.0, &b.w_prime_n, b.w_prime_reps, &table, b.w_prime_cutoff, &ctx.streams.family(5))?;
    let mut csv = String::from("n,scaled,se,target,ratio,ratio_se\n");
    for p in &pts {
        let _ = writeln!(csv, "{},{},{},{},{},{}", p.n, p.scaled.value, p.scaled.se, p.target, p.ratio.value, p.ratio.se);
        bundle.check(Check::estimate(
            format!("w_prime.ratio@n={}", p.n),
            p.ratio,
            Some(1.0),
            Some((p.ratio.value - 1.0).abs() <= tol.w_prime_k),
            "a_n^(alpha rho_bar) E[W'_n] / (K R(0))",
        ));
    }
    bundle.table("w_prime.csv", csv);
    let (lo, hi) = pts
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, c), p| (a.min(p.scaled.value), c.max(p.scaled.value)));
    bundle.check(Check::exact(
        "w_prime.flatness",
        hi / lo - 1.0,
        Some(0.0),
        Some(hi / lo - 1.0 <= tol.w_prime_flat),
        format!("max/min - 1 over n in {:?}", b.w_prime_n),
    ));
    let c2 = pts.iter().map(|p| p.ratio.value).fold(0.0, f64::max);
    bundle.check(Check::exact(
        "w_prime.c2",
        c2,
        None,
        None,
        "smallest c2 with a_n^(alpha rho_bar) E[W'_n] <= c2 K R(0) over the sampled n",
    ));
    Ok(())
}

/// Untruncated ensemble means of W_n, D'_n and (as a diagnostic) D_n.
fn martingale_means(ctx: &Context, o: &CalibratedOffspring, table: &RenewalTable, bundle: &mut ResultBundle) -> Result<()> {
    let b = &ctx.config.brw;
    let z_max = ctx.config.tolerances.z_max;
    let cfg = SimConfig {
        max_particles: b.max_particles,
        ..SimConfig::default()
    };
    let runs = ctx.streams.family(2).map_replicas(b.martingale_reps, |_, rng| -> Result<Vec<[f64; 4]>> {
        let mut g = Generation::initial(&cfg);
        let mut out = Vec::with_capacity(b.martingale_n + 1);
        let row = |g: &Generation| {
            [
                additive_martingale(g),
                truncated_derivative_martingale(g, table),
                truncated_derivative_table_error(g, table),
                derivative_martingale(g),
            ]
        };
        out.push(row(&g));
        for _ in 0..b.martingale_n {
            g = evolve(&g, o, &cfg, rng).map_err(advise_cutoff)?;
            out.push(row(&g));
        }
        Ok(out)
    });
    let runs: Vec<Vec<[f64; 4]>> = runs.into_iter().collect::<Result<_>>()?;
    let reps = runs.len() as f64;
    let d0 = runs[0][0][1];
    let mut csv = String::from("n,W,W_se,Dprime_norm,Dprime_se,Dprime_bias,D,D_se\n");
    for n in 1..=b.martingale_n {
        let w: RunningMoments = runs.iter().map(|r| r[n][0]).collect();
        let dp: RunningMoments = runs.iter().map(|r| r[n][1] / d0).collect();
        let bias = runs.iter().map(|r| r[n][2]).sum::<f64>() / reps / d0;
        let d: RunningMoments = runs.iter().map(|r| r[n][3]).collect();
        let (w, dp, d) = (w.estimate(), dp.estimate(), d.estimate());
        let _ = writeln!(csv, "{n},{},{},{},{},{bias},{},{}", w.value, w.se, dp.value, dp.se, d.value, d.se);
        bundle.check(Check::estimate(
            format!("martingale.W@n={n}"),
            w,
            Some(1.0),
            Some(w.within_se(1.0, z_max)),
            format!("z = {:.2}", w.z_score(1.0)),
        ));
        bundle.check(Check::estimate(
            format!("martingale.Dprime@n={n}"),
            dp,
            Some(1.0),
            Some((dp.value - 1.0).abs() <= z_max * dp.se + bias),
            format!("z = {:.2}, renewal-table bias allowance {bias:.3e}", dp.z_score(1.0)),
        ));
        bundle.check(Check::estimate(
            format!("martingale.D@n={n}"),
            d,
            Some(0.0),
            None,
            "mean of the signed derivative martingale; E[D_0] = 0",
        ));
    }
    bundle.table("martingale.csv", csv);
    Ok(())
}
