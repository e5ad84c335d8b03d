//! The ratio ρ_n = a_n^{αρ̄} W_n / Z_n on surviving runs.

use std::fmt::Write as _;

use stable_brw::brw::{MartingaleSeries, SimConfig};
use stable_brw::stable::kappa_exact;
use stable_brw::stats::{iqr, median, RunningMoments};
use stable_brw::{Error, Result};

use super::brw::{calibrated, calibration_echo, ensemble};
use super::Context;
use crate::bundle::{Check, ResultBundle};

pub fn run(ctx: &Context, bundle: &mut ResultBundle) -> Result<()> {
    let sh = &ctx.config.seneta_heyde;
    let tol = &ctx.config.tolerances;
    let o = calibrated(ctx)?;
    if o.family.id.as_str() != "tilted-stable" {
        bundle.note(format!("family {} is not the tilted-stable reference family", o.family.id.as_str()));
    }
    let scaling = o
        .scaling()
        .ok_or_else(|| Error::Unsupported("the a_n rule of this family is unknown".into()))?;
    let kappa = kappa_exact(scaling.alpha)?;
    let n_max = *sh.n_list.iter().max().expect("validated non-empty") as usize;
    let cfg = SimConfig {
        upper_cutoff_b: Some(sh.cutoff_b),
        max_particles: sh.max_particles,
        ..SimConfig::default()
    };
    let runs = ensemble(&o, &cfg, n_max, None, ctx.seed, &ctx.streams.family(1), sh.reps)?;

    let mut csv = String::from("n,survivors,rho_median,rho_iqr,Z_median,W_mean,W_se,W_plus_removed_mean,W_plus_removed_se,max_trunc_rel\n");
    let mut rho_medians = Vec::new();
    let mut z_medians = Vec::new();
    let mut worst_trunc = 0.0f64;
    let mut enough = true;
    for &n in &sh.n_list {
        let n = n as usize;
        let alive: Vec<&MartingaleSeries> = runs.iter().filter(|s| s.records[n].count > 0).collect();
        let f = scaling.a_n(n as u64).powf(scaling.alpha_rho_bar);
        let rho: Vec<f64> = alive
            .iter()
            .map(|s| f * s.records[n].w / s.records[n].z)
            .filter(|r| r.is_finite())
            .collect();
        let z: Vec<f64> = alive.iter().map(|s| s.records[n].z).collect();
        let trunc = alive
            .iter()
            .map(|s| s.records[n].trunc_bound / s.records[n].w)
            .fold(0.0, f64::max);
        worst_trunc = worst_trunc.max(trunc);
        let w: RunningMoments = runs.iter().map(|s| s.records[n].w).collect();
        let wk: RunningMoments = runs.iter().map(|s| s.records[n].w + s.records[n].killed_weight).collect();
        let (rm, ri) = if rho.is_empty() { (f64::NAN, f64::NAN) } else { (median(&rho), iqr(&rho)) };
        let zm = if z.is_empty() { f64::NAN } else { median(&z) };
        let _ = writeln!(
            csv,
            "{n},{},{rm},{ri},{zm},{},{},{},{},{trunc}",
            alive.len(),
            w.mean(),
            w.se(),
            wk.mean(),
            wk.se()
        );
        if rho.len() < sh.min_survivors {
            enough = false;
            bundle.note(format!(
                "too few survivors at n = {n}: {} (need {})",
                rho.len(),
                sh.min_survivors
            ));
        }
        bundle.check(Check::exact(
            format!("rho.median@n={n}"),
            rm,
            Some(kappa),
            None,
            format!("IQR {ri:.4}, {} survivors", rho.len()),
        ));
        let we = wk.estimate();
        bundle.check(Check::estimate(
            format!("W.mean@n={n}"),
            we,
            Some(1.0),
            Some(we.within_se(1.0, tol.z_max)),
            "ensemble mean of W_n plus the weight removed at the cutoff",
        ));
        rho_medians.push(rm);
        z_medians.push(zm);
    }
    bundle.table("rho.csv", csv);
    let mut series = runs[0].clone();
    series.meta = calibration_echo(&o);
    bundle.table("series_replica0.csv", series.to_csv());

    let gaps: Vec<f64> = rho_medians.iter().map(|m| (m - kappa).abs()).collect();
    let monotone = gaps.len() >= 2 && gaps.windows(2).all(|w| w[1] < w[0]);
    bundle.check(Check::exact(
        "rho.drift",
        f64::from(u8::from(monotone)),
        Some(1.0),
        Some(enough && monotone),
        format!(
            "|median - kappa| across n in {:?}: {:?}",
            sh.n_list,
            gaps.iter().map(|g| format!("{g:.4}")).collect::<Vec<_>>()
        ),
    ));
    let last = *rho_medians.last().expect("non-empty");
    bundle.check(Check::exact(
        format!("rho.factor@n={n_max}"),
        last / kappa,
        Some(1.0),
        Some(enough && last > 0.0 && last / kappa <= tol.rho_factor && kappa / last <= tol.rho_factor),
        format!("median rho over kappa = {kappa:.6}"),
    ));
    bundle.check(Check::exact(
        "trunc.max_relative",
        worst_trunc,
        Some(0.0),
        Some(worst_trunc < tol.trunc_rel),
        format!("max over survivors and n of (removed count) e^(-B) / W_n, B = {}", sh.cutoff_b),
    ));
    let k = z_medians.len();
    let stab = if k >= 2 { z_medians[k - 1] / z_medians[k - 2] - 1.0 } else { f64::NAN };
    bundle.check(Check::exact(
        "Z.median_stability",
        stab,
        Some(0.0),
        Some(enough && stab.abs() <= tol.z_stabilize),
        "relative change of the median Z_n between the two largest n",
    ));
    Ok(())
}
