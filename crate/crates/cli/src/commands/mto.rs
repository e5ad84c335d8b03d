//! Both sides of the many-to-one formula, and the spine marginal.

use std::fmt::Write as _;

use stable_brw::spinal::{many_to_one_check, many_to_one_csv, spine_marginal_cf_check, HFunctional};
use stable_brw::{Error, Result};

use super::brw::calibrated;
use super::Context;
use crate::bundle::{Check, ResultBundle};

pub fn run(ctx: &Context, bundle: &mut ResultBundle) -> Result<()> {
    let m = &ctx.config.mto;
    let z_max = ctx.config.tolerances.z_max;
    let o = calibrated(ctx)?;
    let hs: Vec<HFunctional> = m.functionals.iter().map(|s| s.parse()).collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for (i, &n) in m.n_list.iter().enumerate() {
        for (j, &h) in hs.iter().enumerate() {
            let streams = ctx.streams.family(((i as u64) << 8) | j as u64);
            let r = many_to_one_check(&o, h, n, m.x, m.reps, m.max_particles, &streams)?;
            bundle.check(Check::exact(
                format!("mto.{h}@n={n}"),
                r.z,
                Some(0.0),
                Some(r.passes(z_max)),
                format!(
                    "lhs {:.6} ± {:.2e}, rhs {:.6} ± {:.2e}",
                    r.lhs.value, r.lhs.se, r.rhs.value, r.rhs.se
                ),
            ));
            rows.push(r);
        }
    }
    bundle.table("mto.csv", many_to_one_csv(&rows));

    match spine_marginal_cf_check(&o, m.cf_n, m.cf_reps, &m.cf_t, &ctx.streams.family(1 << 20)) {
        Ok(checks) => {
            let mut csv = String::from("t,exact_re,exact_im,estimate_re,estimate_im,z\n");
            for c in &checks {
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{},{}",
                    c.t, c.exact.re, c.exact.im, c.estimate.value.re, c.estimate.value.im, c.z
                );
                bundle.check(Check::exact(
                    format!("spine_cf.z@t={}", c.t),
                    c.z,
                    Some(0.0),
                    Some(c.z.abs() <= z_max),
                    format!("CF of the spine position after {} size-biased generations", m.cf_n),
                ));
            }
            bundle.table("spine_cf.csv", csv);
        }
        Err(Error::Unsupported(msg)) => bundle.note(format!("spine marginal check skipped: {msg}")),
        Err(e) => return Err(e),
    }
    Ok(())
}
