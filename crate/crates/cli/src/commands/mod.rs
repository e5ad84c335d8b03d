//! One module per command. Each fills a [`ResultBundle`]; which numbers pass
//! is decided only through the configured tolerances.

pub mod brw;
pub mod kappa;
pub mod mto;
pub mod renewal;
pub mod seneta_heyde;
pub mod stable_check;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use stable_brw::rng::{RngStreams, SimRng};
use stable_brw::{Error, Result};

use crate::bundle::ResultBundle;
use crate::config::ExperimentConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    StableCheck,
    Renewal,
    Kappa,
    Brw,
    SenetaHeyde,
    Mto,
}

impl Command {
    pub const ALL: [Command; 6] = [
        Self::StableCheck,
        Self::Renewal,
        Self::Kappa,
        Self::Brw,
        Self::SenetaHeyde,
        Self::Mto,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Self::StableCheck => "stable-check",
            Self::Renewal => "renewal",
            Self::Kappa => "kappa",
            Self::Brw => "brw",
            Self::SenetaHeyde => "seneta-heyde",
            Self::Mto => "mto",
        }
    }

    /// Applies `--replicas` to the command's main ensemble.
    pub fn set_replicas(&self, cfg: &mut ExperimentConfig, n: usize) {
        match self {
            Self::StableCheck => cfg.stable_check.samples = n,
            Self::Renewal => cfg.renewal.replicas = n,
            Self::Kappa => cfg.kappa.reps = n,
            Self::Brw => {
                cfg.brw.reps = n;
                cfg.brw.martingale_reps = n;
            }
            Self::SenetaHeyde => cfg.seneta_heyde.reps = n,
            Self::Mto => cfg.mto.reps = n,
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown command '{s}'")))
    }
}

pub struct Context {
    pub config: ExperimentConfig,
    pub seed: u64,
    pub streams: RngStreams,
}

/// Runs one command to completion.
pub fn execute(cmd: Command, config: ExperimentConfig, seed: u64) -> Result<ResultBundle> {
    config.validate()?;
    let start = Instant::now();
    let echo = serde_json::to_value(&config).expect("config serializes");
    let mut bundle = ResultBundle::new(cmd.name(), seed, echo);
    let ctx = Context {
        config,
        seed,
        streams: RngStreams::new(seed),
    };
    match cmd {
        Command::StableCheck => stable_check::run(&ctx, &mut bundle)?,
        Command::Renewal => renewal::run(&ctx, &mut bundle)?,
        Command::Kappa => kappa::run(&ctx, &mut bundle)?,
        Command::Brw => brw::run(&ctx, &mut bundle)?,
        Command::SenetaHeyde => seneta_heyde::run(&ctx, &mut bundle)?,
        Command::Mto => mto::run(&ctx, &mut bundle)?,
    }
    bundle.finish(start.elapsed().as_secs_f64());
    Ok(bundle)
}

/// Number of independent chunks for i.i.d. sampling; fixed so that the
/// output does not depend on the thread count.
const CHUNKS: usize = 64;

/// n draws of `f`, produced in fixed chunks on separate streams.
pub fn sample_chunks<F>(streams: &RngStreams, n: usize, f: F) -> Vec<f64>
where
    F: Fn(&mut SimRng) -> f64 + Sync + Send,
{
    let chunks = streams.map_replicas(CHUNKS, |i, rng| {
        let len = n / CHUNKS + usize::from(i < n % CHUNKS);
        (0..len).map(|_| f(rng)).collect::<Vec<_>>()
    });
    chunks.concat()
}

/// Median of finite values, NaN when there are none.
pub fn finite_median(xs: impl IntoIterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.into_iter().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        f64::NAN
    } else {
        stable_brw::stats::median(&v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn command_names_round_trip() {
        for c in Command::ALL {
            assert_eq!(c.name().parse::<Command>().unwrap(), c);
        }
        assert!("plot".parse::<Command>().is_err());
    }

    #[test]
    fn chunked_sampling_has_the_requested_length_and_order() {
        let s = RngStreams::new(3);
        let a = sample_chunks(&s, 1001, |r| stable_brw::rng::open01(r));
        assert_eq!(a.len(), 1001);
        assert_eq!(a, sample_chunks(&s, 1001, |r| stable_brw::rng::open01(r)));
        assert!(finite_median([f64::NAN, 1.0, 3.0, 2.0]) == 2.0);
        assert!(finite_median([f64::NAN]).is_nan());
    }
}
