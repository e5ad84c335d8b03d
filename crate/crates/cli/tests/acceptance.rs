//! Acceptance report: one PASS/FAIL line per criterion, at full scale with
//! the default configuration.
//!
//! The process exits 0 after printing the report so that a failing
//! criterion does not hide the others from `cargo test`; set
//! `ACCEPTANCE_STRICT=1` to exit 1 when any criterion fails.

use std::path::{Path, PathBuf};
use std::process::Command as Process;
use std::time::Instant;

use stable_brw_cli::bundle::{Check, ResultBundle};
use stable_brw_cli::commands::Command;
use stable_brw_cli::config::ExperimentConfig;
use stable_brw_cli::run_command;

const SEED: u64 = 20260;

struct Report {
    lines: Vec<(usize, bool, String)>,
}

impl Report {
    fn add(&mut self, id: usize, pass: bool, detail: String) {
        println!("criterion {id:>2}: {} {detail}", if pass { "PASS" } else { "FAIL" });
        self.lines.push((id, pass, detail));
    }
}

/// Judged checks selected by `keep`, all passing, with a short summary.
fn judge(b: &ResultBundle, keep: impl Fn(&Check) -> bool) -> (bool, String) {
    let sel: Vec<&Check> = b.checks.iter().filter(|c| c.pass.is_some() && keep(c)).collect();
    let failed: Vec<String> = sel
        .iter()
        .filter(|c| c.pass == Some(false))
        .map(|c| format!("{}={:.4}", c.name, c.value))
        .collect();
    let pass = !sel.is_empty() && failed.is_empty();
    let detail = if failed.is_empty() {
        format!("({} checks)", sel.len())
    } else {
        format!("({} of {} checks failed: {})", failed.len(), sel.len(), failed.join(", "))
    };
    (pass, detail)
}

fn value(b: &ResultBundle, name: &str) -> String {
    let num = |x: f64| if x != 0.0 && x.abs() < 1e-3 { format!("{x:.3e}") } else { format!("{x:.5}") };
    b.get(name).map_or("missing".into(), |c| match c.se {
        Some(se) => format!("{name} = {} ± {}", num(c.value), num(se)),
        None => format!("{name} = {}", num(c.value)),
    })
}

fn horizon(c: &Check) -> Option<usize> {
    c.name.rsplit_once("@n=").and_then(|(_, n)| n.parse().ok())
}

fn full(cmd: Command, out: &Path) -> ResultBundle {
    let t = Instant::now();
    let b = run_command(cmd, ExperimentConfig::default(), SEED, None, Some(&out.join(cmd.name())))
        .unwrap_or_else(|e| panic!("{cmd} failed: {e}"));
    eprintln!("[{cmd}: {:.0} s]", t.elapsed().as_secs_f64());
    b
}

/// Reduced ensembles for the thread-count comparison.
const DETERMINISM_CONFIG: &str = r#"
[stable_check]
samples = 100000
[renewal]
replicas = 1000
heyde_heights = 5000
harmonic_draws = 5000
[kappa]
n = 200
reps = 1000
survival_n = [50, 100]
survival_reps = 10000
[brw]
martingale_n = 4
martingale_reps = 200
n_max = 10
reps = 50
cutoff_b = 8.0
cauchy_n = [6, 10]
w_prime_n = [4, 8]
w_prime_reps = 100
table_replicas = 1000
[seneta_heyde]
n_list = [6, 10]
reps = 50
cutoff_b = 8.0
min_survivors = 5
[mto]
reps = 500
cf_reps = 1000
"#;

fn determinism(out: &Path) -> (bool, String) {
    let cfg = out.join("determinism.toml");
    std::fs::write(&cfg, DETERMINISM_CONFIG).unwrap();
    let mut compared = 0;
    let mut differ = Vec::new();
    for cmd in Command::ALL {
        let dirs: Vec<PathBuf> = ["1", "8"]
            .iter()
            .map(|t| {
                let dir = out.join(format!("threads{t}")).join(cmd.name());
                let status = Process::new(env!("CARGO_BIN_EXE_stable-brw"))
                    .args([cmd.name(), "--seed", "7", "--threads", t, "--config"])
                    .arg(&cfg)
                    .arg("--out")
                    .arg(&dir)
                    .output()
                    .unwrap()
                    .status;
                assert!(matches!(status.code(), Some(0 | 1)), "{cmd} with {t} threads: {status}");
                dir
            })
            .collect();
        for e in std::fs::read_dir(&dirs[0]).unwrap() {
            let f = e.unwrap().file_name();
            if !f.to_string_lossy().ends_with(".csv") {
                continue;
            }
            compared += 1;
            let a = std::fs::read(dirs[0].join(&f)).unwrap();
            let b = std::fs::read(dirs[1].join(&f)).ok();
            if b.as_deref() != Some(&a[..]) {
                differ.push(format!("{cmd}/{}", f.to_string_lossy()));
            }
        }
    }
    let pass = compared > 0 && differ.is_empty();
    (pass, format!("{compared} CSV files compared across 1 and 8 threads, {} differ {differ:?}", differ.len()))
}

fn main() {
    let out = Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
    let _ = std::fs::remove_dir_all(&out);
    std::fs::create_dir_all(&out).unwrap();
    let start = Instant::now();
    let mut r = Report { lines: Vec::new() };

    let sc = full(Command::StableCheck, &out);
    let (p, d) = judge(&sc, |c| c.name.starts_with("roundtrip") || c.name.starts_with("form_a"));
    r.add(1, p, format!("{d} {}, {}", value(&sc, "roundtrip.max_rel_error"), value(&sc, "form_a.lambda_prime")));
    let (p, d) = judge(&sc, |c| c.name.starts_with("cf.z"));
    r.add(2, p, d);
    let (p, d) = judge(&sc, |c| c.name == "positive_part_mean");
    r.add(3, p, format!("{d} {}", value(&sc, "positive_part_mean")));

    let rn = full(Command::Renewal, &out);
    let (p, d) = judge(&rn, |c| c.name == "heyde.functional");
    r.add(4, p, format!("{d} {}", value(&rn, "heyde.functional")));
    let (p, d) = judge(&rn, |c| c.name.starts_with("renewal.") || c.name.starts_with("harmonic."));
    r.add(5, p, format!("{d} {}, {}", value(&rn, "renewal.ratio_min"), value(&rn, "renewal.ratio_max")));

    let kp = full(Command::Kappa, &out);
    let (p, d) = judge(&kp, |c| c.name.starts_with("survival."));
    r.add(6, p, format!("{d} {}", value(&kp, "survival.flatness")));
    let (p, d) = judge(&kp, |c| c.name.starts_with("kappa."));
    r.add(7, p, format!("{d} {}, {}", value(&kp, "kappa.stable"), value(&kp, "kappa.gaussian")));

    let brw = full(Command::Brw, &out);
    let mto = full(Command::Mto, &out);
    let (p1, d1) = judge(&brw, |c| c.name.starts_with("martingale.") && horizon(c).is_some_and(|n| n <= 10));
    let (p2, d2) = judge(&mto, |c| c.name.starts_with("mto.") && horizon(c).is_some_and(|n| n <= 8));
    r.add(8, p1 && p2, format!("martingale means {d1}; many-to-one {d2}"));

    let (p, d) = judge(&brw, |c| c.name == "cauchy.decreasing" || c.name.starts_with("barrier.ratio"));
    let barrier = brw
        .checks
        .iter()
        .find(|c| c.name.starts_with("barrier.ratio"))
        .map_or("missing".into(), |c| format!("{} = {:.4}", c.name, c.value));
    r.add(9, p, format!("{d} {barrier}"));

    let sh = full(Command::SenetaHeyde, &out);
    let (p, d) = judge(&sh, |c| c.name == "rho.drift" || c.name.starts_with("rho.factor") || c.name == "trunc.max_relative");
    let medians: Vec<String> = sh
        .checks
        .iter()
        .filter(|c| c.name.starts_with("rho.median"))
        .map(|c| format!("{:.4}", c.value))
        .collect();
    r.add(10, p, format!("{d} medians {}", medians.join(" / ")));

    let (p, d) = determinism(&out);
    r.add(11, p, d);

    let failed: Vec<usize> = r.lines.iter().filter(|l| !l.1).map(|l| l.0).collect();
    println!(
        "acceptance: {} of {} criteria pass in {:.0} s; bundles in {}",
        r.lines.len() - failed.len(),
        r.lines.len(),
        start.elapsed().as_secs_f64(),
        out.display()
    );
    if !failed.is_empty() && std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
