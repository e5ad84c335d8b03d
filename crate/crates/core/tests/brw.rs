use proptest::prelude::*;
use stable_brw::brw::*;
use stable_brw::offspring::*;
use stable_brw::rng::RngStreams;
use stable_brw::stats::{median, RunningMoments};
use stable_brw::walk::{estimate_renewal_function, uniform_grid, LadderDirection, RenewalTable};
use stable_brw::Error;

fn stub() -> CalibratedOffspring {
    calibrate_boundary(&OffspringFamily::two_point(2), CALIBRATION_TOL).unwrap()
}

fn tilted() -> CalibratedOffspring {
    calibrate_boundary(&OffspringFamily::tilted_stable(1.5), CALIBRATION_TOL).unwrap()
}

fn tilted_table(o: &CalibratedOffspring) -> RenewalTable {
    estimate_renewal_function(
        &o.spine_step_sampler(),
        LadderDirection::Descending,
        &uniform_grid(60.0, 0.25),
        4000,
        100_000,
        o.scaling().as_ref(),
        &RngStreams::new(90),
    )
    .unwrap()
}

fn run(o: &CalibratedOffspring, cfg: &SimConfig, n: usize, table: Option<&RenewalTable>, seed: u64, i: u64) -> MartingaleSeries {
    let mut rng = RngStreams::new(seed).replica(i);
    run_series(o, cfg, n, o.spine.alpha_rho_bar(), table, seed, &mut rng).unwrap()
}

#[test]
fn empty_generations_and_extinction() {
    let cfg = SimConfig {
        barrier_a: Some(0.0),
        ..SimConfig::default()
    };
    let o = FixedOffspring(vec![-1.0, -0.5]);
    let mut rng = RngStreams::new(1).replica(0);
    let s = run_series(&o, &cfg, 4, 0.5, None, 1, &mut rng).unwrap();
    assert_eq!(s.records[0].count, 1);
    for r in &s.records[1..] {
        assert_eq!(r.count, 0);
        assert_eq!((r.w, r.z, r.d, r.w_prime, r.trunc_bound), (0.0, 0.0, 0.0, 0.0, 0.0));
    }
    assert!(!s.survived());
    let empty = Generation {
        positions: vec![],
        min_ok: vec![],
        min_ok_since_k0: vec![],
        ..Generation::initial(&SimConfig::default())
    };
    let next = evolve(&empty, &tilted(), &SimConfig::default(), &mut rng).unwrap();
    assert!(next.is_empty());
    assert_eq!(next.n, 1);
}

#[test]
fn start_position_enters_every_functional() {
    let cfg = SimConfig {
        start_x: 4.0,
        ..SimConfig::default()
    };
    let g = Generation::initial(&cfg);
    assert_eq!(additive_martingale(&g), (-4.0f64).exp());
    assert!((z_functional(&g, 0.5) - 2.0 * (-4.0f64).exp()).abs() < 1e-16);
    let table = RenewalTable::exact(vec![0.0, 4.0], vec![1.0, 3.0], None).unwrap();
    assert_eq!(truncated_derivative_martingale(&g, &table), 3.0 * (-4.0f64).exp());
    let g0 = Generation::initial(&SimConfig::default());
    assert_eq!(truncated_derivative_martingale(&g0, &table), 1.0);
}

#[test]
fn restricted_sums_special_cases() {
    let o = tilted();
    for k0 in [0usize, 3, 6] {
        let cfg = SimConfig {
            k0,
            ..SimConfig::default()
        };
        let mut rng = RngStreams::new(3).replica(k0 as u64);
        let mut g = Generation::initial(&cfg);
        for _ in 0..6 {
            g = evolve(&g, &o, &cfg, &mut rng).unwrap();
        }
        let (wp, wpp) = restricted_additive(&g, k0).unwrap();
        if k0 == 0 {
            assert_eq!(wp, wpp);
        }
        if k0 == 6 {
            // the window is generation n alone
            let direct: f64 = g.positions.iter().filter(|&&x| x >= 0.0).map(|&x| (-x).exp()).sum();
            assert!((wpp - direct).abs() <= 1e-12 * direct.max(1.0));
        }
        assert!(matches!(restricted_additive(&g, 7), Err(Error::Domain(_))));
    }
}

#[test]
fn z_equals_d_at_unit_index_on_the_positive_half_line() {
    let o = stub();
    let cfg = SimConfig {
        start_x: 20.0,
        ..SimConfig::default()
    };
    let mut rng = RngStreams::new(4).replica(0);
    let mut g = Generation::initial(&cfg);
    for _ in 0..5 {
        g = evolve(&g, &o, &cfg, &mut rng).unwrap();
    }
    assert!(g.positions.iter().all(|&x| x > 0.0) && g.min_ok.iter().all(|&f| f));
    let (z, d) = (z_functional(&g, 1.0), derivative_martingale(&g));
    assert!((z - d).abs() <= 1e-15 * d);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn indicator_nesting_is_pointwise(seed in 0u64..1_000, x0 in 0.0f64..3.0) {
        let o = tilted();
        let n = 6;
        let mut last = None::<f64>;
        let w = |k0: usize| {
            let cfg = SimConfig { k0, start_x: x0, ..SimConfig::default() };
            let mut rng = RngStreams::new(seed).replica(0);
            let mut g = Generation::initial(&cfg);
            for _ in 0..n {
                g = evolve(&g, &o, &cfg, &mut rng).unwrap();
            }
            let (wp, wpp) = restricted_additive(&g, k0).unwrap();
            (wp, wpp, additive_martingale(&g))
        };
        for k0 in 0..=n {
            let (wp, wpp, wn) = w(k0);
            let tol = 1e-12 * wn.max(1.0);
            prop_assert!(wp <= wpp + tol && wpp <= wn + tol, "k0={} {} {} {}", k0, wp, wpp, wn);
            // later restart windows drop fewer lineages
            if let Some(prev) = last {
                prop_assert!(prev <= wpp + tol);
            }
            last = Some(wpp);
        }
    }

    #[test]
    fn removed_weight_stays_under_the_bound(seed in 0u64..1_000, b in 0.5f64..3.0) {
        let o = tilted();
        let cfg = SimConfig { upper_cutoff_b: Some(b), ..SimConfig::default() };
        let s = run(&o, &cfg, 6, None, seed, 0);
        let mut prev = 0.0;
        for r in &s.records {
            prop_assert!(r.killed_weight <= r.trunc_bound * (1.0 + 1e-12));
            prop_assert!(r.trunc_bound >= prev);
            prop_assert!(r.w >= 0.0 && r.z >= 0.0 && r.w_prime >= 0.0);
            prev = r.trunc_bound;
        }
    }
}

#[test]
fn stub_ensemble_means_are_martingales() {
    let o = stub();
    let reps = 10_000;
    let runs = RngStreams::new(5).map_replicas(reps, |_, rng| {
        run_series(&o, &SimConfig::default(), 8, 1.0, None, 5, rng).unwrap()
    });
    for n in 1..=8 {
        let w: RunningMoments = runs.iter().map(|s| s.records[n].w).collect();
        let d: RunningMoments = runs.iter().map(|s| s.records[n].d).collect();
        assert!(w.estimate().within_se(1.0, 3.0), "W_{n}: {:?}", w.estimate());
        assert!(d.estimate().within_se(0.0, 3.0), "D_{n}: {:?}", d.estimate());
    }
}

#[test]
fn tilted_truncated_derivative_martingale_has_unit_mean() {
    let o = tilted();
    let table = tilted_table(&o);
    let reps = 10_000;
    let runs = RngStreams::new(6).map_replicas(reps, |_, rng| {
        let cfg = SimConfig::default();
        let mut g = Generation::initial(&cfg);
        let mut out = vec![(truncated_derivative_martingale(&g, &table), 0.0)];
        for _ in 0..8 {
            g = evolve(&g, &o, &cfg, rng).unwrap();
            out.push((truncated_derivative_martingale(&g, &table), truncated_derivative_table_error(&g, &table)));
        }
        out
    });
    assert_eq!(runs[0][0].0, 1.0);
    for n in 1..=8 {
        let d: RunningMoments = runs.iter().map(|r| r[n].0).collect();
        let bias = runs.iter().map(|r| r[n].1).sum::<f64>() / reps as f64;
        let e = d.estimate();
        assert!((e.value - 1.0).abs() <= 3.0 * e.se + bias, "D'_{n}: {e:?} bias {bias}");
    }
}

#[test]
fn cut_weight_plus_removed_weight_is_a_martingale() {
    // stopping lineages at the cutoff keeps the total mass a martingale
    let o = stub();
    let cfg = SimConfig {
        upper_cutoff_b: Some(1.5),
        ..SimConfig::default()
    };
    let runs = RngStreams::new(7).map_replicas(20_000, |_, rng| run_series(&o, &cfg, 8, 1.0, None, 7, rng).unwrap());
    let mut removed_any = false;
    for n in 1..=8 {
        let m: RunningMoments = runs.iter().map(|s| s.records[n].w + s.records[n].killed_weight).collect();
        assert!(m.estimate().within_se(1.0, 3.0), "n={n}: {:?}", m.estimate());
        removed_any |= runs.iter().any(|s| s.records[n].killed_weight > 0.0);
    }
    assert!(removed_any);
}

#[test]
fn an_inactive_cutoff_changes_nothing() {
    let o = tilted();
    let far = SimConfig {
        upper_cutoff_b: Some(1e6),
        ..SimConfig::default()
    };
    let a = run(&o, &SimConfig::default(), 6, None, 8, 1);
    let b = run(&o, &far, 6, None, 8, 1);
    assert_eq!(
        a.records.iter().map(|r| r.w).collect::<Vec<_>>(),
        b.records.iter().map(|r| r.w).collect::<Vec<_>>()
    );
    assert!(a.records.iter().all(|r| r.trunc_bound == 0.0));
}

#[test]
fn series_are_reproducible_and_serialize() {
    let o = tilted();
    let table = tilted_table(&o);
    let cfg = SimConfig {
        barrier_a: Some(5.0),
        upper_cutoff_b: Some(10.0),
        k0: 2,
        ..SimConfig::default()
    };
    let a = run(&o, &cfg, 8, Some(&table), 9, 3);
    let b = run(&o, &cfg, 8, Some(&table), 9, 3);
    assert_eq!(a.to_csv(), b.to_csv());
    let csv = a.to_csv();
    let mut lines = csv.lines().filter(|l| !l.starts_with('#'));
    assert_eq!(lines.next(), Some("n,count,W,Z,D,Dprime,Wprime,Wpp_k0,trunc_bound,Dprime_a"));
    assert_eq!(lines.count(), 9);
    assert!(csv.starts_with("# seed = 9\n"));
    // values round-trip
    let row: Vec<f64> = csv.lines().last().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(row[2], a.records[8].w);
    assert!(a.records[1].w_pp.is_nan() && !a.records[2].w_pp.is_nan());
}

#[test]
fn overflow_is_reported_with_its_generation() {
    let o = tilted();
    let cfg = SimConfig {
        max_particles: 500,
        ..SimConfig::default()
    };
    let mut rng = RngStreams::new(10).replica(0);
    match run_series(&o, &cfg, 12, 0.5, None, 10, &mut rng) {
        Err(Error::Overflow { generation, limit, .. }) => {
            assert_eq!(limit, 500);
            assert!((5..=8).contains(&generation), "generation {generation}");
        }
        other => panic!("expected overflow, got {other:?}"),
    }
}

#[test]
fn additive_martingale_decays_along_runs() {
    let o = stub();
    let runs = RngStreams::new(11).map_replicas(400, |_, rng| run_series(&o, &SimConfig::default(), 16, 1.0, None, 11, rng).unwrap());
    let med: Vec<f64> = [4, 10, 16]
        .iter()
        .map(|&n| median(&runs.iter().map(|s| s.records[n].w).collect::<Vec<_>>()))
        .collect();
    assert!(med.windows(2).all(|w| w[1] < w[0]), "{med:?}");
}

#[test]
fn restricted_mean_matches_the_survival_asymptotics() {
    let o = tilted();
    let table = tilted_table(&o);
    let pts = mean_w_prime_scaling(&o, 0.0, &[8, 12, 16], 4000, &table, 4.0, &RngStreams::new(12)).unwrap();
    let vals: Vec<f64> = pts.iter().map(|p| p.scaled.value).collect();
    let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = vals.iter().cloned().fold(0.0, f64::max);
    assert!(hi / lo < 1.15, "{vals:?}");
    for p in &pts {
        assert!((p.ratio.value - 1.0).abs() < 0.25, "{p:?}");
    }
    // the cutoff only affects the variance
    let other = mean_w_prime_scaling(&o, 0.0, &[8], 4000, &table, 7.0, &RngStreams::new(13)).unwrap();
    let (a, b) = (pts[0].scaled, other[0].scaled);
    assert!((a.value - b.value).abs() < 3.0 * a.se.hypot(b.se));
}

#[test]
fn restricted_mean_is_proportional_to_renewal_weight() {
    // the asymptotics need x small against a_n; n = 48 gives a_n ≈ 13
    let o = tilted();
    let table = tilted_table(&o);
    let at = |x: f64, seed| mean_w_prime_scaling(&o, x, &[48], 2000, &table, x + 4.0, &RngStreams::new(seed)).unwrap()[0];
    let (a, b) = (at(0.5, 14), at(3.0, 15));
    assert!((a.ratio.value - b.ratio.value).abs() < 3.0 * a.ratio.se.hypot(b.ratio.se), "{a:?} {b:?}");
}
