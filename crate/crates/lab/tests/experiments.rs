use music_core::geometry::activation;
use music_lab::experiments::{
    baseline_compare, gmm_trajectories, inversion_vs_n, noise_scaling, BaselineConfig, GmmBench,
    GmmBenchConfig, NoiseScalingConfig, Regime, RegimeConfig,
};

fn small_bench() -> GmmBench {
    let mut cfg = GmmBenchConfig {
        train_size: 900,
        rows: 8,
        cols: 8,
        ..GmmBenchConfig::default()
    };
    cfg.som.epochs = 5;
    cfg.som.radius_initial = 4.0;
    GmmBench::build(&cfg).unwrap()
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
        .install(f)
}

#[test]
fn every_component_owns_units() {
    let bench = small_bench();
    for c in 0..bench.spec.components() {
        let units = bench.component_units(c);
        assert!(!units.is_empty(), "component {c} has no unit");
        assert!(units.contains(&bench.unit_near_mean(c)));
    }
    let owned: usize = (0..3).map(|c| bench.component_units(c).len()).sum();
    assert_eq!(owned, bench.protos.len());
}

#[test]
fn results_do_not_depend_on_worker_count() {
    let bench = small_bench();
    let cfg = RegimeConfig {
        trajectories: 6,
        steps: 30,
        ..RegimeConfig::for_regime(Regime::ClusterExploration)
    };
    let one = in_pool(1, || {
        gmm_trajectories(&bench, Regime::ClusterExploration, &cfg).unwrap()
    });
    let four = in_pool(4, || {
        gmm_trajectories(&bench, Regime::ClusterExploration, &cfg).unwrap()
    });
    assert_eq!(one.trajectories, four.trajectories);

    let noise = NoiseScalingConfig {
        trials: 400,
        ..NoiseScalingConfig::default()
    };
    let a = in_pool(1, || noise_scaling(&noise).unwrap());
    let b = in_pool(4, || noise_scaling(&noise).unwrap());
    assert_eq!(a.trials, b.trials);
}

#[test]
fn inversion_error_collapses_once_rows_reach_dimension() {
    let bench = small_bench();
    let d = bench.spec.dim();
    let (points, _) = bench.sample(60, 11).unwrap();
    let ns: Vec<usize> = (1..=d + 8).collect();
    let rows = inversion_vs_n(&bench.protos, &points, &ns).unwrap();

    for pair in rows.windows(2).filter(|p| p[0].n >= d) {
        assert!(pair[1].median <= pair[0].median.max(1e-12) * 10.0);
    }
    for r in &rows {
        assert!(r.q1 <= r.median && r.median <= r.q3);
        if r.n >= d {
            assert!(r.median < 1e-9, "n={} median={}", r.n, r.median);
        }
        if r.n + 2 <= d {
            assert!(r.median > 1e-2, "n={} median={}", r.n, r.median);
        }
    }
}

#[test]
fn doubling_noise_doubles_binned_errors() {
    // Same geometries and the same standard-normal draws: the errors are
    // linear in the noise scale up to rounding, so the binned medians double.
    let base = NoiseScalingConfig {
        trials: 2000,
        ..NoiseScalingConfig::default()
    };
    let doubled = NoiseScalingConfig {
        sigma: 2.0 * base.sigma,
        ..base.clone()
    };
    let a = noise_scaling(&base).unwrap();
    let b = noise_scaling(&doubled).unwrap();
    assert_eq!(a.bins.len(), b.bins.len());
    for (x, y) in a.bins.iter().zip(&b.bins).filter(|(x, _)| x.count >= 50) {
        for ratio in [y.mean_error / x.mean_error, y.median_error / x.median_error] {
            assert!((ratio / 2.0 - 1.0).abs() < 0.15, "ratio {ratio}");
        }
    }
    assert!((a.slope - b.slope).abs() < 0.05);
}

#[test]
fn baseline_runs_start_at_zero_drift_with_equal_step_norms() {
    let bench = small_bench();
    let (start, _) = bench.sample(1, 3).unwrap();
    let cfg = BaselineConfig {
        seeds: 4,
        steps: 10,
        ..BaselineConfig::default()
    };
    let report = baseline_compare(&start[0], &bench.protos, &cfg).unwrap();
    assert_eq!(report.preserved.len(), cfg.preserve);

    // Preserved set is the nearest units by brute force.
    let a = activation(&start[0], &bench.protos).unwrap();
    let mut order: Vec<usize> = (0..a.len()).collect();
    order.sort_by(|&i, &j| a[i].total_cmp(&a[j]));
    assert_eq!(report.preserved, order[..cfg.preserve]);

    for run in &report.runs {
        assert_eq!(run.music_drift.len(), cfg.steps + 1);
        assert_eq!(run.music_drift[0], 0.0);
        assert_eq!(run.baseline_drift[0], 0.0);
        assert!(run.max_norm_gap <= 1e-12);
        assert!(run.music_drift.iter().all(|d| d.is_finite() && *d >= 0.0));
    }
}
