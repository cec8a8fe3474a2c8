//! Scenario generation and sweep properties.

use quasigrad::geometry::{quartic_ratio_grid, Centering};
use quasigrad::sim::{
    generate, median_by_epsilon, run_cell, sweep, Adversary, DistanceLaw, Generator, ScenarioSpec,
    SweepCell,
};
use quasigrad::solvers::{Algorithm, SolverConfig};
use quasigrad::{weighted_moments, TaskObjective, WeightVector};

fn spectral_max(m: &nalgebra::DMatrix<f64>) -> f64 {
    nalgebra::SymmetricEigen::new(m.clone()).eigenvalues.max()
}

#[test]
fn good_parts_meet_their_assumed_bounds() {
    for (d, n, seed) in [(5, 1000, 0), (10, 2000, 1), (20, 1000, 2), (20, 4000, 3)] {
        let spec = ScenarioSpec {
            generator: Generator::isotropic(d, 1.0),
            adversary: Adversary::FarCluster {
                distance: DistanceLaw::Fixed(50.0),
                spread: 1.0,
            },
            n,
            epsilon: 0.1,
            seed,
        };
        let data = generate(&spec).unwrap().data;
        let p_s = WeightVector::uniform_on(n, data.good_set().unwrap()).unwrap();
        let norm = spectral_max(&weighted_moments(&data, &p_s).unwrap().cov);
        assert!(norm <= 1.5, "d={d}, n={n}: {norm}");
    }
    for (d, n, seed) in [(1, 2000, 0), (2, 2000, 1), (3, 3000, 2)] {
        let spec = ScenarioSpec {
            generator: Generator::Regression {
                theta: vec![1.0; d],
                noise: 1.0,
            },
            adversary: Adversary::LabelFlip,
            n,
            epsilon: 0.05,
            seed,
        };
        let data = generate(&spec).unwrap().data;
        let p_s = WeightVector::uniform_on(n, data.good_set().unwrap()).unwrap();
        let f1 = quartic_ratio_grid(&data, &p_s, Centering::Uncentered, 2e-3)
            .unwrap()
            .value;
        assert!(f1 <= 4.0, "d={d}: F1(p_S) = {f1}");
    }
}

#[test]
fn generation_is_deterministic_per_seed() {
    let spec = |seed| ScenarioSpec {
        generator: Generator::HeavyTail {
            d: 3,
            moment: 4,
            scale: 1.0,
        },
        adversary: Adversary::HeavyDirection { magnitude: 9.0 },
        n: 200,
        epsilon: 0.1,
        seed,
    };
    let (a, b, c) = (
        generate(&spec(4)).unwrap(),
        generate(&spec(4)).unwrap(),
        generate(&spec(5)).unwrap(),
    );
    assert_eq!(a.data.points(), b.data.points());
    assert_ne!(a.data.points(), c.data.points());
    assert_eq!(a.bad_count, 20);
}

#[test]
fn median_error_grows_with_epsilon() {
    let mut cells = Vec::new();
    for eps in [0.05, 0.1, 0.2] {
        for seed in 0..5 {
            cells.push(SweepCell {
                spec: ScenarioSpec {
                    generator: Generator::isotropic(5, 1.0),
                    adversary: Adversary::FarCluster {
                        distance: DistanceLaw::InvSqrtEpsilon(0.9),
                        spread: 0.1,
                    },
                    n: 2000,
                    epsilon: eps,
                    seed,
                },
                objective: TaskObjective::mean_bounded_cov(eps, 1.0),
                config: SolverConfig {
                    seed,
                    ..Default::default()
                },
                prune_alpha: None,
                adversarial_init: false,
            });
        }
    }
    let rows: Vec<_> = sweep(&cells, 2).into_iter().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 15);
    let medians = median_by_epsilon(&rows, |r| r.metrics.mean_error);
    assert_eq!(medians.len(), 3);
    assert!(medians.windows(2).all(|w| w[1].1 >= w[0].1), "{medians:?}");
}

fn breakdown_error(eps: f64, a: f64) -> f64 {
    let cell = SweepCell {
        spec: ScenarioSpec {
            generator: Generator::isotropic(1, 1.0),
            adversary: Adversary::BreakdownAtoms { a },
            n: 0,
            epsilon: eps,
            seed: 0,
        },
        objective: TaskObjective::mean_bounded_cov(eps, 1.0).with_threshold(0.0),
        config: SolverConfig {
            algorithm: Algorithm::ExplicitLowRegret,
            stationarity_tol: Some(1e-3),
            max_iters: Some(100_000),
            ..Default::default()
        },
        prune_alpha: None,
        adversarial_init: true,
    };
    let (row, _) = run_cell(&cell).unwrap();
    assert_eq!(row.status, "ok");
    row.metrics.mean_error.unwrap()
}

#[test]
fn adversarial_start_breaks_down_past_one_third() {
    let below: Vec<f64> = [100.0, 1000.0, 10000.0]
        .iter()
        .map(|&a| breakdown_error(0.30, a))
        .collect();
    let above: Vec<f64> = [100.0, 1000.0, 10000.0]
        .iter()
        .map(|&a| breakdown_error(0.34, a))
        .collect();
    // below 1/3 the solver walks away from the bad start for every a
    assert!(below.iter().all(|&e| e < 1e-3), "{below:?}");
    assert!(above[2] > 50.0 * above[0], "{above:?}");
}
