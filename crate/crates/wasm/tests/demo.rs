//! The demo entry points, run natively.

use quasigrad_wasm::{breakdown_scan, filter_run, kl_project};

#[test]
fn breakdown_scan_flips_at_the_critical_value() {
    let scan = breakdown_scan(0.25, 5.0, 41).unwrap();
    let critical = scan.critical_a.unwrap();
    assert!((critical - 3.0).abs() < 1e-12);
    assert_eq!(scan.points.len(), 41);
    for p in &scan.points {
        if (p.a - critical).abs() > 1e-9 {
            assert_eq!(p.stationary, p.a < critical, "a = {}", p.a);
        }
    }
    assert!(breakdown_scan(0.4, 100.0, 5).unwrap().critical_a.is_none());
}

#[test]
fn filter_demo_moves_the_mean_back_to_the_good_points() {
    let run = filter_run(400, 0.1, 12.0, 3).unwrap();
    assert_eq!(run.points.len(), 400);
    assert_eq!(run.good.iter().filter(|&&g| g).count(), 360);
    let dist = |m: [f64; 2]| {
        ((m[0] - run.good_mean[0]).powi(2) + (m[1] - run.good_mean[1]).powi(2)).sqrt()
    };
    assert!(dist(run.sample_mean) > 1.0);
    assert!(dist(run.filtered_mean) < 0.3);
    assert!(*run.objectives.last().unwrap() <= run.threshold);
}

#[test]
fn projection_respects_the_cap() {
    let p = kl_project(&[8.0, 1.0, 1.0, 1.0, 1.0], 0.2).unwrap();
    assert!((p.cap - 0.25).abs() < 1e-15);
    assert!(p.projected.iter().all(|&w| w <= p.cap + 1e-15));
    assert!((p.projected.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert!(p.kl > 0.0);
    assert!(kl_project(&[1.0, 0.0], 0.1).is_err());
}
