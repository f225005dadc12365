mod common;

use common::{iid_uniform, ring123, tight};
use rcm_core::env::{Neighborhood, TorusModel};
use rcm_core::floquet::{
    evolve_to_times, linear_response_check, mean_velocity, oss_for, phase_times, simulate_walk, velocity_derivative,
    DriveSpec, FloquetConfig, LinearResponseReport, WalkConfig,
};
use rcm_core::mobility::mobility_matrix;

#[test]
fn mean_velocity_against_trajectories() {
    let t = ring123();
    let drive = DriveSpec::new(1.0, 1e-2, vec![1.0]).unwrap();
    let (oss, _) = oss_for(&t, &drive, &FloquetConfig::default()).unwrap();
    let v0 = mean_velocity(&t, &drive, &oss, 0.0).unwrap()[0];
    let cfg = WalkConfig { t_end: 6.0 * drive.period(), n_paths: 1_000_000, seed: 2024, phases: 1 };
    let est = simulate_walk(&t, &drive, &cfg).unwrap();
    let (mc, se) = (est.velocity[0][0], est.velocity_se[0][0]);
    assert!((mc - v0).abs() < 4.0 * se, "deterministic {v0}, trajectories {mc} +- {se}");
}

#[test]
fn oss_occupation_against_trajectories() {
    let t = ring123();
    let drive = DriveSpec::new(1.0, 0.8, vec![1.0]).unwrap();
    let cfg = FloquetConfig::default();
    let (oss, steps) = oss_for(&t, &drive, &cfg).unwrap();
    let n_paths = 100_000;
    let walk = WalkConfig { t_end: 8.0 * drive.period(), n_paths, seed: 7, phases: 4 };
    let est = simulate_walk(&t, &drive, &walk).unwrap();
    let phases: Vec<f64> = est.times.iter().map(|s| s - 7.0 * drive.period()).collect();
    let laws = evolve_to_times(&t, &drive, &oss, &phases, steps).unwrap();
    for (emp, law) in est.occupation.iter().zip(&laws) {
        let tv: f64 = 0.5 * emp.iter().zip(&law.0).map(|(a, b)| (a - b).abs()).sum::<f64>();
        // mean of |p_hat - p| is about sqrt(2 p (1-p) / (pi n)) per site
        let mc: f64 = 0.5 * law.0.iter().map(|p| (2.0 * p * (1.0 - p) / (std::f64::consts::PI * n_paths as f64)).sqrt()).sum::<f64>();
        assert!(tv < 3.0 * mc, "tv {tv:e} vs mc {mc:e}");
    }
}

#[test]
fn constant_environment_closed_form() {
    let t = TorusModel::constant(Neighborhood::nearest(1), 4, 2.0).unwrap();
    let drive = DriveSpec::new(2.0, 1e-3, vec![1.0]).unwrap();
    let times = phase_times(2.0, 8);
    let d = velocity_derivative(&t, &drive, &times, &FloquetConfig::default()).unwrap();
    for (s, v) in times.iter().zip(&d) {
        // d/dlambda of sum_z c e^{lambda cos(wt) z} z at 0 is 2c cos(wt)
        assert!((v[0] - 4.0 * (2.0 * s).cos()).abs() < 1e-6);
    }
}

#[test]
fn two_dimensional_response() {
    let t = iid_uniform(2, 4, 13);
    let times = phase_times(0.7, 8);
    let rep = linear_response_check(&t, 0.7, &[0.6, 0.8], 1e-3, &times, &FloquetConfig::default(), &tight()).unwrap();
    assert!(rep.deviation() <= 1e-4);
    assert!((3.0..=5.0).contains(&rep.halving_ratio()));
}

#[test]
fn report_json_shape() {
    let t = ring123();
    let times = phase_times(1.0, 8);
    let rep = linear_response_check(&t, 1.0, &[1.0], 1e-3, &times, &FloquetConfig::default(), &tight()).unwrap();
    let v: serde_json::Value = serde_json::to_value(&rep).unwrap();
    for key in ["omega", "lambda", "times", "deviation", "per_time"] {
        assert!(v.get(key).is_some(), "{key}");
    }
    assert_eq!(v["per_time"].as_array().unwrap().len(), 8);
    assert!(v["per_time"][0].get("fd").is_some() && v["per_time"][0].get("predicted").is_some());
    let back: LinearResponseReport = serde_json::from_str(&serde_json::to_string(&rep).unwrap()).unwrap();
    assert_eq!(back, rep);
    let sigma = mobility_matrix(&t, 1.0, &tight()).unwrap();
    let p0 = rep.per_time[0].predicted[0].0;
    assert!((p0 - sigma.get(0, 0).re).abs() < 1e-14);
}

#[test]
fn arbitrary_times_are_consistent() {
    let t = ring123();
    let drive = DriveSpec::new(1.0, 0.3, vec![1.0]).unwrap();
    let (oss, steps) = oss_for(&t, &drive, &FloquetConfig::default()).unwrap();
    let a = evolve_to_times(&t, &drive, &oss, &[0.0, 1.0, 2.5], steps).unwrap();
    let b = evolve_to_times(&t, &drive, &oss, &[2.5, 1.0], steps).unwrap();
    assert_eq!(a[2], b[0]);
    assert_eq!(a[1], b[1]);
    assert_eq!(a[0], oss);
    for law in &a {
        assert!((law.mass() - 1.0).abs() < 1e-12 && law.min() >= -1e-12);
    }
}
