#![allow(dead_code)]

use rcm_core::env::{torus_from_spec, EnvironmentSpec, Law, Neighborhood, TorusModel};
use rcm_core::solver::SolveConfig;

pub const OMEGAS: [f64; 3] = [0.1, 1.0, 10.0];

pub struct SuiteModel {
    pub name: &'static str,
    pub model: TorusModel,
}

pub fn tight() -> SolveConfig {
    SolveConfig::default().with_tol(1e-12)
}

pub fn pattern123() -> EnvironmentSpec {
    EnvironmentSpec::periodic(vec![3], vec![vec![1.0], vec![2.0], vec![3.0]])
}

pub fn uniform12(seed: u64) -> EnvironmentSpec {
    EnvironmentSpec::iid(Law::Uniform { a: 1.0, b: 2.0 }, seed)
}

pub fn iid_uniform(dim: usize, n: usize, seed: u64) -> TorusModel {
    torus_from_spec(&uniform12(seed), &Neighborhood::nearest(dim), n).unwrap()
}

pub fn ring123() -> TorusModel {
    torus_from_spec(&pattern123(), &Neighborhood::nearest(1), 3).unwrap()
}

pub fn pattern_2d() -> (EnvironmentSpec, Neighborhood) {
    let nbhd = Neighborhood::new(vec![vec![1, 0], vec![0, 1]]).unwrap();
    let values = vec![vec![1.0, 2.0], vec![3.0, 0.5], vec![1.5, 1.0], vec![0.8, 2.5]];
    (EnvironmentSpec::periodic(vec![2, 2], values), nbhd)
}

/// Models every identity check runs on; all have at most 4096 sites.
pub fn suite() -> Vec<SuiteModel> {
    let nn1 = Neighborhood::nearest(1);
    let nn2 = Neighborhood::nearest(2);
    let long1 = Neighborhood::new(vec![vec![1], vec![2]]).unwrap();
    let tri2 = Neighborhood::new(vec![vec![1, 0], vec![0, 1], vec![1, 1]]).unwrap();
    let (p2, p2n) = pattern_2d();
    vec![
        SuiteModel { name: "constant d=1 N=4", model: TorusModel::constant(nn1.clone(), 4, 1.5).unwrap() },
        SuiteModel { name: "constant d=2 N=4", model: TorusModel::constant(nn2.clone(), 4, 0.7).unwrap() },
        SuiteModel { name: "periodic (1,2,3) N=3", model: ring123() },
        SuiteModel { name: "periodic (1,2,3) N=6", model: torus_from_spec(&pattern123(), &nn1, 6).unwrap() },
        SuiteModel { name: "periodic (1,2,3) N=12", model: torus_from_spec(&pattern123(), &nn1, 12).unwrap() },
        SuiteModel { name: "periodic 2x2 d=2 N=6", model: torus_from_spec(&p2, &p2n, 6).unwrap() },
        SuiteModel { name: "iid uniform d=1 N=5", model: iid_uniform(1, 5, 1) },
        SuiteModel { name: "iid uniform d=1 N=16", model: iid_uniform(1, 16, 2) },
        SuiteModel { name: "iid uniform d=2 N=8", model: iid_uniform(2, 8, 3) },
        SuiteModel {
            name: "iid lognormal d=2 N=6",
            model: torus_from_spec(&EnvironmentSpec::iid(Law::LogNormal { mu: 0.0, sigma: 0.5 }, 4), &nn2, 6).unwrap(),
        },
        SuiteModel {
            name: "iid long-range d=1 N=7",
            model: torus_from_spec(&EnvironmentSpec::iid(Law::Uniform { a: 0.5, b: 2.0 }, 5), &long1, 7).unwrap(),
        },
        SuiteModel {
            name: "iid two-point d=2 diagonal N=6",
            model: torus_from_spec(
                &EnvironmentSpec::iid(Law::TwoPoint { low: 0.2, high: 1.0, p_low: 0.3 }, 6),
                &tri2,
                6,
            )
            .unwrap(),
        },
    ]
}

/// Relative distance `||a - b|| / ||b||` of two complex fields.
pub fn rel_dist(a: &rcm_core::torus::ComplexField, b: &rcm_core::torus::ComplexField) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..a.len() {
        num += (a.re[i] - b.re[i]).powi(2) + (a.im[i] - b.im[i]).powi(2);
        den += b.re[i].powi(2) + b.im[i].powi(2);
    }
    if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}
