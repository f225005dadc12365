//! Corrector solves: `(i omega - L) theta = rhs` for `omega != 0`, and the
//! deflated `-L theta = rhs` on mean-zero fields for `omega = 0`.
//!
//! `i omega - L` is complex symmetric, not Hermitian. The default route
//! rewrites it as the real symmetric indefinite block system
//!
//! ```text
//! [ -L      -omega ] [ theta_R ]   [ rhs ]
//! [ -omega   L     ] [ theta_I ] = [  0  ]
//! ```
//!
//! and runs MINRES. COCG on the complex form and a dense LU oracle are also
//! available.

mod dense;
mod krylov;
mod minres;

use serde::{Deserialize, Serialize};

pub use dense::{dense_generator, dense_solve, dense_solve_deflated};

use crate::env::TorusModel;
use crate::error::{Error, Result};
use crate::torus::{generator_apply, ComplexField, RealField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    CoupledRealMinres,
    Cocg,
    Dense,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::CoupledRealMinres => "coupled_real_minres",
            Method::Cocg => "cocg",
            Method::Dense => "dense",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Precond {
    None,
    Diagonal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveConfig {
    /// Target relative residual `||(i omega - L) theta - rhs||_2 / ||rhs||_2`.
    pub tol: f64,
    pub max_iter: usize,
    pub method: Method,
    pub precond: Precond,
    /// Largest site count accepted by the dense route.
    pub dense_cap: usize,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 20_000,
            method: Method::CoupledRealMinres,
            precond: Precond::Diagonal,
            dense_cap: 4096,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::InvalidArgument(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidArgument("max_iter must be at least 1".into()));
        }
        Ok(())
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_method(mut self, method: Method) -> Self {
        self.method = method;
        self
    }

    pub fn with_precond(mut self, precond: Precond) -> Self {
        self.precond = precond;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    /// Relative 2-norm residual, recomputed from the returned solution.
    pub residual: f64,
    pub method: Method,
}

/// `||(i omega - L) theta - rhs||_2 / ||rhs||_2`, or the absolute norm when
/// `rhs = 0`.
pub fn corrector_residual(model: &TorusModel, omega: f64, theta: &ComplexField, rhs: &RealField) -> f64 {
    let n = model.sites();
    let mut lre = vec![0.0; n];
    let mut lim = vec![0.0; n];
    generator_apply(model, &theta.re, &mut lre);
    generator_apply(model, &theta.im, &mut lim);
    let mut num = 0.0;
    for i in 0..n {
        // (i omega - L)(a + ib) = (-omega b - La) + i(omega a - Lb)
        let re = -omega * theta.im[i] - lre[i] - rhs.0[i];
        let im = omega * theta.re[i] - lim[i];
        num += re * re + im * im;
    }
    let den: f64 = rhs.0.iter().map(|v| v * v).sum();
    if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}

/// `||-L theta - rhs||_2 / ||rhs||_2`.
pub fn deflated_residual(model: &TorusModel, theta: &RealField, rhs: &RealField) -> f64 {
    let mut l = vec![0.0; model.sites()];
    generator_apply(model, &theta.0, &mut l);
    let num: f64 = l.iter().zip(&rhs.0).map(|(a, b)| (-a - b).powi(2)).sum();
    let den: f64 = rhs.0.iter().map(|v| v * v).sum();
    if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}

/// Solves `(i omega - L) theta = rhs` for `omega > 0`.
pub fn solve_corrector(
    model: &TorusModel,
    omega: f64,
    rhs: &RealField,
    cfg: &SolveConfig,
) -> Result<(ComplexField, SolveReport)> {
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "solve_corrector needs omega > 0, got {omega}; use solve_deflated for omega = 0"
        )));
    }
    solve_signed(model, omega, rhs, cfg, None)
}

/// [`solve_corrector`] started from a previous solution, e.g. the corrector
/// at a neighbouring frequency.
pub fn solve_corrector_warm(
    model: &TorusModel,
    omega: f64,
    rhs: &RealField,
    cfg: &SolveConfig,
    start: &ComplexField,
) -> Result<(ComplexField, SolveReport)> {
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(Error::InvalidArgument(format!("omega must be positive, got {omega}")));
    }
    solve_signed(model, omega, rhs, cfg, Some(start))
}

/// Same system for any nonzero real `omega`, including negative frequencies.
pub(crate) fn solve_signed(
    model: &TorusModel,
    omega: f64,
    rhs: &RealField,
    cfg: &SolveConfig,
    start: Option<&ComplexField>,
) -> Result<(ComplexField, SolveReport)> {
    cfg.validate()?;
    let n = model.sites();
    if rhs.len() != n {
        return Err(Error::InvalidArgument(format!("rhs has {} entries for {n} sites", rhs.len())));
    }
    if !rhs.0.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidArgument("rhs has non-finite entries".into()));
    }
    if omega == 0.0 || !omega.is_finite() {
        return Err(Error::InvalidArgument(format!("omega must be finite and nonzero, got {omega}")));
    }
    if rhs.0.iter().all(|v| *v == 0.0) && start.is_none() {
        let report = SolveReport { iterations: 0, residual: 0.0, method: cfg.method };
        return Ok((ComplexField::zeros(n), report));
    }
    let (theta, iterations) = match cfg.method {
        Method::CoupledRealMinres => block_minres(model, omega, rhs, cfg, start)?,
        Method::Cocg => krylov::cocg(model, omega, rhs, cfg, start)?,
        Method::Dense => (dense_solve(model, omega, rhs, cfg.dense_cap)?, 0),
    };
    let residual = corrector_residual(model, omega, &theta, rhs);
    if cfg.method != Method::Dense && residual > cfg.tol {
        return Err(Error::NotConverged { method: cfg.method.name(), iterations, residual });
    }
    Ok((theta, SolveReport { iterations, residual, method: cfg.method }))
}

/// Diagonal of `|i omega - L|`-like scaling used by both Krylov routes:
/// total exit rate per site.
fn exit_rates(model: &TorusModel) -> Vec<f64> {
    (0..model.sites()).map(|x| model.exit_rate(x)).collect()
}

/// MINRES on the block system with restarts from the true residual until it
/// meets `cfg.tol`.
fn block_minres(
    model: &TorusModel,
    omega: f64,
    rhs: &RealField,
    cfg: &SolveConfig,
    start: Option<&ComplexField>,
) -> Result<(ComplexField, usize)> {
    let n = model.sites();
    let op = |v: &[f64], out: &mut [f64]| {
        let (u, w) = v.split_at(n);
        let (o1, o2) = out.split_at_mut(n);
        generator_apply(model, u, o1);
        generator_apply(model, w, o2);
        for i in 0..n {
            let lu = o1[i];
            let lw = o2[i];
            o1[i] = -lu - omega * w[i];
            o2[i] = -omega * u[i] + lw;
        }
    };
    // SPD scaling sqrt(D^2 + omega^2) on both blocks
    let scale: Vec<f64> = match cfg.precond {
        Precond::Diagonal => exit_rates(model).iter().map(|d| 1.0 / d.hypot(omega)).collect(),
        Precond::None => vec![1.0; n],
    };
    let spread = {
        let (lo, hi) = scale.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), s| (lo.min(*s), hi.max(*s)));
        (hi / lo).sqrt()
    };
    let precond = |v: &[f64], out: &mut [f64]| {
        for i in 0..v.len() {
            out[i] = v[i] * scale[i % n];
        }
    };

    let mut b = vec![0.0; 2 * n];
    b[..n].copy_from_slice(&rhs.0);
    let bnorm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut x = vec![0.0; 2 * n];
    if let Some(s) = start {
        x[..n].copy_from_slice(&s.re);
        x[n..].copy_from_slice(&s.im);
    }
    let mut used = 0;
    let mut r = vec![0.0; 2 * n];
    let mut best = f64::INFINITY;
    let mut stalls = 0;
    loop {
        op(&x, &mut r);
        for i in 0..2 * n {
            r[i] = b[i] - r[i];
        }
        let rnorm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        let rel = if bnorm > 0.0 { rnorm / bnorm } else { rnorm };
        if rel <= cfg.tol {
            break;
        }
        if rel < 0.5 * best {
            stalls = 0;
        } else {
            stalls += 1;
        }
        best = best.min(rel);
        if used >= cfg.max_iter || stalls >= 3 {
            return Err(Error::NotConverged { method: "coupled_real_minres", iterations: used, residual: best });
        }
        let inner_tol = (0.5 * cfg.tol * bnorm.max(f64::MIN_POSITIVE) / rnorm / spread).min(0.5);
        let out = minres::minres(&op, &precond, &r, inner_tol, cfg.max_iter - used);
        used += out.iterations.max(1);
        for (xi, di) in x.iter_mut().zip(&out.x) {
            *xi += di;
        }
    }
    let im = x.split_off(n);
    Ok((ComplexField { re: x, im }, used))
}

/// Zero-mean solution of `-L theta = rhs` by conjugate gradients on the
/// mean-zero subspace. `rhs` must have zero `m_N`-mean.
pub fn solve_deflated(model: &TorusModel, rhs: &RealField, cfg: &SolveConfig) -> Result<(RealField, SolveReport)> {
    cfg.validate()?;
    let n = model.sites();
    if rhs.len() != n {
        return Err(Error::InvalidArgument(format!("rhs has {} entries for {n} sites", rhs.len())));
    }
    let mean = rhs.mean();
    let rms = rhs.norm();
    if mean.abs() > 1e-10 * rms.max(f64::MIN_POSITIVE) {
        return Err(Error::NonZeroMean { mean });
    }
    if rms == 0.0 {
        return Ok((RealField::zeros(n), SolveReport { iterations: 0, residual: 0.0, method: cfg.method }));
    }
    if cfg.method == Method::Dense {
        let theta = dense_solve_deflated(model, rhs, cfg.dense_cap)?;
        let residual = deflated_residual(model, &theta, rhs);
        return Ok((theta, SolveReport { iterations: 0, residual, method: Method::Dense }));
    }
    let (theta, iterations) = krylov::projected_cg(model, rhs, cfg)?;
    let residual = deflated_residual(model, &theta, rhs);
    if residual > cfg.tol {
        return Err(Error::NotConverged { method: "projected_cg", iterations, residual });
    }
    Ok((theta, SolveReport { iterations, residual, method: cfg.method }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::Neighborhood;
    use crate::torus::local_drift;

    fn ring123() -> TorusModel {
        TorusModel::from_conductances(Neighborhood::nearest(1), 3, vec![1.0, 2.0, 3.0]).unwrap()
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let t = ring123();
        let (th, rep) = solve_corrector(&t, 1.0, &RealField::zeros(3), &SolveConfig::default()).unwrap();
        assert!(th.re.iter().chain(&th.im).all(|v| *v == 0.0));
        assert_eq!(rep.iterations, 0);
        let (d, _) = solve_deflated(&t, &RealField::zeros(3), &SolveConfig::default()).unwrap();
        assert!(d.0.iter().all(|v| *v == 0.0));
        let z = dense_solve(&t, 2.0, &RealField::zeros(3), 4096).unwrap();
        assert!(z.re.iter().chain(&z.im).all(|v| *v == 0.0));
    }

    #[test]
    fn rejects_nonpositive_omega() {
        let t = ring123();
        let g = local_drift(&t, 0).unwrap();
        assert!(solve_corrector(&t, 0.0, &g, &SolveConfig::default()).is_err());
        assert!(solve_corrector(&t, -1.0, &g, &SolveConfig::default()).is_err());
    }

    #[test]
    fn rejects_nonzero_mean() {
        let t = ring123();
        let err = solve_deflated(&t, &RealField(vec![1.0, 0.0, 0.0]), &SolveConfig::default()).unwrap_err();
        assert!(matches!(err, Error::NonZeroMean { .. }));
    }

    #[test]
    fn bad_config() {
        let t = ring123();
        let g = local_drift(&t, 0).unwrap();
        let cfg = SolveConfig { tol: 0.0, ..Default::default() };
        assert!(solve_corrector(&t, 1.0, &g, &cfg).is_err());
        let cfg = SolveConfig { max_iter: 0, ..Default::default() };
        assert!(solve_corrector(&t, 1.0, &g, &cfg).is_err());
    }

    #[test]
    fn iteration_cap_is_an_error() {
        let nbhd = Neighborhood::nearest(1);
        let cond: Vec<f64> = (0..64).map(|i| 1.0 + (i % 7) as f64).collect();
        let t = TorusModel::from_conductances(nbhd, 64, cond).unwrap();
        let g = local_drift(&t, 0).unwrap();
        for method in [Method::CoupledRealMinres, Method::Cocg] {
            let cfg = SolveConfig { max_iter: 2, tol: 1e-12, method, ..Default::default() };
            match solve_corrector(&t, 0.01, &g, &cfg) {
                Err(Error::NotConverged { residual, .. }) => assert!(residual > 1e-12),
                other => panic!("expected NotConverged, got {other:?}"),
            }
        }
    }

    #[test]
    fn dense_cap_enforced() {
        let t = TorusModel::constant(Neighborhood::nearest(2), 5, 1.0).unwrap();
        let err = dense_solve(&t, 1.0, &RealField::zeros(25), 10).unwrap_err();
        assert!(matches!(err, Error::DenseCapExceeded { sites: 25, cap: 10 }));
    }

    #[test]
    fn dense_solution_has_small_residual() {
        let t = ring123();
        let g = local_drift(&t, 0).unwrap();
        let th = dense_solve(&t, 1.0, &g, 4096).unwrap();
        assert!(corrector_residual(&t, 1.0, &th, &g) <= 1e-10);
    }
}
