//! Assembly of the complex mobility matrix `sigma_N(omega)` and the algebraic
//! identities it satisfies on a finite torus.
//!
//! ```text
//! sigma_jk = sum_{z in N} m_N[c_{.,.+z}] z_j z_k - 2 <gamma_j, theta_k>
//! (i omega - L) theta_k = gamma_k
//! ```

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::TorusModel;
use crate::error::{Error, Result};
use crate::io::Sig17;
use crate::ode::{dopri45, AdaptiveConfig};
use crate::solver::{self, solve_deflated, SolveConfig, SolveReport};
use crate::torus::{
    dirichlet_form, drift_along, generator_apply, local_drift, real_inner, ComplexField, RealField,
};

/// `d x d` complex mobility matrix at frequency `omega` on the torus of side `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct MobilityMatrix {
    pub n: usize,
    pub omega: f64,
    pub entries: Vec<Vec<Complex64>>,
}

impl MobilityMatrix {
    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn get(&self, j: usize, k: usize) -> Complex64 {
        self.entries[j][k]
    }

    pub fn conj(&self) -> MobilityMatrix {
        MobilityMatrix {
            n: self.n,
            omega: -self.omega,
            entries: self.entries.iter().map(|r| r.iter().map(|v| v.conj()).collect()).collect(),
        }
    }

    /// Entrywise maximum of `|self - other|`.
    pub fn max_abs_diff(&self, other: &MobilityMatrix) -> f64 {
        self.entries
            .iter()
            .flatten()
            .zip(other.entries.iter().flatten())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Entrywise maximum of `|self - c I|`.
    pub fn max_abs_diff_scalar(&self, c: f64) -> f64 {
        let mut worst = 0.0f64;
        for (j, row) in self.entries.iter().enumerate() {
            for (k, v) in row.iter().enumerate() {
                let target = if j == k { c } else { 0.0 };
                worst = worst.max((v - target).norm());
            }
        }
        worst
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().flatten().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// `a . sigma a`.
    pub fn quadratic(&self, a: &[f64]) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (j, row) in self.entries.iter().enumerate() {
            for (k, v) in row.iter().enumerate() {
                acc += v * a[j] * a[k];
            }
        }
        acc
    }

    /// `sigma v`.
    pub fn apply(&self, v: &[f64]) -> Vec<Complex64> {
        self.entries.iter().map(|row| row.iter().zip(v).map(|(s, x)| s * x).sum()).collect()
    }

    pub fn is_symmetric(&self) -> bool {
        let d = self.dim();
        (0..d).all(|j| (0..d).all(|k| self.entries[j][k] == self.entries[k][j]))
    }

    pub fn is_finite(&self) -> bool {
        self.entries.iter().flatten().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    /// Long-form CSV with header `j,k,re,im`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("j,k,re,im\n");
        for (j, row) in self.entries.iter().enumerate() {
            for (k, v) in row.iter().enumerate() {
                out.push_str(&format!("{j},{k},{:.16e},{:.16e}\n", v.re, v.im));
            }
        }
        out
    }

    pub fn record(&self, solver: SolverSummary) -> MatrixRecord {
        MatrixRecord {
            n: self.n,
            omega: Sig17(self.omega),
            sigma: self
                .entries
                .iter()
                .map(|r| r.iter().map(|v| ComplexEntry { re: Sig17(v.re), im: Sig17(v.im) }).collect())
                .collect(),
            solver,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexEntry {
    pub re: Sig17,
    pub im: Sig17,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverSummary {
    pub iterations: usize,
    pub residual: Sig17,
}

/// JSON form `{n, omega, sigma: [[{re, im}]], solver: {iterations, residual}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixRecord {
    pub n: usize,
    pub omega: Sig17,
    pub sigma: Vec<Vec<ComplexEntry>>,
    pub solver: SolverSummary,
}

impl MatrixRecord {
    pub fn matrix(&self) -> MobilityMatrix {
        MobilityMatrix {
            n: self.n,
            omega: self.omega.0,
            entries: self.sigma.iter().map(|r| r.iter().map(|e| Complex64::new(e.re.0, e.im.0)).collect()).collect(),
        }
    }
}

/// A mobility matrix with the correctors and solver diagnostics behind it.
#[derive(Debug, Clone)]
pub struct MobilityReport {
    pub sigma: MobilityMatrix,
    /// `theta_k` for each coordinate direction.
    pub correctors: Vec<ComplexField>,
    pub solves: Vec<SolveReport>,
    /// `max_{j<k} |<gamma_j, theta_k> - <gamma_k, theta_j>|`. The matrix itself
    /// is assembled from the upper triangle and mirrored.
    pub symmetry_defect: f64,
}

impl MobilityReport {
    pub fn iterations(&self) -> usize {
        self.solves.iter().map(|s| s.iterations).sum()
    }

    pub fn residual(&self) -> f64 {
        self.solves.iter().map(|s| s.residual).fold(0.0, f64::max)
    }

    pub fn summary(&self) -> SolverSummary {
        SolverSummary { iterations: self.iterations(), residual: Sig17(self.residual()) }
    }

    pub fn record(&self) -> MatrixRecord {
        self.sigma.record(self.summary())
    }
}

/// `sum_{z in N} m_N[c_{.,.+z}] z_j z_k`.
pub fn jump_second_moment(model: &TorusModel) -> Vec<Vec<f64>> {
    let d = model.dim();
    let mut m = vec![vec![0.0; d]; d];
    for (zi, z) in model.neighborhood().half_set().iter().enumerate() {
        // z and -z contribute the same z_j z_k
        let w = model.mean_cond(zi) + model.mean_cond_back(zi);
        for j in 0..d {
            for k in 0..d {
                m[j][k] += w * (z[j] * z[k]) as f64;
            }
        }
    }
    m
}

fn drifts(model: &TorusModel) -> Vec<RealField> {
    (0..model.dim()).map(|k| local_drift(model, k).expect("direction in range")).collect()
}

fn assemble(model: &TorusModel, omega: f64, gammas: &[RealField], correctors: &[ComplexField]) -> (MobilityMatrix, f64) {
    let d = model.dim();
    let first = jump_second_moment(model);
    let mut entries = vec![vec![Complex64::new(0.0, 0.0); d]; d];
    let mut defect = 0.0f64;
    let pair = |j: usize, k: usize| {
        Complex64::new(real_inner(&gammas[j].0, &correctors[k].re), real_inner(&gammas[j].0, &correctors[k].im))
    };
    for j in 0..d {
        for k in j..d {
            let gt = pair(j, k);
            if k > j {
                defect = defect.max((gt - pair(k, j)).norm());
            }
            let v = Complex64::new(first[j][k], 0.0) - 2.0 * gt;
            entries[j][k] = v;
            entries[k][j] = v;
        }
    }
    (MobilityMatrix { n: model.n(), omega, entries }, defect)
}

fn signed_report(model: &TorusModel, omega: f64, cfg: &SolveConfig, warm: Option<&[ComplexField]>) -> Result<MobilityReport> {
    let gammas = drifts(model);
    let solved: Vec<(ComplexField, SolveReport)> = (0..model.dim())
        .into_par_iter()
        .map(|k| solver::solve_signed(model, omega, &gammas[k], cfg, warm.map(|w| &w[k])))
        .collect::<Result<_>>()?;
    let (correctors, solves): (Vec<_>, Vec<_>) = solved.into_iter().unzip();
    let (sigma, symmetry_defect) = assemble(model, omega, &gammas, &correctors);
    Ok(MobilityReport { sigma, correctors, solves, symmetry_defect })
}

fn check_omega(omega: f64) -> Result<()> {
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "mobility needs omega > 0, got {omega}; use diffusion_matrix for omega = 0"
        )));
    }
    Ok(())
}

/// Mobility matrix with its correctors and diagnostics; `d` corrector solves.
pub fn mobility_report(model: &TorusModel, omega: f64, cfg: &SolveConfig) -> Result<MobilityReport> {
    check_omega(omega)?;
    signed_report(model, omega, cfg, None)
}

pub fn mobility_matrix(model: &TorusModel, omega: f64, cfg: &SolveConfig) -> Result<MobilityMatrix> {
    Ok(mobility_report(model, omega, cfg)?.sigma)
}

/// `sigma_N(-omega)`, obtained by solving the block system with the sign of
/// the frequency flipped. Equals `conj(sigma_N(omega))`.
pub fn mobility_matrix_reflected(model: &TorusModel, omega: f64, cfg: &SolveConfig) -> Result<MobilityMatrix> {
    check_omega(omega)?;
    Ok(signed_report(model, -omega, cfg, None)?.sigma)
}

/// Mobility matrices over a list of frequencies, each solve warm-started from
/// the previous frequency's correctors.
pub fn mobility_sweep(model: &TorusModel, omegas: &[f64], cfg: &SolveConfig) -> Result<Vec<MobilityReport>> {
    let mut out: Vec<MobilityReport> = Vec::with_capacity(omegas.len());
    for &omega in omegas {
        check_omega(omega)?;
        let warm = out.last().map(|r| r.correctors.as_slice());
        out.push(signed_report(model, omega, cfg, warm)?);
    }
    Ok(out)
}

/// The `omega = 0` mobility: the diffusion matrix, built from the zero-mean
/// solutions of `-L theta_k = gamma_k`. Real symmetric positive semidefinite.
pub fn diffusion_report(model: &TorusModel, cfg: &SolveConfig) -> Result<MobilityReport> {
    let gammas = drifts(model);
    let solved: Vec<(RealField, SolveReport)> = gammas.par_iter().map(|g| solve_deflated(model, g, cfg)).collect::<Result<_>>()?;
    let (thetas, solves): (Vec<_>, Vec<_>) = solved.into_iter().unzip();
    let correctors: Vec<ComplexField> = thetas.iter().map(|t| t.to_complex()).collect();
    let (sigma, symmetry_defect) = assemble(model, 0.0, &gammas, &correctors);
    Ok(MobilityReport { sigma, correctors, solves, symmetry_defect })
}

pub fn diffusion_matrix(model: &TorusModel, cfg: &SolveConfig) -> Result<MobilityMatrix> {
    Ok(diffusion_report(model, cfg)?.sigma)
}

/// Both sides of the two energy identities for a corrector `theta` solving
/// `(i omega - L) theta = rhs`:
///
/// ```text
/// omega ||theta||^2                       = -<theta_I, rhs>
/// <theta_R, -L theta_R> + <theta_I, -L theta_I> = <theta_R, rhs>
/// ```
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyCheck {
    pub norm_lhs: f64,
    pub norm_rhs: f64,
    pub energy_lhs: f64,
    pub energy_rhs: f64,
}

fn rel_gap(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

impl EnergyCheck {
    pub fn norm_rel_error(&self) -> f64 {
        rel_gap(self.norm_lhs, self.norm_rhs)
    }

    pub fn energy_rel_error(&self) -> f64 {
        rel_gap(self.energy_lhs, self.energy_rhs)
    }

    pub fn max_rel_error(&self) -> f64 {
        self.norm_rel_error().max(self.energy_rel_error())
    }
}

pub fn energy_identities(model: &TorusModel, omega: f64, theta: &ComplexField, rhs: &RealField) -> EnergyCheck {
    let n = model.sites();
    let mut lre = vec![0.0; n];
    let mut lim = vec![0.0; n];
    generator_apply(model, &theta.re, &mut lre);
    generator_apply(model, &theta.im, &mut lim);
    EnergyCheck {
        norm_lhs: omega * theta.norm_sqr(),
        norm_rhs: -real_inner(&theta.im, &rhs.0),
        energy_lhs: -real_inner(&theta.re, &lre) - real_inner(&theta.im, &lim),
        energy_rhs: real_inner(&theta.re, &rhs.0),
    }
}

/// `a . sigma a` evaluated directly and through the corrector along `a`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraticSplit {
    /// `a . sigma a` from the assembled matrix.
    pub direct_re: f64,
    pub direct_im: f64,
    /// `sum_z m_N[c] (z.a)^2 - 2 E(theta, theta)` with `E` the Dirichlet form.
    pub energy_re: f64,
    /// `2 omega ||theta||^2`.
    pub energy_im_abs: f64,
    pub theta_norm_sqr: f64,
    pub dirichlet: f64,
    pub re_discrepancy: f64,
    /// `| |direct_im| - energy_im_abs |`.
    pub im_discrepancy: f64,
    /// Sign of `direct_im` as observed (`+1`, `-1` or `0`).
    pub im_sign: i8,
}

pub fn quadratic_form_split(model: &TorusModel, omega: f64, a: &[f64], cfg: &SolveConfig) -> Result<QuadraticSplit> {
    check_omega(omega)?;
    if a.len() != model.dim() || a.iter().all(|v| *v == 0.0) || !a.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidArgument("direction a must be a finite nonzero d-vector".into()));
    }
    let sigma = mobility_matrix(model, omega, cfg)?;
    let direct = sigma.quadratic(a);
    let gamma = drift_along(model, a);
    let (theta, _) = solver::solve_corrector(model, omega, &gamma, cfg)?;
    let first: f64 = {
        let m = jump_second_moment(model);
        (0..a.len()).map(|j| (0..a.len()).map(|k| m[j][k] * a[j] * a[k]).sum::<f64>()).sum()
    };
    let dirichlet = dirichlet_form(model, &theta, &theta).re;
    let theta_norm_sqr = theta.norm_sqr();
    let energy_re = first - 2.0 * dirichlet;
    let energy_im_abs = 2.0 * omega * theta_norm_sqr;
    Ok(QuadraticSplit {
        direct_re: direct.re,
        direct_im: direct.im,
        energy_re,
        energy_im_abs,
        theta_norm_sqr,
        dirichlet,
        re_discrepancy: (direct.re - energy_re).abs(),
        im_discrepancy: (direct.im.abs() - energy_im_abs).abs(),
        im_sign: if direct.im > 0.0 {
            1
        } else if direct.im < 0.0 {
            -1
        } else {
            0
        },
    })
}

/// `2 sum_{z in N_*} N^{-d} sum_x c_{x,x+z} z_j (z_k + theta_k(x+z) - theta_k(x))`
/// from given correctors.
pub fn gradient_formula_sigma(model: &TorusModel, omega: f64, correctors: &[ComplexField]) -> MobilityMatrix {
    let d = model.dim();
    let n = model.sites();
    let half = model.neighborhood().half_set();
    let mut entries = vec![vec![Complex64::new(0.0, 0.0); d]; d];
    for j in 0..d {
        for k in 0..d {
            let th = &correctors[k];
            let mut acc_re = 0.0;
            let mut acc_im = 0.0;
            for (zi, z) in half.iter().enumerate() {
                if z[j] == 0 {
                    continue;
                }
                let zj = z[j] as f64;
                let zk = z[k] as f64;
                let re = crate::torus::pairwise(0, n, &|x| {
                    model.cond(x, zi) * (zk + th.re[model.fwd(x, zi)] - th.re[x])
                });
                let im = crate::torus::pairwise(0, n, &|x| model.cond(x, zi) * (th.im[model.fwd(x, zi)] - th.im[x]));
                acc_re += zj * re;
                acc_im += zj * im;
            }
            entries[j][k] = Complex64::new(acc_re, acc_im) * (2.0 / n as f64);
        }
    }
    MobilityMatrix { n: model.n(), omega, entries }
}

/// Maximum entrywise deviation between the gradient form and the assembled
/// mobility matrix.
pub fn gradient_formula_check(model: &TorusModel, omega: f64, cfg: &SolveConfig) -> Result<f64> {
    let report = mobility_report(model, omega, cfg)?;
    Ok(gradient_formula_sigma(model, omega, &report.correctors).max_abs_diff(&report.sigma))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeIntegralConfig {
    /// Hard upper limit of the integration variable.
    pub s_max: f64,
    pub max_steps: usize,
    pub rtol: f64,
    pub atol: f64,
    /// Stop once `||e^{Ls} gamma|| <= decay_target ||gamma||` and the tail
    /// estimate is below `tail_tol / 10`.
    pub decay_target: f64,
    pub tail_tol: f64,
}

impl Default for TimeIntegralConfig {
    fn default() -> Self {
        Self { s_max: 1e4, max_steps: 2_000_000, rtol: 1e-10, atol: 1e-13, decay_target: 1e-10, tail_tol: 1e-10 }
    }
}

#[derive(Debug, Clone)]
pub struct TimeIntegralReport {
    pub sigma: MobilityMatrix,
    /// Largest tail estimate over the `d` integrations.
    pub tail: f64,
    /// Largest stopping point reached.
    pub s_end: f64,
    pub steps: usize,
    /// Largest `||g(s_end)|| / ||gamma||` over directions.
    pub decay: f64,
}

struct DecayTrace {
    t: Vec<f64>,
    norm: Vec<f64>,
}

impl DecayTrace {
    /// Exponential rate fitted over the second half of the trace.
    fn rate(&self) -> f64 {
        let Some(&t_end) = self.t.last() else { return 0.0 };
        let i = self.t.partition_point(|&s| s < 0.5 * t_end);
        let (t0, n0) = (self.t[i], self.norm[i]);
        let n1 = *self.norm.last().unwrap();
        if t_end <= t0 || n0 <= 0.0 || n1 <= 0.0 {
            return 0.0;
        }
        (n0 / n1).ln() / (t_end - t0)
    }
}

/// Mobility matrix with the resolvent term replaced by
/// `int_0^s e^{-i omega s} <gamma_j, e^{L s} gamma_k> ds`, integrated by an
/// adaptive Dormand-Prince scheme on `dg/ds = L g`, `g(0) = gamma_k`.
pub fn time_integral_mobility(model: &TorusModel, omega: f64, cfg: &TimeIntegralConfig) -> Result<TimeIntegralReport> {
    if !(omega.is_finite() && omega >= 0.0) {
        return Err(Error::InvalidArgument(format!("omega must be finite and non-negative, got {omega}")));
    }
    if !(cfg.s_max > 0.0 && cfg.rtol > 0.0 && cfg.atol > 0.0 && cfg.tail_tol > 0.0 && cfg.decay_target > 0.0) {
        return Err(Error::InvalidArgument("time-integral tolerances and s_max must be positive".into()));
    }
    let d = model.dim();
    let n = model.sites();
    let gammas = drifts(model);
    let first = jump_second_moment(model);
    let h0 = 0.1 / model.max_exit_rate();
    let acfg = AdaptiveConfig { rtol: cfg.rtol, atol: cfg.atol, max_steps: cfg.max_steps, h0 };

    struct Column {
        integrals: Vec<Complex64>,
        tail: f64,
        s_end: f64,
        steps: usize,
        decay: f64,
    }
    let columns: Vec<Column> = (0..d)
        .into_par_iter()
        .map(|k| -> Result<Column> {
            let gnorm0 = gammas[k].norm();
            let gnorms: Vec<f64> = gammas.iter().map(|g| g.norm()).collect();
            let mut y = vec![0.0; n + 2 * d];
            y[..n].copy_from_slice(&gammas[k].0);
            let mut rhs = |s: f64, y: &[f64], out: &mut [f64]| {
                let (g, _) = y.split_at(n);
                let (lg, integ) = out.split_at_mut(n);
                generator_apply(model, g, lg);
                let (sn, cs) = (omega * s).sin_cos();
                for j in 0..d {
                    let v = real_inner(&gammas[j].0, g);
                    integ[2 * j] = cs * v;
                    integ[2 * j + 1] = -sn * v;
                }
            };
            let mut trace = DecayTrace { t: vec![0.0], norm: vec![gnorm0] };
            let max_gnorm = gnorms.iter().cloned().fold(0.0, f64::max);
            let tail_of = |trace: &DecayTrace, gn: f64| {
                if gn == 0.0 {
                    return 0.0;
                }
                let r = trace.rate();
                if r <= 0.0 {
                    f64::INFINITY
                } else {
                    2.0 * max_gnorm * gn / r
                }
            };
            let mut stop = |s: f64, y: &[f64]| {
                let gn = real_inner(&y[..n], &y[..n]).sqrt();
                trace.t.push(s);
                trace.norm.push(gn);
                gn <= cfg.decay_target * gnorm0 && tail_of(&trace, gn) <= 0.1 * cfg.tail_tol
            };
            let (s_end, steps) = if gnorm0 == 0.0 {
                (0.0, 0)
            } else {
                let out = dopri45(&mut rhs, &mut y, 0.0, cfg.s_max, &acfg, &mut stop)?;
                (out.t, out.steps)
            };
            let gn = real_inner(&y[..n], &y[..n]).sqrt();
            let tail = tail_of(&trace, gn);
            let decay = if gnorm0 == 0.0 { 0.0 } else { gn / gnorm0 };
            if tail > cfg.tail_tol {
                return Err(Error::QuadratureTail { tail, tol: cfg.tail_tol, decay });
            }
            let integrals = (0..d).map(|j| Complex64::new(y[n + 2 * j], y[n + 2 * j + 1])).collect();
            Ok(Column { integrals, tail, s_end, steps, decay })
        })
        .collect::<Result<_>>()?;

    let mut entries = vec![vec![Complex64::new(0.0, 0.0); d]; d];
    for j in 0..d {
        for k in j..d {
            let v = Complex64::new(first[j][k], 0.0) - 2.0 * columns[k].integrals[j];
            entries[j][k] = v;
            entries[k][j] = v;
        }
    }
    Ok(TimeIntegralReport {
        sigma: MobilityMatrix { n: model.n(), omega, entries },
        tail: columns.iter().map(|c| c.tail).fold(0.0, f64::max),
        s_end: columns.iter().map(|c| c.s_end).fold(0.0, f64::max),
        steps: columns.iter().map(|c| c.steps).sum(),
        decay: columns.iter().map(|c| c.decay).fold(0.0, f64::max),
    })
}
