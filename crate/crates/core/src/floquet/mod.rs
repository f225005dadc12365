//! Linear-response validation through the periodically driven walk.
//!
//! Under the drive `lambda cos(omega t) v` the rate of a jump `x -> x+z` is
//! `c_{x,x+z} exp(lambda cos(omega t) z.v)`. The law of the walker obeys the
//! forward equation, whose one-period propagator has a unique fixed point:
//! the oscillatory steady state (OSS) at phase 0, i.e. at times `t = kT`.
//! Differentiating the OSS mean velocity in `lambda` recovers
//! `Re(e^{i omega t} sigma_N(omega) v)`.

mod walk;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use walk::{simulate_walk, WalkConfig, WalkEstimate};

use crate::env::TorusModel;
use crate::error::{Error, Result};
use crate::io::Sig17;
use crate::mobility::mobility_matrix;
use crate::ode::{rk4_step, Rk4Work};
use crate::solver::SolveConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveSpec {
    pub omega: f64,
    pub lambda: f64,
    pub v: Vec<f64>,
}

impl DriveSpec {
    pub fn new(omega: f64, lambda: f64, v: Vec<f64>) -> Result<Self> {
        let d = Self { omega, lambda, v };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega > 0.0 && self.omega.is_finite()) {
            return Err(Error::InvalidArgument(format!("drive frequency must be positive, got {}", self.omega)));
        }
        if !self.lambda.is_finite() {
            return Err(Error::InvalidArgument("drive intensity must be finite".into()));
        }
        if self.v.is_empty() || self.v.iter().all(|x| *x == 0.0) || !self.v.iter().all(|x| x.is_finite()) {
            return Err(Error::InvalidArgument("drive direction must be a finite nonzero vector".into()));
        }
        Ok(())
    }

    pub fn period(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.omega
    }

    pub fn with_lambda(&self, lambda: f64) -> Self {
        Self { lambda, ..self.clone() }
    }

    /// `lambda cos(omega t)`.
    pub fn field(&self, t: f64) -> f64 {
        self.lambda * (self.omega * t).cos()
    }

    fn check_dim(&self, model: &TorusModel) -> Result<()> {
        self.validate()?;
        if self.v.len() != model.dim() {
            return Err(Error::InvalidArgument(format!(
                "drive direction has {} components for d = {}",
                self.v.len(),
                model.dim()
            )));
        }
        Ok(())
    }
}

/// Probability vector over torus sites.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Distribution(pub Vec<f64>);

impl Distribution {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() || p.iter().any(|x| !x.is_finite() || *x < -1e-12) {
            return Err(Error::InvalidArgument("distribution entries must be finite and non-negative".into()));
        }
        let mass: f64 = p.iter().sum();
        if (mass - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!("distribution has mass {mass}")));
        }
        Ok(Self(p))
    }

    pub fn uniform(sites: usize) -> Self {
        Self(vec![1.0 / sites as f64; sites])
    }

    pub fn point(sites: usize, at: usize) -> Self {
        let mut p = vec![0.0; sites];
        p[at] = 1.0;
        Self(p)
    }

    pub fn mass(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn min(&self) -> f64 {
        self.0.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn total_variation(&self, other: &Distribution) -> f64 {
        0.5 * self.0.iter().zip(&other.0).map(|(a, b)| (a - b).abs()).sum::<f64>()
    }

    /// Copy with negative round-off clipped and mass renormalized, for
    /// reporting only.
    pub fn cleaned(&self) -> Distribution {
        let clipped: Vec<f64> = self.0.iter().map(|x| x.max(0.0)).collect();
        let m: f64 = clipped.iter().sum();
        Distribution(clipped.into_iter().map(|x| x / m).collect())
    }
}

/// `rate(x, z)` for all sites and all `z` in the full neighbourhood, in the
/// order of [`crate::env::Neighborhood::full_set`].
#[derive(Debug, Clone, PartialEq)]
pub struct RateField {
    jumps: usize,
    values: Vec<f64>,
}

impl RateField {
    pub fn get(&self, site: usize, zi: usize) -> f64 {
        self.values[site * self.jumps + zi]
    }

    pub fn exit_rate(&self, site: usize) -> f64 {
        self.values[site * self.jumps..(site + 1) * self.jumps].iter().sum()
    }
}

fn projections(model: &TorusModel, v: &[f64]) -> Vec<f64> {
    model
        .neighborhood()
        .half_set()
        .iter()
        .map(|z| z.iter().zip(v).map(|(a, b)| *a as f64 * b).sum())
        .collect()
}

pub fn perturbed_rates(model: &TorusModel, drive: &DriveSpec, t: f64) -> Result<RateField> {
    drive.check_dim(model)?;
    let m = model.neighborhood().half_len();
    let proj = projections(model, &drive.v);
    let phi = drive.field(t);
    let mut values = Vec::with_capacity(model.sites() * 2 * m);
    for x in 0..model.sites() {
        for zi in 0..m {
            values.push(if phi == 0.0 { model.cond(x, zi) } else { model.cond(x, zi) * (phi * proj[zi]).exp() });
        }
        for zi in 0..m {
            values.push(if phi == 0.0 { model.cond_back(x, zi) } else { model.cond_back(x, zi) * (-phi * proj[zi]).exp() });
        }
    }
    Ok(RateField { jumps: 2 * m, values })
}

/// `max_x sum_z c_{x,x+z} e^{|lambda| |z.v|}`, an upper bound on every exit
/// rate along the drive.
pub fn rate_majorant(model: &TorusModel, drive: &DriveSpec) -> f64 {
    let proj = projections(model, &drive.v);
    let m = proj.len();
    (0..model.sites())
        .map(|x| {
            (0..m)
                .map(|zi| (model.cond(x, zi) + model.cond_back(x, zi)) * (drive.lambda.abs() * proj[zi].abs()).exp())
                .sum::<f64>()
        })
        .fold(0.0, f64::max)
}

/// Smallest RK4 step count per period meeting `h <= 0.1 / max exit rate`.
pub fn min_steps(model: &TorusModel, drive: &DriveSpec) -> usize {
    (10.0 * drive.period() * rate_majorant(model, drive)).ceil() as usize
}

/// Right-hand side of the forward equation at time `t`.
struct Forward<'a> {
    model: &'a TorusModel,
    drive: &'a DriveSpec,
    proj: Vec<f64>,
}

impl<'a> Forward<'a> {
    fn new(model: &'a TorusModel, drive: &'a DriveSpec) -> Self {
        Self { model, drive, proj: projections(model, &drive.v) }
    }

    fn eval(&self, t: f64, p: &[f64], out: &mut [f64]) {
        let model = self.model;
        let phi = self.drive.field(t);
        let m = self.proj.len();
        let up: Vec<f64> = self.proj.iter().map(|z| (phi * z).exp()).collect();
        let down: Vec<f64> = self.proj.iter().map(|z| (-phi * z).exp()).collect();
        out.iter_mut().for_each(|o| *o = 0.0);
        for x in 0..p.len() {
            let px = p[x];
            if px == 0.0 {
                continue;
            }
            let mut exit = 0.0;
            for zi in 0..m {
                let f = model.cond(x, zi) * up[zi] * px;
                let b = model.cond_back(x, zi) * down[zi] * px;
                out[model.fwd(x, zi)] += f;
                out[model.bwd(x, zi)] += b;
                exit += f + b;
            }
            out[x] -= exit;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FloquetConfig {
    /// RK4 steps per period; `0` picks `ceil(50 T R)` rounded up to a
    /// multiple of 8, with `R` the rate majorant.
    pub steps_per_period: usize,
    /// Total-variation change between power iterates at which the OSS is
    /// accepted.
    pub oss_tol: f64,
    pub max_iter: usize,
}

impl Default for FloquetConfig {
    fn default() -> Self {
        Self { steps_per_period: 0, oss_tol: 1e-12, max_iter: 100_000 }
    }
}

impl FloquetConfig {
    pub fn steps(&self, model: &TorusModel, drive: &DriveSpec) -> usize {
        if self.steps_per_period > 0 {
            return self.steps_per_period;
        }
        let raw = (50.0 * drive.period() * rate_majorant(model, drive)).ceil() as usize;
        raw.max(64).div_ceil(8) * 8
    }
}

/// Integrates the forward equation from `t0` over `steps` RK4 steps of size `h`.
fn propagate(fwd: &Forward, p: &mut [f64], t0: f64, h: f64, steps: usize, work: &mut Rk4Work) {
    let mut f = |t: f64, y: &[f64], out: &mut [f64]| fwd.eval(t, y, out);
    for s in 0..steps {
        rk4_step(&mut f, t0 + s as f64 * h, h, p, work);
    }
}

/// One-period propagator `p(0) -> p(T)` as a dense column-stochastic matrix.
#[derive(Debug, Clone)]
pub struct PeriodMap {
    pub matrix: DMatrix<f64>,
    pub steps: usize,
    pub drive: DriveSpec,
}

impl PeriodMap {
    pub fn apply(&self, p: &Distribution) -> Distribution {
        let v = &self.matrix * nalgebra::DVector::from_column_slice(&p.0);
        Distribution(v.iter().copied().collect())
    }

    /// `max_x |sum_y P[y, x] - 1|`.
    pub fn mass_defect(&self) -> f64 {
        self.matrix.column_iter().map(|c| (c.sum() - 1.0).abs()).fold(0.0, f64::max)
    }
}

pub fn period_map(model: &TorusModel, drive: &DriveSpec, steps: usize) -> Result<PeriodMap> {
    drive.check_dim(model)?;
    let min = min_steps(model, drive);
    if steps < min {
        return Err(Error::TooFewSteps { steps, min });
    }
    let n = model.sites();
    let h = drive.period() / steps as f64;
    let fwd = Forward::new(model, drive);
    let columns: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|x| {
            let mut p = vec![0.0; n];
            p[x] = 1.0;
            let mut work = Rk4Work::new(n);
            propagate(&fwd, &mut p, 0.0, h, steps, &mut work);
            p
        })
        .collect();
    let matrix = DMatrix::from_fn(n, n, |i, j| columns[j][i]);
    Ok(PeriodMap { matrix, steps, drive: drive.clone() })
}

/// Fixed point of the period map by power iteration from the uniform law.
pub fn oss_distribution(map: &PeriodMap, cfg: &FloquetConfig) -> Result<Distribution> {
    let n = map.matrix.nrows();
    let mut p = nalgebra::DVector::from_element(n, 1.0 / n as f64);
    let mut change = f64::INFINITY;
    for _ in 0..cfg.max_iter {
        let next = &map.matrix * &p;
        change = 0.5 * (&next - &p).abs().sum();
        p = next;
        if change <= cfg.oss_tol {
            return Ok(Distribution(p.iter().copied().collect()));
        }
    }
    Err(Error::NoStationaryState { what: "oscillatory steady state", iterations: cfg.max_iter, change })
}

/// `V(t) = sum_x p_t(x) sum_z rate(x, z, t) z` for a law `p_t` at time `t`.
pub fn mean_velocity(model: &TorusModel, drive: &DriveSpec, p: &Distribution, t: f64) -> Result<Vec<f64>> {
    let rates = perturbed_rates(model, drive, t)?;
    let full = model.neighborhood().full_set();
    let mut v = vec![0.0; model.dim()];
    for x in 0..model.sites() {
        for (zi, z) in full.iter().enumerate() {
            let w = p.0[x] * rates.get(x, zi);
            for (k, zk) in z.iter().enumerate() {
                v[k] += w * *zk as f64;
            }
        }
    }
    Ok(v)
}

/// Laws at the requested times, starting from `p0` at `t = 0` and marching
/// the forward equation with step `T / steps`.
pub fn evolve_to_times(
    model: &TorusModel,
    drive: &DriveSpec,
    p0: &Distribution,
    times: &[f64],
    steps: usize,
) -> Result<Vec<Distribution>> {
    drive.check_dim(model)?;
    if times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(Error::InvalidArgument("times must be finite and non-negative".into()));
    }
    let n = model.sites();
    let h = drive.period() / steps as f64;
    let fwd = Forward::new(model, drive);
    let mut work = Rk4Work::new(n);
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|a, b| times[*a].total_cmp(&times[*b]));
    let mut out = vec![Distribution(Vec::new()); times.len()];
    let mut p = p0.0.clone();
    let mut done = 0usize;
    for idx in order {
        let t = times[idx];
        let whole = ((t / h) * (1.0 + 1e-14)).floor() as usize;
        if whole > done {
            propagate(&fwd, &mut p, done as f64 * h, h, whole - done, &mut work);
            done = whole;
        }
        let rest = t - done as f64 * h;
        let mut q = p.clone();
        if rest > 1e-14 * h.max(t) {
            let mut f = |s: f64, y: &[f64], o: &mut [f64]| fwd.eval(s, y, o);
            rk4_step(&mut f, done as f64 * h, rest, &mut q, &mut work);
        }
        out[idx] = Distribution(q);
    }
    Ok(out)
}

/// OSS at phase 0 for a drive.
pub fn oss_for(model: &TorusModel, drive: &DriveSpec, cfg: &FloquetConfig) -> Result<(Distribution, usize)> {
    let steps = cfg.steps(model, drive);
    let map = period_map(model, drive, steps)?;
    Ok((oss_distribution(&map, cfg)?, steps))
}

/// `V(t)` along the OSS at the given times.
pub fn oss_velocity(model: &TorusModel, drive: &DriveSpec, times: &[f64], cfg: &FloquetConfig) -> Result<Vec<Vec<f64>>> {
    let (oss, steps) = oss_for(model, drive, cfg)?;
    let laws = evolve_to_times(model, drive, &oss, times, steps)?;
    times.iter().zip(&laws).map(|(t, p)| mean_velocity(model, drive, p, *t)).collect()
}

/// Central difference `(V^{+lambda}(t) - V^{-lambda}(t)) / (2 lambda)`.
pub fn velocity_derivative(
    model: &TorusModel,
    drive: &DriveSpec,
    times: &[f64],
    cfg: &FloquetConfig,
) -> Result<Vec<Vec<f64>>> {
    if drive.lambda <= 0.0 {
        return Err(Error::InvalidArgument("finite-difference intensity must be positive".into()));
    }
    // one step count for both signs so the discretization errors cancel
    let steps = cfg.steps(model, drive);
    let cfg = FloquetConfig { steps_per_period: steps, ..*cfg };
    let plus = oss_velocity(model, drive, times, &cfg)?;
    let minus = oss_velocity(model, &drive.with_lambda(-drive.lambda), times, &cfg)?;
    Ok(plus
        .iter()
        .zip(&minus)
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y) / (2.0 * drive.lambda)).collect())
        .collect())
}

/// `n` equally spaced phases `t_i = i T / n` of the drive period.
pub fn phase_times(omega: f64, n: usize) -> Vec<f64> {
    let period = 2.0 * std::f64::consts::PI / omega;
    (0..n).map(|i| i as f64 * period / n as f64).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSample {
    pub t: Sig17,
    pub fd: Vec<Sig17>,
    pub predicted: Vec<Sig17>,
}

/// Comparison of the finite-difference velocity response with
/// `Re(e^{i omega t} sigma v)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearResponseReport {
    pub omega: Sig17,
    pub lambda: Sig17,
    pub times: Vec<Sig17>,
    /// `max_t ||D(t) - Re(e^{i omega t} sigma v)||_inf`.
    pub deviation: Sig17,
    pub per_time: Vec<TimeSample>,
    /// Richardson estimate `(4/3) max ||D_lambda - D_{lambda/2}||` of the
    /// `O(lambda^2)` part of the deviation.
    pub lambda_error_estimate: Sig17,
    /// `||e(lambda) - e(lambda/2)|| / ||e(lambda/2) - e(lambda/4)||` with
    /// `e` the signed error over all times and components; about 4 for a
    /// second-order difference.
    pub halving_ratio: Sig17,
    pub steps_per_period: usize,
}

impl LinearResponseReport {
    pub fn deviation(&self) -> f64 {
        self.deviation.0
    }

    pub fn halving_ratio(&self) -> f64 {
        self.halving_ratio.0
    }
}

fn max_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter().flatten().zip(b.iter().flatten()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn linear_response_check(
    model: &TorusModel,
    omega: f64,
    v: &[f64],
    lambda: f64,
    times: &[f64],
    cfg: &FloquetConfig,
    solve: &SolveConfig,
) -> Result<LinearResponseReport> {
    let drive = DriveSpec::new(omega, lambda, v.to_vec())?;
    drive.check_dim(model)?;
    if !(lambda > 0.0) {
        return Err(Error::InvalidArgument(format!("lambda must be positive, got {lambda}")));
    }
    let sigma = mobility_matrix(model, omega, solve)?;
    let sv = sigma.apply(v);
    let predicted: Vec<Vec<f64>> = times
        .iter()
        .map(|t| {
            let phase = num_complex::Complex64::from_polar(1.0, omega * t);
            sv.iter().map(|s| (phase * s).re).collect()
        })
        .collect();
    let steps = cfg.steps(model, &drive);
    let cfg = FloquetConfig { steps_per_period: steps, ..*cfg };
    let d1 = velocity_derivative(model, &drive, times, &cfg)?;
    let d2 = velocity_derivative(model, &drive.with_lambda(lambda / 2.0), times, &cfg)?;
    let d4 = velocity_derivative(model, &drive.with_lambda(lambda / 4.0), times, &cfg)?;
    let deviation = max_diff(&d1, &predicted);
    let first = max_diff(&d1, &d2);
    let second = max_diff(&d2, &d4);
    let halving_ratio = if second == 0.0 { f64::INFINITY } else { first / second };
    let per_time = times
        .iter()
        .zip(d1.iter().zip(&predicted))
        .map(|(t, (fd, pr))| TimeSample {
            t: Sig17(*t),
            fd: fd.iter().map(|x| Sig17(*x)).collect(),
            predicted: pr.iter().map(|x| Sig17(*x)).collect(),
        })
        .collect();
    Ok(LinearResponseReport {
        omega: Sig17(omega),
        lambda: Sig17(lambda),
        times: times.iter().map(|t| Sig17(*t)).collect(),
        deviation: Sig17(deviation),
        per_time,
        lambda_error_estimate: Sig17(4.0 / 3.0 * first),
        halving_ratio: Sig17(if halving_ratio.is_finite() { halving_ratio } else { f64::MAX }),
        steps_per_period: steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{periodize, sample_field, EnvironmentSpec, Law, Neighborhood};
    use nalgebra::{DVector, SVD};

    fn ring123() -> TorusModel {
        TorusModel::from_conductances(Neighborhood::nearest(1), 3, vec![1.0, 2.0, 3.0]).unwrap()
    }

    fn iid1(n: usize, seed: u64) -> TorusModel {
        let nbhd = Neighborhood::nearest(1);
        let spec = EnvironmentSpec::iid(Law::Uniform { a: 1.0, b: 2.0 }, seed);
        periodize(&sample_field(&spec, &nbhd, vec![0], vec![n as i64]).unwrap(), n).unwrap()
    }

    #[test]
    fn rates() {
        let t = TorusModel::constant(Neighborhood::nearest(1), 3, 1.0).unwrap();
        let drive = DriveSpec::new(1.0, 0.1, vec![1.0]).unwrap();
        let r = perturbed_rates(&t, &drive, 0.0).unwrap();
        assert_eq!(r.get(0, 0), 0.1f64.exp());
        assert_eq!(r.get(0, 1), (-0.1f64).exp());
        let q = perturbed_rates(&ring123(), &drive, drive.period() / 4.0).unwrap();
        for x in 0..3 {
            assert!((q.get(x, 0) - ring123().cond(x, 0)).abs() < 1e-15);
        }
        let z = perturbed_rates(&ring123(), &drive.with_lambda(0.0), 1.3).unwrap();
        assert_eq!(z.get(2, 0), 3.0);
        assert_eq!(z.get(0, 1), 3.0);
    }

    #[test]
    fn drive_validation() {
        assert!(DriveSpec::new(0.0, 0.1, vec![1.0]).is_err());
        assert!(DriveSpec::new(1.0, 0.1, vec![0.0]).is_err());
        let drive = DriveSpec::new(1.0, 0.1, vec![1.0, 0.0]).unwrap();
        assert!(perturbed_rates(&ring123(), &drive, 0.0).is_err());
    }

    #[test]
    fn step_count_validated() {
        let drive = DriveSpec::new(1.0, 0.1, vec![1.0]).unwrap();
        let t = ring123();
        let min = min_steps(&t, &drive);
        assert!(matches!(period_map(&t, &drive, min - 1), Err(Error::TooFewSteps { .. })));
        assert!(period_map(&t, &drive, min).is_ok());
    }

    #[test]
    fn unperturbed_map_keeps_uniform() {
        let t = iid1(6, 1);
        let drive = DriveSpec::new(1.0, 0.0, vec![1.0]).unwrap();
        let map = period_map(&t, &drive, FloquetConfig::default().steps(&t, &drive)).unwrap();
        let u = Distribution::uniform(6);
        assert!(map.apply(&u).total_variation(&u) < 1e-12);
        assert!(map.mass_defect() < 1e-12);
        let oss = oss_distribution(&map, &FloquetConfig::default()).unwrap();
        assert!(oss.total_variation(&u) < 1e-12);
        let v = mean_velocity(&t, &drive, &oss, 0.3).unwrap();
        assert!(v[0].abs() < 1e-12);
    }

    #[test]
    fn driven_map_is_stochastic() {
        let t = ring123();
        let drive = DriveSpec::new(1.0, 0.5, vec![1.0]).unwrap();
        let map = period_map(&t, &drive, FloquetConfig::default().steps(&t, &drive)).unwrap();
        assert!(map.mass_defect() < 1e-10);
        assert!(map.matrix.iter().all(|v| *v >= -1e-12));
    }

    #[test]
    fn oss_fixed_point_and_null_vector() {
        let t = ring123();
        let drive = DriveSpec::new(1.0, 0.1, vec![1.0]).unwrap();
        let cfg = FloquetConfig::default();
        let map = period_map(&t, &drive, cfg.steps(&t, &drive)).unwrap();
        let oss = oss_distribution(&map, &cfg).unwrap();
        assert!(map.apply(&oss).total_variation(&oss) < 1e-10);
        assert!((oss.mass() - 1.0).abs() < 1e-12);
        // right singular vector of P - I for the smallest singular value
        let a = &map.matrix - nalgebra::DMatrix::identity(3, 3);
        let svd = SVD::new(a, true, true);
        let (i, _) = svd.singular_values.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).unwrap();
        let row = svd.v_t.unwrap().row(i).transpose();
        let null: DVector<f64> = &row / row.sum();
        for x in 0..3 {
            assert!((null[x] - oss.0[x]).abs() < 1e-9);
        }
        // finer integration agrees
        let fine = period_map(&t, &drive, 4 * map.steps).unwrap();
        let oss_fine = oss_distribution(&fine, &cfg).unwrap();
        assert!(oss.0.iter().zip(&oss_fine.0).all(|(a, b)| (a - b).abs() < 1e-8));
        // shifting the time origin by one period changes nothing
        let later = evolve_to_times(&t, &drive, &oss, &[drive.period()], map.steps).unwrap();
        assert!(later[0].total_variation(&oss) < 1e-10);
    }

    #[test]
    fn constant_environment_response() {
        let t = TorusModel::constant(Neighborhood::nearest(2), 4, 1.5).unwrap();
        let times = phase_times(1.0, 4);
        let rep = linear_response_check(&t, 1.0, &[1.0, 0.0], 1e-3, &times, &FloquetConfig::default(), &SolveConfig::default())
            .unwrap();
        for s in &rep.per_time {
            assert!((s.predicted[0].0 - 3.0 * s.t.0.cos()).abs() < 1e-12);
            assert!((s.fd[0].0 - s.predicted[0].0).abs() < 1e-6);
        }
    }

    #[test]
    fn linear_response_iid_ring() {
        let t = iid1(5, 42);
        let times = phase_times(1.0, 8);
        let solve = SolveConfig::default().with_tol(1e-12);
        let rep = linear_response_check(&t, 1.0, &[1.0], 1e-3, &times, &FloquetConfig::default(), &solve).unwrap();
        eprintln!("deviation {:e} ratio {} est {:e}", rep.deviation(), rep.halving_ratio(), rep.lambda_error_estimate.0);
        assert!(rep.deviation() <= 1e-4);
        assert!((3.0..=5.0).contains(&rep.halving_ratio()));
    }
}
