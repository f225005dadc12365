//! Seeded sweeps over the torus side and the convergence summary built on them.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::{ergodic_average, periodize, sample_field, EnvironmentSpec, Neighborhood};
use crate::error::{Error, Result};
use crate::io::Sig17;
use crate::mobility::{diffusion_report, mobility_report, MobilityMatrix, MobilityReport};
use crate::solver::SolveConfig;
use crate::torus::dirichlet_form;

/// One `(n, omega, seed)` cell of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub n: usize,
    pub seed: u64,
    pub omega: f64,
    pub sigma: MobilityMatrix,
    pub iterations: usize,
    pub residual: f64,
    pub symmetry_defect: f64,
    /// `N^{-d} sum_x c_{x,x+z}` per half-set jump.
    pub avg_c: Vec<f64>,
    /// `N^{-d} sum_x c_{x,x+z}^2` per half-set jump.
    pub avg_c2: Vec<f64>,
    /// `max_k ||theta_k||_{L^2(m_N)}`.
    pub corrector_norm: f64,
    /// `max_k E(theta_k, theta_k)`.
    pub corrector_energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepFailure {
    pub n: usize,
    pub seed: u64,
    pub omega: f64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    /// Sorted by `(n, omega, seed)`.
    pub records: Vec<SweepRecord>,
    pub failures: Vec<SweepFailure>,
}

/// Mobility matrices for every `(n, omega, seed)`. For each seed one field is
/// sampled on the largest box and periodized at every `n`, so all sides see
/// the same realization. Failed cells are reported and skipped.
pub fn n_sweep(
    spec: &EnvironmentSpec,
    nbhd: &Neighborhood,
    ns: &[usize],
    omegas: &[f64],
    seeds: &[u64],
    cfg: &SolveConfig,
) -> Result<Sweep> {
    spec.validate(nbhd)?;
    cfg.validate()?;
    if ns.is_empty() || omegas.is_empty() || seeds.is_empty() {
        return Err(Error::InvalidArgument("sweep needs at least one side, frequency and seed".into()));
    }
    let max_norm = nbhd.max_norm();
    if let Some(&n) = ns.iter().find(|&&n| n <= 2 * max_norm) {
        return Err(Error::TorusTooSmall { n, max_norm });
    }
    if let Some(w) = omegas.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
        return Err(Error::InvalidArgument(format!("frequencies must be finite and non-negative, got {w}")));
    }
    let n_max = *ns.iter().max().expect("nonempty") as i64;
    let d = nbhd.dim();
    let cells: Vec<(usize, u64)> = ns.iter().flat_map(|&n| seeds.iter().map(move |&s| (n, s))).collect();
    let results: Vec<Vec<std::result::Result<SweepRecord, SweepFailure>>> = cells
        .par_iter()
        .map(|&(n, seed)| {
            let fail = |omega: f64, e: Error| SweepFailure { n, seed, omega, error: e.to_string() };
            let prepared = sample_field(&spec.clone().with_seed(seed), nbhd, vec![0; d], vec![n_max; d])
                .and_then(|f| Ok((periodize(&f, n)?, ergodic_average(&f, n, 1)?, ergodic_average(&f, n, 2)?)));
            let (model, avg_c, avg_c2) = match prepared {
                Ok(p) => p,
                Err(e) => {
                    let error = e.to_string();
                    return omegas.iter().map(|&omega| Err(SweepFailure { n, seed, omega, error: error.clone() })).collect();
                }
            };
            omegas
                .iter()
                .map(|&omega| {
                    let rep = if omega == 0.0 { diffusion_report(&model, cfg) } else { mobility_report(&model, omega, cfg) };
                    rep.map(|r| record(n, seed, omega, &model, r, avg_c.clone(), avg_c2.clone())).map_err(|e| fail(omega, e))
                })
                .collect()
        })
        .collect();
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for r in results.into_iter().flatten() {
        match r {
            Ok(rec) => records.push(rec),
            Err(f) => failures.push(f),
        }
    }
    records.sort_by(|a, b| (a.n, a.omega, a.seed).partial_cmp(&(b.n, b.omega, b.seed)).expect("finite"));
    failures.sort_by(|a, b| (a.n, a.omega, a.seed).partial_cmp(&(b.n, b.omega, b.seed)).expect("finite"));
    Ok(Sweep { records, failures })
}

fn record(
    n: usize,
    seed: u64,
    omega: f64,
    model: &crate::env::TorusModel,
    rep: MobilityReport,
    avg_c: Vec<f64>,
    avg_c2: Vec<f64>,
) -> SweepRecord {
    let corrector_norm = rep.correctors.iter().map(|t| t.norm_sqr().sqrt()).fold(0.0, f64::max);
    let corrector_energy = rep.correctors.iter().map(|t| dirichlet_form(model, t, t).re).fold(0.0, f64::max);
    SweepRecord {
        n,
        seed,
        omega,
        iterations: rep.iterations(),
        residual: rep.residual(),
        symmetry_defect: rep.symmetry_defect,
        sigma: rep.sigma,
        avg_c,
        avg_c2,
        corrector_norm,
        corrector_energy,
    }
}

impl Sweep {
    /// Long-form CSV: `n,omega,seed,j,k,re,im,iters,residual,avg_c_z0,...,avg_c2_z0,...`.
    pub fn to_csv(&self) -> String {
        let m = self.records.first().map_or(0, |r| r.avg_c.len());
        let mut out = String::from("n,omega,seed,j,k,re,im,iters,residual");
        for zi in 0..m {
            out.push_str(&format!(",avg_c_z{zi}"));
        }
        for zi in 0..m {
            out.push_str(&format!(",avg_c2_z{zi}"));
        }
        out.push('\n');
        for r in &self.records {
            for (j, row) in r.sigma.entries.iter().enumerate() {
                for (k, v) in row.iter().enumerate() {
                    out.push_str(&format!(
                        "{},{:.16e},{},{j},{k},{:.16e},{:.16e},{},{:.16e}",
                        r.n, r.omega, r.seed, v.re, v.im, r.iterations, r.residual
                    ));
                    for c in r.avg_c.iter().chain(&r.avg_c2) {
                        out.push_str(&format!(",{c:.16e}"));
                    }
                    out.push('\n');
                }
            }
        }
        out
    }
}

/// Cross-seed statistics of one matrix entry at one side `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryStats {
    pub n: usize,
    pub count: usize,
    pub mean_re: Sig17,
    pub mean_im: Sig17,
    /// Sample standard deviations (denominator `count - 1`; zero for one seed).
    pub std_re: Sig17,
    pub std_im: Sig17,
    /// Largest corrector norm seen over the seeds.
    pub max_corrector_norm: Sig17,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryConvergence {
    pub omega: Sig17,
    pub j: usize,
    pub k: usize,
    /// Sorted by increasing `n`.
    pub per_n: Vec<EntryStats>,
    /// `|mean_{n_i} - mean_{n_{i+1}}|` (complex modulus) for consecutive sides.
    pub diffs: Vec<Sig17>,
    pub monotone_shrinking: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub entries: Vec<EntryConvergence>,
    /// Set when every entry is flagged `MONOTONE_SHRINKING`.
    pub all_monotone_shrinking: bool,
    pub flag: String,
}

/// `b` is strictly below `a`, or both sit under the noise floor.
fn shrinks(a: f64, b: f64, floor: f64) -> bool {
    b < a || (a <= floor && b <= floor)
}

/// Per `(omega, j, k)`: cross-seed mean and spread for each `n`, differences
/// of consecutive means, and the `MONOTONE_SHRINKING` flag when the spreads
/// of both parts and the differences decrease along `n`. Values below
/// `1e-10 max(1, |mean|)` count as zero.
pub fn convergence_report(records: &[SweepRecord]) -> Result<ConvergenceReport> {
    let mut ns: Vec<usize> = records.iter().map(|r| r.n).collect();
    ns.sort_unstable();
    ns.dedup();
    if ns.len() < 2 {
        return Err(Error::InvalidArgument("convergence report needs at least two torus sides".into()));
    }
    let mut omegas: Vec<f64> = records.iter().map(|r| r.omega).collect();
    omegas.sort_by(f64::total_cmp);
    omegas.dedup();
    let d = records[0].sigma.dim();
    let mut entries = Vec::new();
    for &omega in &omegas {
        for j in 0..d {
            for k in j..d {
                let mut per_n = Vec::new();
                for &n in &ns {
                    let cell: Vec<&SweepRecord> = records.iter().filter(|r| r.n == n && r.omega == omega).collect();
                    if cell.is_empty() {
                        continue;
                    }
                    let re: Vec<f64> = cell.iter().map(|r| r.sigma.get(j, k).re).collect();
                    let im: Vec<f64> = cell.iter().map(|r| r.sigma.get(j, k).im).collect();
                    let (mr, sr) = mean_std(&re);
                    let (mi, si) = mean_std(&im);
                    per_n.push(EntryStats {
                        n,
                        count: cell.len(),
                        mean_re: Sig17(mr),
                        mean_im: Sig17(mi),
                        std_re: Sig17(sr),
                        std_im: Sig17(si),
                        max_corrector_norm: Sig17(cell.iter().map(|r| r.corrector_norm).fold(0.0, f64::max)),
                    });
                }
                let diffs: Vec<f64> = per_n
                    .windows(2)
                    .map(|w| (w[0].mean_re.0 - w[1].mean_re.0).hypot(w[0].mean_im.0 - w[1].mean_im.0))
                    .collect();
                let scale = per_n.iter().map(|s| s.mean_re.0.hypot(s.mean_im.0)).fold(1.0, f64::max);
                let floor = 1e-10 * scale;
                let spreads = per_n.windows(2).all(|w| {
                    shrinks(w[0].std_re.0, w[1].std_re.0, floor) && shrinks(w[0].std_im.0, w[1].std_im.0, floor)
                });
                let steps = diffs.windows(2).all(|w| shrinks(w[0], w[1], floor));
                entries.push(EntryConvergence {
                    omega: Sig17(omega),
                    j,
                    k,
                    monotone_shrinking: per_n.len() >= 2 && spreads && steps,
                    per_n,
                    diffs: diffs.into_iter().map(Sig17).collect(),
                });
            }
        }
    }
    let all = entries.iter().all(|e| e.monotone_shrinking);
    Ok(ConvergenceReport {
        entries,
        all_monotone_shrinking: all,
        flag: if all { "MONOTONE_SHRINKING".into() } else { "NOT_MONOTONE".into() },
    })
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::Law;

    fn cfg() -> SolveConfig {
        SolveConfig::default().with_tol(1e-12)
    }

    #[test]
    fn constant_sweep() {
        let nbhd = Neighborhood::nearest(2);
        let sweep = n_sweep(&EnvironmentSpec::constant(2.0), &nbhd, &[4, 6], &[0.0, 1.0], &[1, 2], &cfg()).unwrap();
        assert_eq!(sweep.records.len(), 8);
        assert!(sweep.failures.is_empty());
        for r in &sweep.records {
            assert!(r.sigma.max_abs_diff_scalar(4.0) < 1e-12);
            assert_eq!(r.avg_c, vec![2.0, 2.0]);
            assert_eq!(r.avg_c2, vec![4.0, 4.0]);
        }
        let rep = convergence_report(&sweep.records).unwrap();
        assert!(rep.all_monotone_shrinking);
        assert_eq!(rep.flag, "MONOTONE_SHRINKING");
        assert!(rep.entries.iter().all(|e| e.diffs.iter().all(|d| d.0 < 1e-12)));
    }

    #[test]
    fn records_sorted_and_deterministic() {
        let nbhd = Neighborhood::nearest(1);
        let spec = EnvironmentSpec::iid(Law::Uniform { a: 1.0, b: 2.0 }, 0);
        let a = n_sweep(&spec, &nbhd, &[16, 8], &[1.0, 0.5], &[3, 1, 2], &cfg()).unwrap();
        let keys: Vec<(usize, f64, u64)> = a.records.iter().map(|r| (r.n, r.omega, r.seed)).collect();
        let mut sorted = keys.clone();
        sorted.sort_by(|x, y| x.partial_cmp(y).unwrap());
        assert_eq!(keys, sorted);
        let b = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| n_sweep(&spec, &nbhd, &[16, 8], &[1.0, 0.5], &[3, 1, 2], &cfg()).unwrap());
        assert_eq!(a, b);
        assert_eq!(a.to_csv(), b.to_csv());
    }

    #[test]
    fn same_field_across_sides() {
        // the N = 8 torus of a seed is the restriction of its N = 16 field
        let nbhd = Neighborhood::nearest(1);
        let spec = EnvironmentSpec::iid(Law::Uniform { a: 1.0, b: 2.0 }, 0);
        let sweep = n_sweep(&spec, &nbhd, &[8, 16], &[1.0], &[5], &cfg()).unwrap();
        let direct = crate::env::torus_from_spec(&spec.clone().with_seed(5), &nbhd, 8).unwrap();
        let avg = direct.mean_cond(0);
        assert!((sweep.records[0].avg_c[0] - avg).abs() < 1e-15);
    }

    #[test]
    fn csv_layout() {
        let nbhd = Neighborhood::nearest(2);
        let sweep = n_sweep(&EnvironmentSpec::constant(1.0), &nbhd, &[4], &[1.0], &[0], &cfg()).unwrap();
        let csv = sweep.to_csv();
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "n,omega,seed,j,k,re,im,iters,residual,avg_c_z0,avg_c_z1,avg_c2_z0,avg_c2_z1"
        );
        assert_eq!(lines.count(), 4);
    }

    #[test]
    fn report_needs_two_sides() {
        let nbhd = Neighborhood::nearest(1);
        let sweep = n_sweep(&EnvironmentSpec::constant(1.0), &nbhd, &[4], &[1.0], &[0], &cfg()).unwrap();
        assert!(convergence_report(&sweep.records).is_err());
    }

    #[test]
    fn bad_inputs() {
        let nbhd = Neighborhood::nearest(1);
        let spec = EnvironmentSpec::constant(1.0);
        assert!(matches!(n_sweep(&spec, &nbhd, &[2], &[1.0], &[0], &cfg()), Err(Error::TorusTooSmall { .. })));
        assert!(n_sweep(&spec, &nbhd, &[4], &[-1.0], &[0], &cfg()).is_err());
        assert!(n_sweep(&spec, &nbhd, &[], &[1.0], &[0], &cfg()).is_err());
    }

    #[test]
    fn shrink_floor() {
        assert!(shrinks(1.0, 0.5, 1e-10));
        assert!(!shrinks(0.5, 0.5, 1e-10));
        assert!(shrinks(0.0, 0.0, 1e-10));
        assert!(!shrinks(1e-3, 1e-3, 1e-10));
    }
}
