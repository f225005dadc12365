use rayon::prelude::*;
use rcm_core::env::{torus_from_spec, TorusModel};
use rcm_core::floquet::{
    evolve_to_times, linear_response_check, mean_velocity, oss_distribution, period_map, phase_times, DriveSpec,
    LinearResponseReport,
};
use rcm_core::homogenize::{convergence_report, n_sweep, ConvergenceReport, SweepFailure};
use rcm_core::io::Sig17;
use rcm_core::mobility::{
    diffusion_report, energy_identities, gradient_formula_sigma, mobility_matrix_reflected, mobility_report,
    quadratic_form_split, MatrixRecord, MobilityReport, QuadraticSplit,
};
use rcm_core::solver::{Method, SolveConfig};
use rcm_core::torus::local_drift;
use serde::Serialize;

use crate::config::{ConfigError, Format, RunConfig};
use crate::output::{cell_name, Writer};

/// Why a command stopped.
#[derive(Debug)]
pub enum Failure {
    Config(ConfigError),
    Numeric(String),
    Io(std::io::Error),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e)
    }
}

fn numeric(what: String) -> impl FnOnce(rcm_core::Error) -> Failure {
    move |e| Failure::Numeric(format!("{what}: {e}"))
}

/// `(n, seed)` pairs in output order.
fn cells(cfg: &RunConfig) -> Vec<(usize, u64)> {
    cfg.ns.iter().flat_map(|&n| cfg.seeds.iter().map(move |&s| (n, s))).collect()
}

fn build_model(cfg: &RunConfig, n: usize, seed: u64) -> Result<TorusModel, Failure> {
    torus_from_spec(&cfg.environment.clone().with_seed(seed), &cfg.neighborhood, n)
        .map_err(numeric(format!("N={n} seed={seed}")))
}

fn positive_omegas(cfg: &RunConfig, command: &str) -> Vec<f64> {
    let out: Vec<f64> = cfg.omegas.iter().copied().filter(|w| *w > 0.0).collect();
    if out.len() < cfg.omegas.len() {
        eprintln!("{command}: skipping omega = 0 (the drive needs a positive frequency)");
    }
    out
}

#[derive(Serialize)]
struct MatrixOutput {
    seed: u64,
    method: &'static str,
    symmetry_defect: Sig17,
    result: MatrixRecord,
}

fn matrix_output(seed: u64, method: Method, rep: &MobilityReport) -> MatrixOutput {
    MatrixOutput { seed, method: method.name(), symmetry_defect: Sig17(rep.symmetry_defect), result: rep.record() }
}

/// One mobility matrix per `(n, omega, seed)`, with the given solver.
fn matrices(cfg: &RunConfig, solve: &SolveConfig, prefix: &str, writer: &mut Writer, format: Format) -> Result<(), Failure> {
    let results: Vec<Result<Vec<(String, MatrixOutput)>, Failure>> = cells(cfg)
        .par_iter()
        .map(|&(n, seed)| {
            let model = build_model(cfg, n, seed)?;
            cfg.omegas
                .iter()
                .map(|&omega| {
                    let rep = if omega == 0.0 { diffusion_report(&model, solve) } else { mobility_report(&model, omega, solve) }
                        .map_err(numeric(format!("N={n} omega={omega} seed={seed}")))?;
                    Ok((cell_name(prefix, n, omega, seed), matrix_output(seed, solve.method, &rep)))
                })
                .collect()
        })
        .collect();
    for batch in results {
        for (stem, out) in batch? {
            match format {
                Format::Json => writer.json(&format!("{stem}.json"), &out)?,
                Format::Csv => writer.csv(&format!("{stem}.csv"), &out.result.matrix().to_csv())?,
            }
        }
    }
    Ok(())
}

pub fn mobility(cfg: &RunConfig, writer: &mut Writer, format: Format) -> Result<(), Failure> {
    matrices(cfg, &cfg.solver, "mobility", writer, format)
}

/// Same cells as `mobility`, through the dense LU route.
pub fn oracle(cfg: &RunConfig, writer: &mut Writer, format: Format) -> Result<(), Failure> {
    cfg.check_dense_cap()?;
    let solve = cfg.solver.with_method(Method::Dense);
    matrices(cfg, &solve, "oracle", writer, format)
}

#[derive(Serialize)]
struct SweepRow {
    n: usize,
    omega: Sig17,
    seed: u64,
    sigma: Vec<Vec<[Sig17; 2]>>,
    iterations: usize,
    residual: Sig17,
    symmetry_defect: Sig17,
    avg_c: Vec<Sig17>,
    avg_c2: Vec<Sig17>,
    corrector_norm: Sig17,
    corrector_energy: Sig17,
}

#[derive(Serialize)]
struct SweepOutput {
    records: Vec<SweepRow>,
    failures: Vec<SweepFailure>,
}

fn sig(v: &[f64]) -> Vec<Sig17> {
    v.iter().map(|x| Sig17(*x)).collect()
}

pub fn sweep(cfg: &RunConfig, writer: &mut Writer, format: Format) -> Result<(), Failure> {
    let sweep = n_sweep(&cfg.environment, &cfg.neighborhood, &cfg.ns, &cfg.omegas, &cfg.seeds, &cfg.solver)
        .map_err(numeric("sweep".into()))?;
    match format {
        Format::Csv => writer.csv("sweep.csv", &sweep.to_csv())?,
        Format::Json => {
            let records = sweep
                .records
                .iter()
                .map(|r| SweepRow {
                    n: r.n,
                    omega: Sig17(r.omega),
                    seed: r.seed,
                    sigma: r.sigma.entries.iter().map(|row| row.iter().map(|v| [Sig17(v.re), Sig17(v.im)]).collect()).collect(),
                    iterations: r.iterations,
                    residual: Sig17(r.residual),
                    symmetry_defect: Sig17(r.symmetry_defect),
                    avg_c: sig(&r.avg_c),
                    avg_c2: sig(&r.avg_c2),
                    corrector_norm: Sig17(r.corrector_norm),
                    corrector_energy: Sig17(r.corrector_energy),
                })
                .collect();
            writer.json("sweep.json", &SweepOutput { records, failures: sweep.failures.clone() })?;
        }
    }
    // a single side has no convergence to report
    if cfg.ns.len() >= 2 && !sweep.records.is_empty() {
        let report: ConvergenceReport = convergence_report(&sweep.records).map_err(numeric("convergence".into()))?;
        writer.json("convergence.json", &report)?;
        eprintln!("sweep: {}", report.flag);
    }
    if let Some(f) = sweep.failures.first() {
        return Err(Failure::Numeric(format!(
            "{} sweep cells failed, first at N={} omega={} seed={}: {}",
            sweep.failures.len(),
            f.n,
            f.omega,
            f.seed,
            f.error
        )));
    }
    Ok(())
}

#[derive(Serialize)]
struct Identities {
    /// Worst relative error of the two energy identities over the correctors.
    energy_identity_error: Sig17,
    /// Entrywise gap between the gradient form and the assembled matrix.
    gradient_formula_deviation: Sig17,
    /// `max |sigma(-omega) - conj sigma(omega)|`.
    reflection_deviation: Sig17,
    symmetry_defect: Sig17,
    symmetric: bool,
    quadratic_split: QuadraticSplit,
}

#[derive(Serialize)]
struct ValidateOutput {
    n: usize,
    seed: u64,
    omega: Sig17,
    direction: Vec<Sig17>,
    sigma: MatrixRecord,
    identities: Identities,
    linear_response: LinearResponseReport,
}

fn validate_cell(cfg: &RunConfig, model: &TorusModel, n: usize, seed: u64, omega: f64) -> Result<ValidateOutput, Failure> {
    let tag = format!("N={n} omega={omega} seed={seed}");
    let solve = &cfg.solver;
    let v = cfg.direction();
    let rep = mobility_report(model, omega, solve).map_err(numeric(tag.clone()))?;
    let mut energy = 0.0f64;
    for (k, theta) in rep.correctors.iter().enumerate() {
        let gamma = local_drift(model, k).map_err(numeric(tag.clone()))?;
        energy = energy.max(energy_identities(model, omega, theta, &gamma).max_rel_error());
    }
    let gradient = gradient_formula_sigma(model, omega, &rep.correctors).max_abs_diff(&rep.sigma);
    let reflected = mobility_matrix_reflected(model, omega, solve).map_err(numeric(tag.clone()))?;
    let split = quadratic_form_split(model, omega, &v, solve).map_err(numeric(tag.clone()))?;
    let times = phase_times(omega, cfg.drive.phases);
    let linear_response =
        linear_response_check(model, omega, &v, cfg.drive.lambda, &times, &cfg.floquet, solve).map_err(numeric(tag))?;
    Ok(ValidateOutput {
        n,
        seed,
        omega: Sig17(omega),
        direction: sig(&v),
        sigma: rep.record(),
        identities: Identities {
            energy_identity_error: Sig17(energy),
            gradient_formula_deviation: Sig17(gradient),
            reflection_deviation: Sig17(reflected.max_abs_diff(&rep.sigma.conj())),
            symmetry_defect: Sig17(rep.symmetry_defect),
            symmetric: rep.sigma.is_symmetric(),
            quadratic_split: split,
        },
        linear_response,
    })
}

/// Identity checks and the Floquet linear-response comparison per cell.
/// Always JSON.
pub fn validate(cfg: &RunConfig, writer: &mut Writer) -> Result<(), Failure> {
    let omegas = positive_omegas(cfg, "validate");
    let results: Vec<Result<Vec<ValidateOutput>, Failure>> = cells(cfg)
        .par_iter()
        .map(|&(n, seed)| {
            let model = build_model(cfg, n, seed)?;
            omegas.iter().map(|&w| validate_cell(cfg, &model, n, seed, w)).collect()
        })
        .collect();
    for batch in results {
        for out in batch? {
            writer.json(&format!("{}.json", cell_name("validate", out.n, out.omega.0, out.seed)), &out)?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct FloquetOutput {
    n: usize,
    seed: u64,
    omega: Sig17,
    lambda: Sig17,
    direction: Vec<Sig17>,
    steps_per_period: usize,
    /// `max_x |sum_y P[y, x] - 1|` of the period map.
    mass_defect: Sig17,
    /// Periodic steady state at phase 0.
    oss: Vec<Sig17>,
    times: Vec<Sig17>,
    velocity: Vec<Vec<Sig17>>,
    /// Mean of `velocity` over the sampled phases.
    mean_velocity: Vec<Sig17>,
}

fn floquet_cell(cfg: &RunConfig, model: &TorusModel, n: usize, seed: u64, omega: f64) -> Result<FloquetOutput, Failure> {
    let tag = format!("N={n} omega={omega} seed={seed}");
    let v = cfg.direction();
    let drive = DriveSpec::new(omega, cfg.drive.lambda, v.clone()).map_err(numeric(tag.clone()))?;
    let steps = cfg.floquet.steps(model, &drive);
    let map = period_map(model, &drive, steps).map_err(numeric(tag.clone()))?;
    let oss = oss_distribution(&map, &cfg.floquet).map_err(numeric(tag.clone()))?;
    let times = phase_times(omega, cfg.drive.phases);
    let laws = evolve_to_times(model, &drive, &oss, &times, steps).map_err(numeric(tag.clone()))?;
    let velocity: Vec<Vec<f64>> = times
        .iter()
        .zip(&laws)
        .map(|(t, p)| mean_velocity(model, &drive, p, *t))
        .collect::<rcm_core::Result<_>>()
        .map_err(numeric(tag))?;
    let d = v.len();
    let mean: Vec<f64> = (0..d).map(|k| velocity.iter().map(|u| u[k]).sum::<f64>() / velocity.len() as f64).collect();
    Ok(FloquetOutput {
        n,
        seed,
        omega: Sig17(omega),
        lambda: Sig17(cfg.drive.lambda),
        direction: sig(&v),
        steps_per_period: steps,
        mass_defect: Sig17(map.mass_defect()),
        oss: sig(&oss.0),
        times: sig(&times),
        velocity: velocity.iter().map(|u| sig(u)).collect(),
        mean_velocity: sig(&mean),
    })
}

/// Periodic steady state and its velocity at `drive.phases` phases. Always JSON.
pub fn floquet(cfg: &RunConfig, writer: &mut Writer) -> Result<(), Failure> {
    let omegas = positive_omegas(cfg, "floquet");
    let results: Vec<Result<Vec<FloquetOutput>, Failure>> = cells(cfg)
        .par_iter()
        .map(|&(n, seed)| {
            let model = build_model(cfg, n, seed)?;
            omegas.iter().map(|&w| floquet_cell(cfg, &model, n, seed, w)).collect()
        })
        .collect();
    for batch in results {
        for out in batch? {
            writer.json(&format!("{}.json", cell_name("floquet", out.n, out.omega.0, out.seed)), &out)?;
        }
    }
    Ok(())
}
