//! Monte Carlo trajectories of the driven walk by thinning.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{projections, DriveSpec};
use crate::env::{stream_key, TorusModel};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WalkConfig {
    pub t_end: f64,
    pub n_paths: usize,
    pub seed: u64,
    /// Positions are recorded at `t_end - T + i T / phases`.
    pub phases: usize,
}

/// Path averages over the last drive period before `t_end`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkEstimate {
    pub times: Vec<f64>,
    /// Empirical law of the walker at each recorded time.
    pub occupation: Vec<Vec<f64>>,
    /// Path average of `sum_z rate(X_t, z, t) z` at each recorded time.
    pub velocity: Vec<Vec<f64>>,
    pub velocity_se: Vec<Vec<f64>>,
    /// Net displacement over the last period divided by `T`.
    pub flux_velocity: Vec<f64>,
    pub flux_velocity_se: Vec<f64>,
    /// Range of the thinning acceptance probability seen along all paths.
    pub min_acceptance: f64,
    pub max_acceptance: f64,
    pub proposals: u64,
    pub jumps: u64,
}

#[derive(Clone)]
struct Accum {
    counts: Vec<Vec<u64>>,
    vel: Vec<Vec<f64>>,
    vel_sq: Vec<Vec<f64>>,
    disp: Vec<f64>,
    disp_sq: Vec<f64>,
    min_a: f64,
    max_a: f64,
    proposals: u64,
    jumps: u64,
}

impl Accum {
    fn new(phases: usize, sites: usize, d: usize) -> Self {
        Self {
            counts: vec![vec![0; sites]; phases],
            vel: vec![vec![0.0; d]; phases],
            vel_sq: vec![vec![0.0; d]; phases],
            disp: vec![0.0; d],
            disp_sq: vec![0.0; d],
            min_a: f64::INFINITY,
            max_a: 0.0,
            proposals: 0,
            jumps: 0,
        }
    }

    fn merge(&mut self, o: &Accum) {
        for (a, b) in self.counts.iter_mut().flatten().zip(o.counts.iter().flatten()) {
            *a += b;
        }
        for (a, b) in self.vel.iter_mut().flatten().zip(o.vel.iter().flatten()) {
            *a += b;
        }
        for (a, b) in self.vel_sq.iter_mut().flatten().zip(o.vel_sq.iter().flatten()) {
            *a += b;
        }
        for (a, b) in self.disp.iter_mut().zip(&o.disp) {
            *a += b;
        }
        for (a, b) in self.disp_sq.iter_mut().zip(&o.disp_sq) {
            *a += b;
        }
        self.min_a = self.min_a.min(o.min_a);
        self.max_a = self.max_a.max(o.max_a);
        self.proposals += o.proposals;
        self.jumps += o.jumps;
    }
}

const CHUNK: usize = 1024;

/// Samples `n_paths` independent trajectories started from a uniformly
/// chosen site. Events are proposed at the per-site rate
/// `R(x) = sum_z c_{x,x+z} e^{|lambda| |z.v|}` and accepted with probability
/// `exit(x, t) / R(x)`. Path `i` uses its own ChaCha stream keyed by
/// `(seed, i)`, and chunk results are combined in path order, so the output
/// does not depend on the thread count.
pub fn simulate_walk(model: &TorusModel, drive: &DriveSpec, cfg: &WalkConfig) -> Result<WalkEstimate> {
    drive.check_dim(model)?;
    let period = drive.period();
    if cfg.n_paths == 0 || cfg.phases == 0 {
        return Err(Error::InvalidArgument("need at least one path and one phase".into()));
    }
    if !(cfg.t_end >= period && cfg.t_end.is_finite()) {
        return Err(Error::InvalidArgument(format!("t_end must cover one drive period ({period})")));
    }
    let n = model.sites();
    let d = model.dim();
    let m = model.neighborhood().half_len();
    let proj = projections(model, &drive.v);
    let half = model.neighborhood().half_set().to_vec();
    let majorant: Vec<f64> = (0..n)
        .map(|x| {
            (0..m)
                .map(|zi| (model.cond(x, zi) + model.cond_back(x, zi)) * (drive.lambda.abs() * proj[zi].abs()).exp())
                .sum()
        })
        .collect();
    let start = cfg.t_end - period;
    let times: Vec<f64> = (0..cfg.phases).map(|i| start + i as f64 * period / cfg.phases as f64).collect();

    // rates at (x, t): forward jumps then backward jumps
    let rates_at = |x: usize, t: f64, buf: &mut [f64]| {
        let phi = drive.field(t);
        for zi in 0..m {
            buf[zi] = model.cond(x, zi) * (phi * proj[zi]).exp();
            buf[m + zi] = model.cond_back(x, zi) * (-phi * proj[zi]).exp();
        }
    };

    let run_path = |path: usize, acc: &mut Accum, buf: &mut [f64]| {
        let mut rng = ChaCha8Rng::seed_from_u64(stream_key(cfg.seed, path as u64));
        let mut x = rng.random_range(0..n);
        let mut t = 0.0;
        let mut rec = 0;
        let mut disp = vec![0.0; d];
        loop {
            let r = majorant[x];
            let tau: f64 = rng.sample::<f64, _>(Exp1) / r;
            let next = t + tau;
            while rec < times.len() && times[rec] < next {
                acc.counts[rec][x] += 1;
                rates_at(x, times[rec], buf);
                for k in 0..d {
                    let mut v = 0.0;
                    for zi in 0..m {
                        v += (buf[zi] - buf[m + zi]) * half[zi][k] as f64;
                    }
                    acc.vel[rec][k] += v;
                    acc.vel_sq[rec][k] += v * v;
                }
                rec += 1;
            }
            if next > cfg.t_end {
                break;
            }
            t = next;
            acc.proposals += 1;
            rates_at(x, t, buf);
            let exit: f64 = buf.iter().sum();
            let a = exit / r;
            acc.min_a = acc.min_a.min(a);
            acc.max_a = acc.max_a.max(a);
            let u = rng.random::<f64>() * r;
            if u >= exit {
                continue;
            }
            let mut cum = 0.0;
            let mut pick = 2 * m - 1;
            for (j, w) in buf.iter().enumerate() {
                cum += w;
                if u < cum {
                    pick = j;
                    break;
                }
            }
            acc.jumps += 1;
            let (zi, sign) = if pick < m { (pick, 1.0) } else { (pick - m, -1.0) };
            x = if pick < m { model.fwd(x, zi) } else { model.bwd(x, zi) };
            if t > start {
                for k in 0..d {
                    disp[k] += sign * half[zi][k] as f64;
                }
            }
        }
        for k in 0..d {
            let v = disp[k] / period;
            acc.disp[k] += v;
            acc.disp_sq[k] += v * v;
        }
    };

    let chunks = cfg.n_paths.div_ceil(CHUNK);
    let parts: Vec<Accum> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = Accum::new(cfg.phases, n, d);
            let mut buf = vec![0.0; 2 * m];
            for path in c * CHUNK..((c + 1) * CHUNK).min(cfg.n_paths) {
                run_path(path, &mut acc, &mut buf);
            }
            acc
        })
        .collect();
    let mut total = Accum::new(cfg.phases, n, d);
    for p in &parts {
        total.merge(p);
    }

    let np = cfg.n_paths as f64;
    let se = |sum: f64, sq: f64| {
        if cfg.n_paths < 2 {
            return f64::NAN;
        }
        let mean = sum / np;
        ((sq / np - mean * mean).max(0.0) / (np - 1.0)).sqrt()
    };
    Ok(WalkEstimate {
        occupation: total.counts.iter().map(|c| c.iter().map(|k| *k as f64 / np).collect()).collect(),
        velocity: total.vel.iter().map(|v| v.iter().map(|s| s / np).collect()).collect(),
        velocity_se: total
            .vel
            .iter()
            .zip(&total.vel_sq)
            .map(|(v, q)| v.iter().zip(q).map(|(s, s2)| se(*s, *s2)).collect())
            .collect(),
        flux_velocity: total.disp.iter().map(|s| s / np).collect(),
        flux_velocity_se: total.disp.iter().zip(&total.disp_sq).map(|(s, q)| se(*s, *q)).collect(),
        times,
        min_acceptance: total.min_a,
        max_acceptance: total.max_a,
        proposals: total.proposals,
        jumps: total.jumps,
    })
}
