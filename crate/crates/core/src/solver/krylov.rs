//! COCG for the complex symmetric form and projected CG for the deflated
//! problem.

use num_complex::Complex64;

use super::{Precond, SolveConfig};
use crate::env::TorusModel;
use crate::error::{Error, Result};
use crate::torus::{generator_apply, ComplexField, RealField};

fn bilinear(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

struct ComplexOp<'a> {
    model: &'a TorusModel,
    omega: f64,
    re: Vec<f64>,
    im: Vec<f64>,
    lre: Vec<f64>,
    lim: Vec<f64>,
}

impl<'a> ComplexOp<'a> {
    fn new(model: &'a TorusModel, omega: f64) -> Self {
        let n = model.sites();
        Self { model, omega, re: vec![0.0; n], im: vec![0.0; n], lre: vec![0.0; n], lim: vec![0.0; n] }
    }

    /// out = (i omega - L) v
    fn apply(&mut self, v: &[Complex64], out: &mut [Complex64]) {
        for (i, z) in v.iter().enumerate() {
            self.re[i] = z.re;
            self.im[i] = z.im;
        }
        generator_apply(self.model, &self.re, &mut self.lre);
        generator_apply(self.model, &self.im, &mut self.lim);
        for i in 0..v.len() {
            out[i] = Complex64::new(0.0, self.omega) * v[i] - Complex64::new(self.lre[i], self.lim[i]);
        }
    }
}

pub(crate) fn cocg(
    model: &TorusModel,
    omega: f64,
    rhs: &RealField,
    cfg: &SolveConfig,
    start: Option<&ComplexField>,
) -> Result<(ComplexField, usize)> {
    let n = model.sites();
    let inv: Vec<Complex64> = match cfg.precond {
        Precond::Diagonal => (0..n).map(|x| Complex64::new(model.exit_rate(x), omega).inv()).collect(),
        Precond::None => vec![Complex64::new(1.0, 0.0); n],
    };
    let mut op = ComplexOp::new(model, omega);
    let b: Vec<Complex64> = rhs.0.iter().map(|v| Complex64::new(*v, 0.0)).collect();
    let bnorm = norm(&b);
    let mut x: Vec<Complex64> = match start {
        Some(s) => (0..n).map(|i| s.get(i)).collect(),
        None => vec![Complex64::new(0.0, 0.0); n],
    };
    let mut r = vec![Complex64::new(0.0, 0.0); n];
    let mut q = vec![Complex64::new(0.0, 0.0); n];
    let mut used = 0;
    let mut best = f64::INFINITY;
    let mut stalls = 0;
    loop {
        op.apply(&x, &mut r);
        for i in 0..n {
            r[i] = b[i] - r[i];
        }
        let rel = norm(&r) / bnorm;
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
            return Err(Error::NotConverged { method: "cocg", iterations: used, residual: best });
        }
        // inner COCG cycle from the current iterate
        let target = 0.5 * cfg.tol * bnorm;
        let mut z: Vec<Complex64> = r.iter().zip(&inv).map(|(a, m)| a * m).collect();
        let mut p = z.clone();
        let mut rho = bilinear(&r, &z);
        while used < cfg.max_iter {
            used += 1;
            op.apply(&p, &mut q);
            let pq = bilinear(&p, &q);
            if pq.norm() == 0.0 || rho.norm() == 0.0 {
                break;
            }
            let alpha = rho / pq;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * q[i];
            }
            if norm(&r) <= target {
                break;
            }
            for i in 0..n {
                z[i] = r[i] * inv[i];
            }
            let rho_next = bilinear(&r, &z);
            let beta = rho_next / rho;
            rho = rho_next;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
    }
    Ok((ComplexField { re: x.iter().map(|v| v.re).collect(), im: x.iter().map(|v| v.im).collect() }, used))
}

fn project(v: &mut [f64]) {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    for x in v.iter_mut() {
        *x -= m;
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Preconditioned CG for `-L theta = rhs` with every iterate kept mean-zero.
pub(crate) fn projected_cg(model: &TorusModel, rhs: &RealField, cfg: &SolveConfig) -> Result<(RealField, usize)> {
    let n = model.sites();
    let inv: Vec<f64> = match cfg.precond {
        Precond::Diagonal => (0..n).map(|x| 1.0 / model.exit_rate(x)).collect(),
        Precond::None => vec![1.0; n],
    };
    let mut b = rhs.0.clone();
    project(&mut b);
    let bnorm = dot(&b, &b).sqrt();
    let mut x = vec![0.0; n];
    let mut r = vec![0.0; n];
    let mut q = vec![0.0; n];
    let mut used = 0;
    let mut best = f64::INFINITY;
    let mut stalls = 0;
    loop {
        generator_apply(model, &x, &mut r);
        for i in 0..n {
            r[i] += b[i];
        }
        let rel = dot(&r, &r).sqrt() / bnorm;
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
            return Err(Error::NotConverged { method: "projected_cg", iterations: used, residual: best });
        }
        let target = 0.5 * cfg.tol * bnorm;
        let mut z: Vec<f64> = r.iter().zip(&inv).map(|(a, m)| a * m).collect();
        project(&mut z);
        let mut p = z.clone();
        let mut rho = dot(&r, &z);
        while used < cfg.max_iter {
            used += 1;
            generator_apply(model, &p, &mut q);
            for v in q.iter_mut() {
                *v = -*v;
            }
            let pq = dot(&p, &q);
            if pq <= 0.0 || rho == 0.0 {
                break;
            }
            let alpha = rho / pq;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * q[i];
            }
            if dot(&r, &r).sqrt() <= target {
                break;
            }
            for i in 0..n {
                z[i] = r[i] * inv[i];
            }
            project(&mut z);
            let rho_next = dot(&r, &z);
            let beta = rho_next / rho;
            rho = rho_next;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        project(&mut x);
    }
    Ok((RealField(x), used))
}
