use nalgebra::{DMatrix, DVector};

use crate::env::TorusModel;
use crate::error::{Error, Result};
use crate::torus::{ComplexField, RealField};

/// Dense matrix of the generator `L`, assembled from the conductances through
/// coordinate arithmetic (independent of the stencil tables used by the
/// matrix-free routines).
pub fn dense_generator(model: &TorusModel) -> DMatrix<f64> {
    let n = model.sites();
    let side = model.n() as i64;
    let mut l = DMatrix::zeros(n, n);
    let full = model.neighborhood().full_set();
    for x in 0..n {
        let xc = model.coords(x);
        for z in &full {
            let yc: Vec<i64> = xc.iter().zip(z).map(|(a, b)| (a + b).rem_euclid(side)).collect();
            let y = yc.iter().rev().fold(0usize, |acc, &c| acc * model.n() + c as usize);
            let c = model.conductance(&xc, &yc);
            l[(x, y)] += c;
            l[(x, x)] -= c;
        }
    }
    l
}

fn check_cap(model: &TorusModel, cap: usize) -> Result<()> {
    if model.sites() > cap {
        return Err(Error::DenseCapExceeded { sites: model.sites(), cap });
    }
    Ok(())
}

/// Exact LU solution of the real `2N^d x 2N^d` system
/// `-omega th_I - L th_R = rhs`, `omega th_R - L th_I = 0`.
pub fn dense_solve(model: &TorusModel, omega: f64, rhs: &RealField, cap: usize) -> Result<ComplexField> {
    check_cap(model, cap)?;
    let n = model.sites();
    if rhs.len() != n {
        return Err(Error::InvalidArgument(format!("rhs has {} entries for {n} sites", rhs.len())));
    }
    let l = dense_generator(model);
    let mut a = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] = -l[(i, j)];
            a[(n + i, n + j)] = -l[(i, j)];
        }
        a[(i, n + i)] = -omega;
        a[(n + i, i)] = omega;
    }
    let mut b = DVector::zeros(2 * n);
    for i in 0..n {
        b[i] = rhs.0[i];
    }
    let sol = a.lu().solve(&b).ok_or(Error::Singular)?;
    Ok(ComplexField { re: sol.rows(0, n).iter().copied().collect(), im: sol.rows(n, n).iter().copied().collect() })
}

/// Zero-mean solution of `-L th = rhs` by LU on `-L + 11^T / N^d`, which is
/// nonsingular and agrees with `-L` on mean-zero fields.
pub fn dense_solve_deflated(model: &TorusModel, rhs: &RealField, cap: usize) -> Result<RealField> {
    check_cap(model, cap)?;
    let n = model.sites();
    let l = dense_generator(model);
    let a = DMatrix::from_fn(n, n, |i, j| -l[(i, j)] + 1.0 / n as f64);
    let b = DVector::from_column_slice(&rhs.0);
    let sol = a.lu().solve(&b).ok_or(Error::Singular)?;
    Ok(RealField(sol.iter().copied().collect()))
}
