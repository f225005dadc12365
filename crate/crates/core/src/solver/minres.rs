//! Preconditioned MINRES for real symmetric (possibly indefinite) systems.
//!
//! Follows the Paige-Saunders recurrences. The preconditioner must be
//! symmetric positive definite; convergence is monitored through the
//! estimate of `||r||_{M^{-1}}` carried by the recurrence.

pub(crate) struct MinresOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves `A x = b` from `x = 0`, stopping once the preconditioned residual
/// estimate falls below `rtol` times its initial value.
pub(crate) fn minres(
    op: &dyn Fn(&[f64], &mut [f64]),
    precond: &dyn Fn(&[f64], &mut [f64]),
    b: &[f64],
    rtol: f64,
    max_iter: usize,
) -> MinresOutcome {
    let n = b.len();
    let mut x = vec![0.0; n];
    let mut r1 = b.to_vec();
    let mut y = vec![0.0; n];
    precond(&r1, &mut y);
    let beta1_sq = dot(&r1, &y);
    if beta1_sq <= 0.0 {
        return MinresOutcome { x, iterations: 0 };
    }
    let beta1 = beta1_sq.sqrt();

    let mut r2 = r1.clone();
    let mut v = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut w1 = vec![0.0; n];
    let mut w2 = vec![0.0; n];

    let mut oldb = 0.0;
    let mut beta = beta1;
    let mut dbar = 0.0;
    let mut epsln = 0.0;
    let mut phibar = beta1;
    let mut cs = -1.0;
    let mut sn = 0.0;

    for itn in 1..=max_iter {
        let s = 1.0 / beta;
        for (vi, yi) in v.iter_mut().zip(&y) {
            *vi = s * yi;
        }
        op(&v, &mut y);
        if itn >= 2 {
            let f = beta / oldb;
            for (yi, ri) in y.iter_mut().zip(&r1) {
                *yi -= f * ri;
            }
        }
        let alfa = dot(&v, &y);
        let f = alfa / beta;
        for (yi, ri) in y.iter_mut().zip(&r2) {
            *yi -= f * ri;
        }
        std::mem::swap(&mut r1, &mut r2);
        r2.copy_from_slice(&y);
        precond(&r2, &mut y);
        oldb = beta;
        beta = dot(&r2, &y).max(0.0).sqrt();

        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        let gamma = gbar.hypot(beta).max(f64::EPSILON);
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar *= sn;

        let denom = 1.0 / gamma;
        std::mem::swap(&mut w1, &mut w2);
        std::mem::swap(&mut w2, &mut w);
        for i in 0..n {
            w[i] = (v[i] - oldeps * w1[i] - delta * w2[i]) * denom;
            x[i] += phi * w[i];
        }

        if phibar <= rtol * beta1 || beta == 0.0 {
            return MinresOutcome { x, iterations: itn };
        }
    }
    MinresOutcome { x, iterations: max_iter }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_indefinite_system() {
        // symmetric indefinite 3x3
        let a = [[2.0, 1.0, 0.0], [1.0, -3.0, 1.0], [0.0, 1.0, 1.0]];
        let op = |v: &[f64], out: &mut [f64]| {
            for i in 0..3 {
                out[i] = (0..3).map(|j| a[i][j] * v[j]).sum();
            }
        };
        let id = |v: &[f64], out: &mut [f64]| out.copy_from_slice(v);
        let b = [1.0, 2.0, 3.0];
        let out = minres(&op, &id, &b, 1e-14, 50);
        let mut ax = [0.0; 3];
        op(&out.x, &mut ax);
        for i in 0..3 {
            assert!((ax[i] - b[i]).abs() < 1e-12, "{ax:?}");
        }
        assert!(out.iterations <= 3);
    }
}
