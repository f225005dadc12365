//! The environment seen from the walker, for a periodic pattern.
//!
//! For a pattern with periods `p_1, ..., p_d` the translates of the
//! environment form a finite set of `p_1 ... p_d` states. From state `s` the
//! chain moves to `s + z (mod p)` at rate `c_{0,z}` of the translated
//! environment, which is the pattern conductance `c_{s,s+z}`. The uniform law
//! on states is reversible.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::env::{pattern_cell, EnvironmentKind, EnvironmentSpec, Neighborhood};
use crate::error::{Error, Result};
use crate::mobility::MobilityMatrix;
use crate::torus::ComplexField;

#[derive(Debug, Clone, PartialEq)]
pub struct EnvChain {
    periods: Vec<usize>,
    nbhd: Neighborhood,
    /// `states x full_set` rates.
    rates: Vec<f64>,
    /// `states x full_set` target states.
    targets: Vec<usize>,
}

impl EnvChain {
    /// Chain of a periodic or constant environment spec. A constant
    /// environment is a pattern of period 1 in every direction.
    pub fn from_spec(spec: &EnvironmentSpec, nbhd: &Neighborhood) -> Result<Self> {
        spec.validate(nbhd)?;
        match &spec.kind {
            EnvironmentKind::Constant { value } => {
                Self::from_pattern(vec![1; nbhd.dim()], vec![vec![*value; nbhd.half_len()]], nbhd)
            }
            EnvironmentKind::Periodic { periods, values } => Self::from_pattern(periods.clone(), values.clone(), nbhd),
            EnvironmentKind::Iid { .. } => Err(Error::InvalidEnvironment(
                "the environment chain is finite only for periodic environments".into(),
            )),
        }
    }

    /// `values[cell][zi]` is `c_{x,x+z}` for `x` in pattern cell `cell`
    /// (first coordinate fastest) and `z` the `zi`-th half-set jump.
    pub fn from_pattern(periods: Vec<usize>, values: Vec<Vec<f64>>, nbhd: &Neighborhood) -> Result<Self> {
        EnvironmentSpec::periodic(periods.clone(), values.clone()).validate(nbhd)?;
        let states: usize = periods.iter().product();
        let full = nbhd.full_set();
        let m = nbhd.half_len();
        let mut rates = Vec::with_capacity(states * full.len());
        let mut targets = Vec::with_capacity(states * full.len());
        for s in 0..states {
            let x = cell_coords(&periods, s);
            for (j, z) in full.iter().enumerate() {
                let y: Vec<i64> = x.iter().zip(z).map(|(a, b)| a + b).collect();
                let rate = if j < m {
                    values[s][j]
                } else {
                    // c_{x,x-z} = c_{x-z,x}
                    values[pattern_cell(&periods, &y)][j - m]
                };
                rates.push(rate);
                targets.push(pattern_cell(&periods, &y));
            }
        }
        Ok(Self { periods, nbhd: nbhd.clone(), rates, targets })
    }

    pub fn states(&self) -> usize {
        self.periods.iter().product()
    }

    pub fn periods(&self) -> &[usize] {
        &self.periods
    }

    pub fn neighborhood(&self) -> &Neighborhood {
        &self.nbhd
    }

    fn jumps(&self) -> usize {
        2 * self.nbhd.half_len()
    }

    /// `c_{0,z}` in state `s` for the `j`-th jump of the full neighbourhood.
    pub fn rate(&self, s: usize, j: usize) -> f64 {
        self.rates[s * self.jumps() + j]
    }

    /// State reached from `s` by the `j`-th jump.
    pub fn target(&self, s: usize, j: usize) -> usize {
        self.targets[s * self.jumps() + j]
    }

    /// Largest violation of `c_{0,z}(s) = c_{0,-z}(s + z)`.
    pub fn covariance_defect(&self) -> f64 {
        let m = self.nbhd.half_len();
        let mut worst = 0.0f64;
        for s in 0..self.states() {
            for zi in 0..m {
                let t = self.target(s, zi);
                worst = worst.max((self.rate(s, zi) - self.rate(t, m + zi)).abs());
                worst = worst.max((self.rate(s, m + zi) - self.rate(self.target(s, m + zi), zi)).abs());
            }
        }
        worst
    }

    /// Dense generator `(L f)(s) = sum_z c_{0,z}(s) (f(s+z) - f(s))`.
    pub fn generator(&self) -> DMatrix<f64> {
        let n = self.states();
        let mut l = DMatrix::zeros(n, n);
        for s in 0..n {
            for j in 0..self.jumps() {
                let c = self.rate(s, j);
                l[(s, self.target(s, j))] += c;
                l[(s, s)] -= c;
            }
        }
        l
    }

    /// `gamma_k(s) = sum_z c_{0,z}(s) z_k`.
    pub fn drift(&self, k: usize) -> Vec<f64> {
        let full = self.nbhd.full_set();
        (0..self.states()).map(|s| full.iter().enumerate().map(|(j, z)| self.rate(s, j) * z[k] as f64).sum()).collect()
    }

    /// `sum_z E[c_{0,z}] z_j z_k` with `E` the uniform average over states.
    pub fn jump_second_moment(&self) -> Vec<Vec<f64>> {
        let d = self.nbhd.dim();
        let full = self.nbhd.full_set();
        let n = self.states() as f64;
        let mut out = vec![vec![0.0; d]; d];
        for (j, z) in full.iter().enumerate() {
            let mean: f64 = (0..self.states()).map(|s| self.rate(s, j)).sum::<f64>() / n;
            for a in 0..d {
                for b in 0..d {
                    out[a][b] += mean * (z[a] * z[b]) as f64;
                }
            }
        }
        out
    }

    /// Solves `(i omega - L) Theta = rhs` on the state space; `omega = 0`
    /// returns the mean-zero solution.
    pub fn solve(&self, omega: f64, rhs: &[f64]) -> Result<ComplexField> {
        let n = self.states();
        let l = self.generator();
        if omega == 0.0 {
            let a = DMatrix::from_fn(n, n, |i, j| -l[(i, j)] + 1.0 / n as f64);
            let x = a.lu().solve(&DVector::from_column_slice(rhs)).ok_or(Error::Singular)?;
            return Ok(ComplexField { re: x.iter().copied().collect(), im: vec![0.0; n] });
        }
        let a = DMatrix::from_fn(n, n, |i, j| {
            let diag = if i == j { Complex64::new(0.0, omega) } else { Complex64::new(0.0, 0.0) };
            diag - l[(i, j)]
        });
        let b = DVector::from_iterator(n, rhs.iter().map(|v| Complex64::new(*v, 0.0)));
        let x = a.lu().solve(&b).ok_or(Error::Singular)?;
        Ok(ComplexField { re: x.iter().map(|v| v.re).collect(), im: x.iter().map(|v| v.im).collect() })
    }
}

fn cell_coords(periods: &[usize], mut s: usize) -> Vec<i64> {
    periods
        .iter()
        .map(|&p| {
            let c = s % p;
            s /= p;
            c as i64
        })
        .collect()
}

/// Infinite-volume mobility `sigma(omega)` of a periodic environment,
/// through the environment chain:
/// `sigma_jk = sum_z E[c_{0,z}] z_j z_k - 2 <gamma_j, Theta_k>`.
/// The returned matrix has `n = 0`.
pub fn periodic_exact_sigma(spec: &EnvironmentSpec, nbhd: &Neighborhood, omega: f64) -> Result<MobilityMatrix> {
    if !(omega.is_finite() && omega >= 0.0) {
        return Err(Error::InvalidArgument(format!("omega must be finite and non-negative, got {omega}")));
    }
    let chain = EnvChain::from_spec(spec, nbhd)?;
    let d = nbhd.dim();
    let first = chain.jump_second_moment();
    let gammas: Vec<Vec<f64>> = (0..d).map(|k| chain.drift(k)).collect();
    let thetas: Vec<ComplexField> = gammas.iter().map(|g| chain.solve(omega, g)).collect::<Result<_>>()?;
    let states = chain.states() as f64;
    let mut entries = vec![vec![Complex64::new(0.0, 0.0); d]; d];
    for j in 0..d {
        for k in j..d {
            let inner = gammas[j]
                .iter()
                .enumerate()
                .map(|(s, g)| thetas[k].get(s) * g)
                .sum::<Complex64>()
                / states;
            let v = Complex64::new(first[j][k], 0.0) - 2.0 * inner;
            entries[j][k] = v;
            entries[k][j] = v;
        }
    }
    Ok(MobilityMatrix { n: 0, omega, entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{torus_from_spec, Law};
    use crate::mobility::{diffusion_matrix, mobility_matrix};
    use crate::solver::SolveConfig;

    fn pattern123() -> EnvironmentSpec {
        EnvironmentSpec::periodic(vec![3], vec![vec![1.0], vec![2.0], vec![3.0]])
    }

    #[test]
    fn constant_pattern() {
        let nbhd = Neighborhood::nearest(2);
        let s = periodic_exact_sigma(&EnvironmentSpec::constant(1.25), &nbhd, 0.8).unwrap();
        assert!(s.max_abs_diff_scalar(2.5) < 1e-14);
    }

    #[test]
    fn harmonic_mean() {
        let s = periodic_exact_sigma(&pattern123(), &Neighborhood::nearest(1), 0.0).unwrap();
        let oracle = 2.0 * 3.0 / (1.0 / 1.0 + 1.0 / 2.0 + 1.0 / 3.0);
        assert!((s.get(0, 0).re - oracle).abs() < 1e-12);
        assert!(s.get(0, 0).im.abs() < 1e-15);
    }

    #[test]
    fn chain_structure() {
        let chain = EnvChain::from_spec(&pattern123(), &Neighborhood::nearest(1)).unwrap();
        assert_eq!(chain.states(), 3);
        // from state 0: +1 at rate c_{0,1} = 1 to state 1, -1 at rate c_{0,-1} = c_{2,3} = 3 to state 2
        assert_eq!((chain.rate(0, 0), chain.target(0, 0)), (1.0, 1));
        assert_eq!((chain.rate(0, 1), chain.target(0, 1)), (3.0, 2));
        assert_eq!(chain.covariance_defect(), 0.0);
        let l = chain.generator();
        assert!((&l - l.transpose()).abs().max() == 0.0);
        assert_eq!(chain.drift(0).iter().sum::<f64>(), 0.0);
    }

    #[test]
    fn two_dimensional_pattern_is_covariant() {
        let nbhd = Neighborhood::new(vec![vec![1, 0], vec![0, 1], vec![1, 1]]).unwrap();
        let values: Vec<Vec<f64>> = (0..6).map(|i| vec![1.0 + i as f64, 2.0 + 0.5 * i as f64, 0.3 + 0.1 * i as f64]).collect();
        let spec = EnvironmentSpec::periodic(vec![2, 3], values);
        let chain = EnvChain::from_spec(&spec, &nbhd).unwrap();
        assert_eq!(chain.covariance_defect(), 0.0);
        for k in 0..2 {
            assert!(chain.drift(k).iter().sum::<f64>().abs() < 1e-12);
        }
        let l = chain.generator();
        assert!((&l - l.transpose()).abs().max() < 1e-15);
        let cfg = SolveConfig::default().with_tol(1e-12);
        let exact = periodic_exact_sigma(&spec, &nbhd, 0.7).unwrap();
        let torus = torus_from_spec(&spec, &nbhd, 6).unwrap();
        assert!(exact.max_abs_diff(&mobility_matrix(&torus, 0.7, &cfg).unwrap()) < 1e-9);
    }

    #[test]
    fn matches_torus_at_multiples_of_period() {
        let nbhd = Neighborhood::nearest(1);
        let cfg = SolveConfig::default().with_tol(1e-12);
        for k in [1, 2, 4] {
            let torus = torus_from_spec(&pattern123(), &nbhd, 3 * k).unwrap();
            let exact = periodic_exact_sigma(&pattern123(), &nbhd, 1.0).unwrap();
            assert!(exact.max_abs_diff(&mobility_matrix(&torus, 1.0, &cfg).unwrap()) < 1e-9);
            let exact0 = periodic_exact_sigma(&pattern123(), &nbhd, 0.0).unwrap();
            assert!(exact0.max_abs_diff(&diffusion_matrix(&torus, &cfg).unwrap()) < 1e-9);
        }
    }

    #[test]
    fn iid_is_rejected() {
        let spec = EnvironmentSpec::iid(Law::Uniform { a: 1.0, b: 2.0 }, 0);
        assert!(EnvChain::from_spec(&spec, &Neighborhood::nearest(1)).is_err());
    }
}
