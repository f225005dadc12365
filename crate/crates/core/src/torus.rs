//! Generator, local drift, gradient and Dirichlet form on a [`TorusModel`].
//!
//! All inner products use the uniform probability `m_N` on the torus, i.e.
//! sums are divided by `N^d`. Reductions are pairwise in a fixed order, so
//! results do not depend on how callers schedule work.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::env::TorusModel;
use crate::error::{Error, Result};

/// Real function on the torus sites, lexicographic order with the first
/// coordinate fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RealField(pub Vec<f64>);

/// Complex function on the torus, stored as separate real and imaginary planes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexField {
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl RealField {
    pub fn zeros(sites: usize) -> Self {
        Self(vec![0.0; sites])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// `m_N`-mean.
    pub fn mean(&self) -> f64 {
        pairwise(0, self.0.len(), &|i| self.0[i]) / self.0.len() as f64
    }

    /// `<f, g>_{L^2(m_N)}`.
    pub fn dot(&self, other: &RealField) -> f64 {
        real_inner(&self.0, &other.0)
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn to_complex(&self) -> ComplexField {
        ComplexField { re: self.0.clone(), im: vec![0.0; self.0.len()] }
    }
}

impl ComplexField {
    pub fn zeros(sites: usize) -> Self {
        Self { re: vec![0.0; sites], im: vec![0.0; sites] }
    }

    pub fn new(re: Vec<f64>, im: Vec<f64>) -> Result<Self> {
        if re.len() != im.len() {
            return Err(Error::InvalidArgument(format!(
                "real plane has {} entries, imaginary plane {}",
                re.len(),
                im.len()
            )));
        }
        Ok(Self { re, im })
    }

    pub fn len(&self) -> usize {
        self.re.len()
    }

    pub fn is_empty(&self) -> bool {
        self.re.is_empty()
    }

    pub fn get(&self, i: usize) -> Complex64 {
        Complex64::new(self.re[i], self.im[i])
    }

    pub fn real_part(&self) -> RealField {
        RealField(self.re.clone())
    }

    pub fn imag_part(&self) -> RealField {
        RealField(self.im.clone())
    }

    pub fn conj(&self) -> ComplexField {
        ComplexField { re: self.re.clone(), im: self.im.iter().map(|v| -v).collect() }
    }

    /// `<f, g>_{L^2(m_N)} = N^{-d} sum conj(f) g`.
    pub fn dot(&self, other: &ComplexField) -> Complex64 {
        let re = real_inner(&self.re, &other.re) + real_inner(&self.im, &other.im);
        let im = real_inner(&self.re, &other.im) - real_inner(&self.im, &other.re);
        Complex64::new(re, im)
    }

    /// `||f||^2_{L^2(m_N)}`.
    pub fn norm_sqr(&self) -> f64 {
        real_inner(&self.re, &self.re) + real_inner(&self.im, &self.im)
    }

    pub fn is_finite(&self) -> bool {
        self.re.iter().chain(&self.im).all(|v| v.is_finite())
    }
}

/// Sum of `f(i)` over `lo..hi` by pairwise splitting.
pub(crate) fn pairwise(lo: usize, hi: usize, f: &dyn Fn(usize) -> f64) -> f64 {
    if hi - lo <= 32 {
        return (lo..hi).map(f).sum();
    }
    let mid = lo + (hi - lo) / 2;
    pairwise(lo, mid, f) + pairwise(mid, hi, f)
}

/// `N^{-d} sum f g` for raw planes.
pub(crate) fn real_inner(f: &[f64], g: &[f64]) -> f64 {
    debug_assert_eq!(f.len(), g.len());
    if f.is_empty() {
        return 0.0;
    }
    pairwise(0, f.len(), &|i| f[i] * g[i]) / f.len() as f64
}

/// Local drift `gamma_{N,k}(x) = sum_{z in N} c_{x,x+z} z_k` for coordinate `k`
/// (zero-based).
pub fn local_drift(model: &TorusModel, k: usize) -> Result<RealField> {
    if k >= model.dim() {
        return Err(Error::InvalidArgument(format!("direction {k} out of range for d = {}", model.dim())));
    }
    let mut e = vec![0.0; model.dim()];
    e[k] = 1.0;
    Ok(drift_along(model, &e))
}

/// Projection `gamma_N(x) . v` of the local drift.
pub fn drift_along(model: &TorusModel, v: &[f64]) -> RealField {
    let half = model.neighborhood().half_set();
    let proj: Vec<f64> = half
        .iter()
        .map(|z| z.iter().zip(v).map(|(a, b)| *a as f64 * b).sum())
        .collect();
    RealField(
        (0..model.sites())
            .map(|x| {
                proj.iter()
                    .enumerate()
                    .map(|(zi, zv)| (model.cond(x, zi) - model.cond_back(x, zi)) * zv)
                    .sum()
            })
            .collect(),
    )
}

/// `out = L f` for a real plane.
pub(crate) fn generator_apply(model: &TorusModel, f: &[f64], out: &mut [f64]) {
    let m = model.neighborhood().half_len();
    for (x, o) in out.iter_mut().enumerate() {
        let fx = f[x];
        let mut acc = 0.0;
        for zi in 0..m {
            acc += model.cond(x, zi) * (f[model.fwd(x, zi)] - fx);
            acc += model.cond_back(x, zi) * (f[model.bwd(x, zi)] - fx);
        }
        *o = acc;
    }
}

/// `(L f)(x) = sum_{z in N} c_{x,x+z} (f(x+z) - f(x))`.
pub fn apply_generator(model: &TorusModel, f: &ComplexField) -> ComplexField {
    let mut out = ComplexField::zeros(f.len());
    generator_apply(model, &f.re, &mut out.re);
    generator_apply(model, &f.im, &mut out.im);
    out
}

/// Real-field version of [`apply_generator`].
pub fn apply_generator_real(model: &TorusModel, f: &RealField) -> RealField {
    let mut out = RealField::zeros(f.len());
    generator_apply(model, &f.0, &mut out.0);
    out
}

/// Gradient `f(x+z) - f(x)` at site `x` along the `zi`-th half-set jump.
pub fn gradient(model: &TorusModel, f: &ComplexField, x: usize, zi: usize) -> Complex64 {
    f.get(model.fwd(x, zi)) - f.get(x)
}

/// `(1/2) N^{-d} sum_x sum_{z in N} c_{x,x+z} conj(grad f)(x,z) grad g(x,z)`,
/// which equals `<-L f, g>_{L^2(m_N)}`.
pub fn dirichlet_form(model: &TorusModel, f: &ComplexField, g: &ComplexField) -> Complex64 {
    let m = model.neighborhood().half_len();
    let term = |x: usize, y: usize, c: f64| {
        let df = f.get(y) - f.get(x);
        let dg = g.get(y) - g.get(x);
        df.conj() * dg * c
    };
    let site = |x: usize| {
        let mut acc = Complex64::new(0.0, 0.0);
        for zi in 0..m {
            acc += term(x, model.fwd(x, zi), model.cond(x, zi));
            acc += term(x, model.bwd(x, zi), model.cond_back(x, zi));
        }
        acc
    };
    let n = model.sites();
    let re = pairwise(0, n, &|x| site(x).re);
    let im = pairwise(0, n, &|x| site(x).im);
    Complex64::new(re, im) * (0.5 / n as f64)
}

/// Dirichlet energy of a real field.
pub fn dirichlet_energy(model: &TorusModel, f: &RealField) -> f64 {
    dirichlet_form(model, &f.to_complex(), &f.to_complex()).re
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{sample_field, periodize, EnvironmentSpec, Law, Neighborhood};
    use proptest::prelude::*;

    fn ring123() -> TorusModel {
        TorusModel::from_conductances(Neighborhood::nearest(1), 3, vec![1.0, 2.0, 3.0]).unwrap()
    }

    fn iid_model(dim: usize, n: usize, seed: u64) -> TorusModel {
        let nbhd = Neighborhood::nearest(dim);
        let spec = EnvironmentSpec::iid(Law::Uniform { a: 1.0, b: 2.0 }, seed);
        let f = sample_field(&spec, &nbhd, vec![0; dim], vec![n as i64; dim]).unwrap();
        periodize(&f, n).unwrap()
    }

    #[test]
    fn drift_hand_values() {
        // gamma(x) = c_{x,x+1} - c_{x-1,x}
        let g = local_drift(&ring123(), 0).unwrap();
        assert_eq!(g.0, vec![-2.0, 1.0, 1.0]);
    }

    #[test]
    fn drift_vanishes_for_constant() {
        let t = TorusModel::constant(Neighborhood::nearest(2), 5, 1.7).unwrap();
        for k in 0..2 {
            assert!(local_drift(&t, k).unwrap().0.iter().all(|v| *v == 0.0));
        }
        assert!(local_drift(&t, 2).is_err());
    }

    #[test]
    fn generator_hand_values() {
        let f = RealField(vec![1.0, 0.0, 0.0]).to_complex();
        let lf = apply_generator(&ring123(), &f);
        assert_eq!(lf.re, vec![-4.0, 1.0, 3.0]);
        let ones = RealField(vec![1.0; 3]).to_complex();
        assert!(apply_generator(&ring123(), &ones).re.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn drift_sums_to_zero() {
        let t = iid_model(2, 7, 11);
        for k in 0..2 {
            let g = local_drift(&t, k).unwrap();
            let l1: f64 = g.0.iter().map(|v| v.abs()).sum();
            assert!(g.0.iter().sum::<f64>().abs() <= 1e-12 * l1);
        }
    }

    #[test]
    fn dirichlet_matches_generator() {
        let t = iid_model(2, 6, 3);
        let f = RealField((0..36).map(|i| ((i * 7) % 11) as f64 - 5.0).collect());
        let lf = apply_generator_real(&t, &f);
        let lhs = dirichlet_energy(&t, &f);
        let rhs = -f.dot(&lf);
        assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs());
        assert_eq!(dirichlet_energy(&t, &RealField(vec![3.0; 36])), 0.0);
    }

    fn arb_field(n: usize) -> impl Strategy<Value = ComplexField> {
        (prop::collection::vec(-1.0f64..1.0, n), prop::collection::vec(-1.0f64..1.0, n))
            .prop_map(|(re, im)| ComplexField { re, im })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn generator_is_symmetric(f in arb_field(25), g in arb_field(25), seed in 0u64..1000) {
            let t = iid_model(2, 5, seed);
            let lhs = apply_generator(&t, &f).dot(&g);
            let rhs = f.dot(&apply_generator(&t, &g));
            let scale = lhs.norm().max(1e-300);
            prop_assert!((lhs - rhs).norm() <= 1e-12 * scale.max(1.0));
        }

        #[test]
        fn dirichlet_form_is_minus_generator(f in arb_field(25), g in arb_field(25), seed in 0u64..1000) {
            let t = iid_model(2, 5, seed);
            let lhs = dirichlet_form(&t, &f, &g);
            let lg = apply_generator(&t, &g);
            let rhs = -f.dot(&lg);
            prop_assert!((lhs - rhs).norm() <= 1e-12 * rhs.norm().max(1.0));
        }

        #[test]
        fn complex_energy_splits(f in arb_field(25), seed in 0u64..1000) {
            let t = iid_model(2, 5, seed);
            let whole = dirichlet_form(&t, &f, &f);
            let split = dirichlet_energy(&t, &f.real_part()) + dirichlet_energy(&t, &f.imag_part());
            prop_assert!(whole.im.abs() <= 1e-12 * whole.re.max(1.0));
            prop_assert!((whole.re - split).abs() <= 1e-12 * split.max(1.0));
        }

        #[test]
        fn negative_semidefinite(f in prop::collection::vec(-1.0f64..1.0, 25), seed in 0u64..1000) {
            let t = iid_model(2, 5, seed);
            let f = RealField(f);
            let e = dirichlet_energy(&t, &f);
            prop_assert!(e >= 0.0);
            let centered = RealField(f.0.iter().map(|v| v - f.mean()).collect());
            // irreducible walk: zero energy only for constants
            if centered.norm() > 1e-6 {
                prop_assert!(e > 0.0);
            }
        }

        #[test]
        fn generator_output_has_zero_mean(f in prop::collection::vec(-1.0f64..1.0, 36), seed in 0u64..1000) {
            let t = iid_model(2, 6, seed);
            let lf = apply_generator_real(&t, &RealField(f));
            let l1: f64 = lf.0.iter().map(|v| v.abs()).sum::<f64>() / 36.0;
            prop_assert!(lf.mean().abs() <= 1e-13 * l1.max(1.0));
        }
    }
}
