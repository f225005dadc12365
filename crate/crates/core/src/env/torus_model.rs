use super::{sample_field, ConductanceField, EnvironmentSpec, Neighborhood};
use crate::error::{Error, Result};

/// Conductances periodized onto the discrete torus `T^d_N = Z^d / N Z^d`.
///
/// Sites are numbered lexicographically with the first coordinate fastest.
/// For every site `x` and half-set jump `z` the model stores `c_{x,x+z}` and
/// the indices of `x+z` and `x-z`.
#[derive(Debug, Clone, PartialEq)]
pub struct TorusModel {
    n: usize,
    nbhd: Neighborhood,
    cond: Vec<f64>,
    fwd: Vec<usize>,
    bwd: Vec<usize>,
}

impl TorusModel {
    /// Builds a torus from a flat `site * |N*| + jump` conductance table.
    pub fn from_conductances(nbhd: Neighborhood, n: usize, cond: Vec<f64>) -> Result<Self> {
        let max_norm = nbhd.max_norm();
        if n <= 2 * max_norm {
            return Err(Error::TorusTooSmall { n, max_norm });
        }
        let d = nbhd.dim();
        let m = nbhd.half_len();
        let sites = n
            .checked_pow(d as u32)
            .ok_or_else(|| Error::InvalidArgument(format!("{n}^{d} sites overflows")))?;
        if cond.len() != sites * m {
            return Err(Error::InvalidArgument(format!(
                "conductance table has {} entries, expected {}",
                cond.len(),
                sites * m
            )));
        }
        if let Some(i) = cond.iter().position(|c| !(c.is_finite() && *c > 0.0)) {
            return Err(Error::InvalidEnvironment(format!(
                "torus conductance {} at site {}, jump {} is not positive",
                cond[i],
                i / m,
                i % m
            )));
        }
        let mut model = Self { n, nbhd, cond, fwd: vec![0; sites * m], bwd: vec![0; sites * m] };
        for site in 0..sites {
            let x = model.coords(site);
            for (zi, z) in model.nbhd.half_set().iter().enumerate() {
                let plus: Vec<i64> = x.iter().zip(z).map(|(a, b)| a + b).collect();
                let minus: Vec<i64> = x.iter().zip(z).map(|(a, b)| a - b).collect();
                model.fwd[site * m + zi] = model.site_of(&plus);
                model.bwd[site * m + zi] = model.site_of(&minus);
            }
        }
        Ok(model)
    }

    /// Homogeneous torus with every conductance equal to `c`.
    pub fn constant(nbhd: Neighborhood, n: usize, c: f64) -> Result<Self> {
        let sites = n.pow(nbhd.dim() as u32);
        let m = nbhd.half_len();
        Self::from_conductances(nbhd, n, vec![c; sites * m])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.nbhd.dim()
    }

    pub fn neighborhood(&self) -> &Neighborhood {
        &self.nbhd
    }

    /// `N^d`.
    pub fn sites(&self) -> usize {
        self.cond.len() / self.nbhd.half_len()
    }

    /// Representative of `site` in `[0, N)^d`.
    pub fn coords(&self, site: usize) -> Vec<i64> {
        let mut rest = site;
        (0..self.dim())
            .map(|_| {
                let c = rest % self.n;
                rest /= self.n;
                c as i64
            })
            .collect()
    }

    /// Torus site of an arbitrary point of `Z^d`.
    pub fn site_of(&self, x: &[i64]) -> usize {
        let n = self.n as i64;
        x.iter().rev().fold(0usize, |acc, &c| acc * self.n + c.rem_euclid(n) as usize)
    }

    /// `c^{(N)}_{x, x+z}` for the `zi`-th half-set jump.
    #[inline]
    pub fn cond(&self, site: usize, zi: usize) -> f64 {
        self.cond[site * self.nbhd.half_len() + zi]
    }

    /// `c^{(N)}_{x, x-z}`, which by symmetry is `c^{(N)}_{x-z, x}`.
    #[inline]
    pub fn cond_back(&self, site: usize, zi: usize) -> f64 {
        self.cond(self.bwd(site, zi), zi)
    }

    /// Site index of `x + z`.
    #[inline]
    pub fn fwd(&self, site: usize, zi: usize) -> usize {
        self.fwd[site * self.nbhd.half_len() + zi]
    }

    /// Site index of `x - z`.
    #[inline]
    pub fn bwd(&self, site: usize, zi: usize) -> usize {
        self.bwd[site * self.nbhd.half_len() + zi]
    }

    /// Total jump rate out of `site`, `sum_{z in N} c_{x,x+z}`.
    pub fn exit_rate(&self, site: usize) -> f64 {
        (0..self.nbhd.half_len())
            .map(|zi| self.cond(site, zi) + self.cond_back(site, zi))
            .sum()
    }

    pub fn max_exit_rate(&self) -> f64 {
        (0..self.sites()).map(|s| self.exit_rate(s)).fold(0.0, f64::max)
    }

    /// Flat `site * |N*| + jump` table.
    pub fn cond_table(&self) -> &[f64] {
        &self.cond
    }

    /// `m_N[c_{., .+z}]` for the `zi`-th half-set jump.
    pub fn mean_cond(&self, zi: usize) -> f64 {
        let s: f64 = (0..self.sites()).map(|x| self.cond(x, zi)).sum();
        s / self.sites() as f64
    }

    /// `m_N[c_{., .-z}]`; equal to [`mean_cond`](Self::mean_cond) up to summation order.
    pub fn mean_cond_back(&self, zi: usize) -> f64 {
        let s: f64 = (0..self.sites()).map(|x| self.cond_back(x, zi)).sum();
        s / self.sites() as f64
    }

    /// `c^{(N)}_{x,y}` for arbitrary representatives `x, y` in `Z^d`; zero
    /// when `y - x` is not congruent to a jump of `N`.
    pub fn conductance(&self, x: &[i64], y: &[i64]) -> f64 {
        let n = self.n as i64;
        // N > 2||N||_inf makes the matching jump unique
        for (zi, z) in self.nbhd.half_set().iter().enumerate() {
            let fwd = x.iter().zip(y).zip(z).all(|((a, b), c)| (b - a - c).rem_euclid(n) == 0);
            if fwd {
                return self.cond(self.site_of(x), zi);
            }
            let back = x.iter().zip(y).zip(z).all(|((a, b), c)| (b - a + c).rem_euclid(n) == 0);
            if back {
                return self.cond(self.site_of(y), zi);
            }
        }
        0.0
    }
}

/// Samples `spec` on the fundamental cell `[0, n)^d` and periodizes it.
pub fn torus_from_spec(spec: &EnvironmentSpec, nbhd: &Neighborhood, n: usize) -> Result<TorusModel> {
    let d = nbhd.dim();
    let field = sample_field(spec, nbhd, vec![0; d], vec![n as i64; d])?;
    periodize(&field, n)
}

/// Periodizes `field` onto the torus of side `n`: the conductances of the
/// fundamental cell `[0, n)^d` are tiled over `Z^d`.
pub fn periodize(field: &ConductanceField, n: usize) -> Result<TorusModel> {
    let nbhd = field.neighborhood().clone();
    let max_norm = nbhd.max_norm();
    if n <= 2 * max_norm {
        return Err(Error::TorusTooSmall { n, max_norm });
    }
    if !field.covers_cell(n) {
        return Err(Error::BoxTooSmall { n, dim: field.dim() });
    }
    let d = nbhd.dim();
    let m = nbhd.half_len();
    let sites = n.pow(d as u32);
    let mut cond = Vec::with_capacity(sites * m);
    let lo = vec![0i64; d];
    let hi = vec![n as i64; d];
    let mut x = lo.clone();
    for _ in 0..sites {
        for zi in 0..m {
            cond.push(field.get(&x, zi).expect("covered"));
        }
        super::field::advance_in_box(&mut x, &lo, &hi);
    }
    TorusModel::from_conductances(nbhd, n, cond)
}
