use serde::{Deserialize, Serialize};

use super::{EnvironmentSpec, Neighborhood};
use crate::error::{Error, Result};
use crate::io::Sig17;

/// Conductances `c_{x, x+z}` for `x` in an integer box `[lo, hi)` and `z` in the
/// half set. Values with `z` in `-N*` are read through symmetry as `c_{x+z, x}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConductanceField {
    nbhd: Neighborhood,
    lo: Vec<i64>,
    hi: Vec<i64>,
    /// cell-major (first coordinate fastest), jump-minor
    values: Vec<f64>,
}

impl ConductanceField {
    /// Builds a field from a closure; used by sampling and by tests that
    /// want hand-labelled conductances.
    pub fn from_fn(
        nbhd: Neighborhood,
        lo: Vec<i64>,
        hi: Vec<i64>,
        mut f: impl FnMut(&[i64], usize) -> f64,
    ) -> Result<Self> {
        check_box(&nbhd, &lo, &hi)?;
        let m = nbhd.half_len();
        let cells = box_cells(&lo, &hi);
        let mut values = Vec::with_capacity(cells * m);
        let mut x = lo.clone();
        for _ in 0..cells {
            for zi in 0..m {
                let c = f(&x, zi);
                if !(c.is_finite() && c > 0.0) {
                    return Err(Error::InvalidEnvironment(format!(
                        "conductance at x={x:?}, z={:?} is {c}",
                        nbhd.half_set()[zi]
                    )));
                }
                values.push(c);
            }
            advance(&mut x, &lo, &hi);
        }
        Ok(Self { nbhd, lo, hi, values })
    }

    pub fn neighborhood(&self) -> &Neighborhood {
        &self.nbhd
    }

    pub fn dim(&self) -> usize {
        self.nbhd.dim()
    }

    pub fn lo(&self) -> &[i64] {
        &self.lo
    }

    pub fn hi(&self) -> &[i64] {
        &self.hi
    }

    pub fn contains(&self, x: &[i64]) -> bool {
        x.len() == self.lo.len()
            && x.iter().zip(&self.lo).zip(&self.hi).all(|((v, l), h)| l <= v && v < h)
    }

    /// True when the box contains the fundamental cell `[0, n)^d`.
    pub fn covers_cell(&self, n: usize) -> bool {
        self.lo.iter().all(|&l| l <= 0) && self.hi.iter().all(|&h| h >= n as i64)
    }

    /// `c_{x, x+z}` for the `zi`-th half-set jump, if `x` is in the box.
    pub fn get(&self, x: &[i64], zi: usize) -> Option<f64> {
        if !self.contains(x) || zi >= self.nbhd.half_len() {
            return None;
        }
        let mut idx = 0usize;
        let mut stride = 1usize;
        for k in 0..x.len() {
            idx += (x[k] - self.lo[k]) as usize * stride;
            stride *= (self.hi[k] - self.lo[k]) as usize;
        }
        Some(self.values[idx * self.nbhd.half_len() + zi])
    }

    /// Iterates `(x, zi, c)` in storage order.
    pub fn iter(&self) -> impl Iterator<Item = (Vec<i64>, usize, f64)> + '_ {
        let m = self.nbhd.half_len();
        self.values
            .chunks(m)
            .scan(self.lo.clone(), move |x, chunk| {
                let here = x.clone();
                advance(x, &self.lo, &self.hi);
                Some((here, chunk))
            })
            .flat_map(|(x, chunk)| chunk.iter().enumerate().map(move |(zi, &c)| (x.clone(), zi, c)))
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = FieldDoc {
            dim: self.dim(),
            bounds: [self.lo.clone(), self.hi.clone()],
            neighborhood: self.nbhd.clone(),
            values: self
                .iter()
                .map(|(x, zi, c)| FieldEntry { x, z: self.nbhd.half_set()[zi].clone(), c: Sig17(c) })
                .collect(),
        };
        Ok(serde_json::to_string(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: FieldDoc = serde_json::from_str(text)?;
        if doc.neighborhood.dim() != doc.dim {
            return Err(Error::InvalidEnvironment(format!(
                "dim {} disagrees with neighbourhood dimension {}",
                doc.dim,
                doc.neighborhood.dim()
            )));
        }
        let [lo, hi] = doc.bounds;
        check_box(&doc.neighborhood, &lo, &hi)?;
        let m = doc.neighborhood.half_len();
        let cells = box_cells(&lo, &hi);
        let mut slots = vec![None; cells * m];
        for e in &doc.values {
            let zi = match doc.neighborhood.locate(&e.z) {
                Some((zi, 1)) => zi,
                _ => return Err(Error::InvalidEnvironment(format!("jump {:?} not in the half set", e.z))),
            };
            let idx = cell_index(&lo, &hi, &e.x)
                .ok_or_else(|| Error::InvalidEnvironment(format!("site {:?} outside the box", e.x)))?;
            let slot = &mut slots[idx * m + zi];
            if slot.is_some() {
                return Err(Error::InvalidEnvironment(format!("duplicate entry x={:?} z={:?}", e.x, e.z)));
            }
            *slot = Some(e.c.0);
        }
        let values: Option<Vec<f64>> = slots.into_iter().collect();
        let values = values.ok_or_else(|| Error::InvalidEnvironment("missing conductance entries".into()))?;
        if let Some(c) = values.iter().find(|c| !(c.is_finite() && **c > 0.0)) {
            return Err(Error::InvalidEnvironment(format!("non-positive conductance {c}")));
        }
        Ok(Self { nbhd: doc.neighborhood, lo, hi, values })
    }
}

#[derive(Serialize, Deserialize)]
struct FieldDoc {
    dim: usize,
    #[serde(rename = "box")]
    bounds: [Vec<i64>; 2],
    neighborhood: Neighborhood,
    values: Vec<FieldEntry>,
}

#[derive(Serialize, Deserialize)]
struct FieldEntry {
    x: Vec<i64>,
    z: Vec<i64>,
    c: Sig17,
}

fn check_box(nbhd: &Neighborhood, lo: &[i64], hi: &[i64]) -> Result<()> {
    if lo.len() != nbhd.dim() || hi.len() != nbhd.dim() {
        return Err(Error::InvalidArgument(format!(
            "box corners have dimensions {} and {}, neighbourhood has {}",
            lo.len(),
            hi.len(),
            nbhd.dim()
        )));
    }
    if lo.iter().zip(hi).any(|(l, h)| l >= h) {
        return Err(Error::InvalidArgument(format!("empty box [{lo:?}, {hi:?})")));
    }
    Ok(())
}

fn box_cells(lo: &[i64], hi: &[i64]) -> usize {
    lo.iter().zip(hi).map(|(l, h)| (h - l) as usize).product()
}

fn cell_index(lo: &[i64], hi: &[i64], x: &[i64]) -> Option<usize> {
    if x.len() != lo.len() {
        return None;
    }
    let mut idx = 0usize;
    let mut stride = 1usize;
    for k in 0..x.len() {
        if x[k] < lo[k] || x[k] >= hi[k] {
            return None;
        }
        idx += (x[k] - lo[k]) as usize * stride;
        stride *= (hi[k] - lo[k]) as usize;
    }
    Some(idx)
}

fn advance(x: &mut [i64], lo: &[i64], hi: &[i64]) {
    for k in 0..x.len() {
        x[k] += 1;
        if x[k] < hi[k] {
            return;
        }
        x[k] = lo[k];
    }
}

/// Samples `spec` on the box `[lo, hi)`. Overlapping boxes agree bit for bit.
pub fn sample_field(
    spec: &EnvironmentSpec,
    nbhd: &Neighborhood,
    lo: Vec<i64>,
    hi: Vec<i64>,
) -> Result<ConductanceField> {
    spec.validate(nbhd)?;
    ConductanceField::from_fn(nbhd.clone(), lo, hi, |x, zi| spec.conductance(nbhd, x, zi))
}

/// `N^{-d} sum_{x in [0,N)^d} c_{x,x+z}^moment` for each half-set jump.
pub fn ergodic_average(field: &ConductanceField, n: usize, moment: u32) -> Result<Vec<f64>> {
    if !(1..=2).contains(&moment) {
        return Err(Error::InvalidArgument(format!("moment must be 1 or 2, got {moment}")));
    }
    if n == 0 || !field.covers_cell(n) {
        return Err(Error::BoxTooSmall { n, dim: field.dim() });
    }
    let d = field.dim();
    let m = field.neighborhood().half_len();
    let zero = vec![0i64; d];
    let top = vec![n as i64; d];
    let cells = box_cells(&zero, &top);
    let mut sums = vec![0.0; m];
    let mut x = zero.clone();
    for _ in 0..cells {
        for (zi, s) in sums.iter_mut().enumerate() {
            let c = field.get(&x, zi).expect("covered");
            *s += c.powi(moment as i32);
        }
        advance(&mut x, &zero, &top);
    }
    Ok(sums.into_iter().map(|s| s / cells as f64).collect())
}

pub(crate) fn advance_in_box(x: &mut [i64], lo: &[i64], hi: &[i64]) {
    advance(x, lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::Law;

    #[test]
    fn constant_field() {
        let nbhd = Neighborhood::nearest(2);
        let f = sample_field(&EnvironmentSpec::constant(0.5), &nbhd, vec![-1, -1], vec![3, 2]).unwrap();
        assert_eq!(f.iter().count(), 4 * 3 * 2);
        assert!(f.iter().all(|(_, _, c)| c == 0.5));
        assert_eq!(f.get(&[3, 0], 0), None);
        assert_eq!(f.get(&[-1, 1], 1), Some(0.5));
    }

    #[test]
    fn overlapping_boxes_agree() {
        let nbhd = Neighborhood::new(vec![vec![1], vec![2]]).unwrap();
        let spec = EnvironmentSpec::iid(Law::LogNormal { mu: 0.0, sigma: 0.5 }, 17);
        let a = sample_field(&spec, &nbhd, vec![-5], vec![10]).unwrap();
        let b = sample_field(&spec, &nbhd, vec![2], vec![30]).unwrap();
        for x in 2..10 {
            for zi in 0..2 {
                assert_eq!(a.get(&[x], zi), b.get(&[x], zi));
            }
        }
        let other = sample_field(&spec.clone().with_seed(18), &nbhd, vec![2], vec![30]).unwrap();
        assert_ne!(other.get(&[5], 0), b.get(&[5], 0));
    }

    #[test]
    fn json_round_trip() {
        let nbhd = Neighborhood::nearest(2);
        let spec = EnvironmentSpec::iid(Law::Uniform { a: 1.0, b: 2.0 }, 3);
        let f = sample_field(&spec, &nbhd, vec![0, -2], vec![3, 1]).unwrap();
        let text = f.to_json().unwrap();
        assert_eq!(ConductanceField::from_json(&text).unwrap(), f);
        assert!(ConductanceField::from_json("{\"dim\": 1}").is_err());
    }

    #[test]
    fn iteration_order() {
        let nbhd = Neighborhood::nearest(2);
        let f = ConductanceField::from_fn(nbhd, vec![0, 0], vec![2, 2], |x, zi| 1.0 + (x[0] + 10 * x[1]) as f64 + 100.0 * zi as f64)
            .unwrap();
        let seen: Vec<(Vec<i64>, usize)> = f.iter().map(|(x, zi, _)| (x, zi)).collect();
        assert_eq!(seen[0], (vec![0, 0], 0));
        assert_eq!(seen[1], (vec![0, 0], 1));
        assert_eq!(seen[2], (vec![1, 0], 0));
        assert_eq!(seen[4], (vec![0, 1], 0));
        assert!(f.iter().all(|(x, zi, c)| c == 1.0 + (x[0] + 10 * x[1]) as f64 + 100.0 * zi as f64));
    }

    #[test]
    fn rejects_nonpositive() {
        let nbhd = Neighborhood::nearest(1);
        assert!(ConductanceField::from_fn(nbhd, vec![0], vec![3], |x, _| x[0] as f64).is_err());
    }

    #[test]
    fn ergodic_averages() {
        let nbhd = Neighborhood::nearest(1);
        let f = ConductanceField::from_fn(nbhd, vec![0], vec![4], |x, _| 1.0 + x[0] as f64).unwrap();
        assert_eq!(ergodic_average(&f, 4, 1).unwrap(), vec![2.5]);
        assert_eq!(ergodic_average(&f, 4, 2).unwrap(), vec![7.5]);
        assert_eq!(ergodic_average(&f, 2, 1).unwrap(), vec![1.5]);
        assert!(ergodic_average(&f, 5, 1).is_err());
        assert!(ergodic_average(&f, 4, 3).is_err());
    }

    #[test]
    fn ergodic_average_approaches_law_mean() {
        let nbhd = Neighborhood::nearest(1);
        let spec = EnvironmentSpec::iid(Law::Uniform { a: 1.0, b: 2.0 }, 99);
        let f = sample_field(&spec, &nbhd, vec![0], vec![40_000]).unwrap();
        let m1 = ergodic_average(&f, 40_000, 1).unwrap()[0];
        let m2 = ergodic_average(&f, 40_000, 2).unwrap()[0];
        // standard errors: sqrt(1/12 / n) ~ 1.4e-3, second moment ~ 4.5e-3
        assert!((m1 - 1.5).abs() < 6e-3, "{m1}");
        assert!((m2 - 7.0 / 3.0).abs() < 2e-2, "{m2}");
    }
}
