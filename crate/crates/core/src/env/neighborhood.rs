use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A good neighbourhood of the origin: a finite half set `N*` of nonzero jumps
/// whose symmetrization `N = N* ⊔ (-N*)` spans `Z^d` over the integers.
///
/// The half set fixes an orientation for every undirected jump; conductance
/// tables throughout the crate are indexed by positions in this list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawNeighborhood", into = "RawNeighborhood")]
pub struct Neighborhood {
    dim: usize,
    half_set: Vec<Vec<i64>>,
}

#[derive(Serialize, Deserialize)]
struct RawNeighborhood {
    half_set: Vec<Vec<i64>>,
}

impl TryFrom<RawNeighborhood> for Neighborhood {
    type Error = Error;

    fn try_from(raw: RawNeighborhood) -> Result<Self> {
        Neighborhood::new(raw.half_set)
    }
}

impl From<Neighborhood> for RawNeighborhood {
    fn from(n: Neighborhood) -> Self {
        RawNeighborhood { half_set: n.half_set }
    }
}

impl Neighborhood {
    /// Validates a half set of jumps.
    ///
    /// Rejects the zero vector, mixed dimensions, repeated jumps, a jump
    /// listed together with its opposite, and generator sets whose integer
    /// span is a proper sublattice of `Z^d`.
    pub fn new(half_set: Vec<Vec<i64>>) -> Result<Self> {
        let dim = match half_set.first() {
            Some(z) if !z.is_empty() => z.len(),
            Some(_) => return Err(Error::InvalidNeighborhood("zero-dimensional jump".into())),
            None => return Err(Error::InvalidNeighborhood("empty half set".into())),
        };
        for (i, z) in half_set.iter().enumerate() {
            if z.len() != dim {
                return Err(Error::InvalidNeighborhood(format!(
                    "jump {i} has dimension {} but the first jump has dimension {dim}",
                    z.len()
                )));
            }
            if z.iter().all(|&c| c == 0) {
                return Err(Error::InvalidNeighborhood("zero jump".into()));
            }
            for w in &half_set[..i] {
                if w == z {
                    return Err(Error::InvalidNeighborhood(format!("repeated jump {z:?}")));
                }
                if w.iter().zip(z).all(|(a, b)| *a == -*b) {
                    return Err(Error::InvalidNeighborhood(format!(
                        "both {w:?} and its opposite {z:?} are in the half set"
                    )));
                }
            }
        }
        let index = lattice_index(&half_set, dim);
        if index != Some(1) {
            let what = match index {
                None => "generators do not have full rank".to_string(),
                Some(k) => format!("generators span a sublattice of index {k}"),
            };
            return Err(Error::InvalidNeighborhood(format!("{what}; integer span is not Z^{dim}")));
        }
        Ok(Self { dim, half_set })
    }

    /// Nearest-neighbour jumps `{e_1, ..., e_d}`.
    pub fn nearest(dim: usize) -> Self {
        let half_set = (0..dim)
            .map(|k| (0..dim).map(|j| i64::from(j == k)).collect())
            .collect();
        Self::new(half_set).expect("canonical basis is a good neighbourhood")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_set(&self) -> &[Vec<i64>] {
        &self.half_set
    }

    /// Number of jumps in the half set.
    pub fn half_len(&self) -> usize {
        self.half_set.len()
    }

    /// `N* ∪ (-N*)`, the half set first followed by the opposites in the same order.
    pub fn full_set(&self) -> Vec<Vec<i64>> {
        let mut full = self.half_set.clone();
        full.extend(self.half_set.iter().map(|z| z.iter().map(|c| -c).collect()));
        full
    }

    /// `||N||_inf`, the largest sup-norm of a jump.
    pub fn max_norm(&self) -> usize {
        self.half_set
            .iter()
            .flat_map(|z| z.iter().map(|c| c.unsigned_abs() as usize))
            .max()
            .unwrap_or(0)
    }

    /// Position of `z` in `N`, as `(half index, +1)` or `(half index, -1)`.
    pub fn locate(&self, z: &[i64]) -> Option<(usize, i8)> {
        self.half_set.iter().enumerate().find_map(|(i, w)| {
            if w.as_slice() == z {
                Some((i, 1))
            } else if w.iter().zip(z).all(|(a, b)| *a == -*b) {
                Some((i, -1))
            } else {
                None
            }
        })
    }
}

/// Index of the lattice spanned by the rows in `Z^dim`, or `None` when the
/// rows have rank below `dim`. Computed by integer row reduction to Hermite
/// form; the index is the product of the absolute pivots.
fn lattice_index(rows: &[Vec<i64>], dim: usize) -> Option<u128> {
    let mut m: Vec<Vec<i128>> = rows
        .iter()
        .map(|r| r.iter().map(|&c| i128::from(c)).collect())
        .collect();
    let mut pivot_row = 0;
    let mut index: u128 = 1;
    for col in 0..dim {
        // Euclid on the column below `pivot_row` until one nonzero entry remains.
        loop {
            let nonzero: Vec<usize> = (pivot_row..m.len()).filter(|&r| m[r][col] != 0).collect();
            if nonzero.len() <= 1 {
                break;
            }
            let smallest = *nonzero
                .iter()
                .min_by_key(|&&r| m[r][col].unsigned_abs())
                .unwrap();
            for &r in &nonzero {
                if r != smallest {
                    let q = m[r][col] / m[smallest][col];
                    for c in 0..dim {
                        m[r][c] -= q * m[smallest][c];
                    }
                }
            }
        }
        let Some(r) = (pivot_row..m.len()).find(|&r| m[r][col] != 0) else {
            return None;
        };
        m.swap(pivot_row, r);
        index = index.checked_mul(m[pivot_row][col].unsigned_abs())?;
        pivot_row += 1;
    }
    Some(index)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_basis_is_good() {
        for d in 1..=4 {
            let n = Neighborhood::nearest(d);
            assert_eq!(n.half_len(), d);
            assert_eq!(n.full_set().len(), 2 * d);
            assert_eq!(n.max_norm(), 1);
        }
    }

    #[test]
    fn parity_obstruction_rejected() {
        let err = Neighborhood::new(vec![vec![2]]).unwrap_err();
        assert!(err.to_string().contains("index 2"), "{err}");
    }

    #[test]
    fn second_neighbours_accepted() {
        let n = Neighborhood::new(vec![vec![1], vec![2]]).unwrap();
        let mut full = n.full_set();
        full.sort();
        assert_eq!(full, vec![vec![-2], vec![-1], vec![1], vec![2]]);
        assert_eq!(n.max_norm(), 2);
    }

    #[test]
    fn rejects_bad_half_sets() {
        assert!(Neighborhood::new(vec![vec![0, 0]]).is_err());
        assert!(Neighborhood::new(vec![vec![1, 0], vec![-1, 0], vec![0, 1]]).is_err());
        assert!(Neighborhood::new(vec![vec![1, 0], vec![1, 0], vec![0, 1]]).is_err());
        assert!(Neighborhood::new(vec![vec![1, 0], vec![0]]).is_err());
        assert!(Neighborhood::new(vec![]).is_err());
        // rank deficient
        assert!(Neighborhood::new(vec![vec![1, 1], vec![2, 2]]).is_err());
        // span of (1,1),(1,-1) has index 2
        assert!(Neighborhood::new(vec![vec![1, 1], vec![1, -1]]).is_err());
    }

    #[test]
    fn non_obvious_generators() {
        // det = 1 even though neither generator is a basis vector
        assert!(Neighborhood::new(vec![vec![2, 1], vec![1, 1]]).is_ok());
        // gcd(3, 5) = 1 in d = 1
        assert!(Neighborhood::new(vec![vec![3], vec![5]]).is_ok());
        assert!(Neighborhood::new(vec![vec![4], vec![6]]).is_err());
    }

    #[test]
    fn json_validates() {
        let ok: Neighborhood = serde_json::from_str(r#"{"half_set":[[1,0],[0,1],[1,1]]}"#).unwrap();
        assert_eq!(ok.dim(), 2);
        assert!(serde_json::from_str::<Neighborhood>(r#"{"half_set":[[2]]}"#).is_err());
    }

    #[test]
    fn locate_signs() {
        let n = Neighborhood::new(vec![vec![1, 0], vec![0, 1]]).unwrap();
        assert_eq!(n.locate(&[0, -1]), Some((1, -1)));
        assert_eq!(n.locate(&[1, 0]), Some((0, 1)));
        assert_eq!(n.locate(&[1, 1]), None);
    }
}
