use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use super::Neighborhood;
use crate::error::{Error, Result};

/// Single-edge conductance law. Every law has support in `(0, inf)` and a
/// finite second moment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum Law {
    Uniform { a: f64, b: f64 },
    LogNormal { mu: f64, sigma: f64 },
    TwoPoint { low: f64, high: f64, p_low: f64 },
}

impl Law {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidEnvironment(msg));
        match *self {
            Law::Uniform { a, b } => {
                if !(a.is_finite() && b.is_finite() && a > 0.0 && b >= a) {
                    return bad(format!("uniform law needs 0 < a <= b, got a={a}, b={b}"));
                }
            }
            Law::LogNormal { mu, sigma } => {
                if !(mu.is_finite() && sigma.is_finite() && sigma >= 0.0) {
                    return bad(format!("lognormal law needs finite mu and sigma >= 0, got mu={mu}, sigma={sigma}"));
                }
            }
            Law::TwoPoint { low, high, p_low } => {
                if !(low.is_finite() && high.is_finite() && low > 0.0 && high > 0.0) {
                    return bad(format!("two-point law needs positive values, got {low}, {high}"));
                }
                if !(0.0..=1.0).contains(&p_low) {
                    return bad(format!("two-point probability {p_low} outside [0, 1]"));
                }
            }
        }
        Ok(())
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Law::Uniform { a, b } => 0.5 * (a + b),
            Law::LogNormal { mu, sigma } => (mu + 0.5 * sigma * sigma).exp(),
            Law::TwoPoint { low, high, p_low } => p_low * low + (1.0 - p_low) * high,
        }
    }

    pub fn second_moment(&self) -> f64 {
        match *self {
            Law::Uniform { a, b } => (a * a + a * b + b * b) / 3.0,
            Law::LogNormal { mu, sigma } => (2.0 * mu + 2.0 * sigma * sigma).exp(),
            Law::TwoPoint { low, high, p_low } => p_low * low * low + (1.0 - p_low) * high * high,
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match *self {
            Law::Uniform { a, b } => {
                if a == b {
                    a
                } else {
                    rng.random_range(a..b)
                }
            }
            Law::LogNormal { mu, sigma } => LogNormal::new(mu, sigma)
                .expect("validated lognormal parameters")
                .sample(rng),
            Law::TwoPoint { low, high, p_low } => {
                if rng.random::<f64>() < p_low {
                    low
                } else {
                    high
                }
            }
        }
    }
}

/// The three shipped environment families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvironmentKind {
    /// Every conductance equals `value`.
    Constant { value: f64 },
    /// Independent conductances; `laws[i]` governs jump `i` of the half set.
    /// A single law is used for every jump.
    Iid { laws: Vec<Law> },
    /// Tiling of a pattern with the given period per dimension. `values` has
    /// one entry per pattern cell (first coordinate fastest), each holding one
    /// conductance per jump of the half set.
    Periodic { periods: Vec<usize>, values: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentSpec {
    #[serde(flatten)]
    pub kind: EnvironmentKind,
    #[serde(default)]
    pub seed: u64,
}

impl EnvironmentSpec {
    pub fn constant(value: f64) -> Self {
        Self { kind: EnvironmentKind::Constant { value }, seed: 0 }
    }

    pub fn iid(law: Law, seed: u64) -> Self {
        Self { kind: EnvironmentKind::Iid { laws: vec![law] }, seed }
    }

    pub fn periodic(periods: Vec<usize>, values: Vec<Vec<f64>>) -> Self {
        Self { kind: EnvironmentKind::Periodic { periods, values }, seed: 0 }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Checks the spec against the neighbourhood it will be sampled on.
    pub fn validate(&self, nbhd: &Neighborhood) -> Result<()> {
        let m = nbhd.half_len();
        match &self.kind {
            EnvironmentKind::Constant { value } => {
                if !(value.is_finite() && *value > 0.0) {
                    return Err(Error::InvalidEnvironment(format!(
                        "constant conductance must be positive and finite, got {value}"
                    )));
                }
            }
            EnvironmentKind::Iid { laws } => {
                if laws.len() != 1 && laws.len() != m {
                    return Err(Error::InvalidEnvironment(format!(
                        "{} laws given for {m} jumps (expected 1 or {m})",
                        laws.len()
                    )));
                }
                laws.iter().try_for_each(Law::validate)?;
            }
            EnvironmentKind::Periodic { periods, values } => {
                if periods.len() != nbhd.dim() {
                    return Err(Error::InvalidEnvironment(format!(
                        "pattern has {} periods in dimension {}",
                        periods.len(),
                        nbhd.dim()
                    )));
                }
                if periods.iter().any(|&p| p == 0) {
                    return Err(Error::InvalidEnvironment("pattern periods must be positive".into()));
                }
                let cells: usize = periods.iter().product();
                if values.len() != cells {
                    return Err(Error::InvalidEnvironment(format!(
                        "pattern has {} cells, periods {periods:?} need {cells}",
                        values.len()
                    )));
                }
                for (i, cell) in values.iter().enumerate() {
                    if cell.len() != m {
                        return Err(Error::InvalidEnvironment(format!(
                            "pattern cell {i} has {} values for {m} jumps",
                            cell.len()
                        )));
                    }
                    if let Some(c) = cell.iter().find(|c| !(c.is_finite() && **c > 0.0)) {
                        return Err(Error::InvalidEnvironment(format!(
                            "pattern cell {i} has non-positive conductance {c}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Conductance `c_{x, x+z}` for `z` the `zi`-th jump of the half set.
    ///
    /// A pure function of `(seed, x, z)`: independent of any box or call order.
    pub fn conductance(&self, nbhd: &Neighborhood, x: &[i64], zi: usize) -> f64 {
        match &self.kind {
            EnvironmentKind::Constant { value } => *value,
            EnvironmentKind::Iid { laws } => {
                let law = if laws.len() == 1 { &laws[0] } else { &laws[zi] };
                let key = coordinate_key(self.seed, x, &nbhd.half_set()[zi]);
                law.sample(&mut ChaCha8Rng::seed_from_u64(key))
            }
            EnvironmentKind::Periodic { periods, values } => {
                values[pattern_cell(periods, x)][zi]
            }
        }
    }

    /// Analytic `E[c_{0,z}]` per half-set jump, when the family has one.
    pub fn mean_conductance(&self, nbhd: &Neighborhood) -> Vec<f64> {
        self.moment(nbhd, 1)
    }

    /// Analytic `E[c_{0,z}^2]` per half-set jump.
    pub fn second_moment(&self, nbhd: &Neighborhood) -> Vec<f64> {
        self.moment(nbhd, 2)
    }

    fn moment(&self, nbhd: &Neighborhood, k: i32) -> Vec<f64> {
        let m = nbhd.half_len();
        match &self.kind {
            EnvironmentKind::Constant { value } => vec![value.powi(k); m],
            EnvironmentKind::Iid { laws } => (0..m)
                .map(|zi| {
                    let law = if laws.len() == 1 { &laws[0] } else { &laws[zi] };
                    if k == 1 { law.mean() } else { law.second_moment() }
                })
                .collect(),
            EnvironmentKind::Periodic { values, .. } => (0..m)
                .map(|zi| values.iter().map(|c| c[zi].powi(k)).sum::<f64>() / values.len() as f64)
                .collect(),
        }
    }
}

/// Cell of the pattern containing `x`, first coordinate fastest.
pub(crate) fn pattern_cell(periods: &[usize], x: &[i64]) -> usize {
    let mut idx = 0;
    let mut stride = 1;
    for (xi, &p) in x.iter().zip(periods) {
        idx += xi.rem_euclid(p as i64) as usize * stride;
        stride *= p;
    }
    idx
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn coordinate_key(seed: u64, x: &[i64], z: &[i64]) -> u64 {
    let mut h = splitmix64(seed);
    for &c in x {
        h = splitmix64(h ^ c as u64);
    }
    // separator so that (x, z) splits are unambiguous
    h = splitmix64(h ^ 0x5851_F42D_4C95_7F2D);
    for &c in z {
        h = splitmix64(h ^ c as u64);
    }
    h
}

/// Per-stream key used by Monte Carlo code to derive independent RNGs.
pub(crate) fn stream_key(seed: u64, stream: u64) -> u64 {
    splitmix64(splitmix64(seed) ^ splitmix64(stream.wrapping_add(0x2545_F491_4F6C_DD1D)))
}
