use std::fmt;
use std::path::{Path, PathBuf};

use rcm_core::env::{EnvironmentSpec, Law, Neighborhood};
use rcm_core::floquet::FloquetConfig;
use rcm_core::solver::SolveConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// A configuration problem, tagged with the dotted path of the offending field.
#[derive(Debug)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    fn new(field: impl Into<String>, message: impl fmt::Display) -> Self {
        Self { field: field.into(), message: message.to_string() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.field.is_empty() {
            write!(f, "{}", self.message)
        } else {
            write!(f, "field `{}`: {}", self.field, self.message)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

/// The oscillating field used by `validate` and `floquet`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DriveConfig {
    /// Finite-difference intensity.
    pub lambda: f64,
    /// Field direction; empty means the first coordinate axis.
    pub direction: Vec<f64>,
    /// Number of equally spaced phases sampled per period.
    pub phases: usize,
}

impl Default for DriveConfig {
    fn default() -> Self {
        Self { lambda: 1e-3, direction: Vec::new(), phases: 8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub format: Format,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("out"), format: Format::Json }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub environment: EnvironmentSpec,
    pub neighborhood: Neighborhood,
    pub ns: Vec<usize>,
    pub omegas: Vec<f64>,
    /// Environment seeds. Deterministic environments ignore the value but
    /// still produce one output per seed.
    pub seeds: Vec<u64>,
    pub solver: SolveConfig,
    pub floquet: FloquetConfig,
    pub drive: DriveConfig,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            environment: EnvironmentSpec::iid(Law::Uniform { a: 1.0, b: 2.0 }, 0),
            neighborhood: Neighborhood::nearest(1),
            ns: vec![8, 16],
            omegas: vec![1.0],
            seeds: vec![0, 1, 2, 3],
            solver: SolveConfig::default(),
            floquet: FloquetConfig::default(),
            drive: DriveConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

/// The part of the config that determines the numbers; hashed for provenance.
#[derive(Serialize)]
struct Science<'a> {
    environment: &'a EnvironmentSpec,
    neighborhood: &'a Neighborhood,
    ns: &'a [usize],
    omegas: &'a [f64],
    seeds: &'a [u64],
    solver: &'a SolveConfig,
    floquet: &'a FloquetConfig,
    drive: &'a DriveConfig,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new("", format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let field = if path == "." { String::new() } else { path };
            ConfigError::new(field, e.into_inner())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Re-checks every constraint the library would otherwise reject later.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let nbhd = &self.neighborhood;
        self.environment.validate(nbhd).map_err(|e| ConfigError::new("environment", e))?;
        if self.ns.is_empty() {
            return Err(ConfigError::new("ns", "at least one torus side is required"));
        }
        let max_norm = nbhd.max_norm();
        for (i, &n) in self.ns.iter().enumerate() {
            if n <= 2 * max_norm {
                return Err(ConfigError::new(format!("ns[{i}]"), format!("side {n} must exceed 2*{max_norm}")));
            }
        }
        if self.omegas.is_empty() {
            return Err(ConfigError::new("omegas", "at least one frequency is required"));
        }
        for (i, w) in self.omegas.iter().enumerate() {
            if !(w.is_finite() && *w >= 0.0) {
                return Err(ConfigError::new(format!("omegas[{i}]"), format!("frequency must be finite and >= 0, got {w}")));
            }
        }
        if self.seeds.is_empty() {
            return Err(ConfigError::new("seeds", "at least one seed is required"));
        }
        self.solver.validate().map_err(|e| ConfigError::new("solver", e))?;
        let f = &self.floquet;
        if !(f.oss_tol > 0.0 && f.oss_tol.is_finite()) {
            return Err(ConfigError::new("floquet.oss_tol", format!("must be positive, got {}", f.oss_tol)));
        }
        if f.max_iter == 0 {
            return Err(ConfigError::new("floquet.max_iter", "must be positive"));
        }
        let d = &self.drive;
        if !(d.lambda > 0.0 && d.lambda.is_finite()) {
            return Err(ConfigError::new("drive.lambda", format!("must be positive, got {}", d.lambda)));
        }
        if !d.direction.is_empty() {
            if d.direction.len() != nbhd.dim() {
                return Err(ConfigError::new(
                    "drive.direction",
                    format!("has {} components for dimension {}", d.direction.len(), nbhd.dim()),
                ));
            }
            if d.direction.iter().all(|x| *x == 0.0) || !d.direction.iter().all(|x| x.is_finite()) {
                return Err(ConfigError::new("drive.direction", "must be a finite nonzero vector"));
            }
        }
        if d.phases == 0 {
            return Err(ConfigError::new("drive.phases", "must be positive"));
        }
        Ok(())
    }

    /// Sites of the largest torus must fit the dense route.
    pub fn check_dense_cap(&self) -> Result<(), ConfigError> {
        let d = self.neighborhood.dim() as u32;
        for (i, &n) in self.ns.iter().enumerate() {
            let sites = n.checked_pow(d).unwrap_or(usize::MAX);
            if sites > self.solver.dense_cap {
                return Err(ConfigError::new(
                    format!("ns[{i}]"),
                    format!("{sites} sites exceed solver.dense_cap = {}", self.solver.dense_cap),
                ));
            }
        }
        Ok(())
    }

    pub fn direction(&self) -> Vec<f64> {
        if self.drive.direction.is_empty() {
            let mut e = vec![0.0; self.neighborhood.dim()];
            e[0] = 1.0;
            e
        } else {
            self.drive.direction.clone()
        }
    }

    /// SHA-256 of the canonical JSON of everything except the output section.
    /// Object keys are sorted, so field order in the file does not matter.
    pub fn hash(&self) -> String {
        let science = Science {
            environment: &self.environment,
            neighborhood: &self.neighborhood,
            ns: &self.ns,
            omegas: &self.omegas,
            seeds: &self.seeds,
            solver: &self.solver,
            floquet: &self.floquet,
            drive: &self.drive,
        };
        let value = serde_json::to_value(&science).expect("config serializes");
        let canonical = serde_json::to_string(&value).expect("value serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = RunConfig::default();
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        assert_eq!(RunConfig::parse(&text).unwrap(), cfg);
    }

    #[test]
    fn empty_document_is_the_default() {
        assert_eq!(RunConfig::parse("{}").unwrap(), RunConfig::default());
    }

    #[test]
    fn hash_ignores_key_order_and_output() {
        let a = RunConfig::parse(r#"{"ns": [5], "omegas": [0.5], "output": {"dir": "x"}}"#).unwrap();
        let b = RunConfig::parse(r#"{"omegas": [0.5], "ns": [5], "output": {"dir": "y", "format": "csv"}}"#).unwrap();
        assert_eq!(a.hash(), b.hash());
        let c = RunConfig::parse(r#"{"omegas": [0.5], "ns": [6]}"#).unwrap();
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn type_errors_name_the_field() {
        let e = RunConfig::parse(r#"{"solver": {"tol": "small"}}"#).unwrap_err();
        assert_eq!(e.field, "solver.tol");
        let e = RunConfig::parse(r#"{"omegas": [1.0, -2.0]}"#).unwrap_err();
        assert_eq!(e.field, "omegas[1]");
        let e = RunConfig::parse(r#"{"solvr": {}}"#).unwrap_err();
        assert!(e.to_string().contains("solvr"), "{e}");
    }

    #[test]
    fn semantic_errors_name_the_field() {
        let e = RunConfig::parse(r#"{"ns": [8, 2]}"#).unwrap_err();
        assert_eq!(e.field, "ns[1]");
        let e = RunConfig::parse(r#"{"drive": {"direction": [1.0, 0.0]}}"#).unwrap_err();
        assert_eq!(e.field, "drive.direction");
        let e = RunConfig::parse(r#"{"environment": {"kind": "constant", "value": -1.0}}"#).unwrap_err();
        assert_eq!(e.field, "environment");
        let e = RunConfig::parse(r#"{"solver": {"tol": 0.0}}"#).unwrap_err();
        assert_eq!(e.field, "solver");
    }

    #[test]
    fn dense_cap() {
        let cfg = RunConfig::parse(r#"{"ns": [8, 64], "solver": {"dense_cap": 32}}"#).unwrap();
        assert_eq!(cfg.check_dense_cap().unwrap_err().field, "ns[1]");
    }
}
