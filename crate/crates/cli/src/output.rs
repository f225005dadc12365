use std::io;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::config::RunConfig;

/// Where a result came from. Everything except `generated_unix` is a pure
/// function of the config and the build.
#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub command: &'static str,
    pub config_hash: String,
    pub seeds: Vec<u64>,
    pub version: &'static str,
    pub generated_unix: u64,
}

impl Provenance {
    pub fn new(command: &'static str, cfg: &RunConfig) -> Self {
        Self {
            command,
            config_hash: cfg.hash(),
            seeds: cfg.seeds.clone(),
            version: env!("CARGO_PKG_VERSION"),
            generated_unix: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        }
    }

    /// Comment lines heading a CSV file. The timestamp is left out so CSV
    /// files are byte-identical across reruns.
    pub fn csv_header(&self) -> String {
        let seeds: Vec<String> = self.seeds.iter().map(u64::to_string).collect();
        format!(
            "# command={}\n# config_hash={}\n# version={}\n# seeds={}\n",
            self.command,
            self.config_hash,
            self.version,
            seeds.join(" ")
        )
    }
}

#[derive(Serialize)]
struct Stamped<'a, T: Serialize> {
    provenance: &'a Provenance,
    #[serde(flatten)]
    body: &'a T,
}

pub struct Writer {
    dir: PathBuf,
    provenance: Provenance,
    written: Vec<String>,
}

impl Writer {
    pub fn new(dir: &Path, provenance: Provenance) -> io::Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), provenance, written: Vec::new() })
    }

    pub fn json<T: Serialize>(&mut self, name: &str, body: &T) -> io::Result<()> {
        let text = serde_json::to_string_pretty(&Stamped { provenance: &self.provenance, body })?;
        self.put(name, text + "\n")
    }

    pub fn csv(&mut self, name: &str, table: &str) -> io::Result<()> {
        self.put(name, self.provenance.csv_header() + table)
    }

    fn put(&mut self, name: &str, text: String) -> io::Result<()> {
        std::fs::write(self.dir.join(name), text)?;
        self.written.push(name.to_string());
        Ok(())
    }

    /// Writes `manifest.json` listing every file of the run.
    pub fn finish(mut self) -> io::Result<Vec<String>> {
        #[derive(Serialize)]
        struct Manifest<'a> {
            files: &'a [String],
        }
        let files = std::mem::take(&mut self.written);
        self.json("manifest.json", &Manifest { files: &files })?;
        Ok(files)
    }
}

/// File stem for one `(n, omega, seed)` cell.
pub fn cell_name(prefix: &str, n: usize, omega: f64, seed: u64) -> String {
    format!("{prefix}_N{n}_w{omega}_s{seed}")
}
