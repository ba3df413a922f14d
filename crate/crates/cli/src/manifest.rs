//! Run manifests: every artifact-producing run records its command, resolved
//! flags, input/output fingerprints, and solver statistics next to its
//! outputs. Identical runs produce byte-identical manifests; wall-clock
//! timings are therefore opt-in.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use toklp_core::hash::fnv1a64_hex;

#[derive(Debug, Clone, Serialize)]
pub struct FileHash {
    pub path: String,
    pub fnv1a64: String,
}

impl FileHash {
    pub fn of(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)
            .with_context(|| format!("hashing {} for the manifest", path.display()))?;
        Ok(Self {
            path: path.display().to_string(),
            fnv1a64: fnv1a64_hex(&bytes),
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolverSummary {
    pub iterations: usize,
    pub converged: bool,
    pub lp_value: f64,
    pub dual_value: f64,
    pub duality_gap: f64,
    pub gap_mode: String,
    pub gap_tolerance: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub colour_ones: usize,
    pub colour_nonzeros: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub flags: BTreeMap<String, serde_json::Value>,
    pub inputs: Vec<FileHash>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub graph_hash: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverSummary>,
    pub outputs: Vec<FileHash>,
    /// Present only when the run was invoked with `--timings`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings_secs: Option<BTreeMap<String, f64>>,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            flags: BTreeMap::new(),
            inputs: Vec::new(),
            graph_hash: None,
            solver: None,
            outputs: Vec::new(),
            timings_secs: None,
        }
    }

    pub fn flag<V: Serialize>(&mut self, name: &str, value: V) {
        self.flags.insert(
            name.to_string(),
            serde_json::to_value(value).expect("flag values are serializable"),
        );
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text)
            .with_context(|| format!("writing manifest {}", path.display()))?;
        Ok(())
    }
}

/// Default manifest location: next to the primary output.
pub fn default_manifest_path(output: &Path) -> PathBuf {
    let mut name = output.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    output.with_file_name(name)
}
