//! Run artifacts: slice profiles as CSV and the complete run as JSON.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::mesh::MeshSummary;
use crate::scheme::RunOutput;

pub const SLICE_CSV_HEADER: &str = "slice_index,t,x_left,x_right,u,q";

/// One row per cell and slice; floats carry 17 significant digits.
pub fn slices_csv(run: &RunOutput) -> String {
    let partition = run.triangulation.partition();
    let mut out = String::from(SLICE_CSV_HEADER);
    out.push('\n');
    for s in &run.states {
        for (i, (u, q)) in s.values.iter().zip(&s.fluxes).enumerate() {
            let (a, b) = partition.cell_bounds(i);
            let _ = writeln!(out, "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}", s.index, s.t, a, b, u, q);
        }
    }
    out
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunArtifact {
    /// Source text of the configuration that produced the run.
    pub config: String,
    pub mesh: MeshSummary,
    pub cfl_ok: bool,
    pub max_abs: f64,
    pub run: RunOutput,
}

impl RunArtifact {
    pub fn new(config: &str, run: RunOutput) -> Self {
        RunArtifact { config: config.to_string(), mesh: run.triangulation.summary(), cfl_ok: run.cfl_ok(), max_abs: run.max_abs(), run }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: String, source: serde_json::Error },
}

pub fn write_text(path: &Path, text: &str) -> Result<(), IoError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| IoError::File { path: dir.display().to_string(), source })?;
    }
    fs::write(path, text).map_err(|source| IoError::File { path: path.display().to_string(), source })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    let text = serde_json::to_string_pretty(value).map_err(|source| IoError::Json { path: path.display().to_string(), source })?;
    write_text(path, &text)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, IoError> {
    let text = fs::read_to_string(path).map_err(|source| IoError::File { path: path.display().to_string(), source })?;
    serde_json::from_str(&text).map_err(|source| IoError::Json { path: path.display().to_string(), source })
}
