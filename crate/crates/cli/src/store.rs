use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use mlo_core::engine::RunTrace;
use serde::{Deserialize, Serialize};

use crate::config::slug;

/// One persisted run: the trace plus the keys needed to place it in the
/// campaign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub algorithm: String,
    pub dims: usize,
    pub seed_index: usize,
    pub run_seed: u64,
    pub problem_seed: u64,
    /// Extended-budget runs only: FEs to reach the reference's per-environment
    /// best, and the reference algorithm id.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extended_counts: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<String>,
    pub trace: RunTrace,
}

pub fn traces_dir(root: &Path) -> PathBuf {
    root.join("traces")
}

pub fn extended_dir(root: &Path) -> PathBuf {
    root.join("traces").join("extended")
}

pub fn cell_stem(algorithm: &str, dims: usize, seed_index: usize) -> String {
    format!("{}__n{dims}__s{seed_index}", slug(algorithm))
}

/// Writes through a temporary file in the same directory and renames it
/// into place, so a crash never leaves a half-written artifact.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let name = path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp"));
    {
        let mut f = fs::File::create(&tmp).with_context(|| format!("creating {}", tmp.display()))?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

pub fn save_cell(dir: &Path, record: &CellRecord) -> Result<()> {
    let stem = cell_stem(&record.algorithm, record.dims, record.seed_index);
    write_atomic(&dir.join(format!("{stem}.csv")), record.trace.to_csv().as_bytes())?;
    let json = serde_json::to_vec(record)?;
    write_atomic(&dir.join(format!("{stem}.json")), &json)
}

/// Loads a stored cell; `None` when it is absent or unreadable.
pub fn load_cell(path: &Path) -> Option<CellRecord> {
    let bytes = fs::read(path).ok()?;
    serde_json::from_slice(&bytes).ok()
}

/// Every cell record in `dir`, sorted by file name.
pub fn load_all(dir: &Path) -> Result<Vec<CellRecord>> {
    let mut paths: Vec<PathBuf> = match fs::read_dir(dir) {
        Ok(rd) => rd
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect(),
        Err(_) => return Ok(Vec::new()),
    };
    paths.sort();
    paths
        .iter()
        .map(|p| load_cell(p).with_context(|| format!("unreadable trace {}", p.display())))
        .collect()
}
