//! Locating and loading sequence files.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use pdr_core::ingest::{parse_csv, synchronize};
use pdr_core::integrator::Trajectory;
use pdr_core::Sequence;

use crate::usage;

/// Sequence CSVs in `dir`, sorted by name. Sidecars (`*.bias.csv`, `*.refined.csv`) are skipped.
pub fn sequence_files(dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| usage(format!("{}: {e}", dir.display())))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.with_context(|| format!("listing {}", dir.display()))?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
        if path.is_file() && name.ends_with(".csv") && !name.ends_with(".bias.csv") && !name.ends_with(".refined.csv") {
            files.push(path);
        }
    }
    files.sort();
    if files.is_empty() {
        return Err(usage(format!("no sequence CSVs in {}", dir.display())));
    }
    Ok(files)
}

/// `path` itself, or the sequence files under it when it is a directory.
pub fn inputs(path: &Path) -> anyhow::Result<Vec<PathBuf>> {
    if path.is_dir() {
        sequence_files(path)
    } else if path.is_file() {
        Ok(vec![path.to_path_buf()])
    } else {
        Err(usage(format!("{}: no such file or directory", path.display())))
    }
}

pub fn load(path: &Path, rate: f64) -> anyhow::Result<Sequence> {
    let raw = parse_csv(path).with_context(|| format!("reading {}", path.display()))?;
    synchronize(&raw, rate).with_context(|| format!("resampling {}", path.display()))
}

/// File stem used to name per-sequence outputs.
pub fn stem(path: &Path) -> String {
    path.file_stem().map_or_else(|| "sequence".into(), |s| s.to_string_lossy().into_owned())
}

/// Whether the first data line is a trajectory header (`t,x,y,z,...`).
fn is_trajectory_file(path: &Path) -> anyhow::Result<bool> {
    let text = fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let header = text
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty() && !l.starts_with('#'))
        .unwrap_or("");
    Ok(header.replace(' ', "").starts_with("t,x,y,z,"))
}

/// Ground truth from either a trajectory CSV or a sequence CSV with ground-truth columns.
pub fn ground_truth(path: &Path, rate: f64) -> anyhow::Result<Trajectory> {
    if is_trajectory_file(path)? {
        return Trajectory::read_csv(path).with_context(|| format!("reading {}", path.display()));
    }
    let seq = load(path, rate)?;
    match Trajectory::ground_truth(&seq) {
        Some(t) => Ok(t),
        None => bail!("{}: sequence has no ground-truth positions", path.display()),
    }
}
