//! Run artifacts shared by every command: the resolved-config echo,
//! wall-clock metadata, and worker-pool setup.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::Serialize;

/// Creates the output directory (and parents).
pub fn prepare_out_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path)
        .with_context(|| format!("creating output directory {}", path.display()))
}

/// Non-deterministic run metadata, kept out of every CSV.
#[derive(Serialize)]
pub struct RunMetadata {
    pub command: String,
    pub version: String,
    pub started_unix_seconds: f64,
    pub finished_unix_seconds: f64,
}

pub fn unix_seconds() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

pub fn write_metadata(path: &Path, command: &str, started: f64) -> Result<()> {
    let metadata = RunMetadata {
        command: command.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        started_unix_seconds: started,
        finished_unix_seconds: unix_seconds(),
    };
    std::fs::write(path, serde_json::to_string_pretty(&metadata)?)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)?)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Caps the global worker pool. Zero keeps the library default. Calling
/// again with a different value has no effect (the pool is global), so
/// the harness calls this exactly once per process.
pub fn configure_workers(workers: usize) {
    if workers > 0 {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global();
    }
}

/// Standard artifact bundle written by every experiment command.
pub struct OutDir<'a> {
    pub root: &'a Path,
}

impl OutDir<'_> {
    pub fn file(&self, name: &str) -> std::path::PathBuf {
        self.root.join(name)
    }

    pub fn write_resolved(&self, entries: &BTreeMap<String, String>) -> Result<()> {
        crate::config::write_resolved(&self.file("config.resolved"), entries)
    }
}
