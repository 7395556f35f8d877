//! Atomic file writes and the run manifest emitted next to every output.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;

/// Writes through a temporary file in the target directory, then renames it
/// into place.
pub fn write_atomic<F>(path: &Path, fill: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> Result<()>,
{
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let tmp = tempfile::NamedTempFile::new_in(&dir)
        .with_context(|| format!("creating a temporary file in {}", dir.display()))?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        fill(&mut w)?;
        w.flush()?;
    }
    tmp.as_file().sync_all()?;
    tmp.persist(path)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        writeln!(w)?;
        Ok(())
    })
}

/// Everything needed to repeat a run.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub args: Vec<String>,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub config: Value,
    pub tool_version: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub seeds: Vec<u64>,
}

impl RunManifest {
    pub fn new(command: &str, config: Value) -> Self {
        RunManifest {
            command: command.to_string(),
            args: std::env::args().collect(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            config,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            seeds: Vec::new(),
        }
    }

    pub fn input(mut self, path: &Path) -> Self {
        self.inputs.push(path.display().to_string());
        self
    }

    pub fn output(mut self, path: &Path) -> Self {
        self.outputs.push(path.display().to_string());
        self
    }

    /// Writes `<output>.manifest.json` beside the primary output.
    pub fn write_beside(&self, output: &Path) -> Result<PathBuf> {
        let mut name = output.file_name().unwrap_or_default().to_os_string();
        name.push(".manifest.json");
        let path = output.with_file_name(name);
        write_json(&path, self)?;
        Ok(path)
    }
}
