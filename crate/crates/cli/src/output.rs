use std::fmt::Debug;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use kinetic_core::config::{Manifest, RunConfig};
use kinetic_core::Result;

/// Output directory of one command; every file written through it is listed
/// in `manifest.toml`.
pub struct Artifacts {
    dir: PathBuf,
    target: String,
    started: Instant,
    config: RunConfig,
    resolved: Vec<String>,
    files: Vec<String>,
}

impl Artifacts {
    pub fn create(dir: &Path, target: &str) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            target: target.to_string(),
            started: Instant::now(),
            config: RunConfig::default(),
            resolved: Vec::new(),
            files: Vec::new(),
        })
    }

    pub fn set_config(&mut self, config: &RunConfig) {
        self.config = config.clone();
    }

    pub fn resolved(&mut self, label: &str, params: &impl Debug) {
        self.resolved.push(format!("{label}: {params:?}"));
    }

    pub fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> Result<()> {
        fs::write(self.dir.join(name), contents)?;
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.to_string());
        }
        Ok(())
    }

    /// Writes the manifest and returns the directory.
    pub fn finish(self) -> Result<PathBuf> {
        let manifest = Manifest {
            target: self.target,
            version: env!("CARGO_PKG_VERSION").to_string(),
            threads: rayon::current_num_threads(),
            wall_time_s: self.started.elapsed().as_secs_f64(),
            config: self.config,
            resolved: self.resolved.join("\n"),
            files: self.files,
        };
        fs::write(self.dir.join("manifest.toml"), manifest.to_toml())?;
        Ok(self.dir)
    }
}

/// Number in a CSV cell with full double precision.
pub fn num(x: f64) -> String {
    format!("{x:.17e}")
}

pub fn csv(header: &str, rows: impl IntoIterator<Item = Vec<f64>>) -> String {
    let mut s = format!("{header}\n");
    for row in rows {
        let cells: Vec<String> = row.into_iter().map(num).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}
