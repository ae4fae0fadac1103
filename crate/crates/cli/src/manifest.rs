use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;

/// Record of one invocation, written once per run.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub argv: Vec<String>,
    pub tool_version: &'static str,
    pub config: Value,
    pub seeds: Vec<u64>,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub started_unix: u64,
    pub wall_seconds: f64,
    pub exit_code: u8,
}

pub struct Recorder {
    manifest: RunManifest,
    start: Instant,
}

impl Recorder {
    pub fn new(subcommand: &str) -> Self {
        Self {
            manifest: RunManifest {
                subcommand: subcommand.to_string(),
                argv: std::env::args().collect(),
                tool_version: env!("CARGO_PKG_VERSION"),
                config: Value::Null,
                seeds: Vec::new(),
                inputs: Vec::new(),
                outputs: Vec::new(),
                started_unix: SystemTime::now()
                    .duration_since(UNIX_EPOCH)
                    .map_or(0, |d| d.as_secs()),
                wall_seconds: 0.0,
                exit_code: 0,
            },
            start: Instant::now(),
        }
    }

    pub fn config(&mut self, config: &impl Serialize) -> Result<()> {
        self.manifest.config = serde_json::to_value(config)?;
        Ok(())
    }

    pub fn seed(&mut self, seed: u64) {
        self.manifest.seeds.push(seed);
    }

    pub fn input(&mut self, p: &Path) {
        self.manifest.inputs.push(p.display().to_string());
    }

    /// Writes `contents` to `path` and records it as an output.
    pub fn write(&mut self, path: &Path, contents: &str) -> Result<()> {
        std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))?;
        self.manifest.outputs.push(path.display().to_string());
        Ok(())
    }

    /// Writes the manifest to `path`, or to stderr when there is no output
    /// location.
    pub fn finish(mut self, path: Option<PathBuf>, exit_code: u8) -> Result<u8> {
        self.manifest.wall_seconds = self.start.elapsed().as_secs_f64();
        self.manifest.exit_code = exit_code;
        let text = serde_json::to_string_pretty(&self.manifest)?;
        match path {
            Some(p) => std::fs::write(&p, text + "\n").with_context(|| format!("writing {}", p.display()))?,
            None => eprintln!("manifest: {}", serde_json::to_string(&self.manifest)?),
        }
        Ok(exit_code)
    }
}

pub fn out_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}
