use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::CliResult;

pub const MANIFEST: &str = "manifest.json";

#[derive(Serialize)]
struct Artifact {
    file: String,
    sha256: String,
    bytes: usize,
}

/// Collects the artifacts of one run and writes the manifest last.
pub struct Output {
    dir: PathBuf,
    artifacts: Vec<Artifact>,
    started: Instant,
}

impl Output {
    pub fn new(dir: &Path) -> CliResult<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            artifacts: Vec::new(),
            started: Instant::now(),
        })
    }

    pub fn write(&mut self, name: &str, bytes: Vec<u8>) -> CliResult<()> {
        fs::write(self.dir.join(name), &bytes)?;
        self.artifacts.push(Artifact {
            file: name.to_string(),
            sha256: hex::encode(Sha256::digest(&bytes)),
            bytes: bytes.len(),
        });
        Ok(())
    }

    pub fn write_with(
        &mut self,
        name: &str,
        fill: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
    ) -> CliResult<()> {
        let mut buf = Vec::new();
        fill(&mut buf)?;
        self.write(name, buf)
    }

    pub fn write_json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(value).expect("serializable output");
        text.push('\n');
        self.write(name, text.into_bytes())
    }

    pub fn finish(mut self, command: &str, config: Value) -> CliResult<()> {
        self.artifacts.sort_by(|a, b| a.file.cmp(&b.file));
        let manifest = serde_json::json!({
            "command": command,
            "version": env!("CARGO_PKG_VERSION"),
            "config": config,
            "artifacts": self.artifacts,
            "duration_seconds": self.started.elapsed().as_secs_f64(),
        });
        let mut text = serde_json::to_string_pretty(&manifest).expect("serializable manifest");
        text.push('\n');
        fs::write(self.dir.join(MANIFEST), text)?;
        Ok(())
    }
}
