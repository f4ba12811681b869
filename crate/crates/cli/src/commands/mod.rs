pub mod bifurcate;
pub mod equilibria;
pub mod luba;
pub mod micro;
pub mod simulate;

use std::path::PathBuf;

use serde_json::Value;

use crate::args::{Format, GlobalArgs};
use crate::error::CliResult;
use crate::output::Output;

/// Resolved global settings handed to every command.
pub struct Context {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub format: Format,
    pub workers: usize,
}

impl Context {
    pub fn resolve(g: &GlobalArgs) -> Self {
        Self {
            seed: g.seed.unwrap_or(0),
            output_dir: g.output_dir.clone().unwrap_or_else(|| PathBuf::from("output")),
            format: g.format.unwrap_or(Format::Csv),
            workers: g.workers.unwrap_or(1).max(1),
        }
    }

    pub fn output(&self) -> CliResult<Output> {
        Output::new(&self.output_dir)
    }

    pub fn manifest_config(&self, command: &impl serde::Serialize) -> Value {
        serde_json::json!({
            "seed": self.seed,
            "output-dir": self.output_dir,
            "format": self.format,
            "workers": self.workers,
            "command": command,
        })
    }
}
