use std::path::{Path, PathBuf};

use anyhow::Context;
use rydberg_sps::Config;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{Command, Outcome};

/// Record of one invocation, enough to replay it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub invocation: Command,
    /// SHA-256 of `config_toml`.
    pub config_hash: String,
    pub config_toml: String,
    pub seeds: Vec<u64>,
    pub tool_version: String,
    /// Paths relative to the output directory.
    pub outputs: Vec<PathBuf>,
    pub wall_time_s: f64,
    pub summary: serde_json::Value,
}

pub fn config_hash(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Theory => "theory",
        Command::Simulate(_) => "simulate",
        Command::Analyze(_) => "analyze",
        Command::Fit(_) => "fit",
        Command::Metrics(_) => "metrics",
        Command::Reproduce(_) => "reproduce",
        Command::Replay(_) => "replay",
    }
}

impl RunManifest {
    pub fn new(command: &Command, config: &Config, outcome: &Outcome, out: &Path, wall_time_s: f64) -> Self {
        let config_toml = config.to_toml();
        Self {
            command: command_name(command).into(),
            invocation: command.clone(),
            config_hash: config_hash(&config_toml),
            config_toml,
            seeds: outcome.seeds.clone(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            outputs: outcome
                .outputs
                .iter()
                .map(|p| p.strip_prefix(out).unwrap_or(p).to_path_buf())
                .collect(),
            wall_time_s,
            summary: outcome.summary.clone(),
        }
    }

    pub fn write(&self, path: &Path) -> anyhow::Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
    }

    pub fn read(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Ok(serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?)
    }
}
