//! Config files, shared flags and output staging.
//!
//! Every subcommand reads an optional JSON config file whose fields mirror
//! its flags. Values resolve as built-in default, then file, then flag, and
//! the resolved config is embedded in the reports the command writes.

use std::fs;
use std::path::{Path, PathBuf};

use augprobe::data::LayerTag;
use augprobe::divergence::TrainConfig;
use clap::Args;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Reads a JSON config file, or returns the default when no path is given.
pub fn load_json<T: DeserializeOwned + Default>(path: Option<&Path>) -> CliResult<T> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text =
        fs::read_to_string(path).map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::usage(format!("invalid config {}: {e}", path.display())))
}

/// Optimizer flags for the linear probes.
#[derive(Debug, Clone, Copy, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainOpts {
    /// Gradient step size (first trial step for the softmax fits).
    #[arg(long)]
    pub step_size: Option<f64>,
    /// Iteration cap.
    #[arg(long)]
    pub iterations: Option<usize>,
    /// L2 penalty on the weights.
    #[arg(long)]
    pub l2_penalty: Option<f64>,
    /// Convergence tolerance.
    #[arg(long)]
    pub convergence_tol: Option<f64>,
}

impl TrainOpts {
    /// Flag values win over `self`.
    pub fn overlay(self, flags: TrainOpts) -> TrainOpts {
        TrainOpts {
            step_size: flags.step_size.or(self.step_size),
            iterations: flags.iterations.or(self.iterations),
            l2_penalty: flags.l2_penalty.or(self.l2_penalty),
            convergence_tol: flags.convergence_tol.or(self.convergence_tol),
        }
    }

    pub fn resolve(self) -> TrainConfig {
        let d = TrainConfig::default();
        TrainConfig {
            step_size: self.step_size.unwrap_or(d.step_size),
            iterations: self.iterations.unwrap_or(d.iterations),
            l2_penalty: self.l2_penalty.unwrap_or(d.l2_penalty),
            convergence_tol: self.convergence_tol.unwrap_or(d.convergence_tol),
        }
    }
}

pub fn parse_layers(names: &[String]) -> Vec<LayerTag> {
    names.iter().map(|n| LayerTag::parse(n.trim())).collect()
}

/// Stable 64-bit key for a name (FNV-1a), used to give each layer or input
/// file its own random stream.
pub fn name_key(name: &str) -> u64 {
    name.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// File-name-safe form of a layer tag.
pub fn file_stem(tag: &LayerTag) -> String {
    tag.as_str()
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// Output files held in memory until the whole run has succeeded, so a
/// failing run leaves nothing behind.
#[derive(Debug, Default)]
pub struct Staged {
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl Staged {
    pub fn add(&mut self, path: PathBuf, bytes: impl Into<Vec<u8>>) {
        self.files.push((path, bytes.into()));
    }

    pub fn add_json<T: Serialize>(&mut self, path: PathBuf, value: &T) -> CliResult<()> {
        let text = serde_json::to_string_pretty(value)
            .map_err(|e| CliError::usage(format!("cannot serialize {}: {e}", path.display())))?;
        self.add(path, text + "\n");
        Ok(())
    }

    pub fn commit(self) -> CliResult<Vec<PathBuf>> {
        let mut written = Vec::with_capacity(self.files.len());
        for (path, bytes) in self.files {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
            }
            fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
            written.push(path);
        }
        Ok(written)
    }
}
