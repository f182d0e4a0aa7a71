//! Accuracy grid over augmentation severity and mixing mode.
//!
//! A model trained with augmentation is scored on test images that are
//! themselves augmented at each `(severity, mode)` cell. Every cell is
//! repeated over evaluation seeds and reported as `mean (std)`, with an
//! optional clean-test row on top.
//!
//! Each test image's draw comes from a stream keyed by the evaluation seed,
//! the severity value and the image index. The mixing mode is deliberately
//! left out of the key: `Mix` and `WoMix` then see the same chains and
//! Dirichlet weights and differ only in the final blend, and reordering the
//! grid spec cannot change any cell.

mod model;

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use model::{augmix_training, train_small_model, DenseLayer, SmallModel, SmallTrainConfig, TrainingInfo};

use crate::augment::{augmix, AugmixConfig, MixMode};
use crate::error::{Error, Result};
use crate::numerics::{mean_std, SeededRng};
use crate::synth::LabeledImages;

const EVAL_STREAM: u64 = 0x6576_616c_5f61_7567;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalGridSpec {
    pub severities: Vec<f64>,
    pub mix_modes: Vec<MixMode>,
    pub eval_seeds: Vec<u64>,
    #[serde(default = "default_true")]
    pub include_clean_row: bool,
    /// Chain settings shared by every cell; severity and mode are overridden
    /// per cell.
    #[serde(default)]
    pub augmix: AugmixConfig,
}

fn default_true() -> bool {
    true
}

impl Default for EvalGridSpec {
    fn default() -> Self {
        Self {
            severities: vec![3.0, 5.0],
            mix_modes: vec![MixMode::Mix, MixMode::WoMix],
            eval_seeds: vec![0, 1, 2, 3, 4],
            include_clean_row: true,
            augmix: AugmixConfig::default(),
        }
    }
}

impl EvalGridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.severities.is_empty() || self.mix_modes.is_empty() || self.eval_seeds.is_empty() {
            return Err(Error::param("grid spec needs at least one severity, mode and seed"));
        }
        for &s in &self.severities {
            self.cell_config(s, MixMode::Mix).validate()?;
        }
        Ok(())
    }

    pub fn cell_config(&self, severity: f64, mix_mode: MixMode) -> AugmixConfig {
        AugmixConfig {
            severity,
            mix_mode,
            ..self.augmix
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellStats {
    pub mean: f64,
    /// Population standard deviation over `per_seed`.
    pub std: f64,
    pub per_seed: Vec<f64>,
}

impl CellStats {
    fn from_runs(per_seed: Vec<f64>) -> Self {
        let (mean, std) = mean_std(&per_seed);
        Self { mean, std, per_seed }
    }

    /// Percent cell, e.g. `69.9 (0.1)`.
    pub fn cell(&self) -> String {
        format!("{:.1} ({:.1})", 100.0 * self.mean, 100.0 * self.std)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub severity: f64,
    pub mix_mode: MixMode,
    #[serde(flatten)]
    pub stats: CellStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub version: String,
    pub config_hash: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub training: Option<TrainingInfo>,
    pub spec: EvalGridSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clean: Option<CellStats>,
    /// Row-major: severities outer, modes inner, both in spec order.
    pub cells: Vec<GridCell>,
}

impl GridResult {
    pub fn cell(&self, severity: f64, mix_mode: MixMode) -> Option<&GridCell> {
        self.cells
            .iter()
            .find(|c| c.severity == severity && c.mix_mode == mix_mode)
    }

    /// Rows are severities, columns are modes, cells are `mean (std)` in percent.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("severity");
        for m in &self.spec.mix_modes {
            let _ = write!(out, ",{m}");
        }
        out.push('\n');
        if let Some(clean) = &self.clean {
            out.push_str("clean,");
            out.push_str(&clean.cell());
            for _ in 1..self.spec.mix_modes.len() {
                out.push(',');
            }
            out.push('\n');
        }
        for (row, s) in self.cells.chunks(self.spec.mix_modes.len()).zip(&self.spec.severities) {
            let _ = write!(out, "{s}");
            for c in row {
                let _ = write!(out, ",{}", c.stats.cell());
            }
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::param(format!("cannot serialize grid: {e}")))
    }

    pub fn markdown_table(&self) -> String {
        let mut out = String::from("| Severity |");
        for m in &self.spec.mix_modes {
            let _ = write!(out, " {m} |");
        }
        out.push_str("\n|---|");
        out.push_str(&"---:|".repeat(self.spec.mix_modes.len()));
        out.push('\n');
        if let Some(clean) = &self.clean {
            let _ = write!(out, "| clean | {} |", clean.cell());
            out.push_str(&" |".repeat(self.spec.mix_modes.len() - 1));
            out.push('\n');
        }
        for (row, s) in self.cells.chunks(self.spec.mix_modes.len()).zip(&self.spec.severities) {
            let _ = write!(out, "| {s} |");
            for c in row {
                let _ = write!(out, " {} |", c.stats.cell());
            }
            out.push('\n');
        }
        out
    }
}

/// Hex SHA-256 of the JSON encoding of `value`.
pub fn config_hash<T: Serialize>(value: &T) -> Result<String> {
    let json = serde_json::to_vec(value).map_err(|e| Error::param(format!("cannot hash config: {e}")))?;
    let digest = Sha256::digest(&json);
    let mut hex = String::with_capacity(64);
    for b in digest.iter() {
        let _ = write!(hex, "{b:02x}");
    }
    Ok(hex)
}

fn check_dataset(model: &SmallModel, data: &LabeledImages) -> Result<()> {
    if data.is_empty() {
        return Err(Error::param("evaluation set is empty"));
    }
    if data.labels.len() != data.len() {
        return Err(Error::dim(format!(
            "{} images but {} labels",
            data.len(),
            data.labels.len()
        )));
    }
    for img in &data.images {
        model.check_input(img)?;
    }
    Ok(())
}

fn accuracy_under(model: &SmallModel, data: &LabeledImages, config: &AugmixConfig, seed: u64) -> Result<f64> {
    let mut hits = 0;
    for (i, (img, &y)) in data.images.iter().zip(&data.labels).enumerate() {
        let mut rng = SeededRng::derived(seed, &[EVAL_STREAM, config.severity.to_bits(), i as u64]);
        let view = augmix(img, config, &mut rng)?;
        hits += (model.predict_one(view.pixels()) == y) as usize;
    }
    Ok(hits as f64 / data.len() as f64)
}

/// Accuracy on `data` augmented at one cell, repeated over `seeds`.
pub fn evaluate_cell(
    model: &SmallModel,
    data: &LabeledImages,
    config: &AugmixConfig,
    seeds: &[u64],
) -> Result<CellStats> {
    config.validate()?;
    check_dataset(model, data)?;
    if seeds.is_empty() {
        return Err(Error::param("at least one evaluation seed is required"));
    }
    let runs = seeds
        .par_iter()
        .map(|&seed| accuracy_under(model, data, config, seed))
        .collect::<Result<Vec<_>>>()?;
    Ok(CellStats::from_runs(runs))
}

/// Fills every cell of `spec`. Cells and seeds run in parallel; results are
/// placed by index, so the output does not depend on scheduling.
pub fn run_grid(model: &SmallModel, data: &LabeledImages, spec: &EvalGridSpec) -> Result<GridResult> {
    spec.validate()?;
    check_dataset(model, data)?;
    let jobs: Vec<(f64, MixMode, u64)> = spec
        .severities
        .iter()
        .flat_map(|&s| {
            spec.mix_modes
                .iter()
                .flat_map(move |&m| spec.eval_seeds.iter().map(move |&seed| (s, m, seed)))
        })
        .collect();
    let runs = jobs
        .par_iter()
        .map(|&(s, m, seed)| accuracy_under(model, data, &spec.cell_config(s, m), seed))
        .collect::<Result<Vec<_>>>()?;
    let cells = jobs
        .chunks(spec.eval_seeds.len())
        .zip(runs.chunks(spec.eval_seeds.len()))
        .map(|(job, accs)| GridCell {
            severity: job[0].0,
            mix_mode: job[0].1,
            stats: CellStats::from_runs(accs.to_vec()),
        })
        .collect();

    let clean = if spec.include_clean_row {
        let acc = model.accuracy(data)?;
        Some(CellStats::from_runs(vec![acc; spec.eval_seeds.len()]))
    } else {
        None
    };
    let training = model.training.clone();
    Ok(GridResult {
        version: crate::VERSION.to_string(),
        config_hash: config_hash(&(spec, &training))?,
        training,
        spec: spec.clone(),
        clean,
        cells,
    })
}
