//! `evalgrid`: self-contained severity × mixing grid on the synthetic shape
//! dataset. A small model is trained under augmentation, then scored on an
//! independently drawn test set augmented at every grid cell.

use std::path::PathBuf;

use augprobe::augment::{AugmixConfig, MixMode};
use augprobe::evalgrid::{run_grid, train_small_model, EvalGridSpec, SmallTrainConfig};
use augprobe::numerics::{derive_seed, SeededRng};
use augprobe::synth::gen_shape_dataset;
use clap::Args;
use serde::{Deserialize, Serialize};

use crate::config::{load_json, Staged};
use crate::error::{CliError, CliResult};
use crate::report::ReportFile;

const TRAIN_DATA_KEY: u64 = 1;
const TEST_DATA_KEY: u64 = 2;
const MODEL_KEY: u64 = 3;

#[derive(Debug, Args)]
pub struct EvalgridArgs {
    /// Directory for grid.csv, grid.json and grid.md.
    #[arg(long)]
    pub out: PathBuf,
    /// JSON config file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Seed for the datasets and model training.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Grid severities, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub severities: Option<Vec<f64>>,
    /// Grid mixing modes, comma separated (mix, womix).
    #[arg(long, value_delimiter = ',')]
    pub modes: Option<Vec<MixMode>>,
    /// Evaluation seeds, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub eval_seeds: Option<Vec<u64>>,
    /// Leave out the clean-test row.
    #[arg(long)]
    pub no_clean_row: bool,
    #[arg(long)]
    pub train_per_class: Option<usize>,
    #[arg(long)]
    pub test_per_class: Option<usize>,
    #[arg(long)]
    pub image_size: Option<usize>,
    /// Pixel noise standard deviation of the shape images.
    #[arg(long)]
    pub noise: Option<f64>,
    /// Augmentation severity used while training.
    #[arg(long)]
    pub train_severity: Option<f64>,
    /// Hidden layer width; 0 trains a plain softmax model.
    #[arg(long)]
    pub hidden_width: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ShapeDataConfig {
    pub train_per_class: usize,
    pub test_per_class: usize,
    pub image_size: usize,
    pub noise: f64,
}

impl Default for ShapeDataConfig {
    fn default() -> Self {
        Self {
            train_per_class: 150,
            test_per_class: 100,
            image_size: 16,
            noise: 0.15,
        }
    }
}

impl ShapeDataConfig {
    fn validate(&self) -> CliResult<()> {
        if self.train_per_class == 0 || self.test_per_class == 0 {
            return Err(CliError::usage("train_per_class and test_per_class must be at least 1"));
        }
        if self.image_size < 8 {
            return Err(CliError::usage(format!(
                "image_size must be at least 8, got {}",
                self.image_size
            )));
        }
        if !(self.noise.is_finite() && self.noise >= 0.0) {
            return Err(CliError::usage(format!(
                "noise must be non-negative, got {}",
                self.noise
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct GridFile {
    severities: Option<Vec<f64>>,
    mix_modes: Option<Vec<MixMode>>,
    eval_seeds: Option<Vec<u64>>,
    include_clean_row: Option<bool>,
    augmix: Option<AugmixConfig>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct EvalgridFile {
    seed: Option<u64>,
    dataset: Option<ShapeDataConfig>,
    train: Option<SmallTrainConfig>,
    train_augmix: Option<AugmixConfig>,
    grid: GridFile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalgridRunConfig {
    pub seed: u64,
    pub dataset: ShapeDataConfig,
    pub train: SmallTrainConfig,
    pub train_augmix: AugmixConfig,
    pub grid: EvalGridSpec,
}

fn resolve(args: &EvalgridArgs, file: EvalgridFile) -> EvalgridRunConfig {
    let mut dataset = file.dataset.unwrap_or_default();
    if let Some(v) = args.train_per_class {
        dataset.train_per_class = v;
    }
    if let Some(v) = args.test_per_class {
        dataset.test_per_class = v;
    }
    if let Some(v) = args.image_size {
        dataset.image_size = v;
    }
    if let Some(v) = args.noise {
        dataset.noise = v;
    }

    let mut train = file.train.unwrap_or_default();
    if let Some(v) = args.hidden_width {
        train.hidden_width = v;
    }
    if let Some(v) = args.epochs {
        train.epochs = v;
    }
    if let Some(v) = args.learning_rate {
        train.learning_rate = v;
    }

    let mut train_augmix = file.train_augmix.unwrap_or_default();
    if let Some(s) = args.train_severity {
        train_augmix.severity = s;
    }

    let defaults = EvalGridSpec::default();
    let g = file.grid;
    let grid = EvalGridSpec {
        severities: args.severities.clone().or(g.severities).unwrap_or(defaults.severities),
        mix_modes: args.modes.clone().or(g.mix_modes).unwrap_or(defaults.mix_modes),
        eval_seeds: args.eval_seeds.clone().or(g.eval_seeds).unwrap_or(defaults.eval_seeds),
        include_clean_row: !args.no_clean_row && g.include_clean_row.unwrap_or(defaults.include_clean_row),
        augmix: g.augmix.unwrap_or(defaults.augmix),
    };

    EvalgridRunConfig {
        seed: args.seed.or(file.seed).unwrap_or(0),
        dataset,
        train,
        train_augmix,
        grid,
    }
}

pub fn cmd_evalgrid(args: EvalgridArgs) -> CliResult<String> {
    let file: EvalgridFile = load_json(args.config.as_deref())?;
    let config = resolve(&args, file);
    config.dataset.validate()?;
    config.train.validate()?;
    config.train_augmix.validate()?;
    config.grid.validate()?;

    let d = &config.dataset;
    let train_set = gen_shape_dataset(
        d.train_per_class,
        d.image_size,
        d.noise,
        &mut SeededRng::derived(config.seed, &[TRAIN_DATA_KEY]),
    )?;
    let test_set = gen_shape_dataset(
        d.test_per_class,
        d.image_size,
        d.noise,
        &mut SeededRng::derived(config.seed, &[TEST_DATA_KEY]),
    )?;
    let model = train_small_model(
        &train_set,
        &config.train,
        &config.train_augmix,
        derive_seed(config.seed, &[MODEL_KEY]),
    )?;
    let result = run_grid(&model, &test_set, &config.grid)?;

    let table = result.markdown_table();
    let mut staged = Staged::default();
    staged.add(args.out.join("grid.csv"), result.to_csv());
    staged.add(args.out.join("grid.md"), table.clone());
    let report = ReportFile::Evalgrid {
        version: augprobe::VERSION.to_string(),
        config,
        result,
    };
    staged.add_json(args.out.join("grid.json"), &report)?;
    staged.commit()?;
    Ok(table)
}
