//! `synth`: writes synthetic dumps plus a manifest, ready for `divergence`
//! and `csd`.

use std::fs;
use std::path::{Path, PathBuf};

use augprobe::csd::Ratio;
use augprobe::data::{store_dump, store_labels, DatasetManifest, Dtype, DumpEntry, LayerEntry, LayerTag, ReprDataset};
use augprobe::numerics::SeededRng;
use augprobe::synth::{gen_planted_csd, gen_two_domain_gaussians, PlantedSpec};
use clap::{Args, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::config::load_json;
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, Default, ValueEnum)]
pub enum DtypeArg {
    F4,
    #[default]
    F8,
}

impl From<DtypeArg> for Dtype {
    fn from(d: DtypeArg) -> Self {
        match d {
            DtypeArg::F4 => Dtype::F4,
            DtypeArg::F8 => Dtype::F8,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum SynthCommand {
    /// Two unit-covariance Gaussian domains with means ±(separation/2)·e₁.
    Gaussians(GaussiansArgs),
    /// Labeled domains drawn from a planted common/specific classifier pair.
    Planted(PlantedArgs),
}

#[derive(Debug, Args)]
pub struct GaussiansArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0.0)]
    pub separation: f64,
    #[arg(long, default_value_t = 16)]
    pub dims: usize,
    /// Rows per domain.
    #[arg(long, default_value_t = 10_000)]
    pub rows: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = DtypeArg::F8)]
    pub dtype: DtypeArg,
}

#[derive(Debug, Args)]
pub struct PlantedArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// JSON config file: `{"seed": .., "spec": {..}}`; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub dims: Option<usize>,
    #[arg(long)]
    pub classes: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub gamma_clean: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub gamma_aug: Option<f64>,
    #[arg(long)]
    pub common_norm: Option<f64>,
    #[arg(long)]
    pub specific_norm: Option<f64>,
    /// Softmax temperature of the label model.
    #[arg(long)]
    pub noise: Option<f64>,
    /// Rows per domain.
    #[arg(long)]
    pub rows: Option<usize>,
    #[arg(long, value_enum, default_value_t = DtypeArg::F8)]
    pub dtype: DtypeArg,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct PlantedFile {
    seed: Option<u64>,
    spec: PlantedSpec,
}

/// Ground truth written next to a planted dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedTruth {
    pub version: String,
    pub seed: u64,
    pub spec: PlantedSpec,
    pub true_ratio: Ratio,
}

const MANIFEST: &str = "manifest.json";

fn write_pair(
    dir: &Path,
    clean: &ReprDataset,
    aug: &ReprDataset,
    with_labels: bool,
    dtype: Dtype,
    provenance: String,
) -> CliResult<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut entries = Vec::with_capacity(2);
    for (name, ds) in [("clean", clean), ("aug", aug)] {
        let features = PathBuf::from(format!("{name}_features.npy"));
        store_dump(&dir.join(&features), ds.features(), dtype)?;
        let labels = if with_labels {
            let p = PathBuf::from(format!("{name}_labels.npy"));
            store_labels(&dir.join(&p), ds.class_labels())?;
            Some(p)
        } else {
            None
        };
        entries.push(DumpEntry {
            features,
            labels,
            rows: ds.len(),
            dims: Some(ds.dims()),
        });
    }
    let aug_entry = entries.pop().expect("two entries");
    let clean_entry = entries.pop().expect("two entries");
    let layer = LayerEntry {
        layer: LayerTag::Penultimate,
        clean: clean_entry,
        aug: aug_entry,
    };
    let manifest = DatasetManifest::new(clean.class_count(), dtype, provenance, vec![layer]);
    let path = dir.join(MANIFEST);
    manifest.write(&path)?;
    Ok(path)
}

pub fn cmd_synth(cmd: SynthCommand) -> CliResult<String> {
    match cmd {
        SynthCommand::Gaussians(a) => {
            let (clean, aug) = gen_two_domain_gaussians(a.separation, a.dims, a.rows, &mut SeededRng::new(a.seed))?;
            let provenance = format!(
                "synthetic two-domain gaussians: separation {}, {} dims, {} rows per domain, seed {}",
                a.separation, a.dims, a.rows, a.seed
            );
            let path = write_pair(&a.out, &clean, &aug, false, a.dtype.into(), provenance)?;
            Ok(format!("wrote {}\n", path.display()))
        }
        SynthCommand::Planted(a) => {
            let file: PlantedFile = load_json(a.config.as_deref())?;
            let mut spec = file.spec;
            let overrides = [
                (a.gamma_clean, &mut spec.gamma_clean),
                (a.gamma_aug, &mut spec.gamma_aug),
                (a.common_norm, &mut spec.common_norm),
                (a.specific_norm, &mut spec.specific_norm),
                (a.noise, &mut spec.noise),
            ];
            for (flag, field) in overrides {
                if let Some(v) = flag {
                    *field = v;
                }
            }
            spec.dims = a.dims.unwrap_or(spec.dims);
            spec.class_count = a.classes.unwrap_or(spec.class_count);
            spec.rows_per_domain = a.rows.unwrap_or(spec.rows_per_domain);
            spec.validate()?;
            let seed = a.seed.or(file.seed).unwrap_or(0);

            let planted = gen_planted_csd(&spec, &mut SeededRng::new(seed))?;
            let true_ratio = if planted.true_ratio.is_finite() {
                Ratio::Finite(planted.true_ratio)
            } else {
                Ratio::Infinite
            };
            let provenance = format!(
                "synthetic planted common/specific classifiers: gamma ({}, {}), {} dims, {} classes, seed {seed}",
                spec.gamma_clean, spec.gamma_aug, spec.dims, spec.class_count
            );
            let path = write_pair(&a.out, &planted.clean, &planted.aug, true, a.dtype.into(), provenance)?;
            let truth = PlantedTruth {
                version: augprobe::VERSION.to_string(),
                seed,
                spec,
                true_ratio,
            };
            let truth_path = a.out.join("planted.json");
            let text = serde_json::to_string_pretty(&truth).expect("truth serializes");
            fs::write(&truth_path, text + "\n").map_err(|e| CliError::io(&truth_path, e))?;
            Ok(format!("wrote {}\nplanted ratio {true_ratio:.4}\n", path.display()))
        }
    }
}
