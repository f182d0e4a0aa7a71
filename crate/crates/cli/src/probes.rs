//! `divergence` and `csd`: the two representation probes, run per layer over
//! the dumps listed in a manifest.

use std::path::PathBuf;

use augprobe::csd::{self, run_csd_probe, CsdProbeConfig};
use augprobe::data::{DatasetManifest, Domain, LayerTag, ReprDataset};
use augprobe::divergence::{self, run_divergence_probe, DivergenceProbeConfig};
use augprobe::numerics::SeededRng;
use clap::Args;
use serde::{Deserialize, Serialize};

use crate::config::{file_stem, load_json, name_key, parse_layers, Staged, TrainOpts};
use crate::error::{CliError, CliResult};
use crate::report::ReportFile;

#[derive(Debug, Args)]
pub struct DivergenceArgs {
    /// Dataset manifest (JSON) listing the dumps.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Directory for the per-layer reports and the markdown table.
    #[arg(long)]
    pub out: PathBuf,
    /// JSON config file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Layers to probe, comma separated (default: every layer in the manifest).
    #[arg(long, value_delimiter = ',')]
    pub layers: Option<Vec<String>>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Rows in the discriminator's training pool, half per domain.
    #[arg(long)]
    pub pool_size: Option<usize>,
    /// Held-out pool size as a fraction of the training pool.
    #[arg(long)]
    pub test_fraction: Option<f64>,
    #[command(flatten)]
    pub train: TrainOpts,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct DivergenceFile {
    seed: Option<u64>,
    layers: Option<Vec<String>>,
    pool_size: Option<usize>,
    test_fraction: Option<f64>,
    train: TrainOpts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceRunConfig {
    pub seed: u64,
    pub layers: Vec<LayerTag>,
    pub probe: DivergenceProbeConfig,
}

#[derive(Debug, Args)]
pub struct CsdArgs {
    /// Dataset manifest (JSON); both domains need label files.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Directory for the per-layer reports and the markdown table.
    #[arg(long)]
    pub out: PathBuf,
    /// JSON config file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Layers to probe, comma separated (default: every layer in the manifest).
    #[arg(long, value_delimiter = ',')]
    pub layers: Option<Vec<String>>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Rows sampled from each domain.
    #[arg(long)]
    pub per_domain_pool: Option<usize>,
    /// Relative threshold below which the two classifiers count as identical.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Also score the common-only classifier.
    #[arg(long)]
    pub common_only: bool,
    #[command(flatten)]
    pub train: TrainOpts,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct CsdFile {
    seed: Option<u64>,
    layers: Option<Vec<String>>,
    per_domain_pool: Option<usize>,
    tol: Option<f64>,
    evaluate_common_only: Option<bool>,
    train: TrainOpts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsdRunConfig {
    pub seed: u64,
    pub layers: Vec<LayerTag>,
    pub probe: CsdProbeConfig,
}

fn resolve_layers(requested: Option<Vec<String>>, manifest: &DatasetManifest) -> CliResult<Vec<LayerTag>> {
    let layers = match requested {
        Some(names) => parse_layers(&names),
        None => manifest.layers.iter().map(|l| l.layer.clone()).collect(),
    };
    if layers.is_empty() {
        return Err(CliError::usage("no layers selected"));
    }
    for tag in &layers {
        manifest.layer(tag)?;
    }
    Ok(layers)
}

/// Loads both domains of every layer, checking row counts before any fit.
fn load_layers(
    manifest: &DatasetManifest,
    layers: &[LayerTag],
    rows_needed: usize,
) -> CliResult<Vec<(ReprDataset, ReprDataset)>> {
    layers
        .iter()
        .map(|tag| {
            let entry = manifest.layer(tag)?;
            let mut pair = Vec::with_capacity(2);
            for domain in [Domain::Clean, Domain::Aug] {
                let ds = manifest.load_dataset(tag, domain)?;
                if ds.len() < rows_needed {
                    return Err(augprobe::Error::Capacity {
                        what: format!(
                            "{} rows of layer {tag} ({})",
                            domain.name(),
                            manifest.resolve(&entry.entry(domain).features).display()
                        ),
                        needed: rows_needed,
                        available: ds.len(),
                    }
                    .into());
                }
                pair.push(ds);
            }
            let aug = pair.pop().expect("two domains");
            let clean = pair.pop().expect("two domains");
            Ok((clean, aug))
        })
        .collect()
}

fn layer_rng(seed: u64, tag: &LayerTag) -> SeededRng {
    SeededRng::derived(seed, &[name_key(tag.as_str())])
}

pub fn cmd_divergence(args: DivergenceArgs) -> CliResult<String> {
    let file: DivergenceFile = load_json(args.config.as_deref())?;
    let defaults = DivergenceProbeConfig::default();
    let probe = DivergenceProbeConfig {
        pool_size: args.pool_size.or(file.pool_size).unwrap_or(defaults.pool_size),
        test_fraction: args
            .test_fraction
            .or(file.test_fraction)
            .unwrap_or(defaults.test_fraction),
        train: file.train.overlay(args.train).resolve(),
    };
    probe.validate()?;
    let manifest = DatasetManifest::load(&args.manifest)?;
    let config = DivergenceRunConfig {
        seed: args.seed.or(file.seed).unwrap_or(0),
        layers: resolve_layers(args.layers.or(file.layers), &manifest)?,
        probe,
    };
    let data = load_layers(&manifest, &config.layers, probe.rows_needed_per_domain())?;

    let mut reports = Vec::with_capacity(data.len());
    for (tag, (clean, aug)) in config.layers.iter().zip(&data) {
        reports.push(run_divergence_probe(
            clean,
            aug,
            &probe,
            &mut layer_rng(config.seed, tag),
        )?);
    }

    let table = divergence::markdown_table(&reports);
    let mut staged = Staged::default();
    for r in &reports {
        let file = ReportFile::Divergence {
            version: augprobe::VERSION.to_string(),
            manifest: args.manifest.display().to_string(),
            config: config.clone(),
            report: r.clone(),
        };
        staged.add_json(args.out.join(format!("divergence_{}.json", file_stem(&r.layer))), &file)?;
    }
    staged.add(args.out.join("divergence.md"), table.clone());
    staged.commit()?;
    Ok(table)
}

pub fn cmd_csd(args: CsdArgs) -> CliResult<String> {
    let file: CsdFile = load_json(args.config.as_deref())?;
    let defaults = CsdProbeConfig::default();
    let probe = CsdProbeConfig {
        per_domain_pool: args
            .per_domain_pool
            .or(file.per_domain_pool)
            .unwrap_or(defaults.per_domain_pool),
        train: file.train.overlay(args.train).resolve(),
        tol: args.tol.or(file.tol).unwrap_or(defaults.tol),
        evaluate_common_only: args.common_only || file.evaluate_common_only.unwrap_or(defaults.evaluate_common_only),
    };
    probe.validate()?;
    let manifest = DatasetManifest::load(&args.manifest)?;
    let config = CsdRunConfig {
        seed: args.seed.or(file.seed).unwrap_or(0),
        layers: resolve_layers(args.layers.or(file.layers), &manifest)?,
        probe,
    };
    for tag in &config.layers {
        if !manifest.has_labels(tag)? {
            return Err(CliError::data(
                &args.manifest,
                format!("layer {tag} needs label files for both domains"),
            ));
        }
    }
    let data = load_layers(&manifest, &config.layers, probe.per_domain_pool)?;

    let mut reports = Vec::with_capacity(data.len());
    for (tag, (clean, aug)) in config.layers.iter().zip(&data) {
        reports.push(run_csd_probe(clean, aug, &probe, &mut layer_rng(config.seed, tag))?);
    }

    let table = csd::markdown_table(&reports);
    let mut staged = Staged::default();
    for r in &reports {
        let file = ReportFile::Csd {
            version: augprobe::VERSION.to_string(),
            manifest: args.manifest.display().to_string(),
            config: config.clone(),
            report: r.clone(),
        };
        staged.add_json(args.out.join(format!("csd_{}.json", file_stem(&r.layer))), &file)?;
    }
    staged.add(args.out.join("csd.md"), table.clone());
    staged.commit()?;
    Ok(table)
}
