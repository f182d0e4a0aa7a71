//! Common/specific decomposition of per-domain classifiers.
//!
//! One softmax classifier is fitted on clean representations and one on
//! augmented representations. Their weights are split into a shared part
//! `w_c` and a domain-varying part `γ_domain·w_s`, and the report gives the
//! specific/common norm ratio. A small ratio means the two domains share
//! most of their classifier. Only weight matrices enter the decomposition;
//! biases are left out.

mod decompose;
mod softmax;

use serde::{Deserialize, Serialize};

pub use decompose::{decompose_weights, specific_common_ratio, CsdDecomposition, Ratio, DEFAULT_TOL};
pub use softmax::{fit_softmax, DomainClassifier, SoftmaxFit};

use crate::data::{subsample, Domain, LayerTag, ReprDataset};
use crate::divergence::TrainConfig;
use crate::error::{Error, Result};
use crate::numerics::SeededRng;

/// Warning attached to the common-only evaluation column.
pub const COMMON_ONLY_WARNING: &str =
    "keeping only the common component is a diagnostic; it has been observed to worsen corruption error and is not a recommended fix";

/// Decomposes two fitted classifiers (weights only).
pub fn decompose(clean: &DomainClassifier, aug: &DomainClassifier, tol: f64) -> Result<CsdDecomposition> {
    decompose_weights(&clean.weights, &aug.weights, tol)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsdProbeConfig {
    /// Rows sampled from each domain.
    pub per_domain_pool: usize,
    pub train: TrainConfig,
    /// Relative threshold below which the two classifiers count as identical.
    pub tol: f64,
    /// Also score a classifier made of `w_c` and the averaged biases.
    pub evaluate_common_only: bool,
}

impl Default for CsdProbeConfig {
    fn default() -> Self {
        Self {
            per_domain_pool: 20_000,
            train: TrainConfig::default(),
            tol: DEFAULT_TOL,
            evaluate_common_only: false,
        }
    }
}

impl CsdProbeConfig {
    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        if self.per_domain_pool == 0 {
            return Err(Error::param("per_domain_pool must be at least 1"));
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(Error::param(format!("tol must be positive, got {}", self.tol)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainFitSummary {
    pub rows: usize,
    pub train_accuracy: f64,
    pub final_loss: f64,
    pub iterations_run: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommonOnlyEval {
    pub clean_accuracy: f64,
    pub aug_accuracy: f64,
    pub warning: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsdReport {
    pub layer: LayerTag,
    pub ratio: Ratio,
    pub gamma_clean: f64,
    pub gamma_aug: f64,
    pub common_norm: f64,
    pub clean_fit: DomainFitSummary,
    pub aug_fit: DomainFitSummary,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub common_only: Option<CommonOnlyEval>,
    pub decomposition: CsdDecomposition,
    pub config: CsdProbeConfig,
}

impl CsdReport {
    pub fn markdown_row(&self) -> String {
        match &self.common_only {
            Some(c) => format!(
                "| {} | {:.3} | {:.1} / {:.1} |",
                self.layer,
                self.ratio,
                100.0 * c.clean_accuracy,
                100.0 * c.aug_accuracy
            ),
            None => format!("| {} | {:.3} |", self.layer, self.ratio),
        }
    }
}

/// Markdown table with one row per report. Adds the common-only column (and
/// its warning) when every report carries it.
pub fn markdown_table(reports: &[CsdReport]) -> String {
    let with_common = !reports.is_empty() && reports.iter().all(|r| r.common_only.is_some());
    let mut out = if with_common {
        String::from(
            "| Layer | Specific/common ratio (smaller the better) | Common-only accuracy %, clean / aug |\n|---|---:|---:|\n",
        )
    } else {
        String::from("| Layer | Specific/common ratio (smaller the better) |\n|---|---:|\n")
    };
    for r in reports {
        let row = if with_common {
            r.markdown_row()
        } else {
            format!("| {} | {:.3} |", r.layer, r.ratio)
        };
        out.push_str(&row);
        out.push('\n');
    }
    if with_common {
        out.push_str(&format!("\nWarning: {COMMON_ONLY_WARNING}.\n"));
    }
    out
}

fn summarize(fit: &SoftmaxFit, data: &ReprDataset) -> Result<DomainFitSummary> {
    Ok(DomainFitSummary {
        rows: data.len(),
        train_accuracy: fit.classifier.accuracy(data)?,
        final_loss: fit.loss,
        iterations_run: fit.iterations,
        converged: fit.converged,
    })
}

/// Samples `per_domain_pool` rows from each source, fits one classifier per
/// domain on its own rows and decomposes the pair.
pub fn run_csd_probe(
    clean: &ReprDataset,
    aug: &ReprDataset,
    config: &CsdProbeConfig,
    rng: &mut SeededRng,
) -> Result<CsdReport> {
    config.validate()?;
    if clean.class_count() != aug.class_count() {
        return Err(Error::param(format!(
            "clean dump has {} classes but augmented dump has {}",
            clean.class_count(),
            aug.class_count()
        )));
    }
    if clean.dims() != aug.dims() {
        return Err(Error::dim(format!(
            "clean rows have {} dims, augmented rows {}",
            clean.dims(),
            aug.dims()
        )));
    }
    let clean_pool = subsample(clean, config.per_domain_pool, rng)?;
    let aug_pool = subsample(aug, config.per_domain_pool, rng)?;

    let (clean_fit, aug_fit) = rayon::join(
        || {
            fit_softmax(
                clean_pool.features(),
                clean_pool.class_labels(),
                clean_pool.class_count(),
                Domain::Clean,
                &config.train,
            )
        },
        || {
            fit_softmax(
                aug_pool.features(),
                aug_pool.class_labels(),
                aug_pool.class_count(),
                Domain::Aug,
                &config.train,
            )
        },
    );
    let (clean_fit, aug_fit) = (clean_fit?, aug_fit?);
    let dec = decompose(&clean_fit.classifier, &aug_fit.classifier, config.tol)?;

    let common_only = if config.evaluate_common_only {
        let bias = clean_fit
            .classifier
            .bias
            .iter()
            .zip(&aug_fit.classifier.bias)
            .map(|(a, b)| 0.5 * (a + b))
            .collect();
        let common = DomainClassifier::new(dec.w_c.clone(), bias, Domain::Clean)?;
        Some(CommonOnlyEval {
            clean_accuracy: common.accuracy(&clean_pool)?,
            aug_accuracy: common.accuracy(&aug_pool)?,
            warning: COMMON_ONLY_WARNING.to_string(),
        })
    } else {
        None
    };

    Ok(CsdReport {
        layer: clean.layer_tag().clone(),
        ratio: dec.ratio,
        gamma_clean: dec.gamma_clean,
        gamma_aug: dec.gamma_aug,
        common_norm: dec.w_c.frobenius_norm(),
        clean_fit: summarize(&clean_fit, &clean_pool)?,
        aug_fit: summarize(&aug_fit, &aug_pool)?,
        common_only,
        decomposition: dec,
        config: *config,
    })
}
