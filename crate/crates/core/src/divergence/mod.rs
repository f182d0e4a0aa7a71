//! Domain-divergence probe.
//!
//! A linear discriminator is trained to tell clean representations from
//! augmented ones. Its held-out error ε feeds the proxy divergence
//! `2·(1 − 2·min(ε, 1 − ε))`: 0 when the discriminator is at chance, 2 when
//! the two domains are perfectly separable. High values mean the layer keeps
//! augmentation-identifying information, i.e. little parameter sharing
//! between clean and augmented inputs.

mod logistic;

use serde::{Deserialize, Serialize};

pub use logistic::{
    accuracy, fit_logistic, fit_logistic_standardized, fit_logistic_traced, stability_bound, LinearDiscriminator,
    LogisticFit, Standardizer, TrainConfig,
};

use crate::data::{balanced_pool, split_train_test, Domain, LayerTag, ReprDataset};
use crate::error::{Error, Result};
use crate::numerics::SeededRng;

/// Proxy divergence from a discriminator's held-out error.
pub fn proxy_divergence(test_error: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&test_error) {
        return Err(Error::param(format!("test error must lie in [0, 1], got {test_error}")));
    }
    // the flipped discriminator is also in the hypothesis class
    let eps = test_error.min(1.0 - test_error);
    Ok(2.0 * (1.0 - 2.0 * eps))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DivergenceProbeConfig {
    /// Rows in the discriminator's training pool, half per domain.
    pub pool_size: usize,
    /// Held-out pool size as a fraction of `pool_size`, drawn from rows not
    /// used for training.
    pub test_fraction: f64,
    pub train: TrainConfig,
}

impl Default for DivergenceProbeConfig {
    fn default() -> Self {
        Self {
            pool_size: 40_000,
            test_fraction: 0.2,
            train: TrainConfig::default(),
        }
    }
}

impl DivergenceProbeConfig {
    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        if self.pool_size < 2 || !self.pool_size.is_multiple_of(2) {
            return Err(Error::param(format!(
                "pool_size must be even and at least 2, got {}",
                self.pool_size
            )));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::param(format!(
                "test_fraction must lie in (0, 1), got {}",
                self.test_fraction
            )));
        }
        if self.test_pool_size() == 0 {
            return Err(Error::param(
                "test pool would be empty; raise pool_size or test_fraction",
            ));
        }
        Ok(())
    }

    /// Even number of held-out rows, half per domain.
    pub fn test_pool_size(&self) -> usize {
        2 * (self.pool_size as f64 * self.test_fraction / 2.0).round() as usize
    }

    /// Rows each source must provide.
    pub fn rows_needed_per_domain(&self) -> usize {
        (self.pool_size + self.test_pool_size()) / 2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolCounts {
    pub clean: usize,
    pub aug: usize,
}

impl PoolCounts {
    fn of(ds: &ReprDataset) -> Self {
        Self {
            clean: ds.count_domain(Domain::Clean),
            aug: ds.count_domain(Domain::Aug),
        }
    }
}

/// Outcome of one divergence probe run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceReport {
    pub layer: LayerTag,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub proxy_divergence: f64,
    pub train_pool: PoolCounts,
    pub test_pool: PoolCounts,
    /// Features were standardized with training-pool statistics.
    pub standardized: bool,
    pub iterations_run: usize,
    pub converged: bool,
    pub final_loss: f64,
    pub config: DivergenceProbeConfig,
}

impl DivergenceReport {
    /// Cell in "test (train)" percent form, e.g. `85.5 (91.8)`.
    pub fn accuracy_cell(&self) -> String {
        format!("{:.1} ({:.1})", 100.0 * self.test_accuracy, 100.0 * self.train_accuracy)
    }

    pub fn markdown_row(&self) -> String {
        format!(
            "| {} | {} | {:.3} |",
            self.layer,
            self.accuracy_cell(),
            self.proxy_divergence
        )
    }
}

/// Markdown table with one row per report.
pub fn markdown_table(reports: &[DivergenceReport]) -> String {
    let mut out =
        String::from("| Layer | Discriminator accuracy %, test (train) | Proxy divergence |\n|---|---:|---:|\n");
    for r in reports {
        out.push_str(&r.markdown_row());
        out.push('\n');
    }
    out
}

/// Runs the probe end to end.
///
/// A balanced pool of `pool_size + test_pool_size` rows is drawn, then split
/// by domain-stratified sampling into a training pool of exactly `pool_size`
/// rows and a disjoint held-out pool. Features are standardized with
/// training-pool statistics.
pub fn run_divergence_probe(
    clean: &ReprDataset,
    aug: &ReprDataset,
    config: &DivergenceProbeConfig,
    rng: &mut SeededRng,
) -> Result<DivergenceReport> {
    config.validate()?;
    let test_size = config.test_pool_size();
    let total = config.pool_size + test_size;
    let pool = balanced_pool(clean, aug, total, rng)?;
    let (train, test) = split_train_test(&pool, test_size as f64 / total as f64, rng)?;
    debug_assert_eq!(train.len(), config.pool_size);

    let fit = fit_logistic_standardized(&train, &config.train)?;
    let train_accuracy = accuracy(&fit.model, &train)?;
    let test_accuracy = accuracy(&fit.model, &test)?;
    Ok(DivergenceReport {
        layer: clean.layer_tag().clone(),
        train_accuracy,
        test_accuracy,
        proxy_divergence: proxy_divergence(1.0 - test_accuracy)?,
        train_pool: PoolCounts::of(&train),
        test_pool: PoolCounts::of(&test),
        standardized: true,
        iterations_run: fit.iterations,
        converged: fit.converged,
        final_loss: fit.final_loss(),
        config: *config,
    })
}
