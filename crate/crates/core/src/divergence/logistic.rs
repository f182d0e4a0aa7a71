//! Binary logistic regression by full-batch gradient descent.

use serde::{Deserialize, Serialize};

use crate::data::{Domain, ReprDataset};
use crate::error::{Error, Result};
use crate::numerics::{dot, sigmoid, softplus, RealMatrix};

/// Optimizer settings shared by the linear probes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub step_size: f64,
    pub iterations: usize,
    pub l2_penalty: f64,
    pub convergence_tol: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            step_size: 0.1,
            iterations: 2000,
            l2_penalty: 1e-4,
            convergence_tol: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size.is_finite() && self.step_size > 0.0) {
            return Err(Error::param(format!(
                "step_size must be positive, got {}",
                self.step_size
            )));
        }
        if self.iterations == 0 {
            return Err(Error::param("iterations must be at least 1"));
        }
        if !(self.l2_penalty.is_finite() && self.l2_penalty >= 0.0) {
            return Err(Error::param(format!(
                "l2_penalty must be non-negative, got {}",
                self.l2_penalty
            )));
        }
        if self.convergence_tol.is_nan() || self.convergence_tol <= 0.0 {
            return Err(Error::param(format!(
                "convergence_tol must be positive, got {}",
                self.convergence_tol
            )));
        }
        Ok(())
    }
}

/// Per-dimension affine map to zero mean and unit variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    /// Fits on `x`. Constant dimensions keep scale 1.
    pub fn fit(x: &RealMatrix) -> Self {
        let (n, d) = x.shape();
        let mut mean = vec![0.0; d];
        for row in x.row_iter() {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        let nf = n.max(1) as f64;
        mean.iter_mut().for_each(|m| *m /= nf);
        let mut var = vec![0.0; d];
        for row in x.row_iter() {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let scale = var
            .into_iter()
            .map(|s| {
                let sd = (s / nf).sqrt();
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, scale }
    }

    pub fn dims(&self) -> usize {
        self.mean.len()
    }

    pub fn transform(&self, x: &RealMatrix) -> Result<RealMatrix> {
        if x.cols() != self.dims() {
            return Err(Error::dim(format!(
                "standardizer fitted on {} dims, got {}",
                self.dims(),
                x.cols()
            )));
        }
        let mut data = Vec::with_capacity(x.rows() * x.cols());
        for row in x.row_iter() {
            data.extend(
                row.iter()
                    .zip(&self.mean)
                    .zip(&self.scale)
                    .map(|((v, m), s)| (v - m) / s),
            );
        }
        Ok(RealMatrix::from_parts_unchecked(x.rows(), x.cols(), data))
    }
}

/// Linear clean-vs-augmented discriminator.
///
/// Predicts augmented (1) when the logistic probability is at least 0.5, so
/// ties go to class 1. When a standardizer is attached, raw features are
/// mapped through it before scoring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearDiscriminator {
    pub weights: Vec<f64>,
    pub bias: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub standardizer: Option<Standardizer>,
}

impl LinearDiscriminator {
    pub fn zeros(dims: usize) -> Self {
        Self {
            weights: vec![0.0; dims],
            bias: 0.0,
            standardizer: None,
        }
    }

    pub fn dims(&self) -> usize {
        self.weights.len()
    }

    fn prepare<'a>(&self, x: &'a RealMatrix) -> Result<std::borrow::Cow<'a, RealMatrix>> {
        if x.cols() != self.dims() {
            return Err(Error::dim(format!(
                "discriminator has {} weights, data has {} dims",
                self.dims(),
                x.cols()
            )));
        }
        Ok(match &self.standardizer {
            Some(s) => std::borrow::Cow::Owned(s.transform(x)?),
            None => std::borrow::Cow::Borrowed(x),
        })
    }

    /// Probability of the augmented class for each row.
    pub fn probabilities(&self, x: &RealMatrix) -> Result<Vec<f64>> {
        let x = self.prepare(x)?;
        Ok(x.row_iter()
            .map(|r| sigmoid(dot(r, &self.weights) + self.bias))
            .collect())
    }

    pub fn predict(&self, x: &RealMatrix) -> Result<Vec<Domain>> {
        Ok(self
            .probabilities(x)?
            .into_iter()
            .map(|p| if p >= 0.5 { Domain::Aug } else { Domain::Clean })
            .collect())
    }
}

/// A fitted discriminator with its optimization trace.
#[derive(Debug, Clone)]
pub struct LogisticFit {
    pub model: LinearDiscriminator,
    /// Objective value at the start of every executed iteration.
    pub losses: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl LogisticFit {
    pub fn final_loss(&self) -> f64 {
        self.losses.last().copied().unwrap_or(f64::NAN)
    }
}

/// Step size at or below which full-batch gradient descent on the
/// regularized logistic loss is guaranteed not to increase the loss.
///
/// The loss is L-smooth with L ≤ ¼·mean(‖x‖² + 1) + l2 (the trace bound on
/// the Hessian including the bias column); this returns 1/L.
pub fn stability_bound(x: &RealMatrix, l2_penalty: f64) -> f64 {
    let n = x.rows().max(1) as f64;
    let mean_sq = x.row_iter().map(|r| dot(r, r) + 1.0).sum::<f64>() / n;
    1.0 / (0.25 * mean_sq + l2_penalty)
}

/// Fits a discriminator on raw features with domain ids as targets.
pub fn fit_logistic(data: &ReprDataset, config: &TrainConfig) -> Result<LinearDiscriminator> {
    Ok(fit_logistic_traced(data.features(), data.domain_ids(), config)?.model)
}

/// Standardizes features, then fits; the standardizer travels with the model.
pub fn fit_logistic_standardized(data: &ReprDataset, config: &TrainConfig) -> Result<LogisticFit> {
    let standardizer = Standardizer::fit(data.features());
    let x = standardizer.transform(data.features())?;
    let mut fit = fit_logistic_traced(&x, data.domain_ids(), config)?;
    fit.model.standardizer = Some(standardizer);
    Ok(fit)
}

/// L2-regularized logistic regression from zero initialization.
///
/// Minimizes mean(softplus(z) − y·z) + ½·l2·‖w‖² (bias unpenalized) by
/// full-batch gradient descent, stopping when the loss changes by at most
/// `convergence_tol` between iterations.
pub fn fit_logistic_traced(x: &RealMatrix, targets: &[Domain], config: &TrainConfig) -> Result<LogisticFit> {
    config.validate()?;
    let (n, d) = x.shape();
    if n == 0 {
        return Err(Error::Capacity {
            what: "logistic fit".into(),
            needed: 1,
            available: 0,
        });
    }
    if targets.len() != n {
        return Err(Error::dim(format!("{n} rows but {} targets", targets.len())));
    }
    if !targets.contains(&Domain::Clean) || !targets.contains(&Domain::Aug) {
        return Err(Error::param("logistic fit needs both domains present"));
    }
    let y: Vec<f64> = targets.iter().map(|t| t.id() as f64).collect();
    let nf = n as f64;

    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut grad = vec![0.0; d];
    let mut losses: Vec<f64> = Vec::new();
    let mut converged = false;

    for iter in 0..config.iterations {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut gb = 0.0;
        let mut data_loss = 0.0;
        for (row, &yi) in x.row_iter().zip(&y) {
            let z = dot(row, &w) + b;
            data_loss += softplus(z) - yi * z;
            let r = sigmoid(z) - yi;
            gb += r;
            for (g, v) in grad.iter_mut().zip(row) {
                *g += r * v;
            }
        }
        let loss = data_loss / nf + 0.5 * config.l2_penalty * dot(&w, &w);
        if !loss.is_finite() {
            return Err(Error::Divergence { iteration: iter, loss });
        }
        if let Some(&prev) = losses.last() {
            if (prev - loss).abs() <= config.convergence_tol {
                losses.push(loss);
                converged = true;
                break;
            }
        }
        losses.push(loss);

        for (wi, g) in w.iter_mut().zip(&grad) {
            *wi -= config.step_size * (g / nf + config.l2_penalty * *wi);
        }
        b -= config.step_size * gb / nf;
        if !b.is_finite() || w.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence {
                iteration: iter + 1,
                loss: f64::INFINITY,
            });
        }
    }
    let iterations = losses.len();
    Ok(LogisticFit {
        model: LinearDiscriminator {
            weights: w,
            bias: b,
            standardizer: None,
        },
        losses,
        iterations,
        converged,
    })
}

/// Fraction of rows whose predicted domain equals the stored domain id.
pub fn accuracy(model: &LinearDiscriminator, data: &ReprDataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Capacity {
            what: "accuracy".into(),
            needed: 1,
            available: 0,
        });
    }
    let pred = model.predict(data.features())?;
    let hits = pred.iter().zip(data.domain_ids()).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / data.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::LayerTag;
    use crate::numerics::{sample_standard_normal, SeededRng};

    fn dataset(rows: &[Vec<f64>], domains: &[u8]) -> ReprDataset {
        ReprDataset::new(
            RealMatrix::from_rows(rows).unwrap(),
            vec![0; rows.len()],
            1,
            domains.iter().map(|&d| Domain::from_id(d).unwrap()).collect(),
            LayerTag::Penultimate,
        )
        .unwrap()
    }

    fn blobs(mean: f64, d: usize, per_side: usize, rng: &mut SeededRng) -> ReprDataset {
        let mut rows = Vec::new();
        let mut doms = Vec::new();
        for (sign, dom) in [(-1.0, 0u8), (1.0, 1u8)] {
            for _ in 0..per_side {
                let mut r: Vec<f64> = (0..d).map(|_| sample_standard_normal(rng)).collect();
                r[0] += sign * mean;
                rows.push(r);
                doms.push(dom);
            }
        }
        dataset(&rows, &doms)
    }

    #[test]
    fn separable_pair_is_learned() {
        let data = dataset(&[vec![-1.0], vec![1.0]], &[0, 1]);
        let m = fit_logistic(&data, &TrainConfig::default()).unwrap();
        assert_eq!(accuracy(&m, &data).unwrap(), 1.0);
    }

    #[test]
    fn indistinguishable_domains_score_one_half() {
        let rows = vec![vec![0.3, -1.2]; 10];
        let data = dataset(&rows, &[0, 1, 0, 1, 0, 1, 0, 1, 0, 1]);
        let m = fit_logistic(&data, &TrainConfig::default()).unwrap();
        assert_eq!(accuracy(&m, &data).unwrap(), 0.5);
    }

    #[test]
    fn gaussian_blobs_beat_ninety_five_percent() {
        // Bayes accuracy for means ±2e₁ with unit covariance is Φ(2) ≈ 0.977.
        let mut rng = SeededRng::new(21);
        let train = blobs(2.0, 3, 1000, &mut rng);
        let test = blobs(2.0, 3, 1000, &mut rng);
        let m = fit_logistic(&train, &TrainConfig::default()).unwrap();
        assert!(accuracy(&m, &test).unwrap() >= 0.95);
    }

    #[test]
    fn zero_model_on_balanced_pool_is_chance() {
        let data = dataset(&[vec![1.0], vec![2.0], vec![-1.0], vec![5.0]], &[0, 1, 1, 0]);
        assert_eq!(accuracy(&LinearDiscriminator::zeros(1), &data).unwrap(), 0.5);
    }

    #[test]
    fn three_row_enumeration() {
        // w = 1, b = 0 predicts aug for x ≥ 0: rows (−1→clean ✓), (2→aug ✓), (0.5 labelled clean ✗)
        let m = LinearDiscriminator {
            weights: vec![1.0],
            bias: 0.0,
            standardizer: None,
        };
        let data = dataset(&[vec![-1.0], vec![2.0], vec![0.5]], &[0, 1, 0]);
        assert_eq!(accuracy(&m, &data).unwrap(), 2.0 / 3.0);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let data = dataset(&[vec![1.0, 2.0]], &[0]);
        assert!(matches!(
            accuracy(&LinearDiscriminator::zeros(3), &data),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn oversized_step_reports_divergence_iteration() {
        let mut rng = SeededRng::new(4);
        let data = blobs(1e3, 2, 50, &mut rng);
        let cfg = TrainConfig {
            step_size: 1e6,
            l2_penalty: 1.0,
            ..TrainConfig::default()
        };
        match fit_logistic(&data, &cfg) {
            Err(Error::Divergence { iteration, .. }) => assert!(iteration > 0),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn loss_is_monotone_below_stability_bound() {
        let mut rng = SeededRng::new(5);
        let data = blobs(1.0, 4, 200, &mut rng);
        let step = stability_bound(data.features(), 1e-3);
        let cfg = TrainConfig {
            step_size: step,
            iterations: 300,
            l2_penalty: 1e-3,
            convergence_tol: 1e-14,
        };
        let fit = fit_logistic_traced(data.features(), data.domain_ids(), &cfg).unwrap();
        for pair in fit.losses.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-15, "{} -> {}", pair[0], pair[1]);
        }
    }

    #[test]
    fn label_flip_preserves_distance_from_chance() {
        let mut rng = SeededRng::new(6);
        let train = blobs(0.7, 3, 300, &mut rng);
        let test = blobs(0.7, 3, 300, &mut rng);
        let flip = |ds: &ReprDataset| {
            let doms = ds
                .domain_ids()
                .iter()
                .map(|d| {
                    if *d == Domain::Clean {
                        Domain::Aug
                    } else {
                        Domain::Clean
                    }
                })
                .collect();
            ReprDataset::new(
                ds.features().clone(),
                ds.class_labels().to_vec(),
                1,
                doms,
                LayerTag::Penultimate,
            )
            .unwrap()
        };
        let cfg = TrainConfig::default();
        let a = accuracy(&fit_logistic(&train, &cfg).unwrap(), &test).unwrap();
        let b = accuracy(&fit_logistic(&flip(&train), &cfg).unwrap(), &flip(&test)).unwrap();
        assert!(((a - 0.5).abs() - (b - 0.5).abs()).abs() < 1e-12, "{a} vs {b}");
    }

    #[test]
    fn feature_scaling_with_rescaled_step_keeps_predictions() {
        // Point-symmetric pool: every (x, y) has a partner (−x, 1−y), so the
        // bias gradient vanishes and only the weight step needs rescaling.
        let mut rng = SeededRng::new(7);
        let mut rows = Vec::new();
        let mut doms = Vec::new();
        for _ in 0..100 {
            let mut r: Vec<f64> = (0..3).map(|_| sample_standard_normal(&mut rng)).collect();
            r[0] += 1.0;
            rows.push(r.clone());
            doms.push(1u8);
            rows.push(r.iter().map(|v| -v).collect());
            doms.push(0u8);
        }
        let data = dataset(&rows, &doms);
        let c = 3.5;
        let scaled = data.with_features(data.features().scale(c)).unwrap();
        let cfg = TrainConfig {
            step_size: 0.2,
            iterations: 200,
            l2_penalty: 0.0,
            convergence_tol: 1e-300,
        };
        let cfg_scaled = TrainConfig {
            step_size: 0.2 / (c * c),
            ..cfg
        };
        let p = fit_logistic(&data, &cfg)
            .unwrap()
            .probabilities(data.features())
            .unwrap();
        let q = fit_logistic(&scaled, &cfg_scaled)
            .unwrap()
            .probabilities(scaled.features())
            .unwrap();
        for (a, b) in p.iter().zip(&q) {
            assert!((a - b).abs() <= 1e-8);
        }
    }

    #[test]
    fn standardizer_handles_constant_columns() {
        let x = RealMatrix::from_rows(&[[1.0, 5.0], [3.0, 5.0]]).unwrap();
        let s = Standardizer::fit(&x);
        let t = s.transform(&x).unwrap();
        assert_eq!(t.as_slice(), &[-1.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn rejects_single_domain_and_bad_config() {
        let data = dataset(&[vec![1.0], vec![2.0]], &[0, 0]);
        assert!(matches!(
            fit_logistic(&data, &TrainConfig::default()),
            Err(Error::Parameter(_))
        ));
        let two = dataset(&[vec![1.0], vec![2.0]], &[0, 1]);
        let cfg = TrainConfig {
            iterations: 0,
            ..TrainConfig::default()
        };
        assert!(matches!(fit_logistic(&two, &cfg), Err(Error::Parameter(_))));
    }
}
