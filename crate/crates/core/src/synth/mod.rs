//! Synthetic data with known ground truth.
//!
//! * [`gen_two_domain_gaussians`]: two unit-covariance Gaussians whose means
//!   sit at `±(separation/2)·e₁`. The Bayes accuracy of the best domain
//!   discriminator is `Φ(separation/2)`.
//! * [`gen_planted_csd`]: labeled features per domain whose labels follow a
//!   softmax classifier `w_c + γ_domain·w_s` with `w_c ⊥ w_s`, so the
//!   specific/common ratio is known before any sampling.
//! * [`gen_shape_dataset`]: small grayscale shape images for the
//!   augmentation-grid experiments.

mod shapes;

use serde::{Deserialize, Serialize};

pub use shapes::{gen_shape_dataset, LabeledImages, ShapeKind};

use crate::data::{Domain, LayerTag, ReprDataset};
use crate::error::{Error, Result};
use crate::numerics::{frobenius_inner, sample_standard_normal, RealMatrix, SeededRng};

/// Draws `n` rows per domain. Clean rows are centered at `−(separation/2)·e₁`,
/// augmented rows at `+(separation/2)·e₁`. Every row has class label 0.
pub fn gen_two_domain_gaussians(
    separation: f64,
    d: usize,
    n: usize,
    rng: &mut SeededRng,
) -> Result<(ReprDataset, ReprDataset)> {
    if d == 0 || n == 0 {
        return Err(Error::param(format!("need d ≥ 1 and n ≥ 1, got d = {d}, n = {n}")));
    }
    if !separation.is_finite() {
        return Err(Error::param(format!("separation must be finite, got {separation}")));
    }
    let mut make = |shift: f64, domain: Domain| {
        let mut data: Vec<f64> = (0..n * d).map(|_| sample_standard_normal(rng)).collect();
        for row in data.chunks_mut(d) {
            row[0] += shift;
        }
        ReprDataset::single_domain(
            RealMatrix::from_parts_unchecked(n, d, data),
            vec![0; n],
            1,
            domain,
            LayerTag::Penultimate,
        )
    };
    let clean = make(-separation / 2.0, Domain::Clean)?;
    let aug = make(separation / 2.0, Domain::Aug)?;
    Ok((clean, aug))
}

/// Parameters of a planted common/specific construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlantedSpec {
    pub dims: usize,
    pub class_count: usize,
    pub gamma_clean: f64,
    pub gamma_aug: f64,
    /// Frobenius norm of the common component.
    pub common_norm: f64,
    /// Frobenius norm of the specific direction before scaling by γ.
    pub specific_norm: f64,
    /// Softmax temperature of the label model. At 0.5 with the other
    /// defaults the Bayes accuracy is about 0.9.
    pub noise: f64,
    pub rows_per_domain: usize,
}

impl Default for PlantedSpec {
    fn default() -> Self {
        Self {
            dims: 32,
            class_count: 2,
            gamma_clean: 3.0,
            gamma_aug: 1.0,
            common_norm: 1.0,
            specific_norm: 1.0,
            noise: 0.5,
            rows_per_domain: 20_000,
        }
    }
}

impl PlantedSpec {
    pub fn validate(&self) -> Result<()> {
        if self.dims == 0 || self.rows_per_domain == 0 {
            return Err(Error::param("planted spec needs dims ≥ 1 and rows_per_domain ≥ 1"));
        }
        if self.class_count < 2 {
            return Err(Error::param(format!(
                "planted labels need at least 2 classes, got {}",
                self.class_count
            )));
        }
        // one dimension is lost to the softmax shift invariance and two
        // orthogonal directions are needed
        if self.dims * (self.class_count - 1) < 2 {
            return Err(Error::param(
                "planted spec has too few free parameters for two orthogonal directions",
            ));
        }
        for (name, v) in [
            ("gamma_clean", self.gamma_clean),
            ("gamma_aug", self.gamma_aug),
            ("common_norm", self.common_norm),
            ("specific_norm", self.specific_norm),
        ] {
            if !v.is_finite() {
                return Err(Error::param(format!("{name} must be finite, got {v}")));
            }
        }
        if self.common_norm < 0.0 || self.specific_norm < 0.0 {
            return Err(Error::param("planted norms must be non-negative"));
        }
        if !(self.noise.is_finite() && self.noise > 0.0) {
            return Err(Error::param(format!("noise must be positive, got {}", self.noise)));
        }
        Ok(())
    }

    /// Ratio implied by the planted parameters:
    /// `sqrt(γ_clean² + γ_aug²)·‖w_s‖ / (√2·‖w_c‖)`.
    pub fn true_ratio(&self) -> f64 {
        let specific = self.gamma_clean.hypot(self.gamma_aug) * self.specific_norm;
        if specific == 0.0 {
            0.0
        } else if self.common_norm == 0.0 {
            f64::INFINITY
        } else {
            specific / (std::f64::consts::SQRT_2 * self.common_norm)
        }
    }
}

#[derive(Debug, Clone)]
pub struct PlantedCsd {
    pub clean: ReprDataset,
    pub aug: ReprDataset,
    pub true_ratio: f64,
    pub w_common: RealMatrix,
    pub w_specific: RealMatrix,
}

/// Builds `w_c` and `w_s` (`d × C`, orthogonal, each row summing to zero so
/// that they live in the identifiable subspace of a softmax classifier), then
/// samples `x ~ N(0, I)` and `y ~ softmax((w_c + γ·w_s)ᵀx / noise)` per domain.
pub fn gen_planted_csd(spec: &PlantedSpec, rng: &mut SeededRng) -> Result<PlantedCsd> {
    spec.validate()?;
    let (d, c) = (spec.dims, spec.class_count);
    let common = centered_unit(d, c, rng, None);
    let specific = centered_unit(d, c, rng, Some(&common));
    let w_common = common.scale(spec.common_norm);
    let w_specific = specific.scale(spec.specific_norm);

    let mut sample = |gamma: f64, domain: Domain| -> Result<ReprDataset> {
        let w = w_common.add_scaled(gamma, &w_specific)?;
        let n = spec.rows_per_domain;
        let x: Vec<f64> = (0..n * d).map(|_| sample_standard_normal(rng)).collect();
        let mut labels = Vec::with_capacity(n);
        let mut logits = vec![0.0; c];
        for row in x.chunks(d) {
            for (k, l) in logits.iter_mut().enumerate() {
                *l = (0..d).map(|j| row[j] * w.get(j, k)).sum::<f64>() / spec.noise;
            }
            labels.push(sample_categorical(&logits, rng));
        }
        ReprDataset::single_domain(
            RealMatrix::from_parts_unchecked(n, d, x),
            labels,
            c,
            domain,
            LayerTag::Penultimate,
        )
    };
    let clean = sample(spec.gamma_clean, Domain::Clean)?;
    let aug = sample(spec.gamma_aug, Domain::Aug)?;
    Ok(PlantedCsd {
        clean,
        aug,
        true_ratio: spec.true_ratio(),
        w_common,
        w_specific,
    })
}

fn centered_unit(d: usize, c: usize, rng: &mut SeededRng, against: Option<&RealMatrix>) -> RealMatrix {
    loop {
        let mut data: Vec<f64> = (0..d * c).map(|_| sample_standard_normal(rng)).collect();
        for row in data.chunks_mut(c) {
            let mean = row.iter().sum::<f64>() / c as f64;
            row.iter_mut().for_each(|v| *v -= mean);
        }
        let mut m = RealMatrix::from_parts_unchecked(d, c, data);
        if let Some(u) = against {
            // u has unit norm; two passes keep the residual inner product
            // at rounding level
            for _ in 0..2 {
                let p = frobenius_inner(&m, u).expect("same shape");
                m = m.add_scaled(-p, u).expect("same shape");
            }
        }
        let norm = m.frobenius_norm();
        if norm > 1e-6 {
            let unit = m.scale(1.0 / norm);
            if let Some(u) = against {
                let p = frobenius_inner(&unit, u).expect("same shape");
                return unit.add_scaled(-p, u).expect("same shape");
            }
            return unit;
        }
    }
}

fn sample_categorical(logits: &[f64], rng: &mut SeededRng) -> usize {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    let mut u = rng.next_f64() * total;
    for (k, w) in weights.iter().enumerate() {
        if u < *w {
            return k;
        }
        u -= w;
    }
    weights.len() - 1
}
