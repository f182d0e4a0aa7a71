//! Small image classifiers trained with augmentation in the loop.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::augment::{augmix, AugmixConfig, Image, MixMode};
use crate::error::{Error, Result};
use crate::numerics::{sample_standard_normal, RealMatrix, SeededRng};
use crate::synth::LabeledImages;

// Stream tags keep training draws apart from evaluation draws.
pub(crate) const TRAIN_INIT_STREAM: u64 = 0x7472_6169_6e5f_696e;
pub(crate) const TRAIN_ORDER_STREAM: u64 = 0x7472_6169_6e5f_6f72;
pub(crate) const TRAIN_AUG_STREAM: u64 = 0x7472_6169_6e5f_6167;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SmallTrainConfig {
    /// Width of the tanh hidden layer; 0 gives a plain softmax model.
    pub hidden_width: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub l2_penalty: f64,
}

impl Default for SmallTrainConfig {
    fn default() -> Self {
        Self {
            hidden_width: 32,
            epochs: 30,
            batch_size: 32,
            learning_rate: 0.1,
            l2_penalty: 1e-4,
        }
    }
}

impl SmallTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::param("epochs and batch_size must be at least 1"));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::param(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(self.l2_penalty.is_finite() && self.l2_penalty >= 0.0) {
            return Err(Error::param(format!(
                "l2_penalty must be non-negative, got {}",
                self.l2_penalty
            )));
        }
        Ok(())
    }
}

/// How a model was trained, carried into grid results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingInfo {
    pub seed: u64,
    pub train: SmallTrainConfig,
    pub augmix: AugmixConfig,
    pub final_loss: f64,
    pub train_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    /// `inputs × outputs`.
    pub weights: RealMatrix,
    pub bias: Vec<f64>,
}

impl DenseLayer {
    fn forward(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend_from_slice(&self.bias);
        for (i, &xi) in x.iter().enumerate() {
            if xi != 0.0 {
                for (o, w) in out.iter_mut().zip(self.weights.row(i)) {
                    *o += xi * w;
                }
            }
        }
    }
}

/// Softmax classifier over flattened pixels, optionally with one tanh
/// hidden layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmallModel {
    pub layers: Vec<DenseLayer>,
    pub input_dims: usize,
    pub class_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub training: Option<TrainingInfo>,
}

impl SmallModel {
    pub fn new(layers: Vec<DenseLayer>) -> Result<Self> {
        let first = layers
            .first()
            .ok_or_else(|| Error::param("a model needs at least one layer"))?;
        let input_dims = first.weights.rows();
        let mut width = input_dims;
        for (k, l) in layers.iter().enumerate() {
            if l.weights.rows() != width || l.bias.len() != l.weights.cols() {
                return Err(Error::dim(format!(
                    "layer {k} does not chain with its input of width {width}"
                )));
            }
            if l.bias.iter().any(|b| !b.is_finite()) {
                return Err(Error::NonFinite(format!("layer {k} bias")));
            }
            width = l.weights.cols();
        }
        Ok(Self {
            layers,
            input_dims,
            class_count: width,
            training: None,
        })
    }

    /// A model that always predicts `class` (zero weights, one-hot bias).
    pub fn constant(input_dims: usize, class_count: usize, class: usize) -> Result<Self> {
        if class >= class_count {
            return Err(Error::param(format!("class {class} outside [0, {class_count})")));
        }
        let mut bias = vec![0.0; class_count];
        bias[class] = 1.0;
        Self::new(vec![DenseLayer {
            weights: RealMatrix::zeros(input_dims, class_count),
            bias,
        }])
    }

    fn logits(&self, x: &[f64], buf: &mut Vec<f64>, out: &mut Vec<f64>) {
        out.clear();
        out.extend_from_slice(x);
        let last = self.layers.len() - 1;
        for (k, layer) in self.layers.iter().enumerate() {
            layer.forward(out, buf);
            if k < last {
                buf.iter_mut().for_each(|v| *v = v.tanh());
            }
            std::mem::swap(out, buf);
        }
    }

    pub fn predict_one(&self, pixels: &[f64]) -> usize {
        let (mut buf, mut out) = (Vec::new(), Vec::new());
        self.logits(pixels, &mut buf, &mut out);
        let mut best = 0;
        for k in 1..out.len() {
            if out[k] > out[best] {
                best = k;
            }
        }
        best
    }

    pub fn check_input(&self, img: &Image) -> Result<()> {
        if img.len() != self.input_dims {
            return Err(Error::dim(format!(
                "model takes {} pixels, image has {}",
                self.input_dims,
                img.len()
            )));
        }
        Ok(())
    }

    pub fn accuracy(&self, data: &LabeledImages) -> Result<f64> {
        if data.is_empty() {
            return Err(Error::param("accuracy of an empty dataset"));
        }
        let mut hits = 0;
        for (img, &y) in data.images.iter().zip(&data.labels) {
            self.check_input(img)?;
            hits += (self.predict_one(img.pixels()) == y) as usize;
        }
        Ok(hits as f64 / data.len() as f64)
    }

    /// Adds the gradient of `−log p_y` at `x` into `grads` (same layout as
    /// `layers`) and returns the loss.
    fn backprop(&self, x: &[f64], y: usize, grads: &mut [DenseGrad]) -> f64 {
        // forward, keeping activations
        let mut acts: Vec<Vec<f64>> = vec![x.to_vec()];
        let last = self.layers.len() - 1;
        for (k, layer) in self.layers.iter().enumerate() {
            let mut out = Vec::new();
            layer.forward(acts.last().expect("non-empty"), &mut out);
            if k < last {
                out.iter_mut().for_each(|v| *v = v.tanh());
            }
            acts.push(out);
        }
        let logits = acts.last().expect("non-empty");
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut delta: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
        let total: f64 = delta.iter().sum();
        let loss = total.ln() - (logits[y] - max);
        delta.iter_mut().for_each(|p| *p /= total);
        delta[y] -= 1.0;

        for k in (0..self.layers.len()).rev() {
            let input = &acts[k];
            let g = &mut grads[k];
            for (i, &xi) in input.iter().enumerate() {
                if xi != 0.0 {
                    let row = &mut g.weights[i * delta.len()..(i + 1) * delta.len()];
                    for (gw, d) in row.iter_mut().zip(&delta) {
                        *gw += xi * d;
                    }
                }
            }
            for (gb, d) in g.bias.iter_mut().zip(&delta) {
                *gb += d;
            }
            if k > 0 {
                let w = &self.layers[k].weights;
                delta = (0..w.rows())
                    .map(|i| {
                        let back: f64 = w.row(i).iter().zip(&delta).map(|(a, b)| a * b).sum();
                        back * (1.0 - input[i] * input[i])
                    })
                    .collect();
            }
        }
        loss
    }
}

#[derive(Debug, Clone)]
struct DenseGrad {
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl DenseGrad {
    fn zeros_like(layer: &DenseLayer) -> Self {
        Self {
            weights: vec![0.0; layer.weights.rows() * layer.weights.cols()],
            bias: vec![0.0; layer.bias.len()],
        }
    }
}

fn init_model(input_dims: usize, class_count: usize, hidden: usize, rng: &mut SeededRng) -> Result<SmallModel> {
    let dense = |inputs: usize, outputs: usize, rng: &mut SeededRng, random: bool| {
        let scale = 1.0 / (inputs as f64).sqrt();
        let data = (0..inputs * outputs)
            .map(|_| {
                if random {
                    scale * sample_standard_normal(rng)
                } else {
                    0.0
                }
            })
            .collect();
        DenseLayer {
            weights: RealMatrix::from_parts_unchecked(inputs, outputs, data),
            bias: vec![0.0; outputs],
        }
    };
    let layers = if hidden == 0 {
        vec![dense(input_dims, class_count, rng, false)]
    } else {
        vec![
            dense(input_dims, hidden, rng, true),
            dense(hidden, class_count, rng, true),
        ]
    };
    SmallModel::new(layers)
}

/// Mini-batch gradient descent on mean cross-entropy plus `(l2/2)·Σ‖W‖²`.
///
/// Every epoch each training image is replaced by a fresh `augmix` draw from
/// a stream keyed by `(seed, epoch, image index)`, so the result is fixed by
/// `seed` regardless of thread count. Severity 0 trains on the clean images.
pub fn train_small_model(
    data: &LabeledImages,
    train: &SmallTrainConfig,
    aug: &AugmixConfig,
    seed: u64,
) -> Result<SmallModel> {
    train.validate()?;
    aug.validate()?;
    let first = data
        .images
        .first()
        .ok_or_else(|| Error::param("training set is empty"))?;
    if data.labels.len() != data.len() {
        return Err(Error::dim(format!(
            "{} images but {} labels",
            data.len(),
            data.labels.len()
        )));
    }
    if let Some(img) = data.images.iter().find(|img| !img.same_shape(first)) {
        return Err(Error::dim(format!(
            "images differ in shape: {}x{}x{} vs {}x{}x{}",
            first.height(),
            first.width(),
            first.channels(),
            img.height(),
            img.width(),
            img.channels()
        )));
    }
    if let Some(&y) = data.labels.iter().find(|&&y| y >= data.class_count) {
        return Err(Error::param(format!("label {y} outside [0, {})", data.class_count)));
    }

    let mut init_rng = SeededRng::derived(seed, &[TRAIN_INIT_STREAM]);
    let mut model = init_model(first.len(), data.class_count, train.hidden_width, &mut init_rng)?;
    let mut order_rng = SeededRng::derived(seed, &[TRAIN_ORDER_STREAM]);
    let augment = aug.severity > 0.0;
    let n = data.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut epoch_loss = f64::NAN;

    for epoch in 0..train.epochs {
        let views: Vec<Image> = if augment {
            data.images
                .par_iter()
                .enumerate()
                .map(|(i, img)| {
                    let mut rng = SeededRng::derived(seed, &[TRAIN_AUG_STREAM, epoch as u64, i as u64]);
                    augmix(img, aug, &mut rng)
                })
                .collect::<Result<_>>()?
        } else {
            Vec::new()
        };
        order_rng.shuffle(&mut order);
        let mut total = 0.0;
        for batch in order.chunks(train.batch_size) {
            let mut grads: Vec<DenseGrad> = model.layers.iter().map(DenseGrad::zeros_like).collect();
            for &i in batch {
                let x = if augment {
                    views[i].pixels()
                } else {
                    data.images[i].pixels()
                };
                total += model.backprop(x, data.labels[i], &mut grads);
            }
            let inv = 1.0 / batch.len() as f64;
            for (layer, g) in model.layers.iter_mut().zip(&grads) {
                for (wi, gi) in layer.weights.as_mut_slice().iter_mut().zip(&g.weights) {
                    *wi -= train.learning_rate * (gi * inv + train.l2_penalty * *wi);
                }
                for (bi, gi) in layer.bias.iter_mut().zip(&g.bias) {
                    *bi -= train.learning_rate * gi * inv;
                }
            }
        }
        epoch_loss = total / n as f64;
        if !epoch_loss.is_finite() {
            return Err(Error::Divergence {
                iteration: epoch,
                loss: epoch_loss,
            });
        }
    }

    let train_accuracy = model.accuracy(data)?;
    model.training = Some(TrainingInfo {
        seed,
        train: *train,
        augmix: *aug,
        final_loss: epoch_loss,
        train_accuracy,
    });
    Ok(model)
}

/// Convenience for the common `Mix` training setup.
pub fn augmix_training(severity: f64) -> AugmixConfig {
    AugmixConfig::with_severity(severity, MixMode::Mix)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::gen_shape_dataset;

    fn tiny_two_class() -> LabeledImages {
        // 4×4 images: bright left half vs bright right half
        let mut images = Vec::new();
        let mut labels = Vec::new();
        for k in 0..40 {
            let label = k % 2;
            let shade = 0.7 + 0.005 * k as f64;
            images.push(Image::from_fn(4, 4, 1, |_, x, _| {
                if (x < 2) == (label == 0) {
                    shade
                } else {
                    0.1
                }
            }));
            labels.push(label);
        }
        LabeledImages {
            images,
            labels,
            class_count: 2,
        }
    }

    #[test]
    fn separable_tiny_set_is_learned_without_augmentation() {
        let data = tiny_two_class();
        let cfg = SmallTrainConfig {
            hidden_width: 0,
            epochs: 50,
            batch_size: 8,
            ..Default::default()
        };
        let model = train_small_model(&data, &cfg, &augmix_training(0.0), 1).unwrap();
        assert!(model.accuracy(&data).unwrap() >= 0.99);
    }

    #[test]
    fn fixed_seed_gives_identical_weights() {
        let data = gen_shape_dataset(10, 8, 0.1, &mut SeededRng::new(2)).unwrap();
        let cfg = SmallTrainConfig {
            epochs: 3,
            hidden_width: 8,
            ..Default::default()
        };
        let a = train_small_model(&data, &cfg, &augmix_training(3.0), 9).unwrap();
        let b = train_small_model(&data, &cfg, &augmix_training(3.0), 9).unwrap();
        assert_eq!(a, b);
        let c = train_small_model(&data, &cfg, &augmix_training(3.0), 10).unwrap();
        assert_ne!(a.layers, c.layers);
    }

    #[test]
    fn noise_free_shapes_reach_high_accuracy() {
        let mut rng = SeededRng::new(3);
        let train = gen_shape_dataset(50, 16, 0.0, &mut rng).unwrap();
        let test = gen_shape_dataset(50, 16, 0.0, &mut rng).unwrap();
        let cfg = SmallTrainConfig {
            hidden_width: 0,
            epochs: 40,
            ..Default::default()
        };
        let model = train_small_model(&train, &cfg, &augmix_training(0.0), 4).unwrap();
        assert!(model.accuracy(&test).unwrap() >= 0.99);
    }

    #[test]
    fn constant_model_predicts_one_class() {
        let m = SmallModel::constant(4, 3, 2).unwrap();
        assert_eq!(m.predict_one(&[0.1, 0.2, 0.3, 0.4]), 2);
        assert!(SmallModel::constant(4, 3, 3).is_err());
    }

    #[test]
    fn mismatched_layers_are_rejected() {
        let a = DenseLayer {
            weights: RealMatrix::zeros(4, 3),
            bias: vec![0.0; 3],
        };
        let b = DenseLayer {
            weights: RealMatrix::zeros(2, 2),
            bias: vec![0.0; 2],
        };
        assert!(SmallModel::new(vec![a, b]).is_err());
    }

    #[test]
    fn huge_step_reports_divergence() {
        let data = tiny_two_class();
        let cfg = SmallTrainConfig {
            learning_rate: 1e300,
            hidden_width: 0,
            ..Default::default()
        };
        let err = train_small_model(&data, &cfg, &augmix_training(0.0), 1).unwrap_err();
        assert!(matches!(err, Error::Divergence { .. }), "{err:?}");
    }
}
