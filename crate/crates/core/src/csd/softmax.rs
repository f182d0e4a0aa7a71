//! Multinomial logistic regression fitted with L-BFGS.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Domain, ReprDataset};
use crate::divergence::TrainConfig;
use crate::error::{Error, Result};
use crate::numerics::lbfgs::{minimize, LbfgsOptions, Objective};
use crate::numerics::RealMatrix;

// Rows per parallel work item. Partial sums are combined in chunk order so
// the result does not depend on the thread count.
const CHUNK_ROWS: usize = 1024;

/// Softmax classifier for one domain: `p(y | x) = softmax(Wᵀx + b)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainClassifier {
    /// `d × C`.
    pub weights: RealMatrix,
    pub bias: Vec<f64>,
    pub domain: Domain,
}

impl DomainClassifier {
    pub fn new(weights: RealMatrix, bias: Vec<f64>, domain: Domain) -> Result<Self> {
        if weights.cols() < 2 {
            return Err(Error::dim(format!(
                "a classifier needs at least 2 classes, got {}",
                weights.cols()
            )));
        }
        if bias.len() != weights.cols() {
            return Err(Error::dim(format!(
                "{} bias entries for {} classes",
                bias.len(),
                weights.cols()
            )));
        }
        if bias.iter().any(|b| !b.is_finite()) {
            return Err(Error::NonFinite("classifier bias".into()));
        }
        Ok(Self { weights, bias, domain })
    }

    pub fn dims(&self) -> usize {
        self.weights.rows()
    }

    pub fn class_count(&self) -> usize {
        self.weights.cols()
    }

    pub fn logits(&self, row: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.bias);
        for (j, &x) in row.iter().enumerate() {
            if x != 0.0 {
                for (o, w) in out.iter_mut().zip(self.weights.row(j)) {
                    *o += x * w;
                }
            }
        }
    }

    pub fn predict(&self, x: &RealMatrix) -> Result<Vec<usize>> {
        if x.cols() != self.dims() {
            return Err(Error::dim(format!(
                "classifier has {} inputs, features have {}",
                self.dims(),
                x.cols()
            )));
        }
        let mut z = vec![0.0; self.class_count()];
        Ok(x.row_iter()
            .map(|row| {
                self.logits(row, &mut z);
                argmax(&z)
            })
            .collect())
    }

    pub fn accuracy(&self, data: &ReprDataset) -> Result<f64> {
        if data.is_empty() {
            return Err(Error::param("accuracy of an empty dataset"));
        }
        let pred = self.predict(data.features())?;
        let hits = pred.iter().zip(data.class_labels()).filter(|(p, y)| p == y).count();
        Ok(hits as f64 / data.len() as f64)
    }
}

fn argmax(z: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in z.iter().enumerate().skip(1) {
        if v > z[best] {
            best = k;
        }
    }
    best
}

#[derive(Debug, Clone)]
pub struct SoftmaxFit {
    pub classifier: DomainClassifier,
    pub loss: f64,
    pub iterations: usize,
    pub converged: bool,
}

struct SoftmaxObjective<'a> {
    x: &'a RealMatrix,
    y: &'a [usize],
    classes: usize,
    l2: f64,
}

impl SoftmaxObjective<'_> {
    fn chunk(&self, params: &[f64], start: usize, end: usize) -> (f64, Vec<f64>) {
        let (d, c) = (self.x.cols(), self.classes);
        let (w, b) = params.split_at(d * c);
        let mut grad = vec![0.0; d * c + c];
        let mut z = vec![0.0; c];
        let mut loss = 0.0;
        for i in start..end {
            let row = self.x.row(i);
            z.copy_from_slice(b);
            for (j, &xj) in row.iter().enumerate() {
                for (zk, wk) in z.iter_mut().zip(&w[j * c..(j + 1) * c]) {
                    *zk += xj * wk;
                }
            }
            let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let yi = self.y[i];
            let shifted_y = z[yi] - max;
            let mut total = 0.0;
            for zk in z.iter_mut() {
                *zk = (*zk - max).exp();
                total += *zk;
            }
            // −log p_y = log Σ exp(z − max) − (z_y − max)
            loss += total.ln() - shifted_y;
            for zk in z.iter_mut() {
                *zk /= total;
            }
            z[yi] -= 1.0;
            let (gw, gb) = grad.split_at_mut(d * c);
            for (j, &xj) in row.iter().enumerate() {
                for (g, zk) in gw[j * c..(j + 1) * c].iter_mut().zip(&z) {
                    *g += xj * zk;
                }
            }
            for (g, zk) in gb.iter_mut().zip(&z) {
                *g += zk;
            }
        }
        (loss, grad)
    }
}

impl Objective for SoftmaxObjective<'_> {
    fn dim(&self) -> usize {
        (self.x.cols() + 1) * self.classes
    }

    fn eval(&self, params: &[f64], grad: &mut [f64]) -> f64 {
        let n = self.x.rows();
        let parts: Vec<(f64, Vec<f64>)> = (0..n.div_ceil(CHUNK_ROWS))
            .into_par_iter()
            .map(|k| self.chunk(params, k * CHUNK_ROWS, ((k + 1) * CHUNK_ROWS).min(n)))
            .collect();
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut loss = 0.0;
        for (l, g) in parts {
            loss += l;
            for (a, b) in grad.iter_mut().zip(g) {
                *a += b;
            }
        }
        let nf = n as f64;
        grad.iter_mut().for_each(|g| *g /= nf);
        loss /= nf;
        let wlen = self.x.cols() * self.classes;
        let mut penalty = 0.0;
        for (g, w) in grad[..wlen].iter_mut().zip(&params[..wlen]) {
            *g += self.l2 * w;
            penalty += w * w;
        }
        loss + 0.5 * self.l2 * penalty
    }
}

/// Fits `softmax(Wᵀx + b)` by minimizing the mean cross-entropy plus
/// `(l2/2)·‖W‖²` (the bias is not penalized) from a zero start.
///
/// `config.step_size` is the first trial step, `config.iterations` caps the
/// L-BFGS iterations and `config.convergence_tol` bounds the gradient's
/// max-abs entry at convergence.
pub fn fit_softmax(
    features: &RealMatrix,
    class_labels: &[usize],
    class_count: usize,
    domain: Domain,
    config: &TrainConfig,
) -> Result<SoftmaxFit> {
    config.validate()?;
    let (n, d) = features.shape();
    if class_count < 2 {
        return Err(Error::param(format!(
            "softmax needs at least 2 classes, got {class_count}"
        )));
    }
    if n == 0 || class_labels.len() != n {
        return Err(Error::dim(format!(
            "{n} feature rows but {} labels",
            class_labels.len()
        )));
    }
    if let Some(&bad) = class_labels.iter().find(|&&y| y >= class_count) {
        return Err(Error::param(format!("label {bad} outside [0, {class_count})")));
    }
    let objective = SoftmaxObjective {
        x: features,
        y: class_labels,
        classes: class_count,
        l2: config.l2_penalty,
    };
    let opts = LbfgsOptions {
        max_iterations: config.iterations,
        gradient_tol: config.convergence_tol,
        initial_step: config.step_size,
    };
    let out = minimize(&objective, vec![0.0; (d + 1) * class_count], &opts)?;
    if !out.value.is_finite() || out.x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Divergence {
            iteration: out.iterations,
            loss: out.value,
        });
    }
    let mut x = out.x;
    let bias = x.split_off(d * class_count);
    let weights = RealMatrix::new(d, class_count, x)?;
    Ok(SoftmaxFit {
        classifier: DomainClassifier::new(weights, bias, domain)?,
        loss: out.value,
        iterations: out.iterations,
        converged: out.converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::LayerTag;
    use crate::numerics::{sample_standard_normal, SeededRng};

    fn fit(x: &RealMatrix, y: &[usize], c: usize) -> DomainClassifier {
        fit_softmax(x, y, c, Domain::Clean, &TrainConfig::default())
            .unwrap()
            .classifier
    }

    #[test]
    fn one_hot_rows_are_fit() {
        let x = RealMatrix::identity(3);
        let clf = fit(&x, &[0, 1, 2], 3);
        assert_eq!(clf.predict(&x).unwrap(), vec![0, 1, 2]);
    }

    #[test]
    fn identical_features_give_chance_accuracy() {
        let mut rng = SeededRng::new(11);
        let n = 2000;
        let x = RealMatrix::new(n, 3, vec![1.0; n * 3]).unwrap();
        let y: Vec<usize> = (0..n).map(|_| rng.below(4)).collect();
        let clf = fit(&x, &y, 4);
        let ds = ReprDataset::single_domain(x, y, 4, Domain::Clean, LayerTag::Penultimate).unwrap();
        let acc = clf.accuracy(&ds).unwrap();
        assert!((acc - 0.25).abs() <= 0.05, "{acc}");
    }

    #[test]
    fn gaussian_blobs_are_classified() {
        let mut rng = SeededRng::new(12);
        let draw = |n: usize, rng: &mut SeededRng| {
            let mut data = Vec::new();
            let mut y = Vec::new();
            for i in 0..n {
                let label = i % 2;
                let shift = if label == 0 { -2.0 } else { 2.0 };
                data.push(shift + sample_standard_normal(rng));
                data.push(sample_standard_normal(rng));
                y.push(label);
            }
            ReprDataset::single_domain(
                RealMatrix::new(n, 2, data).unwrap(),
                y,
                2,
                Domain::Clean,
                LayerTag::Penultimate,
            )
            .unwrap()
        };
        let train = draw(4000, &mut rng);
        let test = draw(4000, &mut rng);
        let clf = fit(train.features(), train.class_labels(), 2);
        assert!(clf.accuracy(&test).unwrap() >= 0.95);
    }

    #[test]
    fn weight_rows_sum_to_zero() {
        let mut rng = SeededRng::new(13);
        let n = 500;
        let x = RealMatrix::new(n, 4, (0..n * 4).map(|_| sample_standard_normal(&mut rng)).collect()).unwrap();
        let y: Vec<usize> = x
            .row_iter()
            .map(|r| {
                if r[0] + 0.3 * r[1] > 0.0 {
                    1
                } else if r[2] > 0.5 {
                    2
                } else {
                    0
                }
            })
            .collect();
        let clf = fit(&x, &y, 3);
        for row in clf.weights.row_iter() {
            assert!(row.iter().sum::<f64>().abs() < 1e-9);
        }
    }

    #[test]
    fn deterministic_across_runs() {
        let mut rng = SeededRng::new(14);
        let n = 3000;
        let x = RealMatrix::new(n, 5, (0..n * 5).map(|_| sample_standard_normal(&mut rng)).collect()).unwrap();
        let y: Vec<usize> = x.row_iter().map(|r| (r[0] > 0.0) as usize).collect();
        assert_eq!(fit(&x, &y, 2), fit(&x, &y, 2));
    }

    #[test]
    fn bad_inputs() {
        let x = RealMatrix::identity(2);
        let cfg = TrainConfig::default();
        assert!(fit_softmax(&x, &[0, 2], 2, Domain::Clean, &cfg).is_err());
        assert!(fit_softmax(&x, &[0], 2, Domain::Clean, &cfg).is_err());
        assert!(fit_softmax(&x, &[0, 0], 1, Domain::Clean, &cfg).is_err());
    }
}
