//! Dense numerics and deterministic sampling shared by every probe.

pub mod lbfgs;
mod matrix;
mod rng;
mod sample;

pub use matrix::{dot, frobenius_inner, frobenius_norm, RealMatrix};
pub use rng::{derive_seed, SeededRng};
pub use sample::{sample_beta, sample_dirichlet, sample_gamma, sample_standard_normal};

/// Numerically stable `ln(1 + e^z)`.
#[inline]
pub fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Logistic function `1 / (1 + e^-z)`.
#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Mean and population standard deviation.
///
/// Sums run over the values in sorted order, so the result does not depend
/// on the order of `values`.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    // identical replicates must report exactly zero spread
    if values.iter().all(|v| v.to_bits() == values[0].to_bits()) {
        return (values[0], 0.0);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mean = sorted.iter().sum::<f64>() / n;
    let var = sorted.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}
