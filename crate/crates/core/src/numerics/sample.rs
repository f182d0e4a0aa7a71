//! Continuous samplers built on [`SeededRng`].
//!
//! Gamma uses Marsaglia & Tsang's squeeze/rejection method, with the
//! `U^(1/a)` boost for shapes below one, so it is exact for every positive
//! shape. Beta and Dirichlet are normalized Gamma draws.

use super::rng::SeededRng;
use crate::error::{Error, Result};

/// Standard normal draw (Box-Muller, cosine branch only).
pub fn sample_standard_normal(rng: &mut SeededRng) -> f64 {
    let u1 = rng.next_f64_open0();
    let u2 = rng.next_f64();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Gamma(shape, 1) draw.
pub fn sample_gamma(shape: f64, rng: &mut SeededRng) -> Result<f64> {
    if !(shape.is_finite() && shape > 0.0) {
        return Err(Error::param(format!("gamma shape must be positive, got {shape}")));
    }
    Ok(gamma_unchecked(shape, rng))
}

fn gamma_unchecked(shape: f64, rng: &mut SeededRng) -> f64 {
    if shape < 1.0 {
        let g = gamma_unchecked(shape + 1.0, rng);
        let u = rng.next_f64_open0();
        return g * u.powf(1.0 / shape);
    }
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let (x, v) = loop {
            let x = sample_standard_normal(rng);
            let v = 1.0 + c * x;
            if v > 0.0 {
                break (x, v * v * v);
            }
        };
        let u = rng.next_f64_open0();
        let x2 = x * x;
        if u < 1.0 - 0.0331 * x2 * x2 {
            return d * v;
        }
        if u.ln() < 0.5 * x2 + d * (1.0 - v + v.ln()) {
            return d * v;
        }
    }
}

/// Beta(alpha, beta) draw in [0, 1].
pub fn sample_beta(alpha: f64, beta: f64, rng: &mut SeededRng) -> Result<f64> {
    if !(alpha > 0.0 && beta > 0.0) || !alpha.is_finite() || !beta.is_finite() {
        return Err(Error::param(format!(
            "beta parameters must be positive, got ({alpha}, {beta})"
        )));
    }
    let x = gamma_unchecked(alpha, rng);
    let y = gamma_unchecked(beta, rng);
    let total = x + y;
    if total == 0.0 {
        // both draws underflowed (tiny shapes); fall back to a fair endpoint
        return Ok(if rng.sign() > 0.0 { 1.0 } else { 0.0 });
    }
    Ok((x / total).clamp(0.0, 1.0))
}

/// Dirichlet(alphas) draw on the probability simplex.
pub fn sample_dirichlet(alphas: &[f64], rng: &mut SeededRng) -> Result<Vec<f64>> {
    if alphas.is_empty() {
        return Err(Error::param("dirichlet needs at least one concentration"));
    }
    if let Some(a) = alphas.iter().find(|a| !(a.is_finite() && **a > 0.0)) {
        return Err(Error::param(format!(
            "dirichlet concentrations must be positive, got {a}"
        )));
    }
    let mut draws: Vec<f64> = alphas.iter().map(|&a| gamma_unchecked(a, rng)).collect();
    let total: f64 = draws.iter().sum();
    if total == 0.0 {
        // every component underflowed; put all mass on one uniformly chosen vertex
        let k = rng.below(draws.len());
        draws
            .iter_mut()
            .enumerate()
            .for_each(|(i, v)| *v = if i == k { 1.0 } else { 0.0 });
        return Ok(draws);
    }
    for v in &mut draws {
        *v /= total;
    }
    Ok(draws)
}
