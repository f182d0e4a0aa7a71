//! Limited-memory BFGS with a backtracking Armijo line search.
//!
//! Deterministic: no randomness, fixed history length, fixed search constants.

use std::collections::VecDeque;

use super::matrix::dot;
use crate::error::{Error, Result};

const HISTORY: usize = 10;
const ARMIJO_C1: f64 = 1e-4;
const BACKTRACK: f64 = 0.5;
const MAX_BACKTRACKS: usize = 60;

/// Smooth objective: returns the value at `x` and writes the gradient.
pub trait Objective {
    fn dim(&self) -> usize;
    fn eval(&self, x: &[f64], grad: &mut [f64]) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LbfgsOptions {
    pub max_iterations: usize,
    /// Stop once the gradient's max-abs entry falls to this value.
    pub gradient_tol: f64,
    /// Trial step along the steepest-descent direction on the first iteration.
    pub initial_step: f64,
}

#[derive(Debug, Clone)]
pub struct LbfgsOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub gradient_inf_norm: f64,
    pub converged: bool,
}

pub fn minimize<O: Objective>(obj: &O, x0: Vec<f64>, opts: &LbfgsOptions) -> Result<LbfgsOutcome> {
    let n = obj.dim();
    debug_assert_eq!(x0.len(), n);
    let mut x = x0;
    let mut g = vec![0.0; n];
    let mut f = obj.eval(&x, &mut g);
    if !f.is_finite() {
        return Err(Error::Divergence { iteration: 0, loss: f });
    }

    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(HISTORY);
    let mut dir = vec![0.0; n];
    let mut x_new = vec![0.0; n];
    let mut g_new = vec![0.0; n];
    let mut alpha_buf = [0.0; HISTORY];

    for iter in 0..opts.max_iterations {
        let gmax = inf_norm(&g);
        if gmax <= opts.gradient_tol {
            return Ok(LbfgsOutcome {
                x,
                value: f,
                iterations: iter,
                gradient_inf_norm: gmax,
                converged: true,
            });
        }

        // two-loop recursion: dir = -H g
        dir.copy_from_slice(&g);
        for (k, (s, y, rho)) in history.iter().enumerate().rev() {
            let a = rho * dot(s, &dir);
            alpha_buf[k] = a;
            axpy(-a, y, &mut dir);
        }
        if let Some((s, y, _)) = history.back() {
            let gamma = dot(s, y) / dot(y, y);
            dir.iter_mut().for_each(|d| *d *= gamma);
        }
        for (k, (s, y, rho)) in history.iter().enumerate() {
            let b = rho * dot(y, &dir);
            axpy(alpha_buf[k] - b, s, &mut dir);
        }
        dir.iter_mut().for_each(|d| *d = -*d);

        let mut slope = dot(&g, &dir);
        if slope.is_nan() || slope >= 0.0 {
            // lost descent; restart from steepest descent
            history.clear();
            dir.iter_mut().zip(&g).for_each(|(d, gi)| *d = -gi);
            slope = -dot(&g, &g);
        }

        let mut step = if history.is_empty() {
            (opts.initial_step / gmax.max(1e-300))
                .min(1.0)
                .max(opts.initial_step.min(1.0))
        } else {
            1.0
        };
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            x_new
                .iter_mut()
                .zip(x.iter().zip(&dir))
                .for_each(|(xn, (xi, d))| *xn = xi + step * d);
            let f_new = obj.eval(&x_new, &mut g_new);
            if f_new.is_finite() && f_new <= f + ARMIJO_C1 * step * slope {
                accepted = Some(f_new);
                break;
            }
            step *= BACKTRACK;
        }
        let Some(f_new) = accepted else {
            // no decrease representable at this precision: treat as converged
            return Ok(LbfgsOutcome {
                x,
                value: f,
                iterations: iter,
                gradient_inf_norm: gmax,
                converged: true,
            });
        };

        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() && sy > 0.0 {
            if history.len() == HISTORY {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }
        std::mem::swap(&mut x, &mut x_new);
        std::mem::swap(&mut g, &mut g_new);
        let prev = f;
        f = f_new;
        if !f.is_finite() {
            return Err(Error::Divergence {
                iteration: iter + 1,
                loss: f,
            });
        }
        if prev - f <= f64::EPSILON * f.abs().max(f64::MIN_POSITIVE) {
            let gmax = inf_norm(&g);
            return Ok(LbfgsOutcome {
                x,
                value: f,
                iterations: iter + 1,
                gradient_inf_norm: gmax,
                converged: true,
            });
        }
    }
    let gmax = inf_norm(&g);
    Ok(LbfgsOutcome {
        x,
        value: f,
        iterations: opts.max_iterations,
        gradient_inf_norm: gmax,
        converged: gmax <= opts.gradient_tol,
    })
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += a * xi);
}
