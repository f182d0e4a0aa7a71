use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::numerics::{frobenius_inner, RealMatrix};

pub const DEFAULT_TOL: f64 = 1e-9;

/// Non-negative ratio that may be infinite. Serialized as a number, or as the
/// string `"inf"` when infinite.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub enum Ratio {
    Finite(f64),
    Infinite,
}

impl Ratio {
    pub fn value(self) -> f64 {
        match self {
            Ratio::Finite(v) => v,
            Ratio::Infinite => f64::INFINITY,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Ratio::Infinite)
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ratio::Finite(v) => match f.precision() {
                Some(p) => write!(f, "{v:.p$}"),
                None => write!(f, "{v}"),
            },
            Ratio::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for Ratio {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Ratio::Finite(v) => s.serialize_f64(*v),
            Ratio::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Ratio {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) if v >= 0.0 && v.is_finite() => Ok(Ratio::Finite(v)),
            Raw::Num(v) => Err(serde::de::Error::custom(format!(
                "ratio must be a non-negative number, got {v}"
            ))),
            Raw::Str(s) if s == "inf" => Ok(Ratio::Infinite),
            Raw::Str(s) => Err(serde::de::Error::custom(format!(
                "expected a number or \"inf\", got {s:?}"
            ))),
        }
    }
}

/// `w_domain = w_c + γ_domain·w_s_unit` with `w_c ⊥ w_s_unit`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsdDecomposition {
    pub w_c: RealMatrix,
    /// Unit Frobenius norm, or all zeros when the two inputs coincide.
    pub w_s_unit: RealMatrix,
    pub gamma_clean: f64,
    pub gamma_aug: f64,
    pub ratio: Ratio,
}

impl CsdDecomposition {
    pub fn is_degenerate(&self) -> bool {
        self.w_s_unit.as_slice().iter().all(|&v| v == 0.0)
    }

    /// `w_c + γ·w_s_unit`.
    pub fn reconstruct(&self, gamma: f64) -> RealMatrix {
        self.w_c
            .add_scaled(gamma, &self.w_s_unit)
            .expect("components share a shape")
    }
}

/// Closed-form split of two weight matrices into a shared component and a
/// single specific direction.
///
/// With only two domains the specific part is rank one: it must lie along
/// `Δ = w_clean − w_aug`. Normalizing `ŝ = Δ/‖Δ‖` gives `γ_i = ⟨w_i, ŝ⟩`
/// and `w_c = w_clean − γ_clean·ŝ`, which is orthogonal to `ŝ` and equal to
/// `w_aug − γ_aug·ŝ`. Since `γ_clean − γ_aug = ‖Δ‖`, the sign convention
/// `γ_clean ≥ γ_aug` holds automatically.
///
/// When `‖Δ‖ < tol·max(‖w_clean‖, ‖w_aug‖)` the inputs are treated as
/// identical: `w_c` is their average and the specific part is zero.
pub fn decompose_weights(w_clean: &RealMatrix, w_aug: &RealMatrix, tol: f64) -> Result<CsdDecomposition> {
    if w_clean.shape() != w_aug.shape() {
        return Err(Error::dim(format!(
            "clean weights are {:?} but augmented weights are {:?}",
            w_clean.shape(),
            w_aug.shape()
        )));
    }
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::param(format!("tol must be positive, got {tol}")));
    }
    let scale = w_clean.frobenius_norm().max(w_aug.frobenius_norm());
    let delta = w_clean.sub(w_aug)?;
    let delta_norm = delta.frobenius_norm();

    if delta_norm < tol * scale || delta_norm == 0.0 {
        let w_c = w_clean.add(w_aug)?.scale(0.5);
        let (rows, cols) = w_clean.shape();
        return Ok(CsdDecomposition {
            w_c,
            w_s_unit: RealMatrix::zeros(rows, cols),
            gamma_clean: 0.0,
            gamma_aug: 0.0,
            ratio: Ratio::Finite(0.0),
        });
    }

    let s = delta.scale(1.0 / delta_norm);
    let gamma_clean = frobenius_inner(w_clean, &s)?;
    let gamma_aug = frobenius_inner(w_aug, &s)?;
    let w_c = w_clean.add_scaled(-gamma_clean, &s)?;
    let specific = gamma_clean.hypot(gamma_aug) * s.frobenius_norm();
    let common = std::f64::consts::SQRT_2 * w_c.frobenius_norm();
    let ratio = if w_c.frobenius_norm() <= tol * scale {
        Ratio::Infinite
    } else {
        Ratio::Finite(specific / common)
    };
    Ok(CsdDecomposition {
        w_c,
        w_s_unit: s,
        gamma_clean,
        gamma_aug,
        ratio,
    })
}

/// `‖[γ_clean·w_s, γ_aug·w_s]‖ / ‖[w_c, w_c]‖`.
pub fn specific_common_ratio(dec: &CsdDecomposition) -> Ratio {
    dec.ratio
}
