use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::image::Image;
use super::ops::{check_severity, AugOp};
use crate::error::{Error, Result};
use crate::numerics::{sample_beta, sample_dirichlet, SeededRng};

/// Whether the augmented mixture is blended back with the original image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MixMode {
    /// `m ~ Beta(α, α)`, output `m·x + (1 − m)·x_mix`.
    Mix,
    /// `m = 0`: the output is the chain mixture alone.
    WoMix,
}

impl MixMode {
    pub fn name(self) -> &'static str {
        match self {
            MixMode::Mix => "Mix",
            MixMode::WoMix => "WoMix",
        }
    }
}

impl fmt::Display for MixMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MixMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mix" => Ok(MixMode::Mix),
            "womix" | "wo_mix" | "wo-mix" => Ok(MixMode::WoMix),
            _ => Err(Error::param(format!("unknown mix mode {s:?} (expected Mix or WoMix)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DepthRange {
    pub min: usize,
    pub max: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AugmixConfig {
    pub severity: f64,
    pub chain_count: usize,
    pub chain_depth: DepthRange,
    pub dirichlet_alpha: f64,
    pub beta_alpha: f64,
    pub mix_mode: MixMode,
    /// Pins the blend weight `m` instead of drawing it. Only meaningful under `Mix`.
    pub fixed_m: Option<f64>,
}

impl Default for AugmixConfig {
    fn default() -> Self {
        Self {
            severity: 3.0,
            chain_count: 3,
            chain_depth: DepthRange { min: 1, max: 3 },
            dirichlet_alpha: 1.0,
            beta_alpha: 1.0,
            mix_mode: MixMode::Mix,
            fixed_m: None,
        }
    }
}

impl AugmixConfig {
    pub fn with_severity(severity: f64, mix_mode: MixMode) -> Self {
        Self {
            severity,
            mix_mode,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_severity(self.severity)?;
        if self.chain_count == 0 {
            return Err(Error::param("chain_count must be at least 1"));
        }
        let DepthRange { min, max } = self.chain_depth;
        if min == 0 || min > max {
            return Err(Error::param(format!("chain depth range [{min}, {max}] is invalid")));
        }
        for (name, v) in [
            ("dirichlet_alpha", self.dirichlet_alpha),
            ("beta_alpha", self.beta_alpha),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::param(format!("{name} must be positive, got {v}")));
            }
        }
        if let Some(m) = self.fixed_m {
            if !(0.0..=1.0).contains(&m) {
                return Err(Error::param(format!("fixed_m must lie in [0, 1], got {m}")));
            }
        }
        Ok(())
    }
}

/// Draws `depth` ops uniformly from the pool, then one direction per op, and
/// applies them in sequence.
pub fn augment_chain(img: &Image, depth: usize, severity: f64, rng: &mut SeededRng) -> Result<Image> {
    check_severity(severity)?;
    let kinds = draw_kinds(depth, rng);
    apply_chain(img, &kinds, severity, rng)
}

fn draw_kinds(depth: usize, rng: &mut SeededRng) -> Vec<AugOp> {
    (0..depth).map(|_| AugOp::ALL[rng.below(AugOp::ALL.len())]).collect()
}

fn apply_chain(img: &Image, kinds: &[AugOp], severity: f64, rng: &mut SeededRng) -> Result<Image> {
    let mut cur = img.clone();
    for op in kinds {
        let sign = rng.sign();
        cur = op.apply_signed(&cur, severity, sign)?;
    }
    Ok(cur)
}

/// One AugMix draw.
///
/// Random numbers are consumed in a fixed order: all chain depths, all op
/// kinds, all op directions, the Dirichlet weights, then the Beta blend
/// weight (skipped under `WoMix` or a fixed `m`).
pub fn augmix(img: &Image, config: &AugmixConfig, rng: &mut SeededRng) -> Result<Image> {
    config.validate()?;
    let k = config.chain_count;
    let depths: Vec<usize> = (0..k)
        .map(|_| rng.range_inclusive(config.chain_depth.min, config.chain_depth.max))
        .collect();
    let kinds: Vec<Vec<AugOp>> = depths.iter().map(|&d| draw_kinds(d, rng)).collect();
    let chains = kinds
        .iter()
        .map(|ops| apply_chain(img, ops, config.severity, rng))
        .collect::<Result<Vec<_>>>()?;
    let weights = sample_dirichlet(&vec![config.dirichlet_alpha; k], rng)?;

    // Written relative to the first chain so that identical chains mix back
    // to exactly that chain regardless of rounding in the weights.
    let base = chains[0].pixels();
    let mut mixed = base.to_vec();
    for (chain, &v) in chains.iter().zip(&weights).skip(1) {
        for ((out, &c), &b) in mixed.iter_mut().zip(chain.pixels()).zip(base) {
            *out += v * (c - b);
        }
    }

    let m = match (config.mix_mode, config.fixed_m) {
        (MixMode::WoMix, _) => 0.0,
        (MixMode::Mix, Some(m)) => m,
        (MixMode::Mix, None) => sample_beta(config.beta_alpha, config.beta_alpha, rng)?,
    };
    if m == 1.0 {
        return Ok(img.clone());
    }
    let out = mixed
        .iter()
        .zip(img.pixels())
        .map(|(&xm, &x)| xm + m * (x - xm))
        .collect();
    Ok(Image::from_clamped(img.height(), img.width(), img.channels(), out))
}
