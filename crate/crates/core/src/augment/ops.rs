//! Primitive distortions and the severity → parameter mapping.
//!
//! Severity runs from 0 to 10. Severity 0 is the identity for every op.
//!
//! | op            | parameter at severity s                    |
//! |---------------|--------------------------------------------|
//! | rotate        | ±30° · s/10                                |
//! | shear_x/y     | ±0.3 · s/10                                |
//! | translate_x/y | ±(side/3) · s/10 pixels                    |
//! | posterize     | keep 8 − round(4·s/10) bits                |
//! | solarize      | invert pixels above 1 − 0.5 · s/10         |
//! | autocontrast  | per-channel min/max stretch (s > 0)        |
//! | equalize      | per-channel 256-bin equalization (s > 0)   |
//!
//! Geometric ops resample with bilinear interpolation about the image
//! center; taps falling outside the image read mid-gray (0.5).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::image::Image;
use crate::error::{Error, Result};
use crate::numerics::SeededRng;

pub const MAX_SEVERITY: f64 = 10.0;
pub const MAX_ROTATE_DEGREES: f64 = 30.0;
pub const MAX_SHEAR: f64 = 0.3;
pub const MAX_TRANSLATE_FRACTION: f64 = 1.0 / 3.0;
pub const OUT_OF_BOUNDS_FILL: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AugOp {
    Rotate,
    ShearX,
    ShearY,
    TranslateX,
    TranslateY,
    Posterize,
    Solarize,
    Autocontrast,
    Equalize,
}

impl AugOp {
    /// The op pool, in the order used for uniform draws.
    pub const ALL: [AugOp; 9] = [
        AugOp::Rotate,
        AugOp::ShearX,
        AugOp::ShearY,
        AugOp::TranslateX,
        AugOp::TranslateY,
        AugOp::Posterize,
        AugOp::Solarize,
        AugOp::Autocontrast,
        AugOp::Equalize,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AugOp::Rotate => "rotate",
            AugOp::ShearX => "shear_x",
            AugOp::ShearY => "shear_y",
            AugOp::TranslateX => "translate_x",
            AugOp::TranslateY => "translate_y",
            AugOp::Posterize => "posterize",
            AugOp::Solarize => "solarize",
            AugOp::Autocontrast => "autocontrast",
            AugOp::Equalize => "equalize",
        }
    }

    pub fn is_geometric(self) -> bool {
        matches!(
            self,
            AugOp::Rotate | AugOp::ShearX | AugOp::ShearY | AugOp::TranslateX | AugOp::TranslateY
        )
    }

    /// Applies the op with an explicit direction (`sign` is ±1; non-geometric
    /// ops ignore it).
    pub fn apply_signed(self, img: &Image, severity: f64, sign: f64) -> Result<Image> {
        check_severity(severity)?;
        if severity == 0.0 {
            return Ok(img.clone());
        }
        let sign = if sign < 0.0 { -1.0 } else { 1.0 };
        let (h, w) = (img.height() as f64, img.width() as f64);
        let cy = (h - 1.0) / 2.0;
        let cx = (w - 1.0) / 2.0;
        Ok(match self {
            AugOp::Rotate => {
                let theta = (sign * rotate_degrees(severity)).to_radians();
                let (sin, cos) = theta.sin_cos();
                warp(img, |y, x| {
                    let dy = y - cy;
                    let dx = x - cx;
                    (cy - sin * dx + cos * dy, cx + cos * dx + sin * dy)
                })
            }
            AugOp::ShearX => {
                let k = sign * shear_factor(severity);
                warp(img, |y, x| (y, x + k * (y - cy)))
            }
            AugOp::ShearY => {
                let k = sign * shear_factor(severity);
                warp(img, |y, x| (y + k * (x - cx), x))
            }
            AugOp::TranslateX => {
                let t = sign * translate_fraction(severity) * w;
                warp(img, |y, x| (y, x - t))
            }
            AugOp::TranslateY => {
                let t = sign * translate_fraction(severity) * h;
                warp(img, |y, x| (y - t, x))
            }
            AugOp::Posterize => posterize(img, posterize_bits(severity)),
            AugOp::Solarize => {
                let t = solarize_threshold(severity);
                map_pixels(img, |v| if v > t { 1.0 - v } else { v })
            }
            AugOp::Autocontrast => autocontrast(img),
            AugOp::Equalize => equalize(img),
        })
    }
}

impl fmt::Display for AugOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AugOp {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AugOp::ALL
            .iter()
            .copied()
            .find(|op| op.name() == s)
            .ok_or_else(|| Error::param(format!("unknown augmentation op {s:?}")))
    }
}

pub fn rotate_degrees(severity: f64) -> f64 {
    MAX_ROTATE_DEGREES * severity / MAX_SEVERITY
}

pub fn shear_factor(severity: f64) -> f64 {
    MAX_SHEAR * severity / MAX_SEVERITY
}

pub fn translate_fraction(severity: f64) -> f64 {
    MAX_TRANSLATE_FRACTION * severity / MAX_SEVERITY
}

pub fn posterize_bits(severity: f64) -> u32 {
    (8.0 - (4.0 * severity / MAX_SEVERITY).round()) as u32
}

pub fn solarize_threshold(severity: f64) -> f64 {
    1.0 - 0.5 * severity / MAX_SEVERITY
}

pub(crate) fn check_severity(severity: f64) -> Result<()> {
    if !(0.0..=MAX_SEVERITY).contains(&severity) {
        return Err(Error::param(format!("severity must lie in [0, 10], got {severity}")));
    }
    Ok(())
}

/// Draws the op's direction from `rng` (always exactly one draw), then applies it.
pub fn apply_op(img: &Image, op: AugOp, severity: f64, rng: &mut SeededRng) -> Result<Image> {
    check_severity(severity)?;
    let sign = rng.sign();
    op.apply_signed(img, severity, sign)
}

/// Inverse-maps every output pixel `(y, x)` to a source location and samples it bilinearly.
fn warp(img: &Image, source: impl Fn(f64, f64) -> (f64, f64)) -> Image {
    let (h, w, ch) = (img.height(), img.width(), img.channels());
    let mut out = Vec::with_capacity(img.len());
    let tap = |yy: i64, xx: i64, c: usize| -> f64 {
        if yy < 0 || xx < 0 || yy >= h as i64 || xx >= w as i64 {
            OUT_OF_BOUNDS_FILL
        } else {
            img.get(yy as usize, xx as usize, c)
        }
    };
    for y in 0..h {
        for x in 0..w {
            let (sy, sx) = source(y as f64, x as f64);
            let y0 = sy.floor();
            let x0 = sx.floor();
            let fy = sy - y0;
            let fx = sx - x0;
            let (y0, x0) = (y0 as i64, x0 as i64);
            for c in 0..ch {
                let top = (1.0 - fx) * tap(y0, x0, c) + fx * tap(y0, x0 + 1, c);
                let bottom = (1.0 - fx) * tap(y0 + 1, x0, c) + fx * tap(y0 + 1, x0 + 1, c);
                out.push((1.0 - fy) * top + fy * bottom);
            }
        }
    }
    Image::from_clamped(h, w, ch, out)
}

fn map_pixels(img: &Image, f: impl Fn(f64) -> f64) -> Image {
    Image::from_clamped(
        img.height(),
        img.width(),
        img.channels(),
        img.pixels().iter().map(|&v| f(v)).collect(),
    )
}

fn quantize(v: f64) -> usize {
    (v * 255.0).round().clamp(0.0, 255.0) as usize
}

fn posterize(img: &Image, bits: u32) -> Image {
    if bits >= 8 {
        return img.clone();
    }
    let mask = (0xFFu32 << (8 - bits)) & 0xFF;
    map_pixels(img, |v| (quantize(v) as u32 & mask) as f64 / 255.0)
}

fn autocontrast(img: &Image) -> Image {
    let ch = img.channels();
    let mut lo = vec![f64::INFINITY; ch];
    let mut hi = vec![f64::NEG_INFINITY; ch];
    for (i, &v) in img.pixels().iter().enumerate() {
        let c = i % ch;
        lo[c] = lo[c].min(v);
        hi[c] = hi[c].max(v);
    }
    let out = img
        .pixels()
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let c = i % ch;
            if hi[c] > lo[c] {
                (v - lo[c]) / (hi[c] - lo[c])
            } else {
                v
            }
        })
        .collect();
    Image::from_clamped(img.height(), img.width(), ch, out)
}

fn equalize(img: &Image) -> Image {
    let ch = img.channels();
    let mut out = img.pixels().to_vec();
    for c in 0..ch {
        let mut hist = [0usize; 256];
        for v in img.pixels().iter().skip(c).step_by(ch) {
            hist[quantize(*v)] += 1;
        }
        let total: usize = hist.iter().sum();
        let mut cdf = [0usize; 256];
        let mut run = 0;
        for (k, count) in hist.iter().enumerate() {
            run += count;
            cdf[k] = run;
        }
        let cdf_min = cdf.iter().copied().find(|&v| v > 0).unwrap_or(0);
        if total == cdf_min {
            continue; // single intensity level
        }
        let denom = (total - cdf_min) as f64;
        for v in out.iter_mut().skip(c).step_by(ch) {
            *v = (cdf[quantize(*v)] - cdf_min) as f64 / denom;
        }
    }
    Image::from_clamped(img.height(), img.width(), ch, out)
}
