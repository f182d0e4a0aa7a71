use serde::{Deserialize, Serialize};

use crate::augment::Image;
use crate::error::{Error, Result};
use crate::numerics::{sample_standard_normal, SeededRng};

const BACKGROUND: f64 = 0.25;
const FOREGROUND: f64 = 0.85;
const MAX_JITTER: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapeKind {
    Square,
    Circle,
    Triangle,
    Cross,
}

impl ShapeKind {
    pub const ALL: [ShapeKind; 4] = [
        ShapeKind::Square,
        ShapeKind::Circle,
        ShapeKind::Triangle,
        ShapeKind::Cross,
    ];

    /// Whether offset `(dy, dx)` from the shape center, in units of the
    /// shape radius, is inside the shape.
    fn covers(self, dy: f64, dx: f64) -> bool {
        match self {
            // hollow frame, to keep it distinct from the disc
            ShapeKind::Square => {
                let m = dy.abs().max(dx.abs());
                (0.6..=1.0).contains(&m)
            }
            ShapeKind::Circle => dy * dy + dx * dx <= 0.8,
            // apex up, base at dy = 1
            ShapeKind::Triangle => (-1.0..=1.0).contains(&dy) && dx.abs() <= (dy + 1.0) / 2.0,
            ShapeKind::Cross => (dy.abs() <= 0.3 && dx.abs() <= 1.0) || (dx.abs() <= 0.3 && dy.abs() <= 1.0),
        }
    }
}

/// Grayscale images with class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledImages {
    pub images: Vec<Image>,
    pub labels: Vec<usize>,
    pub class_count: usize,
}

impl LabeledImages {
    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    /// Flattened pixels, one image per row.
    pub fn pixel_rows(&self) -> Vec<Vec<f64>> {
        self.images.iter().map(|img| img.pixels().to_vec()).collect()
    }
}

/// `n_per_class` images per shape, `size × size`, with the shape center
/// jittered by up to one pixel and `N(0, noise²)` pixel noise. Images are
/// ordered by class.
pub fn gen_shape_dataset(n_per_class: usize, size: usize, noise: f64, rng: &mut SeededRng) -> Result<LabeledImages> {
    if size < 8 {
        return Err(Error::param(format!("shape images need size ≥ 8, got {size}")));
    }
    if !(noise.is_finite() && noise >= 0.0) {
        return Err(Error::param(format!(
            "noise must be a non-negative number, got {noise}"
        )));
    }
    let radius = 0.35 * size as f64;
    let center = (size as f64 - 1.0) / 2.0;
    let mut images = Vec::with_capacity(4 * n_per_class);
    let mut labels = Vec::with_capacity(4 * n_per_class);
    for (label, kind) in ShapeKind::ALL.iter().enumerate() {
        for _ in 0..n_per_class {
            let jy = rng.range_inclusive(0, 2 * MAX_JITTER) as f64 - MAX_JITTER as f64;
            let jx = rng.range_inclusive(0, 2 * MAX_JITTER) as f64 - MAX_JITTER as f64;
            let mut data = Vec::with_capacity(size * size);
            for y in 0..size {
                for x in 0..size {
                    let dy = (y as f64 - center - jy) / radius;
                    let dx = (x as f64 - center - jx) / radius;
                    let base = if kind.covers(dy, dx) { FOREGROUND } else { BACKGROUND };
                    let v = if noise > 0.0 {
                        base + noise * sample_standard_normal(rng)
                    } else {
                        base
                    };
                    data.push(v.clamp(0.0, 1.0));
                }
            }
            images.push(Image::new(size, size, 1, data)?);
            labels.push(label);
        }
    }
    Ok(LabeledImages {
        images,
        labels,
        class_count: ShapeKind::ALL.len(),
    })
}
