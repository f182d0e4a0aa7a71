//! AugMix-style augmentation engine.
//!
//! `augmix` draws `k` chains of 1 to 3 primitive ops, mixes the chain outputs
//! with Dirichlet weights and, under [`MixMode::Mix`], blends the mixture with
//! the original image using a Beta-distributed weight. All randomness comes
//! from the caller's [`SeededRng`](crate::numerics::SeededRng), so a seed
//! fully determines the output.

mod augmix;
mod image;
pub mod ops;

pub use augmix::{augment_chain, augmix, AugmixConfig, DepthRange, MixMode};
pub use image::Image;
pub use ops::{apply_op, AugOp};
