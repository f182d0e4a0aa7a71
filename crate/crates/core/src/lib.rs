//! Diagnostics for how much a model trained with data augmentation overfits
//! to its augmentations.
//!
//! Three probes work over representation dumps (feature rows tagged with a
//! class label and a clean/augmented domain id):
//!
//! * [`divergence`] trains a linear clean-vs-augmented discriminator and turns
//!   its held-out error into a proxy domain divergence in `[0, 2]`.
//! * [`csd`] fits one softmax classifier per domain and splits the pair into
//!   a shared component and a single domain-varying direction, reporting the
//!   specific/common norm ratio.
//! * [`evalgrid`] trains a small model under AugMix-style augmentation and
//!   measures accuracy over a severity × mixing grid.
//!
//! [`augment`] is the augmentation engine, [`synth`] holds generators with
//! known ground truth, and [`data`] reads and writes dumps and manifests.

pub mod augment;
pub mod csd;
pub mod data;
pub mod divergence;
mod error;
pub mod evalgrid;
pub mod numerics;
pub mod synth;

pub use error::{Error, ErrorCategory, Result};

/// Toolkit version embedded in every report.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
