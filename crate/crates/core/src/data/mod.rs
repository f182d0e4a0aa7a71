//! Representation dumps: loading, validation, pooling and splitting.

mod dataset;
pub mod dump;
mod manifest;
mod pool;

pub use dataset::{Domain, LayerTag, ReprDataset};
pub use dump::{load_dump, load_labels, store_csv, store_dump, store_labels, Dtype};
pub use manifest::{DatasetManifest, DumpEntry, LayerEntry};
pub use pool::{balanced_pool, split_train_test, subsample};
