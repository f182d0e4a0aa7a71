//! JSON manifest describing a set of representation dumps.
//!
//! ```json
//! {
//!   "class_count": 10,
//!   "dtype": "f4",
//!   "provenance": "wrn-40-2 augmix checkpoint, cifar10 train split",
//!   "layers": [
//!     {
//!       "layer": "PL",
//!       "clean": { "features": "pl_clean.npy", "labels": "labels_clean.npy", "rows": 50000, "dims": 128 },
//!       "aug":   { "features": "pl_aug.npy",   "labels": "labels_aug.npy",   "rows": 50000, "dims": 128 }
//!     }
//!   ]
//! }
//! ```
//!
//! Relative paths resolve against the manifest's directory. `labels` may be
//! omitted for divergence-only runs; `dims` is optional and checked when set.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::dataset::{Domain, LayerTag, ReprDataset};
use super::dump::{load_dump, load_labels, Dtype};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DumpEntry {
    pub features: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<PathBuf>,
    pub rows: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dims: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerEntry {
    pub layer: LayerTag,
    pub clean: DumpEntry,
    pub aug: DumpEntry,
}

impl LayerEntry {
    pub fn entry(&self, domain: Domain) -> &DumpEntry {
        match domain {
            Domain::Clean => &self.clean,
            Domain::Aug => &self.aug,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub class_count: usize,
    #[serde(default)]
    pub dtype: Dtype,
    #[serde(default)]
    pub provenance: String,
    pub layers: Vec<LayerEntry>,
    #[serde(skip)]
    base_dir: PathBuf,
}

impl DatasetManifest {
    pub fn new(class_count: usize, dtype: Dtype, provenance: impl Into<String>, layers: Vec<LayerEntry>) -> Self {
        Self {
            class_count,
            dtype,
            provenance: provenance.into(),
            layers,
            base_dir: PathBuf::new(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut m: Self = serde_json::from_str(&text).map_err(|e| Error::Manifest {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        m.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        m.check_structure(path)?;
        Ok(m)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    fn check_structure(&self, path: &Path) -> Result<()> {
        let bad = |reason: String| Error::Manifest {
            path: path.display().to_string(),
            reason,
        };
        if self.class_count == 0 {
            return Err(bad("class_count must be at least 1".into()));
        }
        if self.layers.is_empty() {
            return Err(bad("no layers listed".into()));
        }
        for (i, l) in self.layers.iter().enumerate() {
            if self.layers[..i].iter().any(|o| o.layer == l.layer) {
                return Err(bad(format!("layer {} listed twice", l.layer)));
            }
        }
        Ok(())
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn layer(&self, tag: &LayerTag) -> Result<&LayerEntry> {
        self.layers
            .iter()
            .find(|l| &l.layer == tag)
            .ok_or_else(|| Error::Manifest {
                path: self.base_dir.display().to_string(),
                reason: format!("no layer {tag} in manifest"),
            })
    }

    /// Loads one (layer, domain) dump with its labels.
    pub fn load_dataset(&self, tag: &LayerTag, domain: Domain) -> Result<ReprDataset> {
        let entry = self.layer(tag)?.entry(domain);
        let fpath = self.resolve(&entry.features);
        let features = load_dump(&fpath, entry.dims)?;
        if features.rows() != entry.rows {
            return Err(Error::ShapeMismatch {
                path: fpath.display().to_string(),
                reason: format!("manifest declares {} rows, file has {}", entry.rows, features.rows()),
            });
        }
        let labels = match &entry.labels {
            Some(lp) => {
                let lpath = self.resolve(lp);
                let labels = load_labels(&lpath, self.class_count)?;
                if labels.len() != entry.rows {
                    return Err(Error::ShapeMismatch {
                        path: lpath.display().to_string(),
                        reason: format!("{} labels for {} feature rows", labels.len(), entry.rows),
                    });
                }
                labels
            }
            None => vec![0; entry.rows],
        };
        ReprDataset::single_domain(features, labels, self.class_count, domain, tag.clone())
    }

    pub fn has_labels(&self, tag: &LayerTag) -> Result<bool> {
        let l = self.layer(tag)?;
        Ok(l.clean.labels.is_some() && l.aug.labels.is_some())
    }

    /// Loads every referenced file and checks it against the declared shape.
    pub fn validate(&self) -> Result<()> {
        for l in &self.layers {
            let clean = self.load_dataset(&l.layer, Domain::Clean)?;
            let aug = self.load_dataset(&l.layer, Domain::Aug)?;
            if clean.dims() != aug.dims() {
                return Err(Error::ShapeMismatch {
                    path: self.resolve(&l.aug.features).display().to_string(),
                    reason: format!("{} dims for aug vs {} for clean", aug.dims(), clean.dims()),
                });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::dump::{store_dump, store_labels};
    use crate::numerics::RealMatrix;

    fn write_fixture(dir: &Path) -> PathBuf {
        let x = RealMatrix::from_rows(&[[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]).unwrap();
        store_dump(&dir.join("pl_clean.npy"), &x, Dtype::F4).unwrap();
        store_dump(&dir.join("pl_aug.npy"), &x.scale(2.0), Dtype::F4).unwrap();
        store_labels(&dir.join("labels.npy"), &[0, 1, 1]).unwrap();
        let entry = |f: &str| DumpEntry {
            features: f.into(),
            labels: Some("labels.npy".into()),
            rows: 3,
            dims: Some(2),
        };
        let m = DatasetManifest::new(
            2,
            Dtype::F4,
            "fixture",
            vec![LayerEntry {
                layer: LayerTag::Penultimate,
                clean: entry("pl_clean.npy"),
                aug: entry("pl_aug.npy"),
            }],
        );
        let p = dir.join("manifest.json");
        m.write(&p).unwrap();
        p
    }

    #[test]
    fn load_resolves_relative_paths_and_validates() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_fixture(dir.path());
        let m = DatasetManifest::load(&p).unwrap();
        m.validate().unwrap();
        let aug = m.load_dataset(&LayerTag::Penultimate, Domain::Aug).unwrap();
        assert_eq!(aug.features().get(2, 1), 12.0);
        assert_eq!(aug.class_labels(), &[0, 1, 1]);
        assert!(aug.domain_ids().iter().all(|&d| d == Domain::Aug));
        assert!(m.load_dataset(&LayerTag::Antepenultimate, Domain::Aug).is_err());
    }

    #[test]
    fn declared_rows_must_match() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_fixture(dir.path());
        let text = fs::read_to_string(&p)
            .unwrap()
            .replacen("\"rows\": 3", "\"rows\": 4", 1);
        fs::write(&p, text).unwrap();
        let m = DatasetManifest::load(&p).unwrap();
        assert!(matches!(m.validate(), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn missing_file_names_the_path() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_fixture(dir.path());
        fs::remove_file(dir.path().join("pl_aug.npy")).unwrap();
        let err = DatasetManifest::load(&p).unwrap().validate().unwrap_err();
        assert!(err.to_string().contains("pl_aug.npy"), "{err}");
    }

    #[test]
    fn structural_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.json");
        fs::write(&p, r#"{"class_count": 2, "layers": []}"#).unwrap();
        assert!(matches!(DatasetManifest::load(&p), Err(Error::Manifest { .. })));
        fs::write(&p, r#"{"class_count": 2, "layers": [], "extra": 1}"#).unwrap();
        assert!(matches!(DatasetManifest::load(&p), Err(Error::Manifest { .. })));
    }
}
