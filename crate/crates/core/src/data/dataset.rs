use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::RealMatrix;

/// Which of the two training domains a row came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Clean = 0,
    #[serde(alias = "augmented")]
    Aug = 1,
}

impl Domain {
    pub fn id(self) -> u8 {
        self as u8
    }

    pub fn from_id(id: u8) -> Result<Self> {
        match id {
            0 => Ok(Domain::Clean),
            1 => Ok(Domain::Aug),
            other => Err(Error::param(format!("domain id must be 0 or 1, got {other}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Domain::Clean => "clean",
            Domain::Aug => "aug",
        }
    }
}

/// Which network layer a representation dump was captured from.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LayerTag {
    /// Penultimate layer, directly before the softmax layer.
    Penultimate,
    /// Antepenultimate layer, one below the penultimate.
    Antepenultimate,
    Other(String),
}

impl LayerTag {
    pub fn as_str(&self) -> &str {
        match self {
            LayerTag::Penultimate => "PL",
            LayerTag::Antepenultimate => "APL",
            LayerTag::Other(name) => name,
        }
    }

    pub fn parse(s: &str) -> Self {
        match s {
            "PL" | "pl" | "penultimate" => LayerTag::Penultimate,
            "APL" | "apl" | "antepenultimate" => LayerTag::Antepenultimate,
            other => LayerTag::Other(other.to_string()),
        }
    }
}

impl fmt::Display for LayerTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for LayerTag {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for LayerTag {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Ok(LayerTag::parse(&s))
    }
}

/// Feature rows with a class label and a domain id per row.
#[derive(Debug, Clone, PartialEq)]
pub struct ReprDataset {
    features: RealMatrix,
    class_labels: Vec<usize>,
    class_count: usize,
    domain_ids: Vec<Domain>,
    layer_tag: LayerTag,
}

impl ReprDataset {
    pub fn new(
        features: RealMatrix,
        class_labels: Vec<usize>,
        class_count: usize,
        domain_ids: Vec<Domain>,
        layer_tag: LayerTag,
    ) -> Result<Self> {
        let n = features.rows();
        if class_labels.len() != n || domain_ids.len() != n {
            return Err(Error::dim(format!(
                "{n} feature rows but {} labels and {} domain ids",
                class_labels.len(),
                domain_ids.len()
            )));
        }
        if let Some((i, &c)) = class_labels.iter().enumerate().find(|(_, &c)| c >= class_count) {
            return Err(Error::param(format!("row {i}: class {c} outside [0, {class_count})")));
        }
        Ok(Self {
            features,
            class_labels,
            class_count,
            domain_ids,
            layer_tag,
        })
    }

    /// All rows belong to `domain`.
    pub fn single_domain(
        features: RealMatrix,
        class_labels: Vec<usize>,
        class_count: usize,
        domain: Domain,
        layer_tag: LayerTag,
    ) -> Result<Self> {
        let n = features.rows();
        Self::new(features, class_labels, class_count, vec![domain; n], layer_tag)
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dims(&self) -> usize {
        self.features.cols()
    }

    pub fn features(&self) -> &RealMatrix {
        &self.features
    }

    pub fn class_labels(&self) -> &[usize] {
        &self.class_labels
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn domain_ids(&self) -> &[Domain] {
        &self.domain_ids
    }

    pub fn layer_tag(&self) -> &LayerTag {
        &self.layer_tag
    }

    pub fn count_domain(&self, domain: Domain) -> usize {
        self.domain_ids.iter().filter(|&&d| d == domain).count()
    }

    /// Indices of the rows in `domain`, ascending.
    pub fn domain_indices(&self, domain: Domain) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.domain_ids[i] == domain).collect()
    }

    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            features: self.features.select_rows(indices),
            class_labels: indices.iter().map(|&i| self.class_labels[i]).collect(),
            class_count: self.class_count,
            domain_ids: indices.iter().map(|&i| self.domain_ids[i]).collect(),
            layer_tag: self.layer_tag.clone(),
        }
    }

    /// Copy with every row relabelled to `domain`.
    pub fn with_domain(&self, domain: Domain) -> Self {
        Self {
            domain_ids: vec![domain; self.len()],
            ..self.clone()
        }
    }

    pub fn concat(&self, other: &Self) -> Result<Self> {
        if self.class_count != other.class_count {
            return Err(Error::dim(format!(
                "class counts differ: {} vs {}",
                self.class_count, other.class_count
            )));
        }
        let mut labels = self.class_labels.clone();
        labels.extend_from_slice(&other.class_labels);
        let mut domains = self.domain_ids.clone();
        domains.extend_from_slice(&other.domain_ids);
        Self::new(
            self.features.vstack(&other.features)?,
            labels,
            self.class_count,
            domains,
            self.layer_tag.clone(),
        )
    }

    /// Replaces the features, keeping labels and domains.
    pub fn with_features(&self, features: RealMatrix) -> Result<Self> {
        Self::new(
            features,
            self.class_labels.clone(),
            self.class_count,
            self.domain_ids.clone(),
            self.layer_tag.clone(),
        )
    }
}
