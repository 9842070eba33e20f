use std::collections::HashSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::DataError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Benign,
    Malignant,
}

impl Label {
    pub fn as_class(self) -> usize {
        match self {
            Label::Benign => 0,
            Label::Malignant => 1,
        }
    }

    pub fn from_class(c: usize) -> Self {
        if c == 0 {
            Label::Benign
        } else {
            Label::Malignant
        }
    }
}

/// What a sample is used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    /// Labeled source-domain training data.
    Source,
    /// Unlabeled target-domain selection split.
    #[default]
    Pool,
    /// Held-out labeled target-domain test split.
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub id: String,
    pub domain: String,
    #[serde(default)]
    pub role: Role,
    pub feature_row: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recon_row: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<Label>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SampleManifest {
    pub samples: Vec<SampleRecord>,
}

impl SampleManifest {
    pub fn new(samples: Vec<SampleRecord>) -> Result<Self, DataError> {
        let m = Self { samples };
        m.validate()?;
        Ok(m)
    }

    /// Checks id uniqueness.
    pub fn validate(&self) -> Result<(), DataError> {
        let mut seen = HashSet::with_capacity(self.samples.len());
        for s in &self.samples {
            if !seen.insert(s.id.as_str()) {
                return Err(DataError::DuplicateId(s.id.clone()));
            }
        }
        Ok(())
    }

    /// Checks every row reference against a feature file with `n` rows.
    pub fn validate_rows(&self, n: usize) -> Result<(), DataError> {
        for s in &self.samples {
            for row in std::iter::once(s.feature_row).chain(s.recon_row) {
                if row >= n {
                    return Err(DataError::DanglingRowIndex {
                        id: s.id.clone(),
                        row,
                        n,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn with_role(&self, role: Role) -> impl Iterator<Item = &SampleRecord> {
        self.samples.iter().filter(move |s| s.role == role)
    }

    pub fn get(&self, id: &str) -> Option<&SampleRecord> {
        self.samples.iter().find(|s| s.id == id)
    }

    /// Sorted, deduplicated domain names of samples with `role`.
    pub fn domains(&self, role: Role) -> Vec<String> {
        let mut d: Vec<String> = self.with_role(role).map(|s| s.domain.clone()).collect();
        d.sort();
        d.dedup();
        d
    }

    pub fn from_json(text: &str) -> Result<Self, DataError> {
        let m: Self = serde_json::from_str(text).map_err(|e| DataError::Parse(e.to_string()))?;
        m.validate()?;
        Ok(m)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<SampleManifest, DataError> {
    let text = fs::read_to_string(path.as_ref()).map_err(|e| DataError::io(path.as_ref(), e))?;
    SampleManifest::from_json(&text)
}

pub fn save_manifest(manifest: &SampleManifest, path: impl AsRef<Path>) -> Result<(), DataError> {
    fs::write(path.as_ref(), manifest.to_json()).map_err(|e| DataError::io(path.as_ref(), e))
}
