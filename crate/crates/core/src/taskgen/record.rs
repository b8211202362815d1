use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::mask::Mask;
use crate::error::{input, Result};

/// What the model is shown: an opaque image path or a text description standing in for it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Query {
    Image(String),
    Text(String),
}

/// Where a record's defect mask lives.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskSource {
    /// Inline run-length string, see [`Mask::from_rle`].
    Rle(String),
    /// Portable bitmap file. Relative paths resolve against the records file's directory.
    Pbm(PathBuf),
}

fn default_split() -> String {
    "train".to_string()
}

/// One annotated sample from an anomaly-detection dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub id: String,
    pub object_type: String,
    pub is_anomalous: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub defect_type: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<MaskSource>,
    pub query: Query,
    #[serde(default = "default_split")]
    pub split: String,
}

impl AnnotationRecord {
    pub fn validate(&self) -> Result<()> {
        if self.id.is_empty() || self.object_type.is_empty() {
            return Err(input("record needs a non-empty id and object_type"));
        }
        if self.is_anomalous && self.defect_type.as_deref().is_none_or(str::is_empty) {
            return Err(input(format!("record {}: anomalous without defect_type", self.id)));
        }
        if !self.is_anomalous && self.defect_type.is_some() {
            return Err(input(format!("record {}: normal record with a defect_type", self.id)));
        }
        if self.mask.is_some() && !self.is_anomalous {
            return Err(input(format!("record {}: mask on a normal record", self.id)));
        }
        Ok(())
    }

    pub fn load_mask(&self) -> Result<Option<Mask>> {
        match &self.mask {
            None => Ok(None),
            Some(MaskSource::Rle(s)) => Mask::from_rle(s).map(Some),
            Some(MaskSource::Pbm(p)) => Mask::load_pbm(p).map(Some),
        }
    }

    /// Rewrite relative bitmap paths so they resolve against `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        if let Some(MaskSource::Pbm(p)) = &mut self.mask {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }
}

/// Read annotation records from JSON Lines, validating each and resolving mask paths.
pub fn load_records(path: &Path) -> Result<Vec<AnnotationRecord>> {
    let base = path.parent().unwrap_or(Path::new("."));
    let mut records: Vec<AnnotationRecord> = super::io::read_jsonl(path)?;
    for r in &mut records {
        r.validate()?;
        r.resolve_paths(base);
    }
    Ok(records)
}
