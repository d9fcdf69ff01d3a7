//! Per-word feature spaces.
//!
//! | space | built by |
//! |-------|----------|
//! | PU    | [`punctuation_features`] |
//! | CM    | [`complexity_metrics`] |
//! | PD    | [`pos_dep_features`] |
//! | CC    | [`complete_subtree_features`] |
//! | CI    | [`incomplete_subtree_features`] |
//! | INC   | [`crate::incparser::inc_feature_matrix`] |
//! | DEP   | [`crate::gcn::extract_dep_features`] |
//! | SEM   | [`pca_reduce`] over ingested contextual embeddings |

mod basic;
mod pca;
mod subtree;

pub use basic::{
    complexity_metrics, pos_dep_features, punctuation_class, punctuation_features, FrequencyTable, PuMark,
    PUNCT_ALPHABET,
};
pub use pca::{pca_reduce, PcaModel};
pub(crate) use subtree::{accumulate_items, encoding_meta};
pub use subtree::{
    complete_subtree, complete_subtree_features, encode_items, encode_subtree, fnv1a64, incomplete_subtree,
    incomplete_subtree_features, node_count, EncodingMode, SubtreeEncodingConfig, SubtreeView, OPEN_MARKER,
};

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("feature matrix has non-finite value at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("feature matrix has zero columns")]
    EmptyDim,
    #[error("{space} has {rows} rows but corpus has {tokens} tokens")]
    RowMismatch { space: FeatureSpace, rows: usize, tokens: usize },
    #[error("dependency graphs are required for {0}")]
    MissingGraphs(FeatureSpace),
    #[error("input has zero variance")]
    DegenerateInput,
    #[error("frequency table line {line}: {reason}")]
    BadFrequency { line: usize, reason: String },
    #[error("unknown feature space {0:?}")]
    UnknownSpace(String),
}

/// Name of a feature space. `Ext` covers additional ingested embedding files.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FeatureSpace {
    PU,
    CM,
    PD,
    CC,
    CI,
    INC,
    DEP,
    SEM,
    Ext(String),
}

impl FeatureSpace {
    pub const BUILTIN: [FeatureSpace; 8] = [
        FeatureSpace::PU,
        FeatureSpace::CM,
        FeatureSpace::PD,
        FeatureSpace::CC,
        FeatureSpace::CI,
        FeatureSpace::INC,
        FeatureSpace::DEP,
        FeatureSpace::SEM,
    ];

    pub fn as_str(&self) -> &str {
        match self {
            FeatureSpace::PU => "PU",
            FeatureSpace::CM => "CM",
            FeatureSpace::PD => "PD",
            FeatureSpace::CC => "CC",
            FeatureSpace::CI => "CI",
            FeatureSpace::INC => "INC",
            FeatureSpace::DEP => "DEP",
            FeatureSpace::SEM => "SEM",
            FeatureSpace::Ext(name) => name,
        }
    }
}

impl fmt::Display for FeatureSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureSpace {
    type Err = FeatureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let builtin = FeatureSpace::BUILTIN.iter().find(|b| b.as_str().eq_ignore_ascii_case(s));
        match builtin {
            Some(b) => Ok(b.clone()),
            None if !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') => {
                Ok(FeatureSpace::Ext(s.to_string()))
            }
            None => Err(FeatureError::UnknownSpace(s.to_string())),
        }
    }
}

/// A words×D (or TRs×D) feature matrix with provenance metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    space: FeatureSpace,
    values: DMatrix<f64>,
    pub meta: BTreeMap<String, Value>,
}

impl FeatureMatrix {
    pub fn new(space: FeatureSpace, values: DMatrix<f64>) -> Result<Self, FeatureError> {
        if values.ncols() == 0 {
            return Err(FeatureError::EmptyDim);
        }
        for c in 0..values.ncols() {
            for r in 0..values.nrows() {
                if !values[(r, c)].is_finite() {
                    return Err(FeatureError::NonFinite { row: r, col: c });
                }
            }
        }
        Ok(Self { space, values, meta: BTreeMap::new() })
    }

    pub fn with_meta(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.meta.insert(key.to_string(), value.into());
        self
    }

    pub fn space(&self) -> &FeatureSpace {
        &self.space
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn into_values(self) -> DMatrix<f64> {
        self.values
    }

    pub fn rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    /// Row count must match the corpus token count.
    pub fn check_rows(&self, tokens: usize) -> Result<(), FeatureError> {
        if self.rows() != tokens {
            return Err(FeatureError::RowMismatch { space: self.space.clone(), rows: self.rows(), tokens });
        }
        Ok(())
    }
}

/// Stack per-row vectors into a matrix.
pub(crate) fn stack_rows(rows: &[Vec<f64>], dim: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), dim, |r, c| rows[r][c])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn space_names_round_trip() {
        for s in FeatureSpace::BUILTIN {
            assert_eq!(s.as_str().parse::<FeatureSpace>().unwrap(), s);
        }
        assert_eq!("glove".parse::<FeatureSpace>().unwrap(), FeatureSpace::Ext("glove".into()));
        assert!("a b".parse::<FeatureSpace>().is_err());
    }

    #[test]
    fn rejects_non_finite() {
        let m = DMatrix::from_row_slice(1, 2, &[1.0, f64::NAN]);
        assert_eq!(FeatureMatrix::new(FeatureSpace::CM, m).unwrap_err(), FeatureError::NonFinite { row: 0, col: 1 });
        assert_eq!(
            FeatureMatrix::new(FeatureSpace::CM, DMatrix::zeros(3, 0)).unwrap_err(),
            FeatureError::EmptyDim
        );
    }
}
