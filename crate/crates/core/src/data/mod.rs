//! Transaction ingestion, feature engineering, splitting, scaling,
//! undersampling and a synthetic transaction generator.

mod features;
mod raw;
mod spec;
mod split;
mod synthetic;

pub use features::{engineer_features, engineered_feature_names, numeric_quantile, EngineerConfig, FeatureTable};
pub use raw::{load_csv, read_csv, write_csv, RawTransaction, TxType, PAYSIM_COLUMNS};
pub use spec::{FeatureSpec, LinearFact, OneHotGroup};
pub use split::{split_scale, undersample, undersample_train, Dataset, Scaler, SplitFractions};
pub use synthetic::{generate_synthetic, planted_rule, SyntheticConfig};

use thiserror::Error;

use crate::expr::FeatureMatrix;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("parse error at row {row}: {message}")]
    ParseError { row: usize, message: String },
    #[error("only one class present ({0})")]
    SingleClass(&'static str),
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("unknown feature {0:?}")]
    UnknownFeature(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

/// A feature matrix with one binary label per row (`true` = fraud).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LabeledData {
    pub x: FeatureMatrix,
    pub y: Vec<bool>,
}

impl LabeledData {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn n_fraud(&self) -> usize {
        self.y.iter().filter(|&&b| b).count()
    }

    pub fn select(&self, rows: &[usize]) -> LabeledData {
        LabeledData {
            x: self.x.select_rows(rows),
            y: rows.iter().map(|&r| self.y[r]).collect(),
        }
    }
}
