//! The fast scoring path: window features, a boosted-tree regressor, and
//! the metrics the test oracle uses to judge it.

pub mod features;
pub mod gbt;
pub mod metrics;

pub use features::{extract_features, FeatureVector, FEATURE_COUNT, FEATURE_NAMES};
pub use gbt::{fit_gbt, predict, GbtModel, GbtParams, Node, Tree};
pub use metrics::{mae, oracle_check, r2, OracleCriterion, OracleReport};
