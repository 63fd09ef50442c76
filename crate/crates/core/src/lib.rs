//! Drift-aware data-quality scoring for windowed sensor streams.
//!
//! Each window gets five dimension scores (accuracy, completeness,
//! consistency, timeliness, skewness) fused into one quality score by a
//! z-score and first-principal-component projection. Deployment serves
//! that score from a boosted-tree regressor and retrains it when a
//! divergence-based detector reports drift.
//!
//! The numeric kernels are generic over [`Scalar`] (`f32` or `f64`). The
//! control plane works in `f64`; the aliases below name those types.

pub mod aggregation;
pub mod config;
pub mod dimensions;
pub mod drift;
pub mod error;
pub mod harness;
pub mod mutation;
pub mod orchestrator;
pub mod predictor;
pub mod scalar;
pub mod windowing;

pub use config::EngineConfig;
pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Reading = windowing::Reading<f64>;
pub type DataWindow = windowing::DataWindow<f64>;
pub type QualityVector = dimensions::QualityVector<f64>;
pub type IntegrityConstraints = dimensions::IntegrityConstraints<f64>;
pub type AnomalyDetector = dimensions::AnomalyDetector<f64>;
pub type ReferenceSample = dimensions::ReferenceSample<f64>;
pub type Pdf = drift::Pdf<f64>;
pub type DriftDetectorState = drift::DriftDetectorState<f64>;
pub type DriftVerdict = drift::DriftVerdict<f64>;
pub type Standardizer = aggregation::Standardizer<f64>;
pub type PcaModel = aggregation::PcaModel<f64>;
pub type FeatureVector = predictor::FeatureVector<f64>;
pub type GbtModel = predictor::GbtModel<f64>;

/// Single-precision variants of the kernel types.
pub mod f32 {
    pub type DataWindow = crate::windowing::DataWindow<f32>;
    pub type QualityVector = crate::dimensions::QualityVector<f32>;
    pub type Pdf = crate::drift::Pdf<f32>;
    pub type PcaModel = crate::aggregation::PcaModel<f32>;
    pub type GbtModel = crate::predictor::GbtModel<f32>;
}
