//! Control plane: development phase, deployment pipelines, retraining and
//! the versioned artifact store.

pub mod bundle;
pub mod develop;
pub mod pipeline;

pub use bundle::{
    store_latest, store_load, store_save, version_dir, ArtifactBundle, DimensionDelta, HistoryEntry,
    HistoryOrigin, ModelVersion, RetrainTrigger,
};
pub use develop::{build_references, develop_phase, new_detector, stride_subsample, DevelopmentOutcome, References};
pub use pipeline::{
    activate, process_window, process_window_adaptive, process_window_standard, process_window_static,
    rescore_history, rescore_qualities, retrain, AdaptationEvent, Mode, PipelineState, Provenance, Route,
    ScoreLine, ScoredWindow,
};
