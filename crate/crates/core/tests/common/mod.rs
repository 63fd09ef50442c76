#![allow(dead_code)]

use dqscore::harness::{prepare, DriftEvent, DriftKind, Prepared, PumpStreamConfig};
use dqscore::orchestrator::{develop_phase, ArtifactBundle};
use dqscore::EngineConfig;

/// Fast configuration: default windows, a small timeliness reference.
pub fn small_config() -> EngineConfig {
    let mut cfg = EngineConfig::default();
    cfg.generator.n_windows = 350;
    cfg.reference_sample_size = 2000;
    cfg
}

/// Offset added to window counts and indices so that `n_windows` and `at`
/// count from the start of an 80-window prefix rather than the real one.
const EXTRA: usize = 220;

pub fn stream(cfg: &EngineConfig, n_windows: usize, seed: u64) -> PumpStreamConfig {
    PumpStreamConfig {
        n_windows: n_windows + EXTRA,
        seed,
        ..cfg.generator.clone()
    }
}

pub fn shifted_stream(cfg: &EngineConfig, n_windows: usize, at: usize, magnitude: f64, seed: u64) -> PumpStreamConfig {
    PumpStreamConfig {
        drift_events: vec![DriftEvent {
            window_index: at + EXTRA,
            kind: DriftKind::MeanShift,
            magnitude,
        }],
        ..stream(cfg, n_windows, seed)
    }
}

pub fn developed(cfg: &EngineConfig, s: &PumpStreamConfig) -> (Prepared, ArtifactBundle) {
    let prepared = prepare(cfg, s).unwrap();
    let bundle = develop_phase(&prepared.train, cfg).unwrap().bundle;
    (prepared, bundle)
}
