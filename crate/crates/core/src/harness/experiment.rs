//! Experiment runner: develop on a prefix of a synthetic stream, replay the
//! rest through a pipeline, and compare against off-path ground truth.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::aggregation::score_window_standard;
use crate::config::EngineConfig;
use crate::error::{Error, Result};
use crate::orchestrator::{build_references, develop_phase, process_window, ArtifactBundle, Mode, PipelineState, Provenance};
use crate::predictor::{mae, r2};
use crate::windowing::{segment_stream, DataWindow};

use super::generator::{generate_pump_stream, PumpStreamConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Leading windows used for the development phase.
    pub train_windows: usize,
    /// Significance levels for `sweep`.
    pub taus: Vec<f64>,
    /// Static-mode evaluation sizes.
    pub betas: Vec<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            train_windows: 300,
            taus: vec![0.03, 0.04, 0.06, 0.08, 0.09],
            betas: vec![25, 50, 100, 200],
        }
    }
}

/// Pipeline variant under test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Adaptive,
    Static,
    Standard,
    /// Adaptive pipeline with drift detection disabled.
    Frozen,
}

impl Variant {
    pub fn mode(self) -> Mode {
        match self {
            Variant::Adaptive | Variant::Frozen => Mode::Adaptive,
            Variant::Static => Mode::Static,
            Variant::Standard => Mode::Standard,
        }
    }
}

impl From<Mode> for Variant {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Adaptive => Variant::Adaptive,
            Mode::Static => Variant::Static,
            Mode::Standard => Variant::Standard,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentParams {
    pub variant: Variant,
    pub tau: f64,
    pub beta: usize,
    pub seed: u64,
    pub stream_seed: u64,
    pub window_len: usize,
    pub train_windows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowRecord {
    pub window_id: u64,
    /// Off-path standard score; empty when the window failed.
    pub ground_truth: Option<f64>,
    /// Score emitted by the pipeline; empty when the window failed.
    pub prediction: Option<f64>,
    pub cumulative_mae: Option<f64>,
    pub cumulative_r2: Option<f64>,
    pub elapsed_ns: u64,
    pub cumulative_ns: u64,
    pub drifted: bool,
    pub p_value: Option<f64>,
    pub provenance: Option<Provenance>,
    pub model_version: u64,
    pub retrained: bool,
    pub evaluated: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub variant: Variant,
    pub n_windows: usize,
    pub final_mae: Option<f64>,
    pub final_r2: Option<f64>,
    pub total_ns: u64,
    pub retrain_count: usize,
    pub detection_count: usize,
    pub detection_indices: Vec<u64>,
    pub evaluation_count: usize,
    pub final_version: u64,
    pub error_count: usize,
    /// Versions in creation order, with parents.
    pub lineage_valid: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub params: ExperimentParams,
    pub records: Vec<WindowRecord>,
    pub summary: ExperimentSummary,
}

impl ExperimentReport {
    /// Copy with every wall-clock field zeroed.
    pub fn without_timing(&self) -> Self {
        let mut r = self.clone();
        for rec in &mut r.records {
            rec.elapsed_ns = 0;
            rec.cumulative_ns = 0;
        }
        r.summary.total_ns = 0;
        r
    }
}

/// Generated stream split into development and deployment windows.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub train: Vec<DataWindow<f64>>,
    pub deploy: Vec<DataWindow<f64>>,
}

fn check_stream(cfg: &EngineConfig, stream: &PumpStreamConfig) -> Result<()> {
    cfg.validate()?;
    stream.validate()?;
    if stream.window_len != cfg.window_len {
        return Err(Error::Config(format!(
            "generator.window_len {} differs from window_len {}",
            stream.window_len, cfg.window_len
        )));
    }
    let train = cfg.experiment.train_windows;
    if train < 4 || train >= stream.n_windows {
        return Err(Error::Config(format!(
            "experiment.train_windows must lie in [4, n_windows), got {train} of {}",
            stream.n_windows
        )));
    }
    Ok(())
}

pub fn prepare(cfg: &EngineConfig, stream: &PumpStreamConfig) -> Result<Prepared> {
    check_stream(cfg, stream)?;
    let readings = generate_pump_stream(stream)?;
    let mut windows = segment_stream(&readings, cfg.window_len)?;
    let deploy = windows.split_off(cfg.experiment.train_windows);
    Ok(Prepared { train: windows, deploy })
}

/// Develops on `prepared.train` and replays `prepared.deploy`.
pub fn run_experiment(variant: Variant, cfg: &EngineConfig, stream: &PumpStreamConfig) -> Result<ExperimentReport> {
    let prepared = prepare(cfg, stream)?;
    let bundle = develop_phase(&prepared.train, cfg)?.bundle;
    replay(variant, bundle, &prepared.deploy, cfg, stream.seed)
}

/// Replays deployment windows through one pipeline variant.
///
/// Only the pipeline call is timed. Ground truth is the standard score
/// under the bundle in effect after the window was processed, computed
/// outside the timed region.
pub fn replay(
    variant: Variant,
    bundle: ArtifactBundle,
    deploy: &[DataWindow<f64>],
    cfg: &EngineConfig,
    stream_seed: u64,
) -> Result<ExperimentReport> {
    let mut cfg = cfg.clone();
    if variant == Variant::Frozen {
        cfg.drift.enabled = false;
    }
    let mut state = PipelineState::new(variant.mode(), bundle, &cfg)?;
    let mut records = Vec::with_capacity(deploy.len());
    let (mut ys, mut yhats) = (Vec::new(), Vec::new());
    let mut cumulative_ns = 0u64;
    let mut detections = Vec::new();
    for window in deploy {
        let start = Instant::now();
        let result = process_window(&mut state, window);
        let elapsed_ns = start.elapsed().as_nanos() as u64;
        cumulative_ns += elapsed_ns;

        let truth = score_window_standard(window, &state.bundle.standard_scorer()).map(|s| s.unified);
        let mut rec = WindowRecord {
            window_id: window.window_id,
            ground_truth: None,
            prediction: None,
            cumulative_mae: None,
            cumulative_r2: None,
            elapsed_ns,
            cumulative_ns,
            drifted: false,
            p_value: None,
            provenance: None,
            model_version: state.version(),
            retrained: false,
            evaluated: false,
            error: None,
        };
        match (result, truth) {
            (Ok(scored), Ok(truth)) => {
                rec.ground_truth = Some(truth);
                rec.prediction = Some(scored.unified_score);
                rec.drifted = scored.drifted;
                rec.p_value = scored.p_value;
                rec.provenance = Some(scored.provenance);
                rec.retrained = scored.adaptation.as_ref().is_some_and(|a| a.new_version.is_some());
                rec.evaluated = scored.oracle.is_some();
                if scored.drifted {
                    detections.push(window.window_id);
                }
                ys.push(truth);
                yhats.push(scored.unified_score);
                rec.cumulative_mae = mae(&ys, &yhats).ok();
                rec.cumulative_r2 = r2(&ys, &yhats).ok();
            }
            (Err(e), _) | (_, Err(e)) => rec.error = Some(e.to_string()),
        }
        records.push(rec);
    }

    let last_metrics = records.iter().rev().find(|r| r.prediction.is_some());
    let summary = ExperimentSummary {
        variant,
        n_windows: records.len(),
        final_mae: last_metrics.and_then(|r| r.cumulative_mae),
        final_r2: last_metrics.and_then(|r| r.cumulative_r2),
        total_ns: cumulative_ns,
        retrain_count: state.retrains(),
        detection_count: detections.len(),
        detection_indices: detections,
        evaluation_count: state.evaluations,
        final_version: state.version(),
        error_count: records.iter().filter(|r| r.error.is_some()).count(),
        lineage_valid: state.bundle.lineage_is_valid(),
    };
    Ok(ExperimentReport {
        params: ExperimentParams {
            variant,
            tau: cfg.drift.tau,
            beta: cfg.static_mode.beta,
            seed: cfg.seed,
            stream_seed,
            window_len: cfg.window_len,
            train_windows: cfg.experiment.train_windows,
        },
        records,
        summary,
    })
}

/// Every variant on the same stream, starting from one shared bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub reports: Vec<ExperimentReport>,
}

impl BenchReport {
    pub fn without_timing(&self) -> Self {
        Self {
            reports: self.reports.iter().map(ExperimentReport::without_timing).collect(),
        }
    }

    pub fn get(&self, variant: Variant) -> Option<&ExperimentReport> {
        self.reports.iter().find(|r| r.params.variant == variant)
    }
}

pub fn bench(variants: &[Variant], cfg: &EngineConfig, stream: &PumpStreamConfig) -> Result<BenchReport> {
    let prepared = prepare(cfg, stream)?;
    let bundle = develop_phase(&prepared.train, cfg)?.bundle;
    let reports = variants
        .iter()
        .map(|v| replay(*v, bundle.clone(), &prepared.deploy, cfg, stream.seed))
        .collect::<Result<_>>()?;
    Ok(BenchReport { reports })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub taus: Vec<f64>,
    pub counts: Vec<usize>,
    /// Window ids flagged at each tau.
    pub detections: Vec<Vec<u64>>,
    /// Shared p-value sequence; `None` for faulted or warm-up windows.
    pub p_values: Vec<(u64, Option<f64>)>,
}

impl SweepReport {
    pub fn count(&self, tau: f64) -> Option<usize> {
        self.taus.iter().position(|t| *t == tau).map(|i| self.counts[i])
    }
}

/// Replays the deployment windows once through a non-adapting detector and
/// counts detections under each `tau` from the shared p-values.
pub fn sensitivity_sweep(taus: &[f64], cfg: &EngineConfig, stream: &PumpStreamConfig) -> Result<SweepReport> {
    if let Some(t) = taus.iter().find(|t| !(**t > 0.0 && **t < 1.0)) {
        return Err(Error::Config(format!("tau must lie in (0, 1), got {t}")));
    }
    let prepared = prepare(cfg, stream)?;
    let mut detector = build_references(&prepared.train, cfg)?.detector_state;
    let p_values: Vec<(u64, Option<f64>)> = prepared
        .deploy
        .iter()
        .map(|w| (w.window_id, detector.observe(w).p_value))
        .collect();
    let detections: Vec<Vec<u64>> = taus
        .iter()
        .map(|t| {
            p_values
                .iter()
                .filter(|(_, p)| p.is_some_and(|p| p < *t))
                .map(|(id, _)| *id)
                .collect()
        })
        .collect();
    Ok(SweepReport {
        taus: taus.to_vec(),
        counts: detections.iter().map(Vec::len).collect(),
        detections,
        p_values,
    })
}
