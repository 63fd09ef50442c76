//! Deployment pipelines and the method activator.

use std::collections::VecDeque;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::aggregation::{fit_aggregation, score_window_standard};
use crate::config::{AdaptationConfig, EngineConfig};
use crate::dimensions::{rescore_dynamic, score_all_or_sentinel, QualityVector, ReferenceSample, SortedReference};
use crate::drift::{DriftVerdict, Pdf};
use crate::error::{Error, Result};
use crate::mutation::{mutate_window, window_rng, MutationPlan};
use crate::predictor::{extract_features, fit_gbt, oracle_check, OracleCriterion, OracleReport};
use crate::windowing::DataWindow;

use super::bundle::{
    store_save, ArtifactBundle, DimensionDelta, HistoryEntry, HistoryOrigin, ModelVersion, RetrainTrigger,
};
use super::develop::pooled_tail;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Adaptive,
    Static,
    Standard,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Adaptive, Mode::Static, Mode::Standard];
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Adaptive => "adaptive",
            Mode::Static => "static",
            Mode::Standard => "standard",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.to_string() == s)
            .ok_or_else(|| Error::Config(format!("unknown mode `{s}`")))
    }
}

/// What the activator decided for one window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    MlScore,
    AdaptThenScore,
    StandardEvaluate,
    StandardScore,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Ml,
    Standard,
}

/// Result of one adaptation attempt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptationEvent {
    pub window_id: u64,
    pub trigger: RetrainTrigger,
    /// Version produced, or `None` when the fit failed and the previous bundle was kept.
    pub new_version: Option<u64>,
    pub failure: Option<String>,
    /// Bundle persisted to the store, when one is configured.
    pub saved: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredWindow {
    pub window_id: u64,
    /// Present whenever the standard path ran on this window.
    pub quality: Option<QualityVector<f64>>,
    pub unified_score: f64,
    pub provenance: Provenance,
    pub model_version: u64,
    pub drifted: bool,
    pub p_value: Option<f64>,
    pub divergence: Option<f64>,
    pub route: Route,
    /// Oracle result when this window was a static-mode checkpoint.
    pub oracle: Option<OracleReport>,
    pub adaptation: Option<AdaptationEvent>,
}

/// One line of scored output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreLine {
    pub window_id: u64,
    pub score: f64,
    pub provenance: Provenance,
    pub model_version: u64,
    pub drifted: bool,
    pub p_value: Option<f64>,
}

impl ScoredWindow {
    pub fn line(&self) -> ScoreLine {
        ScoreLine {
            window_id: self.window_id,
            score: self.unified_score,
            provenance: self.provenance,
            model_version: self.model_version,
            drifted: self.drifted,
            p_value: self.p_value,
        }
    }
}

/// Per-stream control state. Calls must be serialized per stream.
#[derive(Debug, Clone)]
pub struct PipelineState {
    pub mode: Mode,
    pub bundle: ArtifactBundle,
    /// Windows since the last static-mode evaluation.
    pub chunk_counter: usize,
    pub beta: usize,
    pub tau: f64,
    pub tolerance: OracleCriterion,
    /// Turns the drift test off (frozen-model ablation).
    pub drift_enabled: bool,
    pub adaptation: AdaptationConfig,
    pub mutation: MutationPlan,
    pub seed: u64,
    /// New versions are persisted here when set.
    pub store: Option<PathBuf>,
    pub detections: usize,
    pub evaluations: usize,
    pub events: Vec<AdaptationEvent>,
    recent: VecDeque<DataWindow<f64>>,
    /// (ground truth, prediction) pairs since the last evaluation.
    pending: Vec<(f64, f64)>,
}

impl PipelineState {
    pub fn new(mode: Mode, mut bundle: ArtifactBundle, cfg: &EngineConfig) -> Result<Self> {
        cfg.validate()?;
        bundle.detector_state.tau = cfg.drift.tau;
        bundle.detector_state.min_history = cfg.drift.min_history;
        Ok(Self {
            mode,
            bundle,
            chunk_counter: 0,
            beta: cfg.static_mode.beta,
            tau: cfg.drift.tau,
            tolerance: cfg.static_mode.criterion,
            drift_enabled: cfg.drift.enabled,
            adaptation: cfg.adaptation,
            mutation: cfg.mutation.clone(),
            seed: cfg.seed,
            store: None,
            detections: 0,
            evaluations: 0,
            events: Vec::new(),
            recent: VecDeque::new(),
            pending: Vec::new(),
        })
    }

    pub fn with_store(mut self, root: PathBuf) -> Self {
        self.store = Some(root);
        self
    }

    pub fn version(&self) -> u64 {
        self.bundle.version.version
    }

    /// Successful retrains so far.
    pub fn retrains(&self) -> usize {
        self.events.iter().filter(|e| e.new_version.is_some()).count()
    }

    fn remember(&mut self, window: &DataWindow<f64>) {
        self.recent.push_back(window.clone());
        while self.recent.len() > self.adaptation.rebaseline_windows {
            self.recent.pop_front();
        }
    }
}

/// The method activator.
pub fn activate(state: &PipelineState, verdict: Option<&DriftVerdict<f64>>) -> Result<Route> {
    match state.mode {
        Mode::Adaptive => match verdict {
            Some(v) if v.drifted => Ok(Route::AdaptThenScore),
            Some(_) => Ok(Route::MlScore),
            None => Err(Error::Routing("adaptive mode needs a drift verdict".into())),
        },
        Mode::Static => {
            if state.chunk_counter + 1 < state.beta {
                Ok(Route::MlScore)
            } else {
                Ok(Route::StandardEvaluate)
            }
        }
        Mode::Standard => Ok(Route::StandardScore),
    }
}

fn ml_score(bundle: &ArtifactBundle, window: &DataWindow<f64>) -> f64 {
    let f = extract_features(window, &bundle.constraints);
    bundle.model.predict(f.as_slice())
}

fn scored(state: &PipelineState, window: &DataWindow<f64>, route: Route, unified: f64, provenance: Provenance) -> ScoredWindow {
    ScoredWindow {
        window_id: window.window_id,
        quality: None,
        unified_score: unified,
        provenance,
        model_version: state.version(),
        drifted: false,
        p_value: None,
        divergence: None,
        route,
        oracle: None,
        adaptation: None,
    }
}

pub fn process_window(state: &mut PipelineState, window: &DataWindow<f64>) -> Result<ScoredWindow> {
    match state.mode {
        Mode::Adaptive => process_window_adaptive(state, window),
        Mode::Static => process_window_static(state, window),
        Mode::Standard => process_window_standard(state, window),
    }
}

pub fn process_window_adaptive(state: &mut PipelineState, window: &DataWindow<f64>) -> Result<ScoredWindow> {
    state.remember(window);
    let verdict = if state.drift_enabled {
        state.bundle.detector_state.observe(window)
    } else {
        DriftVerdict::fault()
    };
    let route = activate(state, Some(&verdict))?;
    let mut out = match route {
        Route::AdaptThenScore => {
            state.detections += 1;
            let event = adapt(state, window, RetrainTrigger::DriftAdaptation);
            let standard = score_window_standard(window, &state.bundle.standard_scorer())
                .map_err(|e| e.in_window(window.window_id))?;
            let mut out = scored(state, window, route, standard.unified, Provenance::Standard);
            out.quality = Some(standard.quality);
            out.adaptation = Some(event);
            out
        }
        _ => {
            let s = ml_score(&state.bundle, window);
            scored(state, window, route, s, Provenance::Ml)
        }
    };
    out.drifted = verdict.drifted;
    out.p_value = verdict.p_value;
    out.divergence = verdict.divergence;
    Ok(out)
}

pub fn process_window_static(state: &mut PipelineState, window: &DataWindow<f64>) -> Result<ScoredWindow> {
    state.remember(window);
    let route = activate(state, None)?;
    let predicted = ml_score(&state.bundle, window);
    if route == Route::MlScore {
        state.chunk_counter += 1;
        return Ok(scored(state, window, route, predicted, Provenance::Ml));
    }

    state.chunk_counter = 0;
    state.evaluations += 1;
    let truth = score_window_standard(window, &state.bundle.standard_scorer())
        .map_err(|e| e.in_window(window.window_id))?;
    state.pending.push((truth.unified, predicted));
    let (y, yhat): (Vec<f64>, Vec<f64>) = state.pending.drain(..).unzip();
    let report = oracle_check(&y, &yhat, state.tolerance);
    if report.pass {
        let mut out = scored(state, window, route, predicted, Provenance::Ml);
        out.quality = Some(truth.quality);
        out.oracle = Some(report);
        return Ok(out);
    }
    let event = adapt(state, window, RetrainTrigger::StaticOracleFail);
    let standard = score_window_standard(window, &state.bundle.standard_scorer())
        .map_err(|e| e.in_window(window.window_id))?;
    let mut out = scored(state, window, route, standard.unified, Provenance::Standard);
    out.quality = Some(standard.quality);
    out.oracle = Some(report);
    out.adaptation = Some(event);
    Ok(out)
}

pub fn process_window_standard(state: &mut PipelineState, window: &DataWindow<f64>) -> Result<ScoredWindow> {
    let route = activate(state, None)?;
    let standard = score_window_standard(window, &state.bundle.standard_scorer())
        .map_err(|e| e.in_window(window.window_id))?;
    let mut out = scored(state, window, route, standard.unified, Provenance::Standard);
    out.quality = Some(standard.quality);
    Ok(out)
}

/// Recomputes timeliness and skewness of every history row against new
/// references. Returns the new quality vectors and per-row deltas.
pub fn rescore_qualities(
    history: &[HistoryEntry],
    reference: &ReferenceSample<f64>,
    reference_pdf: &Pdf<f64>,
    skew_smoothing: f64,
) -> Result<(Vec<QualityVector<f64>>, Vec<DimensionDelta>)> {
    let sorted = SortedReference::new(reference);
    let mut qualities = Vec::with_capacity(history.len());
    let mut deltas = Vec::with_capacity(history.len());
    for h in history {
        let q = rescore_dynamic(&h.window, &h.quality, &sorted, reference_pdf, skew_smoothing)
            .map_err(|e| e.in_window(h.window.window_id))?;
        let (new, old) = (q.to_array(), h.quality.to_array());
        deltas.push(DimensionDelta {
            window_id: h.window.window_id,
            origin: h.origin,
            deltas: std::array::from_fn(|i| new[i] - old[i]),
        });
        qualities.push(q);
    }
    Ok((qualities, deltas))
}

/// [`rescore_qualities`] returning the updated history itself.
///
/// Unified scores are left as they were; they change on the next retrain.
pub fn rescore_history(
    history: &[HistoryEntry],
    reference: &ReferenceSample<f64>,
    reference_pdf: &Pdf<f64>,
    skew_smoothing: f64,
) -> Result<(Vec<HistoryEntry>, Vec<DimensionDelta>)> {
    let (qualities, deltas) = rescore_qualities(history, reference, reference_pdf, skew_smoothing)?;
    let updated = history
        .iter()
        .zip(qualities)
        .map(|(h, quality)| HistoryEntry { quality, ..h.clone() })
        .collect();
    Ok((updated, deltas))
}

/// Refits standardizer, PCA and regressor from scratch on `bundle`'s
/// history and stamps a new version. `bundle` is left untouched on error.
pub fn retrain(
    bundle: &ArtifactBundle,
    trigger: RetrainTrigger,
    seed: u64,
) -> Result<ArtifactBundle> {
    let mut next = bundle.clone();
    refit(&mut next, trigger, seed)?;
    Ok(next)
}

fn refit(bundle: &mut ArtifactBundle, trigger: RetrainTrigger, seed: u64) -> Result<()> {
    let qualities: Vec<QualityVector<f64>> = bundle.training_history.iter().map(|h| h.quality).collect();
    let (standardizer, pca, targets) = fit_aggregation(&qualities)?;
    let features: Vec<Vec<f64>> = bundle
        .training_history
        .iter()
        .map(|h| h.features.as_slice().to_vec())
        .collect();
    let mut model = fit_gbt(&features, &targets, &bundle.model.params, seed)?;

    let parent = bundle.version;
    let version = ModelVersion {
        version: parent.version + 1,
        trigger,
        created_at: bundle
            .training_history
            .iter()
            .rev()
            .find_map(|h| h.window.last_timestamp())
            .unwrap_or(parent.created_at),
        parent: Some(parent.version),
    };
    model.version = version.version;
    for (h, t) in bundle.training_history.iter_mut().zip(targets) {
        h.unified = t;
    }
    bundle.model = model;
    bundle.standardizer = standardizer;
    bundle.pca = pca;
    bundle.version = version;
    bundle.lineage.push(version);
    Ok(())
}

/// Rebaseline, re-score history, add the trigger window (and its mutants),
/// then retrain. On any failure the previous bundle stays in place.
fn adapt(state: &mut PipelineState, window: &DataWindow<f64>, trigger: RetrainTrigger) -> AdaptationEvent {
    let mut event = AdaptationEvent {
        window_id: window.window_id,
        trigger,
        new_version: None,
        failure: None,
        saved: None,
    };
    match adapted_bundle(state, window, trigger) {
        Ok(next) => {
            state.bundle = next;
            event.new_version = Some(state.version());
            if let Some(root) = &state.store {
                match store_save(&state.bundle, root) {
                    Ok(path) => event.saved = Some(path),
                    Err(e) => event.failure = Some(format!("saved in memory only: {e}")),
                }
            }
        }
        Err(e) => event.failure = Some(e.to_string()),
    }
    state.events.push(event.clone());
    event
}

fn adapted_bundle(state: &PipelineState, window: &DataWindow<f64>, trigger: RetrainTrigger) -> Result<ArtifactBundle> {
    let sample = pooled_tail(state.recent.iter(), state.adaptation.rebaseline_windows);
    if sample.is_empty() {
        return Err(Error::EmptySample("rebaseline windows have no present values"));
    }
    let old = &state.bundle;
    let reference = ReferenceSample::new(sample.clone())?;
    let mut detector = old.detector_state.clone();
    detector.rebaseline(&sample)?;
    let (qualities, deltas) =
        rescore_qualities(&old.training_history, &reference, &detector.reference_pdf, old.skew_smoothing)?;

    let mut next = ArtifactBundle {
        model: old.model.clone(),
        standardizer: old.standardizer.clone(),
        pca: old.pca.clone(),
        detector_state: detector,
        anomaly_detector: old.anomaly_detector.clone(),
        reference_sample: reference,
        constraints: old.constraints,
        skew_smoothing: old.skew_smoothing,
        training_history: Vec::new(),
        version: old.version,
        lineage: old.lineage.clone(),
        last_deltas: deltas,
    };
    let mut history: Vec<HistoryEntry> = old
        .training_history
        .iter()
        .zip(qualities)
        .map(|(h, quality)| HistoryEntry { quality, ..h.clone() })
        .collect();

    let mut fresh = vec![(window.clone(), HistoryOrigin::Stream)];
    let mut rng = window_rng(state.mutation.seed, window.window_id);
    for _ in 0..state.adaptation.augment_mutants {
        let kind = state.mutation.draw_kind(&mut rng);
        let (mutant, _) = mutate_window(window, kind, &state.mutation.intensity, &next.constraints, &mut rng)?;
        fresh.push((mutant, HistoryOrigin::Augmented));
    }
    {
        let inputs = next.dimension_inputs();
        for (w, origin) in fresh {
            let quality = score_all_or_sentinel(&w, &inputs).map_err(|e| e.in_window(w.window_id))?;
            history.push(HistoryEntry {
                features: extract_features(&w, &next.constraints),
                window: w,
                origin,
                quality,
                unified: 0.0,
            });
        }
    }
    if let Some(cap) = state.adaptation.history_cap {
        if history.len() > cap {
            history.drain(..history.len() - cap);
        }
    }
    next.training_history = history;
    refit(&mut next, trigger, state.seed)?;
    Ok(next)
}
