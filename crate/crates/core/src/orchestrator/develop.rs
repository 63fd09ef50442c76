//! Development phase: turn a training stream into the first artifact bundle.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::aggregation::fit_aggregation;
use crate::config::EngineConfig;
use crate::dimensions::{
    fit_anomaly_detector, score_all_or_sentinel, AnomalyDetector, DimensionInputs, QualityVector,
    ReferenceSample,
};
use crate::drift::{estimate_pdf, padded_range, DecisionRule, DriftDetectorState};
use crate::error::{Error, Result};
use crate::mutation::{apply_mutation_plan, FaultRecord};
use crate::predictor::{extract_features, fit_gbt, oracle_check, FeatureVector, GbtParams, OracleReport};
use crate::windowing::DataWindow;

use super::bundle::{ArtifactBundle, HistoryEntry, HistoryOrigin, ModelVersion, RetrainTrigger};

/// Reference artifacts derived from clean data.
#[derive(Debug, Clone, PartialEq)]
pub struct References {
    pub anomaly_detector: AnomalyDetector<f64>,
    pub reference_sample: ReferenceSample<f64>,
    pub detector_state: DriftDetectorState<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DevelopmentOutcome {
    pub bundle: ArtifactBundle,
    /// Held-out evaluation of the shipped model.
    pub oracle: OracleReport,
    /// Fit attempts used.
    pub iterations: usize,
    pub ledger: Vec<FaultRecord>,
}

/// Evenly strided subsample of at most `size` values, order kept.
pub fn stride_subsample(values: &[f64], size: usize) -> Vec<f64> {
    if values.len() <= size {
        return values.to_vec();
    }
    (0..size).map(|i| values[i * values.len() / size]).collect()
}

/// Present values of the last `k` windows, oldest first.
pub(crate) fn pooled_tail<'a, I>(windows: I, k: usize) -> Vec<f64>
where
    I: DoubleEndedIterator<Item = &'a DataWindow<f64>>,
{
    let mut tail: Vec<&DataWindow<f64>> = windows.rev().take(k).collect();
    tail.reverse();
    tail.iter().flat_map(|w| w.present_values()).collect()
}

/// Builds the drift detector whose reference density comes from `sample`.
pub fn new_detector(sample: &[f64], cfg: &EngineConfig) -> Result<DriftDetectorState<f64>> {
    let d = &cfg.drift;
    let range = padded_range(sample, d.range_padding)?;
    let pdf = estimate_pdf(sample, d.bins, range, 0.0)?;
    let rule = match d.zeta {
        Some(zeta) => DecisionRule::FixedThreshold { zeta },
        None => DecisionRule::PValue,
    };
    Ok(DriftDetectorState::new(pdf, d.tau, d.min_history)?
        .with_smoothing(d.smoothing)
        .with_range_padding(d.range_padding)
        .with_rule(rule))
}

/// Fits the anomaly detector, timeliness reference and drift detector from
/// clean windows.
///
/// The reference density pools the last `adaptation.rebaseline_windows`
/// windows, the same amount of data a later rebaseline sees, so
/// divergences before and after an adaptation are comparable. Every other
/// window is observed once to seed the divergence history.
pub fn build_references(clean: &[DataWindow<f64>], cfg: &EngineConfig) -> Result<References> {
    let values: Vec<f64> = clean.iter().flat_map(|w| w.present_values()).collect();
    if values.is_empty() {
        return Err(Error::EmptySample("development stream has no present values"));
    }
    let anomaly_detector = fit_anomaly_detector(&values, cfg.anomaly_cutoff)?;
    let reference_sample = ReferenceSample::new(stride_subsample(&values, cfg.reference_sample_size))?;

    let k = cfg.adaptation.rebaseline_windows.min(clean.len());
    let reference_values = pooled_tail(clean.iter(), k);
    if reference_values.is_empty() {
        return Err(Error::EmptySample("reference windows have no present values"));
    }
    let mut detector_state = new_detector(&reference_values, cfg)?;
    for w in &clean[..clean.len() - k] {
        detector_state.observe(w);
    }
    Ok(References {
        anomaly_detector,
        reference_sample,
        detector_state,
    })
}

fn split_holdout(n: usize, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let hold = ((n as f64 * fraction).round() as usize).clamp(2, n - 2);
    let mut holdout = idx[..hold].to_vec();
    let mut train = idx[hold..].to_vec();
    holdout.sort_unstable();
    train.sort_unstable();
    (train, holdout)
}

/// Runs the development phase on a training stream.
///
/// Windows are mutated, scored on the standard path (the labels), and the
/// regressor is fitted on a seeded train split. Whenever the held-out
/// oracle misses, the tree count doubles and the fit is repeated.
pub fn develop_phase(training: &[DataWindow<f64>], cfg: &EngineConfig) -> Result<DevelopmentOutcome> {
    cfg.validate()?;
    if training.len() < 4 {
        return Err(Error::DevelopmentFailed {
            iterations: 0,
            reason: format!("need at least 4 training windows, got {}", training.len()),
        });
    }
    let constraints = cfg.constraints()?;
    let (mutated, ledger) = apply_mutation_plan(training, &cfg.mutation, &constraints)?;
    let refs = build_references(training, cfg)?;

    let inputs = DimensionInputs {
        detector: &refs.anomaly_detector,
        constraints: &constraints,
        reference: &refs.reference_sample,
        reference_pdf: &refs.detector_state.reference_pdf,
        skew_smoothing: cfg.drift.skew_smoothing,
    };
    let qualities: Vec<QualityVector<f64>> = mutated
        .iter()
        .map(|w| score_all_or_sentinel(w, &inputs).map_err(|e| e.in_window(w.window_id)))
        .collect::<Result<_>>()?;
    let (standardizer, pca, targets) = fit_aggregation(&qualities)?;
    let features: Vec<FeatureVector<f64>> = mutated.iter().map(|w| extract_features(w, &constraints)).collect();

    let (train, holdout) = split_holdout(mutated.len(), cfg.dev_oracle.holdout_fraction, cfg.seed);
    let rows = |idx: &[usize]| -> (Vec<Vec<f64>>, Vec<f64>) {
        idx.iter()
            .map(|&i| (features[i].as_slice().to_vec(), targets[i]))
            .unzip()
    };
    let (train_x, train_y) = rows(&train);
    let (hold_x, hold_y) = rows(&holdout);

    let mut params: GbtParams = cfg.gbt;
    let mut last = None;
    for iteration in 1..=cfg.dev_oracle.max_iterations {
        let mut model = fit_gbt(&train_x, &train_y, &params, cfg.seed)?;
        let predicted: Vec<f64> = hold_x.iter().map(|x| model.predict(x)).collect();
        let report = oracle_check(&hold_y, &predicted, cfg.dev_oracle.criterion);
        if report.pass {
            model.version = 1;
            let version = ModelVersion {
                version: 1,
                trigger: RetrainTrigger::Initial,
                created_at: training.iter().rev().find_map(|w| w.last_timestamp()).unwrap_or(0),
                parent: None,
            };
            let training_history = mutated
                .into_iter()
                .zip(features)
                .zip(qualities)
                .zip(targets)
                .map(|(((window, features), quality), unified)| HistoryEntry {
                    window,
                    origin: HistoryOrigin::Development,
                    features,
                    quality,
                    unified,
                })
                .collect();
            let bundle = ArtifactBundle {
                model,
                standardizer,
                pca,
                detector_state: refs.detector_state,
                anomaly_detector: refs.anomaly_detector,
                reference_sample: refs.reference_sample,
                constraints,
                skew_smoothing: cfg.drift.skew_smoothing,
                training_history,
                version,
                lineage: vec![version],
                last_deltas: Vec::new(),
            };
            return Ok(DevelopmentOutcome {
                bundle,
                oracle: report,
                iterations: iteration,
                ledger,
            });
        }
        last = Some(report);
        params.n_trees *= 2;
    }
    let report = last.expect("at least one iteration");
    Err(Error::DevelopmentFailed {
        iterations: cfg.dev_oracle.max_iterations,
        reason: format!(
            "held-out oracle {:?} not met: mae {:?}, r2 {:?}{}",
            cfg.dev_oracle.criterion,
            report.mae,
            report.r2,
            report.reason.map(|r| format!(" ({r})")).unwrap_or_default()
        ),
    })
}
