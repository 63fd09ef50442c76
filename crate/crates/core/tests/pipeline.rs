mod common;

use common::*;
use dqscore::aggregation::score_window_standard;
use dqscore::drift::DriftVerdict;
use dqscore::orchestrator::*;

fn verdict(drifted: bool) -> DriftVerdict<f64> {
    DriftVerdict {
        divergence: Some(0.1),
        p_value: Some(if drifted { 0.01 } else { 0.5 }),
        drifted,
        warmed_up: true,
    }
}

#[test]
fn activator_routes() {
    let cfg = small_config();
    let (_, bundle) = developed(&cfg, &stream(&cfg, 100, 1));

    let adaptive = PipelineState::new(Mode::Adaptive, bundle.clone(), &cfg).unwrap();
    assert_eq!(activate(&adaptive, Some(&verdict(false))).unwrap(), Route::MlScore);
    assert_eq!(activate(&adaptive, Some(&verdict(true))).unwrap(), Route::AdaptThenScore);
    assert!(matches!(activate(&adaptive, None), Err(dqscore::Error::Routing(_))));

    let mut stat = PipelineState::new(Mode::Static, bundle.clone(), &cfg).unwrap();
    stat.beta = 3;
    assert_eq!(activate(&stat, None).unwrap(), Route::MlScore);
    stat.chunk_counter = 2;
    assert_eq!(activate(&stat, None).unwrap(), Route::StandardEvaluate);

    let standard = PipelineState::new(Mode::Standard, bundle, &cfg).unwrap();
    assert_eq!(activate(&standard, Some(&verdict(true))).unwrap(), Route::StandardScore);
}

#[test]
fn development_bundle_is_complete_and_deterministic() {
    let cfg = small_config();
    let prepared = dqscore::harness::prepare(&cfg, &stream(&cfg, 100, 3)).unwrap();
    let a = develop_phase(&prepared.train, &cfg).unwrap();
    let b = develop_phase(&prepared.train, &cfg).unwrap();
    assert_eq!(a.bundle, b.bundle);
    assert_eq!(a.bundle.model.to_json(), b.bundle.model.to_json());
    assert!(a.oracle.pass && a.oracle.r2.unwrap() >= 0.9);
    assert_eq!(a.bundle.version.version, 1);
    assert_eq!(a.bundle.version.trigger, RetrainTrigger::Initial);
    assert!(a.bundle.lineage_is_valid());
    assert_eq!(a.bundle.training_history.len(), cfg.experiment.train_windows);
    // Divergence history is seeded from the clean windows outside the reference.
    assert_eq!(
        a.bundle.detector_state.divergence_history.len(),
        cfg.experiment.train_windows - cfg.adaptation.rebaseline_windows
    );
}

#[test]
fn development_fails_when_oracle_is_unreachable() {
    let mut cfg = small_config();
    cfg.dev_oracle.criterion = dqscore::predictor::OracleCriterion::Mae { max: 0.0 };
    cfg.dev_oracle.max_iterations = 2;
    cfg.gbt.n_trees = 2;
    let prepared = dqscore::harness::prepare(&cfg, &stream(&cfg, 100, 3)).unwrap();
    match develop_phase(&prepared.train, &cfg) {
        Err(dqscore::Error::DevelopmentFailed { iterations, reason }) => {
            assert_eq!(iterations, 2);
            assert!(reason.contains("mae"));
        }
        other => panic!("expected development failure, got {other:?}"),
    }
}

#[test]
fn standard_mode_matches_aggregation_and_never_retrains() {
    let cfg = small_config();
    let (prepared, bundle) = developed(&cfg, &shifted_stream(&cfg, 160, 120, 8.0, 2));
    let mut state = PipelineState::new(Mode::Standard, bundle.clone(), &cfg).unwrap();
    for w in &prepared.deploy {
        let out = process_window(&mut state, w).unwrap();
        let direct = score_window_standard(w, &bundle.standard_scorer()).unwrap();
        assert_eq!(out.unified_score, direct.unified);
        assert_eq!(out.quality, Some(direct.quality));
        assert_eq!(out.provenance, Provenance::Standard);
        assert_eq!(out.model_version, 1);
    }
}

#[test]
fn modes_agree_without_drift_or_oracle_failures() {
    let mut cfg = small_config();
    cfg.drift.tau = 1e-6; // p-values never get this small with this history
    cfg.static_mode.criterion = dqscore::predictor::OracleCriterion::Mae { max: 1e9 };
    cfg.static_mode.beta = 7;
    let (prepared, bundle) = developed(&cfg, &stream(&cfg, 150, 4));
    let mut adaptive = PipelineState::new(Mode::Adaptive, bundle.clone(), &cfg).unwrap();
    let mut stat = PipelineState::new(Mode::Static, bundle, &cfg).unwrap();
    for w in &prepared.deploy {
        let a = process_window(&mut adaptive, w).unwrap();
        let s = process_window(&mut stat, w).unwrap();
        assert_eq!(a.provenance, Provenance::Ml);
        assert_eq!(s.provenance, Provenance::Ml);
        assert_eq!(a.unified_score, s.unified_score);
    }
    assert_eq!(adaptive.version(), 1);
    assert_eq!(stat.version(), 1);
    assert_eq!(stat.evaluations, prepared.deploy.len() / 7);
}

#[test]
fn drift_triggers_exactly_one_retrain_per_detection() {
    let mut cfg = small_config();
    cfg.drift.tau = 0.05;
    let (prepared, bundle) = developed(&cfg, &shifted_stream(&cfg, 200, 130, 10.0, 5));
    let mut state = PipelineState::new(Mode::Adaptive, bundle, &cfg).unwrap();
    let mut detections = 0;
    for w in &prepared.deploy {
        let before = state.version();
        let out = process_window(&mut state, w).unwrap();
        if out.drifted {
            detections += 1;
            assert_eq!(out.provenance, Provenance::Standard);
            assert!(out.quality.is_some());
            assert_eq!(state.version(), before + 1);
            assert_eq!(out.model_version, before + 1);
            assert_eq!(out.adaptation.as_ref().unwrap().trigger, RetrainTrigger::DriftAdaptation);
            // The emitted score is the standard score under the new bundle.
            let direct = dqscore::aggregation::score_window_standard(w, &state.bundle.standard_scorer()).unwrap();
            assert_eq!(out.unified_score, direct.unified);
        } else {
            assert_eq!(out.provenance, Provenance::Ml);
            assert_eq!(state.version(), before);
        }
    }
    assert!(detections >= 1);
    assert_eq!(state.retrains(), detections);
    assert!(state.bundle.lineage_is_valid());
    assert_eq!(state.bundle.lineage.len(), detections + 1);
}

#[test]
fn static_mode_counts_evaluations_and_retrains_on_failure() {
    let mut cfg = small_config();
    cfg.static_mode.beta = 10;
    cfg.static_mode.criterion = dqscore::predictor::OracleCriterion::Mae { max: 0.0 };
    let (prepared, bundle) = developed(&cfg, &stream(&cfg, 125, 6));
    let n = prepared.deploy.len();
    let mut state = PipelineState::new(Mode::Static, bundle, &cfg).unwrap();
    for (i, w) in prepared.deploy.iter().enumerate() {
        let out = process_window(&mut state, w).unwrap();
        assert!(state.chunk_counter <= state.beta);
        let checkpoint = (i + 1) % 10 == 0;
        assert_eq!(out.oracle.is_some(), checkpoint);
        if checkpoint {
            assert!(!out.oracle.as_ref().unwrap().pass);
            assert_eq!(out.adaptation.as_ref().unwrap().trigger, RetrainTrigger::StaticOracleFail);
        }
    }
    assert_eq!(state.evaluations, n / 10);
    assert_eq!(state.retrains(), n / 10);
    assert_eq!(state.version(), 1 + (n / 10) as u64);
    assert!(state.bundle.lineage_is_valid());
}

#[test]
fn retrain_is_deterministic_and_chains_versions() {
    let cfg = small_config();
    let (_, bundle) = developed(&cfg, &stream(&cfg, 100, 7));
    let a = retrain(&bundle, RetrainTrigger::StaticOracleFail, 11).unwrap();
    let b = retrain(&bundle, RetrainTrigger::StaticOracleFail, 11).unwrap();
    assert_eq!(a.model.trees, b.model.trees);
    assert_eq!(a.version.version, 2);
    assert_eq!(a.version.parent, Some(1));
    assert_eq!(a.version.trigger, RetrainTrigger::StaticOracleFail);
    let c = retrain(&a, RetrainTrigger::DriftAdaptation, 11).unwrap();
    assert_eq!(c.model.trees, a.model.trees);
    assert_eq!(c.version.version, 3);
    assert!(c.lineage_is_valid());
    assert_eq!(c.lineage.iter().map(|v| v.version).collect::<Vec<_>>(), vec![1, 2, 3]);
}

#[test]
fn retrain_failure_keeps_previous_bundle() {
    let mut cfg = small_config();
    cfg.drift.tau = 0.05;
    let (prepared, mut bundle) = developed(&cfg, &shifted_stream(&cfg, 200, 130, 10.0, 5));
    // A one-row history cannot be fitted.
    bundle.training_history.truncate(0);
    let mut state = PipelineState::new(Mode::Adaptive, bundle, &cfg).unwrap();
    let mut failures = 0;
    for w in &prepared.deploy {
        let out = process_window(&mut state, w).unwrap();
        if let Some(ev) = out.adaptation {
            assert!(ev.new_version.is_none());
            assert!(ev.failure.is_some());
            failures += 1;
        }
        assert_eq!(state.version(), 1);
    }
    assert!(failures >= 1);
    assert_eq!(state.retrains(), 0);
}

#[test]
fn rescore_history_touches_only_dynamic_dimensions() {
    let cfg = small_config();
    let (prepared, bundle) = developed(&cfg, &stream(&cfg, 100, 8));
    let h = &bundle.training_history;

    let (same, deltas) = rescore_history(
        h,
        &bundle.reference_sample,
        &bundle.detector_state.reference_pdf,
        bundle.skew_smoothing,
    )
    .unwrap();
    assert!(deltas.iter().all(|d| d.deltas == [0.0; 5]));
    assert_eq!(same, *h);

    let shifted: Vec<f64> = prepared.deploy[0].present_values().iter().map(|v| v + 6.0).collect();
    let mut det = bundle.detector_state.clone();
    det.rebaseline(&shifted).unwrap();
    let reference = dqscore::ReferenceSample::new(shifted).unwrap();
    let (_, deltas) = rescore_history(h, &reference, &det.reference_pdf, bundle.skew_smoothing).unwrap();
    assert!(deltas.iter().all(|d| d.deltas[0] == 0.0 && d.deltas[1] == 0.0 && d.deltas[2] == 0.0));
    assert!(deltas.iter().any(|d| d.deltas[3] != 0.0));
    assert!(deltas.iter().any(|d| d.deltas[4] != 0.0));
}

#[test]
fn score_line_has_output_fields() {
    let cfg = small_config();
    let (prepared, bundle) = developed(&cfg, &stream(&cfg, 100, 9));
    let mut state = PipelineState::new(Mode::Adaptive, bundle, &cfg).unwrap();
    let out = process_window(&mut state, &prepared.deploy[0]).unwrap();
    let json: serde_json::Value = serde_json::to_value(out.line()).unwrap();
    let mut keys: Vec<&str> = json.as_object().unwrap().keys().map(|k| k.as_str()).collect();
    keys.sort_unstable();
    assert_eq!(keys, ["drifted", "model_version", "p_value", "provenance", "score", "window_id"]);
    assert_eq!(json["provenance"], "ml");
}
