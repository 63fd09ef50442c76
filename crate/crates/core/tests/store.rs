mod common;

use common::*;
use dqscore::aggregation::score_window_standard;
use dqscore::orchestrator::*;
use dqscore::predictor::extract_features;

#[test]
fn save_load_round_trip() {
    let cfg = small_config();
    let (prepared, bundle) = developed(&cfg, &stream(&cfg, 120, 1));
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("store");
    let path = store_save(&bundle, &root).unwrap();
    assert_eq!(path, root.join("v001"));
    for f in [
        "model.json",
        "standardizer.json",
        "pca.json",
        "anomaly.json",
        "reference_sample.csv",
        "reference_pdf.json",
        "divergences.log",
        "meta.json",
    ] {
        assert!(path.join(f).is_file(), "missing {f}");
    }
    assert_eq!(std::fs::read_to_string(root.join("LATEST")).unwrap().trim(), "1");

    let loaded = store_load(&root, None).unwrap();
    assert_eq!(loaded, bundle);
    for w in &prepared.deploy {
        let f = extract_features(w, &bundle.constraints);
        assert_eq!(loaded.model.predict(f.as_slice()), bundle.model.predict(f.as_slice()));
        assert_eq!(
            score_window_standard(w, &loaded.standard_scorer()).unwrap(),
            score_window_standard(w, &bundle.standard_scorer()).unwrap()
        );
    }
}

#[test]
fn second_save_adds_a_version_and_moves_latest() {
    let cfg = small_config();
    let (_, bundle) = developed(&cfg, &stream(&cfg, 100, 2));
    let dir = tempfile::tempdir().unwrap();
    store_save(&bundle, dir.path()).unwrap();
    let next = retrain(&bundle, RetrainTrigger::DriftAdaptation, 3).unwrap();
    store_save(&next, dir.path()).unwrap();
    assert!(dir.path().join("v001").is_dir() && dir.path().join("v002").is_dir());
    assert_eq!(store_latest(dir.path()).unwrap(), 2);
    assert_eq!(store_load(dir.path(), None).unwrap().version, next.version);
    assert_eq!(store_load(dir.path(), Some(1)).unwrap(), bundle);
    // Versions are never overwritten.
    assert!(store_save(&bundle, dir.path()).is_err());
    // No temporary directories are left behind.
    let names: Vec<String> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    assert!(names.iter().all(|n| !n.starts_with('.')), "{names:?}");
}

#[test]
fn load_errors_name_the_problem() {
    let cfg = small_config();
    let (_, bundle) = developed(&cfg, &stream(&cfg, 100, 3));
    let dir = tempfile::tempdir().unwrap();
    assert!(store_load(dir.path(), Some(4)).is_err());
    store_save(&bundle, dir.path()).unwrap();
    let err = store_load(dir.path(), Some(9)).unwrap_err().to_string();
    assert!(err.contains("v009"), "{err}");

    std::fs::write(dir.path().join("v001").join("pca.json"), "{ not json").unwrap();
    let err = store_load(dir.path(), None).unwrap_err().to_string();
    assert!(err.contains("pca.json"), "{err}");

    std::fs::remove_file(dir.path().join("v001").join("divergences.log")).unwrap();
    std::fs::write(dir.path().join("v001").join("pca.json"), "{}").unwrap();
    let err = store_load(dir.path(), None).unwrap_err().to_string();
    assert!(err.contains("pca.json") || err.contains("divergences.log"), "{err}");
}

#[test]
fn pipeline_persists_new_versions() {
    let mut cfg = small_config();
    cfg.static_mode.beta = 15;
    cfg.static_mode.criterion = dqscore::predictor::OracleCriterion::Mae { max: 0.0 };
    let (prepared, bundle) = developed(&cfg, &stream(&cfg, 115, 4));
    let dir = tempfile::tempdir().unwrap();
    store_save(&bundle, dir.path()).unwrap();
    let mut state = PipelineState::new(Mode::Static, bundle, &cfg)
        .unwrap()
        .with_store(dir.path().to_path_buf());
    for w in &prepared.deploy {
        process_window(&mut state, w).unwrap();
    }
    assert_eq!(state.retrains(), 2);
    assert_eq!(store_latest(dir.path()).unwrap(), 3);
    let loaded = store_load(dir.path(), None).unwrap();
    assert_eq!(loaded.version.parent, Some(2));
    assert_eq!(loaded.last_deltas, state.bundle.last_deltas);
    assert!(loaded.lineage_is_valid());
}
