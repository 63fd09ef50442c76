//! The artifact bundle and its on-disk versioned store.
//!
//! Layout under a store root:
//!
//! ```text
//! store/
//!   LATEST                  current version number
//!   v001/
//!     model.json            boosted-tree regressor
//!     standardizer.json     z-score means/stds
//!     pca.json              first-component loadings
//!     anomaly.json          accuracy detector
//!     reference_sample.csv  timeliness reference values
//!     reference_pdf.json    reference histogram
//!     divergences.log       one divergence per line
//!     meta.json             version lineage, detector and scoring settings
//!     history.jsonl         training history (windows, scores, features)
//!     deltas.jsonl          dynamic-dimension deltas of the last re-scoring
//! ```
//!
//! Version directories are written under a temporary name and renamed into
//! place, and `LATEST` is replaced by rename, so readers never see a
//! partial bundle.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::aggregation::{PcaModel, Standardizer, StandardScorer};
use crate::dimensions::{
    AnomalyDetector, DimensionInputs, IntegrityConstraints, QualityVector, ReferenceSample,
};
use crate::drift::{read_divergence_log, write_divergence_log, DecisionRule, DriftDetectorState, Pdf};
use crate::error::{Error, Result};
use crate::predictor::{FeatureVector, GbtModel};
use crate::windowing::DataWindow;

/// Format tag written into every JSON artifact.
pub const ARTIFACT_FORMAT: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RetrainTrigger {
    Initial,
    DriftAdaptation,
    StaticOracleFail,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelVersion {
    pub version: u64,
    pub trigger: RetrainTrigger,
    /// Stream timestamp (ms) of the last reading seen when the version was made.
    pub created_at: i64,
    pub parent: Option<u64>,
}

/// Where a training-history row came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HistoryOrigin {
    Development,
    /// Standard-scored deployment window.
    Stream,
    /// Mutant of a deployment window synthesized at adaptation time.
    Augmented,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub window: DataWindow<f64>,
    pub origin: HistoryOrigin,
    pub features: FeatureVector<f64>,
    pub quality: QualityVector<f64>,
    pub unified: f64,
}

/// Per-window change of the five dimension scores after re-scoring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionDelta {
    pub window_id: u64,
    pub origin: HistoryOrigin,
    /// new minus old, in dimension order.
    pub deltas: [f64; 5],
}

/// All artifacts needed to run the deployment pipelines.
#[derive(Debug, Clone, PartialEq)]
pub struct ArtifactBundle {
    pub model: GbtModel<f64>,
    pub standardizer: Standardizer<f64>,
    pub pca: PcaModel<f64>,
    pub detector_state: DriftDetectorState<f64>,
    pub anomaly_detector: AnomalyDetector<f64>,
    pub reference_sample: ReferenceSample<f64>,
    pub constraints: IntegrityConstraints<f64>,
    pub skew_smoothing: f64,
    pub training_history: Vec<HistoryEntry>,
    pub version: ModelVersion,
    /// Every version up to and including this one, oldest first.
    pub lineage: Vec<ModelVersion>,
    pub last_deltas: Vec<DimensionDelta>,
}

impl ArtifactBundle {
    pub fn dimension_inputs(&self) -> DimensionInputs<'_, f64> {
        DimensionInputs {
            detector: &self.anomaly_detector,
            constraints: &self.constraints,
            reference: &self.reference_sample,
            reference_pdf: &self.detector_state.reference_pdf,
            skew_smoothing: self.skew_smoothing,
        }
    }

    pub fn standard_scorer(&self) -> StandardScorer<'_, f64> {
        StandardScorer {
            dimensions: self.dimension_inputs(),
            standardizer: &self.standardizer,
            pca: &self.pca,
        }
    }

    /// Checks that the lineage is strictly increasing with intact parent links
    /// back to a single `initial` version.
    pub fn lineage_is_valid(&self) -> bool {
        let l = &self.lineage;
        if l.is_empty() || l.last() != Some(&self.version) {
            return false;
        }
        let initial = l.iter().filter(|v| v.trigger == RetrainTrigger::Initial).count();
        if initial != 1 || l[0].trigger != RetrainTrigger::Initial || l[0].parent.is_some() {
            return false;
        }
        l.windows(2)
            .all(|w| w[1].version > w[0].version && w[1].parent == Some(w[0].version))
    }
}

#[derive(Serialize, Deserialize)]
struct Versioned<T> {
    format: u32,
    #[serde(flatten)]
    body: T,
}

#[derive(Serialize, Deserialize)]
struct Meta {
    format: u32,
    version: ModelVersion,
    lineage: Vec<ModelVersion>,
    constraints: IntegrityConstraints<f64>,
    skew_smoothing: f64,
    tau: f64,
    min_history: usize,
    drift_smoothing: f64,
    range_padding: f64,
    rule: DecisionRule<f64>,
    /// Standardizer and PCA are refit on every retrain.
    aggregation_refit: bool,
}

fn version_dir_name(version: u64) -> String {
    format!("v{version:03}")
}

pub fn version_dir(root: &Path, version: u64) -> PathBuf {
    root.join(version_dir_name(version))
}

fn write_file(dir: &Path, name: &str, write: impl FnOnce(&mut BufWriter<fs::File>) -> std::io::Result<()>) -> Result<()> {
    let path = dir.join(name);
    let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    let mut w = BufWriter::new(file);
    write(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(&path, e))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    write_file(dir, name, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        writeln!(w)
    })
}

fn write_jsonl<T: Serialize>(dir: &Path, name: &str, rows: &[T]) -> Result<()> {
    write_file(dir, name, |w| {
        for r in rows {
            serde_json::to_writer(&mut *w, r)?;
            writeln!(w)?;
        }
        Ok(())
    })
}

fn read_json<T: DeserializeOwned>(dir: &Path, name: &str) -> Result<T> {
    let path = dir.join(name);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::artifact(&path, e))
}

fn read_jsonl<T: DeserializeOwned>(dir: &Path, name: &str) -> Result<Vec<T>> {
    let path = dir.join(name);
    let file = fs::File::open(&path).map_err(|e| Error::io(&path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(&path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| Error::artifact(&path, format!("line {}: {e}", i + 1)))?,
        );
    }
    Ok(out)
}

fn versioned<T>(body: T) -> Versioned<T> {
    Versioned {
        format: ARTIFACT_FORMAT,
        body,
    }
}

fn write_bundle_files(dir: &Path, b: &ArtifactBundle) -> Result<()> {
    write_json(dir, "model.json", &versioned(&b.model))?;
    write_json(dir, "standardizer.json", &versioned(&b.standardizer))?;
    write_json(dir, "pca.json", &versioned(&b.pca))?;
    write_json(dir, "anomaly.json", &versioned(&b.anomaly_detector))?;
    write_json(dir, "reference_pdf.json", &versioned(&b.detector_state.reference_pdf))?;
    write_file(dir, "reference_sample.csv", |w| {
        writeln!(w, "value")?;
        for v in b.reference_sample.values() {
            writeln!(w, "{v}")?;
        }
        Ok(())
    })?;
    write_file(dir, "divergences.log", |w| {
        write_divergence_log(&b.detector_state.divergence_history, w)
    })?;
    let d = &b.detector_state;
    let meta = Meta {
        format: ARTIFACT_FORMAT,
        version: b.version,
        lineage: b.lineage.clone(),
        constraints: b.constraints,
        skew_smoothing: b.skew_smoothing,
        tau: d.tau,
        min_history: d.min_history,
        drift_smoothing: d.smoothing,
        range_padding: d.range_padding,
        rule: d.rule,
        aggregation_refit: true,
    };
    write_json(dir, "meta.json", &meta)?;
    write_jsonl(dir, "history.jsonl", &b.training_history)?;
    write_jsonl(dir, "deltas.jsonl", &b.last_deltas)?;
    Ok(())
}

fn read_versioned<T: DeserializeOwned>(dir: &Path, name: &str) -> Result<T> {
    let v: Versioned<T> = read_json(dir, name)?;
    if v.format != ARTIFACT_FORMAT {
        return Err(Error::artifact(dir.join(name), format!("unsupported format {}", v.format)));
    }
    Ok(v.body)
}

/// Writes the bundle as a new version directory and points `LATEST` at it.
pub fn store_save(bundle: &ArtifactBundle, root: &Path) -> Result<PathBuf> {
    fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
    let version = bundle.version.version;
    let target = version_dir(root, version);
    if target.exists() {
        return Err(Error::artifact(&target, "version already exists in store"));
    }
    let tmp = root.join(format!(".tmp-{}-{}", version_dir_name(version), std::process::id()));
    if tmp.exists() {
        fs::remove_dir_all(&tmp).map_err(|e| Error::io(&tmp, e))?;
    }
    fs::create_dir(&tmp).map_err(|e| Error::io(&tmp, e))?;
    if let Err(e) = write_bundle_files(&tmp, bundle) {
        let _ = fs::remove_dir_all(&tmp);
        return Err(e);
    }
    fs::rename(&tmp, &target).map_err(|e| Error::io(&target, e))?;

    let latest_tmp = root.join(format!(".LATEST.tmp-{}", std::process::id()));
    fs::write(&latest_tmp, format!("{version}\n")).map_err(|e| Error::io(&latest_tmp, e))?;
    let latest = root.join("LATEST");
    fs::rename(&latest_tmp, &latest).map_err(|e| Error::io(&latest, e))?;
    Ok(target)
}

/// Version named by `LATEST`.
pub fn store_latest(root: &Path) -> Result<u64> {
    let path = root.join("LATEST");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    text.trim()
        .parse()
        .map_err(|e| Error::artifact(&path, format!("bad version number: {e}")))
}

/// Loads `version`, or the `LATEST` one when `None`.
pub fn store_load(root: &Path, version: Option<u64>) -> Result<ArtifactBundle> {
    let version = match version {
        Some(v) => v,
        None => store_latest(root)?,
    };
    let dir = version_dir(root, version);
    if !dir.is_dir() {
        return Err(Error::artifact(&dir, format!("version {version} not found")));
    }
    let meta: Meta = read_json(&dir, "meta.json")?;
    if meta.format != ARTIFACT_FORMAT {
        return Err(Error::artifact(dir.join("meta.json"), "unsupported format"));
    }
    let reference_pdf: Pdf<f64> = read_versioned(&dir, "reference_pdf.json")?;
    // Re-validate the density rather than trusting the file.
    let reference_pdf = Pdf::from_parts(reference_pdf.bin_edges().to_vec(), reference_pdf.probs().to_vec())
        .map_err(|e| Error::artifact(dir.join("reference_pdf.json"), e))?;

    let sample_path = dir.join("reference_sample.csv");
    let file = fs::File::open(&sample_path).map_err(|e| Error::io(&sample_path, e))?;
    let mut values = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(&sample_path, e))?;
        if i == 0 || line.trim().is_empty() {
            continue;
        }
        values.push(
            line.trim()
                .parse::<f64>()
                .map_err(|e| Error::artifact(&sample_path, format!("line {}: {e}", i + 1)))?,
        );
    }
    let reference_sample = ReferenceSample::new(values).map_err(|e| Error::artifact(&sample_path, e))?;

    let log_path = dir.join("divergences.log");
    let file = fs::File::open(&log_path).map_err(|e| Error::io(&log_path, e))?;
    let divergence_history =
        read_divergence_log(BufReader::new(file)).map_err(|e| Error::artifact(&log_path, e))?;

    let detector_state = DriftDetectorState {
        reference_pdf,
        divergence_history,
        tau: meta.tau,
        min_history: meta.min_history,
        smoothing: meta.drift_smoothing,
        range_padding: meta.range_padding,
        rule: meta.rule,
    };
    Ok(ArtifactBundle {
        model: read_versioned(&dir, "model.json")?,
        standardizer: read_versioned(&dir, "standardizer.json")?,
        pca: read_versioned(&dir, "pca.json")?,
        detector_state,
        anomaly_detector: read_versioned(&dir, "anomaly.json")?,
        reference_sample,
        constraints: meta.constraints,
        skew_smoothing: meta.skew_smoothing,
        training_history: read_jsonl(&dir, "history.jsonl")?,
        version: meta.version,
        lineage: meta.lineage,
        last_deltas: read_jsonl(&dir, "deltas.jsonl")?,
    })
}
