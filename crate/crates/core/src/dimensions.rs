//! Per-window data-quality dimension scores.
//!
//! Accuracy and completeness are defect fractions (higher is worse),
//! consistency is a conformance fraction (higher is better), timeliness is
//! the two-sample KS statistic against a reference sample and skewness the
//! JSD against the reference density (both higher is worse).
//! [`QualityVector::ORIENTATION`] carries these directions explicitly.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::drift::{jsd, Pdf};
use crate::error::{Error, Result};
use crate::scalar::{median_sorted, sorted, total_cmp, Scalar};
use crate::windowing::DataWindow;

/// Consistency scale for the median absolute deviation of a normal sample.
pub const MAD_SCALE: f64 = 1.4826;

pub const DEFAULT_CUTOFF: f64 = 3.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dimension {
    Accuracy,
    Completeness,
    Consistency,
    Timeliness,
    Skewness,
}

impl Dimension {
    pub const ALL: [Dimension; 5] = [
        Dimension::Accuracy,
        Dimension::Completeness,
        Dimension::Consistency,
        Dimension::Timeliness,
        Dimension::Skewness,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Dimensions whose score depends on a reference that follows process conditions.
    pub fn is_dynamic(self) -> bool {
        matches!(self, Dimension::Timeliness | Dimension::Skewness)
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Dimension::Accuracy => "accuracy",
            Dimension::Completeness => "completeness",
            Dimension::Consistency => "consistency",
            Dimension::Timeliness => "timeliness",
            Dimension::Skewness => "skewness",
        };
        f.write_str(s)
    }
}

/// Inclusive value domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct IntegrityConstraints<T: Scalar> {
    pub min_value: T,
    pub max_value: T,
}

impl<T: Scalar> IntegrityConstraints<T> {
    pub fn new(min_value: T, max_value: T) -> Result<Self> {
        if !(min_value <= max_value) {
            return Err(Error::Config(format!(
                "integrity constraints need min <= max, got [{min_value}, {max_value}]"
            )));
        }
        Ok(Self { min_value, max_value })
    }

    pub fn contains(&self, x: T) -> bool {
        self.min_value <= x && x <= self.max_value
    }
}

/// Pluggable point anomaly rule used by the accuracy score.
pub trait AnomalyScorer<T: Scalar> {
    fn is_anomalous(&self, x: T) -> bool;
}

/// Robust z-score detector: `|x - median| / (1.4826 * MAD) > cutoff`.
///
/// With `ref_mad == 0` every value different from the median is anomalous.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct AnomalyDetector<T: Scalar> {
    pub ref_median: T,
    pub ref_mad: T,
    pub cutoff: T,
}

impl<T: Scalar> AnomalyDetector<T> {
    pub fn robust_z(&self, x: T) -> T {
        let dev = (x - self.ref_median).abs();
        if self.ref_mad > T::zero() {
            dev / (T::lit(MAD_SCALE) * self.ref_mad)
        } else if dev > T::zero() {
            T::infinity()
        } else {
            T::zero()
        }
    }
}

impl<T: Scalar> AnomalyScorer<T> for AnomalyDetector<T> {
    fn is_anomalous(&self, x: T) -> bool {
        self.robust_z(x) > self.cutoff
    }
}

pub fn fit_anomaly_detector<T: Scalar>(reference: &[T], cutoff: T) -> Result<AnomalyDetector<T>> {
    if reference.is_empty() {
        return Err(Error::Config("anomaly detector needs a non-empty reference".into()));
    }
    if !(cutoff > T::zero()) {
        return Err(Error::Config(format!("anomaly cutoff must be > 0, got {cutoff}")));
    }
    let s = sorted(reference);
    let ref_median = median_sorted(&s);
    let mut dev: Vec<T> = s.iter().map(|x| (*x - ref_median).abs()).collect();
    dev.sort_by(total_cmp);
    Ok(AnomalyDetector {
        ref_median,
        ref_mad: median_sorted(&dev),
        cutoff,
    })
}

/// Historical values kept for the timeliness test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ReferenceSample<T: Scalar> {
    values: Vec<T>,
}

impl<T: Scalar> ReferenceSample<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptySample("reference sample"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("reference sample has non-finite values".into()));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }
}

/// Raw scores of the five dimensions for one window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct QualityVector<T: Scalar> {
    pub accuracy: T,
    pub completeness: T,
    pub consistency: T,
    pub timeliness: T,
    pub skewness: T,
}

impl<T: Scalar> QualityVector<T> {
    /// Higher-is-better flag per dimension, in [`Dimension::ALL`] order.
    pub const ORIENTATION: [bool; 5] = [false, false, true, false, false];

    /// Score of a window with no present values: maximally defective.
    pub fn sentinel(completeness: T, consistency: T) -> Self {
        Self {
            accuracy: T::zero(),
            completeness,
            consistency,
            timeliness: T::one(),
            skewness: T::one(),
        }
    }

    pub fn to_array(&self) -> [T; 5] {
        [
            self.accuracy,
            self.completeness,
            self.consistency,
            self.timeliness,
            self.skewness,
        ]
    }

    pub fn from_array(a: [T; 5]) -> Self {
        Self {
            accuracy: a[0],
            completeness: a[1],
            consistency: a[2],
            timeliness: a[3],
            skewness: a[4],
        }
    }

    pub fn get(&self, d: Dimension) -> T {
        self.to_array()[d.index()]
    }

    pub fn in_unit_range(&self) -> bool {
        self.to_array().iter().all(|v| *v >= T::zero() && *v <= T::one())
    }
}

fn fraction<T: Scalar>(count: usize, n: usize) -> T {
    if n == 0 {
        T::zero()
    } else {
        T::from_count(count) / T::from_count(n)
    }
}

/// NAV / N. Missing readings are never anomalous.
pub fn score_accuracy<T: Scalar, D: AnomalyScorer<T> + ?Sized>(window: &DataWindow<T>, detector: &D) -> T {
    let anomalous = window
        .readings
        .iter()
        .filter_map(|r| r.value)
        .filter(|x| detector.is_anomalous(*x))
        .count();
    fraction(anomalous, window.len())
}

/// NNV / N.
pub fn score_completeness<T: Scalar>(window: &DataWindow<T>) -> T {
    let missing = window.readings.iter().filter(|r| r.value.is_none()).count();
    fraction(missing, window.len())
}

/// NCV / N. Missing readings are inconsistent.
pub fn score_consistency<T: Scalar>(window: &DataWindow<T>, constraints: &IntegrityConstraints<T>) -> T {
    let consistent = window
        .readings
        .iter()
        .filter_map(|r| r.value)
        .filter(|x| constraints.contains(*x))
        .count();
    fraction(consistent, window.len())
}

/// Exact two-sample Kolmogorov-Smirnov statistic `max_z |F1(z) - F2(z)|`.
pub fn ks_statistic<T: Scalar>(x: &[T], y: &[T]) -> Result<T> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::EmptySample("KS statistic needs two non-empty samples"));
    }
    Ok(ks_statistic_sorted(&sorted(x), &sorted(y)))
}

/// [`ks_statistic`] on inputs already sorted ascending (both non-empty).
pub fn ks_statistic_sorted<T: Scalar>(xs: &[T], ys: &[T]) -> T {
    let (n, m) = (T::from_count(xs.len()), T::from_count(ys.len()));
    let (mut i, mut j) = (0usize, 0usize);
    let mut best = T::zero();
    while i < xs.len() || j < ys.len() {
        // Next distinct point of the combined sample.
        let z = match (xs.get(i), ys.get(j)) {
            (Some(a), Some(b)) => {
                if total_cmp(a, b).is_le() {
                    *a
                } else {
                    *b
                }
            }
            (Some(a), None) => *a,
            (None, Some(b)) => *b,
            (None, None) => unreachable!(),
        };
        while i < xs.len() && total_cmp(&xs[i], &z).is_le() {
            i += 1;
        }
        while j < ys.len() && total_cmp(&ys[j], &z).is_le() {
            j += 1;
        }
        let diff = (T::from_count(i) / n - T::from_count(j) / m).abs();
        if diff > best {
            best = diff;
        }
    }
    best
}

pub fn score_timeliness<T: Scalar>(window: &DataWindow<T>, reference: &ReferenceSample<T>) -> Result<T> {
    let present = window.present_values();
    if present.is_empty() {
        return Err(undefined(Dimension::Timeliness, window));
    }
    ks_statistic(&present, reference.values())
}

/// JSD between the reference density and the window's density on the same grid.
pub fn score_skewness<T: Scalar>(window: &DataWindow<T>, reference_pdf: &Pdf<T>, smoothing: T) -> Result<T> {
    let present = window.present_values();
    if present.is_empty() {
        return Err(undefined(Dimension::Skewness, window));
    }
    let current = reference_pdf.estimate_like(&present, smoothing)?;
    jsd(reference_pdf, &current)
}

fn undefined<T: Scalar>(dimension: Dimension, window: &DataWindow<T>) -> Error {
    Error::Dimension {
        dimension,
        window_id: window.window_id,
        reason: "window has no present values".into(),
    }
}

/// Everything the five scorers read.
#[derive(Debug, Clone, Copy)]
pub struct DimensionInputs<'a, T: Scalar> {
    pub detector: &'a AnomalyDetector<T>,
    pub constraints: &'a IntegrityConstraints<T>,
    pub reference: &'a ReferenceSample<T>,
    pub reference_pdf: &'a Pdf<T>,
    pub skew_smoothing: T,
}

pub fn score_all<T: Scalar>(window: &DataWindow<T>, inputs: &DimensionInputs<'_, T>) -> Result<QualityVector<T>> {
    let name = |dimension: Dimension| {
        move |e: Error| match e {
            e @ Error::Dimension { .. } => e,
            other => Error::Dimension {
                dimension,
                window_id: window.window_id,
                reason: other.to_string(),
            },
        }
    };
    Ok(QualityVector {
        accuracy: score_accuracy(window, inputs.detector),
        completeness: score_completeness(window),
        consistency: score_consistency(window, inputs.constraints),
        timeliness: score_timeliness(window, inputs.reference).map_err(name(Dimension::Timeliness))?,
        skewness: score_skewness(window, inputs.reference_pdf, inputs.skew_smoothing)
            .map_err(name(Dimension::Skewness))?,
    })
}

/// [`score_all`], falling back to [`QualityVector::sentinel`] when the
/// window has no present values.
pub fn score_all_or_sentinel<T: Scalar>(window: &DataWindow<T>, inputs: &DimensionInputs<'_, T>) -> Result<QualityVector<T>> {
    if window.readings.iter().all(|r| r.value.is_none()) {
        return Ok(QualityVector::sentinel(
            score_completeness(window),
            score_consistency(window, inputs.constraints),
        ));
    }
    score_all(window, inputs)
}

/// Reference values sorted once, for scoring many windows against them.
#[derive(Debug, Clone, PartialEq)]
pub struct SortedReference<T: Scalar>(Vec<T>);

impl<T: Scalar> SortedReference<T> {
    pub fn new(reference: &ReferenceSample<T>) -> Self {
        Self(sorted(reference.values()))
    }
}

/// Recomputes only timeliness and skewness against new references.
pub fn rescore_dynamic<T: Scalar>(
    window: &DataWindow<T>,
    previous: &QualityVector<T>,
    reference: &SortedReference<T>,
    reference_pdf: &Pdf<T>,
    skew_smoothing: T,
) -> Result<QualityVector<T>> {
    let mut next = *previous;
    let present = window.present_values();
    if present.is_empty() {
        return Ok(next);
    }
    next.timeliness = ks_statistic_sorted(&sorted(&present), &reference.0);
    next.skewness = score_skewness(window, reference_pdf, skew_smoothing)?;
    Ok(next)
}
