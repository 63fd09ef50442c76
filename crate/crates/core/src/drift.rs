//! Histogram densities, Jensen-Shannon divergence and the empirical
//! p-value change detector.
//!
//! The detector keeps a fixed reference density and the full history of
//! observed divergences. A new divergence is declared drift when its
//! add-one empirical p-value against that history falls below `tau`, so no
//! absolute divergence threshold has to be tuned per process.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::windowing::DataWindow;

/// Equal-width histogram density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Pdf<T: Scalar> {
    bin_edges: Vec<T>,
    probs: Vec<T>,
}

fn mass_tolerance<T: Scalar>(bins: usize) -> T {
    T::lit(1e-9).max(T::epsilon() * T::from_count(4 * bins))
}

impl<T: Scalar> Pdf<T> {
    /// Validates and wraps an explicit density.
    pub fn from_parts(bin_edges: Vec<T>, probs: Vec<T>) -> Result<Self> {
        if probs.len() < 2 || bin_edges.len() != probs.len() + 1 {
            return Err(Error::Histogram(format!(
                "{} edges for {} bins",
                bin_edges.len(),
                probs.len()
            )));
        }
        if bin_edges.windows(2).any(|e| !(e[0] < e[1])) {
            return Err(Error::Histogram("edges not strictly ascending".into()));
        }
        if probs.iter().any(|p| !(*p >= T::zero())) {
            return Err(Error::Histogram("negative or NaN probability".into()));
        }
        let total: T = probs.iter().copied().sum();
        if (total - T::one()).abs() > mass_tolerance(probs.len()) {
            return Err(Error::Histogram(format!("mass sums to {total}")));
        }
        Ok(Self { bin_edges, probs })
    }

    /// Equal-width edges over `[lo, hi]` with the probabilities supplied.
    pub fn uniform_grid(lo: T, hi: T, probs: Vec<T>) -> Result<Self> {
        let edges = equal_width_edges(lo, hi, probs.len())?;
        Self::from_parts(edges, probs)
    }

    pub fn bin_edges(&self) -> &[T] {
        &self.bin_edges
    }

    pub fn probs(&self) -> &[T] {
        &self.probs
    }

    pub fn bins(&self) -> usize {
        self.probs.len()
    }

    pub fn range(&self) -> (T, T) {
        (self.bin_edges[0], self.bin_edges[self.bins()])
    }

    /// Re-estimates `sample` on this density's grid.
    pub fn estimate_like(&self, sample: &[T], smoothing: T) -> Result<Self> {
        let (lo, hi) = self.range();
        estimate_pdf(sample, self.bins(), (lo, hi), smoothing)
    }

    pub fn same_grid(&self, other: &Self) -> bool {
        self.bin_edges == other.bin_edges
    }
}

fn equal_width_edges<T: Scalar>(lo: T, hi: T, bins: usize) -> Result<Vec<T>> {
    if bins < 2 {
        return Err(Error::Histogram(format!("need at least 2 bins, got {bins}")));
    }
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::Histogram(format!("invalid range [{lo}, {hi}]")));
    }
    let width = (hi - lo) / T::from_count(bins);
    let mut edges: Vec<T> = (0..bins).map(|i| lo + width * T::from_count(i)).collect();
    edges.push(hi);
    Ok(edges)
}

/// Range of a sample widened by `padding` times its span on each side.
///
/// A constant sample gets a unit-wide range around its value.
pub fn padded_range<T: Scalar>(sample: &[T], padding: T) -> Result<(T, T)> {
    let mut finite = sample.iter().copied().filter(|x| x.is_finite());
    let first = finite.next().ok_or(Error::EmptySample("range of empty sample"))?;
    let (lo, hi) = finite.fold((first, first), |(lo, hi), x| (lo.min(x), hi.max(x)));
    if hi > lo {
        let pad = (hi - lo) * padding;
        Ok((lo - pad, hi + pad))
    } else {
        Ok((lo - T::half(), hi + T::half()))
    }
}

/// Equal-width histogram over `[lo, hi]` with additive smoothing per bin.
///
/// Out-of-range values clamp into the boundary bins; NaNs are ignored.
pub fn estimate_pdf<T: Scalar>(sample: &[T], bins: usize, range: (T, T), smoothing: T) -> Result<Pdf<T>> {
    let (lo, hi) = range;
    let edges = equal_width_edges(lo, hi, bins)?;
    if smoothing < T::zero() || !smoothing.is_finite() {
        return Err(Error::Histogram(format!("smoothing must be >= 0, got {smoothing}")));
    }
    let counts = bin_counts(sample, bins, lo, hi);
    let n: usize = counts.iter().sum();
    if n == 0 {
        return Err(Error::EmptySample("density estimate needs at least one value"));
    }
    let total = T::from_count(n) + smoothing * T::from_count(bins);
    let probs = counts
        .iter()
        .map(|&c| (T::from_count(c) + smoothing) / total)
        .collect();
    Ok(Pdf { bin_edges: edges, probs })
}

fn bin_counts<T: Scalar>(sample: &[T], bins: usize, lo: T, hi: T) -> Vec<usize> {
    let mut counts = vec![0usize; bins];
    let scale = T::from_count(bins) / (hi - lo);
    for &x in sample {
        if x.is_nan() {
            continue;
        }
        let pos = ((x - lo) * scale).floor();
        let idx = if pos < T::zero() {
            0
        } else {
            pos.to_usize().unwrap_or(bins - 1).min(bins - 1)
        };
        counts[idx] += 1;
    }
    counts
}

/// Base-2 Shannon entropy with `0 log 0 = 0`.
pub fn shannon_entropy<T: Scalar>(pdf: &Pdf<T>) -> T {
    entropy_of(pdf.probs())
}

fn entropy_of<T: Scalar>(probs: &[T]) -> T {
    let h = probs
        .iter()
        .filter(|p| **p > T::zero())
        .fold(T::zero(), |acc, &p| acc - p * p.log2());
    h.max(T::zero())
}

/// Base-2 Jensen-Shannon divergence, in `[0, 1]`.
pub fn jsd<T: Scalar>(p: &Pdf<T>, q: &Pdf<T>) -> Result<T> {
    if !p.same_grid(q) {
        return Err(Error::GridMismatch {
            left: p.bins(),
            right: q.bins(),
        });
    }
    Ok(jsd_probs(p.probs(), q.probs()))
}

pub(crate) fn jsd_probs<T: Scalar>(p: &[T], q: &[T]) -> T {
    let mid: Vec<T> = p.iter().zip(q).map(|(&a, &b)| (a + b) * T::half()).collect();
    let d = entropy_of(&mid) - (entropy_of(p) + entropy_of(q)) * T::half();
    d.max(T::zero()).min(T::one())
}

/// Add-one empirical p-value: `(1 + #{h >= d}) / (1 + n)`.
pub fn empirical_p_value<T: Scalar>(history: &[T], d: T) -> T {
    let at_least = history.iter().filter(|h| **h >= d).count();
    T::from_count(1 + at_least) / T::from_count(1 + history.len())
}

/// How a warmed-up detector turns a divergence into a verdict.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "", rename_all = "snake_case", tag = "rule")]
pub enum DecisionRule<T: Scalar> {
    /// Drift when the empirical p-value is below `tau`.
    PValue,
    /// Legacy fixed threshold: drift when the divergence exceeds `zeta`.
    FixedThreshold { zeta: T },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct DriftDetectorState<T: Scalar> {
    pub reference_pdf: Pdf<T>,
    pub divergence_history: Vec<T>,
    pub tau: T,
    pub min_history: usize,
    /// Additive smoothing used for window densities.
    pub smoothing: T,
    /// Range padding used when a new reference grid is derived.
    pub range_padding: T,
    pub rule: DecisionRule<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct DriftVerdict<T: Scalar> {
    /// `None` when the window had no present values.
    pub divergence: Option<T>,
    pub p_value: Option<T>,
    pub drifted: bool,
    pub warmed_up: bool,
}

impl<T: Scalar> DriftVerdict<T> {
    /// Verdict for a window with no usable values: a data fault, never drift.
    pub fn fault() -> Self {
        Self {
            divergence: None,
            p_value: None,
            drifted: false,
            warmed_up: false,
        }
    }

    pub fn is_fault(&self) -> bool {
        self.divergence.is_none()
    }
}

impl<T: Scalar> DriftDetectorState<T> {
    pub fn new(reference_pdf: Pdf<T>, tau: T, min_history: usize) -> Result<Self> {
        if !(tau > T::zero() && tau < T::one()) {
            return Err(Error::Config(format!("tau must lie in (0, 1), got {tau}")));
        }
        Ok(Self {
            reference_pdf,
            divergence_history: Vec::new(),
            tau,
            min_history,
            smoothing: T::zero(),
            range_padding: T::lit(0.05),
            rule: DecisionRule::PValue,
        })
    }

    pub fn with_smoothing(mut self, smoothing: T) -> Self {
        self.smoothing = smoothing;
        self
    }

    pub fn with_range_padding(mut self, padding: T) -> Self {
        self.range_padding = padding;
        self
    }

    pub fn with_rule(mut self, rule: DecisionRule<T>) -> Self {
        self.rule = rule;
        self
    }

    /// Divergence of a sample from the reference, without touching state.
    pub fn divergence(&self, present: &[T]) -> Result<T> {
        let current = self.reference_pdf.estimate_like(present, self.smoothing)?;
        jsd(&self.reference_pdf, &current)
    }

    /// Tests `d` against the current history without recording it.
    pub fn assess(&self, d: T) -> DriftVerdict<T> {
        if self.divergence_history.len() < self.min_history || self.divergence_history.is_empty() {
            return DriftVerdict {
                divergence: Some(d),
                p_value: None,
                drifted: false,
                warmed_up: false,
            };
        }
        let p = empirical_p_value(&self.divergence_history, d);
        let drifted = match self.rule {
            DecisionRule::PValue => p < self.tau,
            DecisionRule::FixedThreshold { zeta } => d > zeta,
        };
        DriftVerdict {
            divergence: Some(d),
            p_value: Some(p),
            drifted,
            warmed_up: true,
        }
    }

    pub fn observe(&mut self, window: &DataWindow<T>) -> DriftVerdict<T> {
        self.observe_values(&window.present_values())
    }

    /// Runs the test on `d = JSD(reference, window)` and then appends `d`.
    pub fn observe_values(&mut self, present: &[T]) -> DriftVerdict<T> {
        if present.is_empty() {
            return DriftVerdict::fault();
        }
        let d = match self.divergence(present) {
            Ok(d) => d,
            Err(_) => return DriftVerdict::fault(),
        };
        let verdict = self.assess(d);
        self.divergence_history.push(d);
        verdict
    }

    /// Re-estimates the reference density from a new sample.
    ///
    /// The grid is re-derived from the sample with the same bin count and
    /// padding. Divergence history is kept.
    pub fn rebaseline(&mut self, sample: &[T]) -> Result<()> {
        if sample.is_empty() {
            return Err(Error::EmptySample("rebaseline sample"));
        }
        let range = padded_range(sample, self.range_padding)?;
        self.reference_pdf = estimate_pdf(sample, self.reference_pdf.bins(), range, T::zero())?;
        Ok(())
    }
}

/// Writes one divergence per line.
pub fn write_divergence_log<T: Scalar, W: Write>(history: &[T], mut sink: W) -> std::io::Result<()> {
    for d in history {
        writeln!(sink, "{d}")?;
    }
    Ok(())
}

pub fn read_divergence_log<T: Scalar, R: BufRead>(source: R) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (i, line) in source.lines().enumerate() {
        let line = line.map_err(|e| Error::Parse {
            line: i + 1,
            reason: e.to_string(),
        })?;
        let s = line.trim();
        if s.is_empty() {
            continue;
        }
        let v: f64 = s.parse().map_err(|e| Error::Parse {
            line: i + 1,
            reason: format!("{e}"),
        })?;
        out.push(T::lit(v));
    }
    Ok(out)
}
