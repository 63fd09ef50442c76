use serde::{Deserialize, Serialize};

use crate::dimensions::IntegrityConstraints;
use crate::scalar::{median_sorted, quantile_sorted, sorted, Scalar};
use crate::windowing::DataWindow;

pub const FEATURE_COUNT: usize = 11;

pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "mean",
    "std",
    "min",
    "max",
    "median",
    "q25",
    "q75",
    "missing_fraction",
    "out_of_range_fraction",
    "lag1_autocorr",
    "n_present",
];

/// Cheap window summary fed to the regressor, in [`FEATURE_NAMES`] order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct FeatureVector<T: Scalar>(pub [T; FEATURE_COUNT]);

impl<T: Scalar> FeatureVector<T> {
    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn get(&self, name: &str) -> Option<T> {
        FEATURE_NAMES.iter().position(|n| *n == name).map(|i| self.0[i])
    }
}

pub fn extract_features<T: Scalar>(window: &DataWindow<T>, constraints: &IntegrityConstraints<T>) -> FeatureVector<T> {
    let present = window.present_values();
    let n_total = T::from_count(window.len().max(1));
    let missing_fraction = T::from_count(window.len() - present.len()) / n_total;
    if present.is_empty() {
        let mut f = [T::zero(); FEATURE_COUNT];
        f[7] = T::one();
        return FeatureVector(f);
    }

    let n = T::from_count(present.len());
    let mean = present.iter().copied().fold(T::zero(), |a, x| a + x) / n;
    let ss = present.iter().fold(T::zero(), |a, x| a + (*x - mean) * (*x - mean));
    let std = (ss / n).sqrt();
    let s = sorted(&present);
    let out_of_range = present.iter().filter(|x| !constraints.contains(**x)).count();

    FeatureVector([
        mean,
        std,
        s[0],
        s[s.len() - 1],
        median_sorted(&s),
        quantile_sorted(&s, 0.25),
        quantile_sorted(&s, 0.75),
        missing_fraction,
        T::from_count(out_of_range) / n_total,
        lag1_autocorr(window, mean, ss / n),
        n,
    ])
}

/// Mean lag-1 cross product over adjacent readings that are both present,
/// divided by the variance. Pairs spanning a gap are skipped, so missing
/// readings do not read as a drop in autocorrelation. Zero for constant
/// series or when no adjacent pair exists.
fn lag1_autocorr<T: Scalar>(window: &DataWindow<T>, mean: T, variance: T) -> T {
    if !(variance > T::zero()) {
        return T::zero();
    }
    let (num, pairs) = window
        .readings
        .windows(2)
        .filter_map(|w| Some((w[0].value?, w[1].value?)))
        .fold((T::zero(), 0usize), |(a, k), (x, y)| (a + (x - mean) * (y - mean), k + 1));
    if pairs == 0 {
        return T::zero();
    }
    num / T::from_count(pairs) / variance
}
