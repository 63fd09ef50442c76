//! Floating-point abstraction shared by the numeric kernels.
//!
//! Every statistic in this crate (ECDF distances, histogram divergences,
//! z-scores, eigenvectors, boosted trees) is written once against
//! [`Scalar`] and instantiated for `f32` and `f64`. The pipeline and the
//! harness are fixed at `f64`; see the aliases at the crate root.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Real scalar usable by all kernels. Implemented for [`f32`] and [`f64`].
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Default
    + Debug
    + Display
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from an `f64` literal.
    fn lit(x: f64) -> Self;

    /// Lossy conversion from a count.
    fn from_count(n: usize) -> Self;

    fn half() -> Self {
        Self::lit(0.5)
    }
}

impl Scalar for f32 {
    #[inline]
    fn lit(x: f64) -> Self {
        x as f32
    }

    #[inline]
    fn from_count(n: usize) -> Self {
        n as f32
    }
}

impl Scalar for f64 {
    #[inline]
    fn lit(x: f64) -> Self {
        x
    }

    #[inline]
    fn from_count(n: usize) -> Self {
        n as f64
    }
}

/// Total order on scalars for sorting. NaNs sort last.
pub(crate) fn total_cmp<T: Scalar>(a: &T, b: &T) -> std::cmp::Ordering {
    a.partial_cmp(b).unwrap_or_else(|| match (a.is_nan(), b.is_nan()) {
        (true, false) => std::cmp::Ordering::Greater,
        (false, true) => std::cmp::Ordering::Less,
        _ => std::cmp::Ordering::Equal,
    })
}

/// Sorted copy of a sample.
pub(crate) fn sorted<T: Scalar>(values: &[T]) -> Vec<T> {
    let mut out = values.to_vec();
    out.sort_by(total_cmp);
    out
}

/// Median of an already sorted, non-empty slice.
pub(crate) fn median_sorted<T: Scalar>(sorted: &[T]) -> T {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) * T::half()
    }
}

/// Linear-interpolation quantile (type 7) of an already sorted, non-empty slice.
pub(crate) fn quantile_sorted<T: Scalar>(sorted: &[T], q: f64) -> T {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = T::lit(pos - lo as f64);
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}
