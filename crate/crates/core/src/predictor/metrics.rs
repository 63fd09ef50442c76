//! Test-oracle metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

fn check_lengths<T>(y: &[T], yhat: &[T], min: usize) -> Result<()> {
    if y.len() != yhat.len() {
        return Err(Error::Metric(format!(
            "length mismatch: {} targets vs {} predictions",
            y.len(),
            yhat.len()
        )));
    }
    if y.len() < min {
        return Err(Error::Metric(format!("need at least {min} pairs, got {}", y.len())));
    }
    Ok(())
}

/// Mean absolute error.
pub fn mae<T: Scalar>(y: &[T], yhat: &[T]) -> Result<T> {
    check_lengths(y, yhat, 1)?;
    let total = y
        .iter()
        .zip(yhat)
        .fold(T::zero(), |acc, (a, b)| acc + (*a - *b).abs());
    Ok(total / T::from_count(y.len()))
}

/// Coefficient of determination `1 - SS_res / SS_tot`.
pub fn r2<T: Scalar>(y: &[T], yhat: &[T]) -> Result<T> {
    check_lengths(y, yhat, 2)?;
    let n = T::from_count(y.len());
    let mean = y.iter().fold(T::zero(), |acc, v| acc + *v) / n;
    let ss_tot = y.iter().fold(T::zero(), |acc, v| acc + (*v - mean) * (*v - mean));
    if !(ss_tot > T::zero()) {
        return Err(Error::Metric("targets have zero variance".into()));
    }
    let ss_res = y
        .iter()
        .zip(yhat)
        .fold(T::zero(), |acc, (a, b)| acc + (*a - *b) * (*a - *b));
    Ok(T::one() - ss_res / ss_tot)
}

/// Metric and acceptance bound used by the test oracle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "metric", rename_all = "snake_case")]
pub enum OracleCriterion {
    /// Pass when MAE <= `max`.
    Mae { max: f64 },
    /// Pass when R² >= `min`.
    R2 { min: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub mae: Option<f64>,
    pub r2: Option<f64>,
    pub n: usize,
    pub pass: bool,
    /// Why the check failed when the chosen metric could not be computed.
    pub reason: Option<String>,
}

/// Computes the chosen metric and compares it with its bound.
pub fn oracle_check<T: Scalar>(y: &[T], yhat: &[T], criterion: OracleCriterion) -> OracleReport {
    let to64 = |r: Result<T>| r.map(|v| v.to_f64().unwrap_or(f64::NAN));
    let mae_v = to64(mae(y, yhat));
    let r2_v = to64(r2(y, yhat));
    let (pass, reason) = match criterion {
        OracleCriterion::Mae { max } => match &mae_v {
            Ok(v) => (*v <= max, None),
            Err(e) => (false, Some(e.to_string())),
        },
        OracleCriterion::R2 { min } => match &r2_v {
            Ok(v) => (*v >= min, None),
            Err(e) => (false, Some(e.to_string())),
        },
    };
    OracleReport {
        mae: mae_v.ok(),
        r2: r2_v.ok(),
        n: y.len(),
        pass,
        reason,
    }
}
