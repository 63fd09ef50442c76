//! Data mutant simulator: injects controlled quality faults into windows.
//!
//! Randomness is keyed by `(seed, window_id)` through a ChaCha stream per
//! window, so the mutant of window `k` does not depend on the windows
//! before it.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dimensions::IntegrityConstraints;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::windowing::DataWindow;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultKind {
    Missing,
    Outlier,
    OutOfRange,
    Shift,
    Scale,
}

impl FaultKind {
    pub const ALL: [FaultKind; 5] = [
        FaultKind::Missing,
        FaultKind::Outlier,
        FaultKind::OutOfRange,
        FaultKind::Shift,
        FaultKind::Scale,
    ];
}

impl fmt::Display for FaultKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            FaultKind::Missing => "missing",
            FaultKind::Outlier => "outlier",
            FaultKind::OutOfRange => "out_of_range",
            FaultKind::Shift => "shift",
            FaultKind::Scale => "scale",
        };
        f.write_str(s)
    }
}

impl FromStr for FaultKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FaultKind::ALL
            .into_iter()
            .find(|k| k.to_string() == s)
            .ok_or_else(|| Error::Plan(format!("unknown fault kind `{s}`")))
    }
}

/// Magnitudes per fault kind.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FaultIntensity {
    /// Share of readings blanked by `missing`.
    pub missing_fraction: f64,
    /// Share of readings spiked by `outlier`.
    pub outlier_fraction: f64,
    /// Spike size in window standard deviations.
    pub outlier_sigma: f64,
    /// Share of readings pushed outside the integrity range.
    pub out_of_range_fraction: f64,
    /// Distance beyond the range, as a fraction of the range width.
    pub out_of_range_margin: f64,
    /// Maximum absolute offset for `shift`; the applied offset is drawn from `[offset/2, offset]` with random sign.
    pub shift_offset: f64,
    /// Maximum relative deviation of the `scale` factor from 1.
    pub scale_spread: f64,
}

impl Default for FaultIntensity {
    fn default() -> Self {
        Self {
            missing_fraction: 0.3,
            outlier_fraction: 0.1,
            outlier_sigma: 6.0,
            out_of_range_fraction: 0.2,
            out_of_range_margin: 0.2,
            shift_offset: 10.0,
            scale_spread: 0.2,
        }
    }
}

impl FaultIntensity {
    fn validate(&self) -> Result<()> {
        let fractions = [
            ("missing_fraction", self.missing_fraction),
            ("outlier_fraction", self.outlier_fraction),
            ("out_of_range_fraction", self.out_of_range_fraction),
        ];
        for (name, v) in fractions {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Plan(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        let magnitudes = [
            ("outlier_sigma", self.outlier_sigma),
            ("out_of_range_margin", self.out_of_range_margin),
            ("shift_offset", self.shift_offset),
            ("scale_spread", self.scale_spread),
        ];
        for (name, v) in magnitudes {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Plan(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if self.scale_spread >= 1.0 {
            return Err(Error::Plan("scale_spread must be < 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MutationPlan {
    pub fault_mix: BTreeMap<FaultKind, f64>,
    /// Probability that a window is mutated.
    pub fault_fraction: f64,
    pub intensity: FaultIntensity,
    pub seed: u64,
}

impl Default for MutationPlan {
    fn default() -> Self {
        Self {
            fault_mix: FaultKind::ALL.into_iter().map(|k| (k, 1.0)).collect(),
            fault_fraction: 0.3,
            intensity: FaultIntensity::default(),
            seed: 7,
        }
    }
}

impl MutationPlan {
    pub fn single(kind: FaultKind, fault_fraction: f64, intensity: FaultIntensity, seed: u64) -> Self {
        Self {
            fault_mix: [(kind, 1.0)].into_iter().collect(),
            fault_fraction,
            intensity,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.fault_fraction) {
            return Err(Error::Plan(format!(
                "fault_fraction must lie in [0, 1], got {}",
                self.fault_fraction
            )));
        }
        if self.fault_mix.values().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(Error::Plan("fault weights must be finite and >= 0".into()));
        }
        if !(self.fault_mix.values().sum::<f64>() > 0.0) {
            return Err(Error::Plan("fault weights must sum to > 0".into()));
        }
        self.intensity.validate()
    }

    pub(crate) fn draw_kind(&self, rng: &mut ChaCha8Rng) -> FaultKind {
        let total: f64 = self.fault_mix.values().sum();
        let mut u = rng.gen::<f64>() * total;
        let mut last = FaultKind::Missing;
        for (kind, w) in &self.fault_mix {
            if *w <= 0.0 {
                continue;
            }
            last = *kind;
            if u < *w {
                return *kind;
            }
            u -= *w;
        }
        last
    }
}

/// Random stream for one window.
pub fn window_rng(seed: u64, window_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(window_id);
    rng
}

/// One applied fault.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultRecord {
    pub window_id: u64,
    pub kind: FaultKind,
    /// Readings touched.
    pub affected: usize,
    /// Kind-specific magnitude actually applied (offset, factor, spike size, margin or share).
    pub magnitude: f64,
}

fn pick<R: Rng>(rng: &mut R, n: usize, fraction: f64) -> Vec<usize> {
    let k = ((fraction * n as f64).round() as usize).min(n);
    let mut idx = sample(rng, n, k).into_vec();
    idx.sort_unstable();
    idx
}

fn signed<R: Rng>(rng: &mut R) -> f64 {
    if rng.gen::<bool>() {
        1.0
    } else {
        -1.0
    }
}

/// Applies one fault kind. Length and window id are preserved.
pub fn mutate_window<T: Scalar, R: Rng>(
    window: &DataWindow<T>,
    kind: FaultKind,
    intensity: &FaultIntensity,
    constraints: &IntegrityConstraints<T>,
    rng: &mut R,
) -> Result<(DataWindow<T>, FaultRecord)> {
    intensity.validate()?;
    let mut out = window.clone();
    let n = out.len();
    let mut record = FaultRecord {
        window_id: window.window_id,
        kind,
        affected: 0,
        magnitude: 0.0,
    };
    match kind {
        FaultKind::Missing => {
            let idx = pick(rng, n, intensity.missing_fraction);
            for &i in &idx {
                out.readings[i].value = None;
            }
            record.affected = idx.len();
            record.magnitude = intensity.missing_fraction;
        }
        FaultKind::Outlier => {
            let present = window.present_values();
            let sigma = if present.len() > 1 {
                let m = present.iter().map(|v| v.to_f64().unwrap()).sum::<f64>() / present.len() as f64;
                let var = present
                    .iter()
                    .map(|v| (v.to_f64().unwrap() - m).powi(2))
                    .sum::<f64>()
                    / present.len() as f64;
                var.sqrt().max(1e-9)
            } else {
                1.0
            };
            let spike = intensity.outlier_sigma * sigma;
            let idx = pick(rng, n, intensity.outlier_fraction);
            for &i in &idx {
                let s = signed(rng);
                if let Some(v) = out.readings[i].value.as_mut() {
                    *v = *v + T::lit(s * spike);
                }
            }
            record.affected = idx.len();
            record.magnitude = spike;
        }
        FaultKind::OutOfRange => {
            let lo = constraints.min_value.to_f64().unwrap();
            let hi = constraints.max_value.to_f64().unwrap();
            let margin = intensity.out_of_range_margin * (hi - lo).max(1.0);
            let idx = pick(rng, n, intensity.out_of_range_fraction);
            for &i in &idx {
                let above = rng.gen::<bool>();
                let jitter = rng.gen::<f64>();
                let v = if above {
                    hi + margin * (1.0 + jitter)
                } else {
                    lo - margin * (1.0 + jitter)
                };
                out.readings[i].value = Some(T::lit(v));
            }
            record.affected = idx.len();
            record.magnitude = margin;
        }
        FaultKind::Shift => {
            let u: f64 = rng.gen();
            let offset = signed(rng) * intensity.shift_offset * (0.5 + 0.5 * u);
            for r in out.readings.iter_mut() {
                if let Some(v) = r.value.as_mut() {
                    *v = *v + T::lit(offset);
                }
            }
            record.affected = n;
            record.magnitude = offset;
        }
        FaultKind::Scale => {
            let u: f64 = rng.gen();
            let factor = 1.0 + signed(rng) * intensity.scale_spread * (0.5 + 0.5 * u);
            for r in out.readings.iter_mut() {
                if let Some(v) = r.value.as_mut() {
                    *v = *v * T::lit(factor);
                }
            }
            record.affected = n;
            record.magnitude = factor;
        }
    }
    Ok((out, record))
}

/// Mutates each window independently with probability `fault_fraction`.
///
/// The ledger lists exactly the windows whose content changed.
pub fn apply_mutation_plan<T: Scalar>(
    stream: &[DataWindow<T>],
    plan: &MutationPlan,
    constraints: &IntegrityConstraints<T>,
) -> Result<(Vec<DataWindow<T>>, Vec<FaultRecord>)> {
    plan.validate()?;
    let mut out = Vec::with_capacity(stream.len());
    let mut ledger = Vec::new();
    for window in stream {
        let mut rng = window_rng(plan.seed, window.window_id);
        let selected = rng.gen::<f64>() < plan.fault_fraction;
        if !selected {
            out.push(window.clone());
            continue;
        }
        let kind = plan.draw_kind(&mut rng);
        let (mutant, record) = mutate_window(window, kind, &plan.intensity, constraints, &mut rng)?;
        if mutant != *window {
            ledger.push(record);
        }
        out.push(mutant);
    }
    Ok((out, ledger))
}

/// Writes the fault ledger as line-delimited JSON.
pub fn write_ledger<W: Write>(ledger: &[FaultRecord], mut sink: W) -> std::io::Result<()> {
    for r in ledger {
        serde_json::to_writer(&mut sink, r)?;
        writeln!(sink)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dimensions::score_completeness;
    use crate::windowing::Reading;
    use proptest::prelude::*;

    fn constraints() -> IntegrityConstraints<f64> {
        IntegrityConstraints::new(0.0, 100.0).unwrap()
    }

    fn window(id: u64, n: usize) -> DataWindow<f64> {
        DataWindow::new(
            id,
            (0..n).map(|i| Reading::present(i as i64, 50.0 + (i as f64 * 0.7).sin() * 5.0)).collect(),
        )
    }

    fn zero_intensity() -> FaultIntensity {
        FaultIntensity {
            missing_fraction: 0.0,
            outlier_fraction: 0.0,
            outlier_sigma: 0.0,
            out_of_range_fraction: 0.0,
            out_of_range_margin: 0.0,
            shift_offset: 0.0,
            scale_spread: 0.0,
        }
    }

    #[test]
    fn total_missing() {
        let w = window(0, 20);
        let i = FaultIntensity {
            missing_fraction: 1.0,
            ..FaultIntensity::default()
        };
        let (m, rec) = mutate_window(&w, FaultKind::Missing, &i, &constraints(), &mut window_rng(1, 0)).unwrap();
        assert_eq!(score_completeness(&m), 1.0);
        assert_eq!(rec.affected, 20);
    }

    #[test]
    fn zero_magnitude_is_identity() {
        let w = window(0, 30);
        for kind in FaultKind::ALL {
            let (m, _) = mutate_window(&w, kind, &zero_intensity(), &constraints(), &mut window_rng(1, 0)).unwrap();
            assert_eq!(m, w, "{kind}");
        }
    }

    #[test]
    fn kinds_hit_their_dimension() {
        let w = window(0, 50);
        let c = constraints();
        let i = FaultIntensity::default();
        let mut rng = window_rng(3, 0);
        let (m, _) = mutate_window(&w, FaultKind::OutOfRange, &i, &c, &mut rng).unwrap();
        assert_eq!(m.present_values().iter().filter(|v| !c.contains(**v)).count(), 10);
        let (m, rec) = mutate_window(&w, FaultKind::Shift, &i, &c, &mut rng).unwrap();
        assert!((m.present_values()[0] - w.present_values()[0] - rec.magnitude).abs() < 1e-12);
        assert!(rec.magnitude.abs() >= 5.0 && rec.magnitude.abs() <= 10.0);
        let (m, rec) = mutate_window(&w, FaultKind::Scale, &i, &c, &mut rng).unwrap();
        assert!((m.present_values()[3] - w.present_values()[3] * rec.magnitude).abs() < 1e-12);
    }

    #[test]
    fn deterministic_per_seed() {
        let stream: Vec<_> = (0..50).map(|i| window(i, 20)).collect();
        let plan = MutationPlan::default();
        let a = apply_mutation_plan(&stream, &plan, &constraints()).unwrap();
        let b = apply_mutation_plan(&stream, &plan, &constraints()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn prefix_independent() {
        let stream: Vec<_> = (0..40).map(|i| window(i, 20)).collect();
        let plan = MutationPlan::default();
        let (full, _) = apply_mutation_plan(&stream, &plan, &constraints()).unwrap();
        let (tail, _) = apply_mutation_plan(&stream[25..], &plan, &constraints()).unwrap();
        assert_eq!(&full[25..], tail.as_slice());
    }

    #[test]
    fn fraction_extremes() {
        let stream: Vec<_> = (0..30).map(|i| window(i, 20)).collect();
        let none = MutationPlan {
            fault_fraction: 0.0,
            ..MutationPlan::default()
        };
        let (out, ledger) = apply_mutation_plan(&stream, &none, &constraints()).unwrap();
        assert_eq!(out, stream);
        assert!(ledger.is_empty());

        let all = MutationPlan::single(FaultKind::Shift, 1.0, FaultIntensity::default(), 5);
        let (_, ledger) = apply_mutation_plan(&stream, &all, &constraints()).unwrap();
        assert_eq!(ledger.len(), 30);
        assert!(ledger.iter().all(|r| r.kind == FaultKind::Shift));
    }

    #[test]
    fn invalid_plans() {
        let mut p = MutationPlan::default();
        p.fault_fraction = 1.5;
        assert!(p.validate().is_err());
        let mut p = MutationPlan::default();
        p.fault_mix.values_mut().for_each(|w| *w = 0.0);
        assert!(p.validate().is_err());
        assert!("bitflip".parse::<FaultKind>().is_err());
        assert_eq!("out_of_range".parse::<FaultKind>().unwrap(), FaultKind::OutOfRange);
    }

    #[test]
    fn ledger_jsonl() {
        let rec = FaultRecord {
            window_id: 4,
            kind: FaultKind::OutOfRange,
            affected: 3,
            magnitude: 20.0,
        };
        let mut buf = Vec::new();
        write_ledger(&[rec], &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "{\"window_id\":4,\"kind\":\"out_of_range\",\"affected\":3,\"magnitude\":20.0}\n"
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn ledger_lists_exactly_changed_windows(seed in 0u64..1000, frac in 0.0f64..1.0) {
            let stream: Vec<_> = (0..25).map(|i| window(i, 16)).collect();
            let plan = MutationPlan { fault_fraction: frac, seed, ..MutationPlan::default() };
            let (out, ledger) = apply_mutation_plan(&stream, &plan, &constraints()).unwrap();
            for (a, b) in stream.iter().zip(&out) {
                prop_assert_eq!(a.len(), b.len());
                prop_assert_eq!(a.window_id, b.window_id);
                let listed = ledger.iter().any(|r| r.window_id == a.window_id);
                prop_assert_eq!(listed, a != b);
            }
        }

        #[test]
        fn more_missing_never_less_complete(seed in 0u64..1000, f1 in 0.0f64..1.0, f2 in 0.0f64..1.0) {
            let w = window(seed, 40);
            let (lo, hi) = if f1 <= f2 { (f1, f2) } else { (f2, f1) };
            let run = |f: f64| {
                let i = FaultIntensity { missing_fraction: f, ..FaultIntensity::default() };
                let (m, _) = mutate_window(&w, FaultKind::Missing, &i, &constraints(), &mut window_rng(seed, 0)).unwrap();
                score_completeness(&m)
            };
            prop_assert!(run(hi) >= run(lo));
        }
    }
}
