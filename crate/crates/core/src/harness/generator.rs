//! Synthetic pump-pressure streams.
//!
//! Every window is one pump event: pressure starts at `base_level` and
//! decays exponentially over the window, plus Gaussian noise. Drift events
//! change the generator parameters from their window onward.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mutation::window_rng;
use crate::windowing::Reading;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftKind {
    /// Adds `magnitude` to the pressure level.
    MeanShift,
    /// Adds `magnitude` to the decay rate.
    DecayChange,
    /// Adds `magnitude` to the noise standard deviation.
    NoiseChange,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftEvent {
    pub window_index: usize,
    pub kind: DriftKind,
    pub magnitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PumpStreamConfig {
    pub n_windows: usize,
    pub window_len: usize,
    /// Pressure at the start of each event.
    pub base_level: f64,
    /// Decay over one event: `p(i) = base * exp(-decay_rate * i / window_len)`.
    pub decay_rate: f64,
    pub noise_std: f64,
    /// Sorted by strictly increasing `window_index`.
    pub drift_events: Vec<DriftEvent>,
    pub seed: u64,
}

impl Default for PumpStreamConfig {
    fn default() -> Self {
        Self {
            n_windows: 1000,
            window_len: 200,
            base_level: 100.0,
            decay_rate: 2.0,
            noise_std: 2.0,
            drift_events: Vec::new(),
            seed: 42,
        }
    }
}

/// Generator parameters in effect for one window.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Regime {
    level: f64,
    decay: f64,
    noise: f64,
}

impl PumpStreamConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("generator: {m}")));
        if self.window_len == 0 {
            return bad("window_len must be >= 1".into());
        }
        if !(self.decay_rate > 0.0 && self.decay_rate.is_finite()) {
            return bad(format!("decay_rate must be > 0, got {}", self.decay_rate));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) || !self.base_level.is_finite() {
            return bad("noise_std must be >= 0 and base_level finite".into());
        }
        let mut prev: Option<usize> = None;
        for e in &self.drift_events {
            if e.window_index >= self.n_windows {
                return bad(format!(
                    "drift event at window {} is past the stream end ({})",
                    e.window_index, self.n_windows
                ));
            }
            if prev.is_some_and(|p| e.window_index <= p) {
                return bad("drift event indices must be strictly increasing".into());
            }
            if !e.magnitude.is_finite() {
                return bad("drift magnitude must be finite".into());
            }
            prev = Some(e.window_index);
        }
        // Cumulative parameters must stay usable after every event.
        let mut r = self.regime_before_events();
        for e in &self.drift_events {
            r = r.apply(e);
            if !(r.decay > 0.0) || r.noise < 0.0 {
                return bad(format!(
                    "after the event at window {} decay must stay > 0 and noise >= 0",
                    e.window_index
                ));
            }
        }
        Ok(())
    }

    fn regime_before_events(&self) -> Regime {
        Regime {
            level: self.base_level,
            decay: self.decay_rate,
            noise: self.noise_std,
        }
    }

    /// Readings in total.
    pub fn len(&self) -> usize {
        self.n_windows * self.window_len
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl Regime {
    fn apply(mut self, e: &DriftEvent) -> Self {
        match e.kind {
            DriftKind::MeanShift => self.level += e.magnitude,
            DriftKind::DecayChange => self.decay += e.magnitude,
            DriftKind::NoiseChange => self.noise += e.magnitude,
        }
        self
    }
}

/// Generates the stream. Timestamps are the global reading index in ms.
pub fn generate_pump_stream(config: &PumpStreamConfig) -> Result<Vec<Reading<f64>>> {
    config.validate()?;
    let n = config.window_len;
    let mut out = Vec::with_capacity(config.len());
    let mut regime = config.regime_before_events();
    let mut events = config.drift_events.iter().peekable();
    for w in 0..config.n_windows {
        while let Some(e) = events.next_if(|e| e.window_index == w) {
            regime = regime.apply(e);
        }
        let mut rng = window_rng(config.seed, w as u64);
        for i in 0..n {
            let clean = regime.level * (-regime.decay * i as f64 / n as f64).exp();
            let z: f64 = rng.sample(StandardNormal);
            out.push(Reading::present((w * n + i) as i64, clean + regime.noise * z));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(n_windows: usize) -> PumpStreamConfig {
        PumpStreamConfig {
            n_windows,
            window_len: 50,
            ..Default::default()
        }
    }

    #[test]
    fn noiseless_decay_is_strictly_decreasing() {
        let c = PumpStreamConfig {
            noise_std: 0.0,
            ..cfg(3)
        };
        let s = generate_pump_stream(&c).unwrap();
        assert_eq!(s.len(), 150);
        for event in s.chunks(50) {
            assert_eq!(event[0].value, Some(100.0));
            assert!(event.windows(2).all(|p| p[1].value.unwrap() < p[0].value.unwrap()));
        }
        assert!(s.windows(2).all(|p| p[1].timestamp == p[0].timestamp + 1));
    }

    #[test]
    fn deterministic_per_seed() {
        let a = generate_pump_stream(&cfg(4)).unwrap();
        assert_eq!(a, generate_pump_stream(&cfg(4)).unwrap());
        let b = generate_pump_stream(&PumpStreamConfig { seed: 43, ..cfg(4) }).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn mean_shift_moves_window_means() {
        let c = PumpStreamConfig {
            drift_events: vec![DriftEvent {
                window_index: 10,
                kind: DriftKind::MeanShift,
                magnitude: 5.0,
            }],
            ..cfg(20)
        };
        let s = generate_pump_stream(&c).unwrap();
        let clean = generate_pump_stream(&cfg(20)).unwrap();
        let mean = |r: &[Reading<f64>]| r.iter().map(|x| x.value.unwrap()).sum::<f64>() / r.len() as f64;
        for w in 0..20 {
            let (a, b) = (&s[w * 50..(w + 1) * 50], &clean[w * 50..(w + 1) * 50]);
            let expected = if w >= 10 { 5.0 } else { 0.0 };
            // Same noise draws, so the gap is the level change times the mean decay factor.
            let gap = mean(a) - mean(b);
            let factor = (0..50).map(|i| (-2.0 * i as f64 / 50.0).exp()).sum::<f64>() / 50.0;
            assert!((gap - expected * factor).abs() < 1e-9, "window {w}: {gap}");
        }
    }

    #[test]
    fn rejects_bad_events() {
        let ev = |i, m| DriftEvent {
            window_index: i,
            kind: DriftKind::DecayChange,
            magnitude: m,
        };
        assert!(PumpStreamConfig { drift_events: vec![ev(5, 0.1), ev(5, 0.1)], ..cfg(10) }.validate().is_err());
        assert!(PumpStreamConfig { drift_events: vec![ev(10, 0.1)], ..cfg(10) }.validate().is_err());
        assert!(PumpStreamConfig { drift_events: vec![ev(3, -5.0)], ..cfg(10) }.validate().is_err());
        assert!(PumpStreamConfig { drift_events: vec![ev(3, 0.5), ev(6, -0.5)], ..cfg(10) }.validate().is_ok());
    }
}
