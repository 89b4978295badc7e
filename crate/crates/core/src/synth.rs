//! Synthetic fault records with known change instants.
//!
//! ```text
//! x(t) = A(t)·[sin(θ(t)) + Σ r_k·sin(k·θ(t))] + offset(t) + noise
//! θ(t) = 2π·f0·t + φ(t)
//! ```
//!
//! `A`, `φ` and `offset` are piecewise, changing at the event samples
//! `round(at·fs)`; an event applies from its own sample onwards.

use std::f64::consts::PI;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::segmentation::Classification;
use crate::signal_io::{Record, Unit};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    /// Sets the envelope amplitude to `level`.
    AmplitudeStep { level: f64 },
    /// Adds `radians` to the phase.
    PhaseStep { radians: f64 },
    /// Sets the amplitude to `level` and adds `magnitude·e^{−(t − at)/tau}`.
    DcOffsetDecay { magnitude: f64, tau: f64, level: f64 },
    /// Sets the amplitude to zero.
    ClearToZero,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthEvent {
    /// Seconds from the first sample.
    pub at: f64,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub fs: f64,
    pub f0: f64,
    pub duration: f64,
    /// Initial phase in radians.
    pub phase: f64,
    /// Initial amplitude.
    pub amplitude: f64,
    pub events: Vec<SynthEvent>,
    /// `(order, relative amplitude)`.
    pub harmonics: Vec<(u32, f64)>,
    pub noise_rms: f64,
    pub seed: u64,
    pub channel_id: String,
    pub unit: Unit,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            fs: 2500.0,
            f0: 50.0,
            duration: 0.8,
            phase: 0.0,
            amplitude: 1.0,
            events: Vec::new(),
            harmonics: vec![(3, 0.10), (5, 0.05)],
            noise_rms: 0.0,
            seed: 0,
            channel_id: "synth".into(),
            unit: Unit::Dimensionless,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub true_instants: Vec<usize>,
    pub expected_classification: Classification,
}

impl SynthSpec {
    pub fn len(&self) -> usize {
        (self.duration * self.fs).round() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn event_samples(&self) -> Vec<usize> {
        self.events
            .iter()
            .map(|e| (e.at * self.fs).round() as usize)
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.fs > 0.0 && self.f0 > 0.0 && self.duration > 0.0) {
            return bad("fs, f0 and duration must be positive".into());
        }
        if self.len() < 2 {
            return bad("duration too short for the sampling rate".into());
        }
        let top = self.harmonics.iter().map(|h| h.0).max().unwrap_or(1).max(1);
        if !(self.fs > 2.0 * self.f0 * top as f64) {
            return Err(Error::AboveNyquist {
                fs: self.fs,
                f: self.f0 * top as f64,
            });
        }
        if !(self.noise_rms >= 0.0 && self.noise_rms.is_finite()) {
            return bad(format!("noise_rms must be non-negative, got {}", self.noise_rms));
        }
        let mut prev = 0.0;
        for e in &self.events {
            if !(e.at > prev && e.at < self.duration) {
                return bad(format!(
                    "event instants must be strictly increasing inside (0, {}), got {}",
                    self.duration, e.at
                ));
            }
            prev = e.at;
            if let EventKind::DcOffsetDecay { tau, .. } = e.kind {
                if !(tau > 0.0) {
                    return bad(format!("decay tau must be positive, got {tau}"));
                }
            }
        }
        Ok(())
    }

    /// Noise-free samples.
    pub fn clean(&self) -> Vec<f64> {
        let n = self.len();
        let starts = self.event_samples();
        let mut amp = self.amplitude;
        let mut phase = self.phase;
        let mut decay: Option<(usize, f64, f64)> = None;
        let mut next = 0;
        let w = 2.0 * PI * self.f0 / self.fs;
        (0..n)
            .map(|k| {
                while next < starts.len() && starts[next] <= k {
                    match self.events[next].kind {
                        EventKind::AmplitudeStep { level } => amp = level,
                        EventKind::PhaseStep { radians } => phase += radians,
                        EventKind::DcOffsetDecay {
                            magnitude,
                            tau,
                            level,
                        } => {
                            amp = level;
                            decay = Some((starts[next], magnitude, tau));
                        }
                        EventKind::ClearToZero => amp = 0.0,
                    }
                    next += 1;
                }
                let theta = w * k as f64 + phase;
                let wave = theta.sin()
                    + self
                        .harmonics
                        .iter()
                        .map(|&(order, r)| r * (order as f64 * theta).sin())
                        .sum::<f64>();
                let offset = decay.map_or(0.0, |(k0, m, tau)| {
                    m * (-((k - k0) as f64 / self.fs) / tau).exp()
                });
                amp * wave + offset
            })
            .collect()
    }

    /// Seeded Gaussian noise with standard deviation `noise_rms`.
    pub fn noise(&self) -> Vec<f64> {
        let n = self.len();
        if self.noise_rms == 0.0 {
            return vec![0.0; n];
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let normal = Normal::new(0.0, self.noise_rms).expect("validated noise_rms");
        (0..n).map(|_| normal.sample(&mut rng)).collect()
    }

    /// RMS of the clean signal from the first event to the next (or to the
    /// end); the whole record when there are no events.
    pub fn fault_segment_rms(&self) -> f64 {
        let x = self.clean();
        let starts = self.event_samples();
        let a = starts.first().copied().unwrap_or(0).min(x.len());
        let b = starts.get(1).copied().unwrap_or(x.len()).min(x.len()).max(a + 1);
        let seg = &x[a..b.min(x.len())];
        (seg.iter().map(|v| v * v).sum::<f64>() / seg.len().max(1) as f64).sqrt()
    }

    /// Sets `noise_rms` so the fault segment has the given SNR in dB.
    pub fn with_snr_db(mut self, snr_db: f64) -> SynthSpec {
        self.noise_rms = self.fault_segment_rms() / 10f64.powf(snr_db / 20.0);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> SynthSpec {
        self.seed = seed;
        self
    }

    fn render(&self, extra: impl Fn(usize) -> f64) -> Result<Record> {
        self.validate()?;
        let x = self
            .clean()
            .into_iter()
            .zip(self.noise())
            .enumerate()
            .map(|(k, (c, e))| c + e + extra(k))
            .collect();
        Record::new(self.channel_id.clone(), self.unit, self.fs, x)
    }

    /// Generic generator; the expected class is derived from the event count.
    pub fn generate(&self) -> Result<(Record, GroundTruth)> {
        let record = self.render(|_| 0.0)?;
        let true_instants = self.event_samples();
        let expected_classification =
            crate::segmentation::classify(true_instants.len(), 3);
        Ok((
            record,
            GroundTruth {
                true_instants,
                expected_classification,
            },
        ))
    }
}

/// Piecewise sinusoid with fault, breaker-open and reclose events.
pub fn gen_fault_current(spec: &SynthSpec) -> Result<(Record, GroundTruth)> {
    let (record, mut truth) = spec.generate()?;
    truth.expected_classification = Classification::FaultSequence;
    Ok((record, truth))
}

/// Sinusoid whose amplitude changes at one event, with a decaying offset
/// added from that instant.
pub fn gen_resistive_decay(spec: &SynthSpec) -> Result<(Record, GroundTruth)> {
    match spec.events.as_slice() {
        [SynthEvent {
            kind: EventKind::DcOffsetDecay { .. },
            ..
        }] => {}
        _ => {
            return Err(Error::InvalidParameter(
                "resistive decay needs exactly one dc_offset_decay event".into(),
            ))
        }
    }
    let (record, mut truth) = spec.generate()?;
    truth.expected_classification = Classification::InceptionOnly;
    Ok((record, truth))
}

/// `K·(t − t_c)^α` for `t ≥ t_c`, zero before. `α = 0` is a jump of `K`.
pub fn cusp_trend(alpha: f64, k: f64, dt: f64) -> f64 {
    if dt < 0.0 {
        0.0
    } else {
        k * dt.powf(alpha)
    }
}

/// Baseline from `spec` plus an α-cusp of size `k` at `t_cusp` seconds.
pub fn gen_cusp(alpha: f64, k: f64, t_cusp: f64, spec: &SynthSpec) -> Result<(Record, GroundTruth)> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::InvalidParameter(format!(
            "cusp exponent must be in [0, 1), got {alpha}"
        )));
    }
    if !(k >= 0.0) {
        return Err(Error::InvalidParameter(format!("cusp size must be non-negative, got {k}")));
    }
    if !(t_cusp > 0.0 && t_cusp < spec.duration) {
        return Err(Error::InvalidParameter(format!(
            "cusp instant {t_cusp} outside the record"
        )));
    }
    let kc = (t_cusp * spec.fs).round() as usize;
    let tc = kc as f64 / spec.fs;
    let record = spec.render(|n| {
        if n < kc {
            0.0
        } else {
            cusp_trend(alpha, k, n as f64 / spec.fs - tc)
        }
    })?;
    Ok((
        record,
        GroundTruth {
            true_instants: vec![kc],
            expected_classification: Classification::InceptionOnly,
        },
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// Fault at 0.2 s (×5), breaker open at 0.36 s, reclose at 0.56 s.
    FaultCurrent,
    /// Inception at 0.2 s on a zero crossing: amplitude 0.6 plus a 0.3
    /// offset decaying with τ = 50 ms.
    ResistiveDecay,
    /// Six amplitude swings between 1 and 2.5, 60 ms apart.
    PowerSwing,
    /// Plain 50 Hz with harmonics, no events.
    Sine,
}

impl Preset {
    pub const ALL: [Preset; 4] = [
        Preset::FaultCurrent,
        Preset::ResistiveDecay,
        Preset::PowerSwing,
        Preset::Sine,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::FaultCurrent => "fault_current",
            Preset::ResistiveDecay => "resistive_decay",
            Preset::PowerSwing => "power_swing",
            Preset::Sine => "sine",
        }
    }

    pub fn spec(self) -> SynthSpec {
        let step = |at: f64, level: f64| SynthEvent {
            at,
            kind: EventKind::AmplitudeStep { level },
        };
        match self {
            Preset::FaultCurrent => SynthSpec {
                phase: PI / 2.0,
                events: vec![
                    step(0.2, 5.0),
                    SynthEvent {
                        at: 0.36,
                        kind: EventKind::ClearToZero,
                    },
                    step(0.56, 1.0),
                ],
                channel_id: "Ia".into(),
                unit: Unit::Ampere,
                ..SynthSpec::default()
            },
            Preset::ResistiveDecay => SynthSpec {
                duration: 0.6,
                events: vec![SynthEvent {
                    at: 0.2,
                    kind: EventKind::DcOffsetDecay {
                        magnitude: 0.3,
                        tau: 0.05,
                        level: 0.6,
                    },
                }],
                channel_id: "Va".into(),
                unit: Unit::Volt,
                ..SynthSpec::default()
            },
            Preset::PowerSwing => SynthSpec {
                phase: PI / 2.0,
                events: [2.5, 1.0, 2.5, 1.0, 2.5, 1.0]
                    .iter()
                    .enumerate()
                    .map(|(i, &level)| step(0.2 + 0.06 * i as f64, level))
                    .collect(),
                channel_id: "Ia".into(),
                unit: Unit::Ampere,
                ..SynthSpec::default()
            },
            Preset::Sine => SynthSpec {
                duration: 0.8,
                ..SynthSpec::default()
            },
        }
    }

    pub fn generate(self, seed: u64, snr_db: Option<f64>) -> Result<(Record, GroundTruth)> {
        let mut spec = self.spec().with_seed(seed);
        if let Some(snr) = snr_db {
            spec = spec.with_snr_db(snr);
        }
        match self {
            Preset::FaultCurrent => gen_fault_current(&spec),
            Preset::ResistiveDecay => gen_resistive_decay(&spec),
            Preset::PowerSwing => {
                let (r, mut t) = spec.generate()?;
                t.expected_classification = Classification::TransientOrSwing;
                Ok((r, t))
            }
            Preset::Sine => spec.generate(),
        }
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Preset> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == key)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown synth preset '{s}'")))
    }
}

impl std::fmt::Display for Preset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_fault_current_is_piecewise() {
        let (r, truth) = Preset::FaultCurrent.generate(0, None).unwrap();
        assert_eq!(truth.true_instants, vec![500, 900, 1400]);
        assert_eq!(truth.expected_classification, Classification::FaultSequence);
        assert_eq!(r.len(), 2000);
        let x = r.samples();
        // phase π/2: every sample index multiple of 50 is a crest of 0.95
        assert!((x[450] - 0.95).abs() < 1e-9);
        assert!((x[500] - 5.0 * 0.95).abs() < 1e-9);
        assert!(x[900..1400].iter().all(|&v| v == 0.0));
        assert!((x[1400] - 0.95).abs() < 1e-9);
    }

    #[test]
    fn same_seed_same_record() {
        let a = Preset::FaultCurrent.generate(7, Some(30.0)).unwrap().0;
        let b = Preset::FaultCurrent.generate(7, Some(30.0)).unwrap().0;
        let c = Preset::FaultCurrent.generate(8, Some(30.0)).unwrap().0;
        assert_eq!(a.samples(), b.samples());
        assert_ne!(a.samples(), c.samples());
    }

    #[test]
    fn decay_offset() {
        let spec = SynthSpec {
            harmonics: vec![],
            amplitude: 0.0,
            events: vec![SynthEvent {
                at: 0.2,
                kind: EventKind::DcOffsetDecay {
                    magnitude: 2.0,
                    tau: 0.05,
                    level: 0.0,
                },
            }],
            ..SynthSpec::default()
        };
        let (r, truth) = gen_resistive_decay(&spec).unwrap();
        assert_eq!(truth.expected_classification, Classification::InceptionOnly);
        // t_event + τ = 0.25 s = sample 625
        assert!((r.samples()[625] - 2.0 / std::f64::consts::E).abs() < 1e-9);
        assert_eq!(r.samples()[499], 0.0);

        let mut bad = spec.clone();
        bad.events[0].kind = EventKind::DcOffsetDecay {
            magnitude: 2.0,
            tau: 0.0,
            level: 1.0,
        };
        assert!(gen_resistive_decay(&bad).is_err());
        assert!(gen_resistive_decay(&SynthSpec::default()).is_err());
    }

    #[test]
    fn zero_magnitude_decay_is_an_amplitude_change() {
        let mut spec = Preset::ResistiveDecay.spec();
        spec.events[0].kind = EventKind::DcOffsetDecay {
            magnitude: 0.0,
            tau: 0.05,
            level: 0.6,
        };
        let mut plain = spec.clone();
        plain.events[0].kind = EventKind::AmplitudeStep { level: 0.6 };
        assert_eq!(spec.clean(), plain.clean());
    }

    #[test]
    fn cusp_trend_values() {
        assert_eq!(cusp_trend(0.0, 3.0, 0.0), 3.0);
        assert_eq!(cusp_trend(0.0, 3.0, -1e-9), 0.0);
        for dt in [1e-4, 0.01, 0.37] {
            assert!((cusp_trend(0.5, 1.0, dt) - dt.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn cusp_records() {
        let spec = Preset::Sine.spec();
        let base = spec.generate().unwrap().0;
        let (jump, truth) = gen_cusp(0.0, 3.0, 0.2, &spec).unwrap();
        assert_eq!(truth.true_instants, vec![500]);
        for k in [0, 499, 500, 1999] {
            let expect = if k >= 500 { 3.0 } else { 0.0 };
            assert!((jump.samples()[k] - base.samples()[k] - expect).abs() < 1e-12);
        }
        let (flat, _) = gen_cusp(0.5, 0.0, 0.2, &spec).unwrap();
        assert_eq!(flat.samples(), base.samples());
        assert!(gen_cusp(1.0, 1.0, 0.2, &spec).is_err());
    }

    #[test]
    fn noise_calibration() {
        let spec = SynthSpec {
            duration: 40.0,
            noise_rms: 0.37,
            seed: 3,
            ..SynthSpec::default()
        };
        let e = spec.noise();
        assert_eq!(e.len(), 100_000);
        let rms = (e.iter().map(|v| v * v).sum::<f64>() / e.len() as f64).sqrt();
        assert!((rms / 0.37 - 1.0).abs() < 0.02, "{rms}");
    }

    #[test]
    fn snr_uses_fault_segment() {
        let spec = Preset::FaultCurrent.spec().with_snr_db(20.0);
        let seg = Preset::FaultCurrent.spec().fault_segment_rms();
        // 5 × rms of (1, 0.1, 0.05) harmonics
        let expect = 5.0 * ((1.0 + 0.01 + 0.0025) / 2.0f64).sqrt();
        assert!((seg - expect).abs() < 1e-9, "{seg}");
        assert!((spec.noise_rms - expect / 10.0).abs() < 1e-9);
    }

    #[test]
    fn invalid_specs() {
        let mut s = Preset::FaultCurrent.spec();
        s.events.swap(0, 1);
        assert!(s.validate().is_err());
        let s = SynthSpec {
            fs: 500.0,
            ..SynthSpec::default()
        };
        assert!(matches!(s.validate(), Err(Error::AboveNyquist { .. })));
    }

    #[test]
    fn csv_round_trip() {
        let (r, _) = Preset::FaultCurrent.generate(1, Some(30.0)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fc.csv");
        let set = crate::signal_io::RecordSet::new(vec![r.clone()], "synth").unwrap();
        crate::signal_io::write_csv(&set, &path).unwrap();
        let back = crate::signal_io::load_csv(&path, Some(2500.0)).unwrap();
        assert_eq!(back.records()[0].samples(), r.samples());
    }

    #[test]
    fn preset_names() {
        for p in Preset::ALL {
            assert_eq!(p.name().parse::<Preset>().unwrap(), p);
        }
        assert_eq!("fault-current".parse::<Preset>().unwrap(), Preset::FaultCurrent);
        assert!("nope".parse::<Preset>().is_err());
    }
}
