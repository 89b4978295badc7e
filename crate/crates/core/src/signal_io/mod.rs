//! Sampled waveform records and their on-disk formats.
//!
//! A [`Record`] is one channel of a fault recording: a sampling rate, a unit
//! and a run of finite samples. Records are validated when they are built and
//! are immutable afterwards. [`RecordSet`] groups the channels of one file and
//! guarantees a single sampling rate across them.

mod comtrade;
mod csv;

pub use self::comtrade::load_comtrade_1991_ascii;
pub use self::csv::{load_csv, write_csv};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Unit {
    Volt,
    Ampere,
    #[default]
    Dimensionless,
}

impl Unit {
    /// Best-effort mapping of a unit string such as `kV` or `A`.
    pub fn from_label(label: &str) -> Unit {
        let l = label.trim().to_ascii_lowercase();
        match l.trim_start_matches(['k', 'm', 'µ', 'u']) {
            "v" => Unit::Volt,
            "a" => Unit::Ampere,
            _ if l == "volt" || l == "volts" => Unit::Volt,
            _ if l == "ampere" || l == "amperes" || l == "amp" => Unit::Ampere,
            _ => Unit::Dimensionless,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    channel_id: String,
    unit: Unit,
    fs: f64,
    samples: Vec<f64>,
    t0: f64,
    warmup: usize,
}

impl Record {
    pub fn new(
        channel_id: impl Into<String>,
        unit: Unit,
        fs: f64,
        samples: Vec<f64>,
    ) -> Result<Record> {
        let channel_id = channel_id.into();
        if !(fs.is_finite() && fs > 0.0) {
            return Err(Error::InvalidRecord(format!(
                "channel '{channel_id}': sampling rate must be positive, got {fs}"
            )));
        }
        if samples.is_empty() {
            return Err(Error::InvalidRecord(format!(
                "channel '{channel_id}': no samples"
            )));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidRecord(format!(
                "channel '{channel_id}': non-finite sample at index {i}"
            )));
        }
        Ok(Record {
            channel_id,
            unit,
            fs,
            samples,
            t0: 0.0,
            warmup: 0,
        })
    }

    pub fn with_t0(mut self, t0: f64) -> Record {
        self.t0 = t0;
        self
    }

    /// Marks the first `n` samples as filter warm-up (not valid output).
    pub fn with_warmup(mut self, n: usize) -> Record {
        self.warmup = n.min(self.samples.len());
        self
    }

    /// Same metadata, new samples. Fails if the new samples break the record
    /// invariants.
    pub fn with_samples(&self, samples: Vec<f64>) -> Result<Record> {
        Ok(Record::new(self.channel_id.clone(), self.unit, self.fs, samples)?
            .with_t0(self.t0)
            .with_warmup(self.warmup))
    }

    pub fn channel_id(&self) -> &str {
        &self.channel_id
    }

    pub fn unit(&self) -> Unit {
        self.unit
    }

    pub fn fs(&self) -> f64 {
        self.fs
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn warmup(&self) -> usize {
        self.warmup
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn time_of(&self, index: usize) -> f64 {
        self.t0 + index as f64 / self.fs
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }

    pub fn rms(&self) -> f64 {
        (self.samples.iter().map(|v| v * v).sum::<f64>() / self.samples.len() as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecordSet {
    records: Vec<Record>,
    source: String,
}

impl RecordSet {
    pub fn new(records: Vec<Record>, source: impl Into<String>) -> Result<RecordSet> {
        let source = source.into();
        if let Some(first) = records.first() {
            if let Some(other) = records.iter().find(|r| r.fs != first.fs) {
                return Err(Error::InvalidRecord(format!(
                    "{source}: channels '{}' and '{}' have different sampling rates ({} vs {} Hz)",
                    first.channel_id, other.channel_id, first.fs, other.fs
                )));
            }
        }
        Ok(RecordSet { records, source })
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn into_records(self) -> Vec<Record> {
        self.records
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn fs(&self) -> Option<f64> {
        self.records.first().map(Record::fs)
    }

    pub fn get(&self, channel_id: &str) -> Option<&Record> {
        self.records.iter().find(|r| r.channel_id == channel_id)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NormalizeMode {
    /// x − mean(x)
    #[default]
    SubtractMean,
    /// x / mean(x)
    DivideMean,
}

/// Removes the record mean. A constant record maps to all zeros.
pub fn normalize(record: &Record) -> Record {
    let mean = record.mean();
    let samples = record.samples.iter().map(|v| v - mean).collect();
    Record {
        samples,
        ..record.clone()
    }
}

pub fn normalize_with(record: &Record, mode: NormalizeMode) -> Result<Record> {
    match mode {
        NormalizeMode::SubtractMean => Ok(normalize(record)),
        NormalizeMode::DivideMean => {
            let mean = record.mean();
            let scale = record.samples.iter().map(|v| v.abs()).fold(0.0, f64::max);
            if mean.abs() <= scale * 1e-12 {
                return Err(Error::InvalidParameter(format!(
                    "channel '{}': mean is zero, cannot divide by it",
                    record.channel_id
                )));
            }
            record.with_samples(record.samples.iter().map(|v| v / mean).collect())
        }
    }
}
