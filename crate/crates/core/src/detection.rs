//! Robust noise scale, universal threshold and threshold-crossing detection
//! on detail coefficients.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_MAD_DIVISOR: f64 = 0.6725;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Centering {
    /// Deviations about the median of the coefficients.
    #[default]
    Median,
    /// Deviations about zero.
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub sigma: f64,
    pub n: usize,
    #[serde(rename = "T")]
    pub threshold: f64,
    pub divisor: f64,
}

impl ThresholdReport {
    /// Scale from `d[sigma_from]`, threshold for `n = d.len()` coefficients.
    pub fn estimate(
        d: &[f64],
        sigma_from: Range<usize>,
        divisor: f64,
        centering: Centering,
    ) -> Result<ThresholdReport> {
        let sample = d.get(sigma_from.clone()).ok_or_else(|| {
            Error::InvalidParameter(format!(
                "noise window {sigma_from:?} outside {} coefficients",
                d.len()
            ))
        })?;
        let sigma = mad_sigma_with(sample, divisor, centering)?;
        Ok(ThresholdReport {
            sigma,
            n: d.len(),
            threshold: universal_threshold(sigma, d.len())?,
            divisor,
        })
    }

    pub fn from_details(d: &[f64], divisor: f64) -> Result<ThresholdReport> {
        Self::estimate(d, 0..d.len(), divisor, Centering::Median)
    }
}

/// Median; the mean of the two central order statistics for even lengths.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// `median(|d − median(d)|) / divisor`.
pub fn mad_sigma(d: &[f64], divisor: f64) -> Result<f64> {
    mad_sigma_with(d, divisor, Centering::Median)
}

pub fn mad_sigma_with(d: &[f64], divisor: f64, centering: Centering) -> Result<f64> {
    if d.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 coefficients for a scale estimate, got {}",
            d.len()
        )));
    }
    if !(divisor > 0.0 && divisor.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "MAD divisor must be positive, got {divisor}"
        )));
    }
    let center = match centering {
        Centering::Median => median(d),
        Centering::Zero => 0.0,
    };
    let dev: Vec<f64> = d.iter().map(|v| (v - center).abs()).collect();
    Ok(median(&dev) / divisor)
}

/// `σ·√(2 ln n)`.
pub fn universal_threshold(sigma: f64, n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "threshold needs n >= 2, got {n}"
        )));
    }
    if !(sigma >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "sigma must be non-negative, got {sigma}"
        )));
    }
    Ok(sigma * (2.0 * (n as f64).ln()).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectOptions {
    /// Detail indices eligible for detection.
    pub valid: Range<usize>,
    /// Detail-rate shift applied before mapping back: instant = 2·(m − delay).
    pub group_delay: isize,
    /// Crossings must also exceed this absolute level.
    pub floor: f64,
}

impl DetectOptions {
    /// Excludes coefficients that see the first `warmup` input samples and
    /// those whose 4-tap support wraps past the end of a length-`len` input.
    pub fn for_signal(len: usize, warmup: usize, group_delay: isize) -> DetectOptions {
        let start = warmup.div_ceil(2);
        let end = if len >= 3 { (len - 3).div_ceil(2) } else { 0 };
        DetectOptions {
            valid: start..end.max(start),
            group_delay,
            floor: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangePointSet {
    /// Original-signal sample indices, one per run of consecutive crossings.
    pub instants: Vec<usize>,
    /// Number of crossings behind each instant.
    pub run_lengths: Vec<usize>,
    /// Every detail index that crossed.
    pub detail_indices: Vec<usize>,
    pub report: ThresholdReport,
}

impl ChangePointSet {
    pub fn empty(report: ThresholdReport) -> ChangePointSet {
        ChangePointSet {
            instants: Vec::new(),
            run_lengths: Vec::new(),
            detail_indices: Vec::new(),
            report,
        }
    }

    pub fn len(&self) -> usize {
        self.instants.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instants.is_empty()
    }
}

/// Indices `m` in the valid range with `|d[m]| > T` (and above the floor).
pub fn crossings(d: &[f64], threshold: f64, options: &DetectOptions) -> Vec<usize> {
    let level = threshold.max(options.floor);
    let end = options.valid.end.min(d.len());
    (options.valid.start.min(end)..end)
        .filter(|&m| d[m].abs() > level)
        .collect()
}

/// Raw change instants: each run of consecutive crossings gives one instant
/// at its first coefficient, mapped to `2·(m − group_delay)` and clamped to
/// `[0, original_length)`.
pub fn detect(
    d: &[f64],
    report: &ThresholdReport,
    options: &DetectOptions,
    original_length: usize,
) -> ChangePointSet {
    let idx = crossings(d, report.threshold, options);
    let mut out = ChangePointSet::empty(*report);
    let last = original_length.saturating_sub(1) as isize;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i + 1;
        while j < idx.len() && idx[j] == idx[j - 1] + 1 {
            j += 1;
        }
        let m = idx[i] as isize;
        let instant = (2 * (m - options.group_delay)).clamp(0, last) as usize;
        let run = j - i;
        if out.instants.last() == Some(&instant) {
            *out.run_lengths.last_mut().expect("parallel vectors") += run;
        } else {
            out.instants.push(instant);
            out.run_lengths.push(run);
        }
        i = j;
    }
    out.detail_indices = idx;
    out
}
