//! One-cycle prediction-error ("whitening") filters.
//!
//! All three variants share the transfer function
//!
//! ```text
//! A(z) = 1 − α·z^−(C−1) − β·z^−C
//! ```
//!
//! where `C` is the number of samples per nominal cycle. The Fourier filter is
//! `(α, β) = (0, 1)`, which nulls the fundamental and every harmonic when
//! `fs / f_fund` is an integer. The adjusted filter places the zero at an
//! arbitrary pulsation `ω₀` by solving `z^C − αz − β = 0` at `z = e^{jω₀Ts}`.
//! The adaptive filter starts from the adjusted solution and follows an LMS
//! gradient on `(α, β)` that minimises the output power, optionally pinned to
//! `α + β = 1` so the DC gain stays exactly zero.
//!
//! The first `C` outputs are not defined by the recursion; they are emitted as
//! zeros and the span is recorded as warm-up on the output [`Record`].

use std::collections::VecDeque;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal_io::Record;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WhiteningMode {
    FixedFourier,
    AdjustedFourier,
    Adaptive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WhiteningConfig {
    pub mode: WhiteningMode,
    /// Nominal network frequency in Hz; sets `C`.
    pub f_fund: f64,
    /// Frequency in Hz at which the adjusted filter places its zero.
    pub f_pulsation: f64,
    /// LMS step size, applied to the record scaled to unit RMS.
    pub mu: f64,
    pub enforce_dc_null: bool,
}

impl Default for WhiteningConfig {
    fn default() -> Self {
        WhiteningConfig {
            mode: WhiteningMode::AdjustedFourier,
            f_fund: 50.0,
            f_pulsation: 51.0,
            mu: 1e-4,
            enforce_dc_null: true,
        }
    }
}

impl WhiteningConfig {
    pub fn validate(&self, fs: f64) -> Result<()> {
        if !(self.f_fund > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "fundamental frequency must be positive, got {}",
                self.f_fund
            )));
        }
        if !(self.f_pulsation > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "pulsation frequency must be positive, got {}",
                self.f_pulsation
            )));
        }
        if self.mode == WhiteningMode::Adaptive && !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "LMS step size must be positive, got {}",
                self.mu
            )));
        }
        if self.f_pulsation >= fs / 2.0 {
            return Err(Error::AboveNyquist {
                fs,
                f: self.f_pulsation,
            });
        }
        samples_per_cycle(fs, self.f_fund).map(|_| ())
    }
}

/// `C = round(fs / f_fund)`, ties away from zero.
pub fn samples_per_cycle(fs: f64, f_fund: f64) -> Result<usize> {
    if !(f_fund > 0.0) || !(fs > 2.0 * f_fund) {
        return Err(Error::AboveNyquist { fs, f: f_fund });
    }
    Ok((fs / f_fund).round() as usize)
}

/// Coefficients of the adjusted Fourier filter with its zero at `f_pulsation`.
pub fn adjusted_coefficients(f_pulsation: f64, fs: f64, delay: usize) -> Result<(f64, f64)> {
    if !(f_pulsation > 0.0 && f_pulsation < fs / 2.0) {
        return Err(Error::AboveNyquist { fs, f: f_pulsation });
    }
    let theta = 2.0 * PI * f_pulsation / fs;
    let s = theta.sin();
    if s.abs() < 1e-12 {
        return Err(Error::DegeneratePulsation);
    }
    let c = delay as f64;
    let alpha = (theta * c).sin() / s;
    let beta = (theta * c).cos() - alpha * theta.cos();
    Ok((alpha, beta))
}

/// `|e^{jθC} − α·e^{jθ} − β|` with `θ = 2π·f/fs`: zero when the filter has a
/// root at `f`.
pub fn root_residual(alpha: f64, beta: f64, f: f64, fs: f64, delay: usize) -> f64 {
    let theta = 2.0 * PI * f / fs;
    let tc = theta * delay as f64;
    let re = tc.cos() - alpha * theta.cos() - beta;
    let im = tc.sin() - alpha * theta.sin();
    re.hypot(im)
}

/// Magnitude response `|A(e^{jωTs})|` at each frequency in Hz.
pub fn frequency_response(
    alpha: f64,
    beta: f64,
    delay: usize,
    freqs: &[f64],
    fs: f64,
) -> Result<Vec<f64>> {
    freqs
        .iter()
        .map(|&f| {
            if !(0.0..=fs / 2.0).contains(&f) {
                return Err(Error::AboveNyquist { fs, f });
            }
            let w = 2.0 * PI * f / fs;
            let a = w * (delay as f64 - 1.0);
            let b = w * delay as f64;
            let re = 1.0 - alpha * a.cos() - beta * b.cos();
            let im = alpha * a.sin() + beta * b.sin();
            Ok(re.hypot(im))
        })
        .collect()
}

/// Per-sample filter state: the delay line and the current coefficients.
#[derive(Debug, Clone)]
pub struct WhiteningState {
    delay: usize,
    alpha: f64,
    beta: f64,
    mu: f64,
    enforce_dc_null: bool,
    history: VecDeque<f64>,
    trajectory: Option<Vec<(f64, f64)>>,
}

impl WhiteningState {
    /// A non-adapting filter with fixed coefficients.
    pub fn fixed(alpha: f64, beta: f64, delay: usize) -> Result<WhiteningState> {
        Self::new(alpha, beta, delay, 0.0, false, false)
    }

    /// An LMS-adapting filter starting from `(alpha, beta)`.
    pub fn adaptive(
        alpha: f64,
        beta: f64,
        delay: usize,
        mu: f64,
        enforce_dc_null: bool,
    ) -> Result<WhiteningState> {
        Self::new(alpha, beta, delay, mu, enforce_dc_null, true)
    }

    fn new(
        alpha: f64,
        beta: f64,
        delay: usize,
        mu: f64,
        enforce_dc_null: bool,
        record: bool,
    ) -> Result<WhiteningState> {
        if delay < 2 {
            return Err(Error::InvalidParameter(format!(
                "delay must be at least 2 samples, got {delay}"
            )));
        }
        let mut state = WhiteningState {
            delay,
            alpha,
            beta,
            mu,
            enforce_dc_null,
            history: VecDeque::with_capacity(delay),
            trajectory: record.then(Vec::new),
        };
        if enforce_dc_null {
            state.project();
        }
        Ok(state)
    }

    pub fn delay(&self) -> usize {
        self.delay
    }

    pub fn coefficients(&self) -> (f64, f64) {
        (self.alpha, self.beta)
    }

    /// Gain at z = 1.
    pub fn dc_gain(&self) -> f64 {
        1.0 - self.alpha - self.beta
    }

    pub fn trajectory(&self) -> Option<&[(f64, f64)]> {
        self.trajectory.as_deref()
    }

    fn project(&mut self) {
        // equal split of the violation; β is then the exact complement of α
        let excess = self.alpha + self.beta - 1.0;
        self.alpha -= excess / 2.0;
        self.beta = 1.0 - self.alpha;
    }

    /// Feeds one sample. Returns `None` while the delay line fills, otherwise
    /// the prediction error for this sample.
    pub fn step(&mut self, x: f64) -> Option<f64> {
        if self.history.len() < self.delay {
            self.history.push_back(x);
            return None;
        }
        let oldest = self.history[0]; // x[k − C]
        let next = self.history[1]; // x[k − C + 1]
        let e = x - self.alpha * next - self.beta * oldest;
        if self.mu != 0.0 {
            self.alpha += self.mu * e * next;
            self.beta += self.mu * e * oldest;
            if self.enforce_dc_null {
                self.project();
            }
        }
        if let Some(t) = self.trajectory.as_mut() {
            t.push((self.alpha, self.beta));
        }
        self.history.pop_front();
        self.history.push_back(x);
        Some(e)
    }
}

/// `y[k] = x[k] − α·x[k−C+1] − β·x[k−C]`, with the first `C` outputs zeroed.
pub fn apply_fixed(record: &Record, alpha: f64, beta: f64, delay: usize) -> Result<Record> {
    let x = record.samples();
    if x.len() <= delay {
        return Err(Error::TooShort {
            len: x.len(),
            needed: delay + 1,
        });
    }
    let mut state = WhiteningState::fixed(alpha, beta, delay)?;
    let y = x.iter().map(|&v| state.step(v).unwrap_or(0.0)).collect();
    Ok(record.with_samples(y)?.with_warmup(delay))
}

#[derive(Debug, Clone)]
pub struct AdaptiveOutput {
    pub residual: Record,
    /// `(α, β)` after each post-warm-up sample.
    pub trajectory: Vec<(f64, f64)>,
}

/// LMS-adaptive whitening. The record is scaled to unit RMS for the
/// adaptation so that `mu` means the same thing for every record; the
/// residual is returned at the original scale.
pub fn apply_adaptive(record: &Record, config: &WhiteningConfig) -> Result<AdaptiveOutput> {
    if config.mode != WhiteningMode::Adaptive {
        return Err(Error::InvalidParameter(
            "apply_adaptive needs an adaptive configuration".into(),
        ));
    }
    config.validate(record.fs())?;
    let delay = samples_per_cycle(record.fs(), config.f_fund)?;
    let x = record.samples();
    if x.len() <= delay {
        return Err(Error::TooShort {
            len: x.len(),
            needed: delay + 1,
        });
    }
    let (alpha, beta) = adjusted_coefficients(config.f_pulsation, record.fs(), delay)?;
    let mut state =
        WhiteningState::adaptive(alpha, beta, delay, config.mu, config.enforce_dc_null)?;

    let rms = record.rms();
    let scale = if rms > 0.0 { rms } else { 1.0 };
    let mut y = Vec::with_capacity(x.len());
    for (k, &v) in x.iter().enumerate() {
        match state.step(v / scale) {
            None => y.push(0.0),
            Some(e) => {
                let (a, b) = state.coefficients();
                if !(e.is_finite() && a.is_finite() && b.is_finite()) {
                    return Err(Error::Diverged(k));
                }
                y.push(e * scale);
            }
        }
    }
    let trajectory = state.trajectory.take().unwrap_or_default();
    Ok(AdaptiveOutput {
        residual: record.with_samples(y)?.with_warmup(delay),
        trajectory,
    })
}

#[derive(Debug, Clone)]
pub struct Whitened {
    pub residual: Record,
    pub delay: usize,
    /// Initial coefficients.
    pub alpha: f64,
    pub beta: f64,
    pub trajectory: Option<Vec<(f64, f64)>>,
}

/// Runs whichever filter `config.mode` selects.
pub fn whiten(record: &Record, config: &WhiteningConfig) -> Result<Whitened> {
    config.validate(record.fs())?;
    let delay = samples_per_cycle(record.fs(), config.f_fund)?;
    match config.mode {
        WhiteningMode::FixedFourier => Ok(Whitened {
            residual: apply_fixed(record, 0.0, 1.0, delay)?,
            delay,
            alpha: 0.0,
            beta: 1.0,
            trajectory: None,
        }),
        WhiteningMode::AdjustedFourier => {
            let (alpha, beta) = adjusted_coefficients(config.f_pulsation, record.fs(), delay)?;
            Ok(Whitened {
                residual: apply_fixed(record, alpha, beta, delay)?,
                delay,
                alpha,
                beta,
                trajectory: None,
            })
        }
        WhiteningMode::Adaptive => {
            let (alpha, beta) = adjusted_coefficients(config.f_pulsation, record.fs(), delay)?;
            let out = apply_adaptive(record, config)?;
            Ok(Whitened {
                residual: out.residual,
                delay,
                alpha,
                beta,
                trajectory: Some(out.trajectory),
            })
        }
    }
}
