//! End-to-end processing of a record set: normalize → whiten → decompose →
//! threshold → detect → smooth → classify.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::detection::{self, Centering, ChangePointSet, DetectOptions, ThresholdReport};
use crate::error::{Error, Result};
use crate::segmentation::{self, Classification, Segment, SmoothingConfig};
use crate::signal_io::{self, NormalizeMode, Record, RecordSet};
use crate::synth::{GroundTruth, Preset};
use crate::wavelet::{self, Boundary, Normalization, WaveletBasis};
use crate::whitening::{self, WhiteningConfig, WhiteningMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputFormat {
    #[default]
    Csv,
    Comtrade,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Whitening {
    None,
    Fixed,
    #[default]
    Adjusted,
    Adaptive,
}

impl Whitening {
    fn mode(self) -> Option<WhiteningMode> {
        match self {
            Whitening::None => None,
            Whitening::Fixed => Some(WhiteningMode::FixedFourier),
            Whitening::Adjusted => Some(WhiteningMode::AdjustedFourier),
            Whitening::Adaptive => Some(WhiteningMode::Adaptive),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthInput {
    pub preset: Preset,
    pub seed: u64,
    /// Fault-segment SNR in dB; noise-free when absent.
    pub snr_db: Option<f64>,
}

/// Every knob of a run. Unset optional fields are resolved against the
/// record before processing, and the resolved copy is what results echo.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub input: Option<PathBuf>,
    pub format: InputFormat,
    pub synth: Option<SynthInput>,
    /// Sampling rate; inferred from the input when absent.
    pub fs: Option<f64>,
    /// Process only this channel.
    pub channel: Option<String>,
    pub normalize: NormalizeMode,
    pub f0: f64,
    pub whitening: Whitening,
    pub pulsation: f64,
    pub mu: f64,
    pub enforce_dc_null: bool,
    pub levels: usize,
    pub boundary: Boundary,
    pub mad_divisor: f64,
    pub mad_centering: Centering,
    /// Estimate σ from the first this-many seconds only.
    pub noise_prefix: Option<f64>,
    /// Crossings must also exceed this fraction of the normalized RMS.
    pub threshold_floor: f64,
    pub group_delay: isize,
    /// Keep only level-1 instants that also cross at every coarser level.
    pub corroborate: bool,
    pub merge_window: Option<usize>,
    pub min_run: usize,
    pub expected_events: usize,
    pub min_segment: Option<usize>,
    pub out_json: Option<PathBuf>,
    pub out_plots: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            input: None,
            format: InputFormat::Csv,
            synth: None,
            fs: None,
            channel: None,
            normalize: NormalizeMode::SubtractMean,
            f0: 50.0,
            whitening: Whitening::Adjusted,
            pulsation: 51.0,
            mu: 1e-4,
            enforce_dc_null: true,
            levels: 1,
            boundary: Boundary::Periodic,
            mad_divisor: detection::DEFAULT_MAD_DIVISOR,
            mad_centering: Centering::Median,
            noise_prefix: None,
            threshold_floor: 1e-8,
            group_delay: -1,
            corroborate: false,
            merge_window: None,
            min_run: 2,
            expected_events: 3,
            min_segment: None,
            out_json: None,
            out_plots: None,
        }
    }
}

impl PipelineConfig {
    pub fn samples_per_cycle(&self, fs: f64) -> Result<usize> {
        whitening::samples_per_cycle(fs, self.f0)
    }

    pub fn whitening_config(&self) -> Option<WhiteningConfig> {
        self.whitening.mode().map(|mode| WhiteningConfig {
            mode,
            f_fund: self.f0,
            f_pulsation: self.pulsation,
            mu: self.mu,
            enforce_dc_null: self.enforce_dc_null,
        })
    }

    pub fn smoothing(&self, fs: f64) -> Result<SmoothingConfig> {
        let base = SmoothingConfig::for_cycle(self.samples_per_cycle(fs)?);
        Ok(SmoothingConfig {
            merge_window: self.merge_window.unwrap_or(base.merge_window),
            min_run: self.min_run,
            expected_events: self.expected_events,
            min_segment: self.min_segment.unwrap_or(base.min_segment),
        })
    }

    /// Cross-field checks against the record's sampling rate.
    pub fn validate(&self, fs: f64) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        self.samples_per_cycle(fs)?;
        if let Some(w) = self.whitening_config() {
            w.validate(fs)?;
        }
        if self.levels == 0 {
            return bad("levels must be at least 1".into());
        }
        if !(self.mad_divisor > 0.0 && self.mad_divisor.is_finite()) {
            return bad(format!("mad divisor must be positive, got {}", self.mad_divisor));
        }
        if !(self.threshold_floor >= 0.0) {
            return bad("threshold floor must be non-negative".into());
        }
        if let Some(p) = self.noise_prefix {
            if !(p > 0.0) {
                return bad(format!("noise prefix must be positive, got {p}"));
            }
        }
        if self.merge_window == Some(0) {
            return bad("merge window must be at least 1".into());
        }
        if self.min_run == 0 || self.expected_events == 0 {
            return bad("min_run and expected_events must be at least 1".into());
        }
        Ok(())
    }

    /// Copy with every defaulted quantity made explicit for `fs`.
    pub fn resolved(&self, fs: f64) -> Result<PipelineConfig> {
        let s = self.smoothing(fs)?;
        Ok(PipelineConfig {
            fs: Some(fs),
            merge_window: Some(s.merge_window),
            min_segment: Some(s.min_segment),
            ..self.clone()
        })
    }

    /// Reads a JSON config; missing fields take their defaults.
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<PipelineConfig> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| Error::Malformed {
            path: path.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        })
    }
}

/// Per-channel output. Serializes to the stable result schema; the
/// intermediate signals are kept for plotting only.
#[derive(Debug, Clone, Serialize)]
pub struct ChannelResult {
    pub channel: String,
    pub config: PipelineConfig,
    pub threshold: ThresholdReport,
    pub raw_instants: Vec<usize>,
    pub instants: Vec<usize>,
    pub segments: Vec<Segment>,
    pub classification: Classification,
    pub timings_ms: BTreeMap<String, f64>,
    #[serde(skip)]
    pub original: Vec<f64>,
    #[serde(skip)]
    pub whitened: Vec<f64>,
    #[serde(skip)]
    pub detail: Vec<f64>,
    #[serde(skip)]
    pub raw: Option<ChangePointSet>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PipelineResult {
    pub source: String,
    pub channels: Vec<ChannelResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<GroundTruth>,
}

struct Stopwatch {
    last: Instant,
    start: Instant,
    timings: BTreeMap<String, f64>,
}

impl Stopwatch {
    fn new() -> Stopwatch {
        let now = Instant::now();
        Stopwatch {
            last: now,
            start: now,
            timings: BTreeMap::new(),
        }
    }

    fn lap(&mut self, stage: &str) {
        let now = Instant::now();
        self.timings
            .insert(stage.to_string(), (now - self.last).as_secs_f64() * 1e3);
        self.last = now;
    }

    fn finish(mut self) -> BTreeMap<String, f64> {
        self.timings
            .insert("total".into(), self.start.elapsed().as_secs_f64() * 1e3);
        self.timings
    }
}

/// Runs every stage on one record.
pub fn run_record(record: &Record, config: &PipelineConfig) -> Result<ChannelResult> {
    let id = record.channel_id();
    let fs = record.fs();
    config.validate(fs).map_err(|e| e.in_stage("config", id))?;
    let config = config.resolved(fs).map_err(|e| e.in_stage("config", id))?;
    let smoothing = config.smoothing(fs).map_err(|e| e.in_stage("config", id))?;
    let n = record.len();
    let mut clock = Stopwatch::new();

    let normalized =
        signal_io::normalize_with(record, config.normalize).map_err(|e| e.in_stage("normalize", id))?;
    clock.lap("normalize");

    let whitened = match config.whitening_config() {
        None => normalized.clone(),
        Some(w) => {
            whitening::whiten(&normalized, &w)
                .map_err(|e| e.in_stage("whiten", id))?
                .residual
        }
    };
    clock.lap("whiten");

    let basis = WaveletBasis::db4(Normalization::Orthonormal);
    let tree = wavelet::msd_with(whitened.samples(), &basis, config.levels, config.boundary)
        .map_err(|e| e.in_stage("decompose", id))?;
    clock.lap("decompose");

    let detail = &tree.levels[0].detail;
    let mut options = DetectOptions::for_signal(n, whitened.warmup(), config.group_delay);
    options.floor = config.threshold_floor * normalized.rms();
    let sigma_from = match config.noise_prefix {
        None => options.valid.clone(),
        Some(seconds) => {
            let end = ((seconds * fs).round() as usize / 2).min(options.valid.end);
            options.valid.start..end.max(options.valid.start + 2)
        }
    };
    let sigma_from = if sigma_from.len() >= 2 && sigma_from.end <= detail.len() {
        sigma_from
    } else {
        0..detail.len()
    };
    let report = ThresholdReport::estimate(detail, sigma_from, config.mad_divisor, config.mad_centering)
        .map_err(|e| e.in_stage("threshold", id))?;
    clock.lap("threshold");

    let mut raw = detection::detect(detail, &report, &options, n);
    if config.corroborate && tree.depth() > 1 {
        raw = corroborate(raw, &tree, &config, whitened.warmup(), n)
            .map_err(|e| e.in_stage("detect", id))?;
    }
    clock.lap("detect");

    let smoothed = segmentation::smooth(&raw, n, &smoothing);
    clock.lap("smooth");

    Ok(ChannelResult {
        channel: id.to_string(),
        config,
        threshold: report,
        raw_instants: raw.instants.clone(),
        instants: smoothed.segments.event_instants.clone(),
        segments: smoothed.segments.segments,
        classification: smoothed.segments.classification,
        timings_ms: clock.finish(),
        original: record.samples().to_vec(),
        whitened: whitened.into_samples(),
        detail: detail.clone(),
        raw: Some(raw),
    })
}

// A level-1 run survives if every coarser level has a crossing within two
// coefficients of the matching position.
fn corroborate(
    raw: ChangePointSet,
    tree: &wavelet::DecompositionTree,
    config: &PipelineConfig,
    warmup: usize,
    n: usize,
) -> Result<ChangePointSet> {
    let mut per_level = Vec::new();
    for (j, level) in tree.levels.iter().enumerate().skip(1) {
        let scale = 1usize << j;
        let report = ThresholdReport::estimate(
            &level.detail,
            0..level.detail.len(),
            config.mad_divisor,
            config.mad_centering,
        )?;
        let opts = DetectOptions {
            valid: warmup.div_ceil(2 * scale)..level.detail.len(),
            group_delay: 0,
            floor: 0.0,
        };
        per_level.push((scale, detection::crossings(&level.detail, report.threshold, &opts)));
    }
    let mut out = ChangePointSet {
        instants: Vec::new(),
        run_lengths: Vec::new(),
        ..raw.clone()
    };
    for (&p, &r) in raw.instants.iter().zip(&raw.run_lengths) {
        let ok = per_level.iter().all(|(scale, hits)| {
            let m = (p.min(n) / scale) as isize;
            hits.iter().any(|&h| (h as isize - m).abs() <= 2)
        });
        if ok {
            out.instants.push(p);
            out.run_lengths.push(r);
        }
    }
    Ok(out)
}

/// Loads (or synthesizes) the configured input.
pub fn load_input(config: &PipelineConfig) -> Result<(RecordSet, Option<GroundTruth>)> {
    if let Some(s) = &config.synth {
        let (record, truth) = s.preset.generate(s.seed, s.snr_db)?;
        let label = format!("synth:{}:seed={}", s.preset, s.seed);
        return Ok((RecordSet::new(vec![record], label)?, Some(truth)));
    }
    let path = config
        .input
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("no input file or synth preset given".into()))?;
    let set = match config.format {
        InputFormat::Csv => signal_io::load_csv(path, config.fs)?,
        InputFormat::Comtrade => {
            let set = signal_io::load_comtrade_1991_ascii(path)?;
            if let (Some(given), Some(fs)) = (config.fs, set.fs()) {
                if ((fs - given) / given).abs() > 1e-3 {
                    return Err(Error::SamplingRateMismatch {
                        inferred: fs,
                        given,
                    });
                }
            }
            set
        }
    };
    Ok((set, None))
}

/// Processes every selected channel of the input, one thread per channel.
pub fn run_pipeline(config: &PipelineConfig) -> Result<PipelineResult> {
    let (set, ground_truth) = load_input(config)?;
    let records: Vec<&Record> = match &config.channel {
        Some(c) => vec![set
            .get(c)
            .ok_or_else(|| Error::InvalidParameter(format!("no channel named '{c}'")))?],
        None => set.records().iter().collect(),
    };
    if records.is_empty() {
        return Err(Error::InvalidParameter("input has no channels".into()));
    }
    let channels = std::thread::scope(|scope| {
        let handles: Vec<_> = records
            .iter()
            .map(|r| scope.spawn(move || run_record(r, config)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("channel worker panicked"))
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(PipelineResult {
        source: set.source().to_string(),
        channels,
        ground_truth,
    })
}

fn file_stem(channel: &str) -> String {
    channel
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

fn write_columns<I>(path: &Path, header: &str, rows: I) -> Result<()>
where
    I: IntoIterator<Item = (usize, f64)>,
{
    let err = |source| Error::Write {
        path: path.to_path_buf(),
        source,
    };
    let mut out = BufWriter::new(fs::File::create(path).map_err(err)?);
    writeln!(out, "{header}").map_err(err)?;
    for (i, v) in rows {
        writeln!(out, "{i} {v:.12e}").map_err(err)?;
    }
    out.flush().map_err(err)
}

/// Writes the plot panels for one channel into `dir`: `<ch>_original.txt`,
/// `<ch>_whitened.txt`, `<ch>_detail.txt` (half rate), `<ch>_threshold.txt`
/// and `<ch>_impulses.txt`. Returns the written paths.
pub fn emit_plot_data(result: &ChannelResult, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|source| Error::Write {
        path: dir.to_path_buf(),
        source,
    })?;
    let stem = file_stem(&result.channel);
    let path = |panel: &str| dir.join(format!("{stem}_{panel}.txt"));
    let t = result.threshold.threshold;
    let files = [
        (path("original"), "sample value", result.original.iter().copied().enumerate().collect::<Vec<_>>()),
        (path("whitened"), "sample value", result.whitened.iter().copied().enumerate().collect()),
        (path("detail"), "coefficient value", result.detail.iter().copied().enumerate().collect()),
        (path("threshold"), "coefficient threshold", (0..result.detail.len()).map(|m| (m, t)).collect()),
        (path("impulses"), "sample value", result.instants.iter().map(|&i| (i, 1.0)).collect()),
    ];
    let mut written = Vec::with_capacity(files.len());
    for (p, header, rows) in files {
        write_columns(&p, header, rows)?;
        written.push(p);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal_io::Unit;

    fn synth(preset: Preset, seed: u64, snr: Option<f64>) -> Record {
        preset.generate(seed, snr).unwrap().0
    }

    fn assert_fault_sequence(res: &ChannelResult) {
        assert_eq!(res.classification, Classification::FaultSequence);
        assert_eq!(res.instants.len(), 3);
        for (got, want) in res.instants.iter().zip([500, 900, 1400]) {
            assert!(got.abs_diff(want) <= 25, "{:?}", res.instants);
        }
    }

    #[test]
    fn fault_current() {
        // exact harmonic nulls at 50 Hz
        let fixed = PipelineConfig {
            whitening: Whitening::Fixed,
            ..PipelineConfig::default()
        };
        assert_fault_sequence(&run_record(&synth(Preset::FaultCurrent, 0, None), &fixed).unwrap());
        let noisy = synth(Preset::FaultCurrent, 0, Some(40.0));
        assert_fault_sequence(&run_record(&noisy, &PipelineConfig::default()).unwrap());
    }

    #[test]
    fn pure_sine_has_no_event() {
        for w in [Whitening::Fixed, Whitening::Adjusted, Whitening::Adaptive] {
            let x: Vec<f64> = (0..2000)
                .map(|k| (2.0 * std::f64::consts::PI * 50.0 * k as f64 / 2500.0 + 0.4).sin())
                .collect();
            let r = Record::new("s", Unit::Volt, 2500.0, x).unwrap();
            let cfg = PipelineConfig {
                whitening: w,
                ..PipelineConfig::default()
            };
            let res = run_record(&r, &cfg).unwrap();
            assert_eq!(res.classification, Classification::NoEvent, "{w:?} {:?}", res.raw_instants);
            assert!(res.instants.is_empty());
        }
    }

    #[test]
    fn echo_is_resolved() {
        let r = synth(Preset::Sine, 0, None);
        let res = run_record(&r, &PipelineConfig::default()).unwrap();
        assert_eq!(res.config.merge_window, Some(50));
        assert_eq!(res.config.min_segment, Some(25));
        assert_eq!(res.config.fs, Some(2500.0));
        let v = serde_json::to_value(&res).unwrap();
        for key in ["channel", "config", "threshold", "raw_instants", "instants", "segments", "classification", "timings_ms"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert!(v["threshold"].get("T").is_some());
        assert!(res.timings_ms.values().all(|&t| t >= 0.0));
        // the echo reproduces the run
        let again: PipelineConfig = serde_json::from_value(v["config"].clone()).unwrap();
        assert_eq!(again, res.config);
    }

    #[test]
    fn stage_errors_name_the_stage() {
        let r = Record::new("short", Unit::Volt, 2500.0, vec![1.0; 40]).unwrap();
        match run_record(&r, &PipelineConfig::default()).unwrap_err() {
            Error::Stage { stage, channel, .. } => {
                assert_eq!(stage, "whiten");
                assert_eq!(channel, "short");
            }
            e => panic!("{e}"),
        }
        let cfg = PipelineConfig {
            pulsation: 1300.0,
            ..PipelineConfig::default()
        };
        let r = synth(Preset::Sine, 0, None);
        assert!(matches!(
            run_record(&r, &cfg),
            Err(Error::Stage { stage: "config", .. })
        ));
    }

    #[test]
    fn plot_files() {
        let cfg = PipelineConfig {
            synth: Some(SynthInput {
                preset: Preset::FaultCurrent,
                seed: 1,
                snr_db: Some(40.0),
            }),
            ..PipelineConfig::default()
        };
        let res = run_pipeline(&cfg).unwrap();
        assert!(res.ground_truth.is_some());
        let ch = &res.channels[0];
        let dir = tempfile::tempdir().unwrap();
        let files = emit_plot_data(ch, dir.path()).unwrap();
        assert_eq!(files.len(), 5);
        let rows = |p: &PathBuf| fs::read_to_string(p).unwrap().lines().count() - 1;
        assert_eq!(rows(&files[0]), 2000);
        assert_eq!(rows(&files[2]), 1000);
        assert_eq!(rows(&files[3]), 1000);
        assert_eq!(rows(&files[4]), ch.instants.len());
    }

    #[test]
    fn odd_length_detail_rows() {
        let r = synth(Preset::Sine, 0, None);
        let odd = r.with_samples(r.samples()[..1999].to_vec()).unwrap();
        let res = run_record(&odd, &PipelineConfig::default()).unwrap();
        assert_eq!(res.detail.len(), 1000);
        let dir = tempfile::tempdir().unwrap();
        let files = emit_plot_data(&res, dir.path()).unwrap();
        let text = fs::read_to_string(&files[4]).unwrap();
        assert_eq!(text.lines().count(), 1);
    }

    #[test]
    fn multi_level_and_corroboration_run() {
        let r = synth(Preset::FaultCurrent, 2, Some(40.0));
        let cfg = PipelineConfig {
            levels: 3,
            corroborate: true,
            ..PipelineConfig::default()
        };
        let res = run_record(&r, &cfg).unwrap();
        assert!(res.raw_instants.len() <= run_record(&r, &PipelineConfig::default()).unwrap().raw_instants.len());
        assert!(run_record(&r, &PipelineConfig { levels: 20, ..PipelineConfig::default() }).is_err());
    }

    #[test]
    fn noise_prefix_sigma() {
        let r = synth(Preset::FaultCurrent, 3, Some(30.0));
        let cfg = PipelineConfig {
            noise_prefix: Some(0.15),
            ..PipelineConfig::default()
        };
        let res = run_record(&r, &cfg).unwrap();
        assert!(res.threshold.sigma > 0.0);
        assert_eq!(res.threshold.n, 1000);
    }
}
