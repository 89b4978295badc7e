use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use faultseg::detection::Centering;
use faultseg::pipeline::{emit_plot_data, InputFormat, SynthInput, Whitening};
use faultseg::signal_io::NormalizeMode;
use faultseg::synth::Preset;
use faultseg::wavelet::{cascade, Boundary, Normalization, WaveletBasis};
use faultseg::{run_pipeline, PipelineConfig};

/// Detects abrupt changes in fault recordings and segments them into
/// pre-fault, fault, breaker-open and reclose sections.
#[derive(Parser, Debug)]
#[command(name = "faultseg", version, args_conflicts_with_subcommands = true)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the detection pipeline (the default when no subcommand is given).
    Run(Box<RunArgs>),
    /// Compute φ and ψ for db4 by the cascade algorithm and write them out.
    Cascade(CascadeArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum FormatArg {
    Csv,
    Comtrade,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum WhiteningArg {
    None,
    Fixed,
    Adjusted,
    Adaptive,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum NormalizeArg {
    SubtractMean,
    DivideMean,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum BoundaryArg {
    Periodic,
    ZeroPad,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum CenteringArg {
    Median,
    Zero,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// JSON config (same schema as the echoed config); flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Synthetic preset to run instead of reading --input.
    #[arg(long, value_parser = parse_preset)]
    synth: Option<Preset>,
    #[arg(long, requires = "synth")]
    seed: Option<u64>,
    /// Fault-segment SNR of the synthetic record, in dB.
    #[arg(long, requires = "synth", allow_negative_numbers = true)]
    snr_db: Option<f64>,
    #[arg(long)]
    fs: Option<f64>,
    #[arg(long)]
    channel: Option<String>,
    #[arg(long, value_enum)]
    normalize: Option<NormalizeArg>,
    #[arg(long)]
    f0: Option<f64>,
    #[arg(long, value_enum)]
    whitening: Option<WhiteningArg>,
    #[arg(long)]
    pulsation: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    enforce_dc_null: Option<bool>,
    #[arg(long)]
    levels: Option<usize>,
    #[arg(long, value_enum)]
    boundary: Option<BoundaryArg>,
    #[arg(long)]
    mad_divisor: Option<f64>,
    #[arg(long, value_enum)]
    mad_centering: Option<CenteringArg>,
    /// Seconds at the start of the record used to estimate σ.
    #[arg(long)]
    noise_prefix: Option<f64>,
    #[arg(long)]
    threshold_floor: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    group_delay: Option<isize>,
    #[arg(long)]
    corroborate: Option<bool>,
    #[arg(long)]
    merge_window: Option<usize>,
    #[arg(long)]
    min_run: Option<usize>,
    #[arg(long)]
    expected_events: Option<usize>,
    #[arg(long)]
    min_segment: Option<usize>,
    /// Write the JSON result here instead of stdout.
    #[arg(long)]
    out_json: Option<PathBuf>,
    /// Directory for the per-channel plot data files.
    #[arg(long)]
    out_plots: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CascadeArgs {
    /// Grid points per unit of support.
    #[arg(long, default_value_t = 64)]
    density: usize,
    #[arg(long, default_value_t = 50)]
    iterations: usize,
    /// Directory receiving phi.txt and psi.txt.
    #[arg(long)]
    out: PathBuf,
}

fn parse_preset(s: &str) -> Result<Preset, String> {
    s.parse().map_err(|e: faultseg::Error| e.to_string())
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

impl RunArgs {
    fn into_config(self) -> Result<PipelineConfig> {
        let mut c = match &self.config {
            Some(p) => PipelineConfig::from_json_file(p)
                .with_context(|| format!("reading config {}", p.display()))?,
            None => PipelineConfig::default(),
        };
        if self.input.is_some() {
            c.input = self.input;
            c.synth = None;
        }
        set(
            &mut c.format,
            self.format.map(|f| match f {
                FormatArg::Csv => InputFormat::Csv,
                FormatArg::Comtrade => InputFormat::Comtrade,
            }),
        );
        if let Some(preset) = self.synth {
            c.synth = Some(SynthInput {
                preset,
                seed: self.seed.unwrap_or(0),
                snr_db: self.snr_db,
            });
        }
        c.fs = self.fs.or(c.fs);
        c.channel = self.channel.or(c.channel);
        set(
            &mut c.normalize,
            self.normalize.map(|n| match n {
                NormalizeArg::SubtractMean => NormalizeMode::SubtractMean,
                NormalizeArg::DivideMean => NormalizeMode::DivideMean,
            }),
        );
        set(&mut c.f0, self.f0);
        set(
            &mut c.whitening,
            self.whitening.map(|w| match w {
                WhiteningArg::None => Whitening::None,
                WhiteningArg::Fixed => Whitening::Fixed,
                WhiteningArg::Adjusted => Whitening::Adjusted,
                WhiteningArg::Adaptive => Whitening::Adaptive,
            }),
        );
        set(&mut c.pulsation, self.pulsation);
        set(&mut c.mu, self.mu);
        set(&mut c.enforce_dc_null, self.enforce_dc_null);
        set(&mut c.levels, self.levels);
        set(
            &mut c.boundary,
            self.boundary.map(|b| match b {
                BoundaryArg::Periodic => Boundary::Periodic,
                BoundaryArg::ZeroPad => Boundary::ZeroPad,
            }),
        );
        set(&mut c.mad_divisor, self.mad_divisor);
        set(
            &mut c.mad_centering,
            self.mad_centering.map(|m| match m {
                CenteringArg::Median => Centering::Median,
                CenteringArg::Zero => Centering::Zero,
            }),
        );
        c.noise_prefix = self.noise_prefix.or(c.noise_prefix);
        set(&mut c.threshold_floor, self.threshold_floor);
        set(&mut c.group_delay, self.group_delay);
        set(&mut c.corroborate, self.corroborate);
        c.merge_window = self.merge_window.or(c.merge_window);
        set(&mut c.min_run, self.min_run);
        set(&mut c.expected_events, self.expected_events);
        c.min_segment = self.min_segment.or(c.min_segment);
        c.out_json = self.out_json.or(c.out_json);
        c.out_plots = self.out_plots.or(c.out_plots);
        if c.input.is_none() && c.synth.is_none() {
            bail!("nothing to process: give --input <file> or --synth <preset>");
        }
        Ok(c)
    }
}

fn run(args: RunArgs) -> Result<()> {
    let config = args.into_config()?;
    let result = run_pipeline(&config)?;
    if let Some(dir) = &config.out_plots {
        for ch in &result.channels {
            emit_plot_data(ch, dir)
                .with_context(|| format!("writing plot data for channel '{}'", ch.channel))?;
        }
    }
    let json = serde_json::to_string_pretty(&result)?;
    match &config.out_json {
        Some(path) => fs::write(path, json + "\n")
            .with_context(|| format!("writing {}", path.display()))?,
        None => println!("{json}"),
    }
    Ok(())
}

fn run_cascade(args: CascadeArgs) -> Result<()> {
    let c = cascade(
        &WaveletBasis::db4(Normalization::Refinement),
        args.iterations,
        args.density,
    )?;
    c.export(&args.out)?;
    eprintln!(
        "cascade converged after {} iterations (sup diff {:.3e}); wrote {}",
        c.iterations,
        c.sup_diff,
        args.out.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Some(Command::Run(args)) => run(*args),
        Some(Command::Cascade(args)) => run_cascade(args),
        None => run(cli.run),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
