use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use faultseg::pipeline::{emit_plot_data, InputFormat, SynthInput, Whitening};
use faultseg::segmentation::{Classification, SegmentLabel};
use faultseg::signal_io::write_csv;
use faultseg::synth::Preset;
use faultseg::{run_pipeline, run_record, Error, PipelineConfig, Record, RecordSet, Unit};

fn synth_config(preset: Preset, seed: u64, snr_db: Option<f64>) -> PipelineConfig {
    PipelineConfig {
        synth: Some(SynthInput {
            preset,
            seed,
            snr_db,
        }),
        ..PipelineConfig::default()
    }
}

fn strip_timings(mut v: serde_json::Value) -> serde_json::Value {
    for ch in v["channels"].as_array_mut().unwrap() {
        ch.as_object_mut().unwrap().remove("timings_ms");
    }
    v
}

#[test]
fn fault_current_preset_is_segmented() {
    let res = run_pipeline(&synth_config(Preset::FaultCurrent, 3, Some(40.0))).unwrap();
    let truth = res.ground_truth.as_ref().unwrap();
    let ch = &res.channels[0];
    assert_eq!(ch.classification, Classification::FaultSequence);
    assert_eq!(ch.instants.len(), truth.true_instants.len());
    for (got, want) in ch.instants.iter().zip(&truth.true_instants) {
        assert!(got.abs_diff(*want) <= 25, "{:?} vs {:?}", ch.instants, truth.true_instants);
    }
    let labels: Vec<_> = ch.segments.iter().map(|s| s.label).collect();
    assert_eq!(
        labels,
        [
            SegmentLabel::PreFault,
            SegmentLabel::Fault,
            SegmentLabel::BreakerOpen,
            SegmentLabel::RecloseRestore
        ]
    );
}

#[test]
fn resistive_decay_preset_is_inception_only() {
    let res = run_pipeline(&synth_config(Preset::ResistiveDecay, 0, Some(30.0))).unwrap();
    let ch = &res.channels[0];
    assert_eq!(ch.classification, Classification::InceptionOnly);
    let truth = res.ground_truth.unwrap().true_instants[0];
    assert!(ch.instants[0].abs_diff(truth) <= 25, "{:?}", ch.instants);
}

#[test]
fn power_swing_preset_is_a_transient() {
    let res = run_pipeline(&synth_config(Preset::PowerSwing, 5, Some(30.0))).unwrap();
    assert_eq!(res.channels[0].classification, Classification::TransientOrSwing);
}

#[test]
fn sine_preset_has_no_event() {
    for w in [Whitening::Fixed, Whitening::Adjusted, Whitening::Adaptive] {
        let cfg = PipelineConfig {
            whitening: w,
            ..synth_config(Preset::Sine, 0, None)
        };
        let res = run_pipeline(&cfg).unwrap();
        assert_eq!(res.channels[0].classification, Classification::NoEvent, "{w:?}");
    }
}

#[test]
fn json_is_deterministic_apart_from_timings() {
    let cfg = synth_config(Preset::FaultCurrent, 11, Some(30.0));
    let a = serde_json::to_value(run_pipeline(&cfg).unwrap()).unwrap();
    let b = serde_json::to_value(run_pipeline(&cfg).unwrap()).unwrap();
    assert_eq!(strip_timings(a), strip_timings(b));
}

#[test]
fn csv_channels_run_independently() {
    let dir = tempfile::tempdir().unwrap();
    let (fault, _) = Preset::FaultCurrent.generate(2, Some(40.0)).unwrap();
    let (sine, _) = Preset::Sine.generate(2, None).unwrap();
    let ia = Record::new("IA", Unit::Ampere, 2500.0, fault.samples().to_vec()).unwrap();
    let ib = Record::new("IB", Unit::Ampere, 2500.0, sine.samples().to_vec()).unwrap();
    let path = dir.path().join("rec.csv");
    write_csv(&RecordSet::new(vec![ia, ib], "rec").unwrap(), &path).unwrap();

    let cfg = PipelineConfig {
        input: Some(path.clone()),
        ..PipelineConfig::default()
    };
    let res = run_pipeline(&cfg).unwrap();
    assert_eq!(res.channels.len(), 2);
    assert_eq!(res.channels[0].channel, "IA");
    assert_eq!(res.channels[0].classification, Classification::FaultSequence);
    assert_eq!(res.channels[1].classification, Classification::NoEvent);

    let only = PipelineConfig {
        channel: Some("IB".into()),
        ..cfg.clone()
    };
    let res = run_pipeline(&only).unwrap();
    assert_eq!(res.channels.len(), 1);
    assert_eq!(res.channels[0].channel, "IB");

    let missing = PipelineConfig {
        channel: Some("IC".into()),
        ..cfg
    };
    assert!(matches!(run_pipeline(&missing), Err(Error::InvalidParameter(_))));
}

fn write_comtrade(dir: &Path, samples: &[f64], fs: f64) -> std::path::PathBuf {
    let scale = 1e-4;
    let cfg = format!(
        "SUB,DFR\n1,1A,0D\n1,IA,A,,A,{scale},0,0,-999999,999999\n50\n1\n{fs},{}\n\
         01/01/2005,00:00:00.000000\n01/01/2005,00:00:00.200000\nASCII\n",
        samples.len()
    );
    let mut dat = String::new();
    for (i, v) in samples.iter().enumerate() {
        let us = (i as f64 * 1e6 / fs).round() as u64;
        writeln!(dat, "{},{us},{}", i + 1, (v / scale).round() as i64).unwrap();
    }
    let path = dir.join("fault.cfg");
    fs::write(&path, cfg).unwrap();
    fs::write(dir.join("fault.dat"), dat).unwrap();
    path
}

#[test]
fn comtrade_input_matches_in_memory_run() {
    let dir = tempfile::tempdir().unwrap();
    let (r, truth) = Preset::FaultCurrent.generate(2, Some(40.0)).unwrap();
    let direct = run_record(&r, &PipelineConfig::default()).unwrap();
    let path = write_comtrade(dir.path(), r.samples(), 2500.0);
    let cfg = PipelineConfig {
        input: Some(path),
        format: InputFormat::Comtrade,
        ..PipelineConfig::default()
    };
    let res = run_pipeline(&cfg).unwrap();
    let ch = &res.channels[0];
    assert_eq!(ch.channel, "IA");
    assert_eq!(ch.config.fs, Some(2500.0));
    assert_eq!(ch.classification, Classification::FaultSequence);
    assert_eq!(ch.instants, direct.instants);
    for (got, want) in ch.instants.iter().zip(&truth.true_instants) {
        assert!(got.abs_diff(*want) <= 25);
    }

    let wrong_fs = PipelineConfig {
        fs: Some(2000.0),
        ..cfg
    };
    assert!(matches!(
        run_pipeline(&wrong_fs),
        Err(Error::SamplingRateMismatch { .. })
    ));
}

#[test]
fn plot_panels_have_the_right_rates() {
    let dir = tempfile::tempdir().unwrap();
    let res = run_pipeline(&synth_config(Preset::FaultCurrent, 1, Some(40.0))).unwrap();
    let ch = &res.channels[0];
    let files = emit_plot_data(ch, dir.path()).unwrap();
    assert_eq!(files.len(), 5);
    let rows = |name: &str| {
        let text = fs::read_to_string(dir.path().join(format!("Ia_{name}.txt"))).unwrap();
        text.lines().skip(1).map(str::to_string).collect::<Vec<_>>()
    };
    let n = ch.original.len();
    assert_eq!(rows("original").len(), n);
    assert_eq!(rows("whitened").len(), n);
    assert_eq!(rows("detail").len(), n.div_ceil(2));
    assert_eq!(rows("threshold").len(), n.div_ceil(2));
    let impulses = rows("impulses");
    assert_eq!(impulses.len(), ch.instants.len());
    for (line, i) in impulses.iter().zip(&ch.instants) {
        let mut cols = line.split_whitespace();
        assert_eq!(cols.next().unwrap().parse::<usize>().unwrap(), *i);
        assert_eq!(cols.next().unwrap().parse::<f64>().unwrap(), 1.0);
    }
}

#[test]
fn invalid_config_is_rejected_before_processing() {
    let cfg = PipelineConfig {
        pulsation: 1300.0,
        ..synth_config(Preset::Sine, 0, None)
    };
    assert!(run_pipeline(&cfg).is_err());
    let cfg = PipelineConfig::default();
    assert!(matches!(run_pipeline(&cfg), Err(Error::InvalidParameter(_))));
}
