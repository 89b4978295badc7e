//! Abrupt-change detection and event segmentation for power-system fault
//! recordings.
//!
//! The pipeline runs in a fixed order per channel: mean removal, one-cycle
//! whitening ([`whitening`]), one level of Daubechies-4 analysis
//! ([`wavelet`]), a universal threshold on the detail coefficients
//! ([`detection`]) and heuristic smoothing into labelled segments
//! ([`segmentation`]). [`synth`] generates records with known change
//! instants; [`pipeline`] ties the stages together.

// `!(x > 0.0)` style guards reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod detection;
pub mod error;
pub mod pipeline;
pub mod segmentation;
pub mod signal_io;
pub mod synth;
pub mod wavelet;
pub mod whitening;

pub use error::{Error, Result};
pub use pipeline::{run_pipeline, run_record, ChannelResult, PipelineConfig, PipelineResult};
pub use signal_io::{Record, RecordSet, Unit};
