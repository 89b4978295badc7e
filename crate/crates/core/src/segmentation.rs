//! Smoothing of raw change instants into labelled segments.
//!
//! Order of operations: close instants are merged into one, short crossing
//! clusters are dropped as glitches, segments shorter than `min_segment` are
//! folded into their neighbours, and the surviving count is classified.

use serde::{Deserialize, Serialize};

use crate::detection::ChangePointSet;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SmoothingConfig {
    /// Instants closer than this to a cluster's first member join it.
    pub merge_window: usize,
    /// Clusters with fewer crossings than this are glitches.
    pub min_run: usize,
    pub expected_events: usize,
    pub min_segment: usize,
}

impl SmoothingConfig {
    /// Defaults for `samples_per_cycle` samples per nominal cycle.
    pub fn for_cycle(samples_per_cycle: usize) -> SmoothingConfig {
        SmoothingConfig {
            merge_window: samples_per_cycle.max(1),
            min_run: 2,
            expected_events: 3,
            min_segment: samples_per_cycle / 2,
        }
    }
}

impl Default for SmoothingConfig {
    fn default() -> Self {
        Self::for_cycle(50)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentLabel {
    PreFault,
    Fault,
    BreakerOpen,
    RecloseRestore,
    PostFault,
    Unlabeled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub start: usize,
    pub end: usize,
    pub label: SegmentLabel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    FaultSequence,
    InceptionOnly,
    TransientOrSwing,
    NoEvent,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentList {
    pub segments: Vec<Segment>,
    pub classification: Classification,
    pub event_instants: Vec<usize>,
}

/// Greedy left-to-right clustering; a point joins the open cluster when it
/// lies strictly less than `window` after the cluster's first member. Each
/// cluster keeps its first instant and the summed run lengths.
pub fn merge_close(points: &ChangePointSet, window: usize) -> ChangePointSet {
    let mut out = ChangePointSet {
        instants: Vec::with_capacity(points.len()),
        run_lengths: Vec::with_capacity(points.len()),
        ..points.clone()
    };
    for (&p, &r) in points.instants.iter().zip(&points.run_lengths) {
        match out.instants.last() {
            Some(&first) if p - first < window => {
                *out.run_lengths.last_mut().expect("parallel vectors") += r
            }
            _ => {
                out.instants.push(p);
                out.run_lengths.push(r);
            }
        }
    }
    out
}

/// Drops every point whose run length is below `min_run`.
pub fn remove_glitches(points: &ChangePointSet, min_run: usize) -> ChangePointSet {
    let (instants, run_lengths) = points
        .instants
        .iter()
        .zip(&points.run_lengths)
        .filter(|(_, &r)| r >= min_run)
        .unzip();
    ChangePointSet {
        instants,
        run_lengths,
        ..points.clone()
    }
}

/// Splits `[0, record_length)` at the given instants and labels the pieces.
/// A segment shorter than `min_segment` loses its closing instant (the final
/// segment loses its opening one), so the earlier boundary survives.
pub fn build_segments(
    instants: &[usize],
    record_length: usize,
    config: &SmoothingConfig,
) -> SegmentList {
    let mut bounds: Vec<usize> = instants
        .iter()
        .copied()
        .filter(|&i| i > 0 && i < record_length)
        .collect();
    bounds.sort_unstable();
    bounds.dedup();

    let min_len = config.min_segment.max(1);
    loop {
        let short = (0..=bounds.len()).find(|&s| {
            let start = if s == 0 { 0 } else { bounds[s - 1] };
            let end = bounds.get(s).copied().unwrap_or(record_length);
            end - start < min_len
        });
        match short {
            Some(s) if s < bounds.len() => {
                bounds.remove(s);
            }
            Some(_) if !bounds.is_empty() => {
                bounds.pop();
            }
            _ => break,
        }
    }

    let labels: &[SegmentLabel] = match bounds.len() {
        1 => &[SegmentLabel::PreFault, SegmentLabel::PostFault],
        n if n == config.expected_events && n == 3 => &[
            SegmentLabel::PreFault,
            SegmentLabel::Fault,
            SegmentLabel::BreakerOpen,
            SegmentLabel::RecloseRestore,
        ],
        _ => &[],
    };
    let mut segments = Vec::with_capacity(bounds.len() + 1);
    let mut start = 0;
    for (i, end) in bounds.iter().copied().chain([record_length]).enumerate() {
        if end > start {
            segments.push(Segment {
                start,
                end,
                label: labels.get(i).copied().unwrap_or(SegmentLabel::Unlabeled),
            });
        }
        start = end;
    }
    SegmentList {
        segments,
        classification: classify(bounds.len(), config.expected_events),
        event_instants: bounds,
    }
}

pub fn classify(event_count: usize, expected_events: usize) -> Classification {
    match event_count {
        0 => Classification::NoEvent,
        1 => Classification::InceptionOnly,
        n if n <= expected_events => Classification::FaultSequence,
        _ => Classification::TransientOrSwing,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Smoothed {
    pub merged: ChangePointSet,
    pub kept: ChangePointSet,
    pub segments: SegmentList,
}

/// merge → de-glitch → build → classify.
pub fn smooth(raw: &ChangePointSet, record_length: usize, config: &SmoothingConfig) -> Smoothed {
    let merged = merge_close(raw, config.merge_window);
    let kept = remove_glitches(&merged, config.min_run);
    let segments = build_segments(&kept.instants, record_length, config);
    Smoothed {
        merged,
        kept,
        segments,
    }
}
