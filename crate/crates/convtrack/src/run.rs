//! Running the tracker over frame streams and scoring the output.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use convtrack_core::eval::{frame_scores, PRECISION_MAX_THRESHOLD, SUCCESS_SAMPLES};
use convtrack_core::{precision_curve, success_curve, BoundingBox, EvalCurve, GrayImage, TrackerConfig, TrackerState};

use crate::error::{Error, Result};
use crate::results::RunRecord;
use crate::sequence::{load_frame, Sequence};

/// Tracker output plus per-frame wall-clock seconds.
#[derive(Debug, Clone)]
pub struct TrackedRun {
    pub record: RunRecord,
    pub seconds: Vec<f64>,
}

/// Initialises on the first frame with `init` and tracks through the rest.
/// The first output box is `init` itself.
pub fn track_frames<I>(frames: I, init: BoundingBox, config: &TrackerConfig) -> Result<TrackedRun>
where
    I: IntoIterator<Item = Result<GrayImage>>,
{
    let mut frames = frames.into_iter();
    let first = frames
        .next()
        .ok_or_else(|| Error::Load("sequence has no frames".into()))??;
    let clock = Instant::now();
    let mut tracker = TrackerState::init(&first, &init, config.clone())?;
    let mut seconds = vec![clock.elapsed().as_secs_f64()];
    let mut boxes = vec![init];
    for frame in frames {
        let frame = frame?;
        let clock = Instant::now();
        let report = tracker.step(&frame)?;
        seconds.push(clock.elapsed().as_secs_f64());
        boxes.push(report.bbox);
    }
    Ok(TrackedRun {
        record: RunRecord {
            boxes,
            config: config.clone(),
        },
        seconds,
    })
}

pub fn track_sequence(seq: &Sequence, init: BoundingBox, config: &TrackerConfig) -> Result<TrackedRun> {
    track_frames(seq.frames.iter().map(|p| load_frame(p)), init, config)
}

#[derive(Debug, Clone)]
pub struct EvalSummary {
    pub overlaps: Vec<f64>,
    pub errors: Vec<f64>,
    pub success: EvalCurve,
    pub precision: EvalCurve,
}

impl EvalSummary {
    pub fn auc(&self) -> f64 {
        self.success.summary
    }

    pub fn precision_at_20(&self) -> f64 {
        self.precision.summary
    }

    pub fn mean_overlap(&self) -> f64 {
        self.overlaps.iter().sum::<f64>() / self.overlaps.len() as f64
    }

    /// Fraction of frames whose centre error is at most `px`.
    pub fn fraction_within(&self, px: f64) -> f64 {
        self.errors.iter().filter(|&&e| e <= px).count() as f64 / self.errors.len() as f64
    }
}

pub fn evaluate(tracked: &[BoundingBox], truth: &[BoundingBox]) -> Result<EvalSummary> {
    let (overlaps, errors) = frame_scores(tracked, truth)?;
    let success = success_curve(&overlaps, SUCCESS_SAMPLES)?;
    let precision = precision_curve(&errors, PRECISION_MAX_THRESHOLD)?;
    Ok(EvalSummary {
        overlaps,
        errors,
        success,
        precision,
    })
}

pub fn format_curve_csv(curve: &EvalCurve) -> String {
    let mut out = String::from("threshold,value\n");
    for (t, v) in curve.thresholds.iter().zip(&curve.values) {
        let _ = writeln!(out, "{t},{v}");
    }
    out
}

pub fn write_curve_csv(curve: &EvalCurve, path: &Path) -> Result<()> {
    std::fs::write(path, format_curve_csv(curve)).map_err(|e| Error::io(path, e))
}
