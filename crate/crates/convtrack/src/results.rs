//! Tracking result files: a `#` header carrying the full configuration
//! (seed included), then one `x,y,w,h` line per frame.
//!
//! Result files are also valid ground-truth files. Per-frame wall-clock
//! times go to a separate sidecar so that results stay byte-reproducible.

use std::fmt::Write as _;
use std::path::Path;

use convtrack_core::{BoundingBox, TrackerConfig};

use crate::config::{format_config, parse_config};
use crate::error::{Error, Result};
use crate::sequence::parse_box_line;

const MAGIC: &str = "# convtrack results";

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub boxes: Vec<BoundingBox>,
    pub config: TrackerConfig,
}

impl RunRecord {
    pub fn seed(&self) -> u64 {
        self.config.seed
    }
}

pub fn format_results(rec: &RunRecord) -> String {
    let mut out = String::from(MAGIC);
    out.push('\n');
    for line in format_config(&rec.config).lines() {
        let _ = writeln!(out, "# {line}");
    }
    for b in &rec.boxes {
        let _ = writeln!(out, "{},{},{},{}", b.x, b.y, b.w, b.h);
    }
    out
}

pub fn parse_results(text: &str) -> Result<RunRecord> {
    let mut header = String::new();
    let mut boxes = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let t = line.trim();
        if let Some(comment) = t.strip_prefix('#') {
            if comment.contains('=') {
                header.push_str(comment);
                header.push('\n');
            }
        } else if !t.is_empty() {
            boxes.push(parse_box_line(t, idx + 1)?);
        }
    }
    if boxes.is_empty() {
        return Err(Error::Format("results contain no frames".into()));
    }
    Ok(RunRecord {
        boxes,
        config: parse_config(&header)?,
    })
}

pub fn write_results(rec: &RunRecord, path: &Path) -> Result<()> {
    std::fs::write(path, format_results(rec)).map_err(|e| Error::io(path, e))
}

pub fn read_results(path: &Path) -> Result<RunRecord> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_results(&text).map_err(|e| e.in_file(path))
}

/// Writes `frame,seconds` rows.
pub fn write_timing(seconds: &[f64], path: &Path) -> Result<()> {
    let mut out = String::from("frame,seconds\n");
    for (i, s) in seconds.iter().enumerate() {
        let _ = writeln!(out, "{},{s}", i + 1);
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}
