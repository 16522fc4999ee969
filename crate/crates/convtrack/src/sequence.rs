//! Benchmark-style sequence directories and ground-truth files.
//!
//! A sequence directory holds `img/` with numerically named frames
//! (`0001.jpg`, `2.png`, ...) and optionally `groundtruth_rect.txt` with one
//! `x,y,w,h` box per frame.

use std::path::{Path, PathBuf};

use convtrack_core::{to_gray, BoundingBox, GrayImage, RgbImage};

use crate::error::{Error, Result};

pub const IMAGE_DIR: &str = "img";
pub const GROUNDTRUTH_FILE: &str = "groundtruth_rect.txt";

#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    pub name: String,
    pub frames: Vec<PathBuf>,
    pub gt: Option<Vec<BoundingBox>>,
}

impl Sequence {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

pub fn load_sequence(dir: &Path) -> Result<Sequence> {
    let img_dir = dir.join(IMAGE_DIR);
    let listing = std::fs::read_dir(&img_dir).map_err(|e| Error::io(&img_dir, e))?;
    let mut numbered = Vec::new();
    for entry in listing {
        let path = entry.map_err(|e| Error::io(&img_dir, e))?.path();
        if !path.is_file() {
            continue;
        }
        let index = path
            .file_stem()
            .and_then(|s| s.to_str())
            .and_then(|s| s.parse::<u64>().ok());
        if let Some(index) = index {
            numbered.push((index, path));
        }
    }
    if numbered.is_empty() {
        return Err(Error::Load(format!("{}: no numbered frames", img_dir.display())));
    }
    numbered.sort();
    let frames: Vec<PathBuf> = numbered.into_iter().map(|(_, p)| p).collect();

    let gt_path = dir.join(GROUNDTRUTH_FILE);
    let gt = if gt_path.is_file() {
        let boxes = read_groundtruth(&gt_path)?;
        if boxes.len() != frames.len() {
            return Err(Error::Format(format!(
                "{}: {} boxes for {} frames",
                gt_path.display(),
                boxes.len(),
                frames.len()
            )));
        }
        Some(boxes)
    } else {
        None
    };
    let name = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "sequence".into());
    Ok(Sequence { name, frames, gt })
}

/// Parses a single `x,y,w,h` line (comma, tab or space separated).
pub(crate) fn parse_box_line(line: &str, line_no: usize) -> Result<BoundingBox> {
    let fields: Vec<&str> = line
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|f| !f.is_empty())
        .collect();
    if fields.len() != 4 {
        return Err(Error::Parse {
            line: line_no,
            msg: format!("expected 4 fields, found {}", fields.len()),
        });
    }
    let mut v = [0.0; 4];
    for (slot, field) in v.iter_mut().zip(&fields) {
        *slot = field.parse().map_err(|_| Error::Parse {
            line: line_no,
            msg: format!("`{field}` is not a number"),
        })?;
    }
    BoundingBox::new(v[0], v[1], v[2], v[3]).map_err(|e| Error::Parse {
        line: line_no,
        msg: e.to_string(),
    })
}

/// Boxes in file order; blank lines and `#` comments are skipped.
pub fn parse_groundtruth(text: &str) -> Result<Vec<BoundingBox>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| {
            let t = l.trim();
            !t.is_empty() && !t.starts_with('#')
        })
        .map(|(i, l)| parse_box_line(l, i + 1))
        .collect()
}

pub fn read_groundtruth(path: &Path) -> Result<Vec<BoundingBox>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_groundtruth(&text).map_err(|e| e.in_file(path))
}

/// Decodes a frame to gray intensities in `[0, 1]`.
pub fn load_frame(path: &Path) -> Result<GrayImage> {
    let img = image::open(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let gray = if img.color().has_color() {
        let rgb = img.to_rgb32f();
        let mut planes = [
            Vec::with_capacity(w * h),
            Vec::with_capacity(w * h),
            Vec::with_capacity(w * h),
        ];
        for px in rgb.pixels() {
            for (plane, &v) in planes.iter_mut().zip(px.0.iter()) {
                plane.push(f64::from(v));
            }
        }
        to_gray(&RgbImage::new(w, h, planes)?)
    } else {
        let luma = img.to_luma32f();
        GrayImage::new(w, h, luma.pixels().map(|p| f64::from(p.0[0])).collect())?
    };
    Ok(gray)
}

/// Writes an 8-bit grayscale PNG, clamping intensities to `[0, 1]`.
pub fn save_frame(path: &Path, frame: &GrayImage) -> Result<()> {
    let bytes = frame
        .data()
        .iter()
        .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    let buf = image::GrayImage::from_raw(frame.width() as u32, frame.height() as u32, bytes)
        .expect("buffer matches image size");
    buf.save(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })
}
