//! Synthetic sequences with exact ground truth.
//!
//! A square value-noise texture (the target) moves over a second, static
//! value-noise texture (the background) along a straight line, optionally
//! breathing in size sinusoidally, while a global brightness offset grows by
//! a fixed step per frame.

use std::fmt::Write as _;
use std::path::Path;

use convtrack_core::{BoundingBox, GrayImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::kv;
use crate::sequence::{save_frame, Sequence, GROUNDTRUTH_FILE, IMAGE_DIR};

/// Texture grid values are drawn from this range, leaving headroom for the
/// brightness ramp before clamping kicks in.
const TEXTURE_RANGE: (f64, f64) = (0.15, 0.75);

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub frames: usize,
    pub width: usize,
    pub height: usize,
    /// Side of the square target at scale 1.
    pub target_size: f64,
    /// Target centre in frame 0.
    pub center_x: f64,
    pub center_y: f64,
    /// Pixels per frame.
    pub velocity_x: f64,
    pub velocity_y: f64,
    /// Relative size oscillation, `s_t = 1 + a · sin(2πt / period)`.
    pub scale_amplitude: f64,
    pub scale_period: f64,
    /// Intensity added per frame.
    pub brightness_step: f64,
    /// Spacing of the value-noise control points, in pixels.
    pub texture_cell: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            frames: 50,
            width: 240,
            height: 240,
            target_size: 64.0,
            center_x: 70.0,
            center_y: 120.0,
            velocity_x: 2.0,
            velocity_y: 0.0,
            scale_amplitude: 0.05,
            scale_period: 25.0,
            brightness_step: 0.002,
            texture_cell: 8.0,
            seed: 0,
        }
    }
}

/// False for NaN as well as for non-positive values.
fn positive(v: f64) -> bool {
    v > 0.0
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Spec(m));
        if self.frames == 0 {
            return fail("frames must be >= 1".into());
        }
        if self.width == 0 || self.height == 0 {
            return fail("frame must be non-empty".into());
        }
        if !positive(self.target_size) {
            return fail(format!("target_size must be positive, got {}", self.target_size));
        }
        if !(0.0..1.0).contains(&self.scale_amplitude) {
            return fail(format!(
                "scale_amplitude must lie in [0, 1), got {}",
                self.scale_amplitude
            ));
        }
        if self.scale_amplitude > 0.0 && !positive(self.scale_period) {
            return fail("scale_period must be positive".into());
        }
        if !positive(self.texture_cell) {
            return fail("texture_cell must be positive".into());
        }
        let largest = self.target_size * (1.0 + self.scale_amplitude);
        if largest > self.width.min(self.height) as f64 {
            return fail(format!(
                "target of size {largest} does not fit a {}x{} frame",
                self.width, self.height
            ));
        }
        Ok(())
    }

    pub fn scale_at(&self, t: usize) -> f64 {
        if self.scale_amplitude == 0.0 {
            return 1.0;
        }
        1.0 + self.scale_amplitude * (2.0 * std::f64::consts::PI * t as f64 / self.scale_period).sin()
    }

    /// Ground-truth box of frame `t`.
    pub fn box_at(&self, t: usize) -> BoundingBox {
        let side = self.target_size * self.scale_at(t);
        let cx = self.center_x + self.velocity_x * t as f64;
        let cy = self.center_y + self.velocity_y * t as f64;
        BoundingBox {
            x: cx - side / 2.0,
            y: cy - side / 2.0,
            w: side,
            h: side,
        }
    }
}

pub fn parse_spec(text: &str) -> Result<SynthSpec> {
    let mut spec = SynthSpec::default();
    for (key, (line, raw)) in kv::parse(text)? {
        let raw = raw.as_str();
        match key.as_str() {
            "frames" => spec.frames = kv::value(&key, line, raw)?,
            "width" => spec.width = kv::value(&key, line, raw)?,
            "height" => spec.height = kv::value(&key, line, raw)?,
            "target_size" => spec.target_size = kv::value(&key, line, raw)?,
            "center_x" => spec.center_x = kv::value(&key, line, raw)?,
            "center_y" => spec.center_y = kv::value(&key, line, raw)?,
            "velocity_x" => spec.velocity_x = kv::value(&key, line, raw)?,
            "velocity_y" => spec.velocity_y = kv::value(&key, line, raw)?,
            "scale_amplitude" => spec.scale_amplitude = kv::value(&key, line, raw)?,
            "scale_period" => spec.scale_period = kv::value(&key, line, raw)?,
            "brightness_step" => spec.brightness_step = kv::value(&key, line, raw)?,
            "texture_cell" => spec.texture_cell = kv::value(&key, line, raw)?,
            "seed" => spec.seed = kv::value(&key, line, raw)?,
            _ => {
                return Err(Error::Parse {
                    line,
                    msg: format!("unknown synth key `{key}`"),
                })
            }
        }
    }
    spec.validate()?;
    Ok(spec)
}

pub fn load_spec(path: &Path) -> Result<SynthSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_spec(&text).map_err(|e| e.in_file(path))
}

/// Rendered frames plus their exact boxes.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSequence {
    pub spec: SynthSpec,
    pub frames: Vec<GrayImage>,
    pub gt: Vec<BoundingBox>,
}

fn noise_grid(cols: usize, rows: usize, rng: &mut ChaCha8Rng) -> GrayImage {
    GrayImage::from_fn(cols, rows, |_, _| rng.random_range(TEXTURE_RANGE.0..TEXTURE_RANGE.1))
}

pub fn synth_sequence(spec: &SynthSpec) -> Result<SyntheticSequence> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let cell = spec.texture_cell;
    let grid_len = |extent: f64| (extent / cell).ceil() as usize + 2;
    let background = noise_grid(grid_len(spec.width as f64), grid_len(spec.height as f64), &mut rng);
    let target_grid = grid_len(spec.target_size);
    let target = noise_grid(target_grid, target_grid, &mut rng);

    let mut frames = Vec::with_capacity(spec.frames);
    let mut gt = Vec::with_capacity(spec.frames);
    for t in 0..spec.frames {
        let bbox = spec.box_at(t);
        let scale = spec.scale_at(t);
        let offset = t as f64 * spec.brightness_step;
        frames.push(GrayImage::from_fn(spec.width, spec.height, |px, py| {
            let (x, y) = (px as f64 + 0.5, py as f64 + 0.5);
            let base = if x >= bbox.x && x < bbox.right() && y >= bbox.y && y < bbox.bottom() {
                let u = (x - bbox.x) / scale / cell;
                let v = (y - bbox.y) / scale / cell;
                target.sample_bilinear(u, v)
            } else {
                background.sample_bilinear(px as f64 / cell, py as f64 / cell)
            };
            (base + offset).clamp(0.0, 1.0)
        }));
        gt.push(bbox);
    }
    Ok(SyntheticSequence {
        spec: spec.clone(),
        frames,
        gt,
    })
}

impl SyntheticSequence {
    /// Materialises the sequence as `dir/img/NNNN.png` plus a ground-truth file.
    pub fn write_to(&self, dir: &Path) -> Result<Sequence> {
        let img_dir = dir.join(IMAGE_DIR);
        std::fs::create_dir_all(&img_dir).map_err(|e| Error::io(&img_dir, e))?;
        let mut paths = Vec::with_capacity(self.frames.len());
        for (i, frame) in self.frames.iter().enumerate() {
            let path = img_dir.join(format!("{:04}.png", i + 1));
            save_frame(&path, frame)?;
            paths.push(path);
        }
        let mut gt = String::new();
        for b in &self.gt {
            let _ = writeln!(gt, "{},{},{},{}", b.x, b.y, b.w, b.h);
        }
        let gt_path = dir.join(GROUNDTRUTH_FILE);
        std::fs::write(&gt_path, gt).map_err(|e| Error::io(&gt_path, e))?;
        Ok(Sequence {
            name: dir
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_else(|| "synthetic".into()),
            frames: paths,
            gt: Some(self.gt.clone()),
        })
    }
}
