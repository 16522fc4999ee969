//! Grayscale images, boxes, region warping and patch preprocessing.
//!
//! All intensities are `f64`. Loaders are expected to map 8-bit data into
//! `[0, 1]`; nothing downstream depends on that range because every patch
//! and every warped target is normalised before use.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// ITU-R BT.601 luma weights, in R, G, B order.
pub const LUMA_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];

/// Mean-subtracted patches with an ℓ2 norm below this are treated as constant.
pub const DEGENERATE_NORM: f64 = 1e-12;

/// Row-major single channel image.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Dimension(alloc::format!(
                "image must be non-empty, got {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(Error::Dimension(alloc::format!(
                "{} values for a {width}x{height} image",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Dimension("image contains non-finite intensities".into()));
        }
        Ok(Self { width, height, data })
    }

    /// Constant image. Panics on zero dimensions or a non-finite value.
    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Self::new(width, height, vec![value; width * height]).expect("valid constant image")
    }

    /// Builds an image by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data).expect("from_fn produced an invalid image")
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    /// Pixel lookup with coordinates clamped to the nearest edge pixel.
    #[inline]
    fn get_clamped(&self, x: isize, y: isize) -> f64 {
        let cx = x.clamp(0, self.width as isize - 1) as usize;
        let cy = y.clamp(0, self.height as isize - 1) as usize;
        self.data[cy * self.width + cx]
    }

    /// Bilinear sample at a continuous pixel coordinate (pixel centres on integers).
    pub fn sample_bilinear(&self, x: f64, y: f64) -> f64 {
        let x0 = libm::floor(x);
        let y0 = libm::floor(y);
        let fx = x - x0;
        let fy = y - y0;
        let (xi, yi) = (x0 as isize, y0 as isize);
        let top = (1.0 - fx) * self.get_clamped(xi, yi) + fx * self.get_clamped(xi + 1, yi);
        let bottom = (1.0 - fx) * self.get_clamped(xi, yi + 1) + fx * self.get_clamped(xi + 1, yi + 1);
        (1.0 - fy) * top + fy * bottom
    }

    /// Zero-mean, unit-ℓ2 copy of the image. Constant images map to all zeros.
    pub fn normalized(&self) -> GrayImage {
        GrayImage {
            width: self.width,
            height: self.height,
            data: normalize_values(&self.data),
        }
    }
}

/// Three-plane colour image with intensities in the same range as [`GrayImage`].
#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    planes: [Vec<f64>; 3],
}

impl RgbImage {
    pub fn new(width: usize, height: usize, planes: [Vec<f64>; 3]) -> Result<Self> {
        for (i, plane) in planes.iter().enumerate() {
            if plane.len() != width * height {
                return Err(Error::Dimension(alloc::format!(
                    "channel {i} has {} values, expected {}",
                    plane.len(),
                    width * height
                )));
            }
            if plane.iter().any(|v| !v.is_finite()) {
                return Err(Error::Dimension(alloc::format!(
                    "channel {i} contains non-finite intensities"
                )));
            }
        }
        if width == 0 || height == 0 {
            return Err(Error::Dimension("image must be non-empty".into()));
        }
        Ok(Self { width, height, planes })
    }

    /// Builds a colour image from three gray planes, which must agree in size.
    pub fn from_planes(r: &GrayImage, g: &GrayImage, b: &GrayImage) -> Result<Self> {
        let dims = (r.width, r.height);
        if (g.width, g.height) != dims || (b.width, b.height) != dims {
            return Err(Error::Dimension(alloc::format!(
                "channel sizes differ: {}x{}, {}x{}, {}x{}",
                r.width,
                r.height,
                g.width,
                g.height,
                b.width,
                b.height
            )));
        }
        Self::new(dims.0, dims.1, [r.data.clone(), g.data.clone(), b.data.clone()])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }
}

/// Luma conversion. Pixels whose three channels agree pass through unchanged.
pub fn to_gray(rgb: &RgbImage) -> GrayImage {
    let [r, g, b] = &rgb.planes;
    let data = r
        .iter()
        .zip(g)
        .zip(b)
        .map(|((&r, &g), &b)| {
            if r == g && g == b {
                r
            } else {
                LUMA_WEIGHTS[0] * r + LUMA_WEIGHTS[1] * g + LUMA_WEIGHTS[2] * b
            }
        })
        .collect();
    GrayImage {
        width: rgb.width,
        height: rgb.height,
        data,
    }
}

/// Axis-aligned box; `x`, `y` is the top-left corner in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BoundingBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Result<Self> {
        let b = Self { x, y, w, h };
        b.validate()?;
        Ok(b)
    }

    pub fn from_center(cx: f64, cy: f64, w: f64, h: f64) -> Result<Self> {
        Self::new(cx - w / 2.0, cy - h / 2.0, w, h)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = self.x.is_finite() && self.y.is_finite();
        if !(finite && self.w.is_finite() && self.h.is_finite() && self.w > 0.0 && self.h > 0.0) {
            return Err(Error::InvalidBox { w: self.w, h: self.h });
        }
        Ok(())
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn right(&self) -> f64 {
        self.x + self.w
    }

    pub fn bottom(&self) -> f64 {
        self.y + self.h
    }

    /// True when the box lies entirely within a `width`x`height` frame.
    pub fn is_inside(&self, width: usize, height: usize) -> bool {
        self.x >= 0.0 && self.y >= 0.0 && self.right() <= width as f64 && self.bottom() <= height as f64
    }
}

/// Square `side`x`side` patch, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    side: usize,
    values: Vec<f64>,
}

impl Patch {
    pub fn new(side: usize, values: Vec<f64>) -> Result<Self> {
        if side == 0 || values.len() != side * side {
            return Err(Error::Dimension(alloc::format!(
                "{} values for a {side}x{side} patch",
                values.len()
            )));
        }
        Ok(Self { side, values })
    }

    pub fn zeros(side: usize) -> Self {
        Self {
            side,
            values: vec![0.0; side * side],
        }
    }

    #[inline]
    pub fn side(&self) -> usize {
        self.side
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }
}

/// Resamples the region under `bbox` to an `n`x`n` image.
///
/// Output pixel `(j, i)` samples the source at
/// `(x + (j + 0.5) * w / n - 0.5, y + (i + 0.5) * h / n - 0.5)` bilinearly,
/// with out-of-frame reads clamped to the nearest edge pixel. A box of size
/// `n`x`n` on integer coordinates therefore reproduces the crop exactly.
pub fn warp_region(frame: &GrayImage, bbox: &BoundingBox, n: usize) -> Result<GrayImage> {
    bbox.validate()?;
    if n < 2 {
        return Err(Error::Dimension(alloc::format!("warp size must be >= 2, got {n}")));
    }
    let sx = bbox.w / n as f64;
    let sy = bbox.h / n as f64;
    let mut data = Vec::with_capacity(n * n);
    for i in 0..n {
        let y = bbox.y + (i as f64 + 0.5) * sy - 0.5;
        for j in 0..n {
            let x = bbox.x + (j as f64 + 0.5) * sx - 0.5;
            data.push(frame.sample_bilinear(x, y));
        }
    }
    Ok(GrayImage {
        width: n,
        height: n,
        data,
    })
}

/// All `w`x`w` windows of a square image at stride 1, in raster order of
/// their top-left corners. Patches are raw, not normalised.
pub fn extract_patches(img: &GrayImage, w: usize) -> Result<Vec<Patch>> {
    if img.width != img.height {
        return Err(Error::Dimension(alloc::format!(
            "patch extraction expects a square image, got {}x{}",
            img.width,
            img.height
        )));
    }
    let n = img.width;
    if w == 0 || w > n {
        return Err(Error::Dimension(alloc::format!(
            "receptive field {w} does not fit a {n}x{n} image"
        )));
    }
    let side = n - w + 1;
    let mut patches = Vec::with_capacity(side * side);
    for r in 0..side {
        for c in 0..side {
            let mut values = Vec::with_capacity(w * w);
            for u in 0..w {
                let row = (r + u) * n + c;
                values.extend_from_slice(&img.data[row..row + w]);
            }
            patches.push(Patch { side: w, values });
        }
    }
    Ok(patches)
}

/// Mean subtraction followed by ℓ2 normalisation. Constant patches become zero.
pub fn normalize_patch(p: &Patch) -> Patch {
    Patch {
        side: p.side,
        values: normalize_values(&p.values),
    }
}

pub(crate) fn normalize_values(values: &[f64]) -> Vec<f64> {
    let len = values.len() as f64;
    let mean = values.iter().sum::<f64>() / len;
    let mut out: Vec<f64> = values.iter().map(|v| v - mean).collect();
    let norm = libm::sqrt(out.iter().map(|v| v * v).sum::<f64>());
    if norm < DEGENERATE_NORM {
        out.iter_mut().for_each(|v| *v = 0.0);
    } else {
        out.iter_mut().for_each(|v| *v /= norm);
    }
    out
}

/// Warps, extracts and normalises every patch of a region in one pass.
pub fn normalized_patches(frame: &GrayImage, bbox: &BoundingBox, n: usize, w: usize) -> Result<Vec<Patch>> {
    let warped = warp_region(frame, bbox, n)?;
    Ok(extract_patches(&warped, w)?.iter().map(normalize_patch).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn gray_fixed_point_and_weights() {
        let v = GrayImage::from_fn(3, 2, |x, y| 0.1 * x as f64 + 0.37 * y as f64);
        let rgb = RgbImage::from_planes(&v, &v, &v).unwrap();
        assert_eq!(to_gray(&rgb), v);

        let one = GrayImage::filled(1, 1, 1.0);
        let zero = GrayImage::filled(1, 1, 0.0);
        let white = RgbImage::from_planes(&one, &one, &one).unwrap();
        assert_eq!(to_gray(&white).get(0, 0), 1.0);
        let red = RgbImage::from_planes(&one, &zero, &zero).unwrap();
        assert_eq!(to_gray(&red).get(0, 0), 0.299);
        // weights sum to one, so mixed white is still 1 within rounding
        assert!(close(LUMA_WEIGHTS.iter().sum::<f64>(), 1.0, 1e-15));
    }

    #[test]
    fn mismatched_channels_rejected() {
        let a = GrayImage::filled(3, 3, 0.5);
        let b = GrayImage::filled(3, 2, 0.5);
        assert!(matches!(RgbImage::from_planes(&a, &a, &b), Err(Error::Dimension(_))));
    }

    #[test]
    fn warp_identity_crop() {
        let frame = GrayImage::from_fn(20, 15, |x, y| ((x * 7 + y * 13) % 11) as f64 / 11.0);
        let bbox = BoundingBox::new(3.0, 4.0, 8.0, 8.0).unwrap();
        let warped = warp_region(&frame, &bbox, 8).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                assert_eq!(warped.get(j, i), frame.get(j + 3, i + 4));
            }
        }
    }

    #[test]
    fn warp_constant_image() {
        let frame = GrayImage::filled(10, 10, 0.42);
        let bbox = BoundingBox::new(-3.5, 6.2, 17.0, 9.1).unwrap();
        let warped = warp_region(&frame, &bbox, 5).unwrap();
        assert!(warped.data().iter().all(|&v| close(v, 0.42, 1e-15)));
    }

    #[test]
    fn warp_checkerboard_matches_hand_bilinear() {
        // 2x2 checkerboard [[0,1],[1,0]] warped from box (0,0,2,2) to 4x4.
        let frame = GrayImage::new(2, 2, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        let bbox = BoundingBox::new(0.0, 0.0, 2.0, 2.0).unwrap();
        let warped = warp_region(&frame, &bbox, 4).unwrap();
        // Sample coordinates are (k + 0.5) / 2 - 0.5 = -0.25, 0.25, 0.75, 1.25;
        // clamped to [0, 1] these become 0, 0.25, 0.75, 1.
        let t = [0.0, 0.25, 0.75, 1.0];
        for (i, &ty) in t.iter().enumerate() {
            for (j, &tx) in t.iter().enumerate() {
                // f(x, y) = x(1-y) + y(1-x) over the unit square.
                let expected = tx * (1.0 - ty) + ty * (1.0 - tx);
                assert!(close(warped.get(j, i), expected, 1e-15), "({j},{i})");
            }
        }
    }

    #[test]
    fn warp_rejects_degenerate_box() {
        let frame = GrayImage::filled(4, 4, 0.0);
        let bad = BoundingBox {
            x: 0.0,
            y: 0.0,
            w: 0.0,
            h: 3.0,
        };
        assert!(matches!(warp_region(&frame, &bad, 4), Err(Error::InvalidBox { .. })));
        assert!(BoundingBox::new(0.0, 0.0, 2.0, -1.0).is_err());
    }

    #[test]
    fn patch_counts_and_blocks() {
        let img = GrayImage::filled(32, 32, 0.0);
        assert_eq!(extract_patches(&img, 6).unwrap().len(), 729);

        let img = GrayImage::new(3, 3, (1..=9).map(f64::from).collect()).unwrap();
        let whole = extract_patches(&img, 3).unwrap();
        assert_eq!(whole.len(), 1);
        assert_eq!(whole[0].values(), img.data());

        let blocks = extract_patches(&img, 2).unwrap();
        let expected = [[1., 2., 4., 5.], [2., 3., 5., 6.], [4., 5., 7., 8.], [5., 6., 8., 9.]];
        assert_eq!(blocks.len(), 4);
        for (p, e) in blocks.iter().zip(expected.iter()) {
            assert_eq!(p.values(), e);
        }
        assert!(extract_patches(&img, 4).is_err());
    }

    #[test]
    fn normalize_edge_cases() {
        let constant = Patch::new(2, vec![3.5; 4]).unwrap();
        assert!(normalize_patch(&constant).is_zero());

        let v = normalize_values(&[2.0, -2.0]);
        let s = core::f64::consts::FRAC_1_SQRT_2;
        assert!(close(v[0], s, 1e-15) && close(v[1], -s, 1e-15));
    }
}
