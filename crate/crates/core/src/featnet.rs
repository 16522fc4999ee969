//! Simple-cell feature maps, the stacked complex-cell vector, and its
//! soft-shrinkage sparsification.
//!
//! Convolution here is valid-mode cross-correlation (the filter is not
//! flipped): `out(r, c) = Σ_uv filt(u, v) · img(r + u, c + v)`.
//! Maps are stacked map-major: all of map 0 in raster order, then map 1, and
//! so on.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::Fft2d;
use crate::filterbank::FilterBank;
use crate::image::{GrayImage, Patch};
use crate::linalg::{matmul_transposed, matmul_transposed_f32};

/// Valid-mode response of one filter, `rows`x`cols`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SimpleCellMap {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl SimpleCellMap {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::Dimension(alloc::format!(
                "{} values for a {rows}x{cols} map",
                values.len()
            )));
        }
        Ok(Self { rows, cols, values })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.cols + c]
    }
}

/// Flattened stack of `d` simple-cell maps.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexCellRep {
    values: Vec<f64>,
    sparse: bool,
}

impl ComplexCellRep {
    pub fn dense(values: Vec<f64>) -> Self {
        Self { values, sparse: false }
    }

    pub fn sparse(values: Vec<f64>) -> Self {
        Self { values, sparse: true }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_sparse(&self) -> bool {
        self.sparse
    }

    pub fn count_zeros(&self) -> usize {
        self.values.iter().filter(|&&v| v == 0.0).count()
    }

    /// Euclidean distance to another representation of the same size.
    pub fn distance(&self, other: &ComplexCellRep) -> Result<f64> {
        check_dims(self.dim(), other.dim())?;
        Ok(libm::sqrt(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| (a - b) * (a - b))
                .sum(),
        ))
    }
}

fn check_dims(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::Dimension(alloc::format!(
            "representations differ in length: {a} vs {b}"
        )));
    }
    Ok(())
}

fn check_fits(img: &GrayImage, w: usize) -> Result<()> {
    if w == 0 || w > img.width() || w > img.height() {
        return Err(Error::Dimension(alloc::format!(
            "{w}x{w} filter does not fit a {}x{} image",
            img.width(),
            img.height()
        )));
    }
    Ok(())
}

/// Direct valid-mode correlation of a raw `w`x`w` kernel with `img`.
pub(crate) fn correlate_raw(img: &GrayImage, kernel: &[f64], w: usize, out: &mut [f64]) {
    let width = img.width();
    let data = img.data();
    let cols = width - w + 1;
    let rows = img.height() - w + 1;
    debug_assert_eq!(out.len(), rows * cols);
    out.iter_mut().for_each(|v| *v = 0.0);
    for u in 0..w {
        for v in 0..w {
            let k = kernel[u * w + v];
            if k == 0.0 {
                continue;
            }
            for r in 0..rows {
                let src = &data[(r + u) * width + v..(r + u) * width + v + cols];
                let dst = &mut out[r * cols..(r + 1) * cols];
                for (o, s) in dst.iter_mut().zip(src) {
                    *o += k * s;
                }
            }
        }
    }
}

/// Valid-mode cross-correlation by direct summation.
pub fn convolve_valid(img: &GrayImage, filt: &Patch) -> Result<SimpleCellMap> {
    let w = filt.side();
    check_fits(img, w)?;
    let rows = img.height() - w + 1;
    let cols = img.width() - w + 1;
    let mut values = vec![0.0; rows * cols];
    correlate_raw(img, filt.values(), w, &mut values);
    SimpleCellMap::new(rows, cols, values)
}

/// Valid-mode cross-correlation through a zero-padded 2D FFT.
///
/// Both inputs are padded to the next power of two at least as large as the
/// image, so the circular correlation never wraps inside the valid region.
pub fn convolve_valid_fast(img: &GrayImage, filt: &Patch) -> Result<SimpleCellMap> {
    let w = filt.side();
    check_fits(img, w)?;
    let prows = img.height().next_power_of_two();
    let pcols = img.width().next_power_of_two();
    let fft = Fft2d::new(prows, pcols);

    let zero = Complex64::new(0.0, 0.0);
    let mut image = vec![zero; prows * pcols];
    for y in 0..img.height() {
        for x in 0..img.width() {
            image[y * pcols + x] = Complex64::new(img.get(x, y), 0.0);
        }
    }
    let mut kernel = vec![zero; prows * pcols];
    for u in 0..w {
        for v in 0..w {
            kernel[u * pcols + v] = Complex64::new(filt.values()[u * w + v], 0.0);
        }
    }
    fft.forward(&mut image);
    fft.forward(&mut kernel);
    for (a, k) in image.iter_mut().zip(&kernel) {
        *a *= k.conj();
    }
    fft.inverse(&mut image);

    let rows = img.height() - w + 1;
    let cols = img.width() - w + 1;
    let mut values = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        values.extend(image[r * pcols..r * pcols + cols].iter().map(|c| c.re));
    }
    SimpleCellMap::new(rows, cols, values)
}

/// Simple-cell maps `S_i = (F_i^o - F_i^b) ⊗ I`, one per filter pair.
pub fn simple_maps(img: &GrayImage, bank: &FilterBank) -> Result<Vec<SimpleCellMap>> {
    let w = bank.w();
    check_fits(img, w)?;
    let rows = img.height() - w + 1;
    let cols = img.width() - w + 1;
    bank.difference_filters()
        .iter()
        .map(|k| {
            let mut values = vec![0.0; rows * cols];
            correlate_raw(img, k, w, &mut values);
            SimpleCellMap::new(rows, cols, values)
        })
        .collect()
}

/// Concatenates maps in map-major, raster-within-map order.
pub fn stack_complex(maps: &[SimpleCellMap]) -> Result<ComplexCellRep> {
    let first = maps.first().ok_or(Error::Empty("simple-cell maps"))?;
    let shape = (first.rows, first.cols);
    if maps.iter().any(|m| (m.rows, m.cols) != shape) {
        return Err(Error::Dimension("simple-cell maps differ in size".into()));
    }
    Ok(ComplexCellRep::dense(
        maps.iter().flat_map(|m| m.values.iter().copied()).collect(),
    ))
}

/// How the shrinkage threshold is derived from the representation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LambdaRule {
    /// Lower median of the absolute values.
    #[default]
    AbsMedian,
    /// Lower median of the signed values, floored at zero.
    SignedMedian,
}

fn lower_median(mut values: Vec<f64>) -> f64 {
    let mid = (values.len() - 1) / 2;
    let (_, m, _) = values.select_nth_unstable_by(mid, f64::total_cmp);
    *m
}

/// Shrinkage threshold: lower median of `|vec(C)|`.
pub fn adaptive_lambda(rep: &ComplexCellRep) -> Result<f64> {
    adaptive_lambda_with(rep, LambdaRule::AbsMedian)
}

pub fn adaptive_lambda_with(rep: &ComplexCellRep, rule: LambdaRule) -> Result<f64> {
    if rep.values.is_empty() {
        return Err(Error::Empty("complex-cell representation"));
    }
    Ok(match rule {
        LambdaRule::AbsMedian => lower_median(rep.values.iter().map(|v| v.abs()).collect()),
        LambdaRule::SignedMedian => lower_median(rep.values.clone()).max(0.0),
    })
}

/// `sign(v) · max(0, |v| - λ)` element-wise.
pub fn soft_shrink(rep: &ComplexCellRep, lambda: f64) -> Result<ComplexCellRep> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidThreshold(lambda));
    }
    Ok(ComplexCellRep::sparse(
        rep.values
            .iter()
            .map(|&v| {
                let mag = v.abs() - lambda;
                if mag > 0.0 {
                    mag.copysign(v)
                } else {
                    0.0
                }
            })
            .collect(),
    ))
}

/// Masks a raw candidate to the template's support: `raw ⊙ [template ≠ 0]`.
pub fn candidate_rep(raw: &ComplexCellRep, template: &ComplexCellRep) -> Result<ComplexCellRep> {
    check_dims(raw.dim(), template.dim())?;
    Ok(ComplexCellRep::dense(
        raw.values
            .iter()
            .zip(&template.values)
            .map(|(&r, &t)| if t != 0.0 { r } else { 0.0 })
            .collect(),
    ))
}

/// Writes every `w`x`w` window of `img` as one row of `out`, raster order.
pub(crate) fn im2col<T: Copy>(img: &GrayImage, w: usize, out: &mut Vec<T>, cast: impl Fn(f64) -> T) {
    let width = img.width();
    let data = img.data();
    out.clear();
    for r in 0..=img.height() - w {
        for c in 0..=width - w {
            for u in 0..w {
                let row = (r + u) * width + c;
                out.extend(data[row..row + w].iter().map(|&v| cast(v)));
            }
        }
    }
}

/// Reusable single-precision buffers for [`MaskedExtractor::distance`].
#[derive(Debug, Clone, Default)]
pub struct ExtractScratch {
    windows: Vec<f32>,
    responses: Vec<f32>,
}

/// Difference filters plus a template support mask.
///
/// [`extract`](Self::extract) produces the same vector as
/// `candidate_rep(stack_complex(simple_maps(..)))`, computing all `d` maps as
/// one matrix product over the image's unrolled windows.
/// [`distance`](Self::distance) runs that product in single precision, which
/// is what makes scoring hundreds of particles per frame affordable; the
/// template, the mask and the accumulated distance stay in `f64`.
#[derive(Debug, Clone)]
pub struct MaskedExtractor {
    w: usize,
    n: usize,
    d: usize,
    /// `d` rows of `w * w` difference-filter taps.
    kernels: Vec<f64>,
    kernels32: Vec<f32>,
    /// 1 where the template is non-zero, 0 elsewhere.
    mask: Vec<f64>,
}

impl MaskedExtractor {
    pub fn new(bank: &FilterBank, template: &ComplexCellRep, n: usize) -> Result<Self> {
        let w = bank.w();
        if w > n {
            return Err(Error::Dimension(alloc::format!("{w}x{w} filter does not fit {n}x{n}")));
        }
        let side = n - w + 1;
        check_dims(template.dim(), side * side * bank.d())?;
        let kernels = bank.difference_filters().concat();
        Ok(Self {
            w,
            n,
            d: bank.d(),
            kernels32: kernels.iter().map(|&v| v as f32).collect(),
            kernels,
            mask: template
                .values
                .iter()
                .map(|&v| if v != 0.0 { 1.0 } else { 0.0 })
                .collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.mask.len()
    }

    fn positions(&self) -> usize {
        let side = self.n - self.w + 1;
        side * side
    }

    fn check_image(&self, img: &GrayImage) -> Result<()> {
        if img.width() != self.n || img.height() != self.n {
            return Err(Error::Dimension(alloc::format!(
                "expected a {0}x{0} image, got {1}x{2}",
                self.n,
                img.width(),
                img.height()
            )));
        }
        Ok(())
    }

    /// Unmasked complex-cell representation of a warped `n`x`n` image.
    pub fn raw(&self, img: &GrayImage) -> Result<ComplexCellRep> {
        self.check_image(img)?;
        let mut windows = Vec::with_capacity(self.positions() * self.w * self.w);
        im2col(img, self.w, &mut windows, |v| v);
        let mut out = vec![0.0; self.dim()];
        matmul_transposed(
            &self.kernels,
            &windows,
            self.d,
            self.w * self.w,
            self.positions(),
            &mut out,
        );
        Ok(ComplexCellRep::dense(out))
    }

    /// Restricts `rep` to the template support.
    pub fn mask(&self, rep: &ComplexCellRep) -> Result<ComplexCellRep> {
        check_dims(rep.dim(), self.dim())?;
        let values = rep.values.iter().zip(&self.mask).map(|(v, m)| v * m).collect();
        Ok(ComplexCellRep {
            values,
            sparse: rep.sparse,
        })
    }

    /// Masked candidate representation of a warped `n`x`n` image.
    pub fn extract(&self, img: &GrayImage) -> Result<ComplexCellRep> {
        self.mask(&self.raw(img)?)
    }

    /// `‖template - extract(img)‖₂` without materialising the candidate.
    ///
    /// Agrees with the exact distance to single-precision accuracy.
    pub fn distance(&self, template: &ComplexCellRep, img: &GrayImage, scratch: &mut ExtractScratch) -> Result<f64> {
        check_dims(template.dim(), self.dim())?;
        self.check_image(img)?;
        im2col(img, self.w, &mut scratch.windows, |v| v as f32);
        scratch.responses.resize(self.dim(), 0.0);
        matmul_transposed_f32(
            &self.kernels32,
            &scratch.windows,
            self.d,
            self.w * self.w,
            self.positions(),
            &mut scratch.responses,
        );
        Ok(libm::sqrt(masked_sq_diff(
            &template.values,
            &scratch.responses,
            &self.mask,
        )))
    }
}

/// `Σ (t - m·v)²` over eight interleaved lanes so the loop vectorises.
fn masked_sq_diff(t: &[f64], v: &[f32], m: &[f64]) -> f64 {
    const LANES: usize = 8;
    let term = |t: f64, v: f32, m: f64| {
        let diff = t - f64::from(v) * m;
        diff * diff
    };
    let (ct, cv, cm) = (t.chunks_exact(LANES), v.chunks_exact(LANES), m.chunks_exact(LANES));
    let tail: f64 = ct
        .remainder()
        .iter()
        .zip(cv.remainder())
        .zip(cm.remainder())
        .map(|((&t, &v), &m)| term(t, v, m))
        .sum();
    let mut acc = [0.0; LANES];
    for ((t, v), m) in ct.zip(cv).zip(cm) {
        for l in 0..LANES {
            acc[l] += term(t[l], v[l], m[l]);
        }
    }
    acc.iter().sum::<f64>() + tail
}
