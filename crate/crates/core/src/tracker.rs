//! Particle-filter tracking on the sparse complex-cell template.
//!
//! Each step rebuilds the background context filters around the previous
//! estimate, diffuses particles with a Brownian motion model over
//! `(x, y, s)`, scores every particle by `exp(-‖c_t - c_t^i‖₂)` on the
//! template-masked candidate vector, keeps the best particle, and blends its
//! sparse representation into the template with a low-pass update.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::featnet::{
    adaptive_lambda_with, simple_maps, soft_shrink, stack_complex, ComplexCellRep, ExtractScratch, LambdaRule,
    MaskedExtractor,
};
use crate::filterbank::{build_background_filters, sample_background_boxes, FilterBank, FilterSelection};
use crate::image::{extract_patches, normalize_patch, warp_region, BoundingBox, GrayImage};

/// Scale multipliers are kept inside this range.
pub const SCALE_RANGE: (f64, f64) = (0.1, 10.0);

/// Tracker ablations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Variant {
    /// k-means filters with soft shrinkage.
    #[default]
    Full,
    /// Filters drawn uniformly at random from the patch set.
    RandomFilters,
    /// Template kept dense; no soft shrinkage.
    NoShrinkage,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Full, Variant::RandomFilters, Variant::NoShrinkage];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::RandomFilters => "random_filters",
            Variant::NoShrinkage => "no_shrinkage",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::Config(alloc::format!("unknown variant `{s}`")))
    }
}

impl LambdaRule {
    pub fn name(self) -> &'static str {
        match self {
            LambdaRule::AbsMedian => "abs_median",
            LambdaRule::SignedMedian => "signed_median",
        }
    }
}

impl FromStr for LambdaRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "abs_median" => Ok(LambdaRule::AbsMedian),
            "signed_median" => Ok(LambdaRule::SignedMedian),
            _ => Err(Error::Config(alloc::format!("unknown lambda rule `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackerConfig {
    /// Side of the warped target image.
    pub n: usize,
    /// Receptive field (filter) side.
    pub w: usize,
    /// Number of filters.
    pub d: usize,
    /// Template learning rate.
    pub rho: f64,
    pub sigma_x: f64,
    pub sigma_y: f64,
    pub sigma_s: f64,
    pub particles: usize,
    pub background_samples: usize,
    pub seed: u64,
    pub variant: Variant,
    pub kmeans_max_iters: usize,
    pub lambda_rule: LambdaRule,
    /// Multiply each particle's likelihood by the Gaussian motion prior.
    pub motion_prior: bool,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            n: 32,
            w: 6,
            d: 100,
            rho: 0.95,
            sigma_x: 4.0,
            sigma_y: 4.0,
            sigma_s: 0.01,
            particles: 600,
            background_samples: 8,
            seed: 0,
            variant: Variant::Full,
            kmeans_max_iters: crate::kmeans::DEFAULT_MAX_ITERS,
            lambda_rule: LambdaRule::AbsMedian,
            motion_prior: false,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.n < 2 {
            return fail(alloc::format!("n must be >= 2, got {}", self.n));
        }
        if self.w == 0 || self.w > self.n {
            return fail(alloc::format!("w must be in 1..={}, got {}", self.n, self.w));
        }
        let patches = (self.n - self.w + 1) * (self.n - self.w + 1);
        if self.d == 0 || self.d > patches {
            return fail(alloc::format!("d must be in 1..={patches}, got {}", self.d));
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return fail(alloc::format!("rho must lie in [0, 1], got {}", self.rho));
        }
        for (name, s) in [
            ("sigma_x", self.sigma_x),
            ("sigma_y", self.sigma_y),
            ("sigma_s", self.sigma_s),
        ] {
            if !(s.is_finite() && s >= 0.0) {
                return fail(alloc::format!("{name} must be finite and non-negative, got {s}"));
            }
        }
        if self.particles == 0 {
            return fail("particles must be positive".into());
        }
        if self.background_samples == 0 {
            return fail("background_samples must be positive".into());
        }
        if self.kmeans_max_iters == 0 {
            return fail("kmeans_max_iters must be positive".into());
        }
        Ok(())
    }

    /// Length of the complex-cell vector, `(n - w + 1)^2 · d`.
    pub fn feature_dim(&self) -> usize {
        let side = self.n - self.w + 1;
        side * side * self.d
    }

    fn selection(&self) -> FilterSelection {
        match self.variant {
            Variant::RandomFilters => FilterSelection::Random,
            _ => FilterSelection::KMeans {
                max_iters: self.kmeans_max_iters,
            },
        }
    }
}

/// Target centre and scale relative to the initial box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetState {
    pub x: f64,
    pub y: f64,
    pub s: f64,
}

impl TargetState {
    /// Box of `initial`'s size scaled by `s`, centred on `(x, y)`.
    pub fn to_box(&self, initial: &BoundingBox) -> BoundingBox {
        let (w, h) = (initial.w * self.s, initial.h * self.s);
        BoundingBox {
            x: self.x - w / 2.0,
            y: self.y - h / 2.0,
            w,
            h,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSet {
    pub states: Vec<TargetState>,
    pub weights: Vec<f64>,
}

impl ParticleSet {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// Brownian motion proposal around `prev`, with uniform weights.
pub fn diffuse_particles<R: Rng + ?Sized>(prev: &TargetState, cfg: &TrackerConfig, rng: &mut R) -> ParticleSet {
    let count = cfg.particles;
    let mut states = Vec::with_capacity(count);
    for _ in 0..count {
        let zx: f64 = rng.sample(StandardNormal);
        let zy: f64 = rng.sample(StandardNormal);
        let zs: f64 = rng.sample(StandardNormal);
        states.push(TargetState {
            x: prev.x + cfg.sigma_x * zx,
            y: prev.y + cfg.sigma_y * zy,
            s: (prev.s + cfg.sigma_s * zs).clamp(SCALE_RANGE.0, SCALE_RANGE.1),
        });
    }
    ParticleSet {
        states,
        weights: alloc::vec![1.0 / count as f64; count],
    }
}

/// Observation likelihood `exp(-‖template - cand‖₂)`.
pub fn likelihood(template: &ComplexCellRep, cand: &ComplexCellRep) -> Result<f64> {
    Ok(libm::exp(-template.distance(cand)?))
}

/// Low-pass template update `(1 - ρ) c_prev + ρ ĉ`.
///
/// Each output element is clamped to the closed interval spanned by its
/// inputs, so rounding never leaves the segment.
pub fn update_template(c_prev: &ComplexCellRep, c_hat: &ComplexCellRep, rho: f64) -> Result<ComplexCellRep> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::Config(alloc::format!("rho must lie in [0, 1], got {rho}")));
    }
    if c_prev.dim() != c_hat.dim() {
        return Err(Error::Dimension(alloc::format!(
            "template has {} entries, update has {}",
            c_prev.dim(),
            c_hat.dim()
        )));
    }
    Ok(ComplexCellRep::sparse(
        c_prev
            .values()
            .iter()
            .zip(c_hat.values())
            .map(|(&a, &b)| ((1.0 - rho) * a + rho * b).clamp(a.min(b), a.max(b)))
            .collect(),
    ))
}

/// Everything a tracker carries from one frame to the next.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackerState {
    config: TrackerConfig,
    bank: FilterBank,
    template: ComplexCellRep,
    current: TargetState,
    initial_box: BoundingBox,
    rng: ChaCha8Rng,
}

/// Outcome of one tracking step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub bbox: BoundingBox,
    pub state: TargetState,
    /// Diffused particles with normalised posterior weights.
    pub particles: ParticleSet,
    pub best_index: usize,
    pub best_likelihood: f64,
}

fn warped_target(frame: &GrayImage, bbox: &BoundingBox, n: usize) -> Result<GrayImage> {
    Ok(warp_region(frame, bbox, n)?.normalized())
}

/// Edge tolerance, in pixels, for the initial box (annotations often touch the border).
const INIT_EDGE_SLACK: f64 = 1.0;

impl TrackerState {
    /// Learns the filter bank and initial template from the first frame.
    pub fn init(frame: &GrayImage, bbox: &BoundingBox, config: TrackerConfig) -> Result<Self> {
        config.validate()?;
        bbox.validate()?;
        let (fw, fh) = (frame.width() as f64, frame.height() as f64);
        if bbox.x < -INIT_EDGE_SLACK
            || bbox.y < -INIT_EDGE_SLACK
            || bbox.right() > fw + INIT_EDGE_SLACK
            || bbox.bottom() > fh + INIT_EDGE_SLACK
        {
            return Err(Error::Init(alloc::format!(
                "box ({}, {}, {}, {}) lies outside the {fw}x{fh} frame",
                bbox.x,
                bbox.y,
                bbox.w,
                bbox.h
            )));
        }
        if bbox.w < config.w as f64 || bbox.h < config.w as f64 {
            return Err(Error::Init(alloc::format!(
                "box {}x{} is smaller than the {}px receptive field",
                bbox.w,
                bbox.h,
                config.w
            )));
        }

        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let warped = warped_target(frame, bbox, config.n)?;
        let patches: Vec<_> = extract_patches(&warped, config.w)?
            .iter()
            .map(normalize_patch)
            .collect();
        let object = config.selection().select(&patches, config.d, rng.next_u64())?;
        let bank = FilterBank::object_only(object)?;
        let bank = Self::refresh_background(&bank, frame, bbox, &config, rng.next_u64())?;

        let raw = stack_complex(&simple_maps(&warped, &bank)?)?;
        let template = Self::sparsify(&raw, &config)?;
        let (x, y) = bbox.center();
        Ok(Self {
            config,
            bank,
            template,
            current: TargetState { x, y, s: 1.0 },
            initial_box: *bbox,
            rng,
        })
    }

    fn sparsify(raw: &ComplexCellRep, config: &TrackerConfig) -> Result<ComplexCellRep> {
        let lambda = match config.variant {
            Variant::NoShrinkage => 0.0,
            _ => adaptive_lambda_with(raw, config.lambda_rule)?,
        };
        soft_shrink(raw, lambda)
    }

    /// Background filters pooled from samples around `around`. When the frame
    /// cannot hold a box of that size the previous filters are kept.
    fn refresh_background(
        bank: &FilterBank,
        frame: &GrayImage,
        around: &BoundingBox,
        config: &TrackerConfig,
        seed: u64,
    ) -> Result<FilterBank> {
        let boxes = match sample_background_boxes(around, frame.width(), frame.height(), config.background_samples) {
            Ok(boxes) => boxes,
            Err(Error::InvalidGeometry(_)) => return Ok(bank.clone()),
            Err(e) => return Err(e),
        };
        let background =
            build_background_filters(frame, &boxes, config.d, config.w, config.n, seed, config.selection())?;
        bank.with_background(background)
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.config
    }

    pub fn bank(&self) -> &FilterBank {
        &self.bank
    }

    pub fn template(&self) -> &ComplexCellRep {
        &self.template
    }

    pub fn current(&self) -> TargetState {
        self.current
    }

    pub fn initial_box(&self) -> BoundingBox {
        self.initial_box
    }

    pub fn current_box(&self) -> BoundingBox {
        self.current.to_box(&self.initial_box)
    }

    /// Log of the unnormalised Gaussian motion prior.
    fn log_prior(&self, s: &TargetState) -> f64 {
        let term = |d: f64, sigma: f64| {
            if sigma > 0.0 {
                -0.5 * (d / sigma) * (d / sigma)
            } else {
                0.0
            }
        };
        term(s.x - self.current.x, self.config.sigma_x)
            + term(s.y - self.current.y, self.config.sigma_y)
            + term(s.s - self.current.s, self.config.sigma_s)
    }

    /// Tracks the target into `frame` and updates the template.
    pub fn step(&mut self, frame: &GrayImage) -> Result<StepReport> {
        let prev_box = self.current_box();
        let bg_seed = self.rng.next_u64();
        self.bank = Self::refresh_background(&self.bank, frame, &prev_box, &self.config, bg_seed)?;
        let extractor = MaskedExtractor::new(&self.bank, &self.template, self.config.n)?;

        let mut particles = diffuse_particles(&self.current, &self.config, &mut self.rng);
        let score = |s: &TargetState, scratch: &mut ExtractScratch| -> Result<f64> {
            let warped = warped_target(frame, &s.to_box(&self.initial_box), self.config.n)?;
            let mut log_w = -extractor.distance(&self.template, &warped, scratch)?;
            if self.config.motion_prior {
                log_w += self.log_prior(s);
            }
            Ok(log_w)
        };
        let log_weights = self.score_all(&particles.states, score)?;

        let mut best = 0;
        for (i, &lw) in log_weights.iter().enumerate() {
            if lw > log_weights[best] {
                best = i;
            }
        }
        let max_lw = log_weights[best];
        let total: f64 = log_weights.iter().map(|lw| libm::exp(lw - max_lw)).sum();
        particles.weights = log_weights.iter().map(|lw| libm::exp(lw - max_lw) / total).collect();

        let winner = particles.states[best];
        let warped = warped_target(frame, &winner.to_box(&self.initial_box), self.config.n)?;
        let cand = extractor.extract(&warped)?;
        let best_likelihood = libm::exp(-self.template.distance(&cand)?);
        // The winner's candidate vector is already confined to the template
        // support, so shrinking it can never add entries outside that support.
        let c_hat = Self::sparsify(&cand, &self.config)?;
        self.template = update_template(&self.template, &c_hat, self.config.rho)?;
        self.current = winner;

        Ok(StepReport {
            bbox: self.current_box(),
            state: winner,
            particles,
            best_index: best,
            best_likelihood,
        })
    }

    #[cfg(feature = "rayon")]
    fn score_all<F>(&self, states: &[TargetState], f: F) -> Result<Vec<f64>>
    where
        F: Fn(&TargetState, &mut ExtractScratch) -> Result<f64> + Send + Sync,
    {
        use rayon::prelude::*;
        // one scratch buffer per chunk keeps allocation out of the per-particle path
        const CHUNK: usize = 64;
        let chunks: Vec<Result<Vec<f64>>> = states
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut scratch = ExtractScratch::default();
                chunk.iter().map(|s| f(s, &mut scratch)).collect()
            })
            .collect();
        let mut out = Vec::with_capacity(states.len());
        for chunk in chunks {
            out.extend(chunk?);
        }
        Ok(out)
    }

    #[cfg(not(feature = "rayon"))]
    fn score_all<F>(&self, states: &[TargetState], f: F) -> Result<Vec<f64>>
    where
        F: Fn(&TargetState, &mut ExtractScratch) -> Result<f64>,
    {
        let mut scratch = ExtractScratch::default();
        states.iter().map(|s| f(s, &mut scratch)).collect()
    }
}
