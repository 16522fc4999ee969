//! Object filters from the first frame and pooled background context filters.

use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::image::{normalized_patches, BoundingBox, GrayImage, Patch};
use crate::kmeans::{kmeans_cluster, KMeansResult};

/// `d` object filters and `d` index-aligned background filters, all `w`x`w`.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank {
    w: usize,
    object: Vec<Patch>,
    background: Vec<Patch>,
}

impl FilterBank {
    pub fn new(object: Vec<Patch>, background: Vec<Patch>) -> Result<Self> {
        if object.is_empty() {
            return Err(Error::Empty("filter bank"));
        }
        if object.len() != background.len() {
            return Err(Error::Dimension(alloc::format!(
                "{} object filters but {} background filters",
                object.len(),
                background.len()
            )));
        }
        let w = object[0].side();
        if object.iter().chain(&background).any(|p| p.side() != w) {
            return Err(Error::Dimension("filters differ in size".into()));
        }
        Ok(Self { w, object, background })
    }

    /// Bank with all-zero background filters (object-only responses).
    pub fn object_only(object: Vec<Patch>) -> Result<Self> {
        let w = object.first().map(Patch::side).ok_or(Error::Empty("filter bank"))?;
        let background = (0..object.len()).map(|_| Patch::zeros(w)).collect();
        Self::new(object, background)
    }

    pub fn d(&self) -> usize {
        self.object.len()
    }

    pub fn w(&self) -> usize {
        self.w
    }

    pub fn object_filters(&self) -> &[Patch] {
        &self.object
    }

    pub fn background_filters(&self) -> &[Patch] {
        &self.background
    }

    pub fn with_background(&self, background: Vec<Patch>) -> Result<Self> {
        Self::new(self.object.clone(), background)
    }

    /// `F_i^o - F_i^b` for every index, flattened row-major.
    pub fn difference_filters(&self) -> Vec<Vec<f64>> {
        self.object
            .iter()
            .zip(&self.background)
            .map(|(o, b)| o.values().iter().zip(b.values()).map(|(x, y)| x - y).collect())
            .collect()
    }
}

/// For each centroid, the input patch closest to it (lowest index on ties).
pub fn select_filters(patches: &[Patch], km: &KMeansResult) -> Vec<Patch> {
    km.centroids
        .iter()
        .map(|c| {
            let mut best = (0, f64::INFINITY);
            for (i, p) in patches.iter().enumerate() {
                let dist: f64 = p.values().iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum();
                if dist < best.1 {
                    best = (i, dist);
                }
            }
            patches[best.0].clone()
        })
        .collect()
}

/// k-means followed by nearest-patch selection.
pub fn learn_filters(patches: &[Patch], d: usize, seed: u64, max_iters: usize) -> Result<Vec<Patch>> {
    let km = kmeans_cluster(patches, d, seed, max_iters)?;
    Ok(select_filters(patches, &km))
}

/// `d` distinct patches drawn uniformly at random.
pub fn random_filters(patches: &[Patch], d: usize, seed: u64) -> Result<Vec<Patch>> {
    if patches.len() < d {
        return Err(Error::InsufficientData {
            available: patches.len(),
            required: d,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(rand::seq::index::sample(&mut rng, patches.len(), d)
        .into_iter()
        .map(|i| patches[i].clone())
        .collect())
}

/// `m` target-sized boxes whose centres sit on a circle of radius
/// `max(w, h)` around the target centre, at angles `2πk/m` starting from
/// the +x axis. Each box is shifted back inside the frame if needed.
pub fn sample_background_boxes(
    target: &BoundingBox,
    frame_w: usize,
    frame_h: usize,
    m: usize,
) -> Result<Vec<BoundingBox>> {
    target.validate()?;
    if m == 0 {
        return Err(Error::Config("background sample count must be positive".into()));
    }
    if target.w > frame_w as f64 || target.h > frame_h as f64 {
        return Err(Error::InvalidGeometry(alloc::format!(
            "{}x{} target does not fit a {frame_w}x{frame_h} frame",
            target.w,
            target.h
        )));
    }
    let (cx, cy) = target.center();
    let radius = target.w.max(target.h);
    let max_x = frame_w as f64 - target.w;
    let max_y = frame_h as f64 - target.h;
    Ok((0..m)
        .map(|k| {
            let angle = 2.0 * core::f64::consts::PI * k as f64 / m as f64;
            let x = cx + radius * libm::cos(angle) - target.w / 2.0;
            let y = cy + radius * libm::sin(angle) - target.h / 2.0;
            BoundingBox {
                x: x.clamp(0.0, max_x),
                y: y.clamp(0.0, max_y),
                w: target.w,
                h: target.h,
            }
        })
        .collect())
}

/// How filters are picked from a patch set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterSelection {
    KMeans { max_iters: usize },
    Random,
}

impl FilterSelection {
    pub fn select(self, patches: &[Patch], d: usize, seed: u64) -> Result<Vec<Patch>> {
        match self {
            FilterSelection::KMeans { max_iters } => learn_filters(patches, d, seed, max_iters),
            FilterSelection::Random => random_filters(patches, d, seed),
        }
    }
}

/// Learns `d` filters inside every box and averages them index by index.
pub fn build_background_filters(
    frame: &GrayImage,
    boxes: &[BoundingBox],
    d: usize,
    w: usize,
    n: usize,
    seed: u64,
    selection: FilterSelection,
) -> Result<Vec<Patch>> {
    if boxes.is_empty() {
        return Err(Error::Empty("background boxes"));
    }
    let mut sums = alloc::vec![alloc::vec![0.0; w * w]; d];
    for bbox in boxes {
        let patches = normalized_patches(frame, bbox, n, w)?;
        let filters = selection.select(&patches, d, seed)?;
        for (sum, f) in sums.iter_mut().zip(&filters) {
            for (s, v) in sum.iter_mut().zip(f.values()) {
                *s += v;
            }
        }
    }
    let m = boxes.len() as f64;
    sums.into_iter()
        .map(|mut s| {
            s.iter_mut().for_each(|v| *v /= m);
            Patch::new(w, s)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::normalize_patch;
    use crate::kmeans::DEFAULT_MAX_ITERS;

    fn textured(width: usize, height: usize, seed: u64) -> GrayImage {
        let mut state = seed;
        GrayImage::from_fn(width, height, |_, _| {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        })
    }

    fn random_patches(count: usize, seed: u64) -> Vec<Patch> {
        let img = textured(count * 3, 3, seed);
        (0..count)
            .map(|i| {
                let v = (0..9).map(|j| img.get(i * 3 + j % 3, j / 3)).collect();
                normalize_patch(&Patch::new(3, v).unwrap())
            })
            .collect()
    }

    #[test]
    fn single_patch_selects_itself() {
        let patches = random_patches(1, 3);
        let f = learn_filters(&patches, 1, 0, DEFAULT_MAX_ITERS).unwrap();
        assert_eq!(f, patches);
    }

    #[test]
    fn centroids_on_patches_select_those_patches() {
        let patches = random_patches(6, 8);
        let km = KMeansResult {
            centroids: alloc::vec![patches[4].values().to_vec(), patches[1].values().to_vec()],
            assignments: alloc::vec![0; 6],
            inertia: 0.0,
            inertia_trace: alloc::vec![0.0],
            iterations: 0,
        };
        let selected = select_filters(&patches, &km);
        assert_eq!(selected, alloc::vec![patches[4].clone(), patches[1].clone()]);
    }

    #[test]
    fn selected_filters_are_nearest_patches() {
        let patches = random_patches(20, 11);
        let km = kmeans_cluster(&patches, 3, 5, DEFAULT_MAX_ITERS).unwrap();
        let selected = select_filters(&patches, &km);
        for (c, f) in km.centroids.iter().zip(&selected) {
            let d = |p: &Patch| -> f64 { p.values().iter().zip(c).map(|(a, b)| (a - b).powi(2)).sum() };
            let best = patches.iter().map(d).fold(f64::INFINITY, f64::min);
            assert_eq!(d(f), best);
            assert!(patches.contains(f));
        }
    }

    #[test]
    fn four_boxes_on_the_circle() {
        let target = BoundingBox::new(90.0, 95.0, 20.0, 10.0).unwrap();
        let boxes = sample_background_boxes(&target, 200, 200, 4).unwrap();
        let expected = [(120.0, 100.0), (100.0, 120.0), (80.0, 100.0), (100.0, 80.0)];
        for (b, (ex, ey)) in boxes.iter().zip(expected) {
            let (cx, cy) = b.center();
            assert!((cx - ex).abs() < 1e-9 && (cy - ey).abs() < 1e-9, "{b:?}");
            assert_eq!((b.w, b.h), (20.0, 10.0));
        }
        let one = sample_background_boxes(&target, 200, 200, 1).unwrap();
        assert!((one[0].center().0 - 120.0).abs() < 1e-9);
    }

    #[test]
    fn boxes_clamped_inside_frame() {
        let mut state = 99u64;
        let mut next = |hi: f64| {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            hi * ((state >> 11) as f64 / (1u64 << 53) as f64)
        };
        for _ in 0..200 {
            let (fw, fh) = (50 + next(150.0) as usize, 50 + next(150.0) as usize);
            let w = 1.0 + next(fw as f64 - 1.0);
            let h = 1.0 + next(fh as f64 - 1.0);
            let target = BoundingBox::new(next(fw as f64 - w), next(fh as f64 - h), w, h).unwrap();
            let m = 1 + next(12.0) as usize;
            for b in sample_background_boxes(&target, fw, fh, m).unwrap() {
                assert!(b.is_inside(fw, fh), "{b:?} in {fw}x{fh}");
            }
        }
    }

    #[test]
    fn frame_smaller_than_target() {
        let target = BoundingBox::new(0.0, 0.0, 30.0, 10.0).unwrap();
        assert!(matches!(
            sample_background_boxes(&target, 20, 20, 4),
            Err(Error::InvalidGeometry(_))
        ));
    }

    #[test]
    fn background_average_of_two_samples() {
        let frame = textured(60, 60, 1);
        let a = BoundingBox::new(2.0, 3.0, 16.0, 16.0).unwrap();
        let b = BoundingBox::new(30.0, 35.0, 20.0, 18.0).unwrap();
        let sel = FilterSelection::KMeans { max_iters: 50 };
        let fa = learn_filters(&normalized_patches(&frame, &a, 12, 4).unwrap(), 5, 3, 50).unwrap();
        let fb = learn_filters(&normalized_patches(&frame, &b, 12, 4).unwrap(), 5, 3, 50).unwrap();
        let avg = build_background_filters(&frame, &[a, b], 5, 4, 12, 3, sel).unwrap();
        for i in 0..5 {
            for j in 0..16 {
                let expected = (fa[i].values()[j] + fb[i].values()[j]) / 2.0;
                assert!((avg[i].values()[j] - expected).abs() < 1e-15);
            }
        }
        let single = build_background_filters(&frame, &[a], 5, 4, 12, 3, sel).unwrap();
        assert_eq!(single, fa);
        let repeated = build_background_filters(&frame, &[a, a, a], 5, 4, 12, 3, sel).unwrap();
        for (r, f) in repeated.iter().zip(&fa) {
            for (x, y) in r.values().iter().zip(f.values()) {
                assert!((x - y).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn random_filters_are_members() {
        let patches = random_patches(30, 2);
        let f = random_filters(&patches, 10, 4).unwrap();
        assert_eq!(f.len(), 10);
        assert!(f.iter().all(|p| patches.contains(p)));
        assert_eq!(f, random_filters(&patches, 10, 4).unwrap());
    }
}
