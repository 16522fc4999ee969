//! Seeded Lloyd k-means over flattened patches.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::image::Patch;
use crate::linalg::matmul_transposed;

/// Default Lloyd iteration cap.
pub const DEFAULT_MAX_ITERS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    /// One centroid per cluster, each of length `w * w`.
    pub centroids: Vec<Vec<f64>>,
    /// Cluster index for every input patch.
    pub assignments: Vec<usize>,
    /// Sum of squared distances from each patch to its assigned centroid.
    pub inertia: f64,
    /// Inertia after every assignment step, starting with the seeding.
    pub inertia_trace: Vec<f64>,
    /// Number of Lloyd updates performed.
    pub iterations: usize,
}

/// Squared distance over four interleaved lanes, which lets the loop vectorise.
#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    for (x, y) in ca.zip(cb) {
        for l in 0..4 {
            acc[l] += (x[l] - y[l]) * (x[l] - y[l]);
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

struct Lloyd<'a> {
    points: &'a [f64],
    point_norms: Vec<f64>,
    dim: usize,
    k: usize,
    centroids: Vec<f64>,
    assignments: Vec<usize>,
    dists: Vec<f64>,
    cross: Vec<f64>,
}

impl Lloyd<'_> {
    fn centroid(&self, k: usize) -> &[f64] {
        &self.centroids[k * self.dim..(k + 1) * self.dim]
    }

    fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    /// Reassigns every point; a point keeps its cluster when that is tied for nearest.
    ///
    /// Candidates are ranked by `‖x‖² + ‖c‖² - 2 x·c` with the dot products
    /// from one matrix product; the stored distance is recomputed directly.
    fn assign(&mut self) -> bool {
        let (dim, k) = (self.dim, self.k);
        let count = self.assignments.len();
        matmul_transposed(self.points, &self.centroids, count, dim, k, &mut self.cross);
        let centroid_norms: Vec<f64> = self
            .centroids
            .chunks_exact(dim)
            .map(|c| c.iter().map(|v| v * v).sum())
            .collect();
        let mut changed = false;
        for i in 0..count {
            let row = &self.cross[i * k..(i + 1) * k];
            let pn = self.point_norms[i];
            let score = |j: usize| pn + centroid_norms[j] - 2.0 * row[j];
            let mut best = 0;
            let mut best_score = score(0);
            for j in 1..k {
                let s = score(j);
                if s < best_score {
                    best = j;
                    best_score = s;
                }
            }
            let current = self.assignments[i];
            if current < k && current != best && score(current) <= best_score {
                best = current;
            }
            if best != current {
                changed = true;
                self.assignments[i] = best;
            }
            self.dists[i] = sq_dist(self.point(i), self.centroid(best));
        }
        changed
    }

    fn inertia(&self) -> f64 {
        self.dists.iter().sum()
    }

    /// Moves the point farthest from its centroid into each empty cluster.
    fn fill_empty(&mut self) {
        let mut counts = vec![0usize; self.k];
        for &a in &self.assignments {
            counts[a] += 1;
        }
        for k in 0..self.k {
            if counts[k] != 0 {
                continue;
            }
            let mut far = None;
            for (i, &d) in self.dists.iter().enumerate() {
                if d > 0.0 && counts[self.assignments[i]] > 1 && far.is_none_or(|(_, fd)| d > fd) {
                    far = Some((i, d));
                }
            }
            let Some((i, _)) = far else { return };
            counts[self.assignments[i]] -= 1;
            counts[k] = 1;
            self.assignments[i] = k;
            self.dists[i] = 0.0;
            let dim = self.dim;
            let p = self.point(i).to_vec();
            self.centroids[k * dim..(k + 1) * dim].copy_from_slice(&p);
        }
    }

    fn update(&mut self) {
        let dim = self.dim;
        let mut sums = vec![0.0; self.k * dim];
        let mut counts = vec![0usize; self.k];
        for (i, &a) in self.assignments.iter().enumerate() {
            counts[a] += 1;
            let p = &self.points[i * dim..(i + 1) * dim];
            for (s, v) in sums[a * dim..(a + 1) * dim].iter_mut().zip(p) {
                *s += v;
            }
        }
        for k in 0..self.k {
            if counts[k] == 0 {
                continue;
            }
            let inv = counts[k] as f64;
            for (c, s) in self.centroids[k * dim..(k + 1) * dim]
                .iter_mut()
                .zip(&sums[k * dim..(k + 1) * dim])
            {
                *c = s / inv;
            }
        }
    }
}

/// k-means++ seeding: first centre uniform, then proportional to squared distance.
fn seed_centroids(points: &[f64], dim: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let count = points.len() / dim;
    let mut centroids = Vec::with_capacity(k * dim);
    let first = rng.random_range(0..count);
    centroids.extend_from_slice(&points[first * dim..(first + 1) * dim]);
    let mut d2: Vec<f64> = points
        .chunks_exact(dim)
        .map(|p| sq_dist(p, &centroids[..dim]))
        .collect();
    for _ in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &d) in d2.iter().enumerate() {
                acc += d;
                if d > 0.0 && acc > target {
                    pick = Some(i);
                    break;
                }
            }
            // rounding can leave `target` just above the accumulated total
            pick.unwrap_or_else(|| d2.iter().rposition(|&d| d > 0.0).unwrap_or(0))
        } else {
            rng.random_range(0..count)
        };
        let c = &points[pick * dim..(pick + 1) * dim];
        centroids.extend_from_slice(c);
        for (d, p) in d2.iter_mut().zip(points.chunks_exact(dim)) {
            let nd = sq_dist(p, c);
            if nd < *d {
                *d = nd;
            }
        }
    }
    centroids
}

/// Clusters patches into `d` groups.
///
/// Seeding is k-means++ driven by a ChaCha8 stream from `seed`, so the result
/// is bit-identical for identical inputs. Lloyd iterations stop when no
/// assignment changes or after `max_iters` updates.
pub fn kmeans_cluster(patches: &[Patch], d: usize, seed: u64, max_iters: usize) -> Result<KMeansResult> {
    if d == 0 {
        return Err(Error::Config("cluster count must be positive".into()));
    }
    if patches.len() < d {
        return Err(Error::InsufficientData {
            available: patches.len(),
            required: d,
        });
    }
    let dim = patches[0].values().len();
    if patches.iter().any(|p| p.values().len() != dim) {
        return Err(Error::Dimension("patches differ in size".into()));
    }
    let points: Vec<f64> = patches.iter().flat_map(|p| p.values().iter().copied()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centroids = seed_centroids(&points, dim, d, &mut rng);

    let mut lloyd = Lloyd {
        points: &points,
        point_norms: points
            .chunks_exact(dim)
            .map(|p| p.iter().map(|v| v * v).sum())
            .collect(),
        dim,
        k: d,
        centroids,
        assignments: vec![usize::MAX; patches.len()],
        dists: vec![0.0; patches.len()],
        cross: vec![0.0; patches.len() * d],
    };
    lloyd.assign();
    let mut trace = vec![lloyd.inertia()];
    let mut iterations = 0;
    while iterations < max_iters {
        lloyd.fill_empty();
        lloyd.update();
        iterations += 1;
        let changed = lloyd.assign();
        trace.push(lloyd.inertia());
        if !changed {
            break;
        }
    }

    Ok(KMeansResult {
        centroids: lloyd.centroids.chunks_exact(dim).map(<[f64]>::to_vec).collect(),
        assignments: lloyd.assignments,
        inertia: *trace.last().expect("trace is never empty"),
        inertia_trace: trace,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn patch(values: &[f64]) -> Patch {
        Patch::new(2, values.to_vec()).unwrap()
    }

    fn lcg_patches(count: usize, seed: u64) -> Vec<Patch> {
        let mut state = seed;
        (0..count)
            .map(|_| {
                let v = (0..4)
                    .map(|_| {
                        state = state
                            .wrapping_mul(6364136223846793005)
                            .wrapping_add(1442695040888963407);
                        (state >> 11) as f64 / (1u64 << 53) as f64
                    })
                    .collect();
                Patch::new(2, v).unwrap()
            })
            .collect()
    }

    #[test]
    fn single_cluster_is_the_mean() {
        let patches = lcg_patches(17, 3);
        let km = kmeans_cluster(&patches, 1, 9, DEFAULT_MAX_ITERS).unwrap();
        for j in 0..4 {
            let mean = patches.iter().map(|p| p.values()[j]).sum::<f64>() / 17.0;
            assert!((km.centroids[0][j] - mean).abs() < 1e-12);
        }
        assert!(km.assignments.iter().all(|&a| a == 0));
    }

    #[test]
    fn one_cluster_per_distinct_patch() {
        let patches = lcg_patches(12, 5);
        let km = kmeans_cluster(&patches, 12, 1, DEFAULT_MAX_ITERS).unwrap();
        assert_eq!(km.inertia, 0.0);
        let mut seen = km.assignments.clone();
        seen.sort_unstable();
        seen.dedup();
        assert_eq!(seen.len(), 12);
    }

    #[test]
    fn separated_clusters_recovered() {
        // Two tight groups around (0,0,0,0) and (10,10,10,10).
        let mut patches = Vec::new();
        for i in 0..6 {
            let e = 0.01 * i as f64;
            patches.push(patch(&[e, -e, 0.0, e]));
            patches.push(patch(&[10.0 + e, 10.0, 10.0 - e, 10.0]));
        }
        let km = kmeans_cluster(&patches, 2, 42, DEFAULT_MAX_ITERS).unwrap();
        let truth: Vec<usize> = (0..12).map(|i| i % 2).collect();
        // the partition matches up to label permutation
        let same = km
            .assignments
            .iter()
            .zip(&truth)
            .all(|(a, t)| (*a == km.assignments[0]) == (*t == 0));
        assert!(same, "{:?}", km.assignments);
    }

    #[test]
    fn too_few_patches() {
        let patches = lcg_patches(3, 1);
        assert_eq!(
            kmeans_cluster(&patches, 4, 0, 10),
            Err(Error::InsufficientData {
                available: 3,
                required: 4
            })
        );
    }

    #[test]
    fn identical_points_do_not_break_seeding() {
        let patches = vec![patch(&[1.0, 2.0, 3.0, 4.0]); 5];
        let km = kmeans_cluster(&patches, 3, 7, 10).unwrap();
        assert_eq!(km.inertia, 0.0);
        assert_eq!(km.centroids.len(), 3);
    }
}
