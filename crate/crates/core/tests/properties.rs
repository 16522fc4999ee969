use convtrack_core::featnet::adaptive_lambda;
use convtrack_core::filterbank::{build_background_filters, learn_filters, FilterSelection};
use convtrack_core::image::normalized_patches;
use convtrack_core::tracker::SCALE_RANGE;
use convtrack_core::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn image(side: usize) -> impl Strategy<Value = GrayImage> {
    prop::collection::vec(0.0..1.0f64, side * side).prop_map(move |v| GrayImage::new(side, side, v).unwrap())
}

fn rect(width: usize, height: usize) -> impl Strategy<Value = GrayImage> {
    prop::collection::vec(0.0..1.0f64, width * height).prop_map(move |v| GrayImage::new(width, height, v).unwrap())
}

fn patch(side: usize) -> impl Strategy<Value = Patch> {
    prop::collection::vec(-1.0..1.0f64, side * side).prop_map(move |v| Patch::new(side, v).unwrap())
}

fn spread(values: &[f64]) -> f64 {
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    values.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max)
}

fn bbox() -> impl Strategy<Value = BoundingBox> {
    (-50.0..50.0f64, -50.0..50.0f64, 0.5..60.0f64, 0.5..60.0f64)
        .prop_map(|(x, y, w, h)| BoundingBox::new(x, y, w, h).unwrap())
}

fn objective(c: f64, v: f64, lambda: f64) -> f64 {
    lambda * c.abs() + 0.5 * (c - v) * (c - v)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn patch_count_is_square_of_valid_side(n in 2usize..=64, w_frac in 0.0..1.0f64) {
        let w = 2 + ((n - 2) as f64 * w_frac) as usize;
        let img = GrayImage::filled(n, n, 0.5);
        let patches = extract_patches(&img, w).unwrap();
        prop_assert_eq!(patches.len(), (n - w + 1) * (n - w + 1));
        prop_assert!(patches.iter().all(|p| p.values().len() == w * w));
    }

    #[test]
    fn normalized_patch_is_centred_and_unit(p in patch(5)) {
        prop_assume!(spread(p.values()) > 1e-3);
        let q = normalize_patch(&p);
        let mean = q.values().iter().sum::<f64>() / 25.0;
        let norm = q.values().iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assert!(mean.abs() < 1e-9);
        prop_assert!((norm - 1.0).abs() < 1e-9);
    }

    #[test]
    fn normalization_ignores_gain_and_offset(p in patch(6), alpha in 0.05..20.0f64, beta in -5.0..5.0f64) {
        prop_assume!(spread(p.values()) > 1e-2);
        let shifted = Patch::new(6, p.values().iter().map(|v| alpha * v + beta).collect()).unwrap();
        let (a, b) = (normalize_patch(&p), normalize_patch(&shifted));
        for (x, y) in a.values().iter().zip(b.values()) {
            prop_assert!((x - y).abs() < 1e-9, "{} vs {}", x, y);
        }
    }

    #[test]
    fn native_size_integer_warp_is_a_crop(img in rect(20, 17), x in 0usize..10, y in 0usize..7, n in 2usize..=10) {
        let warped = warp_region(&img, &BoundingBox::new(x as f64, y as f64, n as f64, n as f64).unwrap(), n).unwrap();
        for i in 0..n {
            for j in 0..n {
                prop_assert_eq!(warped.get(j, i).to_bits(), img.get(x + j, y + i).to_bits());
            }
        }
    }

    #[test]
    fn kmeans_inertia_never_increases(img in image(10), d in 1usize..12, seed in any::<u64>()) {
        let patches: Vec<Patch> = extract_patches(&img, 3).unwrap().iter().map(normalize_patch).collect();
        let km = kmeans_cluster(&patches, d, seed, 100).unwrap();
        for pair in km.inertia_trace.windows(2) {
            prop_assert!(pair[1] <= pair[0] * (1.0 + 1e-9) + 1e-12, "{:?}", km.inertia_trace);
        }
        prop_assert_eq!(km.assignments.len(), patches.len());
        prop_assert!(km.assignments.iter().all(|&a| a < d));
    }

    #[test]
    fn kmeans_is_bit_deterministic(img in image(9), d in 1usize..10, seed in any::<u64>()) {
        let patches: Vec<Patch> = extract_patches(&img, 3).unwrap().iter().map(normalize_patch).collect();
        let a = kmeans_cluster(&patches, d, seed, 100).unwrap();
        let b = kmeans_cluster(&patches, d, seed, 100).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn object_filters_are_input_patches(img in image(12), d in 1usize..16, seed in any::<u64>()) {
        let patches: Vec<Patch> = extract_patches(&img, 4).unwrap().iter().map(normalize_patch).collect();
        let filters = learn_filters(&patches, d, seed, 100).unwrap();
        prop_assert_eq!(filters.len(), d);
        for f in &filters {
            prop_assert!(patches.contains(f));
        }
    }

    #[test]
    fn background_filter_i_averages_every_sample_i(
        frame in rect(40, 36),
        boxes in prop::collection::vec((0.0..24.0f64, 0.0..20.0f64), 1..4),
        seed in any::<u64>(),
    ) {
        let (d, w, n) = (5, 3, 8);
        let boxes: Vec<BoundingBox> = boxes.iter().map(|&(x, y)| BoundingBox::new(x, y, 14.0, 12.0).unwrap()).collect();
        let selection = FilterSelection::KMeans { max_iters: 50 };
        let pooled = build_background_filters(&frame, &boxes, d, w, n, seed, selection).unwrap();
        let per_box: Vec<Vec<Patch>> = boxes
            .iter()
            .map(|b| learn_filters(&normalized_patches(&frame, b, n, w).unwrap(), d, seed, 50).unwrap())
            .collect();
        for i in 0..d {
            for k in 0..w * w {
                let mean = per_box.iter().map(|fs| fs[i].values()[k]).sum::<f64>() / boxes.len() as f64;
                prop_assert!((pooled[i].values()[k] - mean).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn shrinkage_beats_every_small_perturbation(
        v in prop::collection::vec(-3.0..3.0f64, 1..50),
        lambda in 0.0..2.0f64,
        eps in 1e-4..0.1f64,
    ) {
        let c = soft_shrink(&ComplexCellRep::dense(v.clone()), lambda).unwrap();
        for (&ci, &vi) in c.values().iter().zip(&v) {
            let at = objective(ci, vi, lambda);
            prop_assert!(at <= objective(ci + eps, vi, lambda) + 1e-12);
            prop_assert!(at <= objective(ci - eps, vi, lambda) + 1e-12);
        }
    }

    #[test]
    fn difference_filter_is_difference_of_maps(img in image(14), fo in patch(4), fb in patch(4)) {
        let bank = FilterBank::new(vec![fo.clone()], vec![fb.clone()]).unwrap();
        let joint = &simple_maps(&img, &bank).unwrap()[0];
        let so = convolve_valid(&img, &fo).unwrap();
        let sb = convolve_valid(&img, &fb).unwrap();
        for ((j, o), b) in joint.values().iter().zip(so.values()).zip(sb.values()) {
            prop_assert!((j - (o - b)).abs() < 1e-9);
        }
    }

    #[test]
    fn fft_and_direct_paths_agree(n in 2usize..=64, w_frac in 0.0..1.0f64, seed in any::<u64>()) {
        use rand::Rng;
        let w = 1 + ((n - 1) as f64 * w_frac) as usize;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let img = GrayImage::from_fn(n, n, |_, _| rng.random());
        let filt = Patch::new(w, (0..w * w).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let direct = convolve_valid(&img, &filt).unwrap();
        let fast = convolve_valid_fast(&img, &filt).unwrap();
        for (a, b) in direct.values().iter().zip(fast.values()) {
            prop_assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn adaptive_threshold_zeroes_at_least_half(v in prop::collection::vec(-2.0..2.0f64, 1..400)) {
        let rep = ComplexCellRep::dense(v);
        let shrunk = soft_shrink(&rep, adaptive_lambda(&rep).unwrap()).unwrap();
        prop_assert!(2 * shrunk.count_zeros() >= shrunk.dim());
    }

    #[test]
    fn representation_length_follows_geometry(n in 4usize..=20, w_frac in 0.0..1.0f64, d in 1usize..6, img_seed in any::<u64>()) {
        use rand::Rng;
        let w = 1 + ((n - 1) as f64 * w_frac) as usize;
        let mut rng = ChaCha8Rng::seed_from_u64(img_seed);
        let img = GrayImage::from_fn(n, n, |_, _| rng.random());
        let object = (0..d).map(|_| Patch::new(w, (0..w * w).map(|_| rng.random()).collect()).unwrap()).collect();
        let bank = FilterBank::object_only(object).unwrap();
        let rep = stack_complex(&simple_maps(&img, &bank).unwrap()).unwrap();
        prop_assert_eq!(rep.dim(), (n - w + 1) * (n - w + 1) * d);
    }

    #[test]
    fn template_update_stays_between_inputs(
        pairs in prop::collection::vec((-1e3..1e3f64, -1e3..1e3f64), 1..64),
        rho in 0.0..=1.0f64,
    ) {
        let (a, b): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let (prev, hat) = (ComplexCellRep::dense(a.clone()), ComplexCellRep::dense(b.clone()));
        let out = update_template(&prev, &hat, rho).unwrap();
        for ((o, x), y) in out.values().iter().zip(&a).zip(&b) {
            prop_assert!(*o >= x.min(*y) && *o <= x.max(*y));
        }
        prop_assert_eq!(update_template(&prev, &hat, 0.0).unwrap().into_values(), a);
        prop_assert_eq!(update_template(&prev, &hat, 1.0).unwrap().into_values(), b);
    }

    #[test]
    fn likelihood_falls_with_distance(
        t in prop::collection::vec(-1.0..1.0f64, 1..32),
        dir in prop::collection::vec(-1.0..1.0f64, 32),
        step in 0.0..2.0f64,
        extra in 1e-3..2.0f64,
    ) {
        prop_assume!(dir.iter().take(t.len()).any(|v| v.abs() > 1e-3));
        let at = |k: f64| ComplexCellRep::dense(t.iter().zip(&dir).map(|(a, d)| a + k * d).collect());
        let template = ComplexCellRep::dense(t.clone());
        let near = likelihood(&template, &at(step)).unwrap();
        let far = likelihood(&template, &at(step + extra)).unwrap();
        prop_assert!(near > 0.0 && near <= 1.0);
        prop_assert!(far < near);
        prop_assert_eq!(likelihood(&template, &template).unwrap(), 1.0);
    }

    #[test]
    fn diffusion_is_seeded_and_bounded(seed in any::<u64>(), s in 0.05..12.0f64, sigma_s in 0.0..5.0f64) {
        let cfg = TrackerConfig { particles: 50, sigma_s, ..Default::default() };
        let prev = TargetState { x: 10.0, y: -4.0, s };
        let a = diffuse_particles(&prev, &cfg, &mut ChaCha8Rng::seed_from_u64(seed));
        let b = diffuse_particles(&prev, &cfg, &mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(&a, &b);
        prop_assert!(a.states.iter().all(|p| (SCALE_RANGE.0..=SCALE_RANGE.1).contains(&p.s)));
        prop_assert!((a.weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn overlap_is_symmetric_and_bounded(a in bbox(), b in bbox()) {
        let ab = overlap_ratio(&a, &b).unwrap();
        prop_assert_eq!(ab, overlap_ratio(&b, &a).unwrap());
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert_eq!(overlap_ratio(&a, &a).unwrap(), 1.0);
        if a != b {
            prop_assert!(ab < 1.0);
        }
    }

    #[test]
    fn curves_are_monotone(
        overlaps in prop::collection::vec(0.0..=1.0f64, 1..80),
        errors in prop::collection::vec(0.0..80.0f64, 1..80),
    ) {
        let success = success_curve(&overlaps, 101).unwrap();
        prop_assert!(success.values.windows(2).all(|p| p[1] <= p[0]));
        prop_assert!((0.0..=1.0).contains(&success.summary));
        let precision = precision_curve(&errors, 50).unwrap();
        prop_assert!(precision.values.windows(2).all(|p| p[1] >= p[0]));
        prop_assert_eq!(precision.values.len(), 51);
    }

    #[test]
    fn perfect_overlap_auc_is_nearly_one(len in 1usize..50, samples in 2usize..300) {
        let curve = success_curve(&vec![1.0; len], samples).unwrap();
        prop_assert!(curve.summary >= (samples - 1) as f64 / samples as f64 - 1e-12);
        prop_assert_eq!(*curve.values.last().unwrap(), 0.0);
    }
}

#[test]
fn shrinkage_matches_grid_minimiser() {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..200 {
        let v: f64 = rng.random_range(-3.0..3.0);
        let lambda: f64 = rng.random_range(0.0..2.0);
        let c = soft_shrink(&ComplexCellRep::dense(vec![v]), lambda).unwrap().values()[0];
        // coarse scan, then refine around the best cell
        let (mut lo, mut hi) = (-4.0, 4.0);
        let mut best = 0.0;
        for _ in 0..6 {
            let step = (hi - lo) / 1000.0;
            best = (0..=1000)
                .map(|k| lo + k as f64 * step)
                .min_by(|a, b| objective(*a, v, lambda).total_cmp(&objective(*b, v, lambda)))
                .unwrap();
            lo = best - 2.0 * step;
            hi = best + 2.0 * step;
        }
        assert!((c - best).abs() < 1e-6, "v={v} lambda={lambda}: {c} vs {best}");
    }
}
