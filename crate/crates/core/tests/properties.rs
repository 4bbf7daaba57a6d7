mod common;

use proptest::prelude::*;

use algae_core::classifier::softmax;
use algae_core::evaluation::{mccv_split, paired_t_test};
use algae_core::features::{self, Normalizer};
use algae_core::illumination::{gaussian_lowpass, morphological_opening};
use algae_core::segmentation::{
    binarize, connected_components, histogram, otsu_bin, otsu_threshold, BinaryMask, Organism,
};
use algae_core::stack_io::{load_stack, save_stack, ImageStack, RoleTag};
use algae_core::Raster;

fn raster(max_side: usize, max_val: f64) -> impl Strategy<Value = Raster> {
    (1..=max_side, 1..=max_side).prop_flat_map(move |(w, h)| {
        prop::collection::vec(0.0..=max_val, w * h).prop_map(move |d| Raster::new(w, h, d))
    })
}

fn mask(max_side: usize) -> impl Strategy<Value = BinaryMask> {
    (1..=max_side, 1..=max_side).prop_flat_map(|(w, h)| {
        prop::collection::vec(any::<bool>(), w * h)
            .prop_map(move |fg| BinaryMask::from_fn(w, h, |x, y| fg[y * w + x]))
    })
}

fn pixel_set() -> impl Strategy<Value = Vec<(usize, usize)>> {
    prop::collection::btree_set((0usize..9, 0usize..9), 1..20).prop_map(|s| s.into_iter().collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn stack_round_trip(
        w in 1usize..20,
        h in 1usize..20,
        bands in 1usize..4,
        seed in any::<u64>(),
    ) {
        let mut s = seed;
        let mut next = || { s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407); (s >> 48) as f64 };
        let rasters: Vec<Raster> = (0..bands).map(|_| Raster::from_fn(w, h, |_, _| next())).collect();
        let wl: Vec<f64> = (0..bands).map(|i| 400.0 + 17.5 * i as f64).collect();
        let stack = ImageStack::new(rasters, wl, 0.8, RoleTag::Raw).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_stack(&stack, dir.path(), None).unwrap();
        prop_assert_eq!(load_stack(dir.path()).unwrap(), stack);
    }

    #[test]
    fn opening_is_anti_extensive_and_idempotent(band in raster(24, 1000.0), r in 1usize..5) {
        let once = morphological_opening(&band, r);
        prop_assert!(once.data().iter().zip(band.data()).all(|(o, f)| o <= f));
        prop_assert_eq!(morphological_opening(&once, r), once);
    }

    #[test]
    fn lowpass_preserves_constants(w in 1usize..30, h in 1usize..30, c in 0.0f64..1e4, sigma in 0.5f64..6.0) {
        let out = gaussian_lowpass(&Raster::filled(w, h, c), sigma);
        prop_assert!(out.data().iter().all(|v| (v - c).abs() <= 1e-9 * c.max(1.0)));
    }

    #[test]
    fn otsu_matches_exhaustive(hist in prop::collection::vec(0u64..50, 2..64)) {
        prop_assert_eq!(otsu_bin(&hist), common::otsu_exhaustive(&hist));
    }

    #[test]
    fn threshold_splits_at_the_chosen_bin(band in raster(16, 500.0)) {
        let (lo, hi) = band.range();
        prop_assume!(hi > lo);
        let t = otsu_threshold(&band, 256).unwrap();
        let (hist, _, _) = histogram(&band, 256);
        let background: u64 = hist[..=t.bin].iter().sum();
        let m = binarize(&band, t.value);
        prop_assert_eq!(m.count() as u64, band.data().len() as u64 - background);
    }

    #[test]
    fn labeling_matches_flood_fill(m in mask(24)) {
        let got = connected_components(&m);
        let (want, count) = common::flood_fill_labels(&m.foreground, m.width, m.height);
        prop_assert_eq!(got.count, count);
        prop_assert!(common::same_partition(&got.labels, &want));
    }

    #[test]
    fn convex_area_matches_brute_force(px in pixel_set()) {
        let pts: Vec<(i64, i64)> = px.iter().map(|&(x, y)| (x as i64, y as i64)).collect();
        let org = Organism::from_pixels(1, px);
        prop_assert_eq!(features::convex_area(&org), common::hull_lattice_count(&pts) as f64);
    }

    #[test]
    fn shape_features_are_bounded_and_translation_invariant(px in pixel_set(), dx in 0usize..50, dy in 0usize..50) {
        let org = Organism::from_pixels(1, px.clone());
        let m = features::morphology(&org);
        prop_assert!(m.convex_area >= m.area);
        prop_assert!(m.extent > 0.0 && m.extent <= 1.0);
        prop_assert!((0.0..1.0).contains(&m.eccentricity));
        let moved = Organism::from_pixels(1, px.iter().map(|&(x, y)| (x + dx, y + dy)).collect());
        let n = features::morphology(&moved);
        prop_assert_eq!(m.area, n.area);
        prop_assert_eq!(m.convex_area, n.convex_area);
        prop_assert_eq!(m.extent, n.extent);
        prop_assert!((m.eccentricity - n.eccentricity).abs() < 1e-9);
    }

    #[test]
    fn softmax_is_a_distribution(z in prop::collection::vec(-1e4f64..1e4, 1..12)) {
        let p = softmax(&z);
        prop_assert!(p.iter().all(|v| v.is_finite() && *v >= 0.0 && *v <= 1.0));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn normalized_training_data_is_centred(rows in prop::collection::vec(prop::collection::vec(-1e3f64..1e3, 3), 2..30)) {
        let n = Normalizer::fit(&rows).unwrap();
        for d in 0..3 {
            let col: Vec<f64> = rows.iter().map(|r| n.apply(r)[d]).collect();
            let mean = col.iter().sum::<f64>() / col.len() as f64;
            prop_assert!(mean.abs() < 1e-9);
        }
    }

    #[test]
    fn split_partitions_indices(n in 4usize..500, frac in 0.2f64..0.8, seed in any::<u64>(), run in 0u64..20) {
        let (train, test) = mccv_split(n, frac, seed, run).unwrap();
        prop_assert_eq!(train.len(), (frac * n as f64).round() as usize);
        let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        prop_assert_eq!(mccv_split(n, frac, seed, run).unwrap(), (train, test));
    }

    #[test]
    fn paired_test_is_antisymmetric(a in prop::collection::vec(0.0f64..1.0, 3..20), shift in -0.2f64..0.2) {
        let b: Vec<f64> = a.iter().enumerate().map(|(i, v)| v + shift + 0.01 * (i % 3) as f64).collect();
        let ab = paired_t_test(&a, &b, 0.01).unwrap();
        let ba = paired_t_test(&b, &a, 0.01).unwrap();
        prop_assert!((ab.t + ba.t).abs() <= 1e-9 * ab.t.abs().max(1.0));
        prop_assert!((ab.p_value - ba.p_value).abs() <= 1e-12);
        prop_assert!((0.0..=1.0).contains(&ab.p_value));
    }
}
