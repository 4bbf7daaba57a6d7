use std::collections::BTreeMap;

use algae_core::illumination::correct_stack;
use algae_core::pipeline::{generate_corpus, PipelineConfig};
use algae_core::segmentation::segment_stack;
use algae_core::synthgen::{default_catalog, generate_scene, SceneSpec};

fn rank_order(v: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    idx
}

#[test]
fn noiseless_disk_is_recovered_exactly() {
    for seed in 0..5 {
        let spec = SceneSpec {
            width: 96,
            height: 96,
            organism_count: 1,
            species_mix: Some(vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0]),
            vignette_strength: 0.0,
            noise_sigma: 0.0,
            seed,
            ..SceneSpec::default()
        };
        let scene = generate_scene(&spec, &default_catalog()).unwrap();
        let cfg = PipelineConfig::default();
        let corrected = correct_stack(&scene.stack, &cfg.correction).unwrap();
        let seg = segment_stack(&corrected, &cfg.segmentation).unwrap();
        assert_eq!(seg.organisms.len(), 1, "seed {seed}");
        let planted = &scene.organisms[0];
        assert_eq!(seg.organisms[0].area(), planted.pixel_count, "seed {seed}");
        let truth_id = scene.truth.get(seg.organisms[0].pixels[0].0, seg.organisms[0].pixels[0].1);
        assert!(seg.organisms[0].pixels.iter().all(|&(x, y)| scene.truth.get(x, y) == truth_id));
    }
}

/// Extracted spectral means keep the planted per-band ordering, and the
/// species mix follows the catalog abundances.
#[test]
fn extracted_spectra_follow_planted_signatures() {
    let cfg = PipelineConfig::default();
    let corpus = generate_corpus(&cfg.synth).unwrap();
    let (mut matched, mut preserved, mut planted_total) = (0usize, 0usize, 0usize);
    let mut per_species = BTreeMap::<usize, usize>::new();
    for scene in &corpus {
        planted_total += scene.organisms.len();
        for o in &scene.organisms {
            *per_species.entry(o.class_id).or_default() += 1;
        }
        let corrected = correct_stack(&scene.stack, &cfg.correction).unwrap();
        let seg = segment_stack(&corrected, &cfg.segmentation).unwrap();
        for org in &seg.organisms {
            let mut votes = BTreeMap::<u32, usize>::new();
            for &(x, y) in &org.pixels {
                *votes.entry(scene.truth.get(x, y)).or_default() += 1;
            }
            let Some((&id, _)) = votes.iter().filter(|(&id, _)| id != 0).max_by_key(|(_, &n)| n) else {
                continue;
            };
            let planted = scene.organisms.iter().find(|p| p.id == id).unwrap();
            let means = algae_core::features::spectral_means(org, &corrected).unwrap();
            matched += 1;
            preserved += (rank_order(&means) == rank_order(&planted.signature)) as usize;
        }
    }
    assert!(planted_total >= 600);
    assert!(matched >= 600);
    let frac = preserved as f64 / matched as f64;
    assert!(frac >= 0.95, "rank order preserved for {preserved}/{matched}");

    let rare = *per_species.get(&5).unwrap_or(&0) as f64;
    let p = 131.0 / 2611.0;
    let expected = p * planted_total as f64;
    let sd = (planted_total as f64 * p * (1.0 - p)).sqrt();
    assert!((rare - expected).abs() <= 4.0 * sd, "rarest species {rare}, expected {expected:.1}");
}
