//! End-to-end orchestration shared by the CLI and the acceptance tests.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::classifier::TrainConfig;
use crate::error::{Error, Result};
use crate::evaluation::{self, EvaluationReport, MccvConfig};
use crate::features::{self, FeatureVector, ModelVariant};
use crate::illumination::{self, CorrectionConfig};
use crate::segmentation::{self, LabelMap, Organism, SegmentationConfig};
use crate::stack_io::{self, ImageStack};
use crate::synthgen::{self, PlantedOrganism, Scene, SceneSpec, SpeciesSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
#[serde(deny_unknown_fields)]
pub struct FeatureOptions {
    /// Share of an extracted organism's pixels that must fall on a single
    /// planted organism before the planted label is attached.
    pub min_truth_overlap: f64,
}

impl Default for FeatureOptions {
    fn default() -> Self {
        FeatureOptions {
            min_truth_overlap: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub scenes: usize,
    pub seed: u64,
    pub scene: SceneSpec,
    /// Falls back to [`synthgen::default_catalog`] when absent.
    pub catalog: Option<Vec<SpeciesSpec>>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            scenes: 25,
            seed: 42,
            scene: SceneSpec::default(),
            catalog: None,
        }
    }
}

impl SynthConfig {
    pub fn catalog(&self) -> Vec<SpeciesSpec> {
        self.catalog.clone().unwrap_or_else(synthgen::default_catalog)
    }
}

/// Every knob of the pipeline in one serializable document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub correction: CorrectionConfig,
    pub segmentation: SegmentationConfig,
    pub features: FeatureOptions,
    pub train: TrainConfig,
    pub mccv: MccvConfig,
    pub synth: SynthConfig,
    /// Class names in label order; defaults to the synthetic catalog names.
    pub class_names: Option<Vec<String>>,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let cfg: PipelineConfig = stack_io::read_json(path)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: PipelineConfig =
            serde_json::from_str(text).map_err(|e| Error::Validation(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.correction.validate()?;
        self.segmentation.validate()?;
        self.train.validate()?;
        self.mccv.validate()?;
        self.synth.scene.validate(&self.synth.catalog())?;
        if !(0.0..=1.0).contains(&self.features.min_truth_overlap) {
            return Err(Error::config("features.min_truth_overlap", "must lie in [0, 1]"));
        }
        if let Some(n) = &self.class_names {
            if n.len() < 2 {
                return Err(Error::config("class_names", "need at least 2 classes"));
            }
        }
        Ok(())
    }

    pub fn class_names(&self) -> Vec<String> {
        self.class_names
            .clone()
            .unwrap_or_else(|| self.synth.catalog().into_iter().map(|s| s.name).collect())
    }

    /// Short SHA-256 digest of the canonical JSON form.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))[..16].to_string()
    }
}

const SCENE_STREAM: u64 = 0x5343_454e_4500_0000;

pub fn scene_name(i: usize) -> String {
    format!("scene_{i:03}")
}

/// Scene specs for the configured corpus, each with its own derived seed.
pub fn corpus_specs(cfg: &SynthConfig) -> Vec<SceneSpec> {
    (0..cfg.scenes)
        .map(|i| SceneSpec {
            seed: evaluation::derive_seed(cfg.seed, i as u64, SCENE_STREAM),
            ..cfg.scene.clone()
        })
        .collect()
}

pub fn generate_corpus(cfg: &SynthConfig) -> Result<Vec<Scene>> {
    let catalog = cfg.catalog();
    let specs = corpus_specs(cfg);
    std::thread::scope(|s| {
        let handles: Vec<_> = specs
            .iter()
            .map(|spec| {
                let catalog = &catalog;
                s.spawn(move || synthgen::generate_scene(spec, catalog))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("scene worker panicked"))
            .collect()
    })
}

/// Planted label for an extracted organism, by majority overlap.
pub fn truth_label(
    org: &Organism,
    truth: &LabelMap,
    planted: &[PlantedOrganism],
    min_overlap: f64,
) -> Option<usize> {
    let mut counts = std::collections::BTreeMap::<u32, usize>::new();
    for &(x, y) in &org.pixels {
        let id = truth.get(x, y);
        if id != 0 {
            *counts.entry(id).or_default() += 1;
        }
    }
    let (&id, &n) = counts.iter().max_by_key(|(&id, &n)| (n, std::cmp::Reverse(id)))?;
    if (n as f64) < min_overlap * org.pixels.len() as f64 {
        return None;
    }
    planted.iter().find(|p| p.id == id).map(|p| p.class_id)
}

/// Correction, segmentation and feature extraction for one raw stack.
pub fn features_for_stack(
    raw: &ImageStack,
    cfg: &PipelineConfig,
    prefix: &str,
    truth: Option<(&LabelMap, &[PlantedOrganism])>,
) -> Result<Vec<FeatureVector>> {
    let corrected = illumination::correct_stack(raw, &cfg.correction)?;
    features_for_corrected(&corrected, cfg, prefix, truth)
}

pub fn features_for_corrected(
    corrected: &ImageStack,
    cfg: &PipelineConfig,
    prefix: &str,
    truth: Option<(&LabelMap, &[PlantedOrganism])>,
) -> Result<Vec<FeatureVector>> {
    let seg = segmentation::segment_stack(corrected, &cfg.segmentation)?;
    features_for_organisms(&seg.organisms, corrected, cfg, prefix, truth)
}

pub fn organism_key(prefix: &str, id: u32) -> String {
    if prefix.is_empty() {
        id.to_string()
    } else {
        format!("{prefix}/{id}")
    }
}

pub fn features_for_organisms(
    organisms: &[Organism],
    corrected: &ImageStack,
    cfg: &PipelineConfig,
    prefix: &str,
    truth: Option<(&LabelMap, &[PlantedOrganism])>,
) -> Result<Vec<FeatureVector>> {
    organisms
        .iter()
        .map(|org| {
            let label = truth.and_then(|(map, planted)| {
                truth_label(org, map, planted, cfg.features.min_truth_overlap)
            });
            features::extract_features(org, corrected, organism_key(prefix, org.id), label)
        })
        .collect()
}

/// Synthetic corpus straight to labelled feature rows, all in memory.
pub fn corpus_features(cfg: &PipelineConfig) -> Result<(Vec<f64>, Vec<FeatureVector>)> {
    let scenes = generate_corpus(&cfg.synth)?;
    let per_scene: Vec<Result<Vec<FeatureVector>>> = std::thread::scope(|s| {
        let handles: Vec<_> = scenes
            .iter()
            .enumerate()
            .map(|(i, scene)| {
                s.spawn(move || {
                    features_for_stack(
                        &scene.stack,
                        cfg,
                        &scene_name(i),
                        Some((&scene.truth, &scene.organisms)),
                    )
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("feature worker panicked"))
            .collect()
    });
    let mut rows = Vec::new();
    for r in per_scene {
        rows.extend(r?);
    }
    Ok((cfg.synth.scene.wavelengths_nm.clone(), rows))
}

/// MCCV for each variant plus all pairwise t-tests, stamped with the config.
pub fn evaluate(
    rows: &[FeatureVector],
    wavelengths_nm: &[f64],
    variants: &[ModelVariant],
    cfg: &PipelineConfig,
) -> Result<EvaluationReport> {
    let labelled: Vec<FeatureVector> = rows.iter().filter(|r| r.label.is_some()).cloned().collect();
    if labelled.len() < rows.len() {
        log::info!("skipping {} unlabelled organisms", rows.len() - labelled.len());
    }
    let class_names = cfg.class_names();
    let reports = variants
        .iter()
        .map(|&v| evaluation::run_mccv(&labelled, wavelengths_nm, &class_names, v, &cfg.train, &cfg.mccv))
        .collect::<Result<Vec<_>>>()?;
    let ttests = evaluation::pairwise_tests(&reports, cfg.mccv.alpha)?;
    let mut report = evaluation::build_report(reports, ttests, &class_names, labelled.len(), &cfg.mccv);
    report.config_hash = Some(cfg.hash());
    report.config = Some(serde_json::to_value(cfg).expect("config serializes"));
    Ok(report)
}

pub fn report_json(report: &EvaluationReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}
