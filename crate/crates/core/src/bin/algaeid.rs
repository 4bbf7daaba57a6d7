//! `algaeid`: stage-per-subcommand driver for the identification pipeline.
//!
//! Exit codes: 0 success, 1 validation error, 2 I/O error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use algae_core::classifier::Model;
use algae_core::evaluation::{self, render_text};
use algae_core::features::{self, assemble, FeatureVector, ModelVariant};
use algae_core::illumination;
use algae_core::pipeline::{self, PipelineConfig};
use algae_core::segmentation::{self, LabelMap, OrganismsFile, OrganismRecord};
use algae_core::stack_io::{self, ImageStack, RoleTag, MANIFEST_FILE};
use algae_core::synthgen::GroundTruth;
use algae_core::{Error, Result};

const TRUTH_LABELS: &str = "truth_labels.pgm";
const GROUND_TRUTH: &str = "ground_truth.json";
const LABELS: &str = "labels.pgm";
const ORGANISMS: &str = "organisms.json";

#[derive(Parser)]
#[command(name = "algaeid", version, about = "Multi-band fluorescence algae identification")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args)]
struct Common {
    /// JSON pipeline configuration; missing fields take defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed (synthetic scenes, MCCV splits, training).
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Render synthetic scenes with ground truth.
    Synth {
        /// Synthetic corpus spec (JSON, same shape as the config's `synth`).
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Number of scenes (overrides the config).
        #[arg(long)]
        scenes: Option<usize>,
    },
    /// Estimate and subtract the illumination background.
    Correct {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write the background stacks under <out>/background.
        #[arg(long)]
        save_background: bool,
    },
    /// Threshold, fuse, label and extract organisms.
    Segment {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute the per-organism feature table.
    Features {
        /// Corrected stack (or a directory of corrected stacks).
        #[arg(long)]
        input: PathBuf,
        /// Output of `segment` for the same stacks.
        #[arg(long)]
        segmentation: PathBuf,
        /// Output of `synth`, used to attach ground-truth labels.
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one model on a feature table.
    Train {
        #[arg(long)]
        features: PathBuf,
        #[arg(long, value_parser = parse_variant)]
        variant: ModelVariant,
        #[arg(long)]
        out: PathBuf,
    },
    /// Monte Carlo cross-validation of one or more variants.
    Mccv {
        #[arg(long)]
        features: PathBuf,
        /// Repeatable; defaults to all three variants.
        #[arg(long, value_parser = parse_variant)]
        variant: Vec<ModelVariant>,
        #[arg(long)]
        runs: Option<usize>,
        /// Output directory for report.json and report.txt.
        #[arg(long)]
        out: PathBuf,
    },
    /// Predict classes with a trained model.
    Classify {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, conflicts_with = "stack", required_unless_present = "stack")]
        features: Option<PathBuf>,
        /// Raw or corrected stack to segment and classify.
        #[arg(long)]
        stack: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_variant(s: &str) -> std::result::Result<ModelVariant, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn in_file(path: &Path, e: Error) -> Error {
    match e {
        Error::InvalidConfig { .. } | Error::Validation(_) => {
            Error::Validation(format!("{}: {e}", path.display()))
        }
        other => other,
    }
}

fn load_config(common: &Common) -> Result<PipelineConfig> {
    let mut cfg = match &common.config {
        Some(p) => PipelineConfig::load(p).map_err(|e| in_file(p, e))?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.synth.seed = seed;
        cfg.mccv.master_seed = seed;
        cfg.train.seed = seed;
    }
    cfg.validate().map_err(|e| match &common.config {
        Some(p) => in_file(p, e),
        None => e,
    })?;
    Ok(cfg)
}

/// `root` itself when it holds a manifest, otherwise its child stack
/// directories in name order. Returned names are relative to `root`.
fn stack_dirs(root: &Path) -> Result<Vec<(String, PathBuf)>> {
    if root.join(MANIFEST_FILE).is_file() {
        return Ok(vec![(String::new(), root.to_path_buf())]);
    }
    let entries = std::fs::read_dir(root).map_err(|e| Error::Io {
        path: root.to_path_buf(),
        source: e,
    })?;
    let mut dirs: Vec<(String, PathBuf)> = entries
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.join(MANIFEST_FILE).is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), p))
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        return Err(Error::Validation(format!(
            "{}: no {MANIFEST_FILE} here or in any subdirectory",
            root.display()
        )));
    }
    Ok(dirs)
}

fn sub(root: &Path, name: &str) -> PathBuf {
    if name.is_empty() {
        root.to_path_buf()
    } else {
        root.join(name)
    }
}

#[derive(Serialize)]
struct Sidecar<'a> {
    config_hash: &'a str,
    rows: usize,
}

fn write_sidecar(path: &Path, hash: &str, rows: usize) -> Result<()> {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".meta.json");
    stack_io::write_json(
        &path.with_file_name(name),
        &Sidecar {
            config_hash: hash,
            rows,
        },
    )
}

fn cmd_synth(cfg: &PipelineConfig, out: &Path, scenes: Option<usize>) -> Result<()> {
    let mut synth = cfg.synth.clone();
    if let Some(n) = scenes {
        synth.scenes = n;
    }
    let hash = cfg.hash();
    let class_names = cfg.class_names();
    let corpus = pipeline::generate_corpus(&synth)?;
    for (i, scene) in corpus.iter().enumerate() {
        let dir = out.join(pipeline::scene_name(i));
        stack_io::save_stack(&scene.stack, &dir, Some(&hash))?;
        scene.truth.save_pgm(&dir.join(TRUTH_LABELS), Some(&hash))?;
        stack_io::write_json(
            &dir.join(GROUND_TRUTH),
            &GroundTruth {
                class_names: class_names.clone(),
                organisms: scene.organisms.clone(),
                config_hash: Some(hash.clone()),
            },
        )?;
    }
    let planted: usize = corpus.iter().map(|s| s.organisms.len()).sum();
    println!("wrote {} scenes ({planted} organisms) to {}", corpus.len(), out.display());
    Ok(())
}

fn cmd_correct(cfg: &PipelineConfig, input: &Path, out: &Path, save_bg: bool) -> Result<()> {
    let hash = cfg.hash();
    for (name, dir) in stack_dirs(input)? {
        let raw = stack_io::load_stack(&dir)?;
        let bg = illumination::estimate_background(&raw, &cfg.correction)?;
        let corrected = illumination::subtract_background(&raw, &bg, cfg.correction.clamp_negative)?;
        stack_io::save_stack(&corrected, &sub(out, &name), Some(&hash))?;
        if save_bg {
            stack_io::save_stack(&bg, &sub(&out.join("background"), &name), Some(&hash))?;
        }
    }
    Ok(())
}

fn cmd_segment(cfg: &PipelineConfig, input: &Path, out: &Path) -> Result<()> {
    let hash = cfg.hash();
    let mut total = 0;
    for (name, dir) in stack_dirs(input)? {
        let stack = stack_io::load_stack(&dir)?;
        let seg = segmentation::segment_stack(&stack, &cfg.segmentation)?;
        let dest = sub(out, &name);
        seg.labels.save_pgm(&dest.join(LABELS), Some(&hash))?;
        stack_io::write_json(
            &dest.join(ORGANISMS),
            &OrganismsFile {
                width: stack.width(),
                height: stack.height(),
                thresholds: seg.thresholds.clone(),
                organisms: seg.organisms.iter().map(OrganismRecord::from).collect(),
                config_hash: Some(hash.clone()),
            },
        )?;
        total += seg.organisms.len();
    }
    println!("segmented {total} organisms");
    Ok(())
}

/// Rebuilds organisms from a label image and the ids listed in the JSON.
fn organisms_from_files(
    labels: &LabelMap,
    file: &OrganismsFile,
    stack: &ImageStack,
) -> Result<Vec<segmentation::Organism>> {
    let all = segmentation::extract_organisms(labels, stack, 0)?;
    let wanted: std::collections::BTreeSet<u32> = file.organisms.iter().map(|o| o.id).collect();
    Ok(all.into_iter().filter(|o| wanted.contains(&o.id)).collect())
}

fn cmd_features(
    cfg: &PipelineConfig,
    input: &Path,
    seg_root: &Path,
    truth_root: Option<&Path>,
    out: &Path,
) -> Result<()> {
    let hash = cfg.hash();
    let mut rows: Vec<FeatureVector> = Vec::new();
    let mut wavelengths: Option<Vec<f64>> = None;
    for (name, dir) in stack_dirs(input)? {
        let stack = stack_io::load_stack(&dir)?;
        if stack.role() != RoleTag::Corrected {
            log::warn!("{}: stack is tagged {:?}, not corrected", dir.display(), stack.role());
        }
        match &wavelengths {
            None => wavelengths = Some(stack.wavelengths_nm().to_vec()),
            Some(w) if w.as_slice() != stack.wavelengths_nm() => {
                return Err(Error::Validation(format!(
                    "{}: wavelengths differ from earlier stacks",
                    dir.display()
                )))
            }
            _ => {}
        }
        let seg_dir = sub(seg_root, &name);
        let labels = LabelMap::load_pgm(&seg_dir.join(LABELS))?;
        let file: OrganismsFile = stack_io::read_json(&seg_dir.join(ORGANISMS))?;
        let organisms = organisms_from_files(&labels, &file, &stack)?;
        let truth = match truth_root {
            Some(t) => {
                let tdir = sub(t, &name);
                let map = LabelMap::load_pgm(&tdir.join(TRUTH_LABELS))?;
                let gt: GroundTruth = stack_io::read_json(&tdir.join(GROUND_TRUTH))?;
                Some((map, gt.organisms))
            }
            None => None,
        };
        rows.extend(pipeline::features_for_organisms(
            &organisms,
            &stack,
            cfg,
            &name,
            truth.as_ref().map(|(m, p)| (m, p.as_slice())),
        )?);
    }
    let wavelengths = wavelengths.unwrap_or_default();
    features::save_features_csv(out, &wavelengths, &rows)?;
    write_sidecar(out, &hash, rows.len())?;
    println!("wrote {} feature rows to {}", rows.len(), out.display());
    Ok(())
}

fn labelled_rows(rows: &[FeatureVector], variant: ModelVariant) -> Vec<(Vec<f64>, usize)> {
    rows.iter()
        .filter_map(|fv| fv.label.map(|l| (assemble(fv, variant), l)))
        .collect()
}

fn cmd_train(cfg: &PipelineConfig, features_path: &Path, variant: ModelVariant, out: &Path) -> Result<()> {
    let (wavelengths, rows) = features::load_features_csv(features_path)?;
    let data = labelled_rows(&rows, variant);
    if data.is_empty() {
        return Err(Error::Validation(format!(
            "{}: no labelled rows to train on",
            features_path.display()
        )));
    }
    let (model, loss) =
        evaluation::fit_model(&data, variant, &wavelengths, &cfg.class_names(), &cfg.train)?;
    model.save(out, Some(cfg.hash()))?;
    println!("trained {variant} on {} samples, final loss {loss:.4}", data.len());
    Ok(())
}

fn cmd_mccv(
    cfg: &PipelineConfig,
    features_path: &Path,
    variants: &[ModelVariant],
    runs: Option<usize>,
    out: &Path,
) -> Result<()> {
    let mut cfg = cfg.clone();
    if let Some(r) = runs {
        cfg.mccv.runs = r;
    }
    cfg.validate()?;
    let variants = if variants.is_empty() {
        ModelVariant::ALL.to_vec()
    } else {
        variants.to_vec()
    };
    let (wavelengths, rows) = features::load_features_csv(features_path)?;
    let report = pipeline::evaluate(&rows, &wavelengths, &variants, &cfg)?;
    let text = render_text(&report);
    stack_io::write_atomic(&out.join("report.json"), pipeline::report_json(&report).as_bytes())?;
    stack_io::write_atomic(&out.join("report.txt"), text.as_bytes())?;
    print!("{text}");
    Ok(())
}

#[derive(Serialize)]
struct Prediction<'a> {
    organism_id: &'a str,
    label: Option<usize>,
    predicted: usize,
    predicted_name: &'a str,
    probability: f64,
}

fn cmd_classify(
    cfg: &PipelineConfig,
    model_path: &Path,
    features_path: Option<&Path>,
    stack_path: Option<&Path>,
    out: &Path,
) -> Result<()> {
    let model = Model::load(model_path)?;
    let rows = match (features_path, stack_path) {
        (Some(f), _) => features::load_features_csv(f)?.1,
        (None, Some(s)) => {
            let mut rows = Vec::new();
            for (name, dir) in stack_dirs(s)? {
                let stack = stack_io::load_stack(&dir)?;
                let corrected = match stack.role() {
                    RoleTag::Raw => illumination::correct_stack(&stack, &cfg.correction)?,
                    RoleTag::Corrected => stack,
                    RoleTag::Background => {
                        return Err(Error::Validation(format!(
                            "{}: cannot classify a background stack",
                            dir.display()
                        )))
                    }
                };
                rows.extend(pipeline::features_for_corrected(&corrected, cfg, &name, None)?);
            }
            rows
        }
        (None, None) => return Err(Error::Validation("need --features or --stack".into())),
    };
    let mut buf = Vec::new();
    {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(&mut buf);
        for fv in &rows {
            let probs = model.probabilities(&assemble(fv, model.variant))?;
            let predicted = algae_core::classifier::argmax(&probs);
            w.serialize(Prediction {
                organism_id: &fv.organism_id,
                label: fv.label,
                predicted,
                predicted_name: &model.class_names[predicted],
                probability: probs[predicted],
            })
            .map_err(|e| Error::Validation(format!("csv write: {e}")))?;
        }
        w.flush().map_err(|e| Error::io(out, e))?;
    }
    stack_io::write_atomic(out, &buf)?;
    write_sidecar(out, &cfg.hash(), rows.len())?;
    println!("classified {} organisms", rows.len());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let cfg = load_config(&cli.common)?;
    match cli.cmd {
        Command::Synth { spec, out, scenes } => {
            let mut cfg = cfg;
            if let Some(p) = spec {
                cfg.synth = stack_io::read_json(&p)?;
                if let Some(seed) = cli.common.seed {
                    cfg.synth.seed = seed;
                }
                cfg.validate().map_err(|e| in_file(&p, e))?;
            }
            cmd_synth(&cfg, &out, scenes)
        }
        Command::Correct {
            input,
            out,
            save_background,
        } => cmd_correct(&cfg, &input, &out, save_background),
        Command::Segment { input, out } => cmd_segment(&cfg, &input, &out),
        Command::Features {
            input,
            segmentation,
            truth,
            out,
        } => cmd_features(&cfg, &input, &segmentation, truth.as_deref(), &out),
        Command::Train {
            features,
            variant,
            out,
        } => cmd_train(&cfg, &features, variant, &out),
        Command::Mccv {
            features,
            variant,
            runs,
            out,
        } => cmd_mccv(&cfg, &features, &variant, runs, &out),
        Command::Classify {
            model,
            features,
            stack,
            out,
        } => cmd_classify(&cfg, &model, features.as_deref(), stack.as_deref(), &out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_io() { 2 } else { 1 })
        }
    }
}
