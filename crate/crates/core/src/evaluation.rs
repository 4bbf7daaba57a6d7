//! Monte Carlo cross-validation, confusion matrices and paired t-tests.
//!
//! All randomness is derived from `(master_seed, run index)`, so runs can be
//! executed in any order or in parallel and still produce the same report.
//! Every variant sees the same split in a given run, which is what makes the
//! per-run accuracies pairable.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::classifier::{self, Model, TrainConfig};
use crate::error::{Error, Result};
use crate::features::{assemble, FeatureVector, ModelVariant, Normalizer};
use crate::stats;

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub class_names: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(class_names: Vec<String>) -> Self {
        let k = class_names.len();
        ConfusionMatrix {
            class_names,
            counts: vec![vec![0; k]; k],
        }
    }

    pub fn from_counts(class_names: Vec<String>, counts: Vec<Vec<u64>>) -> Result<Self> {
        let k = class_names.len();
        if counts.len() != k || counts.iter().any(|r| r.len() != k) {
            return Err(Error::Validation(format!("confusion matrix must be {k}x{k}")));
        }
        Ok(ConfusionMatrix { class_names, counts })
    }

    pub fn record(&mut self, truth: usize, predicted: usize) {
        self.counts[truth][predicted] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.counts.len()).map(|i| self.counts[i][i]).sum()
    }

    pub fn row_sums(&self) -> Vec<u64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    /// Misclassifications between `a` and `b` in both directions.
    pub fn mutual_confusion(&self, a: usize, b: usize) -> u64 {
        self.counts[a][b] + self.counts[b][a]
    }
}

/// Fraction of correctly classified samples.
pub fn accuracy(cm: &ConfusionMatrix) -> Result<f64> {
    match cm.total() {
        0 => Err(Error::Validation("accuracy of an empty confusion matrix".into())),
        n => Ok(cm.trace() as f64 / n as f64),
    }
}

const SPLIT_STREAM: u64 = 0x5350_4c49_5400_0000;
const TRAIN_STREAM: u64 = 0x5452_4149_4e00_0000;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for one `(master, run, stream)` triple.
pub fn derive_seed(master: u64, run: u64, stream: u64) -> u64 {
    splitmix64(splitmix64(master ^ stream).wrapping_add(run))
}

/// Uniform train/test split without replacement. Train size is
/// `round(train_fraction * n)`; both index lists come back sorted.
pub fn mccv_split(
    n: usize,
    train_fraction: f64,
    seed: u64,
    run: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::config("mccv.train_fraction", "must lie in (0, 1)"));
    }
    let n_train = (train_fraction * n as f64).round() as usize;
    if n < 2 || n_train == 0 || n_train == n {
        return Err(Error::Validation(format!(
            "split of {n} samples at {train_fraction} leaves an empty side"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, run, SPLIT_STREAM));
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng);
    let mut train = idx[..n_train].to_vec();
    let mut test = idx[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
#[serde(deny_unknown_fields)]
pub struct MccvConfig {
    pub runs: usize,
    pub train_fraction: f64,
    pub master_seed: u64,
    pub alpha: f64,
}

impl Default for MccvConfig {
    fn default() -> Self {
        MccvConfig {
            runs: 20,
            train_fraction: 0.7,
            master_seed: 42,
            alpha: 0.01,
        }
    }
}

impl MccvConfig {
    pub fn validate(&self) -> Result<()> {
        if self.runs < 2 {
            return Err(Error::config("mccv.runs", "must be >= 2"));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::config("mccv.train_fraction", "must lie in (0, 1)"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::config("mccv.alpha", "must lie in (0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MccvReport {
    pub variant: ModelVariant,
    pub master_seed: u64,
    pub train_fraction: f64,
    pub accuracies: Vec<f64>,
    pub confusion: Vec<ConfusionMatrix>,
    pub mean: f64,
    pub std: f64,
    pub final_train_loss: Vec<f64>,
}

impl MccvReport {
    /// Index of the most accurate run (earliest on ties).
    pub fn best_run(&self) -> usize {
        classifier::argmax(&self.accuracies)
    }
}

/// Labelled samples as `(assembled vector, label)`, checking labels.
fn labelled(
    rows: &[FeatureVector],
    variant: ModelVariant,
    classes: usize,
) -> Result<Vec<(Vec<f64>, usize)>> {
    rows.iter()
        .map(|fv| match fv.label {
            Some(l) if l < classes => Ok((assemble(fv, variant), l)),
            Some(l) => Err(Error::Validation(format!(
                "organism {}: label {l} out of range for {classes} classes",
                fv.organism_id
            ))),
            None => Err(Error::Validation(format!(
                "organism {} has no label",
                fv.organism_id
            ))),
        })
        .collect()
}

/// Fits the normalizer on `train`, trains, and wraps everything in a [`Model`].
pub fn fit_model(
    train: &[(Vec<f64>, usize)],
    variant: ModelVariant,
    wavelengths_nm: &[f64],
    class_names: &[String],
    cfg: &TrainConfig,
) -> Result<(Model, f64)> {
    let raw: Vec<Vec<f64>> = train.iter().map(|(x, _)| x.clone()).collect();
    let normalizer = Normalizer::fit(&raw)?;
    let scaled: Vec<(Vec<f64>, usize)> = train
        .iter()
        .map(|(x, y)| (normalizer.apply(x), *y))
        .collect();
    let out = classifier::train(
        &scaled,
        variant,
        wavelengths_nm.len(),
        class_names.len(),
        cfg,
    )?;
    Ok((
        Model {
            variant,
            network: out.network,
            normalizer,
            feature_order: variant.feature_order(wavelengths_nm),
            class_names: class_names.to_vec(),
        },
        out.final_loss,
    ))
}

struct RunResult {
    accuracy: f64,
    confusion: ConfusionMatrix,
    loss: f64,
}

fn one_run(
    data: &[(Vec<f64>, usize)],
    variant: ModelVariant,
    wavelengths_nm: &[f64],
    class_names: &[String],
    train_cfg: &TrainConfig,
    mccv: &MccvConfig,
    run: usize,
) -> Result<RunResult> {
    let (train_idx, test_idx) = mccv_split(data.len(), mccv.train_fraction, mccv.master_seed, run as u64)?;
    let train: Vec<_> = train_idx.iter().map(|&i| data[i].clone()).collect();
    let cfg = TrainConfig {
        seed: derive_seed(mccv.master_seed, run as u64, TRAIN_STREAM),
        ..train_cfg.clone()
    };
    let (model, loss) = fit_model(&train, variant, wavelengths_nm, class_names, &cfg)?;
    let mut cm = ConfusionMatrix::new(class_names.to_vec());
    for &i in &test_idx {
        let (x, y) = &data[i];
        cm.record(*y, model.predict(x)?);
    }
    Ok(RunResult {
        accuracy: accuracy(&cm)?,
        confusion: cm,
        loss,
    })
}

/// Repeated random 70/30 (by default) evaluation of one feature variant.
pub fn run_mccv(
    rows: &[FeatureVector],
    wavelengths_nm: &[f64],
    class_names: &[String],
    variant: ModelVariant,
    train_cfg: &TrainConfig,
    mccv: &MccvConfig,
) -> Result<MccvReport> {
    mccv.validate()?;
    train_cfg.validate()?;
    let data = labelled(rows, variant, class_names.len())?;
    let mut present = vec![false; class_names.len()];
    data.iter().for_each(|(_, y)| present[*y] = true);
    if present.iter().filter(|&&p| p).count() < 2 {
        return Err(Error::Validation("MCCV needs at least 2 classes in the data".into()));
    }
    let workers = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
        .min(mccv.runs);
    let results: Vec<Result<RunResult>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let data = &data;
                s.spawn(move || {
                    (w..mccv.runs)
                        .step_by(workers)
                        .map(|run| {
                            (
                                run,
                                one_run(data, variant, wavelengths_nm, class_names, train_cfg, mccv, run),
                            )
                        })
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        let mut all: Vec<(usize, Result<RunResult>)> = handles
            .into_iter()
            .flat_map(|h| h.join().expect("MCCV worker panicked"))
            .collect();
        all.sort_by_key(|(run, _)| *run);
        all.into_iter().map(|(_, r)| r).collect()
    });
    let mut accuracies = Vec::with_capacity(mccv.runs);
    let mut confusion = Vec::with_capacity(mccv.runs);
    let mut losses = Vec::with_capacity(mccv.runs);
    for r in results {
        let r = r?;
        accuracies.push(r.accuracy);
        confusion.push(r.confusion);
        losses.push(r.loss);
    }
    Ok(MccvReport {
        variant,
        master_seed: mccv.master_seed,
        train_fraction: mccv.train_fraction,
        mean: stats::mean(&accuracies),
        std: stats::sample_std(&accuracies),
        accuracies,
        confusion,
        final_train_loss: losses,
    })
}

mod float_or_string {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            v.serialize(s)
        } else if *v > 0.0 {
            "inf".serialize(s)
        } else {
            "-inf".serialize(s)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) if t == "inf" => Ok(f64::INFINITY),
            Repr::Text(t) if t == "-inf" => Ok(f64::NEG_INFINITY),
            Repr::Text(t) => Err(serde::de::Error::custom(format!("bad number {t:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    /// Infinite when the differences have zero spread but nonzero mean.
    #[serde(with = "float_or_string")]
    pub t: f64,
    pub df: usize,
    pub p_value: f64,
    pub alpha: f64,
    pub reject: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degenerate: Option<String>,
}

/// Two-sided paired t-test on `a - b`.
///
/// Degenerate inputs follow fixed conventions: identical lists give
/// `p = 1` (no rejection); constant nonzero differences give an infinite `t`
/// with `p = 0` (rejection).
pub fn paired_t_test(a: &[f64], b: &[f64], alpha: f64) -> Result<TTestResult> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(Error::Validation(format!(
            "paired t-test needs equal lengths >= 2, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = d.len() as f64;
    let df = d.len() - 1;
    let m = stats::mean(&d);
    let sd = stats::sample_std(&d);
    let (t, p, degenerate) = if sd == 0.0 {
        if m == 0.0 {
            (0.0, 1.0, Some("no difference: p := 1".to_string()))
        } else {
            (
                f64::INFINITY.copysign(m),
                0.0,
                Some("zero-variance differences: t infinite, p := 0".to_string()),
            )
        }
    } else {
        let t = m / (sd / n.sqrt());
        (t, stats::student_t_two_sided_p(t, df as f64), None)
    };
    Ok(TTestResult {
        t,
        df,
        p_value: p,
        alpha,
        reject: p < alpha,
        degenerate,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedComparison {
    pub a: ModelVariant,
    pub b: ModelVariant,
    pub result: TTestResult,
}

/// All pairs `(i, j)`, `i < j`, in report order.
pub fn pairwise_tests(reports: &[MccvReport], alpha: f64) -> Result<Vec<PairedComparison>> {
    let mut out = Vec::new();
    for i in 0..reports.len() {
        for j in i + 1..reports.len() {
            out.push(PairedComparison {
                a: reports[i].variant,
                b: reports[j].variant,
                result: paired_t_test(&reports[i].accuracies, &reports[j].accuracies, alpha)?,
            });
        }
    }
    Ok(out)
}

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Machine-readable evaluation output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub schema_version: u32,
    pub runs: usize,
    pub train_fraction: f64,
    pub master_seed: u64,
    pub class_names: Vec<String>,
    pub samples: usize,
    pub variants: Vec<MccvReport>,
    #[serde(default)]
    pub ttests: Vec<PairedComparison>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
}

pub fn build_report(
    reports: Vec<MccvReport>,
    ttests: Vec<PairedComparison>,
    class_names: &[String],
    samples: usize,
    mccv: &MccvConfig,
) -> EvaluationReport {
    EvaluationReport {
        schema_version: REPORT_SCHEMA_VERSION,
        runs: mccv.runs,
        train_fraction: mccv.train_fraction,
        master_seed: mccv.master_seed,
        class_names: class_names.to_vec(),
        samples,
        variants: reports,
        ttests,
        config_hash: None,
        config: None,
    }
}

fn pct(v: f64) -> String {
    format!("{:.1}%", 100.0 * v)
}

/// Human-readable summary: accuracy table, pairwise tests (when present)
/// and the best-run confusion matrix of every variant.
pub fn render_text(report: &EvaluationReport) -> String {
    let mut s = String::new();
    let train_pct = (report.train_fraction * 100.0).round() as i64;
    let _ = writeln!(
        s,
        "Monte Carlo cross-validation: {} runs, {}/{} train/test split, {} samples, master seed {}",
        report.runs,
        train_pct,
        100 - train_pct,
        report.samples,
        report.master_seed
    );
    if let Some(h) = &report.config_hash {
        let _ = writeln!(s, "config_hash: {h}");
    }
    let _ = writeln!(s);
    let _ = writeln!(s, "Identification accuracy on test data (mean ± sample std)");
    for r in &report.variants {
        let _ = writeln!(
            s,
            "  {:<36} {:>6} ± {}",
            r.variant.display_name(),
            pct(r.mean),
            pct(r.std)
        );
    }
    if !report.ttests.is_empty() {
        let _ = writeln!(s);
        let _ = writeln!(s, "Paired-sample t-tests");
        for c in &report.ttests {
            let _ = writeln!(
                s,
                "  {:>8} vs {:<8} reject at alpha={}: {:<3}  p = {:.2e}  t = {:.4}  df = {}",
                c.a.cli_name(),
                c.b.cli_name(),
                c.result.alpha,
                if c.result.reject { "yes" } else { "no" },
                c.result.p_value,
                c.result.t,
                c.result.df
            );
        }
    }
    for r in &report.variants {
        let best = r.best_run();
        let cm = &r.confusion[best];
        let _ = writeln!(s);
        let _ = writeln!(
            s,
            "Best run for {} (run {}, accuracy {})",
            r.variant.display_name(),
            best,
            pct(r.accuracies[best])
        );
        let width = cm.class_names.iter().map(|n| n.len()).max().unwrap_or(4).max(6);
        let _ = write!(s, "  {:>width$} |", "true");
        for n in &cm.class_names {
            let _ = write!(s, " {n:>width$}");
        }
        let _ = writeln!(s);
        for (name, row) in cm.class_names.iter().zip(&cm.counts) {
            let _ = write!(s, "  {name:>width$} |");
            for c in row {
                let _ = write!(s, " {c:>width$}");
            }
            let _ = writeln!(s);
        }
    }
    s
}
