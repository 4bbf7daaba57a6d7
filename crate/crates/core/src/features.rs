//! Spectral-morphological descriptors of isolated organisms.
//!
//! Five shape measures (area, convex area, eccentricity, equivalent diameter,
//! extent) and one mean corrected intensity per excitation band. Vectors are
//! assembled in a fixed order per [`ModelVariant`] and z-scored with a
//! [`Normalizer`] fitted on training data only.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::segmentation::Organism;
use crate::stack_io::{self, ImageStack};

pub const MORPHOLOGICAL_NAMES: [&str; 5] = [
    "area",
    "convex_area",
    "eccentricity",
    "equivalent_diameter",
    "extent",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Morphology {
    pub area: f64,
    pub convex_area: f64,
    pub eccentricity: f64,
    pub equivalent_diameter: f64,
    pub extent: f64,
}

impl Morphology {
    pub fn to_array(&self) -> [f64; 5] {
        [
            self.area,
            self.convex_area,
            self.eccentricity,
            self.equivalent_diameter,
            self.extent,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub organism_id: String,
    pub label: Option<usize>,
    pub morphological: Morphology,
    /// Mean corrected intensity per band, ascending wavelength.
    pub spectral: Vec<f64>,
}

/// Which feature subset a classifier consumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelVariant {
    /// Model 1: five shape features.
    #[serde(rename = "morph")]
    Morphological,
    /// Model 2: one mean intensity per band.
    #[serde(rename = "spectral")]
    Spectral,
    /// Model 3: shape then spectral, eleven inputs.
    #[serde(rename = "both11")]
    SpectralMorphological,
}

impl ModelVariant {
    pub const ALL: [ModelVariant; 3] = [
        ModelVariant::Morphological,
        ModelVariant::Spectral,
        ModelVariant::SpectralMorphological,
    ];

    /// Input width for a stack with `bands` bands (6 in the reference setup).
    pub fn input_dim(self, bands: usize) -> usize {
        match self {
            ModelVariant::Morphological => 5,
            ModelVariant::Spectral => bands,
            ModelVariant::SpectralMorphological => 5 + bands,
        }
    }

    pub fn cli_name(self) -> &'static str {
        match self {
            ModelVariant::Morphological => "morph",
            ModelVariant::Spectral => "spectral",
            ModelVariant::SpectralMorphological => "both11",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            ModelVariant::Morphological => "Model 1 (morphological)",
            ModelVariant::Spectral => "Model 2 (spectral)",
            ModelVariant::SpectralMorphological => "Model 3 (spectral-morphological)",
        }
    }

    /// Column names in assembly order.
    pub fn feature_order(self, wavelengths_nm: &[f64]) -> Vec<String> {
        let morph = MORPHOLOGICAL_NAMES.iter().map(|s| s.to_string());
        let spec = wavelengths_nm.iter().map(|nm| spectral_column(*nm));
        match self {
            ModelVariant::Morphological => morph.collect(),
            ModelVariant::Spectral => spec.collect(),
            ModelVariant::SpectralMorphological => morph.chain(spec).collect(),
        }
    }
}

impl std::str::FromStr for ModelVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "morph" | "1" => Ok(ModelVariant::Morphological),
            "spectral" | "2" => Ok(ModelVariant::Spectral),
            "both11" | "3" => Ok(ModelVariant::SpectralMorphological),
            other => Err(Error::config(
                "variant",
                format!("unknown variant {other:?} (morph|spectral|both11)"),
            )),
        }
    }
}

impl std::fmt::Display for ModelVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.cli_name())
    }
}

pub fn spectral_column(nm: f64) -> String {
    format!("em{}", nm.round() as i64)
}

pub fn area(org: &Organism) -> f64 {
    org.pixels.len() as f64
}

fn cross(o: (i64, i64), a: (i64, i64), b: (i64, i64)) -> i64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Convex hull of lattice points (Andrew's monotone chain), counter-clockwise
/// without collinear vertices.
pub fn convex_hull(points: &[(i64, i64)]) -> Vec<(i64, i64)> {
    let mut pts = points.to_vec();
    pts.sort_unstable();
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<(i64, i64)> = Vec::with_capacity(2 * pts.len());
    for &p in &pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

/// Pixel centres inside or on the convex hull of the organism's pixel centres.
pub fn convex_area(org: &Organism) -> f64 {
    let pts: Vec<(i64, i64)> = org.pixels.iter().map(|&(x, y)| (x as i64, y as i64)).collect();
    let hull = convex_hull(&pts);
    match hull.len() {
        0 => 0.0,
        1 => 1.0,
        // all points collinear: lattice points on the segment
        2 => (gcd(hull[1].0 - hull[0].0, hull[1].1 - hull[0].1) + 1) as f64,
        n => {
            let b = org.bbox;
            let mut count = 0usize;
            for y in b.min_y as i64..=b.max_y as i64 {
                for x in b.min_x as i64..=b.max_x as i64 {
                    if (0..n).all(|i| cross(hull[i], hull[(i + 1) % n], (x, y)) >= 0) {
                        count += 1;
                    }
                }
            }
            count as f64
        }
    }
}

/// Coordinate covariance `(xx, xy, yy)` with each pixel treated as a unit
/// square, hence the extra 1/12 on the diagonal.
pub fn coordinate_covariance(pixels: &[(usize, usize)]) -> (f64, f64, f64) {
    let n = pixels.len() as f64;
    let (sx, sy) = pixels
        .iter()
        .fold((0.0, 0.0), |(a, b), &(x, y)| (a + x as f64, b + y as f64));
    let (mx, my) = (sx / n, sy / n);
    let (mut xx, mut xy, mut yy) = (0.0, 0.0, 0.0);
    for &(x, y) in pixels {
        let (dx, dy) = (x as f64 - mx, y as f64 - my);
        xx += dx * dx;
        xy += dx * dy;
        yy += dy * dy;
    }
    (xx / n + 1.0 / 12.0, xy / n, yy / n + 1.0 / 12.0)
}

/// Eccentricity of the ellipse with the same second moments.
pub fn eccentricity(org: &Organism) -> f64 {
    let (a, b, c) = coordinate_covariance(&org.pixels);
    let mid = 0.5 * (a + c);
    let rad = (0.25 * (a - c) * (a - c) + b * b).sqrt();
    let major = mid + rad;
    let minor = (mid - rad).max(0.0);
    (1.0 - minor / major).clamp(0.0, 1.0).sqrt()
}

pub fn equivalent_diameter(org: &Organism) -> f64 {
    (4.0 * area(org) / std::f64::consts::PI).sqrt()
}

pub fn extent(org: &Organism) -> f64 {
    area(org) / org.bbox.area() as f64
}

pub fn morphology(org: &Organism) -> Morphology {
    Morphology {
        area: area(org),
        convex_area: convex_area(org),
        eccentricity: eccentricity(org),
        equivalent_diameter: equivalent_diameter(org),
        extent: extent(org),
    }
}

/// Mean intensity over exactly the organism's pixels, one value per band.
pub fn spectral_means(org: &Organism, corrected: &ImageStack) -> Result<Vec<f64>> {
    if org
        .pixels
        .iter()
        .any(|&(x, y)| x >= corrected.width() || y >= corrected.height())
    {
        return Err(Error::Validation(format!(
            "organism {} lies outside the stack",
            org.id
        )));
    }
    let n = org.pixels.len() as f64;
    Ok(corrected
        .bands()
        .iter()
        .map(|band| org.pixels.iter().map(|&(x, y)| band.get(x, y)).sum::<f64>() / n)
        .collect())
}

pub fn extract_features(
    org: &Organism,
    corrected: &ImageStack,
    organism_id: String,
    label: Option<usize>,
) -> Result<FeatureVector> {
    Ok(FeatureVector {
        organism_id,
        label,
        morphological: morphology(org),
        spectral: spectral_means(org, corrected)?,
    })
}

/// Input vector for `variant`, in [`ModelVariant::feature_order`] order.
pub fn assemble(fv: &FeatureVector, variant: ModelVariant) -> Vec<f64> {
    let morph = fv.morphological.to_array();
    match variant {
        ModelVariant::Morphological => morph.to_vec(),
        ModelVariant::Spectral => fv.spectral.clone(),
        ModelVariant::SpectralMorphological => {
            morph.iter().chain(&fv.spectral).copied().collect()
        }
    }
}

/// Per-dimension z-score statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Dimensions with zero training variance; their std is forced to 1.
    pub constant: Vec<bool>,
}

impl Normalizer {
    pub fn fit(train: &[Vec<f64>]) -> Result<Self> {
        let first = train
            .first()
            .ok_or_else(|| Error::Validation("cannot fit a normalizer on no data".into()))?;
        let d = first.len();
        if train.iter().any(|v| v.len() != d) {
            return Err(Error::Validation("ragged training vectors".into()));
        }
        let n = train.len() as f64;
        let mut mean = vec![0.0; d];
        for v in train {
            for (m, x) in mean.iter_mut().zip(v) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for v in train {
            for ((s, x), m) in var.iter_mut().zip(v).zip(&mean) {
                *s += (x - m) * (x - m);
            }
        }
        let mut constant = vec![false; d];
        let std = var
            .iter()
            .zip(constant.iter_mut())
            .map(|(s, c)| {
                let sd = (s / n).sqrt();
                if sd > 0.0 {
                    sd
                } else {
                    *c = true;
                    1.0
                }
            })
            .collect();
        Ok(Normalizer {
            mean,
            std,
            constant,
        })
    }

    /// Identity transform of width `d`.
    pub fn identity(d: usize) -> Self {
        Normalizer {
            mean: vec![0.0; d],
            std: vec![1.0; d],
            constant: vec![false; d],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        v.iter()
            .zip(&self.mean)
            .zip(&self.std)
            .zip(&self.constant)
            .map(|(((x, m), s), &c)| if c { *x } else { (x - m) / s })
            .collect()
    }
}

pub fn feature_csv_header(wavelengths_nm: &[f64]) -> Vec<String> {
    let mut h = vec!["organism_id".to_string(), "label".to_string()];
    h.extend(MORPHOLOGICAL_NAMES.iter().map(|s| s.to_string()));
    h.extend(wavelengths_nm.iter().map(|nm| spectral_column(*nm)));
    h
}

/// Feature table: a header row then one row per organism, LF line endings.
pub fn write_features_csv<W: Write>(
    out: W,
    wavelengths_nm: &[f64],
    rows: &[FeatureVector],
) -> Result<()> {
    let to_err = |e: csv::Error| Error::Validation(format!("csv write: {e}"));
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(feature_csv_header(wavelengths_nm)).map_err(to_err)?;
    for fv in rows {
        if fv.spectral.len() != wavelengths_nm.len() {
            return Err(Error::Validation(format!(
                "organism {} has {} spectral values for {} bands",
                fv.organism_id,
                fv.spectral.len(),
                wavelengths_nm.len()
            )));
        }
        let mut rec = vec![
            fv.organism_id.clone(),
            fv.label.map(|l| l.to_string()).unwrap_or_default(),
        ];
        rec.extend(fv.morphological.to_array().iter().map(|v| v.to_string()));
        rec.extend(fv.spectral.iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(to_err)?;
    }
    w.flush().map_err(|e| Error::Validation(format!("csv write: {e}")))?;
    Ok(())
}

/// Parses a feature table, returning the band wavelengths from the header.
pub fn read_features_csv<R: Read>(input: R, source: &Path) -> Result<(Vec<f64>, Vec<FeatureVector>)> {
    let bad = |msg: String| Error::Decode {
        path: source.to_path_buf(),
        msg,
    };
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = r.headers().map_err(|e| bad(e.to_string()))?.clone();
    let fixed = ["organism_id", "label"]
        .iter()
        .chain(MORPHOLOGICAL_NAMES.iter());
    for (i, name) in fixed.enumerate() {
        if header.get(i) != Some(name) {
            return Err(bad(format!("header column {i} should be {name:?}")));
        }
    }
    let mut wavelengths = Vec::new();
    for col in header.iter().skip(7) {
        let nm = col
            .strip_prefix("em")
            .and_then(|s| s.parse::<f64>().ok())
            .ok_or_else(|| bad(format!("bad spectral column {col:?}")))?;
        wavelengths.push(nm);
    }
    let mut rows = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        if rec.len() != header.len() {
            return Err(bad(format!("row {} has {} fields", line + 1, rec.len())));
        }
        let num = |i: usize| -> Result<f64> {
            rec[i]
                .parse::<f64>()
                .map_err(|_| bad(format!("row {} column {}: not a number", line + 1, &header[i])))
        };
        let label = match &rec[1] {
            "" => None,
            s => Some(
                s.parse::<usize>()
                    .map_err(|_| bad(format!("row {}: bad label {s:?}", line + 1)))?,
            ),
        };
        let morphological = Morphology {
            area: num(2)?,
            convex_area: num(3)?,
            eccentricity: num(4)?,
            equivalent_diameter: num(5)?,
            extent: num(6)?,
        };
        let spectral = (7..rec.len()).map(num).collect::<Result<Vec<_>>>()?;
        rows.push(FeatureVector {
            organism_id: rec[0].to_string(),
            label,
            morphological,
            spectral,
        });
    }
    Ok((wavelengths, rows))
}

pub fn save_features_csv(path: &Path, wavelengths_nm: &[f64], rows: &[FeatureVector]) -> Result<()> {
    let mut buf = Vec::new();
    write_features_csv(&mut buf, wavelengths_nm, rows)?;
    stack_io::write_atomic(path, &buf)
}

pub fn load_features_csv(path: &Path) -> Result<(Vec<f64>, Vec<FeatureVector>)> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_features_csv(f, path)
}
