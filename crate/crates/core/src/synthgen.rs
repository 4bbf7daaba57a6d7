//! Synthetic multi-band fluorescence scenes with ground truth.
//!
//! Organisms are rasterized from a handful of shape families, placed without
//! overlap, painted with a per-species emission signature and rendered under
//! a radial vignette plus Gaussian read noise. Intensities are rounded to
//! integers and clipped to the 16-bit range so an in-memory scene and its
//! saved copy are identical.
//!
//! The default catalog mirrors six freshwater algae cultures: three green
//! algae, two filamentous cyanobacteria and one euglenoid. Signatures are
//! invented numbers with phylum-level structure, not measurements.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::Raster;
use crate::segmentation::{connected_components, BinaryMask, LabelMap};
use crate::stack_io::{ImageStack, RoleTag, DEFAULT_PIXEL_PITCH_UM, DEFAULT_WAVELENGTHS_NM};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShapeFamily {
    DiskColony,
    PairedCells,
    Filament,
    Spindle,
    FlagellateEllipse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeciesSpec {
    pub name: String,
    pub description: String,
    pub shape: ShapeFamily,
    /// Major extent in pixels (diameter, cell or filament length).
    pub size_range: (f64, f64),
    pub eccentricity_range: (f64, f64),
    /// Mean emitted intensity per band, ascending wavelength.
    pub signature: Vec<f64>,
    /// Half-width of the uniform per-organism brightness factor.
    pub jitter: f64,
    pub abundance: f64,
}

impl SpeciesSpec {
    pub fn validate(&self) -> Result<()> {
        let field = |f: &str| format!("species[{}].{f}", self.name);
        if self.signature.iter().any(|&s| !(s >= 0.0)) {
            return Err(Error::config(&field("signature"), "values must be >= 0"));
        }
        let (lo, hi) = self.size_range;
        if !(lo > 0.0 && hi >= lo) {
            return Err(Error::config(&field("size_range"), "must be positive and ordered"));
        }
        let (elo, ehi) = self.eccentricity_range;
        if !(0.0..1.0).contains(&elo) || !(elo..1.0).contains(&ehi) {
            return Err(Error::config(&field("eccentricity_range"), "must lie in [0, 1)"));
        }
        if !(self.jitter > 0.0 && self.jitter < 1.0) {
            return Err(Error::config(&field("jitter"), "must lie in (0, 1)"));
        }
        if !(self.abundance >= 0.0) {
            return Err(Error::config(&field("abundance"), "must be >= 0"));
        }
        Ok(())
    }
}

fn species(
    name: &str,
    description: &str,
    shape: ShapeFamily,
    size_range: (f64, f64),
    eccentricity_range: (f64, f64),
    signature: [f64; 6],
    abundance: f64,
) -> SpeciesSpec {
    SpeciesSpec {
        name: name.to_string(),
        description: description.to_string(),
        shape,
        size_range,
        eccentricity_range,
        signature: signature.to_vec(),
        jitter: 0.15,
        abundance,
    }
}

/// Six stand-in species; abundances follow culture sample counts
/// 751:382:500:548:299:131.
pub fn default_catalog() -> Vec<SpeciesSpec> {
    use ShapeFamily::*;
    vec![
        species(
            "CPCC005",
            "Scenedesmus obliquus (Chlorophyta)",
            DiskColony,
            (11.0, 19.0),
            (0.0, 0.6),
            [900.0, 1000.0, 950.0, 780.0, 480.0, 400.0],
            751.0,
        ),
        species(
            "CPCC158",
            "Scenedesmus quadricauda (Chlorophyta)",
            PairedCells,
            (10.0, 15.0),
            (0.75, 0.85),
            [1000.0, 880.0, 1000.0, 680.0, 430.0, 420.0],
            382.0,
        ),
        species(
            "CPCC366",
            "Ankistrodesmus falcatus (Chlorophyta)",
            Spindle,
            (22.0, 34.0),
            (0.95, 0.98),
            [780.0, 940.0, 820.0, 900.0, 560.0, 450.0],
            500.0,
        ),
        species(
            "CPCC067",
            "Anabaena flos-aquae (Cyanophyta)",
            Filament,
            (30.0, 46.0),
            (0.985, 0.99),
            [430.0, 480.0, 600.0, 700.0, 1000.0, 880.0],
            548.0,
        ),
        species(
            "CPCC471",
            "Pseudanabaena tremula (Cyanophyta)",
            Filament,
            (31.0, 48.0),
            (0.985, 0.99),
            [500.0, 430.0, 480.0, 820.0, 880.0, 1000.0],
            299.0,
        ),
        species(
            "CPCC095",
            "Euglena gracilis (Euglenozoa)",
            FlagellateEllipse,
            (18.0, 26.0),
            (0.75, 0.88),
            [650.0, 800.0, 1000.0, 950.0, 700.0, 520.0],
            131.0,
        ),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    pub organism_count: usize,
    /// Optional per-species weights overriding catalog abundances.
    pub species_mix: Option<Vec<f64>>,
    pub background_level: f64,
    /// Fractional intensity loss at the image corners (radial quadratic).
    pub vignette_strength: f64,
    pub noise_sigma: f64,
    pub seed: u64,
    pub wavelengths_nm: Vec<f64>,
}

impl Default for SceneSpec {
    fn default() -> Self {
        SceneSpec {
            width: 256,
            height: 256,
            organism_count: 24,
            species_mix: None,
            background_level: 200.0,
            vignette_strength: 0.3,
            noise_sigma: 6.0,
            seed: 0,
            wavelengths_nm: DEFAULT_WAVELENGTHS_NM.to_vec(),
        }
    }
}

impl SceneSpec {
    pub fn validate(&self, catalog: &[SpeciesSpec]) -> Result<()> {
        if self.width < 8 || self.height < 8 {
            return Err(Error::config("scene.width/height", "must be >= 8"));
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(Error::config("scene.noise_sigma", "must be >= 0"));
        }
        if !(0.0..1.0).contains(&self.vignette_strength) {
            return Err(Error::config("scene.vignette_strength", "must lie in [0, 1)"));
        }
        if !(self.background_level >= 0.0) {
            return Err(Error::config("scene.background_level", "must be >= 0"));
        }
        if catalog.is_empty() {
            return Err(Error::config("catalog", "needs at least one species"));
        }
        for s in catalog {
            s.validate()?;
            if s.signature.len() != self.wavelengths_nm.len() {
                return Err(Error::config(
                    &format!("species[{}].signature", s.name),
                    format!("has {} values for {} bands", s.signature.len(), self.wavelengths_nm.len()),
                ));
            }
        }
        if let Some(mix) = &self.species_mix {
            if mix.len() != catalog.len() || mix.iter().any(|&w| !(w >= 0.0)) {
                return Err(Error::config("scene.species_mix", "one non-negative weight per species"));
            }
        }
        Ok(())
    }
}

/// Ground-truth record for one planted organism.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedOrganism {
    pub id: u32,
    pub species: String,
    pub class_id: usize,
    pub pixel_count: usize,
    /// Emission painted into each band, before vignetting and noise.
    pub signature: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Scene {
    pub stack: ImageStack,
    pub truth: LabelMap,
    pub organisms: Vec<PlantedOrganism>,
}

/// Ground-truth JSON written next to a synthetic stack.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub class_names: Vec<String>,
    pub organisms: Vec<PlantedOrganism>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

/// Offsets `(dx, dy)` of one rasterized organism around its anchor.
type Footprint = Vec<(i64, i64)>;

fn rasterize(radius: f64, inside: impl Fn(f64, f64) -> bool) -> Footprint {
    let r = radius.ceil() as i64 + 1;
    let mut pts = Vec::new();
    for dy in -r..=r {
        for dx in -r..=r {
            if inside(dx as f64, dy as f64) {
                pts.push((dx, dy));
            }
        }
    }
    pts
}

/// Rotates image offsets into shape coordinates `(u, v)` with `v` the long axis.
fn to_local(x: f64, y: f64, angle: f64) -> (f64, f64) {
    let (s, c) = angle.sin_cos();
    (x * c + y * s, -x * s + y * c)
}

fn footprint<R: Rng>(spec: &SpeciesSpec, rng: &mut R) -> Footprint {
    let (lo, hi) = spec.size_range;
    let size = if hi > lo { rng.random_range(lo..=hi) } else { lo };
    let (elo, ehi) = spec.eccentricity_range;
    let e = if ehi > elo { rng.random_range(elo..=ehi) } else { elo };
    let aspect = (1.0 - e * e).sqrt();
    let angle = rng.random_range(0.0..std::f64::consts::PI);
    match spec.shape {
        ShapeFamily::DiskColony | ShapeFamily::FlagellateEllipse => {
            let a = size / 2.0;
            let b = a * aspect;
            rasterize(a, |x, y| {
                let (u, v) = to_local(x, y, angle);
                (u / b).powi(2) + (v / a).powi(2) <= 1.0
            })
        }
        ShapeFamily::PairedCells => {
            let cells = if rng.random_bool(0.5) { 2 } else { 4 };
            let a = size / 2.0;
            let b = a * aspect;
            let pitch = 1.9 * b;
            let half_span = pitch * (cells - 1) as f64 / 2.0 + b;
            rasterize(a.max(half_span), |x, y| {
                let (u, v) = to_local(x, y, angle);
                (0..cells).any(|i| {
                    let cu = (i as f64 - (cells - 1) as f64 / 2.0) * pitch;
                    ((u - cu) / b).powi(2) + (v / a).powi(2) <= 1.0
                })
            })
        }
        ShapeFamily::Spindle => {
            let half_len = size / 2.0;
            let half_w = half_len * aspect;
            rasterize(half_len, |x, y| {
                let (u, v) = to_local(x, y, angle);
                let t = v / half_len;
                t.abs() <= 1.0 && u.abs() <= half_w * (1.0 - t * t) + 0.5
            })
        }
        ShapeFamily::Filament => {
            let thickness = (size * aspect).max(2.0);
            let steps = size.round() as usize;
            let wobble = Normal::new(0.0, 0.06).expect("finite sigma");
            let mut heading = angle;
            let mut p = (0.0f64, 0.0f64);
            let mut centre = vec![p];
            for _ in 1..steps {
                heading += wobble.sample(rng);
                p = (p.0 + heading.cos(), p.1 + heading.sin());
                centre.push(p);
            }
            let mid = centre[steps / 2];
            let r2 = (thickness / 2.0).powi(2);
            let reach = centre
                .iter()
                .map(|c| ((c.0 - mid.0).powi(2) + (c.1 - mid.1).powi(2)).sqrt())
                .fold(0.0, f64::max)
                + thickness;
            rasterize(reach, |x, y| {
                centre
                    .iter()
                    .any(|c| (x - (c.0 - mid.0)).powi(2) + (y - (c.1 - mid.1)).powi(2) <= r2)
            })
        }
    }
}

/// Keeps only the largest 8-connected piece so every organism is one blob.
fn largest_piece(fp: Footprint) -> Footprint {
    if fp.is_empty() {
        return fp;
    }
    let min_x = fp.iter().map(|p| p.0).min().unwrap();
    let min_y = fp.iter().map(|p| p.1).min().unwrap();
    let w = (fp.iter().map(|p| p.0).max().unwrap() - min_x + 1) as usize;
    let h = (fp.iter().map(|p| p.1).max().unwrap() - min_y + 1) as usize;
    let mut mask = BinaryMask::background(w, h);
    for &(x, y) in &fp {
        mask.foreground[(y - min_y) as usize * w + (x - min_x) as usize] = true;
    }
    let labels = connected_components(&mask);
    if labels.count <= 1 {
        return fp;
    }
    let sizes = labels.sizes();
    let keep = (1..sizes.len()).max_by_key(|&i| (sizes[i], std::cmp::Reverse(i))).unwrap() as u32;
    fp.into_iter()
        .filter(|&(x, y)| labels.get((x - min_x) as usize, (y - min_y) as usize) == keep)
        .collect()
}

const MARGIN: i64 = 3;
const GAP: i64 = 2;
const PLACEMENT_RETRIES: usize = 200;

/// Renders one scene. Organisms keep at least two background pixels between
/// each other and three from the image border.
pub fn generate_scene(spec: &SceneSpec, catalog: &[SpeciesSpec]) -> Result<Scene> {
    spec.validate(catalog)?;
    let (w, h) = (spec.width, spec.height);
    let bands = spec.wavelengths_nm.len();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let weights: Vec<f64> = match &spec.species_mix {
        Some(mix) => mix.clone(),
        None => catalog.iter().map(|s| s.abundance).collect(),
    };
    let picker = WeightedIndex::new(&weights)
        .map_err(|e| Error::config("species weights", e.to_string()))?;

    let mut occupied = vec![false; w * h];
    let mut truth = vec![0u32; w * h];
    let mut emission: Vec<Vec<f64>> = vec![vec![0.0; w * h]; bands];
    let mut planted = Vec::with_capacity(spec.organism_count);

    for n in 0..spec.organism_count {
        let class_id = picker.sample(&mut rng);
        let sp = &catalog[class_id];
        let mut placed = None;
        for _ in 0..PLACEMENT_RETRIES {
            let fp = largest_piece(footprint(sp, &mut rng));
            let (min_x, max_x) = fp.iter().fold((i64::MAX, i64::MIN), |a, p| (a.0.min(p.0), a.1.max(p.0)));
            let (min_y, max_y) = fp.iter().fold((i64::MAX, i64::MIN), |a, p| (a.0.min(p.1), a.1.max(p.1)));
            let (x_lo, x_hi) = (MARGIN - min_x, w as i64 - 1 - MARGIN - max_x);
            let (y_lo, y_hi) = (MARGIN - min_y, h as i64 - 1 - MARGIN - max_y);
            if x_lo > x_hi || y_lo > y_hi {
                continue;
            }
            let cx = rng.random_range(x_lo..=x_hi);
            let cy = rng.random_range(y_lo..=y_hi);
            let clear = fp.iter().all(|&(dx, dy)| {
                let (x, y) = (cx + dx, cy + dy);
                (-GAP..=GAP).all(|oy| {
                    (-GAP..=GAP).all(|ox| {
                        let (px, py) = (x + ox, y + oy);
                        px < 0 || py < 0 || px >= w as i64 || py >= h as i64
                            || !occupied[py as usize * w + px as usize]
                    })
                })
            });
            if clear {
                placed = Some((fp, cx, cy));
                break;
            }
        }
        let (fp, cx, cy) = placed.ok_or_else(|| {
            Error::Validation(format!(
                "could not place organism {} of {} after {PLACEMENT_RETRIES} attempts; scene too dense",
                n + 1,
                spec.organism_count
            ))
        })?;
        let id = n as u32 + 1;
        let scale = rng.random_range(1.0 - sp.jitter..=1.0 + sp.jitter);
        let band_jitter = sp.jitter / 4.0;
        let signature: Vec<f64> = sp
            .signature
            .iter()
            .map(|s| s * scale * rng.random_range(1.0 - band_jitter..=1.0 + band_jitter))
            .collect();
        for &(dx, dy) in &fp {
            let i = (cy + dy) as usize * w + (cx + dx) as usize;
            occupied[i] = true;
            truth[i] = id;
            for (b, sig) in signature.iter().enumerate() {
                emission[b][i] = *sig;
            }
        }
        planted.push(PlantedOrganism {
            id,
            species: sp.name.clone(),
            class_id,
            pixel_count: fp.len(),
            signature,
        });
    }

    let noise = if spec.noise_sigma > 0.0 {
        Some(Normal::new(0.0, spec.noise_sigma).map_err(|e| Error::config("scene.noise_sigma", e.to_string()))?)
    } else {
        None
    };
    let (mx, my) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    let r_max2 = mx * mx + my * my;
    let vignette: Vec<f64> = (0..w * h)
        .map(|i| {
            let (x, y) = ((i % w) as f64, (i / w) as f64);
            let r2 = (x - mx).powi(2) + (y - my).powi(2);
            1.0 - spec.vignette_strength * if r_max2 > 0.0 { r2 / r_max2 } else { 0.0 }
        })
        .collect();
    let mut rasters = Vec::with_capacity(bands);
    for em in &emission {
        let data = em
            .iter()
            .zip(&vignette)
            .map(|(&e, &v)| {
                let mut val = (spec.background_level + e) * v;
                if let Some(n) = &noise {
                    val += n.sample(&mut rng);
                }
                val.round().clamp(0.0, 65535.0)
            })
            .collect();
        rasters.push(Raster::new(w, h, data));
    }
    let stack = ImageStack::new(rasters, spec.wavelengths_nm.clone(), DEFAULT_PIXEL_PITCH_UM, RoleTag::Raw)?;
    let truth = LabelMap {
        width: w,
        height: h,
        labels: truth,
        count: planted.len() as u32,
    };
    Ok(Scene {
        stack,
        truth,
        organisms: planted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_spec(seed: u64) -> SceneSpec {
        SceneSpec {
            width: 128,
            height: 128,
            organism_count: 8,
            seed,
            ..SceneSpec::default()
        }
    }

    #[test]
    fn catalog_shape() {
        let cat = default_catalog();
        assert_eq!(cat.len(), 6);
        cat.iter().for_each(|s| s.validate().unwrap());
        let (a, b) = (&cat[3], &cat[4]);
        assert_eq!(a.shape, ShapeFamily::Filament);
        assert_eq!(b.shape, ShapeFamily::Filament);
        let rel = |x: f64, y: f64| (x - y).abs() / x.max(y);
        assert!(rel(a.size_range.0, b.size_range.0) < 0.1);
        assert!(rel(a.size_range.1, b.size_range.1) < 0.1);
        assert!(rel(a.eccentricity_range.0, b.eccentricity_range.0) < 0.1);
        assert!(rel(a.eccentricity_range.1, b.eccentricity_range.1) < 0.1);
        assert_ne!(a.signature, b.signature);
        let weights: Vec<f64> = cat.iter().map(|s| s.abundance).collect();
        assert_eq!(weights, vec![751.0, 382.0, 500.0, 548.0, 299.0, 131.0]);
    }

    #[test]
    fn deterministic_per_seed() {
        let a = generate_scene(&small_spec(3), &default_catalog()).unwrap();
        let b = generate_scene(&small_spec(3), &default_catalog()).unwrap();
        assert_eq!(a.stack, b.stack);
        assert_eq!(a.truth, b.truth);
        assert_eq!(a.organisms, b.organisms);
        let c = generate_scene(&small_spec(4), &default_catalog()).unwrap();
        assert_ne!(a.stack, c.stack);
    }

    #[test]
    fn truth_components_match_planted() {
        for seed in 0..4 {
            let s = generate_scene(&small_spec(seed), &default_catalog()).unwrap();
            let mask = BinaryMask {
                width: 128,
                height: 128,
                foreground: s.truth.labels.iter().map(|&l| l != 0).collect(),
                threshold: None,
            };
            assert_eq!(connected_components(&mask).count as usize, s.organisms.len());
            let sizes = s.truth.sizes();
            for o in &s.organisms {
                assert_eq!(sizes[o.id as usize], o.pixel_count);
            }
            assert!(s.stack.bands().iter().all(|b| b.data().iter().all(|&v| v >= 0.0)));
        }
    }

    #[test]
    fn overfull_scene_fails() {
        let spec = SceneSpec {
            width: 32,
            height: 32,
            organism_count: 50,
            ..SceneSpec::default()
        };
        assert!(generate_scene(&spec, &default_catalog()).is_err());
    }
}
