//! Foreground/background separation and organism isolation.
//!
//! Each corrected band is thresholded with Otsu's criterion, the per-band
//! masks are fused by union and the fused mask is labelled with
//! 8-connectivity. Every surviving component becomes one [`Organism`].

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::Raster;
use crate::stack_io::{self, ImageStack};

pub const DEFAULT_BINS: usize = 256;
pub const DEFAULT_MIN_AREA_PX: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum FusionRule {
    #[default]
    Union,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
#[serde(deny_unknown_fields)]
pub struct SegmentationConfig {
    pub num_bins: usize,
    pub min_area_px: usize,
    pub fusion: FusionRule,
}

impl Default for SegmentationConfig {
    fn default() -> Self {
        SegmentationConfig {
            num_bins: DEFAULT_BINS,
            min_area_px: DEFAULT_MIN_AREA_PX,
            fusion: FusionRule::Union,
        }
    }
}

impl SegmentationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_bins < 2 {
            return Err(Error::config("segmentation.num_bins", "must be >= 2"));
        }
        Ok(())
    }
}

/// Per-pixel foreground flags. `threshold` is set for masks produced by
/// [`binarize`] and absent for fused masks.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryMask {
    pub width: usize,
    pub height: usize,
    pub foreground: Vec<bool>,
    pub threshold: Option<f64>,
}

impl BinaryMask {
    pub fn background(width: usize, height: usize) -> Self {
        BinaryMask {
            width,
            height,
            foreground: vec![false; width * height],
            threshold: None,
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut m = BinaryMask::background(width, height);
        for y in 0..height {
            for x in 0..width {
                m.foreground[y * width + x] = f(x, y);
            }
        }
        m
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.foreground[y * self.width + x]
    }

    pub fn count(&self) -> usize {
        self.foreground.iter().filter(|&&f| f).count()
    }
}

/// Result of an Otsu search: the optimal background bin and the intensity
/// cut it corresponds to (pixels strictly above `value` are foreground).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OtsuThreshold {
    pub bin: usize,
    pub value: f64,
}

/// Bin index for histograms whose bins are left-open `(lo, hi]` intervals,
/// except bin 0 which also holds `min`. With this layout `v <= value` holds
/// exactly for the pixels Otsu assigned to the background class.
#[inline]
pub fn histogram_bin(v: f64, min: f64, width: f64, bins: usize) -> usize {
    let pos = ((v - min) / width).ceil() as isize - 1;
    pos.clamp(0, bins as isize - 1) as usize
}

pub fn histogram(band: &Raster, bins: usize) -> (Vec<u64>, f64, f64) {
    let (min, max) = band.range();
    let width = (max - min) / bins as f64;
    let mut hist = vec![0u64; bins];
    for &v in band.data() {
        hist[histogram_bin(v, min, width, bins)] += 1;
    }
    (hist, min, max)
}

/// Relative slack for treating two objective values as a tie.
const TIE_EPS: f64 = 1e-12;

/// Otsu on a histogram over bin indices. Returns the largest background bin
/// `t` (classes `0..=t` and `t+1..`) maximizing between-class variance, the
/// smallest such `t` on ties, or `None` when no split leaves both classes
/// non-empty.
pub fn otsu_bin(hist: &[u64]) -> Option<usize> {
    let total: f64 = hist.iter().map(|&c| c as f64).sum();
    let sum_all: f64 = hist.iter().enumerate().map(|(i, &c)| i as f64 * c as f64).sum();
    let mut w0 = 0.0;
    let mut s0 = 0.0;
    let mut best: Option<(usize, f64)> = None;
    for (t, &c) in hist.iter().enumerate().take(hist.len().saturating_sub(1)) {
        w0 += c as f64;
        s0 += t as f64 * c as f64;
        let w1 = total - w0;
        if w0 == 0.0 || w1 == 0.0 {
            continue;
        }
        let diff = s0 / w0 - (sum_all - s0) / w1;
        let between = w0 * w1 * diff * diff;
        match best {
            Some((_, b)) if between <= b + TIE_EPS * b.abs() => {}
            _ => best = Some((t, between)),
        }
    }
    best.map(|(t, _)| t)
}

/// Otsu threshold of a band over a `num_bins` histogram spanning its range.
pub fn otsu_threshold(band: &Raster, num_bins: usize) -> Result<OtsuThreshold> {
    if num_bins < 2 {
        return Err(Error::config("num_bins", "must be >= 2"));
    }
    let (hist, min, max) = histogram(band, num_bins);
    if !(max > min) {
        return Err(Error::DegenerateBand);
    }
    let bin = otsu_bin(&hist).ok_or(Error::DegenerateBand)?;
    let width = (max - min) / num_bins as f64;
    Ok(OtsuThreshold {
        bin,
        value: min + (bin + 1) as f64 * width,
    })
}

/// Foreground iff intensity is strictly greater than `theta`.
pub fn binarize(band: &Raster, theta: f64) -> BinaryMask {
    BinaryMask {
        width: band.width(),
        height: band.height(),
        foreground: band.data().iter().map(|&v| v > theta).collect(),
        threshold: Some(theta),
    }
}

/// Union of masks: a pixel is foreground if any input marks it.
pub fn fuse_masks(masks: &[BinaryMask]) -> Result<BinaryMask> {
    let first = masks
        .first()
        .ok_or_else(|| Error::Validation("fuse_masks needs at least one mask".into()))?;
    let mut out = BinaryMask::background(first.width, first.height);
    for (i, m) in masks.iter().enumerate() {
        if m.width != first.width || m.height != first.height {
            return Err(Error::DimensionMismatch {
                band: i,
                want_w: first.width,
                want_h: first.height,
                got_w: m.width,
                got_h: m.height,
            });
        }
        for (o, &f) in out.foreground.iter_mut().zip(&m.foreground) {
            *o |= f;
        }
    }
    Ok(out)
}

/// Component ids per pixel; 0 is background and ids run `1..=count`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    pub width: usize,
    pub height: usize,
    pub labels: Vec<u32>,
    pub count: u32,
}

impl LabelMap {
    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u32 {
        self.labels[y * self.width + x]
    }

    /// Pixel count per component, index 0 holding the background.
    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0usize; self.count as usize + 1];
        for &l in &self.labels {
            sizes[l as usize] += 1;
        }
        sizes
    }

    /// Exported as a 16-bit PGM whose intensity is the component id.
    pub fn to_raster(&self) -> Result<Raster> {
        if self.count > u16::MAX as u32 {
            return Err(Error::Validation(format!(
                "{} components do not fit a 16-bit label image",
                self.count
            )));
        }
        Ok(Raster::new(
            self.width,
            self.height,
            self.labels.iter().map(|&l| l as f64).collect(),
        ))
    }

    pub fn from_raster(r: &Raster) -> Result<Self> {
        let labels: Vec<u32> = r.data().iter().map(|&v| v as u32).collect();
        let count = labels.iter().copied().max().unwrap_or(0);
        let mut seen = vec![false; count as usize + 1];
        for &l in &labels {
            seen[l as usize] = true;
        }
        if seen.iter().skip(1).any(|s| !s) {
            return Err(Error::Validation("label ids are not contiguous".into()));
        }
        Ok(LabelMap {
            width: r.width(),
            height: r.height(),
            labels,
            count,
        })
    }

    pub fn save_pgm(&self, path: &Path, config_hash: Option<&str>) -> Result<()> {
        stack_io::write_pgm(path, &self.to_raster()?, config_hash)
    }

    pub fn load_pgm(path: &Path) -> Result<Self> {
        LabelMap::from_raster(&stack_io::read_pgm(path)?)
    }
}

fn find(parent: &mut [u32], mut x: u32) -> u32 {
    while parent[x as usize] != x {
        let up = parent[parent[x as usize] as usize];
        parent[x as usize] = up;
        x = up;
    }
    x
}

fn union(parent: &mut [u32], a: u32, b: u32) {
    let (ra, rb) = (find(parent, a), find(parent, b));
    if ra != rb {
        // keep the smaller provisional label as root
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        parent[hi as usize] = lo;
    }
}

/// 8-connected labelling. Ids follow raster-scan order of each component's
/// first pixel.
pub fn connected_components(mask: &BinaryMask) -> LabelMap {
    let (w, h) = (mask.width, mask.height);
    let mut prov = vec![0u32; w * h];
    let mut parent: Vec<u32> = vec![0];
    for y in 0..h {
        for x in 0..w {
            if !mask.get(x, y) {
                continue;
            }
            let mut label = 0u32;
            // already-visited neighbours: W, NW, N, NE
            let mut neigh = [0u32; 4];
            if x > 0 {
                neigh[0] = prov[y * w + x - 1];
            }
            if y > 0 {
                let up = (y - 1) * w;
                if x > 0 {
                    neigh[1] = prov[up + x - 1];
                }
                neigh[2] = prov[up + x];
                if x + 1 < w {
                    neigh[3] = prov[up + x + 1];
                }
            }
            for &n in neigh.iter().filter(|&&n| n != 0) {
                if label == 0 {
                    label = n;
                } else {
                    union(&mut parent, label, n);
                }
            }
            if label == 0 {
                label = parent.len() as u32;
                parent.push(label);
            }
            prov[y * w + x] = label;
        }
    }
    let mut remap = vec![0u32; parent.len()];
    let mut count = 0u32;
    let mut labels = vec![0u32; w * h];
    for (i, &p) in prov.iter().enumerate() {
        if p == 0 {
            continue;
        }
        let root = find(&mut parent, p) as usize;
        if remap[root] == 0 {
            count += 1;
            remap[root] = count;
        }
        labels[i] = remap[root];
    }
    LabelMap {
        width: w,
        height: h,
        labels,
        count,
    }
}

/// Inclusive pixel bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BBox {
    pub min_x: usize,
    pub min_y: usize,
    pub max_x: usize,
    pub max_y: usize,
}

impl BBox {
    pub fn width(&self) -> usize {
        self.max_x - self.min_x + 1
    }

    pub fn height(&self) -> usize {
        self.max_y - self.min_y + 1
    }

    pub fn area(&self) -> usize {
        self.width() * self.height()
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        (self.min_x..=self.max_x).contains(&x) && (self.min_y..=self.max_y).contains(&y)
    }
}

/// One isolated micro-organism.
#[derive(Debug, Clone, PartialEq)]
pub struct Organism {
    pub id: u32,
    /// Component pixels as `(x, y)`, in raster order.
    pub pixels: Vec<(usize, usize)>,
    pub bbox: BBox,
    pub touches_border: bool,
    /// Per-band crops of the corrected stack over `bbox`. Crops include
    /// pixels of neighbouring components; features only read `pixels`.
    pub patches: Vec<Raster>,
}

impl Organism {
    /// Builds an organism from a pixel set alone (no stack crops).
    pub fn from_pixels(id: u32, pixels: Vec<(usize, usize)>) -> Self {
        assert!(!pixels.is_empty(), "organism needs at least one pixel");
        let bbox = bbox_of(&pixels);
        Organism {
            id,
            pixels,
            bbox,
            touches_border: false,
            patches: Vec::new(),
        }
    }

    pub fn area(&self) -> usize {
        self.pixels.len()
    }
}

pub(crate) fn bbox_of(pixels: &[(usize, usize)]) -> BBox {
    let mut b = BBox {
        min_x: usize::MAX,
        min_y: usize::MAX,
        max_x: 0,
        max_y: 0,
    };
    for &(x, y) in pixels {
        b.min_x = b.min_x.min(x);
        b.min_y = b.min_y.min(y);
        b.max_x = b.max_x.max(x);
        b.max_y = b.max_y.max(y);
    }
    b
}

/// Organisms for every component with at least `min_area_px` pixels,
/// ordered by component id.
pub fn extract_organisms(
    labels: &LabelMap,
    corrected: &ImageStack,
    min_area_px: usize,
) -> Result<Vec<Organism>> {
    if labels.width != corrected.width() || labels.height != corrected.height() {
        return Err(Error::DimensionMismatch {
            band: 0,
            want_w: labels.width,
            want_h: labels.height,
            got_w: corrected.width(),
            got_h: corrected.height(),
        });
    }
    let mut pixel_sets: Vec<Vec<(usize, usize)>> = vec![Vec::new(); labels.count as usize + 1];
    for y in 0..labels.height {
        for x in 0..labels.width {
            let l = labels.get(x, y);
            if l != 0 {
                pixel_sets[l as usize].push((x, y));
            }
        }
    }
    let mut out = Vec::new();
    for (id, pixels) in pixel_sets.into_iter().enumerate().skip(1) {
        if pixels.is_empty() || pixels.len() < min_area_px {
            continue;
        }
        let mut org = Organism::from_pixels(id as u32, pixels);
        let b = org.bbox;
        org.touches_border = b.min_x == 0
            || b.min_y == 0
            || b.max_x + 1 == labels.width
            || b.max_y + 1 == labels.height;
        org.patches = corrected
            .bands()
            .iter()
            .map(|band| Raster::from_fn(b.width(), b.height(), |x, y| band.get(b.min_x + x, b.min_y + y)))
            .collect();
        out.push(org);
    }
    Ok(out)
}

/// Serializable summary of an organism for the segmentation JSON output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrganismRecord {
    pub id: u32,
    pub bbox: BBox,
    pub area: usize,
    pub touches_border: bool,
}

impl From<&Organism> for OrganismRecord {
    fn from(o: &Organism) -> Self {
        OrganismRecord {
            id: o.id,
            bbox: o.bbox,
            area: o.area(),
            touches_border: o.touches_border,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrganismsFile {
    pub width: usize,
    pub height: usize,
    pub thresholds: Vec<Option<f64>>,
    pub organisms: Vec<OrganismRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

/// Everything produced by segmenting one corrected stack.
#[derive(Debug, Clone)]
pub struct Segmentation {
    /// Otsu cut per band; `None` where the band was constant.
    pub thresholds: Vec<Option<f64>>,
    pub fused: BinaryMask,
    pub labels: LabelMap,
    pub organisms: Vec<Organism>,
}

pub fn segment_stack(corrected: &ImageStack, cfg: &SegmentationConfig) -> Result<Segmentation> {
    cfg.validate()?;
    let mut thresholds = Vec::with_capacity(corrected.num_bands());
    let mut masks = Vec::with_capacity(corrected.num_bands());
    for (i, band) in corrected.bands().iter().enumerate() {
        match otsu_threshold(band, cfg.num_bins) {
            Ok(t) => {
                thresholds.push(Some(t.value));
                masks.push(binarize(band, t.value));
            }
            Err(Error::DegenerateBand) => {
                log::warn!("band {i} is constant; contributes no foreground");
                thresholds.push(None);
                masks.push(BinaryMask::background(band.width(), band.height()));
            }
            Err(e) => return Err(e),
        }
    }
    let fused = match cfg.fusion {
        FusionRule::Union => fuse_masks(&masks)?,
    };
    let labels = connected_components(&fused);
    let organisms = extract_organisms(&labels, corrected, cfg.min_area_px)?;
    Ok(Segmentation {
        thresholds,
        fused,
        labels,
        organisms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stack_io::RoleTag;

    #[test]
    fn two_level_band() {
        let band = Raster::from_fn(10, 10, |x, _| if x < 5 { 10.0 } else { 200.0 });
        let t = otsu_threshold(&band, 256).unwrap();
        assert_eq!(t.bin, 0);
        let m = binarize(&band, t.value);
        for y in 0..10 {
            for x in 0..10 {
                assert_eq!(m.get(x, y), x >= 5);
            }
        }
    }

    #[test]
    fn constant_band_is_degenerate() {
        let band = Raster::filled(8, 8, 42.0);
        assert!(matches!(otsu_threshold(&band, 256), Err(Error::DegenerateBand)));
    }

    #[test]
    fn integer_band_partition_matches_histogram() {
        // range 0..=255 with 255 bins: cut lands exactly on an integer
        let band = Raster::from_fn(16, 16, |x, y| ((x * 16 + y) % 256) as f64);
        let t = otsu_threshold(&band, 255).unwrap();
        let (hist, min, max) = histogram(&band, 255);
        let width = (max - min) / 255.0;
        let fg_hist: u64 = hist[t.bin + 1..].iter().sum();
        let m = binarize(&band, t.value);
        assert_eq!(m.count() as u64, fg_hist);
        assert!(band
            .data()
            .iter()
            .all(|&v| (histogram_bin(v, min, width, 255) > t.bin) == (v > t.value)));
    }

    #[test]
    fn binarize_is_strict() {
        let band = Raster::new(2, 1, vec![50.0, 51.0]);
        let m = binarize(&band, 50.0);
        assert_eq!(m.foreground, vec![false, true]);
        let zeros = Raster::filled(3, 3, 0.0);
        assert_eq!(binarize(&zeros, 0.0).count(), 0);
    }

    #[test]
    fn fusion_is_union() {
        let a = BinaryMask::from_fn(3, 3, |x, y| x == 0 && y == 0);
        let b = BinaryMask::from_fn(3, 3, |x, y| x == 2 && y == 2);
        let bg = BinaryMask::background(3, 3);
        let u = fuse_masks(&[a.clone(), b.clone()]).unwrap();
        assert!(u.get(0, 0) && u.get(2, 2));
        assert_eq!(u.count(), 2);
        assert_eq!(fuse_masks(&[a.clone(), a.clone()]).unwrap().foreground, a.foreground);
        assert_eq!(fuse_masks(&[a.clone(), bg, b]).unwrap().foreground, u.foreground);
        assert!(fuse_masks(&[]).is_err());
        assert!(fuse_masks(&[a, BinaryMask::background(2, 3)]).is_err());
    }

    #[test]
    fn square_is_one_component() {
        let m = BinaryMask::from_fn(7, 7, |x, y| (2..5).contains(&x) && (2..5).contains(&y));
        let l = connected_components(&m);
        assert_eq!(l.count, 1);
        assert_eq!(l.sizes()[1], 9);
    }

    #[test]
    fn diagonal_touch_connects() {
        let m = BinaryMask::from_fn(4, 4, |x, y| (x, y) == (1, 1) || (x, y) == (2, 2));
        assert_eq!(connected_components(&m).count, 1);
        let anti = BinaryMask::from_fn(4, 4, |x, y| (x, y) == (2, 1) || (x, y) == (1, 2));
        assert_eq!(connected_components(&anti).count, 1);
    }

    #[test]
    fn u_shape_merges_and_ids_follow_scan_order() {
        // a U whose arms get different provisional labels
        let m = BinaryMask::from_fn(5, 4, |x, y| x == 0 || x == 4 || y == 3);
        let l = connected_components(&m);
        assert_eq!(l.count, 1);
        let two = BinaryMask::from_fn(6, 3, |x, y| (x == 4 && y == 0) || (x == 0 && y == 2));
        let l = connected_components(&two);
        assert_eq!(l.count, 2);
        assert_eq!(l.get(4, 0), 1);
        assert_eq!(l.get(0, 2), 2);
    }

    fn stack_for(w: usize, h: usize) -> ImageStack {
        let band = Raster::from_fn(w, h, |x, y| (x + y) as f64);
        ImageStack::new(vec![band], vec![405.0], 1.2, RoleTag::Corrected).unwrap()
    }

    fn blobs(w: usize, h: usize, rects: &[(usize, usize, usize, usize)]) -> LabelMap {
        let m = BinaryMask::from_fn(w, h, |x, y| {
            rects
                .iter()
                .any(|&(x0, y0, rw, rh)| (x0..x0 + rw).contains(&x) && (y0..y0 + rh).contains(&y))
        });
        connected_components(&m)
    }

    #[test]
    fn extract_single_blob() {
        let l = blobs(20, 20, &[(5, 5, 5, 5)]);
        let orgs = extract_organisms(&l, &stack_for(20, 20), 10).unwrap();
        assert_eq!(orgs.len(), 1);
        assert_eq!(orgs[0].area(), 25);
        assert_eq!(orgs[0].patches[0].get(0, 0), 10.0);
        assert!(!orgs[0].touches_border);
    }

    #[test]
    fn extract_filters_small() {
        let l = blobs(20, 20, &[(5, 5, 2, 2)]);
        assert!(extract_organisms(&l, &stack_for(20, 20), 10).unwrap().is_empty());
    }

    #[test]
    fn extract_orders_by_id_and_flags_border() {
        let l = blobs(30, 30, &[(0, 0, 6, 5), (20, 20, 4, 3)]);
        let orgs = extract_organisms(&l, &stack_for(30, 30), 10).unwrap();
        assert_eq!(orgs.iter().map(|o| o.area()).collect::<Vec<_>>(), vec![30, 12]);
        assert!(orgs[0].id < orgs[1].id);
        assert!(orgs[0].touches_border);
        assert!(!orgs[1].touches_border);
    }

    #[test]
    fn label_pgm_round_trip() {
        let l = blobs(12, 9, &[(1, 1, 3, 3), (6, 4, 2, 4)]);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("labels.pgm");
        l.save_pgm(&p, Some("abc")).unwrap();
        assert_eq!(LabelMap::load_pgm(&p).unwrap(), l);
    }
}
