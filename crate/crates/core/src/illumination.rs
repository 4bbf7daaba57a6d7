//! Illumination correction: a smooth background is estimated per band with a
//! Gaussian low-pass followed by a sequence of grayscale openings with
//! growing disk structuring elements, then subtracted from the raw stack.
//!
//! All filters replicate edge pixels. For a disk structuring element that is
//! the same as restricting the neighbourhood to in-image pixels, so erosion
//! and dilation form an adjunction and the opening is exactly idempotent.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::Raster;
use crate::stack_io::{ImageStack, RoleTag};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
#[serde(deny_unknown_fields)]
pub struct CorrectionConfig {
    pub gaussian_sigma_px: f64,
    pub opening_radii_px: Vec<usize>,
    pub clamp_negative: bool,
}

impl Default for CorrectionConfig {
    fn default() -> Self {
        CorrectionConfig {
            gaussian_sigma_px: 5.0,
            opening_radii_px: vec![4, 8, 16, 32],
            clamp_negative: true,
        }
    }
}

impl CorrectionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gaussian_sigma_px > 0.0) || !self.gaussian_sigma_px.is_finite() {
            return Err(Error::config("correction.gaussian_sigma_px", "must be > 0"));
        }
        if self.opening_radii_px.is_empty() {
            return Err(Error::config("correction.opening_radii_px", "must not be empty"));
        }
        if self.opening_radii_px[0] < 1 {
            return Err(Error::config("correction.opening_radii_px", "radii must be >= 1"));
        }
        if self.opening_radii_px.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::config(
                "correction.opening_radii_px",
                "must be strictly increasing",
            ));
        }
        Ok(())
    }
}

/// Normalized 1-D Gaussian truncated at `ceil(3 sigma)`; index `r` is the centre.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    assert!(sigma > 0.0, "sigma must be positive");
    let r = (3.0 * sigma).ceil() as isize;
    let mut k: Vec<f64> = (-r..=r)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k
}

#[inline]
fn clamp_idx(i: isize, n: usize) -> usize {
    i.clamp(0, n as isize - 1) as usize
}

/// Separable Gaussian blur with edge replication.
pub fn gaussian_lowpass(band: &Raster, sigma: f64) -> Raster {
    let k = gaussian_kernel(sigma);
    let r = (k.len() / 2) as isize;
    let (w, h) = (band.width(), band.height());

    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        let row = &band.data()[y * w..(y + 1) * w];
        for x in 0..w {
            let mut acc = 0.0;
            for (j, kv) in k.iter().enumerate() {
                acc += kv * row[clamp_idx(x as isize + j as isize - r, w)];
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (j, kv) in k.iter().enumerate() {
                acc += kv * tmp[clamp_idx(y as isize + j as isize - r, h) * w + x];
            }
            out[y * w + x] = acc;
        }
    }
    Raster::new(w, h, out)
}

/// Half-widths of the disk `dx^2 + dy^2 <= r^2`, indexed by `dy + r`.
pub fn disk_half_widths(radius: usize) -> Vec<usize> {
    let r = radius as i64;
    (-r..=r)
        .map(|dy| {
            let mut hw = 0i64;
            while (hw + 1) * (hw + 1) + dy * dy <= r * r {
                hw += 1;
            }
            hw as usize
        })
        .collect()
}

#[derive(Clone, Copy)]
enum Extremum {
    Min,
    Max,
}

impl Extremum {
    #[inline]
    fn pick(self, a: f64, b: f64) -> f64 {
        match self {
            Extremum::Min => a.min(b),
            Extremum::Max => a.max(b),
        }
    }

    /// True when `a` should evict `b` from the back of a monotone deque.
    #[inline]
    fn dominates(self, a: f64, b: f64) -> bool {
        match self {
            Extremum::Min => a <= b,
            Extremum::Max => a >= b,
        }
    }
}

/// Sliding extremum over `[x - hw, x + hw]` clipped to the row.
#[allow(clippy::needless_range_loop)]
fn sliding_row(row: &[f64], hw: usize, op: Extremum, out: &mut [f64]) {
    let n = row.len();
    let mut dq: std::collections::VecDeque<usize> = std::collections::VecDeque::new();
    let mut next = 0;
    for x in 0..n {
        let hi = (x + hw).min(n - 1);
        while next <= hi {
            while dq.back().is_some_and(|&b| op.dominates(row[next], row[b])) {
                dq.pop_back();
            }
            dq.push_back(next);
            next += 1;
        }
        let lo = x.saturating_sub(hw);
        while dq.front().is_some_and(|&f| f < lo) {
            dq.pop_front();
        }
        out[x] = row[*dq.front().unwrap()];
    }
}

/// Flat disk erosion/dilation: the disk is split into horizontal runs, each
/// run handled by a precomputed sliding extremum of matching half-width.
fn disk_filter(band: &Raster, radius: usize, op: Extremum) -> Raster {
    let (w, h) = (band.width(), band.height());
    let widths = disk_half_widths(radius);
    let mut by_width: Vec<Option<Vec<f64>>> = vec![None; radius + 1];
    for &hw in &widths {
        if by_width[hw].is_some() {
            continue;
        }
        let mut img = vec![0.0; w * h];
        for y in 0..h {
            sliding_row(
                &band.data()[y * w..(y + 1) * w],
                hw,
                op,
                &mut img[y * w..(y + 1) * w],
            );
        }
        by_width[hw] = Some(img);
    }
    let r = radius as isize;
    let init = match op {
        Extremum::Min => f64::INFINITY,
        Extremum::Max => f64::NEG_INFINITY,
    };
    let mut out = vec![init; w * h];
    for (k, &hw) in widths.iter().enumerate() {
        let dy = k as isize - r;
        let src = by_width[hw].as_ref().unwrap();
        for y in 0..h {
            let sy = y as isize + dy;
            if sy < 0 || sy >= h as isize {
                continue;
            }
            let srow = &src[sy as usize * w..(sy as usize + 1) * w];
            let orow = &mut out[y * w..(y + 1) * w];
            for (o, &s) in orow.iter_mut().zip(srow) {
                *o = op.pick(*o, s);
            }
        }
    }
    Raster::new(w, h, out)
}

pub fn erode_disk(band: &Raster, radius: usize) -> Raster {
    disk_filter(band, radius, Extremum::Min)
}

pub fn dilate_disk(band: &Raster, radius: usize) -> Raster {
    disk_filter(band, radius, Extremum::Max)
}

/// Grayscale opening (erosion then dilation) with a disk of `radius`.
pub fn morphological_opening(band: &Raster, radius: usize) -> Raster {
    assert!(radius >= 1, "opening radius must be >= 1");
    dilate_disk(&erode_disk(band, radius), radius)
}

fn background_band(band: &Raster, cfg: &CorrectionConfig) -> Raster {
    let smoothed = gaussian_lowpass(band, cfg.gaussian_sigma_px);
    cfg.opening_radii_px
        .iter()
        .fold(smoothed, |acc, &r| morphological_opening(&acc, r))
}

/// Per-band background model of a raw stack.
pub fn estimate_background(stack: &ImageStack, cfg: &CorrectionConfig) -> Result<ImageStack> {
    cfg.validate()?;
    if stack.role() != RoleTag::Raw {
        return Err(Error::Validation(format!(
            "background estimation needs a raw stack, got {:?}",
            stack.role()
        )));
    }
    let bands = std::thread::scope(|s| {
        let handles: Vec<_> = stack
            .bands()
            .iter()
            .map(|b| s.spawn(move || background_band(b, cfg)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("background worker panicked"))
            .collect::<Vec<_>>()
    });
    stack.with_bands(bands, RoleTag::Background)
}

pub fn subtract_background(
    raw: &ImageStack,
    background: &ImageStack,
    clamp: bool,
) -> Result<ImageStack> {
    if raw.role() != RoleTag::Raw || background.role() != RoleTag::Background {
        return Err(Error::Validation(format!(
            "expected raw minus background, got {:?} minus {:?}",
            raw.role(),
            background.role()
        )));
    }
    if raw.num_bands() != background.num_bands() {
        return Err(Error::Validation(format!(
            "band count mismatch: {} vs {}",
            raw.num_bands(),
            background.num_bands()
        )));
    }
    let mut bands = Vec::with_capacity(raw.num_bands());
    for (i, (r, b)) in raw.bands().iter().zip(background.bands()).enumerate() {
        if !r.same_dims(b) {
            return Err(Error::DimensionMismatch {
                band: i,
                want_w: r.width(),
                want_h: r.height(),
                got_w: b.width(),
                got_h: b.height(),
            });
        }
        let data = r
            .data()
            .iter()
            .zip(b.data())
            .map(|(&rv, &bv)| {
                let d = rv - bv;
                if clamp {
                    d.max(0.0)
                } else {
                    d
                }
            })
            .collect();
        bands.push(Raster::new(r.width(), r.height(), data));
    }
    raw.with_bands(bands, RoleTag::Corrected)
}

/// Background estimation and subtraction in one step.
pub fn correct_stack(raw: &ImageStack, cfg: &CorrectionConfig) -> Result<ImageStack> {
    let bg = estimate_background(raw, cfg)?;
    subtract_background(raw, &bg, cfg.clamp_negative)
}
