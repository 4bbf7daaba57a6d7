//! The multi-band fluorescence cube and its on-disk representation.
//!
//! A stack directory holds `manifest.json` plus one binary PGM (`P5`,
//! maxval 65535, big-endian samples) per band. In memory every intensity is
//! an `f64`; files are the only quantized representation. On save, values
//! are clamped to `[0, 65535]` and rounded to nearest.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::Raster;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const DEFAULT_PIXEL_PITCH_UM: f64 = 1.2;
pub const DEFAULT_WAVELENGTHS_NM: [f64; 6] = [405.0, 420.0, 450.0, 470.0, 500.0, 530.0];

/// Which stage of illumination correction a stack represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RoleTag {
    Raw,
    Background,
    Corrected,
}

/// An ordered set of co-registered bands, one per excitation wavelength.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageStack {
    bands: Vec<Raster>,
    wavelengths_nm: Vec<f64>,
    pixel_pitch_um: f64,
    role: RoleTag,
}

impl ImageStack {
    pub fn new(
        bands: Vec<Raster>,
        wavelengths_nm: Vec<f64>,
        pixel_pitch_um: f64,
        role: RoleTag,
    ) -> Result<Self> {
        let first = bands.first().ok_or(Error::EmptyStack)?;
        let (w, h) = (first.width(), first.height());
        if w == 0 || h == 0 {
            return Err(Error::Validation("bands must be at least 1x1".into()));
        }
        for (i, b) in bands.iter().enumerate() {
            if b.width() != w || b.height() != h {
                return Err(Error::DimensionMismatch {
                    band: i,
                    want_w: w,
                    want_h: h,
                    got_w: b.width(),
                    got_h: b.height(),
                });
            }
        }
        if wavelengths_nm.len() != bands.len() {
            return Err(Error::Validation(format!(
                "{} wavelengths for {} bands",
                wavelengths_nm.len(),
                bands.len()
            )));
        }
        if wavelengths_nm.windows(2).any(|p| !(p[1] > p[0])) {
            return Err(Error::NonIncreasingWavelengths(wavelengths_nm));
        }
        if !(pixel_pitch_um > 0.0) {
            return Err(Error::config("pixel_pitch_um", "must be positive"));
        }
        if role == RoleTag::Raw && bands.iter().any(|b| b.data().iter().any(|&v| !(v >= 0.0))) {
            return Err(Error::Validation("raw stack contains negative intensities".into()));
        }
        Ok(ImageStack {
            bands,
            wavelengths_nm,
            pixel_pitch_um,
            role,
        })
    }

    pub fn width(&self) -> usize {
        self.bands[0].width()
    }

    pub fn height(&self) -> usize {
        self.bands[0].height()
    }

    pub fn num_bands(&self) -> usize {
        self.bands.len()
    }

    pub fn band(&self, i: usize) -> &Raster {
        &self.bands[i]
    }

    pub fn bands(&self) -> &[Raster] {
        &self.bands
    }

    pub fn wavelengths_nm(&self) -> &[f64] {
        &self.wavelengths_nm
    }

    pub fn pixel_pitch_um(&self) -> f64 {
        self.pixel_pitch_um
    }

    pub fn role(&self) -> RoleTag {
        self.role
    }

    /// Intensity of band `band` at `(x, y)`.
    #[inline]
    pub fn intensity(&self, band: usize, x: usize, y: usize) -> f64 {
        self.bands[band].get(x, y)
    }

    /// Same geometry and metadata, new pixel data and role.
    pub fn with_bands(&self, bands: Vec<Raster>, role: RoleTag) -> Result<Self> {
        ImageStack::new(bands, self.wavelengths_nm.clone(), self.pixel_pitch_um, role)
    }
}

/// JSON sidecar describing a stack directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub wavelengths_nm: Vec<f64>,
    pub pixel_pitch_um: f64,
    pub bands: Vec<String>,
    pub role_tag: RoleTag,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

pub fn load_stack(manifest_path: &Path) -> Result<ImageStack> {
    let manifest_path = if manifest_path.is_dir() {
        manifest_path.join(MANIFEST_FILE)
    } else {
        manifest_path.to_path_buf()
    };
    let text = fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::Json {
        path: manifest_path.clone(),
        source: e,
    })?;
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    let mut bands = Vec::with_capacity(manifest.bands.len());
    for name in &manifest.bands {
        bands.push(read_pgm(&dir.join(name))?);
    }
    ImageStack::new(
        bands,
        manifest.wavelengths_nm,
        manifest.pixel_pitch_um,
        manifest.role_tag,
    )
}

/// Writes `manifest.json` and `band_XX_<nm>nm.pgm` files into `dir`.
pub fn save_stack(stack: &ImageStack, dir: &Path, config_hash: Option<&str>) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut names = Vec::with_capacity(stack.num_bands());
    for (i, (band, nm)) in stack.bands.iter().zip(&stack.wavelengths_nm).enumerate() {
        let name = format!("band_{i:02}_{}nm.pgm", nm.round() as i64);
        write_pgm(&dir.join(&name), band, config_hash)?;
        names.push(name);
    }
    let manifest = Manifest {
        wavelengths_nm: stack.wavelengths_nm.clone(),
        pixel_pitch_um: stack.pixel_pitch_um,
        bands: names,
        role_tag: stack.role,
        config_hash: config_hash.map(str::to_string),
    };
    write_json(&dir.join(MANIFEST_FILE), &manifest)
}

/// Quantize an intensity to the 16-bit file range.
pub fn quantize(v: f64) -> u16 {
    if v.is_nan() {
        0
    } else {
        v.round().clamp(0.0, 65535.0) as u16
    }
}

pub fn encode_pgm(raster: &Raster, comment: Option<&str>) -> Vec<u8> {
    let mut out = Vec::with_capacity(raster.data().len() * 2 + 64);
    out.extend_from_slice(b"P5\n");
    if let Some(c) = comment {
        out.extend_from_slice(format!("# {c}\n").as_bytes());
    }
    out.extend_from_slice(format!("{} {}\n65535\n", raster.width(), raster.height()).as_bytes());
    for &v in raster.data() {
        out.extend_from_slice(&quantize(v).to_be_bytes());
    }
    out
}

/// Decodes a binary PGM. 8-bit (maxval < 256) and 16-bit big-endian samples
/// are accepted; sample values are returned unscaled.
pub fn decode_pgm(bytes: &[u8], path: &Path) -> Result<Raster> {
    let bad = |msg: &str| Error::Decode {
        path: path.to_path_buf(),
        msg: msg.to_string(),
    };
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(bad("not a binary PGM (expected P5 magic)"));
    }
    let mut pos = 2;
    let mut fields = [0u32; 3];
    for field in fields.iter_mut() {
        // whitespace and comments
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while pos < bytes.len() && bytes[pos] != b'\n' {
                        pos += 1;
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated header"));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad("header value out of range"))?;
    }
    // exactly one whitespace byte before the raster
    if !bytes.get(pos).is_some_and(|b| b.is_ascii_whitespace()) {
        return Err(bad("missing whitespace after maxval"));
    }
    pos += 1;
    let [width, height, maxval] = fields;
    if width == 0 || height == 0 {
        return Err(bad("zero image dimension"));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(Error::UnsupportedBitDepth {
            path: path.to_path_buf(),
            maxval,
        });
    }
    let (w, h) = (width as usize, height as usize);
    let sample_bytes = if maxval < 256 { 1 } else { 2 };
    let body = &bytes[pos..];
    if body.len() < w * h * sample_bytes {
        return Err(bad("truncated pixel data"));
    }
    let data: Vec<f64> = if sample_bytes == 1 {
        body[..w * h].iter().map(|&b| b as f64).collect()
    } else {
        body[..w * h * 2]
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]) as f64)
            .collect()
    };
    Ok(Raster::new(w, h, data))
}

pub fn read_pgm(path: &Path) -> Result<Raster> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pgm(&bytes, path)
}

pub fn write_pgm(path: &Path, raster: &Raster, config_hash: Option<&str>) -> Result<()> {
    let comment = config_hash.map(|h| format!("config_hash {h}"));
    write_atomic(path, &encode_pgm(raster, comment.as_deref()))
}

/// Writes through a temporary file in the same directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let file_name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = dir.join(format!(".{file_name}.tmp{}", std::process::id()));
    let res = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    res.map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Json {
        path: path.to_path_buf(),
        source: e,
    })?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Json {
        path: path.to_path_buf(),
        source: e,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(w: usize, h: usize, scale: f64) -> Raster {
        Raster::from_fn(w, h, |x, y| ((x + y * w) as f64 * scale).round())
    }

    fn six_band(w: usize, h: usize) -> ImageStack {
        let bands = (0..6).map(|i| ramp(w, h, (i + 1) as f64)).collect();
        ImageStack::new(bands, DEFAULT_WAVELENGTHS_NM.to_vec(), 1.2, RoleTag::Raw).unwrap()
    }

    #[test]
    fn loads_six_band_manifest() {
        let dir = tempfile::tempdir().unwrap();
        save_stack(&six_band(64, 64), dir.path(), None).unwrap();
        let s = load_stack(&dir.path().join(MANIFEST_FILE)).unwrap();
        assert_eq!(s.num_bands(), 6);
        assert_eq!((s.width(), s.height()), (64, 64));
        assert_eq!(s.wavelengths_nm(), &DEFAULT_WAVELENGTHS_NM);
    }

    #[test]
    fn mismatched_band_dimensions_rejected() {
        let dir = tempfile::tempdir().unwrap();
        write_pgm(&dir.path().join("a.pgm"), &ramp(64, 64, 1.0), None).unwrap();
        write_pgm(&dir.path().join("b.pgm"), &ramp(32, 32, 1.0), None).unwrap();
        let m = Manifest {
            wavelengths_nm: vec![405.0, 420.0],
            pixel_pitch_um: 1.2,
            bands: vec!["a.pgm".into(), "b.pgm".into()],
            role_tag: RoleTag::Raw,
            config_hash: None,
        };
        write_json(&dir.path().join(MANIFEST_FILE), &m).unwrap();
        let err = load_stack(dir.path()).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { band: 1, .. }), "{err}");
    }

    #[test]
    fn repeated_wavelength_rejected() {
        let bands = vec![ramp(4, 4, 1.0), ramp(4, 4, 1.0)];
        let err = ImageStack::new(bands, vec![405.0, 405.0], 1.2, RoleTag::Raw).unwrap_err();
        assert!(matches!(err, Error::NonIncreasingWavelengths(_)));
    }

    #[test]
    fn missing_band_file_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let m = Manifest {
            wavelengths_nm: vec![405.0],
            pixel_pitch_um: 1.2,
            bands: vec!["nope.pgm".into()],
            role_tag: RoleTag::Raw,
            config_hash: None,
        };
        write_json(&dir.path().join(MANIFEST_FILE), &m).unwrap();
        assert!(load_stack(dir.path()).unwrap_err().is_io());
    }

    #[test]
    fn unsupported_maxval() {
        let bytes = b"P5 2 1 70000\n\0\0\0\0".to_vec();
        let err = decode_pgm(&bytes, Path::new("x.pgm")).unwrap_err();
        assert!(matches!(err, Error::UnsupportedBitDepth { maxval: 70000, .. }));
        let err = decode_pgm(b"P2 1 1 255\n0", Path::new("x.pgm")).unwrap_err();
        assert!(matches!(err, Error::Decode { .. }));
    }

    #[test]
    fn empty_band_list_rejected() {
        let err = ImageStack::new(vec![], vec![], 1.2, RoleTag::Raw).unwrap_err();
        assert!(matches!(err, Error::EmptyStack));
    }

    #[test]
    fn real_values_clamped_and_rounded_on_save() {
        let band = Raster::new(4, 1, vec![-20.0, 10.4, 10.5, 70000.0]);
        let bytes = encode_pgm(&band, Some("config_hash abc"));
        let back = decode_pgm(&bytes, Path::new("x.pgm")).unwrap();
        assert_eq!(back.data(), &[0.0, 10.0, 11.0, 65535.0]);
    }

    #[test]
    fn eight_bit_pgm_decodes() {
        let bytes = b"P5\n# hi\n2 2\n255\n\x01\x02\x03\xff".to_vec();
        let r = decode_pgm(&bytes, Path::new("x.pgm")).unwrap();
        assert_eq!(r.data(), &[1.0, 2.0, 3.0, 255.0]);
    }

    #[test]
    fn header_is_big_endian_16_bit() {
        let bytes = encode_pgm(&Raster::new(1, 1, vec![258.0]), None);
        assert_eq!(bytes, b"P5\n1 1\n65535\n\x01\x02");
    }
}
