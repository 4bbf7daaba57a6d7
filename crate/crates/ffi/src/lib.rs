//! C ABI over `algae-core`.
//!
//! Every function returns an [`AlgaeStatus`]; on failure a message is kept in
//! thread-local storage and can be read with [`algae_last_error`]. Objects are
//! opaque heap handles released with their matching `*_free` function.
//! Panics never cross the boundary; they surface as `ALGAE_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use algae_core::classifier::{argmax, Model};
use algae_core::evaluation::paired_t_test;
use algae_core::features::{self, assemble, FeatureVector, ModelVariant};
use algae_core::illumination;
use algae_core::pipeline::PipelineConfig;
use algae_core::segmentation::{self, otsu_bin};
use algae_core::stack_io::{self, ImageStack};
use algae_core::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlgaeStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Validation = 3,
    Io = 4,
    Panic = 5,
}

/// A multi-band image stack.
pub struct AlgaeStack(ImageStack);

/// Organisms found in a corrected stack, with their feature vectors.
pub struct AlgaeSegmentation {
    labels: segmentation::LabelMap,
    features: Vec<FeatureVector>,
    bands: usize,
}

/// A trained classifier.
pub struct AlgaeModel(Model);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(AlgaeStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = if e.is_io() {
            AlgaeStatus::Io
        } else {
            AlgaeStatus::Validation
        };
        Failure(status, e.to_string())
    }
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> AlgaeStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => AlgaeStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            AlgaeStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(AlgaeStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(AlgaeStatus::InvalidArgument, msg.into())
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(format!("{what} is not valid UTF-8")))
}

unsafe fn config_arg(p: *const c_char) -> Result<PipelineConfig, Failure> {
    if p.is_null() {
        return Ok(PipelineConfig::default());
    }
    Ok(PipelineConfig::from_json(str_arg(p, "config_json")?)?)
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn out_slice<'a, T>(p: *mut T, len: usize, need: usize, what: &str) -> Result<&'a mut [T], Failure> {
    if len < need {
        return Err(invalid(format!("{what} holds {len} values, need {need}")));
    }
    if need == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, need))
}

unsafe fn write_out<T>(p: *mut T, v: T, what: &str) -> Result<(), Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    p.write(v);
    Ok(())
}

fn boxed<T>(v: T) -> *mut T {
    Box::into_raw(Box::new(v))
}

/// Message for the most recent failure on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn algae_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Loads a stack from a directory or manifest path.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn algae_stack_load(path: *const c_char, out: *mut *mut AlgaeStack) -> AlgaeStatus {
    guard(|| {
        let path = PathBuf::from(str_arg(path, "path")?);
        let stack = stack_io::load_stack(&path)?;
        write_out(out, boxed(AlgaeStack(stack)), "out")
    })
}

/// Builds a stack from `bands` planes of `width * height` doubles each.
/// `role` is 0 raw, 1 background, 2 corrected.
///
/// # Safety
/// `data` must hold `bands * width * height` values and `wavelengths_nm` `bands`.
#[no_mangle]
pub unsafe extern "C" fn algae_stack_new(
    data: *const f64,
    width: usize,
    height: usize,
    bands: usize,
    wavelengths_nm: *const f64,
    pixel_pitch_um: f64,
    role: u32,
    out: *mut *mut AlgaeStack,
) -> AlgaeStatus {
    guard(|| {
        let plane = width
            .checked_mul(height)
            .ok_or_else(|| invalid("width * height overflows"))?;
        let total = plane
            .checked_mul(bands)
            .ok_or_else(|| invalid("stack size overflows"))?;
        let data = slice_arg(data, total, "data")?;
        let wl = slice_arg(wavelengths_nm, bands, "wavelengths_nm")?.to_vec();
        let role = match role {
            0 => stack_io::RoleTag::Raw,
            1 => stack_io::RoleTag::Background,
            2 => stack_io::RoleTag::Corrected,
            r => return Err(invalid(format!("unknown role {r}"))),
        };
        let rasters = (0..bands)
            .map(|b| algae_core::Raster::new(width, height, data[b * plane..(b + 1) * plane].to_vec()))
            .collect();
        let stack = ImageStack::new(rasters, wl, pixel_pitch_um, role)?;
        write_out(out, boxed(AlgaeStack(stack)), "out")
    })
}

/// # Safety
/// `dir` must be a NUL-terminated string and `stack` a live handle.
#[no_mangle]
pub unsafe extern "C" fn algae_stack_save(stack: *const AlgaeStack, dir: *const c_char) -> AlgaeStatus {
    guard(|| {
        let stack = deref(stack, "stack")?;
        let dir = PathBuf::from(str_arg(dir, "dir")?);
        Ok(stack_io::save_stack(&stack.0, &dir, None)?)
    })
}

/// # Safety
/// `stack` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn algae_stack_free(stack: *mut AlgaeStack) {
    if !stack.is_null() {
        drop(Box::from_raw(stack));
    }
}

/// # Safety
/// Output pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn algae_stack_dims(
    stack: *const AlgaeStack,
    width: *mut usize,
    height: *mut usize,
    bands: *mut usize,
) -> AlgaeStatus {
    guard(|| {
        let s = &deref(stack, "stack")?.0;
        write_out(width, s.width(), "width")?;
        write_out(height, s.height(), "height")?;
        write_out(bands, s.num_bands(), "bands")
    })
}

/// Copies one band, row-major, into `out` (at least `width * height` values).
///
/// # Safety
/// `out` must be writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn algae_stack_band(
    stack: *const AlgaeStack,
    band: usize,
    out: *mut f64,
    len: usize,
) -> AlgaeStatus {
    guard(|| {
        let s = &deref(stack, "stack")?.0;
        if band >= s.num_bands() {
            return Err(invalid(format!("band {band} out of range ({} bands)", s.num_bands())));
        }
        let src = s.band(band).data();
        out_slice(out, len, src.len(), "out")?.copy_from_slice(src);
        Ok(())
    })
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn algae_stack_wavelength(stack: *const AlgaeStack, band: usize, out: *mut f64) -> AlgaeStatus {
    guard(|| {
        let s = &deref(stack, "stack")?.0;
        let nm = *s
            .wavelengths_nm()
            .get(band)
            .ok_or_else(|| invalid(format!("band {band} out of range")))?;
        write_out(out, nm, "out")
    })
}

/// Background estimation and subtraction. `config_json` may be null for
/// defaults; otherwise a pipeline configuration document.
///
/// # Safety
/// `raw` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn algae_stack_correct(
    raw: *const AlgaeStack,
    config_json: *const c_char,
    out: *mut *mut AlgaeStack,
) -> AlgaeStatus {
    guard(|| {
        let raw = &deref(raw, "raw")?.0;
        let cfg = config_arg(config_json)?;
        let corrected = illumination::correct_stack(raw, &cfg.correction)?;
        write_out(out, boxed(AlgaeStack(corrected)), "out")
    })
}

/// Thresholds, labels and measures every organism in a corrected stack.
///
/// # Safety
/// `corrected` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn algae_segment(
    corrected: *const AlgaeStack,
    config_json: *const c_char,
    out: *mut *mut AlgaeSegmentation,
) -> AlgaeStatus {
    guard(|| {
        let stack = &deref(corrected, "corrected")?.0;
        let cfg = config_arg(config_json)?;
        let seg = segmentation::segment_stack(stack, &cfg.segmentation)?;
        let features = seg
            .organisms
            .iter()
            .map(|o| features::extract_features(o, stack, o.id.to_string(), None))
            .collect::<Result<Vec<_>, _>>()?;
        let handle = AlgaeSegmentation {
            labels: seg.labels,
            features,
            bands: stack.num_bands(),
        };
        write_out(out, boxed(handle), "out")
    })
}

/// # Safety
/// `seg` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn algae_segmentation_free(seg: *mut AlgaeSegmentation) {
    if !seg.is_null() {
        drop(Box::from_raw(seg));
    }
}

/// Number of organisms and the width of a feature row (5 + bands).
///
/// # Safety
/// Output pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn algae_segmentation_dims(
    seg: *const AlgaeSegmentation,
    organisms: *mut usize,
    feature_dim: *mut usize,
) -> AlgaeStatus {
    guard(|| {
        let seg = deref(seg, "seg")?;
        write_out(organisms, seg.features.len(), "organisms")?;
        write_out(feature_dim, 5 + seg.bands, "feature_dim")
    })
}

/// Component id per pixel (0 background), row-major. Ids of organisms
/// dropped by the minimum-area filter still appear here.
///
/// # Safety
/// `out` must be writable for `len` values.
#[no_mangle]
pub unsafe extern "C" fn algae_segmentation_labels(seg: *const AlgaeSegmentation, out: *mut u32, len: usize) -> AlgaeStatus {
    guard(|| {
        let seg = deref(seg, "seg")?;
        out_slice(out, len, seg.labels.labels.len(), "out")?.copy_from_slice(&seg.labels.labels);
        Ok(())
    })
}

/// Component id of each organism, in feature-row order.
///
/// # Safety
/// `out` must be writable for `len` values.
#[no_mangle]
pub unsafe extern "C" fn algae_segmentation_ids(seg: *const AlgaeSegmentation, out: *mut u32, len: usize) -> AlgaeStatus {
    guard(|| {
        let seg = deref(seg, "seg")?;
        let dst = out_slice(out, len, seg.features.len(), "out")?;
        for (d, fv) in dst.iter_mut().zip(&seg.features) {
            *d = fv.organism_id.parse().map_err(|_| invalid("organism id"))?;
        }
        Ok(())
    })
}

/// Row-major feature matrix: area, convex area, eccentricity, equivalent
/// diameter, extent, then one mean intensity per band.
///
/// # Safety
/// `out` must be writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn algae_segmentation_features(
    seg: *const AlgaeSegmentation,
    out: *mut f64,
    len: usize,
) -> AlgaeStatus {
    guard(|| {
        let seg = deref(seg, "seg")?;
        let dim = 5 + seg.bands;
        let dst = out_slice(out, len, seg.features.len() * dim, "out")?;
        for (row, fv) in dst.chunks_mut(dim).zip(&seg.features) {
            row.copy_from_slice(&assemble(fv, ModelVariant::SpectralMorphological));
        }
        Ok(())
    })
}

/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn algae_model_load(path: *const c_char, out: *mut *mut AlgaeModel) -> AlgaeStatus {
    guard(|| {
        let path = PathBuf::from(str_arg(path, "path")?);
        let model = Model::load(&path)?;
        write_out(out, boxed(AlgaeModel(model)), "out")
    })
}

/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn algae_model_free(model: *mut AlgaeModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Width the model consumes and number of classes it predicts.
///
/// # Safety
/// Output pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn algae_model_dims(
    model: *const AlgaeModel,
    input_dim: *mut usize,
    num_classes: *mut usize,
) -> AlgaeStatus {
    guard(|| {
        let m = &deref(model, "model")?.0;
        write_out(input_dim, m.normalizer.dim(), "input_dim")?;
        write_out(num_classes, m.class_names.len(), "num_classes")
    })
}

/// Classifies `rows` feature rows of width `dim`. Rows may be in the model's
/// own layout (`dim` equal to its input width) or full rows as produced by
/// [`algae_segmentation_features`]. `probs` may be null; otherwise it
/// receives `rows * num_classes` probabilities.
///
/// # Safety
/// `features` must hold `rows * dim` doubles, `labels` `rows` slots and
/// `probs`, when non-null, `rows * num_classes` slots.
#[no_mangle]
pub unsafe extern "C" fn algae_model_predict(
    model: *const AlgaeModel,
    features: *const f64,
    rows: usize,
    dim: usize,
    labels: *mut u32,
    probs: *mut f64,
) -> AlgaeStatus {
    guard(|| {
        let m = &deref(model, "model")?.0;
        let own = m.normalizer.dim();
        let full_ok = match m.variant {
            ModelVariant::Morphological => dim >= 5,
            ModelVariant::Spectral => dim == 5 + own,
            ModelVariant::SpectralMorphological => dim == own,
        };
        if dim != own && !full_ok {
            return Err(invalid(format!("rows of width {dim} do not fit a model of width {own}")));
        }
        let total = rows.checked_mul(dim).ok_or_else(|| invalid("rows * dim overflows"))?;
        let x = slice_arg(features, total, "features")?;
        let labels = out_slice(labels, rows, rows, "labels")?;
        let k = m.class_names.len();
        let mut probs = if probs.is_null() {
            None
        } else {
            Some(std::slice::from_raw_parts_mut(probs, rows * k))
        };
        for (i, row) in x.chunks(dim.max(1)).take(rows).enumerate() {
            let input: Vec<f64> = if dim == own {
                row.to_vec()
            } else {
                let fv = FeatureVector {
                    organism_id: String::new(),
                    label: None,
                    morphological: features::Morphology {
                        area: row[0],
                        convex_area: row[1],
                        eccentricity: row[2],
                        equivalent_diameter: row[3],
                        extent: row[4],
                    },
                    spectral: row[5..].to_vec(),
                };
                assemble(&fv, m.variant)
            };
            let p = m.probabilities(&input)?;
            labels[i] = argmax(&p) as u32;
            if let Some(dst) = probs.as_deref_mut() {
                dst[i * k..(i + 1) * k].copy_from_slice(&p);
            }
        }
        Ok(())
    })
}

/// Otsu on a histogram: the last background bin of the optimal split.
///
/// # Safety
/// `hist` must hold `bins` values and `out_bin` be writable.
#[no_mangle]
pub unsafe extern "C" fn algae_otsu_bin(hist: *const u64, bins: usize, out_bin: *mut usize) -> AlgaeStatus {
    guard(|| {
        let hist = slice_arg(hist, bins, "hist")?;
        let bin = otsu_bin(hist).ok_or_else(|| Failure(AlgaeStatus::Validation, "histogram has no valid split".into()))?;
        write_out(out_bin, bin, "out_bin")
    })
}

/// Two-sided paired t-test of `a` against `b`. `t` is infinite when the
/// differences have zero spread and nonzero mean.
///
/// # Safety
/// `a` and `b` must hold `n` doubles; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn algae_paired_t_test(
    a: *const f64,
    b: *const f64,
    n: usize,
    alpha: f64,
    t: *mut f64,
    p_value: *mut f64,
    reject: *mut bool,
) -> AlgaeStatus {
    guard(|| {
        let a = slice_arg(a, n, "a")?;
        let b = slice_arg(b, n, "b")?;
        let r = paired_t_test(a, b, alpha)?;
        write_out(t, r.t, "t")?;
        write_out(p_value, r.p_value, "p_value")?;
        write_out(reject, r.reject, "reject")
    })
}
