//! C ABI over pepforge. Every fallible call returns a `PfStatus`; on
//! failure the message is kept per thread and read with
//! `pf_last_error_message`. Handles are opaque and freed with their own
//! `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use pepforge::amino::{parse_sequence, sequence_string};
use pepforge::dataset::{read_pdb, ComplexExample, Structure};
use pepforge::diffusion::{Checkpoint, DiffusionModel, PocketTensors};
use pepforge::geom::{extract_internal, wrap_angle, AngleRow, Backbone, BackboneResidue, Vec3, NUM_ANGLES};
use pepforge::metrics::{kabsch_rmsd, nw_score, seq_similarity, tm_score, AlignmentConfig};
use pepforge::nn::DenoiserKind;
use pepforge::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Data = 4,
    Divergence = 5,
    Io = 6,
    Format = 7,
    BufferTooSmall = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PfModelKind {
    Structure = 0,
    Sequence = 1,
}

/// Parsed PDB file.
pub struct PfStructure(Structure);

/// Prepared complex example (peptide, pocket and site).
pub struct PfExample {
    example: ComplexExample,
    pocket: PocketTensors,
}

/// Trained denoiser loaded from a checkpoint.
pub struct PfModel(DiffusionModel);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> PfStatus {
    match e {
        Error::Config(_) => PfStatus::Config,
        Error::Divergence(_) => PfStatus::Divergence,
        Error::Io { .. } => PfStatus::Io,
        Error::Format(_) => PfStatus::Format,
        Error::InvalidValue(_) | Error::Shape(_) | Error::Range(_) | Error::Alphabet(_) => PfStatus::InvalidArgument,
        _ => PfStatus::Data,
    }
}

struct Fail(PfStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> PfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            PfStatus::Ok
        }
        Ok(Err(Fail(s, msg))) => {
            set_error(msg);
            s
        }
        Err(_) => {
            set_error("internal panic".into());
            PfStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(PfStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(PfStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn out_ref<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn write_out<T: Copy>(src: &[T], dst: *mut T, cap: usize, written: *mut usize) -> Result<(), Fail> {
    if !written.is_null() {
        *written = src.len();
    }
    if src.len() > cap {
        return Err(Fail(
            PfStatus::BufferTooSmall,
            format!("need {} elements, buffer holds {cap}", src.len()),
        ));
    }
    if !src.is_empty() {
        if dst.is_null() {
            return Err(null("output buffer"));
        }
        std::ptr::copy_nonoverlapping(src.as_ptr(), dst, src.len());
    }
    Ok(())
}

fn backbone_from(coords: &[f64]) -> Result<Backbone, Fail> {
    if coords.len() % 12 != 0 {
        return Err(Fail(PfStatus::InvalidArgument, "backbone arrays hold 12 doubles per residue".into()));
    }
    let p = |c: &[f64]| Vec3::new(c[0], c[1], c[2]);
    Ok(Backbone {
        residues: coords
            .chunks(12)
            .map(|r| BackboneResidue {
                n: p(&r[0..3]),
                ca: p(&r[3..6]),
                c: p(&r[6..9]),
                o: p(&r[9..12]),
                aa: None,
            })
            .collect(),
    })
}

fn rows_to_flat(rows: &[AngleRow]) -> Vec<f64> {
    rows.iter().flat_map(|r| r.to_array()).collect()
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn pf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the calling thread's last error message into `buf` (truncated,
/// always NUL-terminated when `cap > 0`). Returns the full message length.
///
/// # Safety
/// `buf` must be null or point to `cap` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn pf_last_error_message(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let bytes = e.as_bytes();
        if !buf.is_null() && cap > 0 {
            let n = bytes.len().min(cap - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr().cast(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Wraps an angle into [-pi, pi).
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pf_wrap_angle(x: f64, out: *mut f64) -> PfStatus {
    guard(|| {
        *out_ref(out, "out")? = wrap_angle(x)?;
        Ok(())
    })
}

/// Reads a PDB file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pf_structure_read(path: *const c_char, out: *mut *mut PfStructure) -> PfStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = std::ptr::null_mut();
        let s = read_pdb(&PathBuf::from(str_arg(path, "path")?))?;
        *out = Box::into_raw(Box::new(PfStructure(s)));
        Ok(())
    })
}

/// # Safety
/// `s` must be null or a handle from `pf_structure_read` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pf_structure_free(s: *mut PfStructure) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Interior angle rows (8 doubles each) of one chain. `rows_written`
/// receives the row count even when the buffer is too small.
///
/// # Safety
/// `s` must be a live handle; `out` must hold `cap_rows * 8` doubles.
#[no_mangle]
pub unsafe extern "C" fn pf_structure_chain_angles(
    s: *const PfStructure,
    chain: c_char,
    out: *mut f64,
    cap_rows: usize,
    rows_written: *mut usize,
) -> PfStatus {
    guard(|| {
        let s = s.as_ref().ok_or_else(|| null("structure"))?;
        let ic = extract_internal(&s.0.chain(chain as u8 as char)?.backbone())?;
        let flat = rows_to_flat(&ic.rows);
        let mut n = 0;
        let r = write_out(&flat, out, cap_rows * NUM_ANGLES, &mut n);
        if !rows_written.is_null() {
            *rows_written = n / NUM_ANGLES;
        }
        r
    })
}

/// Loads a prepared example JSON file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pf_example_load(path: *const c_char, out: *mut *mut PfExample) -> PfStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = std::ptr::null_mut();
        let p = PathBuf::from(str_arg(path, "path")?);
        let text = std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
        let example = ComplexExample::from_json(&text)?;
        let pocket = PocketTensors::from_pocket(&example.pocket)?;
        *out = Box::into_raw(Box::new(PfExample { example, pocket }));
        Ok(())
    })
}

/// # Safety
/// `e` must be null or a handle from `pf_example_load` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pf_example_free(e: *mut PfExample) {
    if !e.is_null() {
        drop(Box::from_raw(e));
    }
}

/// Number of peptide angle rows (residues minus two).
///
/// # Safety
/// `e` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pf_example_peptide_rows(e: *const PfExample, out: *mut usize) -> PfStatus {
    guard(|| {
        let e = e.as_ref().ok_or_else(|| null("example"))?;
        *out_ref(out, "out")? = e.example.peptide.angles.len();
        Ok(())
    })
}

/// Loads a training checkpoint.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pf_model_load(path: *const c_char, out: *mut *mut PfModel) -> PfStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = std::ptr::null_mut();
        let m = Checkpoint::load(&PathBuf::from(str_arg(path, "path")?))?.to_model()?;
        *out = Box::into_raw(Box::new(PfModel(m)));
        Ok(())
    })
}

/// # Safety
/// `m` must be null or a handle from `pf_model_load` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pf_model_free(m: *mut PfModel) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// # Safety
/// `m` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pf_model_kind(m: *const PfModel, out: *mut PfModelKind) -> PfStatus {
    guard(|| {
        let m = m.as_ref().ok_or_else(|| null("model"))?;
        *out_ref(out, "out")? = match m.0.kind() {
            DenoiserKind::Structure => PfModelKind::Structure,
            DenoiserKind::Sequence => PfModelKind::Sequence,
        };
        Ok(())
    })
}

/// Samples `rows` angle rows for the example's pocket into `out`
/// (`rows * 8` doubles).
///
/// # Safety
/// Handles must be live; `out` must hold `rows * 8` doubles.
#[no_mangle]
pub unsafe extern "C" fn pf_sample_structure(
    m: *const PfModel,
    e: *const PfExample,
    rows: usize,
    seed: u64,
    out: *mut f64,
) -> PfStatus {
    guard(|| {
        let m = m.as_ref().ok_or_else(|| null("model"))?;
        let e = e.as_ref().ok_or_else(|| null("example"))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ic = m.0.sample_structure(&e.pocket, rows, &mut rng)?;
        write_out(&rows_to_flat(&ic.rows), out, rows * NUM_ANGLES, std::ptr::null_mut())
    })
}

/// Samples a sequence for `rows` angle rows (`rows * 8` doubles). Writes
/// `rows` one-letter codes plus a NUL into `out` (`cap >= rows + 1`).
///
/// # Safety
/// Handles must be live; `angles` must hold `rows * 8` doubles and `out`
/// `cap` bytes.
#[no_mangle]
pub unsafe extern "C" fn pf_sample_sequence(
    m: *const PfModel,
    e: *const PfExample,
    angles: *const f64,
    rows: usize,
    seed: u64,
    out: *mut c_char,
    cap: usize,
) -> PfStatus {
    guard(|| {
        let m = m.as_ref().ok_or_else(|| null("model"))?;
        let e = e.as_ref().ok_or_else(|| null("example"))?;
        let flat = slice_arg(angles, rows * NUM_ANGLES, "angles")?;
        let rows: Vec<AngleRow> = flat
            .chunks(NUM_ANGLES)
            .map(|c| AngleRow::from_array(c.try_into().expect("chunk of 8")))
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let seq = sequence_string(&m.0.sample_sequence(&rows, &e.pocket, &mut rng)?);
        let mut bytes: Vec<c_char> = seq.bytes().map(|b| b as c_char).collect();
        bytes.push(0);
        write_out(&bytes, out, cap, std::ptr::null_mut())
    })
}

/// Backbone RMSD after superposition. Arrays hold `residues * 12` doubles
/// (N, CA, C, O per residue).
///
/// # Safety
/// `a` and `b` must hold `residues * 12` doubles; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pf_kabsch_rmsd(a: *const f64, b: *const f64, residues: usize, out: *mut f64) -> PfStatus {
    guard(|| {
        let ba = backbone_from(slice_arg(a, residues * 12, "a")?)?;
        let bb = backbone_from(slice_arg(b, residues * 12, "b")?)?;
        *out_ref(out, "out")? = kabsch_rmsd(&ba, &bb)?;
        Ok(())
    })
}

/// TM-score over index-paired CA atoms; same layout as `pf_kabsch_rmsd`.
///
/// # Safety
/// As for `pf_kabsch_rmsd`.
#[no_mangle]
pub unsafe extern "C" fn pf_tm_score(a: *const f64, b: *const f64, residues: usize, out: *mut f64) -> PfStatus {
    guard(|| {
        let ba = backbone_from(slice_arg(a, residues * 12, "a")?)?;
        let bb = backbone_from(slice_arg(b, residues * 12, "b")?)?;
        *out_ref(out, "out")? = tm_score(&ba, &bb)?;
        Ok(())
    })
}

/// Global alignment score (BLOSUM62, linear gap 4) of two one-letter
/// sequences.
///
/// # Safety
/// `s1`, `s2` must be NUL-terminated strings; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pf_nw_score(s1: *const c_char, s2: *const c_char, out: *mut i64) -> PfStatus {
    guard(|| {
        let a = parse_sequence(str_arg(s1, "s1")?)?;
        let b = parse_sequence(str_arg(s2, "s2")?)?;
        *out_ref(out, "out")? = nw_score(&a, &b, &AlignmentConfig::default())?;
        Ok(())
    })
}

/// Alignment score normalized by the reference's self-score.
///
/// # Safety
/// As for `pf_nw_score`.
#[no_mangle]
pub unsafe extern "C" fn pf_seq_similarity(pred: *const c_char, truth: *const c_char, out: *mut f64) -> PfStatus {
    guard(|| {
        let a = parse_sequence(str_arg(pred, "pred")?)?;
        let b = parse_sequence(str_arg(truth, "truth")?)?;
        *out_ref(out, "out")? = seq_similarity(&a, &b, &AlignmentConfig::default())?;
        Ok(())
    })
}
