use std::ffi::{c_char, CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use pepforge::dataset::{build_example, read_pdb, ComplexSpec};
use pepforge::diffusion::{Checkpoint, DiffusionConfig, DiffusionModel, TrainingExample};
use pepforge::nn::{DenoiserKind, ModelConfig};
use pepforge_ffi::*;

fn pdb(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/data/pdb").join(format!("{name}.pdb"))
}

fn cstr(p: &Path) -> CString {
    CString::new(p.to_str().unwrap()).unwrap()
}

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 256];
    unsafe {
        pf_last_error_message(buf.as_mut_ptr(), buf.len());
        CStr::from_ptr(buf.as_ptr()).to_string_lossy().into_owned()
    }
}

#[test]
fn version_is_cargo_version() {
    let v = unsafe { CStr::from_ptr(pf_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn wrap_angle_and_errors() {
    let mut out = 0.0;
    unsafe {
        assert_eq!(pf_wrap_angle(3.0 * std::f64::consts::PI, &mut out), PfStatus::Ok);
        assert!((out + std::f64::consts::PI).abs() < 1e-12);
        assert_eq!(pf_wrap_angle(f64::NAN, &mut out), PfStatus::InvalidArgument);
        assert!(!last_error().is_empty());
        assert_eq!(pf_wrap_angle(1.0, ptr::null_mut()), PfStatus::NullPointer);
        assert!(last_error().contains("null"));
    }
}

#[test]
fn error_message_truncates() {
    unsafe {
        pf_wrap_angle(1.0, ptr::null_mut());
        let full = pf_last_error_message(ptr::null_mut(), 0);
        let mut buf = [0 as c_char; 4];
        assert_eq!(pf_last_error_message(buf.as_mut_ptr(), 4), full);
        assert_eq!(CStr::from_ptr(buf.as_ptr()).to_bytes().len(), 3);
    }
}

#[test]
fn structure_angles_match_core() {
    let path = cstr(&pdb("2BEG"));
    let mut s: *mut PfStructure = ptr::null_mut();
    unsafe {
        assert_eq!(pf_structure_read(path.as_ptr(), &mut s), PfStatus::Ok);
        let mut rows = 0;
        assert_eq!(
            pf_structure_chain_angles(s, b'A' as c_char, ptr::null_mut(), 0, &mut rows),
            PfStatus::BufferTooSmall
        );
        let mut buf = vec![0.0; rows * 8];
        assert_eq!(pf_structure_chain_angles(s, b'A' as c_char, buf.as_mut_ptr(), rows, &mut rows), PfStatus::Ok);
        assert_eq!(pf_structure_chain_angles(s, b'Z' as c_char, buf.as_mut_ptr(), rows, &mut rows), PfStatus::Data);
        pf_structure_free(s);

        let core = read_pdb(&pdb("2BEG")).unwrap();
        let ic = pepforge::geom::extract_internal(&core.chain('A').unwrap().backbone()).unwrap();
        let expect: Vec<f64> = ic.rows.iter().flat_map(|r| r.to_array()).collect();
        assert_eq!(buf, expect);
    }
}

#[test]
fn missing_file_is_io() {
    let path = CString::new("/nonexistent/x.pdb").unwrap();
    let mut s: *mut PfStructure = ptr::null_mut();
    unsafe {
        assert_eq!(pf_structure_read(path.as_ptr(), &mut s), PfStatus::Io);
        assert!(s.is_null());
        pf_structure_free(s);
    }
}

#[test]
fn rmsd_and_tm_on_identical_backbones() {
    let s = read_pdb(&pdb("1A8O")).unwrap();
    let b = s.chains[0].backbone();
    let flat: Vec<f64> = b
        .residues
        .iter()
        .flat_map(|r| [r.n, r.ca, r.c, r.o])
        .flat_map(|v| [v.x, v.y, v.z])
        .collect();
    let n = b.residues.len();
    let (mut rmsd, mut tm) = (1.0, 0.0);
    unsafe {
        assert_eq!(pf_kabsch_rmsd(flat.as_ptr(), flat.as_ptr(), n, &mut rmsd), PfStatus::Ok);
        assert_eq!(pf_tm_score(flat.as_ptr(), flat.as_ptr(), n, &mut tm), PfStatus::Ok);
    }
    assert!(rmsd < 1e-6);
    assert!((tm - 1.0).abs() < 1e-9);
}

#[test]
fn alignment_calls() {
    let a = CString::new("HEAGAWGHEE").unwrap();
    let b = CString::new("PAWHEAE").unwrap();
    let bad = CString::new("AXZ1").unwrap();
    let mut score = 0i64;
    let mut sim = 0.0;
    unsafe {
        assert_eq!(pf_nw_score(a.as_ptr(), a.as_ptr(), &mut score), PfStatus::Ok);
        assert!(score > 0);
        assert_eq!(pf_seq_similarity(a.as_ptr(), a.as_ptr(), &mut sim), PfStatus::Ok);
        assert!((sim - 1.0).abs() < 1e-12);
        assert_eq!(pf_seq_similarity(b.as_ptr(), a.as_ptr(), &mut sim), PfStatus::Ok);
        assert!(sim < 1.0);
        assert_ne!(pf_nw_score(bad.as_ptr(), a.as_ptr(), &mut score), PfStatus::Ok);
    }
}

#[test]
fn sampling_through_handles() {
    let dir = tempfile::tempdir().unwrap();
    let s = read_pdb(&pdb("2BEG")).unwrap();
    let ex = build_example(
        &s,
        &ComplexSpec {
            pdb_id: "2BEGA".into(),
            receptor_chains: vec![],
            peptide_chain: 'A',
        },
        2,
    )
    .unwrap();
    let ex_path = dir.path().join("ex.json");
    std::fs::write(&ex_path, ex.to_json().unwrap()).unwrap();
    let train = vec![TrainingExample::from_complex(&ex).unwrap()];
    let diffusion = DiffusionConfig {
        steps: 8,
        ..Default::default()
    };
    for (kind, want) in [
        (DenoiserKind::Structure, PfModelKind::Structure),
        (DenoiserKind::Sequence, PfModelKind::Sequence),
    ] {
        let m = DiffusionModel::init(kind, ModelConfig::miniature(), diffusion.clone(), &train, 1).unwrap();
        let p = dir.path().join(format!("{}.ckpt.json", kind.as_str()));
        Checkpoint::from_model(&m, 2, 1, 0, 0, vec![]).save(&p).unwrap();
        let mut h: *mut PfModel = ptr::null_mut();
        let mut got = PfModelKind::Structure;
        unsafe {
            assert_eq!(pf_model_load(cstr(&p).as_ptr(), &mut h), PfStatus::Ok, "{}", last_error());
            assert_eq!(pf_model_kind(h, &mut got), PfStatus::Ok);
            pf_model_free(h);
        }
        assert_eq!(got, want);
    }

    let mut e: *mut PfExample = ptr::null_mut();
    let mut sm: *mut PfModel = ptr::null_mut();
    let mut qm: *mut PfModel = ptr::null_mut();
    unsafe {
        assert_eq!(pf_example_load(cstr(&ex_path).as_ptr(), &mut e), PfStatus::Ok, "{}", last_error());
        let mut rows = 0;
        assert_eq!(pf_example_peptide_rows(e, &mut rows), PfStatus::Ok);
        assert_eq!(rows, ex.peptide.angles.len());
        assert_eq!(pf_model_load(cstr(&dir.path().join("structure.ckpt.json")).as_ptr(), &mut sm), PfStatus::Ok);
        assert_eq!(pf_model_load(cstr(&dir.path().join("sequence.ckpt.json")).as_ptr(), &mut qm), PfStatus::Ok);

        let mut a1 = vec![0.0; rows * 8];
        let mut a2 = vec![0.0; rows * 8];
        assert_eq!(pf_sample_structure(sm, e, rows, 7, a1.as_mut_ptr()), PfStatus::Ok, "{}", last_error());
        assert_eq!(pf_sample_structure(sm, e, rows, 7, a2.as_mut_ptr()), PfStatus::Ok);
        assert_eq!(a1, a2);
        assert!(a1.iter().all(|x| x.is_finite()));

        let mut seq = vec![0 as c_char; rows + 1];
        assert_eq!(
            pf_sample_sequence(qm, e, a1.as_ptr(), rows, 7, seq.as_mut_ptr(), seq.len()),
            PfStatus::Ok,
            "{}",
            last_error()
        );
        assert_eq!(CStr::from_ptr(seq.as_ptr()).to_bytes().len(), rows);
        assert_eq!(
            pf_sample_sequence(qm, e, a1.as_ptr(), rows, 7, seq.as_mut_ptr(), rows),
            PfStatus::BufferTooSmall
        );
        assert_eq!(pf_sample_structure(ptr::null(), e, rows, 7, a1.as_mut_ptr()), PfStatus::NullPointer);

        pf_model_free(sm);
        pf_model_free(qm);
        pf_example_free(e);
    }
}

#[test]
fn header_compiles_as_c_and_cpp() {
    let header = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include/pepforge.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for f in ["pf_version", "pf_sample_structure", "pf_sample_sequence", "PF_STATUS_BUFFER_TOO_SMALL"] {
        assert!(text.contains(f), "header lacks {f}");
    }
    for (cc, lang) in [("cc", "c"), ("c++", "c++")] {
        let Ok(out) = Command::new(cc).args(["-fsyntax-only", "-Wall", "-Werror", "-x", lang]).arg(&header).output() else {
            eprintln!("{cc} not found; skipping");
            continue;
        };
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
}
