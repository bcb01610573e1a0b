use std::path::PathBuf;

use pepforge::dataset::{filter_complex, read_pdb, RejectReason};

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/pdb").join(name)
}

#[test]
fn vendored_files_parse() {
    for f in ["1A8O.pdb", "2BEG.pdb", "2XHE.pdb", "7DDO.pdb"] {
        let s = read_pdb(&data(f)).unwrap();
        eprintln!(
            "{} res={:?} dropped={} chains={:?}",
            s.id,
            s.resolution,
            s.dropped_residues,
            s.chains.iter().map(|c| (c.id, c.residues.len())).collect::<Vec<_>>()
        );
        assert!(s.residue_count() > 0);
    }
}

#[test]
fn selenomethionine_counts_as_unknown() {
    let s = read_pdb(&data("1A8O.pdb")).unwrap();
    let v = filter_complex(&s, s.chains[0].id).unwrap();
    assert!(v.reasons.contains(&RejectReason::UnknownResidue));
}
