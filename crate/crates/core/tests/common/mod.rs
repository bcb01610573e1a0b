#![allow(dead_code)]

pub mod grad;

use std::path::PathBuf;

use pepforge::dataset::{build_example, read_pdb, Chain, ComplexExample, ComplexSpec, Structure};

pub const PEPTIDE_CHAIN: char = 'P';
const FLANK: usize = 2;

pub fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/pdb").join(name)
}

pub fn structure(name: &str) -> Structure {
    read_pdb(&data(&format!("{name}.pdb"))).unwrap()
}

/// Moves residues `start..start + len` of `chain` into a new peptide chain
/// and drops `FLANK` residues either side so the cut ends are not bonded.
pub fn carve(s: &Structure, chain: char, start: usize, len: usize) -> Structure {
    let mut out = s.clone();
    out.id = format!("{}{}{}", s.id, chain, start);
    let c = out.chains.iter_mut().find(|c| c.id == chain).unwrap();
    let peptide: Vec<_> = c.residues[start..start + len].to_vec();
    let lo = start.saturating_sub(FLANK);
    let hi = (start + len + FLANK).min(c.residues.len());
    c.residues.drain(lo..hi);
    out.chains.push(Chain {
        id: PEPTIDE_CHAIN,
        residues: peptide,
    });
    out
}

pub fn spec(s: &Structure) -> ComplexSpec {
    ComplexSpec {
        pdb_id: s.id.clone(),
        receptor_chains: vec![],
        peptide_chain: PEPTIDE_CHAIN,
    }
}

/// Contiguous, fully bonded windows of `len` residues in a chain.
pub fn windows(s: &Structure, chain: char, len: usize, stride: usize) -> Vec<usize> {
    let c = s.chain(chain).unwrap();
    (0..c.residues.len().saturating_sub(len))
        .step_by(stride)
        .filter(|&i| (i + 1..i + len).all(|j| c.bonded(j)))
        .collect()
}

/// Pseudo-complexes cut from the large vendored chains, in a fixed order.
pub fn pseudo_complexes(count: usize, ext_k: usize) -> Vec<ComplexExample> {
    let sources = [("2XHE", 'A'), ("7DDO", 'A'), ("2XHE", 'B'), ("7DDO", 'C')];
    let lens = [8, 10, 12, 14];
    let mut out = Vec::new();
    let structures: Vec<Structure> = sources.iter().map(|(n, _)| structure(n)).collect();
    let mut round = 0;
    while out.len() < count && round < 6 {
        for (s, (_, ch)) in structures.iter().zip(sources) {
            let len = lens[round % lens.len()];
            for start in windows(s, ch, len, 23).into_iter().skip(round).step_by(6) {
                let carved = carve(s, ch, start, len);
                if let Ok(e) = build_example(&carved, &spec(&carved), ext_k) {
                    if e.peptide.angles.len() >= 3 && !out.iter().any(|o: &ComplexExample| o.meta.pdb_id == e.meta.pdb_id) {
                        out.push(e);
                    }
                }
                if out.len() >= count {
                    return out;
                }
            }
        }
        round += 1;
    }
    out
}

/// 2BEG is a five-chain assembly; each chain against the rest is a real
/// peptide-receptor pair.
pub fn real_complex(peptide_chain: char, ext_k: usize) -> ComplexExample {
    let s = structure("2BEG");
    build_example(
        &s,
        &ComplexSpec {
            pdb_id: format!("2BEG{peptide_chain}"),
            receptor_chains: vec![],
            peptide_chain,
        },
        ext_k,
    )
    .unwrap()
}

/// Denser pseudo-complexes for the scaled distribution check. Each chain is
/// cut into blocks of `BLOCK` residues; of every five blocks one is held
/// out for testing and one for validation. Peptides never cross a block
/// edge, so the three sets share no peptide residues.
pub struct RegionSplit {
    pub train: Vec<ComplexExample>,
    pub val: Vec<ComplexExample>,
    pub test: Vec<ComplexExample>,
}

pub fn region_split(n_train: usize, stride: usize) -> RegionSplit {
    const BLOCK: usize = 50;
    let sources = [("2XHE", 'A'), ("7DDO", 'A'), ("2XHE", 'B'), ("7DDO", 'C')];
    let lens = [8, 10, 12, 14];
    let (mut train, mut val, mut test) = (Vec::new(), Vec::new(), Vec::new());
    for (name, ch) in sources {
        let s = structure(name);
        let chain = s.chain(ch).unwrap();
        let n = chain.residues.len();
        let mut k = 0;
        for block in 0..n.div_ceil(BLOCK) {
            let end = ((block + 1) * BLOCK).min(n);
            let mut start = block * BLOCK;
            while start + lens[k % lens.len()] <= end {
                let len = lens[k % lens.len()];
                k += 1;
                if (start + 1..start + len).all(|j| chain.bonded(j)) {
                    let carved = carve(&s, ch, start, len);
                    if let Ok(e) = build_example(&carved, &spec(&carved), 0) {
                        if e.peptide.angles.len() >= 3 {
                            match block % 5 {
                                4 => test.push(e),
                                2 => val.push(e),
                                _ => train.push(e),
                            }
                        }
                    }
                }
                start += stride;
            }
        }
    }
    if train.len() > n_train {
        let step = train.len() as f64 / n_train as f64;
        train = (0..n_train).map(|i| train[(i as f64 * step) as usize].clone()).collect();
    }
    RegionSplit { train, val, test }
}
