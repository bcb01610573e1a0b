//! `sample`: pocket(s) -> reconstructed PDB, angles JSON and FASTA.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::amino::{parse_sequence, sequence_string};
use crate::dataset::pdb::write_backbone;
use crate::dataset::ComplexExample;
use crate::diffusion::{Checkpoint, DiffusionModel, PocketTensors, ScheduleKind};
use crate::error::{Error, Result};
use crate::geom::{reconstruct, AngleRow, Backbone, BondLengthSet, BondLengths, InternalCoords, SeedFrame};
use crate::nn::DenoiserKind;

use super::train::load_split;
use super::{read_file, write_file};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleRef {
    pub steps: usize,
    pub kind: ScheduleKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub sample_id: String,
    pub pdb_id: String,
    pub pocket_ref: String,
    pub ext_k: usize,
    pub seed: u64,
    pub schedule: ScheduleRef,
    pub angles: Vec<AngleRow>,
    pub sequence: String,
}

impl SampleRecord {
    pub fn internal(&self) -> InternalCoords {
        InternalCoords::new(self.angles.clone())
    }

    /// Fixed-length reconstruction; residues 1..=n carry the sampled types.
    pub fn backbone(&self) -> Result<Backbone> {
        let lens = BondLengthSet::ENGH_HUBER;
        let mut b = reconstruct(&self.internal(), &BondLengths::Fixed(lens), SeedFrame::canonical(&lens))?;
        let seq = parse_sequence(&self.sequence)?;
        for (r, aa) in b.residues.iter_mut().skip(1).zip(seq) {
            r.aa = Some(aa);
        }
        Ok(b)
    }

    pub fn file_stem(&self) -> String {
        self.sample_id.clone()
    }
}

/// Example files named by a path: a single example, or the examples of a
/// prepared directory restricted to one split subset.
pub fn pocket_sources(path: &Path, subset: &str) -> Result<Vec<(PathBuf, ComplexExample)>> {
    let files: Vec<PathBuf> = if path.is_file() {
        vec![path.to_path_buf()]
    } else {
        let split = load_split(path)?;
        let ids = match subset {
            "train" => split.train,
            "val" => split.val,
            "test" => split.test,
            "all" => {
                let mut v = [split.train, split.val, split.test].concat();
                v.sort();
                v
            }
            other => return Err(Error::Config(format!("unknown subset {other:?}"))),
        };
        ids.iter().map(|id| path.join("examples").join(format!("{id}.example.json"))).collect()
    };
    files
        .into_iter()
        .map(|f| {
            let e = ComplexExample::from_json(&read_file(&f)?)?;
            Ok((f, e))
        })
        .collect()
}

fn stream_of(id: &str) -> u64 {
    // FNV-1a; any fixed hash works, this one is stable across platforms.
    id.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x100_0000_01b3))
}

pub struct SampleArgs<'a> {
    pub structure_ckpt: &'a Path,
    pub sequence_ckpt: &'a Path,
    pub pocket: &'a Path,
    pub subset: &'a str,
    /// Peptide length in residues; the reference length when absent.
    pub length: Option<usize>,
    pub count: usize,
    pub seed: u64,
    pub out: &'a Path,
}

pub fn load_pair(structure: &Path, sequence: &Path) -> Result<(DiffusionModel, DiffusionModel, usize)> {
    let sc = Checkpoint::load(structure)?;
    let qc = Checkpoint::load(sequence)?;
    if sc.kind != DenoiserKind::Structure || qc.kind != DenoiserKind::Sequence {
        return Err(Error::Config("expected a structure and a sequence checkpoint".into()));
    }
    if sc.ext_k != qc.ext_k {
        return Err(Error::Config(format!(
            "structure checkpoint uses ext_k {} but sequence checkpoint uses {}",
            sc.ext_k, qc.ext_k
        )));
    }
    Ok((sc.to_model()?, qc.to_model()?, sc.ext_k))
}

pub fn run_sample(a: &SampleArgs) -> Result<Vec<SampleRecord>> {
    if a.count == 0 {
        return Err(Error::Config("count must be positive".into()));
    }
    let (sm, qm, ext_k) = load_pair(a.structure_ckpt, a.sequence_ckpt)?;
    let sources = pocket_sources(a.pocket, a.subset)?;
    if sources.is_empty() {
        return Err(Error::EmptyData(format!("no pockets under {}", a.pocket.display())));
    }
    let mut jobs = Vec::new();
    for (path, e) in &sources {
        if e.meta.ext_k != ext_k {
            return Err(Error::Config(format!(
                "{} was prepared with ext_k {} but the checkpoints use {ext_k}",
                e.meta.pdb_id, e.meta.ext_k
            )));
        }
        let residues = a.length.unwrap_or(e.peptide.backbone.len());
        if residues < 3 {
            return Err(Error::Config(format!("peptide length {residues} is below 3")));
        }
        let pocket = PocketTensors::from_pocket(&e.pocket)?;
        for i in 0..a.count {
            jobs.push((path, e, pocket.clone(), residues - 2, i));
        }
    }
    let records: Vec<SampleRecord> = jobs
        .par_iter()
        .map(|(path, e, pocket, rows, i)| {
            let seed = a.seed.wrapping_add(*i as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(stream_of(&e.meta.pdb_id));
            let ic = sm.sample_structure(pocket, *rows, &mut rng)?;
            let seq = qm.sample_sequence(&ic.rows, pocket, &mut rng)?;
            Ok(SampleRecord {
                sample_id: format!("{}_{i}", e.meta.pdb_id),
                pdb_id: e.meta.pdb_id.clone(),
                pocket_ref: path.file_name().map_or(String::new(), |f| f.to_string_lossy().into_owned()),
                ext_k,
                seed,
                schedule: ScheduleRef {
                    steps: sm.schedule().steps,
                    kind: sm.schedule().kind,
                },
                angles: ic.rows,
                sequence: sequence_string(&seq),
            })
        })
        .collect::<Result<_>>()?;

    std::fs::create_dir_all(a.out).map_err(|e| Error::io(a.out, e))?;
    let mut fasta = String::new();
    for r in &records {
        let mut json = serde_json::to_string_pretty(r)?;
        json.push('\n');
        write_file(&a.out.join(format!("{}.sample.json", r.file_stem())), &json)?;
        write_file(&a.out.join(format!("{}.pdb", r.file_stem())), &write_backbone(&r.backbone()?, 'P'))?;
        let _ = writeln!(fasta, ">{}|{}|{}\n{}", r.pdb_id, r.sequence.len(), r.seed, r.sequence);
    }
    write_file(&a.out.join("samples.fasta"), &fasta)?;
    Ok(records)
}

pub fn load_samples(dir: &Path) -> Result<Vec<SampleRecord>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.to_string_lossy().ends_with(".sample.json"))
        .collect();
    files.sort();
    files
        .iter()
        .map(|f| Ok(serde_json::from_str(&read_file(f)?)?))
        .collect()
}
