//! `prepare`: PDB directory + complex list -> example files, split, report.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::{build_example, filter_complex, read_pdb, split_dataset, ComplexSpec};
use crate::error::{Error, Result};

use super::write_file;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct ComplexEntry {
    pub pdb_id: String,
    pub receptor_chains: Vec<char>,
    pub peptide_chain: char,
}

/// Tab-separated `pdb_id  receptor_chains  peptide_chain`. Receptor chains
/// are letters, optionally comma-separated; `-` or empty means every other
/// chain. Blank lines and `#` comments are skipped.
pub fn parse_complex_list(text: &str) -> Result<Vec<ComplexEntry>> {
    let mut out = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.trim_end();
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').map(str::trim).collect();
        let bad = || Error::Format(format!("complex list line {}: {line:?}", no + 1));
        if cols.len() != 3 || cols[0].is_empty() {
            return Err(bad());
        }
        let mut pep = cols[2].chars();
        let peptide_chain = pep.next().ok_or_else(bad)?;
        if pep.next().is_some() {
            return Err(bad());
        }
        let receptor_chains = if cols[1] == "-" {
            vec![]
        } else {
            cols[1].chars().filter(|c| *c != ',' && !c.is_whitespace()).collect()
        };
        out.push(ComplexEntry {
            pdb_id: cols[0].to_string(),
            receptor_chains,
            peptide_chain,
        });
    }
    Ok(out)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub pdb_id: String,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PrepareReport {
    pub entries: usize,
    pub duplicates: usize,
    pub accepted: usize,
    pub ext_k: usize,
    /// Per-rule counts; a complex failing several rules counts once per rule.
    pub rejected: BTreeMap<String, usize>,
    pub rejections: Vec<Rejection>,
}

fn find_pdb(dir: &Path, id: &str) -> Option<PathBuf> {
    let names = [
        format!("{id}.pdb"),
        format!("{}.pdb", id.to_lowercase()),
        format!("{}.pdb", id.to_uppercase()),
        format!("pdb{}.ent", id.to_lowercase()),
    ];
    names.iter().map(|n| dir.join(n)).find(|p| p.is_file())
}

pub struct PrepareArgs<'a> {
    pub pdb_dir: &'a Path,
    pub complexes: &'a Path,
    pub out: &'a Path,
    pub ext_k: usize,
    pub seed: u64,
    pub ratios: [f64; 3],
}

pub fn prepare(a: &PrepareArgs) -> Result<PrepareReport> {
    let text = std::fs::read_to_string(a.complexes).map_err(|e| Error::io(a.complexes, e))?;
    let mut entries = parse_complex_list(&text)?;
    let total = entries.len();
    // Duplicate ids keep the lexicographically first row.
    entries.sort();
    entries.dedup_by(|b, a| a.pdb_id == b.pdb_id);
    let mut report = PrepareReport {
        entries: total,
        duplicates: total - entries.len(),
        ext_k: a.ext_k,
        ..Default::default()
    };
    let examples_dir = a.out.join("examples");
    std::fs::create_dir_all(&examples_dir).map_err(|e| Error::io(&examples_dir, e))?;

    let mut accepted = Vec::new();
    for e in &entries {
        let path = find_pdb(a.pdb_dir, &e.pdb_id)
            .ok_or_else(|| Error::io(a.pdb_dir.join(format!("{}.pdb", e.pdb_id)), std::io::ErrorKind::NotFound.into()))?;
        let mut reject = |reasons: Vec<String>| {
            for r in &reasons {
                *report.rejected.entry(r.clone()).or_default() += 1;
            }
            report.rejections.push(Rejection {
                pdb_id: e.pdb_id.clone(),
                reason: reasons.join(","),
            });
        };
        let s = match read_pdb(&path) {
            Ok(s) => s,
            Err(err @ Error::Io { .. }) => return Err(err),
            Err(err) => {
                log::warn!("{}: {err}", path.display());
                reject(vec!["parse_error".into()]);
                continue;
            }
        };
        let verdict = match filter_complex(&s, e.peptide_chain) {
            Ok(v) => v,
            Err(Error::ChainNotFound(_)) => {
                reject(vec!["missing_chain".into()]);
                continue;
            }
            Err(err) => return Err(err),
        };
        if !verdict.accepted() {
            reject(verdict.reasons.iter().map(|r| r.as_str().to_string()).collect());
            continue;
        }
        let spec = ComplexSpec {
            pdb_id: e.pdb_id.clone(),
            receptor_chains: e.receptor_chains.clone(),
            peptide_chain: e.peptide_chain,
        };
        match build_example(&s, &spec, a.ext_k) {
            Ok(ex) => {
                write_file(&examples_dir.join(ex.file_name()), &ex.to_json()?)?;
                accepted.push(e.pdb_id.clone());
            }
            Err(Error::EmptyPocket) => reject(vec!["empty_pocket".into()]),
            Err(Error::ChainNotFound(_)) => reject(vec!["missing_chain".into()]),
            Err(err @ (Error::DegenerateGeometry(_) | Error::ChainBreak(..) | Error::TooShort { .. })) => {
                log::warn!("{}: {err}", e.pdb_id);
                reject(vec!["geometry".into()]);
            }
            Err(err) => return Err(err),
        }
    }
    report.accepted = accepted.len();
    let split = split_dataset(&accepted, a.ratios, a.seed)?;
    write_file(&a.out.join("split.json"), &split.to_json()?)?;
    let mut rep = serde_json::to_string_pretty(&report)?;
    rep.push('\n');
    write_file(&a.out.join("report.json"), &rep)?;
    Ok(report)
}
