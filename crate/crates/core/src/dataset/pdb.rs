//! Fixed-column PDB reader and writer for backbone atoms.
//!
//! Only N, CA, C and O are kept. Residues carrying some but not all of those
//! four atoms are dropped and counted; residues carrying none of them
//! (waters, ions, ligands) are ignored silently. Only the first MODEL is read.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::BufRead;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::amino::AminoAcid;
use crate::error::{Error, Result};
use crate::geom::{Backbone, BackboneResidue, Vec3, PEPTIDE_BOND_MAX};

pub const BACKBONE_ATOMS: [&str; 4] = ["N", "CA", "C", "O"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Residue {
    pub seq_num: i32,
    pub icode: char,
    pub name: String,
    /// `None` for anything outside the canonical 20.
    pub aa: Option<AminoAcid>,
    pub atoms: BTreeMap<String, Vec3>,
}

impl Residue {
    pub fn atom(&self, name: &str) -> Option<Vec3> {
        self.atoms.get(name).copied()
    }

    pub fn backbone(&self) -> BackboneResidue {
        let get = |n: &str| self.atoms[n];
        BackboneResidue {
            n: get("N"),
            ca: get("CA"),
            c: get("C"),
            o: get("O"),
            aa: self.aa,
        }
    }

    pub fn backbone_atoms(&self) -> [Vec3; 4] {
        self.backbone().atoms()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Chain {
    pub id: char,
    pub residues: Vec<Residue>,
}

impl Chain {
    pub fn backbone(&self) -> Backbone {
        Backbone {
            residues: self.residues.iter().map(Residue::backbone).collect(),
        }
    }

    /// True when residue `i - 1` is peptide-bonded to residue `i`.
    pub fn bonded(&self, i: usize) -> bool {
        i >= 1
            && i < self.residues.len()
            && self.residues[i - 1].atoms["C"].distance(self.residues[i].atoms["N"])
                < PEPTIDE_BOND_MAX
    }

    pub fn position(&self, seq_num: i32, icode: char) -> Option<usize> {
        self.residues
            .iter()
            .position(|r| r.seq_num == seq_num && r.icode == icode)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Structure {
    pub id: String,
    pub resolution: Option<f64>,
    pub chains: Vec<Chain>,
    /// Residues dropped because a backbone atom was missing.
    pub dropped_residues: usize,
}

impl Structure {
    pub fn chain(&self, id: char) -> Result<&Chain> {
        self.chains
            .iter()
            .find(|c| c.id == id)
            .ok_or(Error::ChainNotFound(id))
    }

    pub fn residue_count(&self) -> usize {
        self.chains.iter().map(|c| c.residues.len()).sum()
    }
}

struct PendingResidue {
    chain: char,
    seq_num: i32,
    icode: char,
    name: String,
    atoms: BTreeMap<String, Vec3>,
}

fn column(line: &str, range: std::ops::Range<usize>) -> &str {
    let end = range.end.min(line.len());
    if range.start >= end {
        return "";
    }
    line.get(range.start..end).unwrap_or("")
}

fn parse_coord(line: &str, range: std::ops::Range<usize>, lineno: usize) -> Result<f64> {
    column(line, range)
        .trim()
        .parse::<f64>()
        .map_err(|_| Error::Format(format!("line {lineno}: bad coordinate")))
}

fn parse_resolution(line: &str) -> Option<f64> {
    // REMARK   2 RESOLUTION.    1.70 ANGSTROMS.
    let rest = line.get(10..)?.trim_start();
    let rest = rest.strip_prefix("RESOLUTION.")?;
    rest.split_whitespace().next()?.parse().ok()
}

/// Parses ATOM/HETATM records.
pub fn parse_pdb<R: BufRead>(reader: R) -> Result<Structure> {
    let mut s = Structure::default();
    let mut pending: Option<PendingResidue> = None;
    let mut saw_atoms = false;
    let mut models_seen = 0;

    let flush = |p: PendingResidue, s: &mut Structure| {
        let present = BACKBONE_ATOMS.iter().filter(|a| p.atoms.contains_key(**a)).count();
        // Waters and ligands that happen to carry an O or N are not residues.
        let polymer = p.atoms.contains_key("CA") || AminoAcid::from_three_letter(&p.name).is_some();
        if present == 0 || !polymer {
            return;
        }
        if present < BACKBONE_ATOMS.len() {
            warn!(
                "dropping residue {}{}{} in chain {}: incomplete backbone",
                p.name, p.seq_num, p.icode, p.chain
            );
            s.dropped_residues += 1;
            return;
        }
        let residue = Residue {
            seq_num: p.seq_num,
            icode: p.icode,
            aa: AminoAcid::from_three_letter(&p.name),
            name: p.name,
            atoms: p.atoms,
        };
        match s.chains.iter_mut().find(|c| c.id == p.chain) {
            Some(chain) => {
                let last = chain.residues.last().map(|r| (r.seq_num, r.icode));
                if last.is_some_and(|l| l >= (residue.seq_num, residue.icode)) {
                    warn!(
                        "dropping residue {}{} in chain {}: numbering not increasing",
                        residue.seq_num, residue.icode, chain.id
                    );
                    s.dropped_residues += 1;
                    return;
                }
                chain.residues.push(residue)
            }
            None => s.chains.push(Chain {
                id: p.chain,
                residues: vec![residue],
            }),
        }
    };

    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::Format(format!("line {}: {e}", lineno + 1)))?;
        let record = column(&line, 0..6);
        match record {
            "HEADER" => {
                let id = column(&line, 62..66).trim();
                if !id.is_empty() {
                    s.id = id.to_string();
                }
            }
            "REMARK" if column(&line, 6..10).trim() == "2" => {
                if let Some(r) = parse_resolution(&line) {
                    s.resolution = Some(r);
                }
            }
            "MODEL " => {
                models_seen += 1;
                if models_seen > 1 {
                    break;
                }
            }
            "ENDMDL" => break,
            "ATOM  " | "HETATM" => {
                let name = column(&line, 12..16).trim();
                if !BACKBONE_ATOMS.contains(&name) {
                    continue;
                }
                let alt = column(&line, 16..17).chars().next().unwrap_or(' ');
                let res_name = column(&line, 17..20).trim().to_string();
                let chain = column(&line, 21..22).chars().next().unwrap_or(' ');
                let seq_num: i32 = column(&line, 22..26).trim().parse().map_err(|_| {
                    Error::Format(format!("line {}: bad residue number", lineno + 1))
                })?;
                let icode = column(&line, 26..27).chars().next().unwrap_or(' ');
                let pos = Vec3::new(
                    parse_coord(&line, 30..38, lineno + 1)?,
                    parse_coord(&line, 38..46, lineno + 1)?,
                    parse_coord(&line, 46..54, lineno + 1)?,
                );
                saw_atoms = true;
                let same = pending.as_ref().is_some_and(|p| {
                    p.chain == chain && p.seq_num == seq_num && p.icode == icode && p.name == res_name
                });
                if !same {
                    if let Some(p) = pending.take() {
                        flush(p, &mut s);
                    }
                    pending = Some(PendingResidue {
                        chain,
                        seq_num,
                        icode,
                        name: res_name,
                        atoms: BTreeMap::new(),
                    });
                }
                let p = pending.as_mut().expect("pending residue");
                // First alternate location wins.
                if alt == ' ' || !p.atoms.contains_key(name) {
                    p.atoms.entry(name.to_string()).or_insert(pos);
                }
            }
            _ => {}
        }
    }
    if let Some(p) = pending.take() {
        flush(p, &mut s);
    }
    if !saw_atoms || s.chains.is_empty() {
        return Err(Error::EmptyStructure);
    }
    Ok(s)
}

pub fn parse_pdb_str(text: &str) -> Result<Structure> {
    parse_pdb(text.as_bytes())
}

pub fn read_pdb(path: &std::path::Path) -> Result<Structure> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut s = parse_pdb(std::io::BufReader::new(file))?;
    if s.id.is_empty() {
        if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
            s.id = stem.to_string();
        }
    }
    Ok(s)
}

fn atom_line(
    out: &mut String,
    serial: usize,
    name: &str,
    res_name: &str,
    chain: char,
    seq_num: i32,
    icode: char,
    pos: Vec3,
) {
    let element = &name[..1];
    let _ = writeln!(
        out,
        "ATOM  {:>5} {:<4}{}{:>3} {}{:>4}{}   {:>8.3}{:>8.3}{:>8.3}{:>6.2}{:>6.2}          {:>2}",
        serial % 100_000,
        format!(" {name}"),
        ' ',
        res_name,
        chain,
        seq_num,
        icode,
        pos.x,
        pos.y,
        pos.z,
        1.0,
        0.0,
        element
    );
}

/// Writes a structure's backbone atoms as PDB text.
pub fn write_structure(s: &Structure) -> String {
    let mut out = String::new();
    if !s.id.is_empty() {
        let _ = writeln!(out, "HEADER    {:<52}{:<4}", "", s.id);
    }
    if let Some(r) = s.resolution {
        let _ = writeln!(out, "REMARK   2 RESOLUTION.    {r:.2} ANGSTROMS.");
    }
    let mut serial = 1;
    for chain in &s.chains {
        for r in &chain.residues {
            for name in BACKBONE_ATOMS {
                if let Some(p) = r.atom(name) {
                    atom_line(&mut out, serial, name, &r.name, chain.id, r.seq_num, r.icode, p);
                    serial += 1;
                }
            }
        }
        let _ = writeln!(out, "TER");
    }
    let _ = writeln!(out, "END");
    out
}

/// Writes a backbone as one chain numbered from 1. Unsequenced residues are
/// written as UNK.
pub fn write_backbone(b: &Backbone, chain: char) -> String {
    let mut out = String::new();
    let mut serial = 1;
    for (i, r) in b.residues.iter().enumerate() {
        let name = r.aa.map_or("UNK", |a| a.three_letter());
        for (atom, pos) in BACKBONE_ATOMS.iter().zip(r.atoms()) {
            atom_line(&mut out, serial, atom, name, chain, i as i32 + 1, ' ', pos);
            serial += 1;
        }
    }
    let _ = writeln!(out, "TER");
    let _ = writeln!(out, "END");
    out
}
