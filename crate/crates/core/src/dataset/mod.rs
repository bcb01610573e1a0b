//! Complex preparation: filtering, pocket detection, ext-k expansion and
//! example serialization.

pub mod pdb;
mod split;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::amino::{self, AminoAcid, AA_ORDER, NUM_AA};
use crate::error::{Error, Result};
use crate::geom::{self, AngleRow, Backbone, InternalCoords, Vec3};

pub use pdb::{parse_pdb, parse_pdb_str, read_pdb, Chain, Residue, Structure};
pub use split::{split_dataset, Split};

pub const POCKET_CUTOFF: f64 = 5.0;
pub const MAX_RESOLUTION: f64 = 5.0;
pub const MIN_PEPTIDE_LEN: usize = 5;
pub const MAX_PEPTIDE_LEN: usize = 30;
pub const MAX_EXT_K: usize = 4;

/// Receptor residue provenance, ordered by (chain, seq_num, icode).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct ResidueId {
    pub chain: char,
    pub seq_num: i32,
    pub icode: char,
}

impl ResidueId {
    pub fn new(chain: char, seq_num: i32) -> Self {
        ResidueId {
            chain,
            seq_num,
            icode: ' ',
        }
    }

    fn of(chain: &Chain, r: &Residue) -> Self {
        ResidueId {
            chain: chain.id,
            seq_num: r.seq_num,
            icode: r.icode,
        }
    }
}

impl fmt::Display for ResidueId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.icode == ' ' {
            write!(f, "{}:{}", self.chain, self.seq_num)
        } else {
            write!(f, "{}:{}{}", self.chain, self.seq_num, self.icode)
        }
    }
}

impl FromStr for ResidueId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Format(format!("bad residue id {s:?}"));
        let (chain, rest) = s.split_once(':').ok_or_else(bad)?;
        let mut chars = chain.chars();
        let chain = chars.next().ok_or_else(bad)?;
        if chars.next().is_some() {
            return Err(bad());
        }
        let (num, icode) = match rest.chars().last() {
            Some(c) if c.is_ascii_alphabetic() => (&rest[..rest.len() - 1], c),
            _ => (rest, ' '),
        };
        Ok(ResidueId {
            chain,
            seq_num: num.parse().map_err(|_| bad())?,
            icode,
        })
    }
}

impl From<ResidueId> for String {
    fn from(id: ResidueId) -> String {
        id.to_string()
    }
}

impl TryFrom<String> for ResidueId {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    Resolution,
    Length,
    UnknownResidue,
}

impl RejectReason {
    pub fn as_str(self) -> &'static str {
        match self {
            RejectReason::Resolution => "resolution",
            RejectReason::Length => "length",
            RejectReason::UnknownResidue => "unknown_residue",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FilterVerdict {
    pub reasons: Vec<RejectReason>,
}

impl FilterVerdict {
    pub fn accepted(&self) -> bool {
        self.reasons.is_empty()
    }

    pub fn reason(&self) -> String {
        self.reasons
            .iter()
            .map(|r| r.as_str())
            .collect::<Vec<_>>()
            .join(",")
    }
}

/// Applies the resolution, peptide-length and unknown-residue rules. All
/// violated rules are reported.
pub fn filter_complex(s: &Structure, peptide_chain: char) -> Result<FilterVerdict> {
    let peptide = s.chain(peptide_chain)?;
    let mut reasons = Vec::new();
    if s.resolution.is_some_and(|r| r > MAX_RESOLUTION) {
        reasons.push(RejectReason::Resolution);
    }
    let len = peptide.residues.len();
    if !(MIN_PEPTIDE_LEN..=MAX_PEPTIDE_LEN).contains(&len) {
        reasons.push(RejectReason::Length);
    }
    if s.chains.iter().flat_map(|c| &c.residues).any(|r| r.aa.is_none()) {
        reasons.push(RejectReason::UnknownResidue);
    }
    Ok(FilterVerdict { reasons })
}

/// Receptor residues with any backbone atom strictly within `cutoff` of a
/// peptide backbone atom. Every chain other than the peptide is receptor.
pub fn find_pocket(s: &Structure, peptide_chain: char, cutoff: f64) -> Result<Vec<ResidueId>> {
    let receptor: Vec<char> = s
        .chains
        .iter()
        .map(|c| c.id)
        .filter(|&c| c != peptide_chain)
        .collect();
    find_pocket_among(s, peptide_chain, &receptor, cutoff)
}

pub fn find_pocket_among(
    s: &Structure,
    peptide_chain: char,
    receptor_chains: &[char],
    cutoff: f64,
) -> Result<Vec<ResidueId>> {
    if !(cutoff > 0.0) {
        return Err(Error::InvalidValue(format!("pocket cutoff {cutoff}")));
    }
    let peptide_atoms: Vec<Vec3> = s
        .chain(peptide_chain)?
        .residues
        .iter()
        .flat_map(|r| r.backbone_atoms())
        .collect();
    let mut out = BTreeSet::new();
    for &cid in receptor_chains {
        if cid == peptide_chain {
            continue;
        }
        let chain = s.chain(cid)?;
        for r in &chain.residues {
            let hit = r.backbone_atoms().iter().any(|a| {
                peptide_atoms.iter().any(|p| a.distance(*p) < cutoff)
            });
            if hit {
                out.insert(ResidueId::of(chain, r));
            }
        }
    }
    if out.is_empty() {
        return Err(Error::EmptyPocket);
    }
    Ok(out.into_iter().collect())
}

/// Adds sequence neighbours at offsets +-1..=+-k within each residue's chain,
/// clipped at chain ends.
pub fn extend_pocket(pocket: &[ResidueId], k: usize, s: &Structure) -> Vec<ResidueId> {
    let mut out: BTreeSet<ResidueId> = pocket.iter().copied().collect();
    if k == 0 {
        return out.into_iter().collect();
    }
    for id in pocket {
        let Ok(chain) = s.chain(id.chain) else { continue };
        let Some(i) = chain.position(id.seq_num, id.icode) else { continue };
        let lo = i.saturating_sub(k);
        let hi = (i + k).min(chain.residues.len() - 1);
        for j in lo..=hi {
            out.insert(ResidueId::of(chain, &chain.residues[j]));
        }
    }
    out.into_iter().collect()
}

/// Pocket residues: angle rows, residue types and provenance, row-aligned.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PocketRepr {
    pub angles: Vec<AngleRow>,
    /// One-letter codes, one per row.
    pub aa: String,
    pub ids: Vec<ResidueId>,
}

impl PocketRepr {
    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    pub fn residues(&self) -> Result<Vec<AminoAcid>> {
        amino::parse_sequence(&self.aa)
    }

    pub fn one_hot(&self) -> Result<Vec<[f64; NUM_AA]>> {
        Ok(amino::one_hot(&self.residues()?))
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.angles.len();
        if self.aa.chars().count() != m || self.ids.len() != m {
            return Err(Error::Shape(format!(
                "pocket rows disagree: {} angles, {} types, {} ids",
                m,
                self.aa.chars().count(),
                self.ids.len()
            )));
        }
        self.residues()?;
        Ok(())
    }

    /// The same pocket with rows reordered by `perm`.
    pub fn permuted(&self, perm: &[usize]) -> PocketRepr {
        let aa: Vec<char> = self.aa.chars().collect();
        PocketRepr {
            angles: perm.iter().map(|&i| self.angles[i]).collect(),
            aa: perm.iter().map(|&i| aa[i]).collect(),
            ids: perm.iter().map(|&i| self.ids[i]).collect(),
        }
    }
}

/// Pocket angle rows for `ids`. A residue gets a row only when both chain
/// neighbours exist and are bonded; others are dropped.
pub fn pocket_repr(s: &Structure, ids: &[ResidueId]) -> Result<PocketRepr> {
    let mut angles = Vec::new();
    let mut aa = String::new();
    let mut kept = Vec::new();
    for id in ids {
        let chain = s.chain(id.chain)?;
        let Some(i) = chain.position(id.seq_num, id.icode) else { continue };
        if i == 0 || i + 1 >= chain.residues.len() || !chain.bonded(i) || !chain.bonded(i + 1) {
            continue;
        }
        let Some(code) = chain.residues[i].aa else { continue };
        let row = geom::angle_row(&chain.residues[i - 1].backbone(), &chain.residues[i].backbone());
        if let Ok(row) = row {
            angles.push(row);
            aa.push(code.one_letter());
            kept.push(*id);
        }
    }
    if angles.is_empty() {
        return Err(Error::EmptyPocket);
    }
    Ok(PocketRepr {
        angles,
        aa,
        ids: kept,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComplexSpec {
    pub pdb_id: String,
    pub receptor_chains: Vec<char>,
    pub peptide_chain: char,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExampleMeta {
    pub pdb_id: String,
    pub receptor_chains: String,
    pub peptide_chain: char,
    pub ext_k: usize,
    pub resolution: Option<f64>,
    pub aa_order: String,
}

/// Peptide angles with the residue types of the same (interior) residues.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeptideRepr {
    pub angles: Vec<AngleRow>,
    pub seq: String,
    pub backbone: Backbone,
}

impl PeptideRepr {
    pub fn internal(&self) -> InternalCoords {
        InternalCoords {
            rows: self.angles.clone(),
            source_length: self.backbone.len(),
        }
    }

    pub fn residues(&self) -> Result<Vec<AminoAcid>> {
        amino::parse_sequence(&self.seq)
    }

    pub fn one_hot(&self) -> Result<Vec<[f64; NUM_AA]>> {
        Ok(amino::one_hot(&self.residues()?))
    }

    /// Native backbone of the residues that carry angle rows.
    pub fn interior(&self) -> Backbone {
        self.backbone.slice(1..self.backbone.len() - 1)
    }
}

/// Backbone atoms of a contact-site residue (the unextended pocket).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SiteResidue {
    pub id: ResidueId,
    pub atoms: [Vec3; 4],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexExample {
    pub meta: ExampleMeta,
    pub peptide: PeptideRepr,
    pub pocket: PocketRepr,
    pub site: Vec<SiteResidue>,
}

impl ComplexExample {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ex: ComplexExample = serde_json::from_str(text)?;
        if ex.meta.aa_order != AA_ORDER {
            return Err(Error::Format(format!(
                "example {} uses amino-acid order {}",
                ex.meta.pdb_id, ex.meta.aa_order
            )));
        }
        ex.pocket.validate()?;
        Ok(ex)
    }

    pub fn file_name(&self) -> String {
        format!("{}.example.json", self.meta.pdb_id)
    }
}

/// Filters, finds and extends the pocket, and extracts angles for both
/// partners.
pub fn build_example(s: &Structure, spec: &ComplexSpec, ext_k: usize) -> Result<ComplexExample> {
    if ext_k > MAX_EXT_K {
        return Err(Error::Config(format!("ext_k {ext_k} outside 0..={MAX_EXT_K}")));
    }
    let verdict = filter_complex(s, spec.peptide_chain)?;
    if !verdict.accepted() {
        return Err(Error::Rejected(verdict.reason()));
    }
    let receptor: Vec<char> = if spec.receptor_chains.is_empty() {
        s.chains
            .iter()
            .map(|c| c.id)
            .filter(|&c| c != spec.peptide_chain)
            .collect()
    } else {
        spec.receptor_chains.clone()
    };
    let peptide_chain = s.chain(spec.peptide_chain)?;
    let backbone = peptide_chain.backbone();
    let ic = geom::extract_internal(&backbone)?;
    let seq: String = peptide_chain.residues[1..peptide_chain.residues.len() - 1]
        .iter()
        .map(|r| r.aa.map_or('X', AminoAcid::one_letter))
        .collect();

    let core = find_pocket_among(s, spec.peptide_chain, &receptor, POCKET_CUTOFF)?;
    let extended = extend_pocket(&core, ext_k, s);
    let pocket = pocket_repr(s, &extended)?;
    let site = core
        .iter()
        .map(|id| {
            let chain = s.chain(id.chain)?;
            let i = chain
                .position(id.seq_num, id.icode)
                .ok_or_else(|| Error::State(format!("pocket residue {id} vanished")))?;
            Ok(SiteResidue {
                id: *id,
                atoms: chain.residues[i].backbone_atoms(),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(ComplexExample {
        meta: ExampleMeta {
            pdb_id: spec.pdb_id.clone(),
            receptor_chains: receptor.iter().collect(),
            peptide_chain: spec.peptide_chain,
            ext_k,
            resolution: s.resolution,
            aa_order: AA_ORDER.to_string(),
        },
        peptide: PeptideRepr {
            angles: ic.rows,
            seq,
            backbone,
        },
        pocket,
        site,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{build_ideal_backbone, BackboneResidue};
    use std::collections::BTreeMap;
    use std::f64::consts::PI;

    fn residue_from(b: &BackboneResidue, seq_num: i32, aa: AminoAcid) -> Residue {
        let mut atoms = BTreeMap::new();
        atoms.insert("N".to_string(), b.n);
        atoms.insert("CA".to_string(), b.ca);
        atoms.insert("C".to_string(), b.c);
        atoms.insert("O".to_string(), b.o);
        Residue {
            seq_num,
            icode: ' ',
            name: aa.three_letter().to_string(),
            aa: Some(aa),
            atoms,
        }
    }

    fn chain_from(id: char, bb: &Backbone, offset: Vec3) -> Chain {
        let aas = AminoAcid::all();
        Chain {
            id,
            residues: bb
                .residues
                .iter()
                .enumerate()
                .map(|(i, r)| {
                    let moved = BackboneResidue {
                        n: r.n + offset,
                        ca: r.ca + offset,
                        c: r.c + offset,
                        o: r.o + offset,
                        aa: r.aa,
                    };
                    residue_from(&moved, i as i32 + 1, aas[i % 20])
                })
                .collect(),
        }
    }

    fn helix(n: usize) -> Backbone {
        build_ideal_backbone(&vec![(-57f64.to_radians(), -47f64.to_radians(), PI); n]).unwrap()
    }

    fn strand(n: usize) -> Backbone {
        build_ideal_backbone(&vec![(-120f64.to_radians(), 130f64.to_radians(), PI); n]).unwrap()
    }

    /// A 12-residue helical peptide next to a 20-residue receptor strand.
    fn toy_complex(gap: f64) -> Structure {
        Structure {
            id: "TOY1".into(),
            resolution: Some(2.0),
            chains: vec![
                chain_from('A', &strand(20), Vec3::new(0.0, gap, 0.0)),
                chain_from('P', &helix(12), Vec3::default()),
            ],
            dropped_residues: 0,
        }
    }

    fn brute_force_pocket(s: &Structure, pep: char, cutoff: f64) -> Vec<ResidueId> {
        let mut out = Vec::new();
        let p = s.chain(pep).unwrap();
        for c in s.chains.iter().filter(|c| c.id != pep) {
            for r in &c.residues {
                let mut hit = false;
                for a in r.atoms.values() {
                    for pr in &p.residues {
                        for b in pr.atoms.values() {
                            let d = ((a.x - b.x).powi(2) + (a.y - b.y).powi(2) + (a.z - b.z).powi(2)).sqrt();
                            hit |= d < cutoff;
                        }
                    }
                }
                if hit {
                    out.push(ResidueId::new(c.id, r.seq_num));
                }
            }
        }
        out.sort();
        out
    }

    #[test]
    fn filter_rules() {
        let mut s = toy_complex(6.0);
        assert!(filter_complex(&s, 'P').unwrap().accepted());
        s.resolution = Some(5.5);
        assert_eq!(filter_complex(&s, 'P').unwrap().reasons, vec![RejectReason::Resolution]);
        s.resolution = Some(2.0);
        s.chains[1].residues.truncate(4);
        assert_eq!(filter_complex(&s, 'P').unwrap().reasons, vec![RejectReason::Length]);
        s.resolution = Some(9.0);
        s.chains[0].residues[3].aa = None;
        let v = filter_complex(&s, 'P').unwrap();
        assert_eq!(v.reason(), "resolution,length,unknown_residue");
        assert!(matches!(filter_complex(&s, 'Q'), Err(Error::ChainNotFound('Q'))));
    }

    #[test]
    fn pocket_matches_all_pairs_oracle() {
        for gap in [4.0, 6.0, 8.0, 10.0] {
            let s = toy_complex(gap);
            match find_pocket(&s, 'P', POCKET_CUTOFF) {
                Ok(p) => assert_eq!(p, brute_force_pocket(&s, 'P', POCKET_CUTOFF)),
                Err(Error::EmptyPocket) => assert!(brute_force_pocket(&s, 'P', 5.0).is_empty()),
                Err(e) => panic!("{e}"),
            }
        }
    }

    #[test]
    fn three_contacts_by_construction() {
        // Receptor: three isolated residues 4.9 A above peptide N atoms, plus
        // far away decoys.
        let pep = helix(8);
        let mut receptor = Chain { id: 'R', residues: vec![] };
        let template = strand(3).residues[1];
        let up = Vec3::new(0.0, 0.0, 1.0);
        let far = Vec3::new(100.0, 0.0, 0.0);
        for (k, idx) in [1usize, 3, 5].iter().enumerate() {
            // Put CA exactly 4.9 A from the peptide N along a direction that
            // keeps every other receptor atom further away.
            let n = pep.residues[*idx].n;
            let shift = n + up * 20.0 - template.ca;
            let mut r = BackboneResidue {
                n: template.n + shift,
                ca: template.ca + shift,
                c: template.c + shift,
                o: template.o + shift,
                aa: None,
            };
            // Slide down until the closest receptor atom is at 4.9 A.
            let closest = |r: &BackboneResidue| {
                r.atoms()
                    .iter()
                    .flat_map(|a| pep.atom_positions().into_iter().map(move |p| a.distance(p)))
                    .fold(f64::INFINITY, f64::min)
            };
            let mut lo = 0.0;
            let mut hi = 20.0;
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                let trial = BackboneResidue {
                    n: r.n - up * mid,
                    ca: r.ca - up * mid,
                    c: r.c - up * mid,
                    o: r.o - up * mid,
                    aa: None,
                };
                if closest(&trial) > 4.9 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            r = BackboneResidue {
                n: r.n - up * lo,
                ca: r.ca - up * lo,
                c: r.c - up * lo,
                o: r.o - up * lo,
                aa: None,
            };
            receptor.residues.push(residue_from(&r, 10 * (k as i32 + 1), AminoAcid::Leu));
            let decoy = BackboneResidue {
                n: r.n + far,
                ca: r.ca + far,
                c: r.c + far,
                o: r.o + far,
                aa: None,
            };
            receptor.residues.push(residue_from(&decoy, 10 * (k as i32 + 1) + 5, AminoAcid::Gly));
        }
        let s = Structure {
            id: "CON3".into(),
            resolution: None,
            chains: vec![receptor, chain_from('P', &pep, Vec3::default())],
            dropped_residues: 0,
        };
        let got = find_pocket(&s, 'P', POCKET_CUTOFF).unwrap();
        assert_eq!(got, brute_force_pocket(&s, 'P', POCKET_CUTOFF));
        assert_eq!(
            got,
            vec![ResidueId::new('R', 10), ResidueId::new('R', 20), ResidueId::new('R', 30)]
        );
    }

    #[test]
    fn far_receptor_gives_empty_pocket() {
        let s = toy_complex(25.0);
        assert!(matches!(find_pocket(&s, 'P', POCKET_CUTOFF), Err(Error::EmptyPocket)));
        assert!(find_pocket(&s, 'P', 0.0).is_err());
    }

    #[test]
    fn extension_counts() {
        let s = toy_complex(6.0);
        let mid = vec![ResidueId::new('A', 10)];
        assert_eq!(extend_pocket(&mid, 0, &s), mid);
        assert_eq!(extend_pocket(&mid, 4, &s).len(), 9);
        let first = vec![ResidueId::new('A', 1)];
        assert_eq!(extend_pocket(&first, 4, &s).len(), 5);
        let second = vec![ResidueId::new('A', 2)];
        assert_eq!(extend_pocket(&second, 4, &s).len(), 6);
    }

    #[test]
    fn example_bookkeeping() {
        let s = toy_complex(6.0);
        let spec = ComplexSpec {
            pdb_id: "TOY1".into(),
            receptor_chains: vec!['A'],
            peptide_chain: 'P',
        };
        let e0 = build_example(&s, &spec, 0).unwrap();
        let e4 = build_example(&s, &spec, 4).unwrap();
        assert!(e4.pocket.len() >= e0.pocket.len());
        assert_eq!(e0.peptide.angles.len(), 10);
        assert_eq!(e0.peptide.seq.len(), 10);
        for row in e0.peptide.one_hot().unwrap() {
            assert_eq!(row.iter().sum::<f64>(), 1.0);
        }
        // Rows exist for every extended residue except chain termini.
        let ext = extend_pocket(&find_pocket(&s, 'P', 5.0).unwrap(), 4, &s);
        let interior = ext.iter().filter(|id| id.seq_num > 1 && id.seq_num < 20).count();
        assert_eq!(e4.pocket.len(), interior);
        let text = e4.to_json().unwrap();
        assert_eq!(ComplexExample::from_json(&text).unwrap(), e4);
    }

    #[test]
    fn residue_id_text_roundtrip() {
        for id in [ResidueId::new('A', -3), ResidueId { chain: 'B', seq_num: 52, icode: 'A' }] {
            assert_eq!(id.to_string().parse::<ResidueId>().unwrap(), id);
        }
        assert!("AB:1".parse::<ResidueId>().is_err());
    }

    proptest::proptest! {
        #[test]
        fn pocket_grows_with_cutoff(gap in 3.0f64..12.0, r1 in 2.0f64..8.0, dr in 0.0f64..4.0) {
            let s = toy_complex(gap);
            let small = find_pocket(&s, 'P', r1).unwrap_or_default();
            let large = find_pocket(&s, 'P', r1 + dr).unwrap_or_default();
            proptest::prop_assert!(small.iter().all(|id| large.contains(id)));
        }

        #[test]
        fn extension_is_monotone(k in 0usize..4, seed in 1i32..20) {
            let s = toy_complex(6.0);
            let ids = vec![ResidueId::new('A', seed)];
            let a = extend_pocket(&ids, k, &s);
            let b = extend_pocket(&ids, k + 1, &s);
            proptest::prop_assert!(a.iter().all(|id| b.contains(id)));
            proptest::prop_assert_eq!(extend_pocket(&a, 0, &s), a);
        }
    }
}
