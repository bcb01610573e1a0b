//! The 20 canonical amino acids, their index order, and the BLOSUM62 table.
//!
//! Index order is alphabetical by one-letter code (`ACDEFGHIKLMNPQRSTVWY`) and
//! is shared by one-hot encodings, transition matrices and checkpoints.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const NUM_AA: usize = 20;

/// One-letter codes in index order.
pub const AA_ORDER: &str = "ACDEFGHIKLMNPQRSTVWY";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AminoAcid {
    Ala,
    Cys,
    Asp,
    Glu,
    Phe,
    Gly,
    His,
    Ile,
    Lys,
    Leu,
    Met,
    Asn,
    Pro,
    Gln,
    Arg,
    Ser,
    Thr,
    Val,
    Trp,
    Tyr,
}

use AminoAcid::*;

const ALL: [AminoAcid; NUM_AA] = [
    Ala, Cys, Asp, Glu, Phe, Gly, His, Ile, Lys, Leu, Met, Asn, Pro, Gln, Arg, Ser, Thr, Val, Trp,
    Tyr,
];

const THREE: [&str; NUM_AA] = [
    "ALA", "CYS", "ASP", "GLU", "PHE", "GLY", "HIS", "ILE", "LYS", "LEU", "MET", "ASN", "PRO",
    "GLN", "ARG", "SER", "THR", "VAL", "TRP", "TYR",
];

impl AminoAcid {
    pub fn all() -> &'static [AminoAcid; NUM_AA] {
        &ALL
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<AminoAcid> {
        ALL.get(i).copied()
    }

    pub fn one_letter(self) -> char {
        AA_ORDER.as_bytes()[self.index()] as char
    }

    pub fn three_letter(self) -> &'static str {
        THREE[self.index()]
    }

    pub fn from_one_letter(c: char) -> Option<AminoAcid> {
        let c = c.to_ascii_uppercase();
        AA_ORDER.find(c).map(|i| ALL[i])
    }

    /// Residue name lookup; anything outside the canonical 20 is `None`.
    pub fn from_three_letter(name: &str) -> Option<AminoAcid> {
        let name = name.trim();
        THREE
            .iter()
            .position(|t| t.eq_ignore_ascii_case(name))
            .map(|i| ALL[i])
    }
}

/// Parses a one-letter sequence string.
pub fn parse_sequence(s: &str) -> Result<Vec<AminoAcid>> {
    s.chars()
        .map(|c| AminoAcid::from_one_letter(c).ok_or(Error::Alphabet(c)))
        .collect()
}

pub fn sequence_string(seq: &[AminoAcid]) -> String {
    seq.iter().map(|a| a.one_letter()).collect()
}

/// One-hot rows (n x 20), row-major.
pub fn one_hot(seq: &[AminoAcid]) -> Vec<[f64; NUM_AA]> {
    seq.iter()
        .map(|a| {
            let mut row = [0.0; NUM_AA];
            row[a.index()] = 1.0;
            row
        })
        .collect()
}

/// BLOSUM62 substitution scores in `AA_ORDER` index order.
#[rustfmt::skip]
pub const BLOSUM62: [[i32; 20]; 20] = [
    [ 4,  0, -2, -1, -2,  0, -2, -1, -1, -1, -1, -2, -1, -1, -1,  1,  0,  0, -3, -2], // A
    [ 0,  9, -3, -4, -2, -3, -3, -1, -3, -1, -1, -3, -3, -3, -3, -1, -1, -1, -2, -2], // C
    [-2, -3,  6,  2, -3, -1, -1, -3, -1, -4, -3,  1, -1,  0, -2,  0, -1, -3, -4, -3], // D
    [-1, -4,  2,  5, -3, -2,  0, -3,  1, -3, -2,  0, -1,  2,  0,  0, -1, -2, -3, -2], // E
    [-2, -2, -3, -3,  6, -3, -1,  0, -3,  0,  0, -3, -4, -3, -3, -2, -2, -1,  1,  3], // F
    [ 0, -3, -1, -2, -3,  6, -2, -4, -2, -4, -3,  0, -2, -2, -2,  0, -2, -3, -2, -3], // G
    [-2, -3, -1,  0, -1, -2,  8, -3, -1, -3, -2,  1, -2,  0,  0, -1, -2, -3, -2,  2], // H
    [-1, -1, -3, -3,  0, -4, -3,  4, -3,  2,  1, -3, -3, -3, -3, -2, -1,  3, -3, -1], // I
    [-1, -3, -1,  1, -3, -2, -1, -3,  5, -2, -1,  0, -1,  1,  2,  0, -1, -2, -3, -2], // K
    [-1, -1, -4, -3,  0, -4, -3,  2, -2,  4,  2, -3, -3, -2, -2, -2, -1,  1, -2, -1], // L
    [-1, -1, -3, -2,  0, -3, -2,  1, -1,  2,  5, -2, -2,  0, -1, -1, -1,  1, -1, -1], // M
    [-2, -3,  1,  0, -3,  0,  1, -3,  0, -3, -2,  6, -2,  0,  0,  1,  0, -3, -4, -2], // N
    [-1, -3, -1, -1, -4, -2, -2, -3, -1, -3, -2, -2,  7, -1, -2, -1, -1, -2, -4, -3], // P
    [-1, -3,  0,  2, -3, -2,  0, -3,  1, -2,  0,  0, -1,  5,  1,  0, -1, -2, -2, -1], // Q
    [-1, -3, -2,  0, -3, -2,  0, -3,  2, -2, -1,  0, -2,  1,  5, -1, -1, -3, -3, -2], // R
    [ 1, -1,  0,  0, -2,  0, -1, -2,  0, -2, -1,  1, -1,  0, -1,  4,  1, -2, -3, -2], // S
    [ 0, -1, -1, -1, -2, -2, -2, -1, -1, -1, -1,  0, -1, -1, -1,  1,  5,  0, -2, -2], // T
    [ 0, -1, -3, -2, -1, -3, -3,  3, -2,  1,  1, -3, -2, -2, -3, -2,  0,  4, -3, -1], // V
    [-3, -2, -4, -3,  1, -2, -2, -3, -3, -2, -1, -4, -4, -2, -3, -3, -2, -3, 11,  2], // W
    [-2, -2, -3, -2,  3, -3,  2, -1, -2, -1, -1, -2, -3, -1, -2, -2, -2, -1,  2,  7], // Y
];

/// A 20x20 integer substitution matrix in `AA_ORDER` index order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlosumMatrix {
    pub scores: [[i32; NUM_AA]; NUM_AA],
}

impl BlosumMatrix {
    pub fn blosum62() -> Self {
        BlosumMatrix { scores: BLOSUM62 }
    }

    pub fn score(&self, a: AminoAcid, b: AminoAcid) -> i32 {
        self.scores[a.index()][b.index()]
    }

    pub fn is_symmetric(&self) -> bool {
        (0..NUM_AA).all(|i| (0..NUM_AA).all(|j| self.scores[i][j] == self.scores[j][i]))
    }
}

impl Default for BlosumMatrix {
    fn default() -> Self {
        Self::blosum62()
    }
}
