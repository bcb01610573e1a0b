//! FASTA shuffling and the reconstruction diagnostic.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::Structure;
use crate::error::{Error, Result};
use crate::metrics::{roundtrip_rmsd, RoundtripReport};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FastaRecord {
    pub header: String,
    pub sequence: String,
}

pub fn parse_fasta(text: &str) -> Result<Vec<FastaRecord>> {
    let mut out: Vec<FastaRecord> = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(h) = line.strip_prefix('>') {
            out.push(FastaRecord {
                header: h.to_string(),
                sequence: String::new(),
            });
        } else {
            let rec = out
                .last_mut()
                .ok_or_else(|| Error::Format(format!("FASTA line {} precedes any header", no + 1)))?;
            if let Some(c) = line.chars().find(|c| !c.is_ascii_alphabetic() && *c != '*' && *c != '-') {
                return Err(Error::Format(format!("FASTA line {}: unexpected {c:?}", no + 1)));
            }
            rec.sequence.push_str(line);
        }
    }
    Ok(out)
}

pub fn write_fasta(records: &[FastaRecord]) -> String {
    let mut s = String::new();
    for r in records {
        let _ = writeln!(s, ">{}\n{}", r.header, r.sequence);
    }
    s
}

/// Uniform per-record permutation of the letters, one seeded stream for the
/// whole file.
pub fn shuffle_records(records: &[FastaRecord], seed: u64) -> Vec<FastaRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    records
        .iter()
        .map(|r| {
            let mut chars: Vec<char> = r.sequence.chars().collect();
            chars.shuffle(&mut rng);
            FastaRecord {
                header: r.header.clone(),
                sequence: chars.into_iter().collect(),
            }
        })
        .collect()
}

/// Round-trip RMSDs for each chain with at least three residues, or for
/// one chain when given.
pub fn roundtrip_chains(s: &Structure, chain: Option<char>) -> Result<Vec<(char, RoundtripReport)>> {
    let chains: Vec<_> = match chain {
        Some(c) => vec![s.chain(c)?],
        None => s.chains.iter().filter(|c| c.residues.len() >= 3).collect(),
    };
    chains
        .into_iter()
        .map(|c| {
            // Only the leading bonded run is a single backbone.
            let end = (1..c.residues.len()).find(|&i| !c.bonded(i)).unwrap_or(c.residues.len());
            let b = c.backbone().slice(0..end);
            Ok((c.id, roundtrip_rmsd(&b)?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shuffle_keeps_letters() {
        let recs = parse_fasta(">a|5|1\nACDEF\nGH\n>b\nWWY\n").unwrap();
        assert_eq!(recs[0].sequence, "ACDEFGH");
        let sh = shuffle_records(&recs, 9);
        assert_eq!(sh, shuffle_records(&recs, 9));
        for (a, b) in recs.iter().zip(&sh) {
            let mut x: Vec<char> = a.sequence.chars().collect();
            let mut y: Vec<char> = b.sequence.chars().collect();
            x.sort();
            y.sort();
            assert_eq!(x, y);
            assert_eq!(a.header, b.header);
        }
        assert_eq!(parse_fasta(&write_fasta(&recs)).unwrap(), recs);
        assert!(parse_fasta("ACD\n").is_err());
    }
}
