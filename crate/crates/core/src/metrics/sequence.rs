use serde::{Deserialize, Serialize};

use crate::amino::{AminoAcid, BlosumMatrix};
use crate::error::{Error, Result};

pub const DEFAULT_GAP_PENALTY: i32 = 4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlignmentConfig {
    pub substitution: BlosumMatrix,
    /// Linear cost per gap symbol.
    pub gap_penalty: i32,
}

impl Default for AlignmentConfig {
    fn default() -> Self {
        AlignmentConfig {
            substitution: BlosumMatrix::blosum62(),
            gap_penalty: DEFAULT_GAP_PENALTY,
        }
    }
}

impl AlignmentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.gap_penalty < 0 {
            return Err(Error::Config(format!("gap penalty {} < 0", self.gap_penalty)));
        }
        Ok(())
    }

    pub fn describe(&self) -> String {
        format!("BLOSUM62 linear gap {}", self.gap_penalty)
    }
}

pub fn recovery_rate(pred: &[AminoAcid], truth: &[AminoAcid]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::Shape(format!(
            "sequences of length {} and {}",
            pred.len(),
            truth.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::EmptyData("empty sequences".into()));
    }
    let same = pred.iter().zip(truth).filter(|(a, b)| a == b).count();
    Ok(100.0 * same as f64 / truth.len() as f64)
}

/// Global alignment score with a linear gap penalty.
pub fn nw_score(s1: &[AminoAcid], s2: &[AminoAcid], cfg: &AlignmentConfig) -> Result<i64> {
    cfg.validate()?;
    if s1.is_empty() || s2.is_empty() {
        return Err(Error::EmptyData("alignment needs non-empty sequences".into()));
    }
    let g = cfg.gap_penalty as i64;
    let mut prev: Vec<i64> = (0..=s2.len() as i64).map(|j| -g * j).collect();
    let mut cur = vec![0i64; s2.len() + 1];
    for (i, a) in s1.iter().enumerate() {
        cur[0] = -g * (i as i64 + 1);
        for (j, b) in s2.iter().enumerate() {
            let diag = prev[j] + cfg.substitution.score(*a, *b) as i64;
            cur[j + 1] = diag.max(prev[j + 1] - g).max(cur[j] - g);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(prev[s2.len()])
}

/// Alignment score normalized by the reference self-score; may be negative.
pub fn seq_similarity(pred: &[AminoAcid], truth: &[AminoAcid], cfg: &AlignmentConfig) -> Result<f64> {
    let norm = nw_score(truth, truth, cfg)?;
    if norm == 0 {
        return Err(Error::DegenerateNormalizer("reference self-score is 0".into()));
    }
    Ok(nw_score(pred, truth, cfg)? as f64 / norm as f64)
}

/// One minus the mean normalized pairwise alignment score over all ordered
/// pairs. Each pair is normalized by the self-score of its longer member;
/// equal lengths use the larger self-score.
pub fn seq_diversity(set: &[Vec<AminoAcid>], cfg: &AlignmentConfig) -> Result<f64> {
    let n = set.len();
    if n < 2 {
        return Err(Error::EmptyData(format!("diversity needs at least 2 sequences, got {n}")));
    }
    let selfs = set
        .iter()
        .map(|s| nw_score(s, s, cfg))
        .collect::<Result<Vec<_>>>()?;
    if selfs.iter().any(|&s| s == 0) {
        return Err(Error::DegenerateNormalizer("a self-score is 0".into()));
    }
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            let norm = match set[i].len().cmp(&set[j].len()) {
                std::cmp::Ordering::Greater => selfs[i],
                std::cmp::Ordering::Less => selfs[j],
                std::cmp::Ordering::Equal => selfs[i].max(selfs[j]),
            };
            let score = if i == j { selfs[i] } else { nw_score(&set[i], &set[j], cfg)? };
            total += score as f64 / norm as f64;
        }
    }
    Ok(1.0 - total / (n * n) as f64)
}
