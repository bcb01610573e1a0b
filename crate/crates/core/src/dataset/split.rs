use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub seed: u64,
    pub ratios: [f64; 3],
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
}

impl Split {
    pub fn total(&self) -> usize {
        self.train.len() + self.val.len() + self.test.len()
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Disjoint train/val/test partition of unique ids. Sizes follow the
/// largest-remainder rule, so each is within one element of its exact share.
pub fn split_dataset(ids: &[String], ratios: [f64; 3], seed: u64) -> Result<Split> {
    if ratios.iter().any(|r| !(r.is_finite() && *r >= 0.0)) || (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidValue(format!("split ratios {ratios:?} must be nonnegative and sum to 1")));
    }
    let mut unique: Vec<String> = ids.to_vec();
    unique.sort();
    unique.dedup();
    let n = unique.len();
    let parts = ratios.iter().filter(|r| **r > 0.0).count();
    if n < parts {
        return Err(Error::Size(format!("{n} examples cannot fill {parts} partitions")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    unique.shuffle(&mut rng);

    let exact: Vec<f64> = ratios.iter().map(|r| r * n as f64).collect();
    let mut sizes: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
    let mut order: Vec<usize> = (0..3).collect();
    // Stable sort keeps train before val before test on equal remainders.
    order.sort_by(|&i, &j| (exact[j] - exact[j].floor()).total_cmp(&(exact[i] - exact[i].floor())));
    let mut left = n - sizes.iter().sum::<usize>();
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        sizes[i] += 1;
        left -= 1;
    }

    let take = |k: usize, from: &mut Vec<String>| {
        let mut part: Vec<String> = from.drain(..k).collect();
        part.sort();
        part
    };
    let train = take(sizes[0], &mut unique);
    let val = take(sizes[1], &mut unique);
    let test = take(sizes[2], &mut unique);
    Ok(Split {
        seed,
        ratios,
        train,
        val,
        test,
    })
}
