use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const BETA_MIN: f64 = 1e-5;
pub const BETA_MAX: f64 = 0.999;
const COSINE_OFFSET: f64 = 0.008;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    Cosine,
}

/// Per-step coefficients; index `t` runs over `1..=steps`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSchedule {
    pub kind: ScheduleKind,
    pub steps: usize,
    betas: Vec<f64>,
    alphabars: Vec<f64>,
}

impl NoiseSchedule {
    pub fn beta(&self, t: usize) -> f64 {
        self.betas[t - 1]
    }

    pub fn alpha(&self, t: usize) -> f64 {
        1.0 - self.betas[t - 1]
    }

    /// `alphabar(0) == 1`.
    pub fn alphabar(&self, t: usize) -> f64 {
        if t == 0 {
            1.0
        } else {
            self.alphabars[t - 1]
        }
    }

    pub fn check_step(&self, t: usize) -> Result<()> {
        if t == 0 || t > self.steps {
            return Err(Error::Range(format!("step {t} outside 1..={}", self.steps)));
        }
        Ok(())
    }
}

/// Cosine alphabar schedule with betas clipped to [BETA_MIN, BETA_MAX];
/// alphabar is the running product of the clipped alphas.
pub fn cosine_schedule(steps: usize) -> Result<NoiseSchedule> {
    if steps < 2 {
        return Err(Error::Config(format!("schedule needs at least 2 steps, got {steps}")));
    }
    let f = |t: usize| {
        let x = (t as f64 / steps as f64 + COSINE_OFFSET) / (1.0 + COSINE_OFFSET) * PI / 2.0;
        x.cos().powi(2)
    };
    let betas: Vec<f64> = (1..=steps)
        .map(|t| (1.0 - f(t) / f(t - 1)).clamp(BETA_MIN, BETA_MAX))
        .collect();
    let mut alphabars = Vec::with_capacity(steps);
    let mut acc = 1.0;
    for b in &betas {
        acc *= 1.0 - b;
        alphabars.push(acc);
    }
    Ok(NoiseSchedule {
        kind: ScheduleKind::Cosine,
        steps,
        betas,
        alphabars,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn invariants_hold() {
        for steps in [2, 3, 20, 100, 1000] {
            let s = cosine_schedule(steps).unwrap();
            assert!(s.alphabar(steps) < 0.01);
            for t in 1..=steps {
                assert!(s.beta(t) >= BETA_MIN && s.beta(t) <= BETA_MAX);
                assert!(s.beta(t) > 0.0 && s.beta(t) < 1.0);
                if t > 1 {
                    assert!(s.beta(t) >= s.beta(t - 1));
                    assert!(s.alphabar(t) < s.alphabar(t - 1));
                }
            }
        }
    }

    #[test]
    fn alphabar_is_running_product() {
        let s = cosine_schedule(100).unwrap();
        for t in 1..=100 {
            let p: f64 = (1..=t).map(|k| s.alpha(k)).product();
            assert!((p - s.alphabar(t)).abs() < 1e-15);
        }
    }

    #[test]
    fn too_few_steps() {
        assert!(matches!(cosine_schedule(1), Err(Error::Config(_))));
    }
}
