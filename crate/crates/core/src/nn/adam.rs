use serde::{Deserialize, Serialize};

use super::params::ModelParams;
use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub lr: f64,
    pub betas: [f64; 2],
    pub eps: f64,
    /// Global gradient-norm clip; 0 disables.
    pub clip_norm: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            betas: [0.9, 0.999],
            eps: 1e-8,
            clip_norm: 1.0,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lr > 0.0
            && self.lr.is_finite()
            && self.betas.iter().all(|b| (0.0..1.0).contains(b))
            && self.eps > 0.0
            && self.clip_norm >= 0.0;
        if !ok {
            return Err(Error::Config(format!("optimizer settings {self:?}")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
}

impl AdamState {
    pub fn new(params: &ModelParams) -> Self {
        AdamState {
            step: 0,
            m: params.values.iter().map(|t| Tensor::zeros(&t.shape)).collect(),
            v: params.values.iter().map(|t| Tensor::zeros(&t.shape)).collect(),
        }
    }
}

/// One bias-corrected Adam update from the gradients stored in `params`.
pub fn adam_step(params: &mut ModelParams, state: &mut AdamState, cfg: &AdamConfig) -> Result<()> {
    if params.grads.iter().any(|g| !g.is_finite()) {
        return Err(Error::Divergence("non-finite gradient".into()));
    }
    if cfg.clip_norm > 0.0 {
        let norm = params.grad_norm();
        if norm > cfg.clip_norm {
            params.scale_grads(cfg.clip_norm / norm);
        }
    }
    state.step += 1;
    let [b1, b2] = cfg.betas;
    let c1 = 1.0 - b1.powi(state.step as i32);
    let c2 = 1.0 - b2.powi(state.step as i32);
    for ((w, g), (m, v)) in params
        .values
        .iter_mut()
        .zip(&params.grads)
        .zip(state.m.iter_mut().zip(state.v.iter_mut()))
    {
        for i in 0..w.data.len() {
            let gi = g.data[i];
            m.data[i] = b1 * m.data[i] + (1.0 - b1) * gi;
            v.data[i] = b2 * v.data[i] + (1.0 - b2) * gi * gi;
            let mh = m.data[i] / c1;
            let vh = v.data[i] / c2;
            w.data[i] -= cfg.lr * mh / (vh.sqrt() + cfg.eps);
        }
    }
    if params.values.iter().any(|w| !w.is_finite()) {
        return Err(Error::Divergence("non-finite parameter after update".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> ModelParams {
        let mut p = ModelParams::new();
        p.insert("x", Tensor::full(&[1, 1], v)).unwrap();
        p
    }

    fn no_clip() -> AdamConfig {
        AdamConfig {
            clip_norm: 0.0,
            ..Default::default()
        }
    }

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        let mut p = scalar(0.7);
        let mut s = AdamState::new(&p);
        for _ in 0..10 {
            adam_step(&mut p, &mut s, &no_clip()).unwrap();
        }
        assert_eq!(p.get("x").unwrap().data[0], 0.7);
    }

    #[test]
    fn single_step_by_hand() {
        let cfg = AdamConfig {
            lr: 0.01,
            betas: [0.9, 0.999],
            eps: 1e-8,
            clip_norm: 0.0,
        };
        let mut p = scalar(1.0);
        p.grads[0].data[0] = 0.5;
        let mut s = AdamState::new(&p);
        adam_step(&mut p, &mut s, &cfg).unwrap();
        // m_hat = g and v_hat = g^2 after one step.
        let expected = 1.0 - 0.01 * 0.5 / (0.5 + 1e-8);
        assert!((p.get("x").unwrap().data[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn constant_gradient_moves_by_lr() {
        let cfg = no_clip();
        let mut p = scalar(0.0);
        let mut s = AdamState::new(&p);
        let mut last = 0.0;
        for _ in 0..2000 {
            p.grads[0].data[0] = -3.0;
            adam_step(&mut p, &mut s, &cfg).unwrap();
            let x = p.get("x").unwrap().data[0];
            let step = x - last;
            last = x;
            assert!((step - cfg.lr).abs() < 1e-6 * cfg.lr + 1e-12);
        }
    }

    #[test]
    fn non_finite_gradient_diverges() {
        let mut p = scalar(0.0);
        p.grads[0].data[0] = f64::NAN;
        let mut s = AdamState::new(&p);
        assert!(matches!(adam_step(&mut p, &mut s, &no_clip()), Err(Error::Divergence(_))));
    }
}
