//! Discrete diffusion over amino-acid types with BLOSUM-derived
//! transitions. Distributions are row vectors: `a_t = a_{t-1} Q_t`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::schedule::NoiseSchedule;
use crate::amino::{BlosumMatrix, NUM_AA};
use crate::error::{Error, Result};
use crate::nn::Tensor;

pub const LOG_EPS: f64 = 1e-10;
pub const DEFAULT_TEMPERATURE: f64 = 5.0;

/// Dense k x k matrix, row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SquareMatrix {
    pub k: usize,
    pub data: Vec<f64>,
}

impl SquareMatrix {
    pub fn identity(k: usize) -> Self {
        let mut data = vec![0.0; k * k];
        for i in 0..k {
            data[i * k + i] = 1.0;
        }
        SquareMatrix { k, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let k = rows.len();
        if k == 0 || rows.iter().any(|r| r.len() != k) {
            return Err(Error::Shape("matrix rows must be square and non-empty".into()));
        }
        Ok(SquareMatrix { k, data: rows.concat() })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.k + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.k..(i + 1) * self.k]
    }

    pub fn matmul(&self, o: &SquareMatrix) -> SquareMatrix {
        let k = self.k;
        let mut data = vec![0.0; k * k];
        for i in 0..k {
            for l in 0..k {
                let a = self.data[i * k + l];
                if a == 0.0 {
                    continue;
                }
                for j in 0..k {
                    data[i * k + j] += a * o.data[l * k + j];
                }
            }
        }
        SquareMatrix { k, data }
    }

    /// Row vector times matrix.
    pub fn left_mul(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.k];
        for (i, &vi) in v.iter().enumerate() {
            for (o, m) in out.iter_mut().zip(self.row(i)) {
                *o += vi * m;
            }
        }
        out
    }

    pub fn is_row_stochastic(&self, tol: f64) -> bool {
        (0..self.k).all(|i| {
            let r = self.row(i);
            r.iter().all(|&x| x >= 0.0) && (r.iter().sum::<f64>() - 1.0).abs() <= tol
        })
    }
}

/// Row i is softmax(B[i] / temperature).
pub fn blosum_to_stochastic(b: &BlosumMatrix, temperature: f64) -> Result<SquareMatrix> {
    if !(temperature > 0.0) || !temperature.is_finite() {
        return Err(Error::Config(format!("temperature must be positive, got {temperature}")));
    }
    let rows: Vec<Vec<f64>> = b
        .scores
        .iter()
        .map(|r| softmax(&r.iter().map(|&s| s as f64 / temperature).collect::<Vec<_>>()))
        .collect();
    SquareMatrix::from_rows(&rows)
}

/// Stationary distribution of softmax(B/temperature) for symmetric B: the
/// chain is reversible with weights equal to the softmax row normalizers.
pub fn blosum_stationary(b: &BlosumMatrix, temperature: f64) -> Vec<f64> {
    let z: Vec<f64> = b
        .scores
        .iter()
        .map(|r| r.iter().map(|&s| (s as f64 / temperature).exp()).sum())
        .collect();
    let total: f64 = z.iter().sum();
    z.iter().map(|v| v / total).collect()
}

pub fn softmax(x: &[f64]) -> Vec<f64> {
    let m = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = x.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransitionMatrices {
    pub k: usize,
    /// q[t-1] is Q_t.
    pub q: Vec<SquareMatrix>,
    /// qbar[t-1] is Q_1 ... Q_t.
    pub qbar: Vec<SquareMatrix>,
}

impl TransitionMatrices {
    pub fn steps(&self) -> usize {
        self.q.len()
    }

    pub fn check_step(&self, t: usize) -> Result<()> {
        if t == 0 || t > self.steps() {
            return Err(Error::Range(format!("step {t} outside 1..={}", self.steps())));
        }
        Ok(())
    }

    pub fn q_t(&self, t: usize) -> &SquareMatrix {
        &self.q[t - 1]
    }

    /// `qbar(0)` is the identity.
    pub fn qbar_t(&self, t: usize) -> SquareMatrix {
        if t == 0 {
            SquareMatrix::identity(self.k)
        } else {
            self.qbar[t - 1].clone()
        }
    }
}

/// Q_t = alpha_t I + (1 - alpha_t) base for the given per-step alphas.
pub fn transitions_from_alphas(base: &SquareMatrix, alphas: &[f64]) -> Result<TransitionMatrices> {
    if !base.is_row_stochastic(1e-9) {
        return Err(Error::Config("base matrix is not row-stochastic".into()));
    }
    if alphas.is_empty() || alphas.iter().any(|a| !(0.0..=1.0).contains(a)) {
        return Err(Error::Config("alphas must be non-empty and in [0, 1]".into()));
    }
    let k = base.k;
    let eye = SquareMatrix::identity(k);
    let mut q = Vec::with_capacity(alphas.len());
    let mut qbar = Vec::with_capacity(alphas.len());
    let mut acc = eye.clone();
    for &a in alphas {
        let data = eye.data.iter().zip(&base.data).map(|(i, b)| a * i + (1.0 - a) * b).collect();
        let m = SquareMatrix { k, data };
        acc = acc.matmul(&m);
        q.push(m);
        qbar.push(acc.clone());
    }
    Ok(TransitionMatrices { k, q, qbar })
}

pub fn build_transitions(base: &SquareMatrix, sched: &NoiseSchedule) -> Result<TransitionMatrices> {
    if base.k != NUM_AA {
        return Err(Error::Config(format!("base is {0}x{0}, expected {NUM_AA}x{NUM_AA}", base.k)));
    }
    let alphas: Vec<f64> = (1..=sched.steps).map(|t| sched.alpha(t)).collect();
    transitions_from_alphas(base, &alphas)
}

/// Distribution of a_t given a one-hot (or general) a0 row.
pub fn q_forward(a0: &[f64], t: usize, m: &TransitionMatrices) -> Result<Vec<f64>> {
    if t > m.steps() {
        return Err(Error::Range(format!("step {t} outside 0..={}", m.steps())));
    }
    if a0.len() != m.k {
        return Err(Error::Shape(format!("state of width {} for {} symbols", a0.len(), m.k)));
    }
    Ok(if t == 0 { a0.to_vec() } else { m.qbar[t - 1].left_mul(a0) })
}

/// Unnormalized posterior weights u_j = Q_t[j, a_t] * sum_k p_k Qbar_{t-1}[k, j].
fn posterior_weights(a_t: usize, a0_probs: &[f64], t: usize, m: &TransitionMatrices) -> Vec<f64> {
    let prior = if t == 1 { a0_probs.to_vec() } else { m.qbar[t - 2].left_mul(a0_probs) };
    let q = m.q_t(t);
    prior.iter().enumerate().map(|(j, p)| p * q.get(j, a_t)).collect()
}

/// q(a_{t-1} | a_t, a0) averaged over `a0_probs`.
pub fn posterior(a_t: usize, a0_probs: &[f64], t: usize, m: &TransitionMatrices) -> Result<Vec<f64>> {
    m.check_step(t)?;
    if a_t >= m.k || a0_probs.len() != m.k {
        return Err(Error::Shape(format!("state {a_t} / width {} for {} symbols", a0_probs.len(), m.k)));
    }
    let u = posterior_weights(a_t, a0_probs, t, m);
    let z: f64 = u.iter().sum();
    if !(z > 0.0) || !z.is_finite() {
        return Err(Error::DegeneratePosterior(format!("normalizer {z} at step {t}")));
    }
    Ok(u.iter().map(|v| v / z).collect())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeqLoss {
    pub total: f64,
    pub ce: f64,
    pub elbo: f64,
}

/// Cross-entropy plus the ELBO term for one sampled step, averaged over
/// unmasked residues, and the gradient with respect to `logits`. At t = 1
/// the ELBO term is the reconstruction likelihood, which equals the CE.
pub fn seq_loss_grad(
    logits: &Tensor,
    a0: &[usize],
    a_t: &[usize],
    t: usize,
    m: &TransitionMatrices,
    mask: Option<&[bool]>,
) -> Result<(SeqLoss, Tensor)> {
    m.check_step(t)?;
    let (n, k) = (logits.rows(), logits.cols());
    if k != m.k || a0.len() != n || a_t.len() != n || mask.is_some_and(|v| v.len() != n) {
        return Err(Error::Shape(format!(
            "logits {:?}, {} truths, {} states for {} symbols",
            logits.shape,
            a0.len(),
            a_t.len(),
            m.k
        )));
    }
    if a0.iter().chain(a_t).any(|&a| a >= k) {
        return Err(Error::Shape("symbol index out of range".into()));
    }
    let rows: Vec<usize> = (0..n).filter(|&i| mask.is_none_or(|v| v[i])).collect();
    let mut grad = Tensor::zeros(&logits.shape);
    if rows.is_empty() {
        return Ok((SeqLoss { total: 0.0, ce: 0.0, elbo: 0.0 }, grad));
    }
    let norm = rows.len() as f64;
    let (mut ce, mut elbo) = (0.0, 0.0);
    for &i in &rows {
        let p = softmax(logits.row(i));
        // dL/dp for this residue, pushed through the softmax at the end.
        let mut dp = vec![0.0; k];
        let pt = p[a0[i]];
        ce -= (pt + LOG_EPS).ln();
        let ce_dp = -1.0 / (pt + LOG_EPS);
        dp[a0[i]] += ce_dp;
        if t == 1 {
            elbo -= (pt + LOG_EPS).ln();
            dp[a0[i]] += ce_dp;
        } else {
            let mut onehot = vec![0.0; k];
            onehot[a0[i]] = 1.0;
            let target = posterior(a_t[i], &onehot, t, m)?;
            let u = posterior_weights(a_t[i], &p, t, m);
            let z: f64 = u.iter().sum();
            if !(z > 0.0) {
                return Err(Error::DegeneratePosterior(format!("predicted normalizer {z} at step {t}")));
            }
            let mut du = vec![0.0; k];
            for j in 0..k {
                let pred = u[j] / z;
                if target[j] > 0.0 {
                    elbo += target[j] * ((target[j] + LOG_EPS).ln() - (pred + LOG_EPS).ln());
                    du[j] -= target[j] / (pred + LOG_EPS) / z;
                }
            }
            // Through the normalization u -> u / z.
            let s: f64 = (0..k).map(|j| du[j] * u[j]).sum::<f64>() / z;
            for d in du.iter_mut() {
                *d -= s;
            }
            // u_j = Q_t[j, a_t] * sum_l p_l Qbar_{t-1}[l, j]
            let q = m.q_t(t);
            let qb = &m.qbar[t - 2];
            for (l, d) in dp.iter_mut().enumerate() {
                *d += (0..k).map(|j| du[j] * q.get(j, a_t[i]) * qb.get(l, j)).sum::<f64>();
            }
        }
        let dot: f64 = p.iter().zip(&dp).map(|(a, b)| a * b).sum();
        for j in 0..k {
            grad.data[i * k + j] = p[j] * (dp[j] - dot) / norm;
        }
    }
    let (ce, elbo) = (ce / norm, elbo / norm);
    Ok((SeqLoss { total: ce + elbo, ce, elbo }, grad))
}

pub fn seq_loss(
    logits: &Tensor,
    a0: &[usize],
    a_t: &[usize],
    t: usize,
    m: &TransitionMatrices,
    mask: Option<&[bool]>,
) -> Result<SeqLoss> {
    Ok(seq_loss_grad(logits, a0, a_t, t, m, mask)?.0)
}

pub fn sample_categorical(rng: &mut impl Rng, p: &[f64]) -> usize {
    let u: f64 = rng.random::<f64>() * p.iter().sum::<f64>();
    let mut acc = 0.0;
    for (i, &v) in p.iter().enumerate() {
        acc += v;
        if u < acc {
            return i;
        }
    }
    p.iter().rposition(|&v| v > 0.0).unwrap_or(0)
}

/// Noised states a_t ~ a0 Qbar_t for each residue.
pub fn q_sample_types(rng: &mut impl Rng, a0: &[usize], t: usize, m: &TransitionMatrices) -> Result<Vec<usize>> {
    m.check_step(t)?;
    Ok(a0.iter().map(|&a| sample_categorical(rng, m.qbar[t - 1].row(a))).collect())
}

pub fn one_hot_rows(states: &[usize], k: usize) -> Tensor {
    let mut t = Tensor::zeros(&[states.len(), k]);
    for (i, &s) in states.iter().enumerate() {
        t.data[i * k + s] = 1.0;
    }
    t
}

/// One reverse step: from logits predicted at step t, sample a_{t-1}
/// (or a_0 from the prediction itself when t = 1).
pub fn reverse_step_types(
    rng: &mut impl Rng,
    logits: &Tensor,
    a_t: &[usize],
    t: usize,
    m: &TransitionMatrices,
) -> Result<Vec<usize>> {
    m.check_step(t)?;
    (0..a_t.len())
        .map(|i| {
            let p = softmax(logits.row(i));
            if t == 1 {
                Ok(sample_categorical(rng, &p))
            } else {
                Ok(sample_categorical(rng, &posterior(a_t[i], &p, t, m)?))
            }
        })
        .collect()
}
