use rand::Rng;

use super::graph::{Graph, Var};
use super::params::ModelParams;
use super::tensor::Tensor;
use crate::error::{Error, Result};

pub const LN_EPS: f64 = 1e-5;

/// Plain row-wise layer norm on a tensor (population variance).
pub fn layer_norm(h: &Tensor, eps: f64) -> Result<Tensor> {
    let mut g = Graph::new();
    let x = g.input(h.clone());
    let y = g.layer_norm(x, eps)?;
    Ok(g.value(y).clone())
}

pub fn linear(g: &mut Graph, p: &ModelParams, name: &str, x: Var) -> Result<Var> {
    let w = g.param(p, &format!("{name}.w"))?;
    let b = g.param(p, &format!("{name}.b"))?;
    let xw = g.matmul(x, w)?;
    g.add_row(xw, b)
}

fn linear_nobias(g: &mut Graph, p: &ModelParams, name: &str, x: Var) -> Result<Var> {
    let w = g.param(p, &format!("{name}.w"))?;
    g.matmul(x, w)
}

/// Residue-encoder block: condition projection to (gate, scale, shift) plus a
/// feed-forward body.
#[derive(Clone, Debug)]
pub struct ReBlock {
    pub prefix: String,
    pub hidden: usize,
    pub ff: usize,
    pub residual: bool,
}

impl ReBlock {
    pub fn init(&self, p: &mut ModelParams, rng: &mut impl Rng) -> Result<()> {
        let h = self.hidden;
        p.insert_linear(rng, &format!("{}.cond", self.prefix), h, 3 * h)?;
        // Start at gate = 1, scale = 1, shift = 0.
        let b = p.get_mut(&format!("{}.cond.b", self.prefix))?;
        b.data[..2 * h].iter_mut().for_each(|x| *x = 1.0);
        p.insert_linear(rng, &format!("{}.ff1", self.prefix), h, self.ff)?;
        p.insert_linear(rng, &format!("{}.ff2", self.prefix), self.ff, h)?;
        Ok(())
    }

    pub fn forward(&self, g: &mut Graph, p: &ModelParams, h: Var, cond: Var) -> Result<Var> {
        let x = gated_adaln(g, p, &self.prefix, self.hidden, h, cond)?;
        let a = linear(g, p, &format!("{}.ff1", self.prefix), x)?;
        let a = g.silu(a);
        let y = linear(g, p, &format!("{}.ff2", self.prefix), a)?;
        if self.residual {
            g.add(h, y)
        } else {
            Ok(y)
        }
    }
}

/// Gate * (Scale * LN(h) + Shift), with the three factors projected from
/// `cond` by `{prefix}.cond`.
pub fn gated_adaln(
    g: &mut Graph,
    p: &ModelParams,
    prefix: &str,
    hidden: usize,
    h: Var,
    cond: Var,
) -> Result<Var> {
    let (hv, cv) = (g.value(h), g.value(cond));
    if hv.rows() != cv.rows() || hv.cols() != hidden {
        return Err(Error::Shape(format!(
            "gated_adaln: h {:?}, cond {:?}, hidden {hidden}",
            hv.shape, cv.shape
        )));
    }
    let gss = linear(g, p, &format!("{prefix}.cond"), cond)?;
    let gate = g.cols(gss, 0, hidden)?;
    let scale = g.cols(gss, hidden, 2 * hidden)?;
    let shift = g.cols(gss, 2 * hidden, 3 * hidden)?;
    let ln = g.layer_norm(h, LN_EPS)?;
    let scaled = g.mul(scale, ln)?;
    let shifted = g.add(scaled, shift)?;
    g.mul(gate, shifted)
}

#[derive(Clone, Debug)]
pub struct Attention {
    pub prefix: String,
    pub hidden: usize,
    pub heads: usize,
}

impl Attention {
    pub fn new(prefix: &str, hidden: usize, heads: usize) -> Result<Self> {
        if heads == 0 || hidden % heads != 0 {
            return Err(Error::Config(format!("{heads} heads do not divide width {hidden}")));
        }
        Ok(Attention {
            prefix: prefix.to_string(),
            hidden,
            heads,
        })
    }

    pub fn init(&self, p: &mut ModelParams, rng: &mut impl Rng) -> Result<()> {
        let h = self.hidden;
        let bound = 1.0 / (h as f64).sqrt();
        for m in ["q", "k", "v", "o"] {
            let w = (0..h * h).map(|_| rng.random_range(-bound..bound)).collect();
            p.insert(&format!("{}.{m}.w", self.prefix), Tensor::matrix(h, h, w)?)?;
        }
        Ok(())
    }

    /// Multi-head attention of `q_src` rows over `kv_src` rows. Returns the
    /// output and the per-head weight matrices.
    pub fn forward(
        &self,
        g: &mut Graph,
        p: &ModelParams,
        q_src: Var,
        kv_src: Var,
        key_mask: Option<&[bool]>,
    ) -> Result<(Var, Vec<Var>)> {
        let q = linear_nobias(g, p, &format!("{}.q", self.prefix), q_src)?;
        let k = linear_nobias(g, p, &format!("{}.k", self.prefix), kv_src)?;
        let v = linear_nobias(g, p, &format!("{}.v", self.prefix), kv_src)?;
        let dk = self.hidden / self.heads;
        let mut outs = Vec::with_capacity(self.heads);
        let mut weights = Vec::with_capacity(self.heads);
        for head in 0..self.heads {
            let (s, e) = (head * dk, (head + 1) * dk);
            let qh = g.cols(q, s, e)?;
            let kh = g.cols(k, s, e)?;
            let vh = g.cols(v, s, e)?;
            let kt = g.transpose(kh);
            let scores = g.matmul(qh, kt)?;
            let scores = g.scale(scores, 1.0 / (dk as f64).sqrt());
            let a = g.softmax_rows(scores, key_mask)?;
            outs.push(g.matmul(a, vh)?);
            weights.push(a);
        }
        let cat = if outs.len() == 1 { outs[0] } else { g.concat_cols(&outs)? };
        let out = linear_nobias(g, p, &format!("{}.o", self.prefix), cat)?;
        Ok((out, weights))
    }
}

fn sinusoid(pos: f64, dim: usize) -> Vec<f64> {
    (0..dim)
        .map(|i| {
            let k = (i / 2) as f64;
            let w = 1.0 / 10000f64.powf(2.0 * k / dim as f64);
            if i % 2 == 0 {
                (pos * w).sin()
            } else {
                (pos * w).cos()
            }
        })
        .collect()
}

/// Sinusoidal embedding of step `t` in `0..steps` as a 1 x dim row.
pub fn timestep_embed(t: usize, dim: usize, steps: usize) -> Result<Tensor> {
    if t >= steps {
        return Err(Error::Range(format!("timestep {t} outside 0..{steps}")));
    }
    Tensor::matrix(1, dim, sinusoid(t as f64, dim))
}

/// Row i holds the sinusoid of position i.
pub fn positional_encoding(n: usize, dim: usize) -> Tensor {
    Tensor {
        shape: vec![n, dim],
        data: (0..n).flat_map(|i| sinusoid(i as f64, dim)).collect(),
    }
}
