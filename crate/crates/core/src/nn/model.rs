//! The twin pocket-conditioned denoisers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::graph::{Graph, Var};
use super::layers::{positional_encoding, timestep_embed, Attention, ReBlock, LN_EPS};
use super::params::ModelParams;
use super::tensor::Tensor;
use crate::amino::NUM_AA;
use crate::error::{Error, Result};
use crate::geom::NUM_ANGLES;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DenoiserKind {
    Structure,
    Sequence,
}

impl DenoiserKind {
    pub fn output_width(self) -> usize {
        match self {
            DenoiserKind::Structure => NUM_ANGLES,
            DenoiserKind::Sequence => NUM_AA,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DenoiserKind::Structure => "structure",
            DenoiserKind::Sequence => "sequence",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AngleEncoding {
    /// (sin, cos) per angle.
    SinCos,
    Raw,
    /// Raw angle followed by (sin, cos).
    RawSinCos,
}

impl AngleEncoding {
    pub fn width(self) -> usize {
        match self {
            AngleEncoding::SinCos => 2 * NUM_ANGLES,
            AngleEncoding::Raw => NUM_ANGLES,
            AngleEncoding::RawSinCos => 3 * NUM_ANGLES,
        }
    }

    pub fn encode(self, angles: &Tensor) -> Result<Tensor> {
        if angles.cols() != NUM_ANGLES {
            return Err(Error::Shape(format!("angle input has {} columns", angles.cols())));
        }
        Ok(match self {
            AngleEncoding::Raw => angles.clone(),
            AngleEncoding::SinCos => Tensor {
                shape: vec![angles.rows(), 2 * NUM_ANGLES],
                data: (0..angles.rows())
                    .flat_map(|i| angles.row(i).iter().flat_map(|a| [a.sin(), a.cos()]).collect::<Vec<_>>())
                    .collect(),
            },
            AngleEncoding::RawSinCos => Tensor {
                shape: vec![angles.rows(), 3 * NUM_ANGLES],
                data: (0..angles.rows())
                    .flat_map(|i| angles.row(i).iter().flat_map(|a| [*a, a.sin(), a.cos()]).collect::<Vec<_>>())
                    .collect(),
            },
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub hidden: usize,
    pub heads: usize,
    pub ff: usize,
    pub blocks: usize,
    pub angle_encoding: AngleEncoding,
    /// Residual connection around the residue-encoder feed-forward body.
    pub residual: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig::miniature()
    }
}

impl ModelConfig {
    pub fn miniature() -> Self {
        ModelConfig {
            hidden: 64,
            heads: 4,
            ff: 128,
            blocks: 2,
            angle_encoding: AngleEncoding::RawSinCos,
            residual: true,
        }
    }

    pub fn full() -> Self {
        ModelConfig {
            hidden: 256,
            heads: 8,
            ff: 512,
            blocks: 6,
            ..ModelConfig::miniature()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden < 2 || self.ff == 0 || self.blocks == 0 {
            return Err(Error::Config(format!("model sizes {self:?}")));
        }
        if self.heads == 0 || self.hidden % self.heads != 0 {
            return Err(Error::Config(format!(
                "{} heads do not divide width {}",
                self.heads, self.hidden
            )));
        }
        Ok(())
    }
}

/// Inputs for one example.
#[derive(Clone, Debug)]
pub struct DenoiserInput<'a> {
    /// n x 8 noisy angles (structure) or n x 20 noisy type distribution
    /// (sequence).
    pub noisy: &'a Tensor,
    /// Zero-based step index in `0..steps`.
    pub t: usize,
    pub steps: usize,
    /// n x 8 peptide angles; required by the sequence model only.
    pub pep_angles: Option<&'a Tensor>,
    pub pocket_angles: &'a Tensor,
    pub pocket_types: &'a Tensor,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Denoiser {
    pub kind: DenoiserKind,
    pub config: ModelConfig,
}

impl Denoiser {
    pub fn new(kind: DenoiserKind, config: ModelConfig) -> Result<Self> {
        config.validate()?;
        Ok(Denoiser { kind, config })
    }

    fn re(&self, prefix: &str) -> ReBlock {
        ReBlock {
            prefix: prefix.to_string(),
            hidden: self.config.hidden,
            ff: self.config.ff,
            residual: self.config.residual,
        }
    }

    fn attn(&self, prefix: &str) -> Result<Attention> {
        Attention::new(prefix, self.config.hidden, self.config.heads)
    }

    fn pep_in_width(&self) -> usize {
        match self.kind {
            DenoiserKind::Structure => self.config.angle_encoding.width(),
            DenoiserKind::Sequence => NUM_AA,
        }
    }

    /// (residue feature width, condition width) for pocket rows. The
    /// structure model encodes pocket angles conditioned on types; the
    /// sequence model does the reverse.
    fn pocket_widths(&self) -> (usize, usize) {
        let a = self.config.angle_encoding.width();
        match self.kind {
            DenoiserKind::Structure => (a, NUM_AA),
            DenoiserKind::Sequence => (NUM_AA, a),
        }
    }

    /// Deterministic initialization. The output projection starts at zero.
    pub fn init_params(&self, seed: u64) -> Result<ModelParams> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = self.config.hidden;
        let mut p = ModelParams::new();
        p.insert_linear(&mut rng, "pep.in", self.pep_in_width(), h)?;
        if self.kind == DenoiserKind::Sequence {
            p.insert_linear(&mut rng, "pep.cond", self.config.angle_encoding.width(), h)?;
        }
        p.insert_linear(&mut rng, "time.l1", h, h)?;
        p.insert_linear(&mut rng, "time.l2", h, h)?;
        let (pf, pc) = self.pocket_widths();
        p.insert_linear(&mut rng, "poc.in", pf, h)?;
        p.insert_linear(&mut rng, "poc.cond", pc, h)?;
        for i in 0..self.config.blocks {
            self.re(&format!("poc.re{i}")).init(&mut p, &mut rng)?;
            self.attn(&format!("blk{i}.self"))?.init(&mut p, &mut rng)?;
            self.attn(&format!("blk{i}.cross"))?.init(&mut p, &mut rng)?;
            self.re(&format!("blk{i}.re")).init(&mut p, &mut rng)?;
        }
        p.insert("out.w", Tensor::zeros(&[h, self.kind.output_width()]))?;
        p.insert("out.b", Tensor::zeros(&[1, self.kind.output_width()]))?;
        Ok(p)
    }

    fn check(&self, x: &DenoiserInput) -> Result<usize> {
        let n = x.noisy.rows();
        let want = match self.kind {
            DenoiserKind::Structure => NUM_ANGLES,
            DenoiserKind::Sequence => NUM_AA,
        };
        if n == 0 || x.noisy.cols() != want {
            return Err(Error::Shape(format!(
                "{} model expects n x {want} input, got {:?}",
                self.kind.as_str(),
                x.noisy.shape
            )));
        }
        let m = x.pocket_angles.rows();
        if m == 0 || x.pocket_types.rows() != m || x.pocket_angles.cols() != NUM_ANGLES || x.pocket_types.cols() != NUM_AA {
            return Err(Error::Shape(format!(
                "pocket angles {:?} and types {:?}",
                x.pocket_angles.shape, x.pocket_types.shape
            )));
        }
        if self.kind == DenoiserKind::Sequence {
            match x.pep_angles {
                Some(a) if a.rows() == n && a.cols() == NUM_ANGLES => {}
                other => {
                    return Err(Error::Shape(format!(
                        "sequence model needs {n} x {NUM_ANGLES} peptide angles, got {:?}",
                        other.map(|a| a.shape.clone())
                    )))
                }
            }
        }
        Ok(n)
    }

    /// Records the forward pass; returns the n x out output node.
    pub fn forward(&self, g: &mut Graph, p: &ModelParams, x: &DenoiserInput) -> Result<Var> {
        let n = self.check(x)?;
        let h = self.config.hidden;
        let enc = self.config.angle_encoding;

        let pep_feat = match self.kind {
            DenoiserKind::Structure => enc.encode(x.noisy)?,
            DenoiserKind::Sequence => x.noisy.clone(),
        };
        let pep_feat = g.input(pep_feat);
        let hp = super::layers::linear(g, p, "pep.in", pep_feat)?;
        let pos = g.input(positional_encoding(n, h));
        let mut hp = g.add(hp, pos)?;

        let temb = g.input(timestep_embed(x.t, h, x.steps)?);
        let temb = super::layers::linear(g, p, "time.l1", temb)?;
        let temb = g.silu(temb);
        let temb = super::layers::linear(g, p, "time.l2", temb)?;
        let mut cond = g.broadcast_rows(temb, n)?;
        if self.kind == DenoiserKind::Sequence {
            let a = g.input(enc.encode(x.pep_angles.expect("checked"))?);
            let a = super::layers::linear(g, p, "pep.cond", a)?;
            cond = g.add(cond, a)?;
        }

        let (pf, pc) = match self.kind {
            DenoiserKind::Structure => (enc.encode(x.pocket_angles)?, x.pocket_types.clone()),
            DenoiserKind::Sequence => (x.pocket_types.clone(), enc.encode(x.pocket_angles)?),
        };
        let pf = g.input(pf);
        let pc = g.input(pc);
        let mut hq = super::layers::linear(g, p, "poc.in", pf)?;
        let cq = super::layers::linear(g, p, "poc.cond", pc)?;
        for i in 0..self.config.blocks {
            hq = self.re(&format!("poc.re{i}")).forward(g, p, hq, cq)?;
        }

        for i in 0..self.config.blocks {
            let ln = g.layer_norm(hp, LN_EPS)?;
            let (sa, _) = self.attn(&format!("blk{i}.self"))?.forward(g, p, ln, ln, None)?;
            hp = g.add(hp, sa)?;
            let ln = g.layer_norm(hp, LN_EPS)?;
            let (ca, _) = self.attn(&format!("blk{i}.cross"))?.forward(g, p, ln, hq, None)?;
            hp = g.add(hp, ca)?;
            hp = self.re(&format!("blk{i}.re")).forward(g, p, hp, cond)?;
        }
        let ln = g.layer_norm(hp, LN_EPS)?;
        super::layers::linear(g, p, "out", ln)
    }

    /// Forward pass without gradients.
    pub fn predict(&self, p: &ModelParams, x: &DenoiserInput) -> Result<Tensor> {
        let mut g = Graph::new();
        let out = self.forward(&mut g, p, x)?;
        Ok(g.value(out).clone())
    }

    /// Independent forward passes, outputs stacked row-wise in input order.
    pub fn predict_batch(&self, p: &ModelParams, xs: &[DenoiserInput]) -> Result<Tensor> {
        let mut data = Vec::new();
        let mut rows = 0;
        for x in xs {
            let t = self.predict(p, x)?;
            rows += t.rows();
            data.extend(t.data);
        }
        Tensor::matrix(rows, self.kind.output_width(), data)
    }
}

/// Forward pass of a freshly described model; convenience wrapper.
pub fn denoiser_forward(
    kind: DenoiserKind,
    config: &ModelConfig,
    params: &ModelParams,
    x: &DenoiserInput,
) -> Result<Tensor> {
    Denoiser::new(kind, config.clone())?.predict(params, x)
}
