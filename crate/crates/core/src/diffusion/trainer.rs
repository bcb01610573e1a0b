//! Training and sampling for both denoisers.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::schedule::{cosine_schedule, NoiseSchedule, ScheduleKind};
use super::sequence::{
    blosum_stationary, blosum_to_stochastic, build_transitions, one_hot_rows, q_sample_types, reverse_step_types,
    sample_categorical, seq_loss_grad, TransitionMatrices, DEFAULT_TEMPERATURE,
};
use super::structure::{
    q_sample, reverse_step, standard_normal, uniform_angles, wrapped_smooth_l1_grad, AngleNormalizer,
    DEFAULT_LOSS_BETA, DEFAULT_NOISE_SCALE,
};
use crate::amino::{AminoAcid, BlosumMatrix, NUM_AA};
use crate::dataset::{ComplexExample, PocketRepr};
use crate::error::{Error, Result};
use crate::geom::{AngleRow, InternalCoords, NUM_ANGLES};
use crate::nn::{adam_step, AdamConfig, AdamState, Denoiser, Gradients, DenoiserInput, DenoiserKind, Graph, ModelConfig, ModelParams, Tensor};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiffusionConfig {
    pub kind: ScheduleKind,
    pub steps: usize,
    /// Scale of the angular noise.
    pub noise_scale: f64,
    pub loss_beta: f64,
    /// BLOSUM softmax temperature.
    pub temperature: f64,
}

impl Default for DiffusionConfig {
    fn default() -> Self {
        DiffusionConfig {
            kind: ScheduleKind::Cosine,
            steps: 100,
            noise_scale: DEFAULT_NOISE_SCALE,
            loss_beta: DEFAULT_LOSS_BETA,
            temperature: DEFAULT_TEMPERATURE,
        }
    }
}

impl DiffusionConfig {
    pub fn full() -> Self {
        DiffusionConfig {
            steps: 1000,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps < 2 {
            return Err(Error::Config(format!("steps must be >= 2, got {}", self.steps)));
        }
        let pos = |v: f64| v > 0.0 && v.is_finite();
        if !pos(self.noise_scale) || !pos(self.loss_beta) || !pos(self.temperature) {
            return Err(Error::Config(format!("diffusion settings {self:?}")));
        }
        Ok(())
    }

    pub fn schedule(&self) -> Result<NoiseSchedule> {
        match self.kind {
            ScheduleKind::Cosine => cosine_schedule(self.steps),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub total_steps: usize,
    pub batch_size: usize,
    /// Optimizer steps per epoch; losses are recorded per epoch.
    pub eval_every: usize,
    /// Epochs without validation improvement before stopping; 0 disables.
    pub patience: usize,
    /// Noise draws per validation example.
    pub val_draws: usize,
    pub seed: u64,
    pub optimizer: AdamConfig,
    pub lr_decay: LrDecay,
    /// Final learning rate as a fraction of `optimizer.lr`.
    pub min_lr_ratio: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LrDecay {
    Constant,
    #[default]
    Cosine,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            total_steps: 2000,
            batch_size: 8,
            eval_every: 100,
            patience: 0,
            val_draws: 4,
            seed: 0,
            optimizer: AdamConfig::default(),
            lr_decay: LrDecay::Cosine,
            min_lr_ratio: 0.1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.total_steps == 0
            || self.batch_size == 0
            || self.eval_every == 0
            || self.val_draws == 0
            || !(0.0..=1.0).contains(&self.min_lr_ratio)
        {
            return Err(Error::Config(format!("training settings {self:?}")));
        }
        self.optimizer.validate()
    }

    /// Learning rate for 1-based optimizer step `step`.
    pub fn lr_at(&self, step: usize) -> f64 {
        let lr = self.optimizer.lr;
        match self.lr_decay {
            LrDecay::Constant => lr,
            LrDecay::Cosine => {
                let frac = (step.saturating_sub(1)) as f64 / (self.total_steps.max(2) - 1) as f64;
                let min = self.min_lr_ratio * lr;
                min + (lr - min) * 0.5 * (1.0 + (std::f64::consts::PI * frac.min(1.0)).cos())
            }
        }
    }
}

/// Model-ready tensors for one complex.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingExample {
    pub id: String,
    pub angles: Vec<AngleRow>,
    pub seq: Vec<usize>,
    pub pep_angles: Tensor,
    pub pocket: PocketTensors,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PocketTensors {
    pub angles: Tensor,
    pub types: Tensor,
}

impl PocketTensors {
    pub fn from_pocket(p: &PocketRepr) -> Result<Self> {
        p.validate()?;
        if p.is_empty() {
            return Err(Error::EmptyPocket);
        }
        Ok(PocketTensors {
            angles: Tensor::from_rows(&p.angles.iter().map(|r| r.to_array()).collect::<Vec<_>>()),
            types: Tensor::from_rows(&p.one_hot()?),
        })
    }
}

impl TrainingExample {
    pub fn from_complex(e: &ComplexExample) -> Result<Self> {
        if e.peptide.angles.is_empty() {
            return Err(Error::EmptyData(format!("{} has no peptide rows", e.meta.pdb_id)));
        }
        Ok(TrainingExample {
            id: e.meta.pdb_id.clone(),
            angles: e.peptide.angles.clone(),
            seq: e.peptide.residues()?.iter().map(|a| a.index()).collect(),
            pep_angles: angle_tensor(&e.peptide.angles),
            pocket: PocketTensors::from_pocket(&e.pocket)?,
        })
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }
}

pub fn angle_tensor(rows: &[AngleRow]) -> Tensor {
    Tensor::from_rows(&rows.iter().map(|r| r.to_array()).collect::<Vec<_>>())
}

/// Random quantities for one loss evaluation.
#[derive(Clone, Debug)]
pub enum Draw {
    Structure { t: usize, noise: Tensor },
    Sequence { t: usize, states: Vec<usize> },
}

/// A denoiser together with its diffusion process.
#[derive(Clone, Debug)]
pub struct DiffusionModel {
    pub denoiser: Denoiser,
    pub diffusion: DiffusionConfig,
    pub normalizer: Option<AngleNormalizer>,
    pub params: ModelParams,
    schedule: NoiseSchedule,
    transitions: Option<TransitionMatrices>,
}

impl DiffusionModel {
    pub fn from_parts(
        kind: DenoiserKind,
        model: ModelConfig,
        diffusion: DiffusionConfig,
        normalizer: Option<AngleNormalizer>,
        params: ModelParams,
    ) -> Result<Self> {
        diffusion.validate()?;
        let denoiser = Denoiser::new(kind, model)?;
        let schedule = diffusion.schedule()?;
        let transitions = match kind {
            DenoiserKind::Sequence => {
                let base = blosum_to_stochastic(&BlosumMatrix::blosum62(), diffusion.temperature)?;
                Some(build_transitions(&base, &schedule)?)
            }
            DenoiserKind::Structure => None,
        };
        if kind == DenoiserKind::Structure && normalizer.is_none() {
            return Err(Error::Config("structure model needs an angle normalizer".into()));
        }
        Ok(DiffusionModel {
            denoiser,
            diffusion,
            normalizer,
            params,
            schedule,
            transitions,
        })
    }

    /// Fresh parameters; the structure normalizer is fitted on `data`.
    pub fn init(
        kind: DenoiserKind,
        model: ModelConfig,
        diffusion: DiffusionConfig,
        data: &[TrainingExample],
        seed: u64,
    ) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::EmptyData("no training examples".into()));
        }
        let normalizer = match kind {
            DenoiserKind::Structure => Some(AngleNormalizer::fit(data.iter().flat_map(|e| &e.angles))?),
            DenoiserKind::Sequence => None,
        };
        let params = Denoiser::new(kind, model.clone())?.init_params(seed)?;
        Self::from_parts(kind, model, diffusion, normalizer, params)
    }

    pub fn kind(&self) -> DenoiserKind {
        self.denoiser.kind
    }

    pub fn schedule(&self) -> &NoiseSchedule {
        &self.schedule
    }

    pub fn transitions(&self) -> Option<&TransitionMatrices> {
        self.transitions.as_ref()
    }

    fn norm(&self) -> &AngleNormalizer {
        self.normalizer.as_ref().expect("structure model has a normalizer")
    }

    fn trans(&self) -> &TransitionMatrices {
        self.transitions.as_ref().expect("sequence model has transitions")
    }

    pub fn draw(&self, rng: &mut impl Rng, ex: &TrainingExample) -> Result<Draw> {
        let t = rng.random_range(1..=self.schedule.steps);
        Ok(match self.kind() {
            DenoiserKind::Structure => Draw::Structure {
                t,
                noise: standard_normal(rng, ex.len(), NUM_ANGLES),
            },
            DenoiserKind::Sequence => Draw::Sequence {
                t,
                states: q_sample_types(rng, &ex.seq, t, self.trans())?,
            },
        })
    }

    /// Loss of one example under `draw` and, when `backprop`, the parameter
    /// gradients (not yet accumulated).
    pub fn example_loss(
        &self,
        params: &ModelParams,
        ex: &TrainingExample,
        draw: &Draw,
        backprop: bool,
    ) -> Result<(f64, Option<Gradients>)> {
        let steps = self.schedule.steps;
        let mut g = Graph::new();
        let (loss, out, seed) = match draw {
            Draw::Structure { t, noise } => {
                let x0 = self.norm().encode(&ex.angles);
                let (xt, target) = q_sample(&x0, *t, noise, &self.schedule, self.diffusion.noise_scale)?;
                let input = DenoiserInput {
                    noisy: &xt,
                    t: t - 1,
                    steps,
                    pep_angles: None,
                    pocket_angles: &ex.pocket.angles,
                    pocket_types: &ex.pocket.types,
                };
                let out = self.denoiser.forward(&mut g, params, &input)?;
                let (l, grad) = wrapped_smooth_l1_grad(&target, g.value(out), self.diffusion.loss_beta, None)?;
                (l, out, grad)
            }
            Draw::Sequence { t, states } => {
                let noisy = one_hot_rows(states, NUM_AA);
                let input = DenoiserInput {
                    noisy: &noisy,
                    t: t - 1,
                    steps,
                    pep_angles: Some(&ex.pep_angles),
                    pocket_angles: &ex.pocket.angles,
                    pocket_types: &ex.pocket.types,
                };
                let out = self.denoiser.forward(&mut g, params, &input)?;
                let (l, grad) = seq_loss_grad(g.value(out), &ex.seq, states, *t, self.trans(), None)?;
                (l.total, out, grad)
            }
        };
        if !loss.is_finite() {
            return Err(Error::Divergence(format!("non-finite loss on {}", ex.id)));
        }
        let grads = if backprop { Some(g.backward(out, seed)?) } else { None };
        Ok((loss, grads))
    }

    /// Mean loss over fixed draws; deterministic for a given seed.
    pub fn evaluate(&self, data: &[TrainingExample], draws: usize, seed: u64) -> Result<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut jobs = Vec::new();
        for ex in data {
            for _ in 0..draws {
                jobs.push((ex, self.draw(&mut rng, ex)?));
            }
        }
        if jobs.is_empty() {
            return Err(Error::EmptyData("no evaluation examples".into()));
        }
        let losses: Vec<f64> = jobs
            .par_iter()
            .map(|(ex, d)| self.example_loss(&self.params, ex, d, false).map(|r| r.0))
            .collect::<Result<_>>()?;
        Ok(losses.iter().sum::<f64>() / losses.len() as f64)
    }

    /// Ancestral sampling of `n` angle rows for a pocket.
    pub fn sample_structure(&self, pocket: &PocketTensors, n: usize, rng: &mut impl Rng) -> Result<InternalCoords> {
        if self.kind() != DenoiserKind::Structure {
            return Err(Error::State("not a structure model".into()));
        }
        if n == 0 {
            return Err(Error::InvalidValue("peptide length must be positive".into()));
        }
        let steps = self.schedule.steps;
        let mut x = uniform_angles(rng, n);
        for t in (1..=steps).rev() {
            let input = DenoiserInput {
                noisy: &x,
                t: t - 1,
                steps,
                pep_angles: None,
                pocket_angles: &pocket.angles,
                pocket_types: &pocket.types,
            };
            let d = self.denoiser.predict(&self.params, &input)?;
            if !d.is_finite() {
                return Err(Error::Divergence(format!("non-finite prediction at step {t}")));
            }
            let z = standard_normal(rng, n, NUM_ANGLES);
            x = reverse_step(&x, &d, t, &self.schedule, self.diffusion.noise_scale, &z)?;
        }
        Ok(self.norm().decode(&x))
    }

    /// Ancestral sampling of residue types given peptide angles.
    pub fn sample_sequence(&self, pep: &[AngleRow], pocket: &PocketTensors, rng: &mut impl Rng) -> Result<Vec<AminoAcid>> {
        if self.kind() != DenoiserKind::Sequence {
            return Err(Error::State("not a sequence model".into()));
        }
        if pep.is_empty() {
            return Err(Error::InvalidValue("peptide length must be positive".into()));
        }
        let steps = self.schedule.steps;
        let pep_angles = angle_tensor(pep);
        let pi = blosum_stationary(&BlosumMatrix::blosum62(), self.diffusion.temperature);
        let mut a: Vec<usize> = (0..pep.len()).map(|_| sample_categorical(rng, &pi)).collect();
        for t in (1..=steps).rev() {
            let noisy = one_hot_rows(&a, NUM_AA);
            let input = DenoiserInput {
                noisy: &noisy,
                t: t - 1,
                steps,
                pep_angles: Some(&pep_angles),
                pocket_angles: &pocket.angles,
                pocket_types: &pocket.types,
            };
            let logits = self.denoiser.predict(&self.params, &input)?;
            if !logits.is_finite() {
                return Err(Error::Divergence(format!("non-finite logits at step {t}")));
            }
            a = reverse_step_types(rng, &logits, &a, t, self.trans())?;
        }
        Ok(a.iter().map(|&i| AminoAcid::from_index(i).expect("index below 20")).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub step: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub history: Vec<EpochRecord>,
    /// Epoch whose parameters were kept (the best validation epoch, or the
    /// last one without validation data).
    pub best_epoch: usize,
    pub best_val: Option<f64>,
    pub stopped_early: bool,
    pub steps_run: usize,
    pub rng_word_pos: u128,
}

const VAL_SEED_SALT: u64 = 0x5eed_0f_7a1d;

/// Minibatch training with Adam. Without validation data the final
/// parameters are kept; otherwise those of the best validation epoch.
pub fn train(
    model: &mut DiffusionModel,
    train_set: &[TrainingExample],
    val_set: &[TrainingExample],
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainReport> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(Error::EmptyData("no training examples".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut state = AdamState::new(&model.params);
    let mut order: Vec<usize> = Vec::new();
    let mut history = Vec::new();
    let mut best: Option<(f64, usize, ModelParams)> = None;
    let mut since_best = 0;
    let mut epoch_losses = Vec::new();
    let mut stopped_early = false;
    let mut steps_run = 0;

    for step in 1..=cfg.total_steps {
        let mut jobs = Vec::with_capacity(cfg.batch_size);
        for _ in 0..cfg.batch_size {
            if order.is_empty() {
                order = (0..train_set.len()).collect();
                order.shuffle(&mut rng);
            }
            let ex = &train_set[order.pop().expect("refilled")];
            jobs.push((ex, model.draw(&mut rng, ex)?));
        }
        let results: Vec<(f64, Gradients)> = jobs
            .par_iter()
            .map(|(ex, d)| {
                model
                    .example_loss(&model.params, ex, d, true)
                    .map(|(l, g)| (l, g.expect("requested")))
            })
            .collect::<Result<_>>()?;
        model.params.zero_grad();
        let mut loss = 0.0;
        for (l, g) in &results {
            loss += l;
            g.accumulate(&mut model.params);
        }
        let b = results.len() as f64;
        model.params.scale_grads(1.0 / b);
        let opt = AdamConfig {
            lr: cfg.lr_at(step),
            ..cfg.optimizer.clone()
        };
        adam_step(&mut model.params, &mut state, &opt)?;
        epoch_losses.push(loss / b);
        steps_run = step;

        if step % cfg.eval_every == 0 || step == cfg.total_steps {
            let epoch = history.len() + 1;
            let train_loss = epoch_losses.iter().sum::<f64>() / epoch_losses.len() as f64;
            epoch_losses.clear();
            let val_loss = if val_set.is_empty() {
                None
            } else {
                Some(model.evaluate(val_set, cfg.val_draws, cfg.seed ^ VAL_SEED_SALT)?)
            };
            let rec = EpochRecord {
                epoch,
                step,
                train_loss,
                val_loss,
            };
            on_epoch(&rec);
            history.push(rec);
            if let Some(v) = val_loss {
                if best.as_ref().is_none_or(|b| v < b.0) {
                    best = Some((v, epoch, model.params.clone()));
                    since_best = 0;
                } else {
                    since_best += 1;
                    if cfg.patience > 0 && since_best >= cfg.patience {
                        stopped_early = true;
                        break;
                    }
                }
            }
        }
    }
    let (best_epoch, best_val) = match best {
        Some((v, e, p)) => {
            model.params = p;
            (e, Some(v))
        }
        None => (history.len(), None),
    };
    model.params.zero_grad();
    Ok(TrainReport {
        history,
        best_epoch,
        best_val,
        stopped_early,
        steps_run,
        rng_word_pos: rng.get_word_pos(),
    })
}

/// Mean absolute wrapped difference between two angle sets, per element.
pub fn mean_wrapped_abs(a: &[AngleRow], b: &[AngleRow]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::Shape(format!("{} vs {} rows", a.len(), b.len())));
    }
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        for (u, v) in x.to_array().iter().zip(y.to_array()) {
            s += super::structure::wrapped_diff(*u, v).abs();
        }
    }
    Ok(s / (a.len() * NUM_ANGLES) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_decay_endpoints() {
        let cfg = TrainConfig {
            total_steps: 11,
            ..Default::default()
        };
        let lr = cfg.optimizer.lr;
        assert_eq!(cfg.lr_at(1), lr);
        assert!((cfg.lr_at(6) - 0.55 * lr).abs() < 1e-15);
        assert!((cfg.lr_at(11) - 0.1 * lr).abs() < 1e-15);
        assert!((1..11).all(|s| cfg.lr_at(s + 1) <= cfg.lr_at(s)));
        let flat = TrainConfig {
            lr_decay: LrDecay::Constant,
            ..cfg
        };
        assert!((1..=11).all(|s| flat.lr_at(s) == lr));
    }
}
