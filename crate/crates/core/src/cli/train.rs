//! `train`: prepared dataset -> checkpoint + loss CSV.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::dataset::{ComplexExample, Split};
use crate::diffusion::{train, Checkpoint, DiffusionModel, EpochRecord, TrainingExample};
use crate::error::{Error, Result};
use crate::nn::DenoiserKind;

use super::config::RunConfig;
use super::{read_file, write_file};

pub fn load_split(data: &Path) -> Result<Split> {
    Split::from_json(&read_file(&data.join("split.json"))?)
}

/// Examples of a prepared directory, keyed by the order of `ids`.
pub fn load_examples(data: &Path, ids: &[String]) -> Result<Vec<ComplexExample>> {
    ids.iter()
        .map(|id| {
            let p = data.join("examples").join(format!("{id}.example.json"));
            ComplexExample::from_json(&read_file(&p)?)
        })
        .collect()
}

pub fn common_ext_k(examples: &[ComplexExample]) -> Result<usize> {
    let k = examples
        .first()
        .map(|e| e.meta.ext_k)
        .ok_or_else(|| Error::EmptyData("no examples".into()))?;
    if examples.iter().any(|e| e.meta.ext_k != k) {
        return Err(Error::Config("examples were prepared with different ext_k".into()));
    }
    Ok(k)
}

pub fn loss_csv(history: &[EpochRecord]) -> String {
    let mut s = String::from("epoch,step,train_loss,val_loss\n");
    for r in history {
        let v = r.val_loss.map_or(String::new(), |v| format!("{v:.8}"));
        let _ = writeln!(s, "{},{},{:.8},{}", r.epoch, r.step, r.train_loss, v);
    }
    s
}

pub struct TrainArgs<'a> {
    pub kind: DenoiserKind,
    pub data: &'a Path,
    pub out: &'a Path,
    pub config: &'a RunConfig,
    pub seed: u64,
}

pub fn checkpoint_path(out: &Path, kind: DenoiserKind) -> PathBuf {
    out.join(format!("{}.ckpt.json", kind.as_str()))
}

pub fn run_train(a: &TrainArgs) -> Result<Checkpoint> {
    a.config.validate()?;
    let split = load_split(a.data)?;
    let train_ex = load_examples(a.data, &split.train)?;
    let val_ex = load_examples(a.data, &split.val)?;
    if train_ex.is_empty() {
        return Err(Error::EmptyData("training split is empty".into()));
    }
    let all: Vec<ComplexExample> = train_ex.iter().chain(&val_ex).cloned().collect();
    let ext_k = common_ext_k(&all)?;
    let to_tensors = |v: &[ComplexExample]| v.iter().map(TrainingExample::from_complex).collect::<Result<Vec<_>>>();
    let train_set = to_tensors(&train_ex)?;
    let val_set = to_tensors(&val_ex)?;
    let cfg = a.config.train_config(a.seed);
    let mut model = DiffusionModel::init(a.kind, a.config.model.clone(), a.config.schedule.clone(), &train_set, a.seed)?;
    log::info!(
        "training {} model on {} examples ({} validation), {} steps",
        a.kind.as_str(),
        train_set.len(),
        val_set.len(),
        cfg.total_steps
    );
    let report = train(&mut model, &train_set, &val_set, &cfg, |r| {
        log::info!("epoch {} step {} train {:.5} val {:?}", r.epoch, r.step, r.train_loss, r.val_loss);
    })?;
    std::fs::create_dir_all(a.out).map_err(|e| Error::io(a.out, e))?;
    let ckpt = Checkpoint::from_model(&model, ext_k, a.seed, report.steps_run, report.rng_word_pos, report.history.clone());
    ckpt.save(&checkpoint_path(a.out, a.kind))?;
    write_file(&a.out.join(format!("{}.loss.csv", a.kind.as_str())), &loss_csv(&report.history))?;
    let mut effective = a.config.clone();
    effective.seed = Some(a.seed);
    write_file(&a.out.join(format!("{}.config.toml", a.kind.as_str())), &effective.to_toml()?)?;
    Ok(ckpt)
}
