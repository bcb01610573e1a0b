//! Command-line front end.

pub mod config;
pub mod evaluate;
pub mod misc;
pub mod prepare;
pub mod sample;
pub mod train;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::dataset::read_pdb;
use crate::error::{Error, Result};
use crate::nn::DenoiserKind;

pub use config::RunConfig;

pub(crate) fn read_file(p: &Path) -> Result<String> {
    std::fs::read_to_string(p).map_err(|e| Error::io(p, e))
}

pub(crate) fn write_file(p: &Path, text: &str) -> Result<()> {
    std::fs::write(p, text).map_err(|e| Error::io(p, e))
}

#[derive(Parser, Debug)]
#[command(name = "pepforge", version, about = "Pocket-conditioned peptide structure and sequence diffusion")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// TOML run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Seed; falls back to the config file, then 0.
    #[arg(long, env = "PEPFORGE_SEED")]
    pub seed: Option<u64>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum KindArg {
    Structure,
    Sequence,
}

impl From<KindArg> for DenoiserKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Structure => DenoiserKind::Structure,
            KindArg::Sequence => DenoiserKind::Sequence,
        }
    }
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Filter complexes, extract pockets and angles, split the dataset.
    Prepare {
        #[arg(long)]
        pdb_dir: PathBuf,
        /// TSV of pdb_id, receptor chains, peptide chain (default: <pdb-dir>/complexes.tsv).
        #[arg(long)]
        complexes: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        ext_k: Option<usize>,
        /// Train/val/test fractions.
        #[arg(long, value_delimiter = ',', default_values_t = [0.8, 0.1, 0.1])]
        split: Vec<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Train one of the two denoisers.
    Train {
        #[arg(long, value_enum)]
        kind: KindArg,
        /// Prepared dataset directory.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Checkpoint directory.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        total_steps: Option<usize>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        patience: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Sample structures, then sequences, for one or more pockets.
    Sample {
        #[arg(long)]
        structure_ckpt: PathBuf,
        #[arg(long)]
        sequence_ckpt: PathBuf,
        /// An example JSON file or a prepared dataset directory.
        #[arg(long)]
        pocket: PathBuf,
        /// Split subset used when --pocket is a directory.
        #[arg(long, default_value = "test")]
        subset: String,
        /// Peptide length in residues (default: the reference length).
        #[arg(long)]
        len: Option<usize>,
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Score generated samples against reference examples.
    Evaluate {
        /// Sample directory; repeat to evaluate an ext-k ensemble.
        #[arg(long, required = true)]
        generated: Vec<PathBuf>,
        /// Prepared dataset directory or directory of example files.
        #[arg(long)]
        reference: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        svg: bool,
    },
    /// Shuffle each FASTA record's letters.
    ShuffleSeq {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Extract and rebuild a PDB backbone, reporting the RMSD.
    Roundtrip {
        #[arg(long)]
        pdb: PathBuf,
        #[arg(long)]
        chain: Option<char>,
    },
}

fn load_config(c: &Common) -> Result<(RunConfig, u64)> {
    let cfg = RunConfig::load(c.config.as_deref())?;
    let seed = c.seed.or(cfg.seed).unwrap_or(0);
    Ok((cfg, seed))
}

fn need(p: Option<PathBuf>, what: &str) -> Result<PathBuf> {
    p.ok_or_else(|| Error::Config(format!("{what} not given on the command line or in [paths]")))
}

fn echo_config(dir: &Path, cfg: &RunConfig, seed: u64) -> Result<()> {
    let mut c = cfg.clone();
    c.seed = Some(seed);
    write_file(&dir.join("config.toml"), &c.to_toml()?)
}

pub fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Prepare {
            pdb_dir,
            complexes,
            out,
            ext_k,
            split,
            common,
        } => {
            let (mut cfg, seed) = load_config(&common)?;
            if let Some(k) = ext_k {
                cfg.ext_k = k;
            }
            cfg.validate()?;
            if split.len() != 3 {
                return Err(Error::Config(format!("--split takes three fractions, got {}", split.len())));
            }
            let complexes = complexes.unwrap_or_else(|| pdb_dir.join("complexes.tsv"));
            let report = prepare::prepare(&prepare::PrepareArgs {
                pdb_dir: &pdb_dir,
                complexes: &complexes,
                out: &out,
                ext_k: cfg.ext_k,
                seed,
                ratios: [split[0], split[1], split[2]],
            })?;
            echo_config(&out, &cfg, seed)?;
            println!(
                "{} entries, {} accepted, rejected {:?}",
                report.entries, report.accepted, report.rejected
            );
        }
        Command::Train {
            kind,
            data,
            out,
            steps,
            total_steps,
            batch_size,
            lr,
            patience,
            common,
        } => {
            let (mut cfg, seed) = load_config(&common)?;
            if let Some(v) = steps {
                cfg.schedule.steps = v;
            }
            if let Some(v) = total_steps {
                cfg.optimizer.total_steps = v;
            }
            if let Some(v) = batch_size {
                cfg.optimizer.batch_size = v;
            }
            if let Some(v) = lr {
                cfg.optimizer.lr = v;
            }
            if let Some(v) = patience {
                cfg.optimizer.patience = v;
            }
            let data = need(data.or(cfg.paths.data_dir.clone()), "--data")?;
            let out = need(out.or(cfg.paths.checkpoint_dir.clone()), "--out")?;
            let ck = train::run_train(&train::TrainArgs {
                kind: kind.into(),
                data: &data,
                out: &out,
                config: &cfg,
                seed,
            })?;
            let last = ck.history.last().map(|r| r.train_loss).unwrap_or(f64::NAN);
            println!("trained {} model: {} steps, final train loss {last:.5}", ck.kind.as_str(), ck.steps_run);
        }
        Command::Sample {
            structure_ckpt,
            sequence_ckpt,
            pocket,
            subset,
            len,
            count,
            out,
            common,
        } => {
            let (cfg, seed) = load_config(&common)?;
            let recs = sample::run_sample(&sample::SampleArgs {
                structure_ckpt: &structure_ckpt,
                sequence_ckpt: &sequence_ckpt,
                pocket: &pocket,
                subset: &subset,
                length: len,
                count,
                seed,
                out: &out,
            })?;
            echo_config(&out, &cfg, seed)?;
            println!("wrote {} samples to {}", recs.len(), out.display());
        }
        Command::Evaluate {
            generated,
            reference,
            out,
            svg,
        } => {
            let summary = evaluate::run_evaluate(&evaluate::EvaluateArgs {
                generated: &generated,
                reference: &reference,
                out: &out,
                svg,
            })?;
            for (k, v) in summary {
                println!("{k}\t{v:.4}");
            }
        }
        Command::ShuffleSeq { input, output, common } => {
            let (_, seed) = load_config(&common)?;
            let recs = misc::parse_fasta(&read_file(&input)?)?;
            write_file(&output, &misc::write_fasta(&misc::shuffle_records(&recs, seed)))?;
            println!("shuffled {} records", recs.len());
        }
        Command::Roundtrip { pdb, chain } => {
            let s = read_pdb(&pdb)?;
            for (id, r) in misc::roundtrip_chains(&s, chain)? {
                println!(
                    "chain {id}: {} residues, measured-length RMSD {:.6} A, fixed-length RMSD {:.4} A",
                    r.residues, r.measured_rmsd, r.fixed_rmsd
                );
            }
        }
    }
    Ok(())
}

/// Parses arguments, runs the command, and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
