//! Subcommands of the `qbert` binary. Each returns the process exit code.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};

use crate::checkpoint::Checkpoint;
use crate::config::{config_diff, RunConfig};
use crate::data::{read_tsv, FinetuneBatch, PretrainSampler, Vocab};
use crate::error::{at_path, Error, Result};
use crate::gradsuite::{run_suite, SUITE};
use crate::models::{AnyClassifier, Arch, ModelConfig, Mode, QBert};
use crate::optim::{compare_optimizers, AdamWConfig, LeastSquares};
use crate::qsim::{equivalence_harness, HarnessConfig};
use crate::train::{evaluate, finetune_csv, pretrain, pretrain_csv, write_file};

/// Model keys a fine-tuning config may change relative to its checkpoint.
pub const FINETUNE_OVERRIDABLE: [&str; 7] = ["n_classes", "dropout_p", "seed", "init", "init_std", "reg_kind", "reg_lambda"];

#[derive(Debug, Parser)]
#[command(name = "qbert", version, about = "Complex-valued BERT with a quantum measurement head")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Masked-LM and next-sentence pretraining on a text corpus.
    Pretrain(PretrainArgs),
    /// Classification fine-tuning with the measurement head.
    Finetune(FinetuneArgs),
    /// Accuracy, F1 and Matthews correlation of a fine-tuned checkpoint.
    Eval(EvalArgs),
    /// Finite-difference checks of every layer.
    Gradcheck(GradcheckArgs),
    /// CAdamW against RAdamW on a complex least-squares problem.
    CompareOptimizers(CompareArgs),
    /// Classical head against its circuit simulation.
    SimulateCircuit(SimulateArgs),
}

#[derive(Debug, Args)]
pub struct PretrainArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// One sentence per line; blank lines separate documents.
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FinetuneArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Pretrained checkpoint, or `none` for a randomly initialized encoder.
    #[arg(long, default_value = "none")]
    pub ckpt: String,
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub dev: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// qbert, qcls-transformer or qcls-end2end.
    #[arg(long, default_value = "qbert")]
    pub arch: String,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// Layer widths come from the config; defaults otherwise.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Check a single layer.
    #[arg(long)]
    pub layer: Option<String>,
    #[arg(long, default_value_t = 3)]
    pub seeds: u64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Problem {
    Lsq,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long, value_enum, default_value = "lsq")]
    pub problem: Problem,
    #[arg(long, default_value_t = 32)]
    pub dim: usize,
    #[arg(long, default_value_t = 2000)]
    pub steps: usize,
    #[arg(long, default_value_t = 3)]
    pub seeds: u64,
    #[arg(long, default_value_t = 0.1)]
    pub lr: f64,
    /// Rows of the system matrix; twice the dimension by default.
    #[arg(long)]
    pub rows: Option<usize>,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 3)]
    pub qubits: usize,
    #[arg(long, default_value_t = 2)]
    pub classes: usize,
    #[arg(long, default_value_t = 16)]
    pub states: usize,
    #[arg(long, default_value_t = 100_000)]
    pub shots: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.001)]
    pub projection_std: f64,
}

pub fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Pretrain(a) => cmd_pretrain(&a),
        Command::Finetune(a) => cmd_finetune(&a),
        Command::Eval(a) => cmd_eval(&a),
        Command::Gradcheck(a) => cmd_gradcheck(&a),
        Command::CompareOptimizers(a) => cmd_compare(&a),
        Command::SimulateCircuit(a) => cmd_simulate(&a),
    }
}

fn cmd_pretrain(a: &PretrainArgs) -> Result<i32> {
    let run = RunConfig::load(&a.config)?;
    let text = at_path(&a.corpus, std::fs::read_to_string(&a.corpus))?;
    let vocab = Vocab::build(text.lines(), run.train.vocab_min_freq, run.model.vocab_size)?;
    info!("vocabulary: {} tokens", vocab.len());
    let mut sampler = PretrainSampler::new(text.lines(), &vocab, run.model.max_seq_len)?;
    let (model, mut store) = QBert::initialized(run.model.clone(), Mode::Pretrain)?;
    info!("{} parameters, {} sentences", store.num_scalars(), sampler.n_sentences());
    let records = pretrain(&model, &mut store, &mut sampler, &run.train, run.model.seed)?;

    write_file(&a.out.join("metrics.csv"), &pretrain_csv(&records))?;
    write_file(&a.out.join("config.toml"), &run.to_toml())?;
    Checkpoint::from_store(&store, &run.model, Arch::Qbert.name(), "pretrain", run.train.pretrain_steps, vocab.tokens().to_vec())
        .save(&a.out.join("model.ckpt"))?;
    if let Some(last) = records.last() {
        println!("step {}: loss_mlm {:.4} loss_nsp {:.4}", last.step, last.loss_mlm, last.loss_nsp);
    }
    Ok(0)
}

fn cmd_finetune(a: &FinetuneArgs) -> Result<i32> {
    let run = RunConfig::load(&a.config)?;
    let arch: Arch = a.arch.parse()?;
    let train_rows = read_tsv(&a.train)?;
    let dev_rows = a.dev.as_deref().map(read_tsv).transpose()?;

    let ckpt = match a.ckpt.as_str() {
        "none" => None,
        p => Some(Checkpoint::load(Path::new(p))?),
    };
    let vocab = match &ckpt {
        Some(c) => {
            let diff = config_diff(&c.header.model, &run.model, &FINETUNE_OVERRIDABLE);
            if !diff.is_empty() {
                return Err(Error::Config(format!("config does not match checkpoint {}: {}", a.ckpt, diff.join("; "))));
            }
            Vocab::from_tokens(c.header.vocab.clone())?
        }
        None => Vocab::build(train_rows.iter().map(|r| r.text.as_str()), run.train.vocab_min_freq, run.model.vocab_size)?,
    };

    let (model, mut store) = AnyClassifier::initialized(arch, run.model.clone())?;
    if let Some(c) = &ckpt {
        let n = c.restore_matching(&mut store)?;
        info!("loaded {n} of {} tensors from {}", store.len(), a.ckpt);
        if n == 0 {
            warn!("checkpoint shares no parameters with {}", arch.name());
        }
    }
    let max_len = run.model.max_seq_len;
    let train = FinetuneBatch::encode(&train_rows, &vocab, max_len);
    let dev = dev_rows.map(|rows| FinetuneBatch::encode(&rows, &vocab, max_len));
    let records = crate::train::finetune(&model, &mut store, &train, dev.as_ref(), &run.train, run.model.seed)?;

    write_file(&a.out.join("metrics.csv"), &finetune_csv(&records))?;
    write_file(&a.out.join("config.toml"), &run.to_toml())?;
    let steps = (train.len().div_ceil(run.train.finetune_batch) * run.train.epochs) as u64;
    Checkpoint::from_store(&store, &run.model, arch.name(), "finetune", steps, vocab.tokens().to_vec()).save(&a.out.join("model.ckpt"))?;
    for r in records.iter().rev().take(if dev.is_some() { 2 } else { 1 }).rev() {
        println!("epoch {} {}: loss {:.4} accuracy {:.4}", r.epoch, r.split, r.loss, r.accuracy);
    }
    Ok(0)
}

fn cmd_eval(a: &EvalArgs) -> Result<i32> {
    let ckpt = Checkpoint::load(&a.ckpt)?;
    if ckpt.header.mode != "finetune" {
        return Err(Error::Checkpoint(format!("{} holds a {} model; eval needs a fine-tuned one", a.ckpt.display(), ckpt.header.mode)));
    }
    let arch: Arch = ckpt.header.arch.parse()?;
    let mut store = crate::autodiff::ParamStore::new();
    let model = AnyClassifier::build(arch, ckpt.header.model.clone(), &mut store)?;
    ckpt.restore(&mut store)?;
    let vocab = Vocab::from_tokens(ckpt.header.vocab.clone())?;
    let data = FinetuneBatch::encode(&read_tsv(&a.data)?, &vocab, ckpt.header.model.max_seq_len);
    let e = evaluate(&model, &store, &data)?;
    println!("examples {}", data.len());
    println!("accuracy {:.6}", e.metrics.accuracy);
    println!("f1 {:.6}", e.metrics.f1);
    println!("mcc {:.6}", e.metrics.mcc);
    Ok(0)
}

fn cmd_gradcheck(a: &GradcheckArgs) -> Result<i32> {
    let cfg = match &a.config {
        Some(p) => RunConfig::load(p)?.model,
        None => ModelConfig::default(),
    };
    if let Some(l) = &a.layer {
        if !SUITE.contains(&l.as_str()) {
            return Err(Error::Config(format!("unknown layer `{l}`; known: {}", SUITE.join(", "))));
        }
    }
    let seeds: Vec<u64> = (0..a.seeds).collect();
    let results = run_suite(&cfg, a.layer.as_deref(), &seeds)?;
    let mut failed = 0;
    for r in &results {
        let status = if r.passed() { "ok" } else { "FAIL" };
        println!("{:<26} seed {} max rel error {:.3e} (tol {:.0e}) {status}", r.name, r.seed, r.report.max_error(), r.tolerance);
        if !r.passed() {
            failed += 1;
            warn!("{}", r.report);
        }
    }
    println!("{} checks, {failed} failed", results.len());
    Ok(if failed == 0 { 0 } else { 1 })
}

fn cmd_compare(a: &CompareArgs) -> Result<i32> {
    let Problem::Lsq = a.problem;
    let cfg = AdamWConfig {
        alpha: a.lr,
        ..AdamWConfig::default()
    };
    cfg.validate()?;
    let rows = a.rows.unwrap_or(2 * a.dim);
    let mut csv = String::from("seed,step,cadamw,radamw\n");
    for seed in 0..a.seeds {
        let problem = LeastSquares::random_consistent(a.dim, rows, seed);
        let curves = compare_optimizers(&problem, a.steps, &cfg)?;
        for (i, (c, r)) in curves.cadamw.iter().zip(&curves.radamw).enumerate() {
            let _ = writeln!(csv, "{seed},{},{c:.10e},{r:.10e}", i + 1);
        }
        let (c, r) = (curves.cadamw.last().copied().unwrap_or(f64::NAN), curves.radamw.last().copied().unwrap_or(f64::NAN));
        eprintln!("seed {seed}: final cadamw {c:.4e} radamw {r:.4e}");
    }
    match &a.out {
        Some(p) => write_file(p, &csv)?,
        None => print!("{csv}"),
    }
    Ok(0)
}

fn cmd_simulate(a: &SimulateArgs) -> Result<i32> {
    let cfg = HarnessConfig {
        n_qubits: a.qubits,
        classes: a.classes,
        states: a.states,
        shots: a.shots,
        seed: a.seed,
        projection_std: a.projection_std,
        ..HarnessConfig::default()
    };
    print!("{}", equivalence_harness(&cfg, None)?);
    Ok(0)
}
