//! The `geometre` command line.
//!
//! Exit codes: 0 on success, 1 on usage or validation errors, 2 when training
//! aborts on a non-finite loss or gradient.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use serde::de::DeserializeOwned;

use crate::dataset::{generate_synthetic, load_dataset, Split, SyntheticConfig};
use crate::error::{Error, Result, TrainError};
use crate::evaluator;
use crate::geometry;
use crate::ids::RelationId;
use crate::store::{EmbeddingStore, ProjectionMode};
use crate::trainer::{self, TrainingConfig};
use crate::transitivity::{self, ChainSummary};

#[derive(Debug, Parser)]
#[command(name = "geometre", version, about = "Box embeddings for logical queries over knowledge graphs")]
pub struct Cli {
    /// Random seed; overrides the config file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// TOML config for the subcommand (training or synthetic-generation keys).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Log filter such as `info` or `debug`.
    #[arg(long, global = true, default_value = "warn")]
    pub log_level: String,
    /// Worker cap; all computation is single-threaded, so values above 1 are ignored.
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model on a dataset directory.
    Train(TrainArgs),
    /// Per-type filtered MRR of a checkpoint on one split.
    Evaluate(EvaluateArgs),
    /// Chain extraction and Spearman analysis for a transitive relation.
    AnalyzeTransitivity(AnalyzeArgs),
    /// Write a synthetic dataset directory.
    GenerateSynthetic(GenerateArgs),
    /// Closed-form versus Monte-Carlo box overlap probabilities as CSV.
    VerifyGeometry(VerifyArgs),
    /// Validate a dataset directory produced by an external converter.
    ConvertCheck(ConvertCheckArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Output directory for checkpoints and the metrics log.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub negatives_k: Option<usize>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// full, additive or multiplicative.
    #[arg(long)]
    pub projection_mode: Option<ProjectionMode>,
    /// Learn separate answer points.
    #[arg(long)]
    pub answer_embedding: Option<bool>,
    #[arg(long)]
    pub transitive_loss: Option<bool>,
    #[arg(long)]
    pub answer_consistency_weight: Option<f64>,
    #[arg(long)]
    pub log_interval: Option<usize>,
    #[arg(long)]
    pub eval_interval: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "test")]
    pub split: Split,
    /// Per-type CSV; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON summary path.
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub relation: u32,
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Dataset whose training triples define the chains.
    #[arg(long)]
    pub data: PathBuf,
    /// Chain preservation CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// JSON summary path; stdout when omitted.
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub n_entities: Option<usize>,
    #[arg(long)]
    pub n_relations: Option<usize>,
    #[arg(long)]
    pub n_transitive: Option<usize>,
    #[arg(long)]
    pub chain_length: Option<usize>,
    #[arg(long)]
    pub density: Option<f64>,
    #[arg(long)]
    pub train_queries_per_type: Option<usize>,
    #[arg(long)]
    pub eval_queries_per_type: Option<usize>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Comma-separated dimensions.
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8")]
    pub dims: Vec<u32>,
    #[arg(long, default_value_t = 1_000_000)]
    pub samples: u64,
    /// Side of the cube the centers are drawn from.
    #[arg(long, default_value_t = 10.0)]
    pub length: f64,
    /// Box half-width.
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    /// CSV path; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ConvertCheckArgs {
    #[arg(long)]
    pub data: PathBuf,
}

/// Parses `argv`, runs the subcommand and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let _ = env_logger::Builder::new().parse_filters(&cli.log_level).try_init();
    if cli.threads > 1 {
        warn!("--threads {} requested; computation is single-threaded", cli.threads);
    }
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Train(TrainError::NonFinite { .. }) => 2,
        _ => 1,
    }
}

fn read_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = fs::read_to_string(p)?;
            toml::from_str(&text).map_err(|e| Error::Other(format!("{}: {e}", p.display())))
        }
    }
}

fn set<T>(slot: &mut T, flag: Option<T>) {
    if let Some(v) = flag {
        *slot = v;
    }
}

/// Config file values overridden by explicit flags.
pub fn resolve_training_config(cli: &Cli, args: &TrainArgs) -> Result<TrainingConfig> {
    let mut cfg: TrainingConfig = read_config(cli.config.as_deref())?;
    set(&mut cfg.seed, cli.seed);
    set(&mut cfg.steps, args.steps);
    set(&mut cfg.dim, args.dim);
    set(&mut cfg.learning_rate, args.learning_rate);
    set(&mut cfg.batch_size, args.batch_size);
    set(&mut cfg.negatives_k, args.negatives_k);
    set(&mut cfg.gamma, args.gamma);
    set(&mut cfg.alpha, args.alpha);
    set(&mut cfg.lambda, args.lambda);
    set(&mut cfg.projection_mode, args.projection_mode);
    set(&mut cfg.answer_embedding, args.answer_embedding);
    set(&mut cfg.transitive_loss_enabled, args.transitive_loss);
    set(&mut cfg.answer_consistency_weight, args.answer_consistency_weight);
    set(&mut cfg.log_interval, args.log_interval);
    set(&mut cfg.eval_interval, args.eval_interval);
    set(&mut cfg.patience, args.patience);
    cfg.validate()?;
    Ok(cfg)
}

pub fn resolve_synthetic_config(cli: &Cli, args: &GenerateArgs) -> Result<SyntheticConfig> {
    let mut cfg: SyntheticConfig = read_config(cli.config.as_deref())?;
    set(&mut cfg.seed, cli.seed);
    set(&mut cfg.n_entities, args.n_entities);
    set(&mut cfg.n_relations, args.n_relations);
    set(&mut cfg.n_transitive, args.n_transitive);
    set(&mut cfg.chain_length, args.chain_length);
    set(&mut cfg.density, args.density);
    set(&mut cfg.train_queries_per_type, args.train_queries_per_type);
    set(&mut cfg.eval_queries_per_type, args.eval_queries_per_type);
    Ok(cfg)
}

fn write_or_print(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Train(args) => {
            let cfg = resolve_training_config(cli, args)?;
            info!("resolved training config: {}", serde_json::to_string(&cfg).expect("config serializes"));
            let ds = load_dataset(&args.data)?;
            let outcome = trainer::train(&ds, &cfg, Some(&args.out))?;
            fs::write(
                args.out.join("config.json"),
                serde_json::to_string_pretty(&cfg).expect("config serializes") + "\n",
            )?;
            info!(
                "trained {} steps; final loss {:?}; best validation MRR {:?}",
                outcome.steps_run,
                outcome.final_loss,
                outcome.best.as_ref().map(|b| b.1)
            );
            Ok(())
        }
        Command::Evaluate(args) => {
            let store = EmbeddingStore::load_checkpoint(&args.checkpoint)?;
            let ds = load_dataset(&args.data)?;
            check_vocab(&store, &ds)?;
            let report = evaluator::evaluate(&store, ds.queries(args.split), args.split)?;
            write_or_print(args.out.as_deref(), &report.to_csv())?;
            if let Some(p) = &args.summary {
                fs::write(p, serde_json::to_string_pretty(&report.summary_json()).expect("json") + "\n")?;
            }
            Ok(())
        }
        Command::AnalyzeTransitivity(args) => {
            let store = EmbeddingStore::load_checkpoint(&args.checkpoint)?;
            let ds = load_dataset(&args.data)?;
            check_vocab(&store, &ds)?;
            let r = RelationId(args.relation);
            let chains = transitivity::extract_chains(&ds.kg.train, r);
            transitivity::chain_preservation_report(&chains, &store, r, &args.out)?;
            let summary = ChainSummary {
                relation: r.0,
                n_chains: chains.len(),
                spearman_mean: transitivity::spearman_chain_score(&chains, &store, r)?,
            };
            let json = serde_json::to_string_pretty(&summary).expect("json") + "\n";
            write_or_print(args.summary.as_deref(), &json)
        }
        Command::GenerateSynthetic(args) => {
            let cfg = resolve_synthetic_config(cli, args)?;
            info!("resolved synthetic config: {}", serde_json::to_string(&cfg).expect("config serializes"));
            let ds = generate_synthetic(&cfg)?;
            ds.write(&args.out)?;
            Ok(())
        }
        Command::VerifyGeometry(args) => {
            let seed = cli.seed.unwrap_or(0);
            let mut csv = String::from("n,closed_form,estimate,std_error\n");
            for &n in &args.dims {
                let closed = geometry::overlap_probability_closed_form(args.length, args.sigma, n)?;
                let est = geometry::estimate_overlap_probability(args.length, args.sigma, n, args.samples, seed)?;
                csv.push_str(&format!("{n},{closed},{},{}\n", est.estimate, est.std_error));
            }
            write_or_print(args.out.as_deref(), &csv)
        }
        Command::ConvertCheck(args) => {
            let ds = load_dataset(&args.data)?;
            let mut out = String::from("split,type,count\n");
            for split in Split::ALL {
                for (t, n) in ds.type_counts(split) {
                    out.push_str(&format!("{},{t},{n}\n", split.as_str()));
                }
            }
            print!("{out}");
            Ok(())
        }
    }
}

fn check_vocab(store: &EmbeddingStore, ds: &crate::dataset::Dataset) -> Result<()> {
    if store.num_entities() != ds.kg.num_entities() || store.num_relations() != ds.kg.relations.len() {
        return Err(Error::Other(format!(
            "checkpoint has {} entities and {} relations but the dataset has {} and {}",
            store.num_entities(),
            store.num_relations(),
            ds.kg.num_entities(),
            ds.kg.relations.len()
        )));
    }
    Ok(())
}
