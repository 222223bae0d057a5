//! `mml` — episodic evaluation and fusion training for the multi-level
//! metric classifier head.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mml::bank_io::{self, BankError};
use mml::checkpoint::{self, CheckpointError};
use mml::harness::{
    evaluate, sweep, train_fusion, BankSource, BranchMask, HarnessError, RunConfig, RunMode,
    TrainParams,
};
use mml::report;
use mml_core::episodes::{Split, SyntheticSpec};
use mml_core::fusion::FusionWeights;
use mml_core::metrics::{DistributionKind, KlDirection, MetricConfig};

#[derive(Parser)]
#[command(
    name = "mml",
    version,
    about = "Multi-level metric few-shot classifier head: episodic evaluation, fusion training, ξ/k sweeps, and synthetic bank generation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate an episode stream and report accuracy with a 95% CI.
    Eval(RunArgs),
    /// Train the fusion weights on the train split and write a checkpoint.
    TrainFusion(TrainFusionArgs),
    /// Evaluate a ξ×k grid over a shared episode stream.
    Sweep(RunArgs),
    /// Generate a synthetic feature bank file.
    GenBank(GenBankArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Feature bank file (MMLF format).
    #[arg(long, conflicts_with = "synthetic")]
    bank: Option<PathBuf>,
    /// Synthetic bank spec, e.g.
    /// "classes=25,per-class=20,c=16,h=5,w=5,mean-scale=1.0,noise=1.0,part-signal=true,seed=7".
    #[arg(long)]
    synthetic: Option<String>,
    /// Split to sample episodes from (train|val|test). Defaults to test for
    /// eval/sweep and train for train-fusion.
    #[arg(long)]
    split: Option<String>,
    #[arg(long, default_value_t = 5)]
    n_way: usize,
    #[arg(long, default_value_t = 1)]
    m_shot: usize,
    /// Queries per class in each episode.
    #[arg(long, default_value_t = 15)]
    queries: usize,
    /// Number of episodes.
    #[arg(long, default_value_t = 1000)]
    tasks: usize,
    /// Part-level neighbour count ξ; sweep accepts a comma-separated list.
    #[arg(long, default_value = "1")]
    xi: String,
    /// Pixel-level neighbour count k; sweep accepts a comma-separated list.
    #[arg(long, default_value = "1")]
    k: String,
    /// Distribution metric: kl | wass | wass-exact.
    #[arg(long, default_value = "kl")]
    dist: String,
    /// KL argument order: support-to-query | query-to-support.
    #[arg(long, default_value = "support-to-query")]
    kl_direction: String,
    /// Active branches, comma-separated subset of part,pixel,dist.
    #[arg(long, default_value = "part,pixel,dist")]
    branches: String,
    /// Covariance shrinkage relative to the mean covariance diagonal.
    #[arg(long, default_value_t = mml_core::metrics::DEFAULT_RELATIVE_SHRINKAGE)]
    shrinkage: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Fusion weight checkpoint to load; identity weights if omitted.
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Report output path; stdout if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Report format: json | tsv.
    #[arg(long, default_value = "json")]
    format: String,
}

#[derive(Args)]
struct TrainFusionArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Initial learning rate of the fusion gradient steps.
    #[arg(long, default_value_t = 0.01)]
    lr: f64,
    /// Learning-rate decay factor, applied every --lr-decay-every episodes.
    #[arg(long, default_value_t = 0.5)]
    lr_decay: f64,
    /// Decay interval in episodes; 0 disables decay.
    #[arg(long, default_value_t = 0)]
    lr_decay_every: usize,
}

#[derive(Args)]
struct GenBankArgs {
    /// Synthetic bank spec (same key=value format as --synthetic).
    #[arg(long)]
    synthetic: String,
    /// Output bank path.
    #[arg(long)]
    out: PathBuf,
    /// Optional sidecar manifest path (class-id → name).
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

enum AppError {
    Config(String),
    Harness(HarnessError),
    Bank(BankError),
    Checkpoint(CheckpointError),
    Io(std::io::Error),
}

impl AppError {
    fn exit_code(&self) -> u8 {
        match self {
            AppError::Config(_) => 2,
            AppError::Harness(e) => e.exit_code(),
            AppError::Bank(_) | AppError::Checkpoint(_) | AppError::Io(_) => 3,
        }
    }

    fn message(&self) -> String {
        match self {
            AppError::Config(m) => format!("invalid config: {m}"),
            AppError::Harness(e) => e.to_string(),
            AppError::Bank(e) => e.to_string(),
            AppError::Checkpoint(e) => e.to_string(),
            AppError::Io(e) => format!("io error: {e}"),
        }
    }
}

impl From<HarnessError> for AppError {
    fn from(e: HarnessError) -> Self {
        AppError::Harness(e)
    }
}

impl From<BankError> for AppError {
    fn from(e: BankError) -> Self {
        AppError::Bank(e)
    }
}

impl From<CheckpointError> for AppError {
    fn from(e: CheckpointError) -> Self {
        AppError::Checkpoint(e)
    }
}

impl From<std::io::Error> for AppError {
    fn from(e: std::io::Error) -> Self {
        AppError::Io(e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<(), AppError> {
    match cli.command {
        Command::Eval(args) => {
            let cfg = build_config(&args, RunMode::Eval, TrainParams::default())?;
            let weights = load_weights_or_default(&args.weights)?;
            let xi = parse_list(&args.xi, "xi")?;
            let k = parse_list(&args.k, "k")?;
            if xi.len() != 1 || k.len() != 1 {
                return Err(AppError::Config(
                    "eval takes a single --xi and --k; use the sweep subcommand for grids".into(),
                ));
            }
            let report = evaluate(&cfg, &weights)?;
            let text = match args.format.as_str() {
                "json" => report::report_to_json(&report),
                "tsv" => report::reports_to_tsv(std::slice::from_ref(&report)),
                other => return Err(AppError::Config(format!("unknown format {other:?}"))),
            };
            emit(&args.out, &text)
        }
        Command::Sweep(args) => {
            let cfg = build_config(&args, RunMode::Sweep, TrainParams::default())?;
            let weights = load_weights_or_default(&args.weights)?;
            let xi = parse_list(&args.xi, "xi")?;
            let k = parse_list(&args.k, "k")?;
            let reports = sweep(&cfg, &weights, &xi, &k)?;
            let text = match args.format.as_str() {
                "json" => report::reports_to_json(&reports),
                "tsv" => report::reports_to_tsv(&reports),
                other => return Err(AppError::Config(format!("unknown format {other:?}"))),
            };
            emit(&args.out, &text)
        }
        Command::TrainFusion(args) => {
            let train = TrainParams {
                lr: args.lr,
                lr_decay: args.lr_decay,
                lr_decay_every: args.lr_decay_every,
            };
            let cfg = build_config(&args.run, RunMode::TrainFusion, train)?;
            let weights_path = args.run.weights.clone().ok_or_else(|| {
                AppError::Config("train-fusion needs --weights PATH to write the checkpoint".into())
            })?;
            match train_fusion(&cfg) {
                Ok(outcome) => {
                    checkpoint::save_weights(&outcome.weights, &weights_path)?;
                    let summary = serde_json::json!({
                        "mode": "train-fusion",
                        "episodes": outcome.episodes,
                        "final_loss": outcome.final_loss,
                        "weights": weights_path.display().to_string(),
                    });
                    emit(
                        &args.run.out,
                        &serde_json::to_string_pretty(&summary).expect("json"),
                    )
                }
                Err(HarnessError::Diverged {
                    task,
                    seed,
                    last_good,
                }) => {
                    checkpoint::save_weights(&last_good, &weights_path)?;
                    Err(AppError::Harness(HarnessError::Diverged {
                        task,
                        seed,
                        last_good,
                    }))
                }
                Err(e) => Err(e.into()),
            }
        }
        Command::GenBank(args) => {
            let spec = parse_synthetic_spec(&args.synthetic, args.seed)?;
            let bank =
                mml_core::episodes::generate_synthetic(&spec).map_err(HarnessError::Core)?;
            bank_io::write_bank_to_path(&bank, &args.out)?;
            if let Some(manifest_path) = &args.manifest {
                let names: BTreeMap<u32, String> = bank
                    .classes()
                    .iter()
                    .map(|c| (c.id, format!("class-{}", c.id)))
                    .collect();
                let file = std::fs::File::create(manifest_path)?;
                bank_io::write_manifest(&names, file)?;
            }
            eprintln!(
                "wrote {} classes of shape {:?} to {}",
                bank.classes().len(),
                bank.shape(),
                args.out.display()
            );
            Ok(())
        }
    }
}

fn build_config(
    args: &RunArgs,
    mode: RunMode,
    train: TrainParams,
) -> Result<RunConfig, AppError> {
    let source = match (&args.bank, &args.synthetic) {
        (Some(path), None) => BankSource::Path(path.clone()),
        (None, Some(spec)) => BankSource::Synthetic(parse_synthetic_spec(spec, args.seed)?),
        (None, None) => {
            return Err(AppError::Config(
                "either --bank PATH or --synthetic SPEC is required".into(),
            ))
        }
        (Some(_), Some(_)) => unreachable!("clap conflicts_with"),
    };
    let split = match &args.split {
        Some(s) => parse_split(s)?,
        None => match mode {
            RunMode::TrainFusion => Split::Train,
            _ => Split::Test,
        },
    };
    let xi = parse_list(&args.xi, "xi")?;
    let k = parse_list(&args.k, "k")?;
    let metric = MetricConfig {
        xi: xi[0],
        k: k[0],
        distribution: parse_dist(&args.dist)?,
        shrinkage: args.shrinkage,
        kl_direction: parse_kl_direction(&args.kl_direction)?,
    };
    Ok(RunConfig {
        mode,
        source,
        split,
        n_way: args.n_way,
        m_shot: args.m_shot,
        queries_per_class: args.queries,
        tasks: args.tasks,
        metric,
        branches: parse_branches(&args.branches)?,
        seed: args.seed,
        train,
    })
}

fn load_weights_or_default(path: &Option<PathBuf>) -> Result<FusionWeights, AppError> {
    match path {
        Some(p) => Ok(checkpoint::load_weights(p)?),
        None => Ok(FusionWeights::default()),
    }
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<(), AppError> {
    match out {
        Some(path) => {
            std::fs::write(path, text)?;
            Ok(())
        }
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn parse_list(s: &str, what: &str) -> Result<Vec<usize>, AppError> {
    let values: Result<Vec<usize>, _> = s.split(',').map(|t| t.trim().parse()).collect();
    let values = values.map_err(|_| AppError::Config(format!("bad {what} list {s:?}")))?;
    if values.is_empty() {
        return Err(AppError::Config(format!("{what} list is empty")));
    }
    Ok(values)
}

fn parse_split(s: &str) -> Result<Split, AppError> {
    match s {
        "train" => Ok(Split::Train),
        "val" => Ok(Split::Val),
        "test" => Ok(Split::Test),
        other => Err(AppError::Config(format!(
            "unknown split {other:?} (expected train|val|test)"
        ))),
    }
}

fn parse_dist(s: &str) -> Result<DistributionKind, AppError> {
    match s {
        "kl" => Ok(DistributionKind::Kl),
        "wass" => Ok(DistributionKind::WassersteinApprox),
        "wass-exact" => Ok(DistributionKind::WassersteinExact),
        other => Err(AppError::Config(format!(
            "unknown distribution metric {other:?} (expected kl|wass|wass-exact)"
        ))),
    }
}

fn parse_kl_direction(s: &str) -> Result<KlDirection, AppError> {
    match s {
        "support-to-query" => Ok(KlDirection::SupportToQuery),
        "query-to-support" => Ok(KlDirection::QueryToSupport),
        other => Err(AppError::Config(format!(
            "unknown KL direction {other:?} (expected support-to-query|query-to-support)"
        ))),
    }
}

fn parse_branches(s: &str) -> Result<BranchMask, AppError> {
    let mut mask = BranchMask {
        part: false,
        pixel: false,
        dist: false,
    };
    for token in s.split(',') {
        match token.trim() {
            "part" => mask.part = true,
            "pixel" => mask.pixel = true,
            "dist" => mask.dist = true,
            "" => {}
            other => {
                return Err(AppError::Config(format!(
                    "unknown branch {other:?} (expected part|pixel|dist)"
                )))
            }
        }
    }
    if mask.is_empty() {
        return Err(AppError::Config("branch mask is empty".into()));
    }
    Ok(mask)
}

/// Parses the synthetic-bank spec string. Unset keys fall back to a
/// 25-class, 20-image, 16×5×5 bank with unit scales; `seed` falls back to
/// `default_seed` (the run seed).
fn parse_synthetic_spec(s: &str, default_seed: u64) -> Result<SyntheticSpec, AppError> {
    let mut spec = SyntheticSpec {
        num_classes: 25,
        per_class: 20,
        shape: (16, 5, 5),
        class_mean_scale: 1.0,
        noise_scale: 1.0,
        part_signal: false,
        seed: default_seed,
    };
    for pair in s.split(',') {
        let pair = pair.trim();
        if pair.is_empty() {
            continue;
        }
        let (key, value) = pair
            .split_once('=')
            .ok_or_else(|| AppError::Config(format!("bad synthetic spec entry {pair:?}")))?;
        let bad = |what: &str| AppError::Config(format!("bad synthetic {what} value {value:?}"));
        match key.trim() {
            "classes" => spec.num_classes = value.parse().map_err(|_| bad("classes"))?,
            "per-class" => spec.per_class = value.parse().map_err(|_| bad("per-class"))?,
            "c" => spec.shape.0 = value.parse().map_err(|_| bad("c"))?,
            "h" => spec.shape.1 = value.parse().map_err(|_| bad("h"))?,
            "w" => spec.shape.2 = value.parse().map_err(|_| bad("w"))?,
            "mean-scale" => {
                spec.class_mean_scale = value.parse().map_err(|_| bad("mean-scale"))?
            }
            "noise" => spec.noise_scale = value.parse().map_err(|_| bad("noise"))?,
            "part-signal" => {
                spec.part_signal = match value {
                    "true" | "1" | "on" => true,
                    "false" | "0" | "off" => false,
                    _ => return Err(bad("part-signal")),
                }
            }
            "seed" => spec.seed = value.parse().map_err(|_| bad("seed"))?,
            other => {
                return Err(AppError::Config(format!(
                    "unknown synthetic spec key {other:?}"
                )))
            }
        }
    }
    Ok(spec)
}
