//! End-to-end drivers: run episode streams through the metric branches and
//! the fusion layer, aggregate accuracy with 95% confidence intervals,
//! train the fusion parameters, and sweep ξ/k grids over shared episode
//! streams.

use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;

use mml_core::descriptors::{part_view, pixel_view, PartView, PixelView};
use mml_core::episodes::{
    generate_synthetic, mix_seed, sample_episode, Episode, EpisodeDraw, FeatureBank, Split,
    StreamHasher, SyntheticSpec,
};
use mml_core::fusion::{train_step, FusionWeights, TrainExample};
use mml_core::metrics::{
    distribution_distance, fit_gaussian_relative, part_score, pixel_score, BranchScores,
    GaussianStats, MetricConfig,
};
use mml_core::MmlError;
use thiserror::Error;

use crate::bank_io::{load_bank_from_path, BankError};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] MmlError),
    #[error(transparent)]
    Bank(#[from] BankError),
    #[error("episode {task} (seed {seed}): {source}")]
    Episode {
        task: usize,
        seed: u64,
        source: MmlError,
    },
    #[error("training diverged at episode {task} (seed {seed}); last finite weights preserved")]
    Diverged {
        task: usize,
        seed: u64,
        last_good: Box<FusionWeights>,
    },
    #[error("sweep integrity violated: episode stream hash differs across grid cells")]
    StreamHashMismatch,
}

impl HarnessError {
    /// Process exit code: 2 invalid config, 3 data/parse error, 4 numerical.
    pub fn exit_code(&self) -> u8 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Core(MmlError::InvalidArgument(_)) => 2,
            HarnessError::Core(MmlError::NumericalDomain(_)) => 4,
            HarnessError::Bank(BankError::Invalid(MmlError::InvalidArgument(_))) => 3,
            HarnessError::Bank(_) => 3,
            HarnessError::Episode { source, .. } => match source {
                MmlError::InvalidArgument(_) => 2,
                MmlError::NumericalDomain(_) => 4,
            },
            HarnessError::Diverged { .. } => 4,
            HarnessError::StreamHashMismatch => 4,
        }
    }
}

/// Which of the three branches participate in a run. Masked-out branches are
/// never computed; their scores enter the fusion layer as zero, which leaves
/// class probabilities untouched as long as the branch's running stats are
/// the identity (0, 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BranchMask {
    pub part: bool,
    pub pixel: bool,
    pub dist: bool,
}

impl BranchMask {
    pub fn all() -> Self {
        Self {
            part: true,
            pixel: true,
            dist: true,
        }
    }

    pub fn is_empty(&self) -> bool {
        !(self.part || self.pixel || self.dist)
    }

    pub fn label(&self) -> String {
        let mut parts = Vec::new();
        if self.part {
            parts.push("part");
        }
        if self.pixel {
            parts.push("pixel");
        }
        if self.dist {
            parts.push("dist");
        }
        parts.join(",")
    }
}

/// Where the feature bank comes from.
#[derive(Debug, Clone)]
pub enum BankSource {
    Path(PathBuf),
    Synthetic(SyntheticSpec),
}

impl BankSource {
    pub fn describe(&self) -> String {
        match self {
            BankSource::Path(p) => p.display().to_string(),
            BankSource::Synthetic(spec) => format!(
                "synthetic(classes={},per-class={},shape={}x{}x{},mean-scale={},noise={},part-signal={},seed={})",
                spec.num_classes,
                spec.per_class,
                spec.shape.0,
                spec.shape.1,
                spec.shape.2,
                spec.class_mean_scale,
                spec.noise_scale,
                spec.part_signal,
                spec.seed
            ),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunMode {
    Eval,
    TrainFusion,
    Sweep,
}

impl RunMode {
    pub fn name(self) -> &'static str {
        match self {
            RunMode::Eval => "eval",
            RunMode::TrainFusion => "train-fusion",
            RunMode::Sweep => "sweep",
        }
    }
}

/// Learning-rate schedule for fusion training. `decay_every == 0` disables
/// decay.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainParams {
    pub lr: f64,
    pub lr_decay: f64,
    pub lr_decay_every: usize,
}

impl Default for TrainParams {
    fn default() -> Self {
        Self {
            lr: 0.01,
            lr_decay: 0.5,
            lr_decay_every: 0,
        }
    }
}

/// Full description of one run. `(config, seed, weights)` determine every
/// reported number bit-exactly.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub mode: RunMode,
    pub source: BankSource,
    pub split: Split,
    pub n_way: usize,
    pub m_shot: usize,
    pub queries_per_class: usize,
    pub tasks: usize,
    pub metric: MetricConfig,
    pub branches: BranchMask,
    pub seed: u64,
    pub train: TrainParams,
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.branches.is_empty() {
            return Err(HarnessError::Config("branch mask is empty".into()));
        }
        if self.n_way < 2 {
            return Err(HarnessError::Config(format!(
                "n_way must be >= 2, got {}",
                self.n_way
            )));
        }
        if self.m_shot < 1 || self.queries_per_class < 1 {
            return Err(HarnessError::Config(
                "m_shot and queries_per_class must be >= 1".into(),
            ));
        }
        if self.tasks < 1 && self.mode != RunMode::TrainFusion {
            return Err(HarnessError::Config("tasks must be >= 1".into()));
        }
        if let BankSource::Synthetic(spec) = &self.source {
            spec.validate()?;
        }
        self.metric.validate()?;
        if self.mode == RunMode::TrainFusion {
            if !self.train.lr.is_finite() || self.train.lr < 0.0 {
                return Err(HarnessError::Config(format!(
                    "learning rate must be finite and >= 0, got {}",
                    self.train.lr
                )));
            }
            if !self.train.lr_decay.is_finite() || self.train.lr_decay <= 0.0 {
                return Err(HarnessError::Config("lr decay factor must be > 0".into()));
            }
        }
        Ok(())
    }

    pub fn resolve_bank(&self) -> Result<FeatureBank, HarnessError> {
        match &self.source {
            BankSource::Path(path) => Ok(load_bank_from_path(path)?),
            BankSource::Synthetic(spec) => Ok(generate_synthetic(spec)?),
        }
    }
}

/// Aggregated result of one evaluation run.
#[derive(Debug, Clone)]
pub struct RunReport {
    /// Mean task accuracy in `[0, 1]`.
    pub accuracy: f64,
    /// Half-width of the 95% confidence interval: `1.96·sd/√tasks` over the
    /// per-task accuracies, with `sd` the sample standard deviation.
    pub ci95: f64,
    pub tasks: usize,
    /// Number of per-task accuracies retained in memory for the statistic.
    pub per_task_retained: usize,
    /// Per-task accuracies (not serialized into reports).
    pub per_task_accuracy: Vec<f64>,
    /// Mean raw branch scores over all (query, class) pairs; masked-out
    /// branches report 0.
    pub per_branch_mean: [f64; 3],
    /// FNV-1a hash of the sampled (class, image) index stream.
    pub stream_hash: u64,
    pub wall_time_s: f64,
    /// Config echo for the report document.
    pub config: ConfigEcho,
}

/// Flat, serializable echo of the run configuration.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ConfigEcho {
    pub mode: String,
    pub source: String,
    pub split: String,
    pub n_way: usize,
    pub m_shot: usize,
    pub queries_per_class: usize,
    pub tasks: usize,
    pub xi: usize,
    pub k: usize,
    pub distribution: String,
    pub kl_direction: String,
    pub shrinkage: f64,
    pub branches: String,
    pub seed: u64,
}

impl ConfigEcho {
    fn from_config(cfg: &RunConfig) -> Self {
        use mml_core::metrics::{DistributionKind, KlDirection};
        Self {
            mode: cfg.mode.name().to_string(),
            source: cfg.source.describe(),
            split: cfg.split.name().to_string(),
            n_way: cfg.n_way,
            m_shot: cfg.m_shot,
            queries_per_class: cfg.queries_per_class,
            tasks: cfg.tasks,
            xi: cfg.metric.xi,
            k: cfg.metric.k,
            distribution: match cfg.metric.distribution {
                DistributionKind::Kl => "kl",
                DistributionKind::WassersteinExact => "wass-exact",
                DistributionKind::WassersteinApprox => "wass",
            }
            .to_string(),
            kl_direction: match cfg.metric.kl_direction {
                KlDirection::SupportToQuery => "support-to-query",
                KlDirection::QueryToSupport => "query-to-support",
            }
            .to_string(),
            shrinkage: cfg.metric.shrinkage,
            branches: cfg.branches.label(),
            seed: cfg.seed,
        }
    }
}

/// Per-class cached context for scoring one episode.
struct ClassContext {
    part: Option<PartView>,
    pixel: Option<PixelView>,
    gauss: Option<GaussianStats>,
}

/// Branch scores for every (query, class) pair of an episode, with
/// masked-out branches left at zero. Support views and Gaussians are
/// computed once per class, query views once per query; the arithmetic is
/// identical to composing `metrics::branch_scores` pair by pair.
pub fn episode_branch_scores(
    episode: &Episode,
    metric: &MetricConfig,
    mask: &BranchMask,
) -> Result<Vec<TrainExample>, MmlError> {
    metric.validate()?;
    let needs_pixel = mask.pixel || mask.dist;
    let mut classes = Vec::with_capacity(episode.support.len());
    for shots in &episode.support {
        let part = if mask.part {
            Some(part_view(shots)?)
        } else {
            None
        };
        let pixel = if needs_pixel {
            Some(pixel_view(shots)?)
        } else {
            None
        };
        let gauss = if mask.dist {
            Some(fit_gaussian_relative(
                pixel.as_ref().expect("pixel view exists when dist is on"),
                metric.shrinkage,
            )?)
        } else {
            None
        };
        classes.push(ClassContext { part, pixel, gauss });
    }

    let mut out = Vec::with_capacity(episode.queries.len());
    for (query_map, label) in &episode.queries {
        let query = core::slice::from_ref(query_map);
        let q_part = if mask.part { Some(part_view(query)?) } else { None };
        let q_pixel = if needs_pixel {
            Some(pixel_view(query)?)
        } else {
            None
        };
        let q_gauss = if mask.dist {
            Some(fit_gaussian_relative(
                q_pixel.as_ref().expect("pixel view exists when dist is on"),
                metric.shrinkage,
            )?)
        } else {
            None
        };

        let mut per_class = Vec::with_capacity(classes.len());
        for ctx in &classes {
            let d_part = match (&q_part, &ctx.part) {
                (Some(q), Some(s)) => part_score(q, s, metric.xi)?,
                _ => 0.0,
            };
            let d_pixel = if mask.pixel {
                match (&q_pixel, &ctx.pixel) {
                    (Some(q), Some(s)) => pixel_score(q, s, metric.k)?,
                    _ => 0.0,
                }
            } else {
                0.0
            };
            let d_dist = match (&q_gauss, &ctx.gauss) {
                (Some(q), Some(s)) => distribution_distance(q, s, metric)?,
                _ => 0.0,
            };
            per_class.push(BranchScores {
                d_part,
                d_pixel,
                d_dist,
            });
        }
        out.push(TrainExample {
            per_class,
            label: *label,
        });
    }
    Ok(out)
}

struct TaskOutcome {
    accuracy: f64,
    branch_sums: [f64; 3],
    pairs: usize,
    draw: EpisodeDraw,
}

fn run_task(
    bank: &FeatureBank,
    cfg: &RunConfig,
    weights: &FusionWeights,
    task: usize,
) -> Result<TaskOutcome, HarnessError> {
    let seed = mix_seed(cfg.seed, task as u64);
    let wrap = |source: MmlError| HarnessError::Episode { task, seed, source };
    let episode = sample_episode(
        bank,
        cfg.split,
        cfg.n_way,
        cfg.m_shot,
        cfg.queries_per_class,
        seed,
    )
    .map_err(wrap)?;
    let examples = episode_branch_scores(&episode, &cfg.metric, &cfg.branches).map_err(wrap)?;

    let mut correct = 0usize;
    let mut branch_sums = [0.0f64; 3];
    let mut pairs = 0usize;
    for ex in &examples {
        let sv = weights.fuse_eval(&ex.per_class).map_err(wrap)?;
        if sv.argmax() == ex.label {
            correct += 1;
        }
        for bs in &ex.per_class {
            branch_sums[0] += bs.d_part;
            branch_sums[1] += bs.d_pixel;
            branch_sums[2] += bs.d_dist;
            pairs += 1;
        }
    }
    Ok(TaskOutcome {
        accuracy: correct as f64 / examples.len() as f64,
        branch_sums,
        pairs,
        draw: episode.draw,
    })
}

/// Mean and 95% CI half-width (`1.96·sd/√n`, sample standard deviation) of
/// a set of per-task accuracies.
pub fn mean_and_ci95(per_task: &[f64]) -> (f64, f64) {
    let n = per_task.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = per_task.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = per_task.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / (n - 1) as f64;
    let sd = var.sqrt();
    (mean, 1.96 * sd / (n as f64).sqrt())
}

/// Runs `cfg.tasks` episodes with frozen weights and aggregates accuracy.
///
/// Episodes are evaluated in parallel; per-task results are stored by task
/// index and reduced in order, so the report does not depend on scheduling.
pub fn evaluate(cfg: &RunConfig, weights: &FusionWeights) -> Result<RunReport, HarnessError> {
    cfg.validate()?;
    weights.validate().map_err(HarnessError::Core)?;
    let bank = cfg.resolve_bank()?;
    evaluate_on_bank(&bank, cfg, weights)
}

/// `evaluate` against an already-resolved bank (shared across sweep cells).
pub fn evaluate_on_bank(
    bank: &FeatureBank,
    cfg: &RunConfig,
    weights: &FusionWeights,
) -> Result<RunReport, HarnessError> {
    cfg.validate()?;
    weights.validate().map_err(HarnessError::Core)?;
    let start = Instant::now();

    let outcomes: Vec<Result<TaskOutcome, HarnessError>> = (0..cfg.tasks)
        .into_par_iter()
        .map(|task| run_task(bank, cfg, weights, task))
        .collect();

    let mut per_task = Vec::with_capacity(cfg.tasks);
    let mut branch_sums = [0.0f64; 3];
    let mut pairs = 0usize;
    let mut hasher = StreamHasher::new();
    for outcome in outcomes {
        let o = outcome?;
        per_task.push(o.accuracy);
        for (acc, v) in branch_sums.iter_mut().zip(&o.branch_sums) {
            *acc += v;
        }
        pairs += o.pairs;
        o.draw.hash_into(&mut hasher);
    }

    let (accuracy, ci95) = mean_and_ci95(&per_task);
    let per_branch_mean = if pairs > 0 {
        [
            branch_sums[0] / pairs as f64,
            branch_sums[1] / pairs as f64,
            branch_sums[2] / pairs as f64,
        ]
    } else {
        [0.0; 3]
    };

    Ok(RunReport {
        accuracy,
        ci95,
        tasks: cfg.tasks,
        per_task_retained: per_task.len(),
        per_task_accuracy: per_task,
        per_branch_mean,
        stream_hash: hasher.finish(),
        wall_time_s: start.elapsed().as_secs_f64(),
        config: ConfigEcho::from_config(cfg),
    })
}

/// Outcome of a fusion-training run.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub weights: FusionWeights,
    pub episodes: usize,
    /// Mean cross-entropy loss of the final step, if any step ran.
    pub final_loss: Option<f64>,
}

/// Trains the fusion parameters over `cfg.tasks` episodes sampled from
/// `cfg.split` (one gradient step per episode, the episode's queries forming
/// the batch). Divergence aborts with the last finite weights preserved in
/// the error.
pub fn train_fusion(cfg: &RunConfig) -> Result<TrainOutcome, HarnessError> {
    cfg.validate()?;
    let bank = cfg.resolve_bank()?;
    train_fusion_on_bank(&bank, cfg)
}

/// `train_fusion` against an already-resolved bank.
pub fn train_fusion_on_bank(
    bank: &FeatureBank,
    cfg: &RunConfig,
) -> Result<TrainOutcome, HarnessError> {
    cfg.validate()?;
    if cfg.mode != RunMode::TrainFusion {
        return Err(HarnessError::Config(format!(
            "train_fusion called with mode {}",
            cfg.mode.name()
        )));
    }
    let mut weights = FusionWeights::default();
    let mut final_loss = None;

    for task in 0..cfg.tasks {
        let seed = mix_seed(cfg.seed, task as u64);
        let wrap = |source: MmlError| HarnessError::Episode { task, seed, source };
        let episode = sample_episode(
            bank,
            cfg.split,
            cfg.n_way,
            cfg.m_shot,
            cfg.queries_per_class,
            seed,
        )
        .map_err(wrap)?;
        let batch = episode_branch_scores(&episode, &cfg.metric, &cfg.branches).map_err(wrap)?;

        let lr = match cfg.train.lr_decay_every {
            0 => cfg.train.lr,
            every => cfg.train.lr * cfg.train.lr_decay.powi((task / every) as i32),
        };

        match train_step(&batch, &weights, lr) {
            Ok((next, loss)) => {
                weights = next;
                final_loss = Some(loss);
            }
            Err(MmlError::NumericalDomain(_)) => {
                return Err(HarnessError::Diverged {
                    task,
                    seed,
                    last_good: Box::new(weights),
                });
            }
            Err(e) => return Err(wrap(e)),
        }
    }

    Ok(TrainOutcome {
        weights,
        episodes: cfg.tasks,
        final_loss,
    })
}

/// One `evaluate` per (ξ, k) grid cell over a shared episode stream: the
/// same seeds drive every cell, verified by comparing stream hashes.
pub fn sweep(
    cfg: &RunConfig,
    weights: &FusionWeights,
    xi_values: &[usize],
    k_values: &[usize],
) -> Result<Vec<RunReport>, HarnessError> {
    cfg.validate()?;
    let bank = cfg.resolve_bank()?;
    sweep_on_bank(&bank, cfg, weights, xi_values, k_values)
}

/// `sweep` against an already-resolved bank.
pub fn sweep_on_bank(
    bank: &FeatureBank,
    cfg: &RunConfig,
    weights: &FusionWeights,
    xi_values: &[usize],
    k_values: &[usize],
) -> Result<Vec<RunReport>, HarnessError> {
    if xi_values.is_empty() || k_values.is_empty() {
        return Err(HarnessError::Config("sweep needs at least one ξ and one k".into()));
    }
    if xi_values.iter().chain(k_values).any(|&v| v < 1) {
        return Err(HarnessError::Config("sweep values must be >= 1".into()));
    }
    cfg.validate()?;

    let mut reports = Vec::with_capacity(xi_values.len() * k_values.len());
    for &xi in xi_values {
        for &k in k_values {
            let mut cell = cfg.clone();
            cell.metric.xi = xi;
            cell.metric.k = k;
            reports.push(evaluate_on_bank(bank, &cell, weights)?);
        }
    }
    let first_hash = reports[0].stream_hash;
    if reports.iter().any(|r| r.stream_hash != first_hash) {
        return Err(HarnessError::StreamHashMismatch);
    }
    Ok(reports)
}
