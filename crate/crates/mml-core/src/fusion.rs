//! The fusion layer: combines the three branch scores of each class into a
//! final per-class similarity, turns those into probabilities, and trains
//! its few parameters by cross-entropy with manual gradients.
//!
//! Per class `n` the fused score is
//!
//! ```text
//! score_n = (w1·ẑ_part,n + b1) + (w2·ẑ_pixel,n + b2) − (w3·ẑ_dist,n + b3)
//! ```
//!
//! where each branch's N class values are standardized first — with the
//! batch statistics of those N values in training mode, or with running
//! statistics in eval mode. The minus sign on the distribution branch turns
//! its distance into a similarity.

use alloc::vec::Vec;

use crate::error::{invalid_arg, numerical};
use crate::fmath;
use crate::metrics::BranchScores;
use crate::Result;

/// Variance floor used when standardizing a branch; a degenerate batch with
/// all-equal scores must not produce NaN.
pub const EPSILON_VAR: f64 = 1e-8;

/// +1 for the two similarity branches, −1 for the distance branch.
const BRANCH_SIGNS: [f64; 3] = [1.0, 1.0, -1.0];

/// Learnable fusion parameters plus per-branch running normalization state.
///
/// `fuse_eval` and `ce_loss` are pure; `fuse_train` and `train_step` mutate
/// the running statistics and must be serialized by the caller (one writer
/// at a time).
#[derive(Debug, Clone, PartialEq)]
pub struct FusionWeights {
    /// Branch weights `[w1, w2, w3]`.
    pub w: [f64; 3],
    /// Per-branch bias.
    pub b: [f64; 3],
    /// Running mean per branch, updated with momentum in training mode.
    pub running_mean: [f64; 3],
    /// Running variance per branch.
    pub running_var: [f64; 3],
    /// Momentum of the running-stat update: `new = m·old + (1−m)·batch`.
    pub momentum: f64,
}

impl Default for FusionWeights {
    /// Neutral start: all branches contribute equally and the running stats
    /// are the identity standardization.
    fn default() -> Self {
        Self {
            w: [1.0, 1.0, 1.0],
            b: [0.0, 0.0, 0.0],
            running_mean: [0.0, 0.0, 0.0],
            running_var: [1.0, 1.0, 1.0],
            momentum: 0.9,
        }
    }
}

impl FusionWeights {
    pub fn validate(&self) -> Result<()> {
        let all = self
            .w
            .iter()
            .chain(&self.b)
            .chain(&self.running_mean)
            .chain(&self.running_var);
        for v in all {
            if !v.is_finite() {
                return Err(invalid_arg!("fusion weights contain non-finite value {v}"));
            }
        }
        if self.running_var.iter().any(|&v| v < 0.0) {
            return Err(invalid_arg!("running variances must be >= 0"));
        }
        if self.momentum.is_nan() || self.momentum <= 0.0 || self.momentum >= 1.0 {
            return Err(invalid_arg!(
                "momentum must lie in (0, 1), got {}",
                self.momentum
            ));
        }
        Ok(())
    }

    /// Fuses one query's per-class branch scores using the running
    /// statistics. Pure; safe to call concurrently on a frozen snapshot.
    pub fn fuse_eval(&self, per_class: &[BranchScores]) -> Result<ScoreVector> {
        self.validate()?;
        check_classes(per_class)?;
        let stats = [
            (self.running_mean[0], self.running_var[0]),
            (self.running_mean[1], self.running_var[1]),
            (self.running_mean[2], self.running_var[2]),
        ];
        Ok(self.scores_with_stats(per_class, &stats))
    }

    /// Fuses one query's per-class branch scores using the batch statistics
    /// of those scores, then folds the batch statistics into the running
    /// statistics with momentum.
    pub fn fuse_train(&mut self, per_class: &[BranchScores]) -> Result<ScoreVector> {
        self.validate()?;
        check_classes(per_class)?;
        let stats = batch_stats(per_class);
        let sv = self.scores_with_stats(per_class, &stats);
        for br in 0..3 {
            self.running_mean[br] =
                self.momentum * self.running_mean[br] + (1.0 - self.momentum) * stats[br].0;
            self.running_var[br] =
                self.momentum * self.running_var[br] + (1.0 - self.momentum) * stats[br].1;
        }
        Ok(sv)
    }

    fn scores_with_stats(&self, per_class: &[BranchScores], stats: &[(f64, f64); 3]) -> ScoreVector {
        let n = per_class.len();
        let mut scores = Vec::with_capacity(n);
        for bs in per_class {
            let raw = [bs.d_part, bs.d_pixel, bs.d_dist];
            let mut score = 0.0;
            for br in 0..3 {
                let (mean, var) = stats[br];
                let z = (raw[br] - mean) / fmath::sqrt(var.max(EPSILON_VAR));
                score += BRANCH_SIGNS[br] * (self.w[br] * z + self.b[br]);
            }
            scores.push(score);
        }
        ScoreVector::from_scores_unchecked(scores)
    }
}

fn check_classes(per_class: &[BranchScores]) -> Result<()> {
    if per_class.len() < 2 {
        return Err(invalid_arg!(
            "fusion needs at least 2 classes, got {}",
            per_class.len()
        ));
    }
    Ok(())
}

/// Per-branch batch mean and biased variance across the N class scores.
fn batch_stats(per_class: &[BranchScores]) -> [(f64, f64); 3] {
    let n = per_class.len() as f64;
    let mut out = [(0.0, 0.0); 3];
    for (br, slot) in out.iter_mut().enumerate() {
        let mut mean = 0.0;
        for bs in per_class {
            mean += branch_value(bs, br);
        }
        mean /= n;
        let mut var = 0.0;
        for bs in per_class {
            let d = branch_value(bs, br) - mean;
            var += d * d;
        }
        var /= n;
        *slot = (mean, var);
    }
    out
}

#[inline]
fn branch_value(bs: &BranchScores, br: usize) -> f64 {
    match br {
        0 => bs.d_part,
        1 => bs.d_pixel,
        _ => bs.d_dist,
    }
}

/// Fused per-class scores and their softmax probabilities for one query.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector {
    scores: Vec<f64>,
    probs: Vec<f64>,
}

impl ScoreVector {
    pub fn from_scores(scores: Vec<f64>) -> Result<Self> {
        if scores.len() < 2 {
            return Err(invalid_arg!(
                "score vector needs at least 2 classes, got {}",
                scores.len()
            ));
        }
        if let Some(v) = scores.iter().find(|v| !v.is_finite()) {
            return Err(invalid_arg!("score vector contains non-finite value {v}"));
        }
        Ok(Self::from_scores_unchecked(scores))
    }

    fn from_scores_unchecked(scores: Vec<f64>) -> Self {
        let probs = softmax(&scores);
        Self { scores, probs }
    }

    pub fn n_way(&self) -> usize {
        self.scores.len()
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Index of the most probable class; ties go to the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for i in 1..self.scores.len() {
            if self.scores[i] > self.scores[best] {
                best = i;
            }
        }
        best
    }
}

fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|&s| fmath::exp(s - max)).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|e| e / sum).collect()
}

/// Log-sum-exp with max subtraction.
fn log_sum_exp(scores: &[f64]) -> f64 {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = scores.iter().map(|&s| fmath::exp(s - max)).sum();
    max + fmath::ln(sum)
}

/// Cross-entropy loss `−ln probs[label]`, computed in log-sum-exp form.
///
/// `label` must be a valid class index.
pub fn ce_loss(scores: &ScoreVector, label: usize) -> f64 {
    assert!(
        label < scores.n_way(),
        "label {label} out of range for {}-way scores",
        scores.n_way()
    );
    log_sum_exp(scores.scores()) - scores.scores()[label]
}

/// One labelled training instance: the per-class branch scores of a query
/// and the query's true class index.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainExample {
    pub per_class: Vec<BranchScores>,
    pub label: usize,
}

/// Gradient of the mean cross-entropy loss with respect to `(w, b)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FusionGradient {
    pub w: [f64; 3],
    pub b: [f64; 3],
}

/// Mean cross-entropy loss over a batch and its analytic gradient.
///
/// In training mode the standardized branch values are constants with
/// respect to the parameters, so the loss is linear in `(w, b)` before the
/// softmax and the gradient has the usual `softmax − onehot` form.
pub fn loss_and_gradient(
    batch: &[TrainExample],
    weights: &FusionWeights,
) -> Result<(f64, FusionGradient)> {
    if batch.is_empty() {
        return Err(invalid_arg!("training batch is empty"));
    }
    weights.validate()?;
    let inv = 1.0 / batch.len() as f64;
    let mut loss = 0.0;
    let mut grad = FusionGradient::default();
    for ex in batch {
        check_classes(&ex.per_class)?;
        if ex.label >= ex.per_class.len() {
            return Err(invalid_arg!(
                "label {} out of range for {}-way example",
                ex.label,
                ex.per_class.len()
            ));
        }
        let stats = batch_stats(&ex.per_class);
        let sv = weights.scores_with_stats(&ex.per_class, &stats);
        loss += ce_loss(&sv, ex.label);
        for (n, bs) in ex.per_class.iter().enumerate() {
            let g = sv.probs()[n] - if n == ex.label { 1.0 } else { 0.0 };
            for br in 0..3 {
                let (mean, var) = stats[br];
                let z = (branch_value(bs, br) - mean) / fmath::sqrt(var.max(EPSILON_VAR));
                grad.w[br] += BRANCH_SIGNS[br] * g * z * inv;
                grad.b[br] += BRANCH_SIGNS[br] * g * inv;
            }
        }
    }
    Ok((loss * inv, grad))
}

/// One gradient-descent step on the mean cross-entropy loss of `batch`.
///
/// Returns the updated weights (with running statistics folded in, one
/// example at a time in batch order) and the pre-step mean loss. A
/// non-finite gradient aborts the step: the caller's weights are untouched
/// and an error is returned.
pub fn train_step(
    batch: &[TrainExample],
    weights: &FusionWeights,
    lr: f64,
) -> Result<(FusionWeights, f64)> {
    if !lr.is_finite() || lr < 0.0 {
        return Err(invalid_arg!("learning rate must be finite and >= 0, got {lr}"));
    }
    let (loss, grad) = loss_and_gradient(batch, weights)?;
    let finite = grad.w.iter().chain(&grad.b).all(|v| v.is_finite()) && loss.is_finite();
    if !finite {
        return Err(numerical!("non-finite gradient; step aborted"));
    }
    let mut next = weights.clone();
    for br in 0..3 {
        next.w[br] -= lr * grad.w[br];
        next.b[br] -= lr * grad.b[br];
    }
    if next.w.iter().chain(&next.b).any(|v| !v.is_finite()) {
        return Err(numerical!("weights diverged; step aborted"));
    }
    for ex in batch {
        // Forward again only for the running-stat update.
        next.fuse_train(&ex.per_class)?;
    }
    next.validate()?;
    Ok((next, loss))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn pseudo(seed: u64) -> impl FnMut() -> f64 {
        let mut state = seed;
        move || {
            state = state.wrapping_add(0x9E3779B97F4A7C15);
            let mut z = state;
            z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
            z ^= z >> 31;
            (z >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        }
    }

    fn random_example(seed: u64, n: usize) -> TrainExample {
        let mut next = pseudo(seed);
        let per_class = (0..n)
            .map(|_| BranchScores {
                d_part: next() * 3.0,
                d_pixel: next() * 5.0,
                d_dist: next().abs() * 10.0,
            })
            .collect();
        TrainExample {
            per_class,
            label: (seed % n as u64) as usize,
        }
    }

    #[test]
    fn single_branch_weight_selects_largest_part_score() {
        let weights = FusionWeights {
            w: [1.0, 0.0, 0.0],
            ..FusionWeights::default()
        };
        let per_class = [
            BranchScores { d_part: 0.2, d_pixel: 9.0, d_dist: 0.1 },
            BranchScores { d_part: 3.0, d_pixel: 0.0, d_dist: 5.0 },
            BranchScores { d_part: 1.0, d_pixel: 4.0, d_dist: 0.0 },
        ];
        let sv = weights.fuse_eval(&per_class).unwrap();
        assert_eq!(sv.argmax(), 1);
    }

    #[test]
    fn identical_classes_split_probability_evenly() {
        let weights = FusionWeights::default();
        let bs = BranchScores { d_part: 1.0, d_pixel: 2.0, d_dist: 3.0 };
        let sv = weights.fuse_eval(&[bs, bs]).unwrap();
        assert_relative_eq!(sv.probs()[0], 0.5, epsilon = 1e-12);
        assert_relative_eq!(sv.probs()[1], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn fuse_matches_straight_line_oracle() {
        let mut next = pseudo(7);
        let weights = FusionWeights {
            w: [0.8, 1.3, 0.6],
            b: [0.1, -0.2, 0.05],
            running_mean: [0.4, -0.7, 2.0],
            running_var: [1.5, 0.9, 4.0],
            momentum: 0.9,
        };
        let per_class: Vec<BranchScores> = (0..5)
            .map(|_| BranchScores {
                d_part: next() * 3.0,
                d_pixel: next() * 5.0,
                d_dist: next().abs() * 10.0,
            })
            .collect();
        let sv = weights.fuse_eval(&per_class).unwrap();

        // Scalar oracle: standardize -> weighted sum -> softmax.
        let mut scores = Vec::new();
        for bs in &per_class {
            let z1 = (bs.d_part - 0.4) / 1.5f64.sqrt();
            let z2 = (bs.d_pixel + 0.7) / 0.9f64.sqrt();
            let z3 = (bs.d_dist - 2.0) / 4.0f64.sqrt();
            scores.push(
                (0.8 * z1 + 0.1) + (1.3 * z2 - 0.2) - (0.6 * z3 + 0.05),
            );
        }
        let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
        let sum: f64 = exps.iter().sum();
        for (i, e) in exps.iter().enumerate() {
            assert_relative_eq!(sv.probs()[i], e / sum, epsilon = 1e-12);
        }
    }

    #[test]
    fn probs_sum_to_one() {
        let weights = FusionWeights::default();
        let ex = random_example(3, 5);
        let sv = weights.fuse_eval(&ex.per_class).unwrap();
        let sum: f64 = sv.probs().iter().sum();
        assert_relative_eq!(sum, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn ce_loss_uniform_is_ln_n() {
        let sv = ScoreVector::from_scores(vec![0.7; 5]).unwrap();
        assert_relative_eq!(ce_loss(&sv, 2), (5.0f64).ln(), epsilon = 1e-12);
    }

    #[test]
    fn ce_loss_confident_correct_approaches_zero() {
        let sv = ScoreVector::from_scores(vec![50.0, 0.0, 0.0]).unwrap();
        assert!(ce_loss(&sv, 0) < 1e-12);
    }

    #[test]
    fn ce_loss_matches_direct_softmax_oracle() {
        let scores = vec![0.3, -1.2, 2.4, 0.9];
        let sv = ScoreVector::from_scores(scores.clone()).unwrap();
        let exps: Vec<f64> = scores.iter().map(|s| s.exp()).collect();
        let sum: f64 = exps.iter().sum();
        for label in 0..4 {
            let want = -(exps[label] / sum).ln();
            assert_relative_eq!(ce_loss(&sv, label), want, epsilon = 1e-12);
        }
    }

    #[test]
    fn softmax_is_shift_invariant() {
        let scores = vec![0.1, 1.4, -0.7, 0.3];
        let a = ScoreVector::from_scores(scores.clone()).unwrap();
        let b = ScoreVector::from_scores(scores.iter().map(|s| s + 123.456).collect()).unwrap();
        for i in 0..4 {
            assert_relative_eq!(a.probs()[i], b.probs()[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn distribution_sign_convention() {
        // With w = (0,0,1), decreasing a class's distance must strictly
        // increase its probability.
        let weights = FusionWeights {
            w: [0.0, 0.0, 1.0],
            ..FusionWeights::default()
        };
        let base = [
            BranchScores { d_part: 0.0, d_pixel: 0.0, d_dist: 4.0 },
            BranchScores { d_part: 0.0, d_pixel: 0.0, d_dist: 2.0 },
        ];
        let before = weights.fuse_eval(&base).unwrap().probs()[0];
        let mut closer = base;
        closer[0].d_dist = 1.0;
        let after = weights.fuse_eval(&closer).unwrap().probs()[0];
        assert!(after > before);
    }

    #[test]
    fn eval_argmax_invariant_under_common_scaling() {
        let ex = random_example(11, 5);
        let weights = FusionWeights {
            running_mean: [0.3, -0.1, 2.0],
            running_var: [1.2, 0.8, 3.0],
            ..FusionWeights::default()
        };
        let sv = weights.fuse_eval(&ex.per_class).unwrap();

        let c = 7.25;
        let scaled: Vec<BranchScores> = ex
            .per_class
            .iter()
            .map(|bs| BranchScores {
                d_part: bs.d_part * c,
                d_pixel: bs.d_pixel * c,
                d_dist: bs.d_dist * c,
            })
            .collect();
        let scaled_weights = FusionWeights {
            running_mean: [0.3 * c, -0.1 * c, 2.0 * c],
            running_var: [1.2 * c * c, 0.8 * c * c, 3.0 * c * c],
            ..weights
        };
        let sv2 = scaled_weights.fuse_eval(&scaled).unwrap();
        assert_eq!(sv.argmax(), sv2.argmax());
        for i in 0..5 {
            assert_relative_eq!(sv.probs()[i], sv2.probs()[i], epsilon = 1e-9);
        }
    }

    #[test]
    fn zero_variance_batch_is_safe() {
        let mut weights = FusionWeights::default();
        let bs = BranchScores { d_part: 1.0, d_pixel: 1.0, d_dist: 1.0 };
        let sv = weights.fuse_train(&[bs, bs, bs]).unwrap();
        assert!(sv.probs().iter().all(|p| p.is_finite()));
        assert_relative_eq!(sv.probs()[0], 1.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn fuse_train_updates_running_stats_with_momentum() {
        let mut weights = FusionWeights::default();
        let per_class = [
            BranchScores { d_part: 1.0, d_pixel: 4.0, d_dist: 10.0 },
            BranchScores { d_part: 3.0, d_pixel: 8.0, d_dist: 30.0 },
        ];
        weights.fuse_train(&per_class).unwrap();
        // batch mean of d_part = 2, biased var = 1
        assert_relative_eq!(weights.running_mean[0], 0.9 * 0.0 + 0.1 * 2.0, epsilon = 1e-12);
        assert_relative_eq!(weights.running_var[0], 0.9 * 1.0 + 0.1 * 1.0, epsilon = 1e-12);
    }

    #[test]
    fn train_step_zero_lr_keeps_weights() {
        let weights = FusionWeights::default();
        let batch = [random_example(21, 4), random_example(22, 4)];
        let (next, loss) = train_step(&batch, &weights, 0.0).unwrap();
        assert_eq!(next.w, weights.w);
        assert_eq!(next.b, weights.b);
        assert!(loss.is_finite() && loss > 0.0);
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        let h = 1e-5;
        for seed in 0..20u64 {
            let batch: Vec<TrainExample> =
                (0..3).map(|i| random_example(seed * 31 + i, 5)).collect();
            let weights = FusionWeights {
                w: [0.9, 1.1, 0.7],
                b: [0.02, -0.01, 0.0],
                ..FusionWeights::default()
            };
            let (_, grad) = loss_and_gradient(&batch, &weights).unwrap();

            let mean_loss = |w: &FusionWeights| -> f64 {
                let mut total = 0.0;
                for ex in &batch {
                    let mut scratch = w.clone();
                    let sv = scratch.fuse_train(&ex.per_class).unwrap();
                    total += ce_loss(&sv, ex.label);
                }
                total / batch.len() as f64
            };

            for br in 0..3 {
                let mut plus = weights.clone();
                plus.w[br] += h;
                let mut minus = weights.clone();
                minus.w[br] -= h;
                let fd = (mean_loss(&plus) - mean_loss(&minus)) / (2.0 * h);
                let rel = (grad.w[br] - fd).abs() / grad.w[br].abs().max(fd.abs()).max(1.0);
                assert!(rel <= 1e-4, "w[{br}] grad {} vs fd {fd}", grad.w[br]);

                let mut plus = weights.clone();
                plus.b[br] += h;
                let mut minus = weights.clone();
                minus.b[br] -= h;
                let fd = (mean_loss(&plus) - mean_loss(&minus)) / (2.0 * h);
                let rel = (grad.b[br] - fd).abs() / grad.b[br].abs().max(fd.abs()).max(1.0);
                assert!(rel <= 1e-4, "b[{br}] grad {} vs fd {fd}", grad.b[br]);
            }
        }
    }

    #[test]
    fn informative_distribution_branch_grows_w3() {
        // Distribution branch is the only signal: the true class always has
        // the strictly smallest distance; the other branches are constant.
        let mut next = pseudo(77);
        let batch: Vec<TrainExample> = (0..8)
            .map(|i| {
                let label = (i % 3) as usize;
                let per_class = (0..3)
                    .map(|n| BranchScores {
                        d_part: 1.0,
                        d_pixel: 2.0,
                        d_dist: if n == label { 1.0 } else { 5.0 + next().abs() },
                    })
                    .collect();
                TrainExample { per_class, label }
            })
            .collect();
        let mut weights = FusionWeights::default();
        let w3_start = weights.w[2];
        for _ in 0..100 {
            let (next_weights, _) = train_step(&batch, &weights, 0.1).unwrap();
            weights = next_weights;
        }
        assert!(
            weights.w[2] > w3_start,
            "w3 should grow, got {} from {}",
            weights.w[2],
            w3_start
        );
    }

    #[test]
    fn training_is_bit_deterministic() {
        let batch: Vec<TrainExample> = (0..4).map(|i| random_example(100 + i, 5)).collect();
        let run = || {
            let mut weights = FusionWeights::default();
            for _ in 0..50 {
                let (next, _) = train_step(&batch, &weights, 0.05).unwrap();
                weights = next;
            }
            weights
        };
        let a = run();
        let b = run();
        for br in 0..3 {
            assert_eq!(a.w[br].to_bits(), b.w[br].to_bits());
            assert_eq!(a.b[br].to_bits(), b.b[br].to_bits());
            assert_eq!(a.running_mean[br].to_bits(), b.running_mean[br].to_bits());
            assert_eq!(a.running_var[br].to_bits(), b.running_var[br].to_bits());
        }
    }

    #[test]
    fn fuse_rejects_single_class() {
        let weights = FusionWeights::default();
        let bs = BranchScores::default();
        assert!(weights.fuse_eval(&[bs]).is_err());
    }

    #[test]
    fn exploding_step_aborts_with_numerical_error() {
        // Labelled against the score order, so the gradient has magnitude
        // above 1 and a single f64::MAX step must overflow.
        let per_class = vec![
            BranchScores { d_part: 1.0, d_pixel: 0.0, d_dist: 0.0 },
            BranchScores { d_part: 2.0, d_pixel: 0.0, d_dist: 0.0 },
            BranchScores { d_part: 4.0, d_pixel: 0.0, d_dist: 0.0 },
        ];
        let batch = [TrainExample { per_class, label: 0 }];
        let weights = FusionWeights::default();
        let err = train_step(&batch, &weights, f64::MAX).unwrap_err();
        match err {
            crate::MmlError::NumericalDomain(msg) => assert!(msg.contains("diverged")),
            other => panic!("expected numerical-domain error, got {other:?}"),
        }
    }
}
