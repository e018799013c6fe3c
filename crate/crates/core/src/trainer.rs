//! Clipped surrogate objective with KL and entropy terms, mini-batch updates
//! and the outer training loop for both tree and flat (GRPO) rollouts.
//!
//! Per token `t` of sample `i` the maximized objective is
//!
//! ```text
//! min(r * A, clip(r, 1 - eps, 1 + eps) * A) - beta * KL_t(pi || pi_ref) + alpha * H_t(pi)
//! ```
//!
//! with `r = exp(log pi(token) - old_log_prob)`, averaged over the tokens of a
//! sample and then over the samples of the (mini-)batch.

use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::credit::{self, AdvantageMode, AdvantageVariant, Batch, TrainSample, DEFAULT_SIGMA_FLOOR};
use crate::env::{ExactMatch, TaskInstance, TaskSampler, Vocabulary, PAD};
use crate::error::{Error, Result};
use crate::eval_harness::{self, EvalConfig};
use crate::policy::{categorical_kl, FeatureMap, PolicyGrad, PolicyParams, TokenDistribution};
use crate::rng;
use crate::tree_sampler::{self, SampleTree, TreeConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    TreeRpo,
    Grpo,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "treerpo" => Ok(Mode::TreeRpo),
            "grpo" => Ok(Mode::Grpo),
            other => Err(Error::config("mode", format!("unknown mode `{other}`"))),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::TreeRpo => "treerpo",
            Mode::Grpo => "grpo",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    /// beta1 = 0.9, beta2 = 0.999, eps = 1e-8
    Adam,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KlEstimator {
    /// Exact categorical KL at each token's context.
    Exact,
    /// `rho - ln(rho) - 1` at the sampled token, `rho = pi_ref / pi`.
    K3,
}

/// Shape and initialization of the policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyConfig {
    /// Trailing tokens encoded one-hot per position.
    pub window: usize,
    /// Trailing tokens hashed jointly into one extra one-hot block; 0 disables it.
    pub hashed_span: usize,
    pub hashed_buckets: usize,
    /// Initial weights are uniform in `(-init_scale, init_scale)`.
    pub init_scale: f64,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig { window: 4, hashed_span: 7, hashed_buckets: 65536, init_scale: 0.01 }
    }
}

impl PolicyConfig {
    pub fn feature_map(&self) -> Result<FeatureMap> {
        let f = FeatureMap::new(Vocabulary::SIZE, self.window, PAD)?;
        if self.hashed_span == 0 {
            Ok(f)
        } else {
            f.with_hashed_context(self.hashed_span, self.hashed_buckets)
        }
    }

    pub fn init<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> Result<PolicyParams> {
        Ok(PolicyParams::init_uniform(self.feature_map()?, self.init_scale, rng))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub mode: Mode,
    pub seed: u64,
    pub iterations: usize,
    pub clip_eps: f64,
    pub kl_beta: f64,
    /// Signed entropy coefficient; the objective gains `+alpha * H`, so a
    /// negative value penalizes entropy and a positive one is a bonus.
    pub entropy_alpha: f64,
    pub kl_estimator: KlEstimator,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    /// Questions sampled per iteration.
    pub tasks_per_batch: usize,
    /// Each update splits the batch into `ceil(1 / minibatch_fraction)` mini-batches.
    pub minibatch_fraction: f64,
    /// Groups are kept only if their reward range exceeds `tau`.
    pub tau: f64,
    pub sigma_floor: f64,
    /// Flat rollouts per question in GRPO mode; each is capped at
    /// `tree.max_depth * tree.step_tokens` tokens.
    pub grpo_group_size: usize,
    /// Apply `tau` pruning in GRPO mode as well.
    pub grpo_prune: bool,
    /// Replace the reference policy by the live one every this many iterations.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ref_refresh_every: Option<usize>,
    pub eval_every: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint_every: Option<usize>,
    /// Record wall-clock time in the metric log; off keeps logs bit-reproducible.
    pub log_wall_time: bool,
    pub tree: TreeConfig,
    pub tasks: TaskSampler,
    pub policy: PolicyConfig,
    pub eval: EvalConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            mode: Mode::TreeRpo,
            seed: 1,
            iterations: 500,
            clip_eps: 0.2,
            kl_beta: 0.001,
            entropy_alpha: -0.001,
            kl_estimator: KlEstimator::Exact,
            learning_rate: 0.1,
            optimizer: OptimizerKind::Adam,
            tasks_per_batch: 1024,
            minibatch_fraction: 0.5,
            tau: 0.1,
            sigma_floor: DEFAULT_SIGMA_FLOOR,
            grpo_group_size: 8,
            grpo_prune: false,
            ref_refresh_every: None,
            eval_every: 10,
            checkpoint_every: None,
            log_wall_time: false,
            tree: TreeConfig::default(),
            tasks: TaskSampler::default(),
            policy: PolicyConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.clip_eps > 0.0 && self.clip_eps < 1.0) {
            return Err(Error::config("clip_eps", format!("{} is outside (0, 1)", self.clip_eps)));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("learning_rate", "must be positive"));
        }
        if !self.kl_beta.is_finite() || self.kl_beta < 0.0 {
            return Err(Error::config("kl_beta", "must be finite and non-negative"));
        }
        if !self.entropy_alpha.is_finite() {
            return Err(Error::config("entropy_alpha", "must be finite"));
        }
        if !(self.minibatch_fraction > 0.0 && self.minibatch_fraction <= 1.0) {
            return Err(Error::config("minibatch_fraction", "must lie in (0, 1]"));
        }
        if !(self.tau >= 0.0 && self.tau.is_finite()) {
            return Err(Error::config("tau", "must be finite and non-negative"));
        }
        if !(self.sigma_floor > 0.0) {
            return Err(Error::config("sigma_floor", "must be positive"));
        }
        if self.tasks_per_batch == 0 {
            return Err(Error::config("tasks_per_batch", "must be at least 1"));
        }
        if self.grpo_group_size < 2 {
            return Err(Error::config("grpo_group_size", "must be at least 2"));
        }
        if self.eval_every == 0 {
            return Err(Error::config("eval_every", "must be at least 1"));
        }
        if self.ref_refresh_every == Some(0) {
            return Err(Error::config("ref_refresh_every", "must be at least 1 when set"));
        }
        if self.checkpoint_every == Some(0) {
            return Err(Error::config("checkpoint_every", "must be at least 1 when set"));
        }
        if !(self.policy.init_scale >= 0.0) {
            return Err(Error::config("init_scale", "must be non-negative"));
        }
        self.tree.validate()?;
        self.tasks.validate()?;
        self.policy.feature_map()?;
        self.eval.validate()?;
        Ok(())
    }

    pub fn advantage_mode(&self) -> AdvantageMode {
        let variant = match self.mode {
            Mode::TreeRpo => AdvantageVariant::TreeRpo,
            Mode::Grpo => AdvantageVariant::GrpoStd,
        };
        AdvantageMode { variant, sigma_floor: self.sigma_floor }
    }

    /// Pruning threshold for batch assembly; `None` keeps every group.
    pub fn pruning(&self) -> Option<f64> {
        match self.mode {
            Mode::TreeRpo => Some(self.tau),
            Mode::Grpo if self.grpo_prune => Some(self.tau),
            Mode::Grpo => None,
        }
    }

    /// Hyperparameters for full-size language-model training. Documentation only;
    /// far too slow for the toy task.
    pub fn reference_scale() -> Self {
        TrainConfig {
            kl_beta: 0.001,
            entropy_alpha: -0.001,
            learning_rate: 1e-6,
            tau: 0.1,
            tree: TreeConfig::reference(),
            ..Default::default()
        }
    }
}

/// Telemetry for one optimizer step.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct UpdateReport {
    /// Full objective value (surrogate, KL and entropy terms).
    pub objective: f64,
    /// Clipped surrogate term alone.
    pub surrogate_loss: f64,
    pub mean_kl: f64,
    pub mean_entropy: f64,
    /// Fraction of tokens whose ratio lies outside `[1 - eps, 1 + eps]`.
    pub clip_fraction: f64,
    pub samples_used: usize,
    pub grad_norm: f64,
}

#[derive(Debug, Clone)]
pub struct Objective {
    pub value: f64,
    pub grad: PolicyGrad,
    pub report: UpdateReport,
}

/// Objective value, its exact gradient and telemetry. `None` for an empty batch.
pub fn step_objective(
    live: &PolicyParams,
    reference: &PolicyParams,
    batch: &[TrainSample],
    cfg: &TrainConfig,
) -> Option<Objective> {
    if batch.is_empty() {
        return None;
    }
    assert_eq!(live.features(), reference.features(), "policies must share a feature map");
    let eps = cfg.clip_eps;
    let beta = cfg.kl_beta;
    let alpha = cfg.entropy_alpha;
    let vocab = live.vocab_size();
    let per_sample = 1.0 / batch.len() as f64;

    let mut grad = PolicyGrad::zeros_like(live);
    let mut value = 0.0;
    let mut surrogate = 0.0;
    let mut kl_sum = 0.0;
    let mut ent_sum = 0.0;
    let mut clipped_tokens = 0usize;
    let mut tokens = 0usize;
    let mut active = Vec::new();
    let mut path = Vec::new();
    let mut dlogits = vec![0.0; vocab];

    for sample in batch {
        assert!(!sample.segment.is_empty(), "segments are never empty");
        assert_eq!(sample.segment.len(), sample.old_log_probs.len());
        let w = per_sample / sample.segment.len() as f64;
        path.clear();
        path.extend_from_slice(&sample.context);
        let adv = sample.advantage;
        for (&tok, &old) in sample.segment.iter().zip(&sample.old_log_probs) {
            live.features().active_into(&path, &mut active);
            let pi = TokenDistribution::from_logits(live.logits_for(&active));
            let lp = &pi.log_probs;
            let probs: Vec<f64> = lp.iter().map(|l| l.exp()).collect();

            let ratio = (lp[tok] - old).exp();
            let unclipped = ratio * adv;
            let clipped = ratio.clamp(1.0 - eps, 1.0 + eps) * adv;
            let surr = unclipped.min(clipped);
            if (ratio - 1.0).abs() > eps {
                clipped_tokens += 1;
            }
            tokens += 1;

            dlogits.iter_mut().for_each(|d| *d = 0.0);
            // d log pi(tok) / d z = onehot(tok) - p
            let add_score = |coef: f64, d: &mut [f64]| {
                if coef != 0.0 {
                    for (dj, pj) in d.iter_mut().zip(&probs) {
                        *dj -= coef * pj;
                    }
                    d[tok] += coef;
                }
            };
            if unclipped <= clipped {
                add_score(adv * ratio, &mut dlogits);
            }

            let q = TokenDistribution::from_logits(reference.logits_for(&active));
            let kl = match cfg.kl_estimator {
                KlEstimator::Exact => {
                    let kl = categorical_kl(lp, &q.log_probs);
                    if beta != 0.0 {
                        for j in 0..vocab {
                            dlogits[j] -= beta * probs[j] * (lp[j] - q.log_probs[j] - kl);
                        }
                    }
                    kl
                }
                KlEstimator::K3 => {
                    let log_rho = q.log_probs[tok] - lp[tok];
                    let rho = log_rho.exp();
                    add_score(-beta * (1.0 - rho), &mut dlogits);
                    rho - log_rho - 1.0
                }
            };

            let h = pi.entropy();
            if alpha != 0.0 {
                for j in 0..vocab {
                    dlogits[j] -= alpha * probs[j] * (lp[j] + h);
                }
            }

            value += w * (surr - beta * kl + alpha * h);
            surrogate += w * surr;
            kl_sum += w * kl;
            ent_sum += w * h;
            dlogits.iter_mut().for_each(|d| *d *= w);
            live.backprop_logits(&active, &dlogits, &mut grad);
            path.push(tok);
        }
    }

    let report = UpdateReport {
        objective: value,
        surrogate_loss: surrogate,
        mean_kl: kl_sum,
        mean_entropy: ent_sum,
        clip_fraction: clipped_tokens as f64 / tokens as f64,
        samples_used: batch.len(),
        grad_norm: grad.norm(),
    };
    Some(Objective { value, grad, report })
}

/// Gradient-ascent optimizer state.
#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Optimizer {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    pub fn new(kind: OptimizerKind, lr: f64, params: &PolicyParams) -> Self {
        let n = match kind {
            OptimizerKind::Sgd => 0,
            OptimizerKind::Adam => params.num_params(),
        };
        Optimizer { kind, lr, m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    /// Moves `params` along `grad` (ascent).
    pub fn step(&mut self, params: &mut PolicyParams, grad: &PolicyGrad) {
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.weights.iter_mut().zip(&grad.weights) {
                    *p += self.lr * g;
                }
                for (p, g) in params.bias.iter_mut().zip(&grad.bias) {
                    *p += self.lr * g;
                }
            }
            OptimizerKind::Adam => {
                self.t += 1;
                let bc1 = 1.0 - Self::BETA1.powi(self.t);
                let bc2 = 1.0 - Self::BETA2.powi(self.t);
                let nw = params.weights.len();
                let lr = self.lr;
                let (m, v) = (&mut self.m, &mut self.v);
                let update = |i: usize, p: &mut f64, g: f64, m: &mut [f64], v: &mut [f64]| {
                    m[i] = Self::BETA1 * m[i] + (1.0 - Self::BETA1) * g;
                    v[i] = Self::BETA2 * v[i] + (1.0 - Self::BETA2) * g * g;
                    let mhat = m[i] / bc1;
                    let vhat = v[i] / bc2;
                    *p += lr * mhat / (vhat.sqrt() + Self::EPS);
                };
                for (i, (p, &g)) in params.weights.iter_mut().zip(&grad.weights).enumerate() {
                    update(i, p, g, m, v);
                }
                for (i, (p, &g)) in params.bias.iter_mut().zip(&grad.bias).enumerate() {
                    update(nw + i, p, g, m, v);
                }
            }
        }
    }
}

/// Number of mini-batches for a given fraction.
pub fn minibatch_count(fraction: f64) -> usize {
    ((1.0 / fraction).ceil() as usize).max(1)
}

/// Shuffles the batch and applies one optimizer step per mini-batch. Ratios
/// are always taken against the rollout-time log-probs stored in the samples.
pub fn run_update(
    live: &mut PolicyParams,
    reference: &PolicyParams,
    batch: &[TrainSample],
    cfg: &TrainConfig,
    optimizer: &mut Optimizer,
    shuffle_rng: &mut rng::Rng,
) -> Vec<UpdateReport> {
    if batch.is_empty() {
        return Vec::new();
    }
    let mut order: Vec<usize> = (0..batch.len()).collect();
    order.shuffle(shuffle_rng);
    let parts = minibatch_count(cfg.minibatch_fraction);
    let chunk = batch.len().div_ceil(parts);
    let mut reports = Vec::with_capacity(parts);
    for idx in order.chunks(chunk) {
        let mb: Vec<TrainSample> = idx.iter().map(|&i| batch[i].clone()).collect();
        if let Some(obj) = step_objective(live, reference, &mb, cfg) {
            optimizer.step(live, &obj.grad);
            reports.push(obj.report);
        }
    }
    reports
}

/// Samples, scores and propagates one tree per task. Task `k` uses the RNG
/// stream `derive(seed, k)`, so the result does not depend on thread scheduling.
pub fn collect_rollouts(
    params: &PolicyParams,
    tasks: &[TaskInstance],
    cfg: &TrainConfig,
    seed: u64,
) -> Result<Vec<SampleTree>> {
    tasks
        .par_iter()
        .enumerate()
        .map(|(k, task)| {
            let mut r = rng::from_seed(rng::derive(seed, k as u64));
            let mut tree = match cfg.mode {
                Mode::TreeRpo => tree_sampler::expand_tree(task, params, &cfg.tree, &mut r)?,
                Mode::Grpo => tree_sampler::flat_rollouts(
                    task,
                    params,
                    cfg.grpo_group_size,
                    cfg.tree.max_depth * cfg.tree.step_tokens,
                    cfg.tree.temperature,
                    &mut r,
                )?,
            };
            credit::score_leaves(&mut tree, &ExactMatch)?;
            credit::propagate_rewards(&mut tree)?;
            Ok(tree)
        })
        .collect()
}

/// Batch for the configured mode: all groups with TreeRPO advantages, or the
/// single root group with standard-deviation advantages for GRPO.
pub fn build_batch(trees: &[SampleTree], cfg: &TrainConfig) -> Result<Batch> {
    credit::assemble_batch(trees, cfg.pruning(), cfg.advantage_mode())
}

/// One row of the metric log. Evaluation columns are empty on iterations
/// without an evaluation; training columns are empty on the initial row.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricRow {
    pub iter: usize,
    pub samples_used: Option<usize>,
    pub pruned_groups: Option<usize>,
    pub surrogate: Option<f64>,
    pub mean_kl: Option<f64>,
    pub mean_entropy: Option<f64>,
    pub clip_fraction: Option<f64>,
    pub pass1: Option<f64>,
    pub avg_resp_len: Option<f64>,
    pub wall_ms: u64,
}

pub const METRICS_HEADER: &str =
    "iter,samples_used,pruned_groups,surrogate,mean_kl,mean_entropy,clip_fraction,pass1,avg_resp_len,wall_ms";

fn cell<T: std::fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(String::new, |x| x.to_string())
}

impl MetricRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.iter,
            cell(&self.samples_used),
            cell(&self.pruned_groups),
            cell(&self.surrogate),
            cell(&self.mean_kl),
            cell(&self.mean_entropy),
            cell(&self.clip_fraction),
            cell(&self.pass1),
            cell(&self.avg_resp_len),
            self.wall_ms
        )
    }
}

pub fn write_metrics<W: std::io::Write>(mut out: W, rows: &[MetricRow]) -> Result<()> {
    writeln!(out, "{METRICS_HEADER}")?;
    for r in rows {
        writeln!(out, "{}", r.to_csv())?;
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub params: PolicyParams,
    pub metrics: Vec<MetricRow>,
    /// `(iteration, params)` every `checkpoint_every` iterations.
    pub checkpoints: Vec<(usize, PolicyParams)>,
}

impl RunArtifacts {
    /// Evaluated rows only, as `(iter, pass1, avg_resp_len)`.
    pub fn eval_curve(&self) -> Vec<(usize, f64, f64)> {
        self.metrics.iter().filter_map(|r| Some((r.iter, r.pass1?, r.avg_resp_len?))).collect()
    }
}

/// Runs the full training loop. Randomness comes from named substreams of
/// `cfg.seed`: `init`, `task-gen`, `rollout` and `shuffle`; evaluation uses
/// `cfg.eval.seed` so every evaluation sees the same draws.
pub fn train(cfg: &TrainConfig, eval_set: &[TaskInstance]) -> Result<RunArtifacts> {
    cfg.validate()?;
    let mut init_rng = rng::from_seed(rng::substream(cfg.seed, "init"));
    let mut live = cfg.policy.init(&mut init_rng)?;
    let mut reference = live.snapshot();
    let mut task_rng = rng::from_seed(rng::substream(cfg.seed, "task-gen"));
    let rollout_seed = rng::substream(cfg.seed, "rollout");
    let shuffle_seed = rng::substream(cfg.seed, "shuffle");
    let mut optimizer = Optimizer::new(cfg.optimizer, cfg.learning_rate, &live);

    let mut metrics = Vec::with_capacity(cfg.iterations + 1);
    let mut checkpoints = Vec::new();
    let started = Instant::now();
    let initial = eval_harness::evaluate(&live, eval_set, &cfg.eval)?;
    metrics.push(MetricRow {
        iter: 0,
        pass1: Some(initial.pass1),
        avg_resp_len: Some(initial.avg_response_tokens),
        wall_ms: wall(cfg, started),
        ..Default::default()
    });

    for it in 1..=cfg.iterations {
        let started = Instant::now();
        let tasks = (0..cfg.tasks_per_batch).map(|_| cfg.tasks.sample(&mut task_rng)).collect::<Result<Vec<_>>>()?;
        let trees = collect_rollouts(&live, &tasks, cfg, rng::derive(rollout_seed, it as u64))?;
        let batch = build_batch(&trees, cfg)?;
        let mut shuffle_rng = rng::from_seed(rng::derive(shuffle_seed, it as u64));
        let reports = run_update(&mut live, &reference, &batch.samples, cfg, &mut optimizer, &mut shuffle_rng);
        if !live.is_finite() {
            return Err(Error::Contract(format!("parameters diverged at iteration {it}")));
        }
        if let Some(k) = cfg.ref_refresh_every {
            if it % k == 0 {
                reference = live.snapshot();
            }
        }

        let mut row = MetricRow {
            iter: it,
            samples_used: Some(batch.samples.len()),
            pruned_groups: Some(batch.pruned_groups()),
            ..Default::default()
        };
        if !reports.is_empty() {
            let n = reports.len() as f64;
            let avg = |f: fn(&UpdateReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
            row.surrogate = Some(avg(|r| r.surrogate_loss));
            row.mean_kl = Some(avg(|r| r.mean_kl));
            row.mean_entropy = Some(avg(|r| r.mean_entropy));
            row.clip_fraction = Some(avg(|r| r.clip_fraction));
        }
        if it % cfg.eval_every == 0 || it == cfg.iterations {
            let ev = eval_harness::evaluate(&live, eval_set, &cfg.eval)?;
            row.pass1 = Some(ev.pass1);
            row.avg_resp_len = Some(ev.avg_response_tokens);
        }
        if let Some(k) = cfg.checkpoint_every {
            if it % k == 0 {
                checkpoints.push((it, live.snapshot()));
            }
        }
        row.wall_ms = wall(cfg, started);
        metrics.push(row);
    }

    Ok(RunArtifacts { params: live, metrics, checkpoints })
}

fn wall(cfg: &TrainConfig, since: Instant) -> u64 {
    if cfg.log_wall_time {
        since.elapsed().as_millis() as u64
    } else {
        0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minibatch_arithmetic() {
        assert_eq!(minibatch_count(0.5), 2);
        assert_eq!(minibatch_count(1.0), 1);
        assert_eq!(minibatch_count(0.3), 4);
    }

    #[test]
    fn default_config_is_valid() {
        TrainConfig::default().validate().unwrap();
    }

    #[test]
    fn clip_eps_is_range_checked() {
        let cfg = TrainConfig { clip_eps: 1.5, ..Default::default() };
        match cfg.validate() {
            Err(Error::Config { field, .. }) => assert_eq!(field, "clip_eps"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("TreeRPO".parse::<Mode>().unwrap(), Mode::TreeRpo);
        assert_eq!("grpo".parse::<Mode>().unwrap(), Mode::Grpo);
        assert!("ppo".parse::<Mode>().is_err());
    }

    #[test]
    fn metric_row_blank_cells() {
        let r = MetricRow { iter: 0, pass1: Some(0.5), avg_resp_len: Some(3.0), ..Default::default() };
        assert_eq!(r.to_csv(), "0,,,,,,,0.5,3,0");
    }
}
