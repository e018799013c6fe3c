//! pass@1(avg@K) and response-length evaluation, and seeded multi-arm
//! training comparisons.

use std::fmt::Write as _;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::{self, TaskInstance, STOP};
use crate::error::{Error, Result};
use crate::policy::PolicyParams;
use crate::rng;
use crate::trainer::{self, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Completions drawn per task (K).
    pub samples_per_task: usize,
    pub temperature: f64,
    /// Completion cap, excluding the prompt.
    pub max_tokens: usize,
    pub seed: u64,
    /// Size of the frozen evaluation set built by the harness.
    pub num_tasks: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { samples_per_task: 8, temperature: 0.6, max_tokens: 24, seed: 20_240_601, num_tasks: 64 }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples_per_task == 0 {
            return Err(Error::config("samples_per_task", "must be at least 1"));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::config("temperature", "must be positive"));
        }
        if self.max_tokens == 0 {
            return Err(Error::config("max_tokens", "must be at least 1"));
        }
        if self.num_tasks == 0 {
            return Err(Error::config("num_tasks", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskEval {
    pub task_seed: u64,
    pub fraction_correct: f64,
    pub mean_length: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    pub pass1: f64,
    pub avg_response_tokens: f64,
    pub per_task: Vec<TaskEval>,
}

/// Linear completion until STOP or `max_tokens`.
pub fn complete(
    params: &PolicyParams,
    prompt: &[env::TokenId],
    max_tokens: usize,
    temperature: f64,
    rng: &mut rng::Rng,
) -> Vec<env::TokenId> {
    let mut path = prompt.to_vec();
    for _ in 0..max_tokens {
        let tok = params.sample_token(&path, temperature, rng);
        path.push(tok);
        if tok == STOP {
            break;
        }
    }
    path
}

/// Draw `k` of a task uses the stream `derive(derive(seed, task.seed), k)`, so
/// results do not depend on task order or thread scheduling.
pub fn evaluate(params: &PolicyParams, eval_set: &[TaskInstance], cfg: &EvalConfig) -> Result<EvalResult> {
    if eval_set.is_empty() {
        return Err(Error::Contract("evaluation set is empty".into()));
    }
    let k = cfg.samples_per_task;
    let per_task = eval_set
        .par_iter()
        .map(|task| {
            let task_stream = rng::derive(cfg.seed, task.seed);
            let mut correct = 0.0;
            let mut length = 0usize;
            for draw in 0..k {
                let mut r = rng::from_seed(rng::derive(task_stream, draw as u64));
                let path = complete(params, &task.prompt, cfg.max_tokens, cfg.temperature, &mut r);
                correct += env::verify(task, &path)?.reward;
                length += path.len() - task.prompt.len();
            }
            Ok(TaskEval {
                task_seed: task.seed,
                fraction_correct: correct / k as f64,
                mean_length: length as f64 / k as f64,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let n = per_task.len() as f64;
    Ok(EvalResult {
        pass1: per_task.iter().map(|t| t.fraction_correct).sum::<f64>() / n,
        avg_response_tokens: per_task.iter().map(|t| t.mean_length).sum::<f64>() / n,
        per_task,
    })
}

/// Builds the frozen evaluation set from the task sampler of `cfg`.
pub fn build_eval_set(cfg: &TrainConfig) -> Result<Vec<TaskInstance>> {
    cfg.tasks.sample_many(cfg.eval.num_tasks, rng::substream(cfg.eval.seed, "eval-set"))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub iter: usize,
    pub pass1: f64,
    pub avg_resp_len: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedRun {
    pub seed: u64,
    pub curve: Vec<CurvePoint>,
}

impl SeedRun {
    pub fn last(&self) -> CurvePoint {
        *self.curve.last().expect("a run always has an initial evaluation")
    }
}

/// Mean and sample standard deviation (0 for a single value).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let std =
            if xs.len() < 2 { 0.0 } else { (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() };
        MeanStd { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArmResult {
    pub label: String,
    pub runs: Vec<SeedRun>,
    pub final_pass1: MeanStd,
    pub final_len: MeanStd,
}

impl ArmResult {
    /// Per-iteration mean and std across seeds; iterations are aligned by index.
    pub fn aggregate(&self) -> Vec<(usize, MeanStd, MeanStd)> {
        let points = self.runs.iter().map(|r| r.curve.len()).min().unwrap_or(0);
        (0..points)
            .map(|i| {
                let p: Vec<f64> = self.runs.iter().map(|r| r.curve[i].pass1).collect();
                let l: Vec<f64> = self.runs.iter().map(|r| r.curve[i].avg_resp_len).collect();
                (self.runs[0].curve[i].iter, MeanStd::of(&p), MeanStd::of(&l))
            })
            .collect()
    }

    /// `iter,seed,pass1,avg_resp_len` rows per seed, then `mean` and `std` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "iter,seed,pass1,avg_resp_len")?;
        for run in &self.runs {
            for p in &run.curve {
                writeln!(out, "{},{},{},{}", p.iter, run.seed, p.pass1, p.avg_resp_len)?;
            }
        }
        for (iter, p, l) in self.aggregate() {
            writeln!(out, "{iter},mean,{},{}", p.mean, l.mean)?;
            writeln!(out, "{iter},std,{},{}", p.std, l.std)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Arm {
    pub label: String,
    pub config: TrainConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub arms: Vec<ArmResult>,
    pub seeds: Vec<u64>,
}

impl Comparison {
    pub fn arm(&self, label: &str) -> Option<&ArmResult> {
        self.arms.iter().find(|a| a.label == label)
    }

    /// Whether the first arm ends at least as accurate as the second, and
    /// whether it ends with responses no longer than the second's.
    pub fn directional_flags(&self) -> Option<(bool, bool)> {
        match self.arms.as_slice() {
            [a, b, ..] => Some((a.final_pass1.mean >= b.final_pass1.mean, a.final_len.mean <= b.final_len.mean)),
            _ => None,
        }
    }

    pub fn summary_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "seeds: {:?}", self.seeds);
        let _ = writeln!(s, "{:<16} {:>22} {:>22}", "arm", "final pass1", "final avg_resp_len");
        for a in &self.arms {
            let _ = writeln!(
                s,
                "{:<16} {:>22} {:>22}",
                a.label,
                format!("{:.4} ± {:.4}", a.final_pass1.mean, a.final_pass1.std),
                format!("{:.3} ± {:.3}", a.final_len.mean, a.final_len.std),
            );
        }
        if let (Some((acc, len)), [a, b, ..]) = (self.directional_flags(), self.arms.as_slice()) {
            let yn = |x: bool| if x { "yes" } else { "no" };
            let _ = writeln!(s, "{} >= {} on final pass1: {}", a.label, b.label, yn(acc));
            let _ = writeln!(s, "{} <= {} on final avg_resp_len: {}", a.label, b.label, yn(len));
        }
        s
    }
}

/// Trains every arm on every seed against the same frozen evaluation set.
/// Each run overrides the arm's `seed` and `eval_every`.
pub fn compare_arms(arms: &[Arm], seeds: &[u64], eval_every: usize, eval_set: &[TaskInstance]) -> Result<Comparison> {
    if seeds.is_empty() {
        return Err(Error::config("seeds", "at least one seed is required"));
    }
    let jobs: Vec<(usize, u64)> = (0..arms.len()).flat_map(|a| seeds.iter().map(move |&s| (a, s))).collect();
    let runs = jobs
        .par_iter()
        .map(|&(a, seed)| {
            let cfg = TrainConfig { seed, eval_every, ..arms[a].config.clone() };
            let art = trainer::train(&cfg, eval_set)?;
            let curve = art
                .eval_curve()
                .into_iter()
                .map(|(iter, pass1, avg_resp_len)| CurvePoint { iter, pass1, avg_resp_len })
                .collect();
            Ok(SeedRun { seed, curve })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut runs = runs.into_iter();
    let arms = arms
        .iter()
        .map(|arm| {
            let runs: Vec<SeedRun> = runs.by_ref().take(seeds.len()).collect();
            let finals: Vec<CurvePoint> = runs.iter().map(SeedRun::last).collect();
            ArmResult {
                label: arm.label.clone(),
                final_pass1: MeanStd::of(&finals.iter().map(|p| p.pass1).collect::<Vec<_>>()),
                final_len: MeanStd::of(&finals.iter().map(|p| p.avg_resp_len).collect::<Vec<_>>()),
                runs,
            }
        })
        .collect();
    Ok(Comparison { arms, seeds: seeds.to_vec() })
}

/// Two-arm comparison labelled by each config's mode (suffixed if equal).
pub fn compare_runs(
    cfg_a: &TrainConfig,
    cfg_b: &TrainConfig,
    seeds: &[u64],
    eval_every: usize,
    eval_set: &[TaskInstance],
) -> Result<Comparison> {
    let (mut la, mut lb) = (cfg_a.mode.to_string(), cfg_b.mode.to_string());
    if la == lb {
        la.push_str("-a");
        lb.push_str("-b");
    }
    let arms = [Arm { label: la, config: cfg_a.clone() }, Arm { label: lb, config: cfg_b.clone() }];
    compare_arms(&arms, seeds, eval_every, eval_set)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_std_single_seed_has_zero_std() {
        let m = MeanStd::of(&[0.7]);
        assert_eq!(m.mean, 0.7);
        assert_eq!(m.std, 0.0);
        let m = MeanStd::of(&[1.0, 3.0]);
        assert_eq!(m.mean, 2.0);
        assert!((m.std - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn empty_eval_set_is_rejected() {
        let p = TrainConfig::default().policy.init(&mut rng::from_seed(0)).unwrap();
        assert!(evaluate(&p, &[], &EvalConfig::default()).is_err());
    }
}
