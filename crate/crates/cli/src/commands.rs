use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use treerpo::env::{read_tasks, write_tasks, ExactMatch, TaskInstance};
use treerpo::eval_harness::{build_eval_set, compare_arms, evaluate, Arm};
use treerpo::policy::PolicyParams;
use treerpo::trainer::{train, write_metrics, Mode, TrainConfig};
use treerpo::tree_sampler::{expand_tree, read_tree_dump, write_tree_dump};
use treerpo::{credit, rng};

use crate::config;
use crate::inspect::inspect;
use crate::manifest::{self, Artifacts, RunManifest};
use crate::plot::{plot_curves, Metric};

/// Command-line overrides applied on top of file and environment settings.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub mode: Option<Mode>,
    pub eval_every: Option<usize>,
    pub iterations: Option<usize>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut TrainConfig) -> anyhow::Result<()> {
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(m) = self.mode {
            cfg.mode = m;
        }
        if let Some(e) = self.eval_every {
            cfg.eval_every = e;
        }
        if let Some(i) = self.iterations {
            cfg.iterations = i;
        }
        cfg.validate()?;
        Ok(())
    }
}

/// Creates `dir`, refusing to reuse a non-empty one unless `force` is set.
pub fn prepare_out_dir(dir: &Path, force: bool) -> anyhow::Result<()> {
    if dir.exists() {
        let non_empty = fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))?.next().is_some();
        if non_empty && !force {
            bail!("output directory {} is not empty; pass --force to overwrite", dir.display());
        }
    }
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn open(path: &Path) -> anyhow::Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?))
}

pub fn read_task_file(path: &Path) -> anyhow::Result<Vec<TaskInstance>> {
    read_tasks(open(path)?).with_context(|| format!("reading tasks from {}", path.display()))
}

pub fn read_policy(path: &Path) -> anyhow::Result<PolicyParams> {
    PolicyParams::read_checkpoint(open(path)?).with_context(|| format!("reading checkpoint {}", path.display()))
}

fn write_policy(params: &PolicyParams, path: &Path) -> anyhow::Result<()> {
    let mut w = create(path)?;
    params.write_checkpoint(&mut w)?;
    w.flush()?;
    Ok(())
}

/// Trains `cfg` against `eval_set` and writes the run directory.
pub fn train_into(cfg: &TrainConfig, eval_set: &[TaskInstance], out: &Path) -> anyhow::Result<RunManifest> {
    let started_at = manifest::now();
    let artifacts_run = train(cfg, eval_set)?;

    let mut artifacts = Artifacts {
        config: "config.toml".into(),
        eval_tasks: "eval_tasks.txt".into(),
        metrics: "metrics.csv".into(),
        final_checkpoint: "final.policy".into(),
        checkpoints: Vec::new(),
    };
    fs::write(out.join(&artifacts.config), config::to_toml(cfg)?)?;
    let mut w = create(&out.join(&artifacts.eval_tasks))?;
    write_tasks(&mut w, eval_set)?;
    w.flush()?;
    let mut w = create(&out.join(&artifacts.metrics))?;
    write_metrics(&mut w, &artifacts_run.metrics)?;
    w.flush()?;
    if !artifacts_run.checkpoints.is_empty() {
        fs::create_dir_all(out.join("checkpoints"))?;
    }
    for (it, params) in &artifacts_run.checkpoints {
        let rel = PathBuf::from(format!("checkpoints/iter_{it:06}.policy"));
        write_policy(params, &out.join(&rel))?;
        artifacts.checkpoints.push(rel);
    }
    write_policy(&artifacts_run.params, &out.join(&artifacts.final_checkpoint))?;

    let m = RunManifest {
        version: manifest::version(),
        seed: cfg.seed,
        started_at,
        finished_at: manifest::now(),
        config: cfg.clone(),
        artifacts,
    };
    m.write(&out.join(manifest::FILE_NAME))?;
    Ok(m)
}

pub fn cmd_train(
    config_path: Option<&Path>,
    manifest_path: Option<&Path>,
    overrides: &Overrides,
    out: &Path,
    force: bool,
) -> anyhow::Result<()> {
    let (mut cfg, eval_set) = match manifest_path {
        Some(mp) => {
            let m = RunManifest::read(mp)?;
            let base = mp.parent().unwrap_or(Path::new("."));
            let tasks = read_task_file(&base.join(&m.artifacts.eval_tasks))?;
            (m.config, Some(tasks))
        }
        None => (config::load(config_path)?, None),
    };
    overrides.apply(&mut cfg)?;
    let eval_set = match eval_set {
        Some(t) => t,
        None => build_eval_set(&cfg)?,
    };
    prepare_out_dir(out, force)?;
    let m = train_into(&cfg, &eval_set, out)?;
    let metrics = fs::read_to_string(out.join(&m.artifacts.metrics))?;
    if let Some(last) = metrics.lines().last() {
        println!("{}", metrics.lines().next().unwrap_or_default());
        println!("{last}");
    }
    println!("run written to {}", out.display());
    Ok(())
}

pub struct EvalArgs<'a> {
    pub checkpoint: &'a Path,
    pub config: Option<&'a Path>,
    pub tasks: Option<&'a Path>,
    pub seed: Option<u64>,
    pub out: Option<&'a Path>,
    pub force: bool,
    pub dump_tree: Option<&'a Path>,
}

pub fn cmd_eval(args: &EvalArgs) -> anyhow::Result<()> {
    let mut cfg = config::load(args.config)?;
    if let Some(s) = args.seed {
        cfg.eval.seed = s;
    }
    let params = read_policy(args.checkpoint)?;
    let tasks = match args.tasks {
        Some(p) => read_task_file(p)?,
        None => build_eval_set(&cfg)?,
    };
    let result = evaluate(&params, &tasks, &cfg.eval)?;
    println!(
        "tasks={} samples_per_task={} pass1={:.4} avg_resp_len={:.3}",
        tasks.len(),
        cfg.eval.samples_per_task,
        result.pass1,
        result.avg_response_tokens
    );
    if let Some(out) = args.out {
        prepare_out_dir(out, args.force)?;
        let mut w = create(&out.join("eval.csv"))?;
        writeln!(w, "task_seed,fraction_correct,mean_length")?;
        for t in &result.per_task {
            writeln!(w, "{},{},{}", t.task_seed, t.fraction_correct, t.mean_length)?;
        }
        w.flush()?;
    }
    if let Some(path) = args.dump_tree {
        let task = &tasks[0];
        let mut r = rng::from_seed(rng::substream(cfg.seed, "rollout"));
        let mut tree = expand_tree(task, &params, &cfg.tree, &mut r)?;
        credit::score_leaves(&mut tree, &ExactMatch)?;
        credit::propagate_rewards(&mut tree)?;
        let mut w = create(path)?;
        writeln!(w, "# {}", treerpo::env::Vocabulary.render(&task.prompt))?;
        write_tree_dump(&mut w, &tree)?;
        w.flush()?;
    }
    Ok(())
}

pub struct CompareArgs<'a> {
    pub base: Option<&'a Path>,
    pub config_a: Option<&'a Path>,
    pub config_b: Option<&'a Path>,
    pub seeds: &'a [u64],
    pub eval_every: Option<usize>,
    pub iterations: Option<usize>,
    pub out: &'a Path,
    pub force: bool,
}

pub fn cmd_compare(args: &CompareArgs) -> anyhow::Result<()> {
    let base = config::load(args.base)?;
    let arm_config = |path: Option<&Path>, mode: Mode| -> anyhow::Result<TrainConfig> {
        let mut cfg = match path {
            Some(_) => config::load(path)?,
            None => TrainConfig { mode, ..base.clone() },
        };
        if let Some(i) = args.iterations {
            cfg.iterations = i;
        }
        Ok(cfg)
    };
    let cfg_a = arm_config(args.config_a, Mode::TreeRpo)?;
    let cfg_b = arm_config(args.config_b, Mode::Grpo)?;
    let eval_every = args.eval_every.unwrap_or(base.eval_every);
    if eval_every == 0 {
        bail!("--eval-every must be at least 1");
    }
    prepare_out_dir(args.out, args.force)?;

    let started_at = manifest::now();
    let eval_set = build_eval_set(&cfg_a)?;
    let (mut la, mut lb) = (cfg_a.mode.to_string(), cfg_b.mode.to_string());
    if la == lb {
        la.push_str("-a");
        lb.push_str("-b");
    }
    let arms = [Arm { label: la, config: cfg_a.clone() }, Arm { label: lb, config: cfg_b.clone() }];
    let cmp = compare_arms(&arms, args.seeds, eval_every, &eval_set)?;

    let mut files = Vec::new();
    for arm in &cmp.arms {
        let name = format!("{}.csv", arm.label);
        let mut w = create(&args.out.join(&name))?;
        arm.write_csv(&mut w)?;
        w.flush()?;
        files.push(name);
    }
    let summary = cmp.summary_table();
    fs::write(args.out.join("summary.txt"), &summary)?;
    plot_curves(&cmp.arms, Metric::Pass1, &args.out.join("pass1.svg"))?;
    plot_curves(&cmp.arms, Metric::ResponseLength, &args.out.join("length.svg"))?;
    let mut w = create(&args.out.join("eval_tasks.txt"))?;
    write_tasks(&mut w, &eval_set)?;
    w.flush()?;
    files.extend(["summary.txt", "pass1.svg", "length.svg", "eval_tasks.txt"].map(String::from));

    let record = serde_json::json!({
        "version": manifest::version(),
        "seeds": args.seeds,
        "eval_every": eval_every,
        "started_at": started_at,
        "finished_at": manifest::now(),
        "arms": arms.iter().map(|a| serde_json::json!({"label": a.label, "config": a.config})).collect::<Vec<_>>(),
        "artifacts": files,
    });
    fs::write(args.out.join(manifest::FILE_NAME), serde_json::to_string_pretty(&record)? + "\n")?;
    print!("{summary}");
    Ok(())
}

pub fn cmd_inspect(dump: &Path, tau: f64) -> anyhow::Result<()> {
    let records = read_tree_dump(open(dump)?).with_context(|| format!("reading {}", dump.display()))?;
    let report = inspect(&records, tau)?;
    print!("{}", report.text);
    Ok(())
}
