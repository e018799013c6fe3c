//! TOML configuration files with `TREERPO_` environment overrides.

use std::path::Path;

use anyhow::{bail, Context};
use toml::{Table, Value};
use treerpo::trainer::TrainConfig;

/// Prefix for environment overrides. Nested keys use `__`, so
/// `TREERPO_TREE__BRANCHING=4` sets `tree.branching`.
pub const ENV_PREFIX: &str = "TREERPO_";

/// Documentation-only section holding the full-scale hyperparameters.
pub const REFERENCE_SECTION: &str = "reference_paper_config";

/// Parses a config document, applies `overrides` (key path, raw value) and
/// validates the result. Missing keys take their defaults.
pub fn parse_with_overrides<'a>(
    text: &str,
    overrides: impl IntoIterator<Item = (&'a str, &'a str)>,
) -> anyhow::Result<TrainConfig> {
    let mut table: Table = text.parse().context("config is not valid TOML")?;
    if let Some(reference) = table.remove(REFERENCE_SECTION) {
        if !reference.is_table() {
            bail!("`{REFERENCE_SECTION}` must be a table");
        }
    }
    for (key, raw) in overrides {
        set_path(&mut table, key, parse_value(raw))?;
    }
    let cfg: TrainConfig = Value::Table(table).try_into().context("config does not match the schema")?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse(text: &str) -> anyhow::Result<TrainConfig> {
    parse_with_overrides(text, [])
}

/// Overrides from the process environment, as dotted key paths.
pub fn env_overrides() -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> = std::env::vars()
        .filter_map(|(k, v)| {
            let rest = k.strip_prefix(ENV_PREFIX)?;
            Some((rest.to_ascii_lowercase().replace("__", "."), v))
        })
        .collect();
    out.sort();
    out
}

/// Reads `path` (or starts from defaults) and applies environment overrides.
pub fn load(path: Option<&Path>) -> anyhow::Result<TrainConfig> {
    let text = match path {
        Some(p) => std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
        None => String::new(),
    };
    let vars = env_overrides();
    parse_with_overrides(&text, vars.iter().map(|(k, v)| (k.as_str(), v.as_str()))).with_context(|| match path {
        Some(p) => format!("loading config {}", p.display()),
        None => "loading default config".to_string(),
    })
}

fn parse_value(raw: &str) -> Value {
    match format!("v = {raw}").parse::<Table>() {
        Ok(mut t) => t.remove("v").expect("key was just parsed"),
        Err(_) => Value::String(raw.to_string()),
    }
}

fn set_path(table: &mut Table, path: &str, value: Value) -> anyhow::Result<()> {
    let mut parts: Vec<&str> = path.split('.').collect();
    let last = parts.pop().filter(|k| !k.is_empty());
    let Some(last) = last else {
        bail!("empty override key `{path}`");
    };
    let mut cur = table;
    for p in parts {
        let entry = cur.entry(p.to_string()).or_insert_with(|| Value::Table(Table::new()));
        cur = match entry {
            Value::Table(t) => t,
            _ => bail!("override `{path}`: `{p}` is not a section"),
        };
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

const UNITS: &[(&str, &str, &str)] = &[
    ("", "mode", "treerpo | grpo"),
    ("", "seed", "root seed; every random stream derives from it"),
    ("", "iterations", "training iterations"),
    ("", "clip_eps", "ratio clip half-width, in (0, 1)"),
    ("", "kl_beta", "weight of the KL penalty to the reference policy"),
    ("", "entropy_alpha", "entropy coefficient; negative values penalize entropy"),
    ("", "kl_estimator", "exact | k3"),
    ("", "learning_rate", "optimizer step size"),
    ("", "optimizer", "adam | sgd"),
    ("", "tasks_per_batch", "questions per iteration"),
    ("", "minibatch_fraction", "share of the batch per optimizer step"),
    ("", "tau", "groups need a reward range above this to be trained on"),
    ("", "sigma_floor", "lower bound on the advantage scale"),
    ("", "grpo_group_size", "rollouts per question in grpo mode"),
    ("", "grpo_prune", "apply tau in grpo mode"),
    ("", "ref_refresh_every", "iterations between reference policy refreshes"),
    ("", "eval_every", "iterations between evaluations"),
    ("", "checkpoint_every", "iterations between checkpoints"),
    ("", "log_wall_time", "record wall_ms; breaks bit-exact reruns"),
    ("tree", "branching", "children per node"),
    ("tree", "max_depth", "segments per path"),
    ("tree", "step_tokens", "tokens per segment"),
    ("tree", "temperature", "sampling temperature for rollouts"),
    ("tree", "node_cap", "maximum nodes per tree"),
    ("tasks", "min_difficulty", "operators per chain"),
    ("tasks", "max_difficulty", "operators per chain"),
    ("tasks", "modulus", "arithmetic modulus, 2 to 100"),
    ("policy", "window", "previous tokens with positional features"),
    ("policy", "hashed_span", "previous tokens in the hashed joint context; 0 disables it"),
    ("policy", "hashed_buckets", "hash table size"),
    ("policy", "init_scale", "initial weights are uniform in [-scale, scale]"),
    ("eval", "samples_per_task", "completions per task (K)"),
    ("eval", "temperature", "sampling temperature"),
    ("eval", "max_tokens", "completion cap in tokens"),
    ("eval", "seed", "seed of the evaluation set and its draws"),
    ("eval", "num_tasks", "tasks in the evaluation set"),
];

/// Serializes `cfg` with a unit comment on every key, followed by the
/// documentation-only reference section.
pub fn to_toml(cfg: &TrainConfig) -> anyhow::Result<String> {
    let body = toml::to_string(cfg).context("serializing config")?;
    let mut out = annotate(&body);
    let r = TrainConfig::reference_scale();
    out.push_str(&format!(
        "\n# Full-scale values, for reference only. This section is ignored when loading.\n\
         [{REFERENCE_SECTION}]\n\
         branching = {}\nmax_depth = {}\nstep_tokens = {}\ntau = {:?}\nkl_beta = {:?}\nentropy_alpha = {:?}\nlearning_rate = {:e}\n",
        r.tree.branching, r.tree.max_depth, r.tree.step_tokens, r.tau, r.kl_beta, r.entropy_alpha, r.learning_rate,
    ));
    Ok(out)
}

fn annotate(body: &str) -> String {
    let mut section = "";
    let mut out = String::new();
    for line in body.lines() {
        let trimmed = line.trim();
        if let Some(name) = trimmed.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            section = name;
        }
        out.push_str(line);
        if let Some((key, _)) = trimmed.split_once(" = ") {
            if let Some((_, _, note)) = UNITS.iter().find(|(s, k, _)| *s == section && *k == key) {
                out.push_str("  # ");
                out.push_str(note);
            }
        }
        out.push('\n');
    }
    out
}
