//! N-ary tree sampling of token segments.
//!
//! The prompt is the implicit root. Every unterminated node above the depth
//! limit spawns `branching` children; each child holds one segment of at most
//! `step_tokens` tokens sampled from the policy conditioned on the full path.
//! Each node owns an RNG substream derived from its parent's seed and its child
//! index, so the tree does not depend on expansion order.

use std::io::{BufRead, Write};

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::env::{TaskInstance, TokenId, STOP};
use crate::error::{Error, Result};
use crate::policy::{PolicyParams, TokenDistribution};
use crate::rng;

pub const DEFAULT_NODE_CAP: usize = 10_000;

pub type NodeId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TreeConfig {
    /// Children per expanded node (N).
    pub branching: usize,
    /// Depth limit (D); depth 1 is the first sampled step.
    pub max_depth: usize,
    /// Maximum tokens per segment (L_step).
    pub step_tokens: usize,
    pub temperature: f64,
    #[serde(default = "default_node_cap")]
    pub node_cap: usize,
}

fn default_node_cap() -> usize {
    DEFAULT_NODE_CAP
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig { branching: 3, max_depth: 3, step_tokens: 8, temperature: 1.5, node_cap: DEFAULT_NODE_CAP }
    }
}

impl TreeConfig {
    /// N=8, D=3, L_step=384 as used for LLM-scale training.
    pub fn reference() -> Self {
        TreeConfig { branching: 8, max_depth: 3, step_tokens: 384, temperature: 1.0, node_cap: DEFAULT_NODE_CAP }
    }

    /// Worst-case node count `N + N^2 + ... + N^D`, or `None` on overflow.
    pub fn node_budget(&self) -> Option<usize> {
        let mut total: usize = 0;
        let mut level: usize = 1;
        for _ in 0..self.max_depth {
            level = level.checked_mul(self.branching)?;
            total = total.checked_add(level)?;
        }
        Some(total)
    }

    pub fn validate(&self) -> Result<()> {
        if self.branching == 0 {
            return Err(Error::config("branching", "must be at least 1"));
        }
        if self.max_depth == 0 {
            return Err(Error::config("max_depth", "must be at least 1"));
        }
        if self.step_tokens == 0 {
            return Err(Error::config("step_tokens", "must be at least 1"));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::config("temperature", "must be positive and finite"));
        }
        match self.node_budget() {
            Some(n) if n <= self.node_cap => Ok(()),
            _ => Err(Error::Resource(format!(
                "N={} D={} exceeds the node cap of {}",
                self.branching, self.max_depth, self.node_cap
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeNode {
    pub id: NodeId,
    pub parent: Option<NodeId>,
    pub depth: usize,
    pub segment: Vec<TokenId>,
    /// Temperature-1 log-probs of `segment` under the rollout policy.
    pub old_log_probs: Vec<f64>,
    pub terminated: bool,
    pub reward: Option<f64>,
    pub children: Vec<NodeId>,
}

impl TreeNode {
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleTree {
    pub task: TaskInstance,
    pub config: TreeConfig,
    pub nodes: Vec<TreeNode>,
    pub root_children: Vec<NodeId>,
    /// Mean of the root children's rewards once propagated.
    pub root_reward: Option<f64>,
}

impl SampleTree {
    pub fn node(&self, id: NodeId) -> Result<&TreeNode> {
        self.nodes.get(id).ok_or_else(|| Error::Lookup(format!("no node with id {id}")))
    }

    /// Children of `parent`, where `None` is the root.
    pub fn children_of(&self, parent: Option<NodeId>) -> &[NodeId] {
        match parent {
            None => &self.root_children,
            Some(id) => &self.nodes[id].children,
        }
    }

    pub fn leaves(&self) -> impl Iterator<Item = &TreeNode> {
        self.nodes.iter().filter(|n| n.is_leaf())
    }

    pub fn internal_count(&self) -> usize {
        self.nodes.iter().filter(|n| !n.is_leaf()).count()
    }

    /// The prompt followed by every segment from depth 1 down to `id`.
    pub fn path_tokens(&self, id: NodeId) -> Result<Vec<TokenId>> {
        let mut chain = Vec::new();
        let mut cur = Some(id);
        while let Some(c) = cur {
            let n = self.node(c)?;
            chain.push(c);
            cur = n.parent;
        }
        let mut path = self.task.prompt.clone();
        for &c in chain.iter().rev() {
            path.extend_from_slice(&self.nodes[c].segment);
        }
        Ok(path)
    }

    /// Path of a group parent: the prompt for the root, else [`Self::path_tokens`].
    pub fn context_of(&self, parent: Option<NodeId>) -> Result<Vec<TokenId>> {
        match parent {
            None => Ok(self.task.prompt.clone()),
            Some(id) => self.path_tokens(id),
        }
    }
}

/// Samples one segment: stops after STOP or `max_tokens` tokens.
fn sample_segment(
    params: &PolicyParams,
    path: &[TokenId],
    max_tokens: usize,
    temperature: f64,
    seed: u64,
) -> (Vec<TokenId>, Vec<f64>, bool) {
    let mut rng = rng::from_seed(seed);
    let mut ctx = path.to_vec();
    let mut active = Vec::new();
    let mut segment = Vec::with_capacity(max_tokens);
    let mut logps = Vec::with_capacity(max_tokens);
    let mut terminated = false;
    while segment.len() < max_tokens {
        params.features().active_into(&ctx, &mut active);
        let logits = params.logits_for(&active);
        let base = TokenDistribution::from_logits(logits.clone());
        let tok = if temperature == 1.0 {
            base.sample(&mut rng)
        } else {
            TokenDistribution::from_logits(logits.iter().map(|z| z / temperature).collect()).sample(&mut rng)
        };
        segment.push(tok);
        logps.push(base.log_probs[tok]);
        ctx.push(tok);
        if tok == STOP {
            terminated = true;
            break;
        }
    }
    (segment, logps, terminated)
}

/// Breadth-first expansion of the sample tree for `task`.
pub fn expand_tree(
    task: &TaskInstance,
    params: &PolicyParams,
    config: &TreeConfig,
    rng: &mut dyn RngCore,
) -> Result<SampleTree> {
    config.validate()?;
    let root_seed = rng.next_u64();
    let mut nodes: Vec<TreeNode> = Vec::new();
    let mut root_children = Vec::with_capacity(config.branching);
    // (parent, seed, path)
    let mut frontier: Vec<(Option<NodeId>, u64, Vec<TokenId>)> = vec![(None, root_seed, task.prompt.clone())];
    let mut depth = 1;
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for (parent, seed, path) in frontier {
            for c in 0..config.branching {
                let child_seed = rng::derive(seed, c as u64);
                let (segment, old_log_probs, terminated) =
                    sample_segment(params, &path, config.step_tokens, config.temperature, child_seed);
                let id = nodes.len();
                if !terminated && depth < config.max_depth {
                    let mut child_path = path.clone();
                    child_path.extend_from_slice(&segment);
                    next.push((Some(id), child_seed, child_path));
                }
                nodes.push(TreeNode {
                    id,
                    parent,
                    depth,
                    segment,
                    old_log_probs,
                    terminated,
                    reward: None,
                    children: Vec::new(),
                });
                match parent {
                    None => root_children.push(id),
                    Some(p) => nodes[p].children.push(id),
                }
            }
        }
        frontier = next;
        depth += 1;
    }
    Ok(SampleTree { task: task.clone(), config: *config, nodes, root_children, root_reward: None })
}

/// `group_size` independent full trajectories as children of the root: the
/// flat GRPO sampling scheme as a depth-one tree.
pub fn flat_rollouts(
    task: &TaskInstance,
    params: &PolicyParams,
    group_size: usize,
    max_tokens: usize,
    temperature: f64,
    rng: &mut dyn RngCore,
) -> Result<SampleTree> {
    if group_size < 2 {
        return Err(Error::config("group_size", "GRPO needs at least two rollouts"));
    }
    let config = TreeConfig {
        branching: group_size,
        max_depth: 1,
        step_tokens: max_tokens,
        temperature,
        node_cap: DEFAULT_NODE_CAP.max(group_size),
    };
    expand_tree(task, params, &config, rng)
}

/// One line of the tree dump format.
#[derive(Debug, Clone, PartialEq)]
pub struct DumpRecord {
    pub node_id: NodeId,
    pub parent_id: Option<NodeId>,
    pub depth: usize,
    pub terminated: bool,
    pub reward: Option<f64>,
    pub segment: Vec<TokenId>,
}

fn opt_to_string<T: ToString>(v: Option<T>, none: &str) -> String {
    v.map_or_else(|| none.to_string(), |x| x.to_string())
}

/// Writes `node_id,parent_id,depth,terminated,reward,segment-token-ids` per
/// node. Root children have parent `root`; unset rewards are written as `-`.
pub fn write_tree_dump<W: Write>(mut out: W, tree: &SampleTree) -> Result<()> {
    for n in &tree.nodes {
        let seg = n.segment.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(" ");
        writeln!(
            out,
            "{},{},{},{},{},{}",
            n.id,
            opt_to_string(n.parent, "root"),
            n.depth,
            n.terminated,
            opt_to_string(n.reward, "-"),
            seg
        )?;
    }
    Ok(())
}

/// Parses a tree dump. Blank lines and lines starting with `#` are skipped;
/// an input without records is an error at line 1.
pub fn read_tree_dump<R: BufRead>(input: R) -> Result<Vec<DumpRecord>> {
    let mut records: Vec<DumpRecord> = Vec::new();
    let mut last_line = 0;
    for (i, line) in input.lines().enumerate() {
        let lineno = i + 1;
        last_line = lineno;
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 6 {
            return Err(Error::parse(lineno, format!("expected 6 fields, found {}", f.len())));
        }
        let bad = |what: &str, s: &str| Error::parse(lineno, format!("bad {what} `{s}`"));
        let node_id: NodeId = f[0].trim().parse().map_err(|_| bad("node_id", f[0]))?;
        let parent_id = match f[1].trim() {
            "root" => None,
            s => Some(s.parse::<NodeId>().map_err(|_| bad("parent_id", s))?),
        };
        let depth: usize = f[2].trim().parse().map_err(|_| bad("depth", f[2]))?;
        let terminated: bool = f[3].trim().parse().map_err(|_| bad("terminated", f[3]))?;
        let reward = match f[4].trim() {
            "-" => None,
            s => Some(s.parse::<f64>().map_err(|_| bad("reward", s))?),
        };
        let segment = f[5]
            .split_whitespace()
            .map(|s| s.parse::<TokenId>().map_err(|_| bad("token id", s)))
            .collect::<Result<Vec<_>>>()?;
        if node_id != records.len() {
            return Err(Error::parse(lineno, format!("node ids must be dense, expected {}", records.len())));
        }
        if let Some(p) = parent_id {
            if p >= node_id {
                return Err(Error::parse(lineno, format!("parent {p} must precede node {node_id}")));
            }
        }
        records.push(DumpRecord { node_id, parent_id, depth, terminated, reward, segment });
    }
    if records.is_empty() {
        return Err(Error::parse(last_line.max(1), "no node records"));
    }
    Ok(records)
}
