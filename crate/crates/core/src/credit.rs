//! Credit assignment over scored trees: leaf evaluation, bottom-up reward
//! averaging, sibling groups, range-based pruning and group-relative
//! advantages.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::env::{TokenId, Verifier};
use crate::error::{Error, Result};
use crate::tree_sampler::{NodeId, SampleTree};

/// Sibling set under one parent (`None` is the root / prompt).
#[derive(Debug, Clone, PartialEq)]
pub struct StepGroup {
    pub parent: Option<NodeId>,
    pub member_ids: Vec<NodeId>,
    pub rewards: Vec<f64>,
    /// `max(rewards) - min(rewards)`
    pub delta_r: f64,
    pub mu: f64,
}

impl StepGroup {
    pub fn new(parent: Option<NodeId>, member_ids: Vec<NodeId>, rewards: Vec<f64>) -> Self {
        assert_eq!(member_ids.len(), rewards.len());
        let (lo, hi) = rewards.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &r| (lo.min(r), hi.max(r)));
        let delta_r = if rewards.is_empty() { 0.0 } else { hi - lo };
        let mu = mean(&rewards);
        StepGroup { parent, member_ids, rewards, delta_r, mu }
    }

    pub fn len(&self) -> usize {
        self.member_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.member_ids.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdvantageVariant {
    /// `(R - mu) / (mu (1 - mu))`
    TreeRpo,
    /// `(R - mu) / std(R)` with the population standard deviation.
    GrpoStd,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdvantageMode {
    pub variant: AdvantageVariant,
    pub sigma_floor: f64,
}

pub const DEFAULT_SIGMA_FLOOR: f64 = 1e-6;

impl AdvantageMode {
    pub fn tree_rpo() -> Self {
        AdvantageMode { variant: AdvantageVariant::TreeRpo, sigma_floor: DEFAULT_SIGMA_FLOOR }
    }

    pub fn grpo_std() -> Self {
        AdvantageMode { variant: AdvantageVariant::GrpoStd, sigma_floor: DEFAULT_SIGMA_FLOOR }
    }
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population standard deviation.
pub fn population_std(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64).sqrt()
}

/// Sets every leaf reward from the verifier. Internal nodes are untouched.
pub fn score_leaves(tree: &mut SampleTree, verifier: &dyn Verifier) -> Result<()> {
    if tree.root_children.is_empty() {
        return Err(Error::Contract("tree has no sampled nodes".into()));
    }
    let max_depth = tree.config.max_depth;
    for id in 0..tree.nodes.len() {
        let node = &tree.nodes[id];
        if !node.is_leaf() {
            continue;
        }
        if !node.terminated && node.depth < max_depth {
            return Err(Error::Contract(format!("node {id} is neither terminated nor at the depth limit")));
        }
        let path = tree.path_tokens(id)?;
        let r = verifier.verify(&tree.task, &path)?.reward;
        tree.nodes[id].reward = Some(r);
    }
    Ok(())
}

/// Replaces each internal node's reward by the mean of its children's,
/// bottom-up, and sets the root reward. Idempotent.
pub fn propagate_rewards(tree: &mut SampleTree) -> Result<()> {
    // children always have larger ids than their parent
    for id in (0..tree.nodes.len()).rev() {
        let node = &tree.nodes[id];
        if node.is_leaf() {
            if node.reward.is_none() {
                return Err(Error::Contract(format!("leaf {id} has no reward")));
            }
            continue;
        }
        let r = children_mean(tree, &node.children)?;
        tree.nodes[id].reward = Some(r);
    }
    tree.root_reward = Some(children_mean(tree, &tree.root_children)?);
    Ok(())
}

fn children_mean(tree: &SampleTree, children: &[NodeId]) -> Result<f64> {
    let mut sum = 0.0;
    for &c in children {
        sum += tree.nodes[c].reward.ok_or_else(|| Error::Contract(format!("node {c} has no reward")))?;
    }
    Ok(sum / children.len() as f64)
}

/// One group per internal node, root first, then by node id.
pub fn build_groups(tree: &SampleTree) -> Result<Vec<StepGroup>> {
    let mut parents = vec![None];
    parents.extend(tree.nodes.iter().filter(|n| !n.is_leaf()).map(|n| Some(n.id)));
    parents
        .into_iter()
        .map(|parent| {
            let members = tree.children_of(parent).to_vec();
            let rewards = members
                .iter()
                .map(|&c| {
                    tree.nodes[c]
                        .reward
                        .ok_or_else(|| Error::Contract(format!("node {c} has no reward; propagate first")))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(StepGroup::new(parent, members, rewards))
        })
        .collect()
}

/// Rewards are averages, so a range that equals `tau` in exact arithmetic can land a few
/// ulps above it; differences within this tolerance count as equal.
pub const PRUNE_TOLERANCE: f64 = 1e-12;

/// Whether a group with reward range `delta_r` enters the batch: `delta_r > tau`,
/// with `delta_r` within [`PRUNE_TOLERANCE`] of `tau` treated as equal (pruned).
pub fn is_retained(delta_r: f64, tau: f64) -> bool {
    delta_r > tau && delta_r - tau > PRUNE_TOLERANCE * tau.abs().max(1.0)
}

/// Keeps exactly the groups passing [`is_retained`], in order.
pub fn prune_groups(groups: Vec<StepGroup>, tau: f64) -> Result<Vec<StepGroup>> {
    if !(tau >= 0.0) {
        return Err(Error::config("tau", "pruning threshold must be non-negative"));
    }
    Ok(groups.into_iter().filter(|g| is_retained(g.delta_r, tau)).collect())
}

/// Group-relative advantages, one per member.
pub fn compute_advantages(group: &StepGroup, mode: AdvantageMode) -> Result<Vec<f64>> {
    if group.len() < 2 {
        return Err(Error::Contract(format!("advantages need at least two group members, got {}", group.len())));
    }
    let mu = group.mu;
    let scale = match mode.variant {
        AdvantageVariant::TreeRpo => mu * (1.0 - mu),
        AdvantageVariant::GrpoStd => population_std(&group.rewards),
    };
    let sigma = scale.max(mode.sigma_floor);
    Ok(group.rewards.iter().map(|r| (r - mu) / sigma).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GroupKey {
    pub tree: usize,
    pub parent: Option<NodeId>,
}

/// One retained step, ready for the clipped-objective update.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSample {
    /// Path of the parent node (prompt for root groups).
    pub context: Vec<TokenId>,
    pub segment: Vec<TokenId>,
    pub old_log_probs: Vec<f64>,
    /// Broadcast over every token of the segment.
    pub advantage: f64,
    pub group_key: GroupKey,
    pub child_index: usize,
    pub node_id: NodeId,
    pub reward: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Batch {
    pub samples: Vec<TrainSample>,
    pub total_groups: usize,
    pub retained_groups: usize,
}

impl Batch {
    pub fn pruned_groups(&self) -> usize {
        self.total_groups - self.retained_groups
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Turns scored, propagated trees into training samples ordered by tree,
/// parent, then child index. `tau = None` keeps every group.
pub fn assemble_batch(trees: &[SampleTree], tau: Option<f64>, mode: AdvantageMode) -> Result<Batch> {
    let mut batch = Batch::default();
    for (tree_id, tree) in trees.iter().enumerate() {
        let groups = build_groups(tree)?;
        batch.total_groups += groups.len();
        let retained = match tau {
            Some(t) => prune_groups(groups, t)?,
            None => groups,
        };
        batch.retained_groups += retained.len();
        for g in &retained {
            let adv = compute_advantages(g, mode)?;
            let context = tree.context_of(g.parent)?;
            for (child_index, (&id, &a)) in g.member_ids.iter().zip(&adv).enumerate() {
                let node = &tree.nodes[id];
                batch.samples.push(TrainSample {
                    context: context.clone(),
                    segment: node.segment.clone(),
                    old_log_probs: node.old_log_probs.clone(),
                    advantage: a,
                    group_key: GroupKey { tree: tree_id, parent: g.parent },
                    child_index,
                    node_id: id,
                    reward: g.rewards[child_index],
                });
            }
        }
    }
    Ok(batch)
}

/// Writes `tree_id,parent_id,child_index,advantage,reward` per sample.
pub fn write_batch_dump<W: Write>(mut out: W, samples: &[TrainSample]) -> Result<()> {
    for s in samples {
        let parent = s.group_key.parent.map_or_else(|| "root".to_string(), |p| p.to_string());
        writeln!(out, "{},{},{},{},{}", s.group_key.tree, parent, s.child_index, s.advantage, s.reward)?;
    }
    Ok(())
}
