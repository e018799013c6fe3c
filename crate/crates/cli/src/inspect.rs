//! Text rendering of tree dumps.

use std::fmt::Write as _;

use anyhow::{bail, Context};
use treerpo::credit::{is_retained, StepGroup};
use treerpo::env::Vocabulary;
use treerpo::tree_sampler::DumpRecord;

#[derive(Debug, Clone, PartialEq)]
pub struct Inspection {
    pub text: String,
    pub root_reward: f64,
    pub groups: usize,
    pub retained: usize,
    pub pruned: usize,
}

/// Recomputes internal rewards from the leaves and renders the tree with
/// each group's reward range and pruning status at `tau`.
pub fn inspect(records: &[DumpRecord], tau: f64) -> anyhow::Result<Inspection> {
    if !(tau >= 0.0) {
        bail!("tau must be non-negative");
    }
    let n = records.len();
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut roots = Vec::new();
    for r in records {
        match r.parent_id {
            None => {
                if r.depth != 1 {
                    bail!("node {} has no parent but depth {}", r.node_id, r.depth);
                }
                roots.push(r.node_id);
            }
            Some(p) => {
                if r.depth != records[p].depth + 1 {
                    bail!("node {} has depth {} under a parent at depth {}", r.node_id, r.depth, records[p].depth);
                }
                children[p].push(r.node_id);
            }
        }
    }
    let mut value = vec![0.0; n];
    for id in (0..n).rev() {
        value[id] = if children[id].is_empty() {
            records[id].reward.with_context(|| format!("leaf node {id} has no reward"))?
        } else {
            mean(children[id].iter().map(|&c| value[c]))
        };
    }
    let root_reward = mean(roots.iter().map(|&c| value[c]));

    let vocab = Vocabulary;
    let mut text = String::new();
    let mut groups = 0;
    let mut retained = 0;
    let mut group_note = |members: &[usize]| {
        let g = StepGroup::new(None, members.to_vec(), members.iter().map(|&m| value[m]).collect());
        let keep = is_retained(g.delta_r, tau);
        groups += 1;
        retained += usize::from(keep);
        format!("delta_r={:.4} {}", g.delta_r, if keep { "retained" } else { "pruned" })
    };
    let _ = writeln!(text, "root reward={root_reward:.4} group {}", group_note(&roots));
    let mut stack: Vec<usize> = roots.iter().rev().copied().collect();
    while let Some(id) = stack.pop() {
        let r = &records[id];
        let indent = "  ".repeat(r.depth);
        let kind = if !children[id].is_empty() {
            format!("group {}", group_note(&children[id]))
        } else if r.terminated {
            "leaf".to_string()
        } else {
            "leaf (truncated)".to_string()
        };
        let _ = writeln!(
            text,
            "{indent}#{id} depth={} reward={:.4} [{}] {kind}",
            r.depth,
            value[id],
            vocab.render(&r.segment)
        );
        stack.extend(children[id].iter().rev());
    }
    let pruned = groups - retained;
    let _ = writeln!(text, "groups={groups} retained={retained} pruned={pruned} tau={tau}");
    Ok(Inspection { text, root_reward, groups, retained, pruned })
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, c) = xs.fold((0.0, 0usize), |(s, c), x| (s + x, c + 1));
    s / c as f64
}
