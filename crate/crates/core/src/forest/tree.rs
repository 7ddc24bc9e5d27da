//! Canonical correlation trees: projection-bootstrapped oblique splits.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::split::{best_split, SplitChoice};
use super::TrainConfig;
use crate::linalg::{cca, one_hot, Matrix};

/// Node of a flat, pre-ordered tree. Children always sit at larger indices
/// than their parent; the root is node 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TreeNode {
    Internal {
        feature_indices: Vec<usize>,
        projection: Vec<f64>,
        threshold: f64,
        left_idx: usize,
        right_idx: usize,
    },
    Leaf {
        class_counts: Vec<u64>,
        class_probs: Vec<f64>,
    },
}

impl TreeNode {
    pub fn leaf(counts: &[usize]) -> TreeNode {
        let total: usize = counts.iter().sum();
        TreeNode::Leaf {
            class_counts: counts.iter().map(|&c| c as u64).collect(),
            class_probs: counts.iter().map(|&c| c as f64 / total as f64).collect(),
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, TreeNode::Leaf { .. })
    }
}

/// Dot product of the selected features of `x` with `weights`. Training and
/// routing both go through here so a sample lands on the same side of a
/// threshold in both.
#[inline]
pub fn project_point(x: &[f64], features: &[usize], weights: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (&f, &w) in features.iter().zip(weights) {
        acc += x[f] * w;
    }
    acc
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    /// Class distribution of the leaf that `x` (already standardized)
    /// reaches.
    pub fn leaf_probs(&self, x: &[f64]) -> &[f64] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                TreeNode::Internal {
                    feature_indices,
                    projection,
                    threshold,
                    left_idx,
                    right_idx,
                } => {
                    i = if project_point(x, feature_indices, projection) <= *threshold {
                        *left_idx
                    } else {
                        *right_idx
                    };
                }
                TreeNode::Leaf { class_probs, .. } => return class_probs,
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], i: usize) -> usize {
            match &nodes[i] {
                TreeNode::Internal {
                    left_idx,
                    right_idx,
                    ..
                } => 1 + walk(nodes, *left_idx).max(walk(nodes, *right_idx)),
                TreeNode::Leaf { .. } => 0,
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_leaf()).count()
    }
}

/// Training view of a node: the full standardized sample matrix and labels,
/// plus the resolved per-node feature draw.
pub struct NodeContext<'a> {
    pub features: &'a Matrix,
    pub labels: &'a [usize],
    pub n_classes: usize,
    pub feature_subsample: usize,
    pub gamma: f64,
}

/// Everything `grow_node` computed for one candidate split.
#[derive(Debug, Clone)]
pub struct SplitProposal {
    pub feature_indices: Vec<usize>,
    /// One weight vector (over `feature_indices`) per canonical component.
    pub directions: Vec<Vec<f64>>,
    /// `projected[c][i]`: node sample `i` on component `c`.
    pub projected: Vec<Vec<f64>>,
    pub choice: Option<SplitChoice>,
}

fn non_constant_features(ctx: &NodeContext, rows: &[usize]) -> Vec<usize> {
    let first = ctx.features.row(rows[0]);
    (0..ctx.features.cols())
        .filter(|&f| rows.iter().any(|&r| ctx.features.get(r, f) != first[f]))
        .collect()
}

/// Draws the feature subset and the projection bootstrap for a node, runs
/// CCA on the bootstrap, projects every node sample onto each canonical
/// direction and searches all thresholds.
///
/// Features that are constant within the node are never drawn. When the
/// bootstrap resample is degenerate (a single class, or no feature
/// variance) the CCA is computed on the node samples themselves.
pub fn propose_split<R: Rng + ?Sized>(
    ctx: &NodeContext,
    rows: &[usize],
    rng: &mut R,
) -> SplitProposal {
    let mut proposal = SplitProposal {
        feature_indices: Vec::new(),
        directions: Vec::new(),
        projected: Vec::new(),
        choice: None,
    };
    let candidates = non_constant_features(ctx, rows);
    if candidates.is_empty() {
        return proposal;
    }
    let take = ctx.feature_subsample.min(candidates.len());
    let mut features: Vec<usize> = index::sample(rng, candidates.len(), take)
        .iter()
        .map(|i| candidates[i])
        .collect();
    features.sort_unstable();

    let n = rows.len();
    let boot: Vec<usize> = (0..n).map(|_| rows[rng.random_range(0..n)]).collect();
    let run_cca = |sample: &[usize]| {
        let x = ctx.features.select(sample, &features);
        let labels: Vec<usize> = sample.iter().map(|&r| ctx.labels[r]).collect();
        cca(&x, &one_hot(&labels, ctx.n_classes), ctx.gamma).ok()
    };
    let result = match run_cca(&boot) {
        Some(r) if r.rank() > 0 => Some(r),
        _ => run_cca(rows).filter(|r| r.rank() > 0),
    };
    let Some(result) = result else {
        proposal.feature_indices = features;
        return proposal;
    };

    proposal.directions = (0..result.rank()).map(|c| result.direction(c)).collect();
    proposal.projected = proposal
        .directions
        .iter()
        .map(|w| {
            rows.iter()
                .map(|&r| project_point(ctx.features.row(r), &features, w))
                .collect()
        })
        .collect();
    let labels: Vec<usize> = rows.iter().map(|&r| ctx.labels[r]).collect();
    proposal.choice = best_split(&proposal.projected, &labels, ctx.n_classes);
    proposal.feature_indices = features;
    proposal
}

/// Grows the subtree rooted at a node holding `rows`, at `depth`.
///
/// A node becomes a leaf when it is pure, holds fewer than
/// `2 · min_node_size` samples, sits at `max_depth`, or admits no split.
/// Nodes are expanded depth-first, left child first, with an explicit stack.
pub fn grow_node<R: Rng + ?Sized>(
    ctx: &NodeContext,
    rows: Vec<usize>,
    depth: usize,
    config: &TrainConfig,
    rng: &mut R,
) -> Tree {
    let mut nodes = vec![TreeNode::leaf(&[1])];
    let mut stack = vec![(0usize, rows, depth)];
    let mut counts = vec![0usize; ctx.n_classes];

    while let Some((slot, rows, depth)) = stack.pop() {
        counts.iter_mut().for_each(|c| *c = 0);
        for &r in &rows {
            counts[ctx.labels[r]] += 1;
        }
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let too_small = rows.len() < 2 * config.min_node_size;
        let at_depth = config.max_depth.is_some_and(|m| depth >= m);
        if pure || too_small || at_depth {
            nodes[slot] = TreeNode::leaf(&counts);
            continue;
        }

        let proposal = propose_split(ctx, &rows, rng);
        let Some(choice) = proposal.choice else {
            nodes[slot] = TreeNode::leaf(&counts);
            continue;
        };
        let values = &proposal.projected[choice.component];
        let (mut left, mut right) = (Vec::new(), Vec::new());
        for (&r, &v) in rows.iter().zip(values) {
            if v <= choice.threshold {
                left.push(r);
            } else {
                right.push(r);
            }
        }
        if left.is_empty() || right.is_empty() {
            nodes[slot] = TreeNode::leaf(&counts);
            continue;
        }

        let left_idx = nodes.len();
        let right_idx = left_idx + 1;
        nodes.push(TreeNode::leaf(&[1]));
        nodes.push(TreeNode::leaf(&[1]));
        nodes[slot] = TreeNode::Internal {
            feature_indices: proposal.feature_indices,
            projection: proposal.directions[choice.component].clone(),
            threshold: choice.threshold,
            left_idx,
            right_idx,
        };
        stack.push((right_idx, right, depth + 1));
        stack.push((left_idx, left, depth + 1));
    }
    Tree { nodes }
}
