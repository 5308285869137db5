//! Greedy regression trees split by within-node sum-of-squares reduction.

use rand_chacha::ChaCha8Rng;

use crate::dataset::Dataset;
use super::SmoothingConfig;

#[derive(Clone, Debug)]
pub enum Node {
    Leaf {
        value: f64,
    },
    /// Rows with x[feature] <= threshold go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Clone, Debug)]
pub struct Tree {
    nodes: Vec<Node>,
    bootstrap_indices: Vec<usize>,
}

impl Tree {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    /// The row multiset this tree was fitted on.
    pub fn bootstrap_indices(&self) -> &[usize] {
        &self.bootstrap_indices
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn predict_row(&self, data: &Dataset, row: usize) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if data.value(row, feature) <= threshold {
                        left
                    } else {
                        right
                    }
                }
            }
        }
    }

    /// Root-to-leaf condition lists, left subtree first. Each entry is
    /// (feature, threshold, goes_left); goes_left means x <= threshold.
    pub fn paths(&self) -> Vec<Vec<(usize, f64, bool)>> {
        let mut out = Vec::new();
        let mut current = Vec::new();
        self.collect_paths(0, &mut current, &mut out);
        out
    }

    fn collect_paths(
        &self,
        at: usize,
        current: &mut Vec<(usize, f64, bool)>,
        out: &mut Vec<Vec<(usize, f64, bool)>>,
    ) {
        match self.nodes[at] {
            Node::Leaf { .. } => out.push(current.clone()),
            Node::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                current.push((feature, threshold, true));
                self.collect_paths(left, current, out);
                current.pop();
                current.push((feature, threshold, false));
                self.collect_paths(right, current, out);
                current.pop();
            }
        }
    }
}

/// Fit one regression tree on the given row multiset; targets[k] is the
/// outcome paired with rows[k] (they may differ per occurrence of a row).
///
/// Splits greedily maximize the between-child sum-of-squares over midpoint
/// candidates between consecutive distinct values of mtry randomly drawn
/// features; ties resolve to the lowest feature index, then the lowest
/// threshold. Nodes stop at the depth cap, the leaf-size floor, or when no
/// split strictly reduces the error.
pub fn fit_tree(
    rows: &[usize],
    data: &Dataset,
    targets: &[f64],
    cfg: &SmoothingConfig,
    rng: &mut ChaCha8Rng,
) -> Tree {
    assert_eq!(rows.len(), targets.len(), "one target per fitted row");
    assert!(!rows.is_empty(), "cannot fit a tree on zero rows");
    let floor = cfg.leaf_floor(rows.len());
    let mtry = cfg.resolved_mtry(data.p());
    let mut nodes = Vec::new();
    let items: Vec<(usize, f64)> = rows.iter().copied().zip(targets.iter().copied()).collect();
    grow(&mut nodes, items, 0, floor, mtry, data, cfg, rng);
    Tree {
        nodes,
        bootstrap_indices: rows.to_vec(),
    }
}

#[allow(clippy::too_many_arguments)]
fn grow(
    nodes: &mut Vec<Node>,
    items: Vec<(usize, f64)>,
    depth: usize,
    floor: usize,
    mtry: usize,
    data: &Dataset,
    cfg: &SmoothingConfig,
    rng: &mut ChaCha8Rng,
) -> usize {
    let n_node = items.len();
    let sum: f64 = items.iter().map(|(_, t)| t).sum();
    let make_leaf = |nodes: &mut Vec<Node>| {
        let idx = nodes.len();
        nodes.push(Node::Leaf {
            value: sum / n_node as f64,
        });
        idx
    };
    if depth >= cfg.max_depth || n_node < 2 * floor {
        return make_leaf(nodes);
    }

    let mut candidates = rand::seq::index::sample(rng, data.p(), mtry).into_vec();
    candidates.sort_unstable();

    let mut best: Option<(f64, usize, f64)> = None;
    let parent_term = sum * sum / n_node as f64;
    let mut scratch: Vec<(f64, f64)> = Vec::with_capacity(n_node);
    for &j in &candidates {
        scratch.clear();
        scratch.extend(items.iter().map(|&(row, t)| (data.value(row, j), t)));
        scratch.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
        let mut sum_left = 0.0;
        for i in 0..n_node - 1 {
            sum_left += scratch[i].1;
            if scratch[i].0 == scratch[i + 1].0 {
                continue;
            }
            let n_left = i + 1;
            let n_right = n_node - n_left;
            if n_left < floor || n_right < floor {
                continue;
            }
            let sum_right = sum - sum_left;
            let reduction = sum_left * sum_left / n_left as f64
                + sum_right * sum_right / n_right as f64
                - parent_term;
            if reduction > 0.0 && best.is_none_or(|(r, _, _)| reduction > r) {
                let threshold = (scratch[i].0 + scratch[i + 1].0) / 2.0;
                best = Some((reduction, j, threshold));
            }
        }
    }

    let Some((_, feature, threshold)) = best else {
        return make_leaf(nodes);
    };
    let (left_items, right_items): (Vec<_>, Vec<_>) = items
        .into_iter()
        .partition(|&(row, _)| data.value(row, feature) <= threshold);
    let idx = nodes.len();
    nodes.push(Node::Leaf { value: 0.0 });
    let left = grow(nodes, left_items, depth + 1, floor, mtry, data, cfg, rng);
    let right = grow(nodes, right_items, depth + 1, floor, mtry, data, cfg, rng);
    nodes[idx] = Node::Split {
        feature,
        threshold,
        left,
        right,
    };
    idx
}
