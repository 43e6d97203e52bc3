//! Random forest of Gini-impurity decision trees grown on bootstrap
//! samples with a random feature subset considered at each split.

use ndarray::ArrayView2;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node {
    Leaf { genuine: bool },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeConfig {
    pub max_features: usize,
    pub min_samples_split: usize,
    pub max_depth: Option<usize>,
}

impl DecisionTree {
    /// Grow a tree on the rows listed in `sample` (duplicates allowed).
    pub fn fit(x: ArrayView2<f64>, y: &[bool], sample: Vec<usize>, config: &TreeConfig, rng: &mut impl Rng) -> Self {
        let mut tree = DecisionTree { nodes: Vec::new() };
        // (node slot, rows, depth)
        let mut stack = vec![(0usize, sample, 0usize)];
        tree.nodes.push(Node::Leaf { genuine: true });
        while let Some((slot, rows, depth)) = stack.pop() {
            let pos = rows.iter().filter(|&&i| y[i]).count();
            let majority = 2 * pos >= rows.len();
            let pure = pos == 0 || pos == rows.len();
            let depth_capped = config.max_depth.is_some_and(|d| depth >= d);
            if pure || rows.len() < config.min_samples_split || depth_capped {
                tree.nodes[slot] = Node::Leaf { genuine: majority };
                continue;
            }
            match best_split(x, y, &rows, config.max_features, rng) {
                None => tree.nodes[slot] = Node::Leaf { genuine: majority },
                Some((feature, threshold)) => {
                    let (l, r): (Vec<usize>, Vec<usize>) =
                        rows.into_iter().partition(|&i| x[[i, feature]] <= threshold);
                    let left = tree.nodes.len();
                    tree.nodes.push(Node::Leaf { genuine: true });
                    let right = tree.nodes.len();
                    tree.nodes.push(Node::Leaf { genuine: true });
                    tree.nodes[slot] = Node::Split { feature, threshold, left, right };
                    stack.push((right, r, depth + 1));
                    stack.push((left, l, depth + 1));
                }
            }
        }
        tree
    }

    pub fn predict(&self, x: &[f64]) -> bool {
        let mut k = 0;
        loop {
            match self.nodes[k] {
                Node::Leaf { genuine } => return genuine,
                Node::Split { feature, threshold, left, right } => {
                    k = if x[feature] <= threshold { left } else { right };
                }
            }
        }
    }
}

/// Best Gini split over a random feature subset. If no sampled feature
/// can split the rows, the remaining features are tried in random order.
fn best_split(
    x: ArrayView2<f64>,
    y: &[bool],
    rows: &[usize],
    max_features: usize,
    rng: &mut impl Rng,
) -> Option<(usize, f64)> {
    let mut features: Vec<usize> = (0..x.ncols()).collect();
    features.shuffle(rng);
    let n = rows.len() as f64;
    let total_pos = rows.iter().filter(|&&i| y[i]).count() as f64;

    let mut best: Option<(f64, usize, f64)> = None;
    let mut order: Vec<usize> = rows.to_vec();
    for (k, &f) in features.iter().enumerate() {
        if k >= max_features && best.is_some() {
            break;
        }
        order.sort_by(|&a, &b| x[[a, f]].total_cmp(&x[[b, f]]));
        let mut left_pos = 0.0;
        for s in 0..order.len() - 1 {
            if y[order[s]] {
                left_pos += 1.0;
            }
            let (v, next) = (x[[order[s], f]], x[[order[s + 1], f]]);
            if v == next {
                continue;
            }
            let nl = (s + 1) as f64;
            let nr = n - nl;
            let right_pos = total_pos - left_pos;
            let gini_l = 1.0 - (left_pos / nl).powi(2) - (1.0 - left_pos / nl).powi(2);
            let gini_r = 1.0 - (right_pos / nr).powi(2) - (1.0 - right_pos / nr).powi(2);
            let impurity = (nl * gini_l + nr * gini_r) / n;
            if best.is_none_or(|(b, _, _)| impurity < b) {
                let mut threshold = 0.5 * (v + next);
                if threshold >= next {
                    threshold = v;
                }
                best = Some((impurity, f, threshold));
            }
        }
    }
    best.map(|(_, f, t)| (f, t))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub trees: Vec<DecisionTree>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub tree: TreeConfig,
    pub bootstrap: bool,
}

impl RandomForest {
    pub fn fit(x: ArrayView2<f64>, y: &[bool], config: &ForestConfig, seed: u64) -> Self {
        let n = x.nrows();
        let trees = (0..config.n_trees)
            .map(|t| {
                let mut rng = seed::rng(seed::derive_index(seed, "tree", t as u64));
                let sample = if config.bootstrap {
                    (0..n).map(|_| rng.random_range(0..n)).collect()
                } else {
                    (0..n).collect()
                };
                DecisionTree::fit(x, y, sample, &config.tree, &mut rng)
            })
            .collect();
        RandomForest { trees }
    }

    /// Fraction of trees voting genuine.
    pub fn vote_fraction(&self, x: &[f64]) -> f64 {
        let votes = self.trees.iter().filter(|t| t.predict(x)).count();
        votes as f64 / self.trees.len() as f64
    }
}
