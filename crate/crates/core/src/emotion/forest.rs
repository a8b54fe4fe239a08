//! CART trees with Gini splits, bagged into a random forest.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::Execution;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestHyper {
    pub num_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Features considered per split; `None` means `ceil(sqrt(d))`.
    pub feature_subsample: Option<usize>,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestHyper {
    fn default() -> Self {
        ForestHyper {
            num_trees: 100,
            max_depth: 8,
            min_leaf: 2,
            feature_subsample: None,
            bootstrap: true,
            seed: 42,
        }
    }
}

impl ForestHyper {
    fn features_per_split(&self, dim: usize) -> usize {
        self.feature_subsample
            .unwrap_or_else(|| (dim as f64).sqrt().ceil() as usize)
            .clamp(1, dim)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "lowercase")]
pub enum Node {
    /// `[negative, positive]` class fractions, summing to 1.
    Leaf { distribution: [f64; 2] },
    Split {
        feature: usize,
        threshold: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub root: Node,
}

fn gini(pos: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = pos as f64 / n as f64;
    2.0 * p * (1.0 - p)
}

#[derive(Debug, Clone, Copy)]
struct BestSplit {
    feature: usize,
    threshold: f64,
    impurity: f64,
}

/// Best weighted-Gini threshold on one feature for the node's rows. Only
/// midpoints between distinct adjacent values leaving `min_leaf` rows on
/// each side are candidates; ties keep the lowest threshold.
pub(crate) fn best_threshold(
    x: &[Vec<f64>],
    y: &[bool],
    rows: &[usize],
    feature: usize,
    min_leaf: usize,
) -> Option<(f64, f64)> {
    let mut sorted: Vec<usize> = rows.to_vec();
    sorted.sort_by(|&a, &b| x[a][feature].total_cmp(&x[b][feature]));
    let n = sorted.len();
    let total_pos = sorted.iter().filter(|&&i| y[i]).count();
    let mut left_pos = 0;
    let mut best: Option<(f64, f64)> = None;
    for k in 1..n {
        left_pos += usize::from(y[sorted[k - 1]]);
        let (a, b) = (x[sorted[k - 1]][feature], x[sorted[k]][feature]);
        if a == b || k < min_leaf || n - k < min_leaf {
            continue;
        }
        let impurity = (k as f64 * gini(left_pos, k)
            + (n - k) as f64 * gini(total_pos - left_pos, n - k))
            / n as f64;
        if best.is_none_or(|(_, imp)| impurity < imp) {
            best = Some((0.5 * (a + b), impurity));
        }
    }
    best
}

impl DecisionTree {
    /// Grows a tree on `rows` (indices into `x`/`y`, duplicates allowed).
    pub fn fit(
        x: &[Vec<f64>],
        y: &[bool],
        rows: &[usize],
        hyper: &ForestHyper,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let dim = x.first().map_or(0, Vec::len);
        let per_split = hyper.features_per_split(dim.max(1));
        DecisionTree {
            root: Self::grow(x, y, rows, 0, dim, per_split, hyper, rng),
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn grow(
        x: &[Vec<f64>],
        y: &[bool],
        rows: &[usize],
        depth: usize,
        dim: usize,
        per_split: usize,
        hyper: &ForestHyper,
        rng: &mut ChaCha8Rng,
    ) -> Node {
        let n = rows.len();
        let pos = rows.iter().filter(|&&i| y[i]).count();
        let leaf = || {
            let p = if n == 0 { 0.0 } else { pos as f64 / n as f64 };
            Node::Leaf { distribution: [1.0 - p, p] }
        };
        if depth >= hyper.max_depth || pos == 0 || pos == n || n < 2 * hyper.min_leaf.max(1) || dim == 0 {
            return leaf();
        }
        let features: Vec<usize> = if per_split >= dim {
            (0..dim).collect()
        } else {
            sample(rng, dim, per_split).into_vec()
        };
        let mut best: Option<BestSplit> = None;
        for &f in &features {
            if let Some((threshold, impurity)) = best_threshold(x, y, rows, f, hyper.min_leaf.max(1)) {
                if best.is_none_or(|b| impurity < b.impurity) {
                    best = Some(BestSplit { feature: f, threshold, impurity });
                }
            }
        }
        let Some(split) = best else {
            return leaf();
        };
        let (left, right): (Vec<usize>, Vec<usize>) =
            rows.iter().partition(|&&i| x[i][split.feature] <= split.threshold);
        Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left: Box::new(Self::grow(x, y, &left, depth + 1, dim, per_split, hyper, rng)),
            right: Box::new(Self::grow(x, y, &right, depth + 1, dim, per_split, hyper, rng)),
        }
    }

    pub fn distribution(&self, x: &[f64]) -> [f64; 2] {
        let mut node = &self.root;
        loop {
            match node {
                Node::Leaf { distribution } => return *distribution,
                Node::Split { feature, threshold, left, right } => {
                    node = if x[*feature] <= *threshold { left } else { right };
                }
            }
        }
    }

    /// Majority class at the reached leaf; an even split votes negative.
    pub fn vote(&self, x: &[f64]) -> bool {
        let d = self.distribution(x);
        d[1] > d[0]
    }

    pub fn depth(&self) -> usize {
        fn depth(n: &Node) -> usize {
            match n {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + depth(left).max(depth(right)),
            }
        }
        depth(&self.root)
    }

    pub fn leaves(&self) -> Vec<[f64; 2]> {
        fn collect(n: &Node, out: &mut Vec<[f64; 2]>) {
            match n {
                Node::Leaf { distribution } => out.push(*distribution),
                Node::Split { left, right, .. } => {
                    collect(left, out);
                    collect(right, out);
                }
            }
        }
        let mut out = Vec::new();
        collect(&self.root, &mut out);
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForestModel {
    pub trees: Vec<DecisionTree>,
    pub dim: usize,
    pub max_depth: usize,
    pub seed: u64,
}

impl RandomForestModel {
    pub fn num_trees(&self) -> usize {
        self.trees.len()
    }

    /// Fraction of trees voting positive.
    pub fn positive_fraction(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::Model(format!(
                "feature dimension {} does not match forest dimension {}",
                x.len(),
                self.dim
            )));
        }
        let votes = self.trees.iter().filter(|t| t.vote(x)).count();
        Ok(votes as f64 / self.trees.len() as f64)
    }

    /// Positive iff strictly more than half of the trees vote positive.
    pub fn predict(&self, x: &[f64]) -> Result<(bool, f64)> {
        let score = self.positive_fraction(x)?;
        Ok((score > 0.5, score))
    }
}

/// Each tree `i` draws its bootstrap and split features from a generator
/// seeded with `seed + i`, so parallel and sequential training agree.
pub fn train_random_forest(x: &[Vec<f64>], y: &[bool], hyper: &ForestHyper) -> Result<RandomForestModel> {
    train_random_forest_with(x, y, hyper, Execution::default())
}

pub fn train_random_forest_with(
    x: &[Vec<f64>],
    y: &[bool],
    hyper: &ForestHyper,
    exec: Execution,
) -> Result<RandomForestModel> {
    if x.len() != y.len() || x.is_empty() {
        return Err(Error::Training(format!(
            "need equally many rows and labels, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    if !(y.contains(&true) && y.contains(&false)) {
        return Err(Error::Training("training set must contain both classes".into()));
    }
    let dim = x[0].len();
    if x.iter().any(|r| r.len() != dim || r.iter().any(|v| !v.is_finite())) {
        return Err(Error::Training("rows must share one dimension and be finite".into()));
    }
    if hyper.num_trees == 0 || hyper.feature_subsample == Some(0) {
        return Err(Error::Training("num_trees and feature_subsample must be >= 1".into()));
    }
    let n = x.len();
    let trees = exec.map_range(hyper.num_trees, |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed.wrapping_add(i as u64));
        let rows: Vec<usize> = if hyper.bootstrap {
            (0..n).map(|_| rng.random_range(0..n)).collect()
        } else {
            (0..n).collect()
        };
        DecisionTree::fit(x, y, &rows, hyper, &mut rng)
    });
    Ok(RandomForestModel {
        trees,
        dim,
        max_depth: hyper.max_depth,
        seed: hyper.seed,
    })
}
