//! Random forest of axis-aligned Gini trees for binary labels.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Parallelism;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    /// Number of trees `t`.
    pub trees: usize,
    /// Candidate features drawn per node, `x_d`.
    pub max_features: usize,
    pub bootstrap: bool,
    pub min_leaf: usize,
    pub max_depth: Option<usize>,
    #[serde(skip)]
    pub parallelism: Parallelism,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            trees: 100,
            max_features: 4,
            bootstrap: true,
            min_leaf: 1,
            max_depth: None,
            parallelism: Parallelism::default(),
        }
    }
}

impl ForestParams {
    pub fn new(trees: usize, max_features: usize) -> Self {
        Self {
            trees,
            max_features,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "lowercase")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: u32,
        right: u32,
    },
    /// `[P(class 0), P(class 1)]`
    Leaf { probs: [f64; 2] },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    /// Probability of class 1 at the leaf reached by `x`.
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut at = 0usize;
        loop {
            match &self.nodes[at] {
                Node::Leaf { probs } => return probs[1],
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if x[*feature] <= *threshold {
                        *left as usize
                    } else {
                        *right as usize
                    };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => {
                    1 + go(nodes, *left as usize).max(go(nodes, *right as usize))
                }
            }
        }
        go(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub dim: usize,
    pub max_features: usize,
    pub trees: Vec<Tree>,
}

impl ForestModel {
    /// Mean of the per-tree leaf probabilities of class 1.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(self.predict_unchecked(x))
    }

    pub(crate) fn predict_unchecked(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len() as f64
    }
}

pub fn forest_train(
    x: &[Vec<f64>],
    y: &[bool],
    params: &ForestParams,
    seed: u64,
) -> Result<ForestModel> {
    if x.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    if x.len() != y.len() {
        return Err(Error::InvalidParams(format!(
            "{} samples but {} labels",
            x.len(),
            y.len()
        )));
    }
    let dim = x[0].len();
    if let Some(bad) = x.iter().find(|v| v.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: bad.len(),
        });
    }
    if params.trees == 0 {
        return Err(Error::InvalidParams("forest needs at least one tree".into()));
    }
    if params.max_features == 0 || params.max_features > dim {
        return Err(Error::InvalidParams(format!(
            "max_features {} must lie in 1..={dim}",
            params.max_features
        )));
    }
    if params.min_leaf == 0 {
        return Err(Error::InvalidParams("min_leaf must be at least 1".into()));
    }
    // Seeds are fixed per tree up front so parallel growth stays reproducible.
    let trees = params.parallelism.map_range(params.trees, |t| {
        grow_tree(x, y, params, seed::child(seed, t as u64))
    });
    Ok(ForestModel {
        dim,
        max_features: params.max_features,
        trees,
    })
}

struct Builder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [bool],
    params: &'a ForestParams,
    rng: seed::Rng,
    nodes: Vec<Node>,
    features: Vec<usize>,
    scratch: Vec<(f64, bool)>,
}

struct Split {
    feature: usize,
    threshold: f64,
    score: f64,
}

fn grow_tree(x: &[Vec<f64>], y: &[bool], params: &ForestParams, seed: u64) -> Tree {
    let mut rng = seed::rng(seed);
    let n = x.len();
    let idx: Vec<usize> = if params.bootstrap {
        (0..n).map(|_| rng.random_range(0..n)).collect()
    } else {
        (0..n).collect()
    };
    let mut b = Builder {
        x,
        y,
        params,
        rng,
        nodes: Vec::new(),
        features: (0..x[0].len()).collect(),
        scratch: Vec::with_capacity(n),
    };
    b.build(idx, 0);
    Tree { nodes: b.nodes }
}

impl Builder<'_> {
    fn leaf(&mut self, idx: &[usize]) -> u32 {
        let pos = idx.iter().filter(|&&i| self.y[i]).count() as f64;
        let p1 = pos / idx.len() as f64;
        self.nodes.push(Node::Leaf {
            probs: [1.0 - p1, p1],
        });
        (self.nodes.len() - 1) as u32
    }

    fn build(&mut self, idx: Vec<usize>, depth: usize) -> u32 {
        let pos = idx.iter().filter(|&&i| self.y[i]).count();
        let pure = pos == 0 || pos == idx.len();
        let capped = self.params.max_depth.is_some_and(|d| depth >= d);
        if pure || capped || idx.len() < 2 * self.params.min_leaf {
            return self.leaf(&idx);
        }
        let Some(split) = self.choose_split(&idx) else {
            return self.leaf(&idx);
        };
        let (l, r): (Vec<usize>, Vec<usize>) = idx
            .iter()
            .partition(|&&i| self.x[i][split.feature] <= split.threshold);
        let at = self.nodes.len();
        self.nodes.push(Node::Leaf { probs: [0.0; 2] });
        let left = self.build(l, depth + 1);
        let right = self.build(r, depth + 1);
        self.nodes[at] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        at as u32
    }

    /// Best split among `max_features` random candidates; if none of them
    /// can split the node, keeps drawing from the remaining features.
    fn choose_split(&mut self, idx: &[usize]) -> Option<Split> {
        self.features.shuffle(&mut self.rng);
        let mut best: Option<Split> = None;
        for k in 0..self.features.len() {
            if k >= self.params.max_features && best.is_some() {
                break;
            }
            let f = self.features[k];
            if let Some(s) = self.best_split_on(idx, f) {
                if best.as_ref().is_none_or(|b| s.score < b.score) {
                    best = Some(s);
                }
            }
        }
        best
    }

    fn best_split_on(&mut self, idx: &[usize], f: usize) -> Option<Split> {
        let min_leaf = self.params.min_leaf;
        self.scratch.clear();
        self.scratch
            .extend(idx.iter().map(|&i| (self.x[i][f], self.y[i])));
        self.scratch
            .sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let n = self.scratch.len();
        let total_pos = self.scratch.iter().filter(|s| s.1).count() as f64;
        let mut left_pos = 0.0;
        let mut best: Option<Split> = None;
        for k in 0..n - 1 {
            if self.scratch[k].1 {
                left_pos += 1.0;
            }
            let (a, b) = (self.scratch[k].0, self.scratch[k + 1].0);
            let nl = k + 1;
            if a == b || nl < min_leaf || n - nl < min_leaf {
                continue;
            }
            let nl_f = nl as f64;
            let nr_f = (n - nl) as f64;
            let right_pos = total_pos - left_pos;
            // n·gini = n − (p² + q²)/n, summed over both children.
            let score = (nl_f - (left_pos * left_pos + (nl_f - left_pos).powi(2)) / nl_f)
                + (nr_f - (right_pos * right_pos + (nr_f - right_pos).powi(2)) / nr_f);
            if best.as_ref().is_none_or(|s| score < s.score) {
                let mid = a + (b - a) / 2.0;
                let threshold = if mid < b { mid } else { a };
                best = Some(Split {
                    feature: f,
                    threshold,
                    score,
                });
            }
        }
        best
    }
}
