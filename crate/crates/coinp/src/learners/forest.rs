//! Random forest regression: bagged CART trees with variance-reduction
//! splits and per-split feature subsampling. Prediction is the mean over
//! trees. Every tree derives its own RNG stream from the fit seed, so a
//! forest is reproducible regardless of how the trees are scheduled.

use rand::Rng;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::learners::{Learner, Predictor};
use crate::seed;

#[derive(Clone, Debug, PartialEq)]
pub struct ForestParams {
    /// Number of trees in the ensemble.
    pub n_trees: usize,
    /// Fraction of features considered at each split, in (0, 1].
    pub max_features: f64,
    /// Minimum number of samples in a leaf.
    pub min_samples_leaf: usize,
    /// Maximum tree depth; `None` grows until leaves are pure or too small.
    pub max_depth: Option<usize>,
    /// Fit each tree on a bootstrap resample instead of the full sample.
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 300,
            max_features: 1.0,
            min_samples_leaf: 1,
            max_depth: None,
            bootstrap: true,
        }
    }
}

impl ForestParams {
    fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::invalid("n_trees must be at least 1"));
        }
        if !(self.max_features > 0.0 && self.max_features <= 1.0) {
            return Err(Error::invalid(format!(
                "max_features must be in (0, 1], got {}",
                self.max_features
            )));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::invalid("min_samples_leaf must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug)]
enum Node {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Clone, Debug)]
struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn predict(&self, row: &[f64]) -> f64 {
        let mut at = 0usize;
        loop {
            match self.nodes[at] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if row[feature] <= threshold { left } else { right };
                }
            }
        }
    }
}

pub struct ForestModel {
    trees: Vec<Tree>,
}

impl ForestModel {
    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    /// Prediction of a single tree, exposed so the mean-of-trees contract
    /// can be checked directly.
    pub fn tree_prediction(&self, tree: usize, row: &[f64]) -> f64 {
        self.trees[tree].predict(row)
    }
}

impl Predictor for ForestModel {
    fn predict(&self, row: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict(row)).sum::<f64>() / self.trees.len() as f64
    }
}

#[derive(Clone, Debug, Default)]
pub struct RandomForest {
    pub params: ForestParams,
}

impl Learner for RandomForest {
    fn name(&self) -> &str {
        "random_forest"
    }

    fn fit(&self, train: &Dataset, seed: u64) -> Result<Box<dyn Predictor>> {
        Ok(Box::new(fit_random_forest(train, &self.params, seed)?))
    }
}

pub fn fit_random_forest(train: &Dataset, params: &ForestParams, fit_seed: u64) -> Result<ForestModel> {
    params.validate()?;
    if train.n_rows() < 2 {
        return Err(Error::Fit {
            context: "random_forest".into(),
            message: format!("need at least 2 training rows, got {}", train.n_rows()),
        });
    }
    let trees = (0..params.n_trees)
        .map(|t| {
            let mut rng = seed::rng(seed::derive(fit_seed, &[seed::tag("tree"), t as u64]));
            let samples: Vec<usize> = if params.bootstrap {
                (0..train.n_rows())
                    .map(|_| rng.random_range(0..train.n_rows()))
                    .collect()
            } else {
                (0..train.n_rows()).collect()
            };
            grow_tree(train, params, samples, &mut rng)
        })
        .collect();
    Ok(ForestModel { trees })
}

struct WorkItem {
    samples: Vec<usize>,
    depth: usize,
    /// Index of the placeholder node to overwrite once resolved.
    slot: usize,
}

fn grow_tree(
    train: &Dataset,
    params: &ForestParams,
    samples: Vec<usize>,
    rng: &mut impl Rng,
) -> Tree {
    let mut nodes = vec![Node::Leaf { value: 0.0 }];
    let mut stack = vec![WorkItem {
        samples,
        depth: 0,
        slot: 0,
    }];
    while let Some(item) = stack.pop() {
        let ys: Vec<f64> = item.samples.iter().map(|&i| train.label(i)).collect();
        let mean = ys.iter().sum::<f64>() / ys.len() as f64;
        let depth_ok = params.max_depth.is_none_or(|d| item.depth < d);
        let big_enough = item.samples.len() >= 2 * params.min_samples_leaf && item.samples.len() >= 2;
        let split = if depth_ok && big_enough && !all_equal(&ys) {
            best_split(train, params, &item.samples, rng)
        } else {
            None
        };
        match split {
            None => nodes[item.slot] = Node::Leaf { value: mean },
            Some((feature, threshold)) => {
                let (left_samples, right_samples): (Vec<usize>, Vec<usize>) = item
                    .samples
                    .iter()
                    .partition(|&&i| train.row(i)[feature] <= threshold);
                let left = nodes.len();
                nodes.push(Node::Leaf { value: 0.0 });
                let right = nodes.len();
                nodes.push(Node::Leaf { value: 0.0 });
                nodes[item.slot] = Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                };
                stack.push(WorkItem {
                    samples: left_samples,
                    depth: item.depth + 1,
                    slot: left,
                });
                stack.push(WorkItem {
                    samples: right_samples,
                    depth: item.depth + 1,
                    slot: right,
                });
            }
        }
    }
    Tree { nodes }
}

fn all_equal(ys: &[f64]) -> bool {
    ys.windows(2).all(|w| w[0] == w[1])
}

/// Picks the (feature, threshold) minimising the summed within-child
/// variance over a random feature subset. Returns `None` when no candidate
/// feature admits a split that respects `min_samples_leaf`.
fn best_split(
    train: &Dataset,
    params: &ForestParams,
    samples: &[usize],
    rng: &mut impl Rng,
) -> Option<(usize, f64)> {
    let p = train.n_features();
    let k = ((params.max_features * p as f64).round() as usize).clamp(1, p);
    let mut features: Vec<usize> = (0..p).collect();
    // partial Fisher-Yates: the first k entries are the candidate features
    for i in 0..k {
        let j = rng.random_range(i..p);
        features.swap(i, j);
    }

    let n = samples.len() as f64;
    let total_sum: f64 = samples.iter().map(|&i| train.label(i)).sum();
    let mut best: Option<(usize, f64, f64)> = None; // (feature, threshold, score)
    let mut order: Vec<usize> = samples.to_vec();
    for &feature in &features[..k] {
        order.sort_by(|&a, &b| train.row(a)[feature].total_cmp(&train.row(b)[feature]));
        let mut left_sum = 0.0;
        for cut in 1..order.len() {
            left_sum += train.label(order[cut - 1]);
            if cut < params.min_samples_leaf || order.len() - cut < params.min_samples_leaf {
                continue;
            }
            let lo = train.row(order[cut - 1])[feature];
            let hi = train.row(order[cut])[feature];
            if lo == hi {
                continue;
            }
            // maximising sum_l^2/n_l + sum_r^2/n_r minimises the summed
            // within-child squared error
            let right_sum = total_sum - left_sum;
            let nl = cut as f64;
            let nr = n - nl;
            let score = left_sum * left_sum / nl + right_sum * right_sum / nr;
            if best.is_none_or(|(_, _, s)| score > s) {
                best = Some((feature, 0.5 * (lo + hi), score));
            }
        }
    }
    best.map(|(feature, threshold, _)| (feature, threshold))
}
