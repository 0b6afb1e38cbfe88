//! Gradient-boosted regression trees with logistic loss.
//!
//! Each round fits a tree to the residual `y - σ(margin)` using exact
//! greedy variance-reduction splits over the feature columns, then sets
//! leaf values with a single Newton step and adds the shrunk tree to the
//! additive margin. Prediction is `σ(base_score + ν · Σ tree(x))`.

use std::io::{Read, Write};

use crate::binio::*;
use crate::error::{Error, Result};
use crate::math::{sigmoid, softplus};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        /// Index of the `x[feature] < threshold` child.
        left: u32,
        /// Index of the `x[feature] >= threshold` child.
        right: u32,
    },
    Leaf {
        value: f64,
    },
}

/// A binary regression tree stored as a node array rooted at 0.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct RegressionTree {
    pub nodes: Vec<TreeNode>,
}

impl RegressionTree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0usize;
        loop {
            match self.nodes[i] {
                TreeNode::Leaf { value } => return value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if x[feature] < threshold {
                        left as usize
                    } else {
                        right as usize
                    };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], i: usize) -> usize {
            match nodes[i] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => {
                    1 + walk(nodes, left as usize).max(walk(nodes, right as usize))
                }
            }
        }
        walk(&self.nodes, 0)
    }
}

/// Ordered trees plus shrinkage and the prior log-odds.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Forest {
    pub trees: Vec<RegressionTree>,
    pub shrinkage: f64,
    pub base_score: f64,
}

impl Forest {
    /// Additive margin before the sigmoid.
    pub fn margin(&self, x: &[f64]) -> f64 {
        self.base_score + self.shrinkage * self.trees.iter().map(|t| t.predict(x)).sum::<f64>()
    }

    /// Predicted probability in (0, 1).
    pub fn predict(&self, x: &[f64]) -> f64 {
        sigmoid(self.margin(x))
    }

    /// Highest feature index any split touches, plus one.
    pub fn num_features_hint(&self) -> Option<usize> {
        self.trees
            .iter()
            .flat_map(|t| &t.nodes)
            .filter_map(|n| match n {
                TreeNode::Split { feature, .. } => Some(feature + 1),
                TreeNode::Leaf { .. } => None,
            })
            .max()
    }
}

#[derive(Clone, Debug)]
pub struct MartConfig {
    pub num_trees: usize,
    pub max_depth: usize,
    pub shrinkage: f64,
    pub min_leaf: usize,
    pub verbose: bool,
}

impl Default for MartConfig {
    fn default() -> Self {
        MartConfig {
            num_trees: 200,
            max_depth: 4,
            shrinkage: 0.1,
            min_leaf: 20,
            verbose: false,
        }
    }
}

/// A chosen split: gain is the variance-reduction score
/// `S_L²/n_L + S_R²/n_R - S²/n` over residual sums.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitChoice {
    pub feature: usize,
    pub threshold: f64,
    pub gain: f64,
}

/// Exact greedy split search over the given rows. Ties keep the first
/// candidate in (feature asc, threshold asc) order; splits leaving a side
/// below `min_leaf` or with non-positive gain are refused.
pub fn best_split(
    features: &[Vec<f64>],
    residuals: &[f64],
    rows: &[u32],
    min_leaf: usize,
) -> Option<SplitChoice> {
    let n = rows.len();
    if n < 2 * min_leaf.max(1) {
        return None;
    }
    let total: f64 = rows.iter().map(|&r| residuals[r as usize]).sum();
    let parent_score = total * total / n as f64;
    let mut best: Option<SplitChoice> = None;

    let mut order: Vec<u32> = rows.to_vec();
    for (f, column) in features.iter().enumerate() {
        order.copy_from_slice(rows);
        order.sort_by(|&a, &b| {
            column[a as usize]
                .partial_cmp(&column[b as usize])
                .unwrap()
                .then(a.cmp(&b))
        });
        let mut left_sum = 0.0;
        for i in 0..n - 1 {
            left_sum += residuals[order[i] as usize];
            let v = column[order[i] as usize];
            let v_next = column[order[i + 1] as usize];
            if v == v_next {
                continue;
            }
            let n_left = i + 1;
            let n_right = n - n_left;
            if n_left < min_leaf || n_right < min_leaf {
                continue;
            }
            let right_sum = total - left_sum;
            let gain = left_sum * left_sum / n_left as f64
                + right_sum * right_sum / n_right as f64
                - parent_score;
            if gain > 0.0 && best.is_none_or(|b| gain > b.gain) {
                best = Some(SplitChoice {
                    feature: f,
                    threshold: 0.5 * (v + v_next),
                    gain,
                });
            }
        }
    }
    best
}

struct TreeBuilder<'a> {
    features: &'a [Vec<f64>],
    residuals: &'a [f64],
    hessians: &'a [f64],
    cfg: &'a MartConfig,
}

impl TreeBuilder<'_> {
    fn build(&self, rows: Vec<u32>) -> RegressionTree {
        let mut tree = RegressionTree::default();
        self.grow(&mut tree, rows, 0);
        tree
    }

    fn leaf_value(&self, rows: &[u32]) -> f64 {
        // Newton step for logistic loss: Σ residual / Σ p(1-p)
        let num: f64 = rows.iter().map(|&r| self.residuals[r as usize]).sum();
        let den: f64 = rows.iter().map(|&r| self.hessians[r as usize]).sum();
        num / den.max(1e-12)
    }

    fn grow(&self, tree: &mut RegressionTree, rows: Vec<u32>, depth: usize) -> u32 {
        let index = tree.nodes.len() as u32;
        if depth >= self.cfg.max_depth {
            tree.nodes.push(TreeNode::Leaf {
                value: self.leaf_value(&rows),
            });
            return index;
        }
        let Some(split) = best_split(self.features, self.residuals, &rows, self.cfg.min_leaf)
        else {
            tree.nodes.push(TreeNode::Leaf {
                value: self.leaf_value(&rows),
            });
            return index;
        };
        let (left_rows, right_rows): (Vec<u32>, Vec<u32>) = rows
            .iter()
            .partition(|&&r| self.features[split.feature][r as usize] < split.threshold);
        tree.nodes.push(TreeNode::Split {
            feature: split.feature,
            threshold: split.threshold,
            left: 0,
            right: 0,
        });
        let left = self.grow(tree, left_rows, depth + 1);
        let right = self.grow(tree, right_rows, depth + 1);
        match &mut tree.nodes[index as usize] {
            TreeNode::Split {
                left: l, right: r, ..
            } => {
                *l = left;
                *r = right;
            }
            TreeNode::Leaf { .. } => unreachable!(),
        }
        index
    }
}

pub struct MartOutcome {
    pub forest: Forest,
    /// Training logistic loss before any tree and after each added tree.
    pub loss_curve: Vec<f64>,
}

/// Summed logistic loss of margins against binary labels.
pub fn logistic_loss(margins: &[f64], labels: &[u8]) -> f64 {
    margins
        .iter()
        .zip(labels)
        .map(|(&m, &y)| softplus(m) - f64::from(y) * m)
        .sum()
}

/// Fits a boosted forest on column-major features. `features[f][r]` is
/// feature f of row r; labels are 0/1.
pub fn train_mart(features: &[Vec<f64>], labels: &[u8], cfg: &MartConfig) -> Result<MartOutcome> {
    if cfg.num_trees == 0 {
        return Err(Error::InvalidConfig("num_trees must be >= 1".into()));
    }
    if !(cfg.shrinkage > 0.0 && cfg.shrinkage <= 1.0) {
        return Err(Error::InvalidConfig("shrinkage must be in (0, 1]".into()));
    }
    let n = labels.len();
    if n == 0 || features.is_empty() {
        return Err(Error::EmptyInput("mart training set is empty".into()));
    }
    for column in features {
        if column.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: column.len(),
            });
        }
        if column.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("mart feature column"));
        }
    }
    let positives = labels.iter().filter(|&&y| y == 1).count();
    if positives == 0 || positives == n {
        return Err(Error::SingleClass {
            context: "mart training labels".into(),
        });
    }

    let p = positives as f64 / n as f64;
    let base_score = (p / (1.0 - p)).ln();
    let mut forest = Forest {
        trees: Vec::with_capacity(cfg.num_trees),
        shrinkage: cfg.shrinkage,
        base_score,
    };

    let mut margins = vec![base_score; n];
    let mut residuals = vec![0.0; n];
    let mut hessians = vec![0.0; n];
    let mut loss_curve = Vec::with_capacity(cfg.num_trees + 1);
    loss_curve.push(logistic_loss(&margins, labels));

    let all_rows: Vec<u32> = (0..n as u32).collect();
    let mut x = vec![0.0; features.len()];
    for t in 0..cfg.num_trees {
        for i in 0..n {
            let prob = sigmoid(margins[i]);
            residuals[i] = f64::from(labels[i]) - prob;
            hessians[i] = prob * (1.0 - prob);
        }
        let builder = TreeBuilder {
            features,
            residuals: &residuals,
            hessians: &hessians,
            cfg,
        };
        let tree = builder.build(all_rows.clone());
        for i in 0..n {
            for (xf, column) in x.iter_mut().zip(features) {
                *xf = column[i];
            }
            margins[i] += cfg.shrinkage * tree.predict(&x);
        }
        forest.trees.push(tree);
        let loss = logistic_loss(&margins, labels);
        if cfg.verbose && (t + 1) % 50 == 0 {
            println!("[train-mart] trees={} train_loss={loss:.6}", t + 1);
        }
        loss_curve.push(loss);
    }
    Ok(MartOutcome { forest, loss_curve })
}

const MAGIC: &[u8; 4] = b"NDPM";
const VERSION: u32 = 1;

impl Forest {
    pub fn write<W: Write>(&self, w: &mut W) -> Result<()> {
        write_header(w, MAGIC, VERSION)?;
        write_f64(w, self.base_score)?;
        write_f64(w, self.shrinkage)?;
        write_u32(w, self.trees.len() as u32)?;
        for tree in &self.trees {
            write_u32(w, tree.nodes.len() as u32)?;
            for node in &tree.nodes {
                match *node {
                    TreeNode::Leaf { value } => {
                        write_u8(w, 0)?;
                        write_f64(w, value)?;
                    }
                    TreeNode::Split {
                        feature,
                        threshold,
                        left,
                        right,
                    } => {
                        write_u8(w, 1)?;
                        write_u32(w, feature as u32)?;
                        write_f64(w, threshold)?;
                        write_u32(w, left)?;
                        write_u32(w, right)?;
                    }
                }
            }
        }
        Ok(())
    }

    pub fn read<R: Read>(r: &mut R, path: &str) -> Result<Forest> {
        expect_header(r, MAGIC, VERSION, path)?;
        let base_score = read_f64(r)?;
        let shrinkage = read_f64(r)?;
        let num_trees = read_u32(r)? as usize;
        let mut trees = Vec::with_capacity(num_trees);
        for _ in 0..num_trees {
            let num_nodes = read_u32(r)? as usize;
            let mut nodes = Vec::with_capacity(num_nodes);
            for _ in 0..num_nodes {
                match read_u8(r)? {
                    0 => nodes.push(TreeNode::Leaf {
                        value: read_f64(r)?,
                    }),
                    1 => nodes.push(TreeNode::Split {
                        feature: read_u32(r)? as usize,
                        threshold: read_f64(r)?,
                        left: read_u32(r)?,
                        right: read_u32(r)?,
                    }),
                    tag => {
                        return Err(Error::Format {
                            path: path.to_string(),
                            reason: format!("unknown tree node tag {tag}"),
                        })
                    }
                }
            }
            trees.push(RegressionTree { nodes });
        }
        Ok(Forest {
            trees,
            shrinkage,
            base_score,
        })
    }
}
