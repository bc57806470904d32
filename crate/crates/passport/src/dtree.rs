//! CART-style decision tree: Gini impurity splits, Gini feature
//! importance, versioned serialization, and k-fold cross-validation.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeParams {
    /// `None` grows the tree until nodes are pure or unsplittable.
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: None,
            min_samples_split: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        n_samples: u32,
        impurity: f64,
    },
    Leaf {
        /// (class code, count), sorted by class code.
        histogram: Vec<(u32, u32)>,
        n_samples: u32,
        impurity: f64,
    },
}

/// A fitted tree. Rows route left when `row[feature] <= threshold`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    version: u32,
    width: usize,
    nodes: Vec<Node>,
}

pub const TREE_FORMAT_VERSION: u32 = 1;

/// Gini impurity of a label multiset: 1 - sum of squared class fractions.
pub fn gini(labels: &[u32]) -> Result<f64> {
    if labels.is_empty() {
        return Err(Error::EmptySet);
    }
    let mut counts: std::collections::BTreeMap<u32, u64> = std::collections::BTreeMap::new();
    for &l in labels {
        *counts.entry(l).or_insert(0) += 1;
    }
    let n = labels.len() as f64;
    let sumsq: f64 = counts.values().map(|&c| (c as f64) * (c as f64)).sum();
    Ok(1.0 - sumsq / (n * n))
}

struct FitContext<'a> {
    rows: &'a [Vec<f64>],
    params: &'a TreeParams,
    width: usize,
    n_classes: usize,
    /// dense class index per row, ordered by ascending class code
    dense: Vec<u32>,
    classes: Vec<u32>,
}

struct SplitChoice {
    feature: usize,
    threshold: f64,
    left: Vec<u32>,
    right: Vec<u32>,
}

impl DecisionTree {
    /// Greedy CART fit: at every impure, splittable node take the
    /// best-Gini-gain (feature, threshold) over all features and all
    /// midpoints between consecutive distinct values. Ties break toward
    /// the lowest feature index, then the lowest threshold. Recursion
    /// stops at pure nodes, `min_samples_split`, `max_depth`, or when all
    /// features are constant.
    pub fn fit(rows: &[Vec<f64>], labels: &[u32], params: &TreeParams) -> Result<DecisionTree> {
        if rows.is_empty() || labels.is_empty() {
            return Err(Error::EmptyTrainingSet);
        }
        if rows.len() != labels.len() {
            return Err(Error::Invalid(format!(
                "{} rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        let width = rows[0].len();
        for row in rows {
            if row.len() != width {
                return Err(Error::WidthMismatch {
                    expected: width,
                    got: row.len(),
                });
            }
        }

        let mut classes: Vec<u32> = labels.to_vec();
        classes.sort_unstable();
        classes.dedup();
        let dense: Vec<u32> = labels
            .iter()
            .map(|l| classes.binary_search(l).unwrap() as u32)
            .collect();

        let ctx = FitContext {
            rows,
            params,
            width,
            n_classes: classes.len(),
            dense,
            classes,
        };

        let mut nodes: Vec<Node> = Vec::new();
        let root_indices: Vec<u32> = (0..rows.len() as u32).collect();
        nodes.push(Node::Leaf {
            histogram: Vec::new(),
            n_samples: 0,
            impurity: 0.0,
        });
        let mut stack: Vec<(usize, Vec<u32>, usize)> = vec![(0, root_indices, 0)];

        while let Some((slot, indices, depth)) = stack.pop() {
            let n = indices.len() as u32;
            let impurity = node_impurity(&ctx, &indices);
            let depth_capped = ctx.params.max_depth.is_some_and(|d| depth >= d);
            let too_small = (indices.len()) < ctx.params.min_samples_split;

            let choice = if impurity <= 0.0 || depth_capped || too_small {
                None
            } else {
                best_split(&ctx, &indices)
            };

            match choice {
                Some(split) => {
                    let left_slot = nodes.len();
                    nodes.push(Node::Leaf {
                        histogram: Vec::new(),
                        n_samples: 0,
                        impurity: 0.0,
                    });
                    let right_slot = nodes.len();
                    nodes.push(Node::Leaf {
                        histogram: Vec::new(),
                        n_samples: 0,
                        impurity: 0.0,
                    });
                    nodes[slot] = Node::Split {
                        feature: split.feature,
                        threshold: split.threshold,
                        left: left_slot,
                        right: right_slot,
                        n_samples: n,
                        impurity,
                    };
                    stack.push((left_slot, split.left, depth + 1));
                    stack.push((right_slot, split.right, depth + 1));
                }
                None => {
                    nodes[slot] = Node::Leaf {
                        histogram: histogram(&ctx, &indices),
                        n_samples: n,
                        impurity,
                    };
                }
            }
        }

        Ok(DecisionTree {
            version: TREE_FORMAT_VERSION,
            width,
            nodes,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    /// Class with the maximum count in the reached leaf; ties break to the
    /// smallest class code.
    pub fn predict(&self, row: &[f64]) -> Result<u32> {
        if row.len() != self.width {
            return Err(Error::WidthMismatch {
                expected: self.width,
                got: row.len(),
            });
        }
        let mut at = 0usize;
        loop {
            match &self.nodes[at] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    at = if row[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    };
                }
                Node::Leaf { histogram, .. } => {
                    let mut best: Option<(u32, u32)> = None;
                    for &(class, count) in histogram {
                        // histogram is sorted by class code, so a strict
                        // comparison keeps the smallest code on ties
                        if best.is_none_or(|(_, c)| count > c) {
                            best = Some((class, count));
                        }
                    }
                    return best.map(|(class, _)| class).ok_or(Error::UnfittedTree);
                }
            }
        }
    }

    /// Per-feature Gini importance: the sum of sample-weighted impurity
    /// decreases at every split on that feature, normalized to 1. A tree
    /// with no splits reports all zeros and is flagged.
    pub fn importance(&self) -> Result<ImportanceReport> {
        if self.nodes.is_empty() {
            return Err(Error::UnfittedTree);
        }
        let root_n = match &self.nodes[0] {
            Node::Split { n_samples, .. } | Node::Leaf { n_samples, .. } => *n_samples as f64,
        };
        let mut raw = vec![0.0f64; self.width];
        let mut any_split = false;
        for node in &self.nodes {
            if let Node::Split {
                feature,
                left,
                right,
                n_samples,
                impurity,
                ..
            } = node
            {
                any_split = true;
                let (nl, il) = node_stats(&self.nodes[*left]);
                let (nr, ir) = node_stats(&self.nodes[*right]);
                let n = *n_samples as f64;
                let weighted_child = (nl * il + nr * ir) / n;
                raw[*feature] += (n / root_n) * (impurity - weighted_child);
            }
        }
        if any_split {
            let total: f64 = raw.iter().sum();
            if total > 0.0 {
                for v in &mut raw {
                    *v /= total;
                }
            }
        }
        Ok(ImportanceReport {
            importances: raw,
            has_splits: any_split,
        })
    }

    /// Versioned self-describing JSON document. Parsing it back yields a
    /// tree with bit-exact predictions.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("tree serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<DecisionTree> {
        let tree: DecisionTree = serde_json::from_str(text)?;
        if tree.version != TREE_FORMAT_VERSION {
            return Err(Error::Invalid(format!(
                "unsupported tree format version {}",
                tree.version
            )));
        }
        Ok(tree)
    }
}

fn node_stats(node: &Node) -> (f64, f64) {
    match node {
        Node::Split {
            n_samples,
            impurity,
            ..
        }
        | Node::Leaf {
            n_samples,
            impurity,
            ..
        } => (*n_samples as f64, *impurity),
    }
}

fn node_impurity(ctx: &FitContext<'_>, indices: &[u32]) -> f64 {
    let mut counts = vec![0u64; ctx.n_classes];
    for &i in indices {
        counts[ctx.dense[i as usize] as usize] += 1;
    }
    let n = indices.len() as f64;
    let sumsq: f64 = counts.iter().map(|&c| (c as f64) * (c as f64)).sum();
    1.0 - sumsq / (n * n)
}

fn histogram(ctx: &FitContext<'_>, indices: &[u32]) -> Vec<(u32, u32)> {
    let mut counts = vec![0u32; ctx.n_classes];
    for &i in indices {
        counts[ctx.dense[i as usize] as usize] += 1;
    }
    counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(k, &c)| (ctx.classes[k], c))
        .collect()
}

fn best_split(ctx: &FitContext<'_>, indices: &[u32]) -> Option<SplitChoice> {
    let n = indices.len();
    let nf = n as f64;
    let parent_impurity = node_impurity(ctx, indices);

    let mut best: Option<(f64, usize, f64)> = None; // (gain, feature, threshold)
    let mut sorted: Vec<(f64, u32)> = Vec::with_capacity(n);

    for feature in 0..ctx.width {
        sorted.clear();
        sorted.extend(
            indices
                .iter()
                .map(|&i| (ctx.rows[i as usize][feature], ctx.dense[i as usize])),
        );
        sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
        if sorted[0].0 == sorted[n - 1].0 {
            continue; // constant feature
        }

        let mut left_counts = vec![0u64; ctx.n_classes];
        let mut right_counts = vec![0u64; ctx.n_classes];
        for &(_, class) in sorted.iter() {
            right_counts[class as usize] += 1;
        }
        let mut left_sumsq = 0.0f64;
        let mut right_sumsq: f64 = right_counts.iter().map(|&c| (c as f64) * (c as f64)).sum();

        for i in 0..n - 1 {
            let class = sorted[i].1 as usize;
            // move sample i from right to left
            left_sumsq += 2.0 * left_counts[class] as f64 + 1.0;
            right_sumsq -= 2.0 * right_counts[class] as f64 - 1.0;
            left_counts[class] += 1;
            right_counts[class] -= 1;

            let (a, b) = (sorted[i].0, sorted[i + 1].0);
            if a == b {
                continue;
            }
            let nl = (i + 1) as f64;
            let nr = (n - i - 1) as f64;
            let gini_left = 1.0 - left_sumsq / (nl * nl);
            let gini_right = 1.0 - right_sumsq / (nr * nr);
            let gain = parent_impurity - (nl * gini_left + nr * gini_right) / nf;

            if best.is_none_or(|(g, _, _)| gain > g) {
                // midpoint; fall back to the left value when rounding
                // collapses the midpoint onto the right value
                let mut threshold = a + (b - a) / 2.0;
                if !(threshold > a && threshold < b) {
                    threshold = a;
                }
                best = Some((gain, feature, threshold));
            }
        }
    }

    best.map(|(_, feature, threshold)| {
        let mut left = Vec::new();
        let mut right = Vec::new();
        for &i in indices {
            if ctx.rows[i as usize][feature] <= threshold {
                left.push(i);
            } else {
                right.push(i);
            }
        }
        debug_assert!(!left.is_empty() && !right.is_empty());
        SplitChoice {
            feature,
            threshold,
            left,
            right,
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub importances: Vec<f64>,
    /// False for depth-0 trees, whose report is all zeros.
    pub has_splits: bool,
}

impl ImportanceReport {
    pub fn sum(&self) -> f64 {
        self.importances.iter().sum()
    }
}

/// Anything that maps an encoded row to a country class code.
pub trait CountryClassifier {
    fn predict_code(&self, row: &[f64]) -> Result<u32>;
}

impl CountryClassifier for DecisionTree {
    fn predict_code(&self, row: &[f64]) -> Result<u32> {
        self.predict(row)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossValidation {
    pub fold_accuracies: Vec<f64>,
    pub mean: f64,
    pub stddev: f64,
}

/// k-fold cross-validation: shuffle by seed, split into k near-equal
/// folds, train on k-1 and test on the held-out fold. Reports mean and
/// population standard deviation over fold accuracies.
pub fn cross_validate(
    rows: &[Vec<f64>],
    labels: &[u32],
    k: usize,
    seed: u64,
    params: &TreeParams,
) -> Result<CrossValidation> {
    let n = rows.len();
    if k < 2 || k > n {
        return Err(Error::TooFewSamples {
            need: k.max(2),
            got: n,
        });
    }

    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);

    let mut fold_accuracies = Vec::with_capacity(k);
    for fold in 0..k {
        let test_set: Vec<usize> = order
            .iter()
            .copied()
            .skip(fold)
            .step_by(k)
            .collect();
        let in_test: std::collections::HashSet<usize> = test_set.iter().copied().collect();
        let train_rows: Vec<Vec<f64>> = order
            .iter()
            .filter(|i| !in_test.contains(i))
            .map(|&i| rows[i].clone())
            .collect();
        let train_labels: Vec<u32> = order
            .iter()
            .filter(|i| !in_test.contains(i))
            .map(|&i| labels[i])
            .collect();

        let tree = DecisionTree::fit(&train_rows, &train_labels, params)?;
        let correct = test_set
            .iter()
            .filter(|&&i| tree.predict(&rows[i]).ok() == Some(labels[i]))
            .count();
        fold_accuracies.push(correct as f64 / test_set.len() as f64);
    }

    let mean = fold_accuracies.iter().sum::<f64>() / k as f64;
    let variance =
        fold_accuracies.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / k as f64;
    Ok(CrossValidation {
        fold_accuracies,
        mean,
        stddev: variance.sqrt(),
    })
}

/// Fraction of rows whose prediction matches the label.
pub fn accuracy(tree: &DecisionTree, rows: &[Vec<f64>], labels: &[u32]) -> f64 {
    if rows.is_empty() {
        return 0.0;
    }
    let correct = rows
        .iter()
        .zip(labels)
        .filter(|(row, &label)| tree.predict(row).ok() == Some(label))
        .count();
    correct as f64 / rows.len() as f64
}
