//! CART-style classification tree over categorical contexts.
//!
//! Splits are binary and one-vs-rest: the left child receives examples whose
//! feature equals the split category, the right child everything else
//! (including categories never seen in training). Nodes are scored with the
//! Gini index and the split maximizing the Gini improvement wins.

use alloc::boxed::Box;
use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;

use crate::domain::{BehaviorClass, ClassCounts, ContextVector, LabeledExample};
use crate::error::{Error, Result};

/// Gains closer than this are treated as equal, so the earlier candidate
/// (lower feature index, then smaller category) keeps the node.
const GAIN_TIE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeConfig {
    /// `None` grows until purity or until no split helps.
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub min_gain: f64,
    /// Features sampled per node; `None` considers all of them.
    pub feature_subset_size: Option<usize>,
}

impl Default for TreeConfig {
    fn default() -> Self {
        Self {
            max_depth: None,
            min_samples_leaf: 1,
            min_gain: 1e-12,
            feature_subset_size: None,
        }
    }
}

impl TreeConfig {
    pub fn validate(&self, n_features: usize) -> Result<()> {
        if self.min_samples_leaf == 0 {
            return Err(Error::InvalidConfig("min_samples_leaf must be at least 1".into()));
        }
        if !self.min_gain.is_finite() {
            return Err(Error::InvalidConfig("min_gain must be finite".into()));
        }
        if let Some(d) = self.feature_subset_size {
            if d == 0 || d > n_features {
                return Err(Error::InvalidConfig(format!(
                    "feature subset size {d} outside 1..={n_features}"
                )));
            }
        }
        Ok(())
    }
}

/// `1 - sum p_i^2`; an empty node has impurity 0.
pub fn gini_index(class_counts: &[u32]) -> f64 {
    let total: u64 = class_counts.iter().map(|&c| u64::from(c)).sum();
    if total == 0 {
        return 0.0;
    }
    let t = total as f64;
    1.0 - class_counts
        .iter()
        .map(|&c| {
            let p = f64::from(c) / t;
            p * p
        })
        .sum::<f64>()
}

/// Gini improvement of splitting `parent` into `left` and `right`:
/// `I(parent) - p_l I(left) - p_r I(right)`.
pub fn gini_gain(parent: &[u32], left: &[u32], right: &[u32]) -> Result<f64> {
    if parent.len() != left.len() || parent.len() != right.len() {
        return Err(Error::InvalidPartition("class count lengths differ".into()));
    }
    for (i, ((&p, &l), &r)) in parent.iter().zip(left).zip(right).enumerate() {
        if u64::from(l) + u64::from(r) != u64::from(p) {
            return Err(Error::InvalidPartition(format!(
                "class {i}: {l} + {r} != {p}"
            )));
        }
    }
    let n_p: u64 = parent.iter().map(|&c| u64::from(c)).sum();
    if n_p == 0 {
        return Err(Error::InvalidPartition("parent node is empty".into()));
    }
    let n_l: u64 = left.iter().map(|&c| u64::from(c)).sum();
    Ok(gain_unchecked(parent, left, right, n_p, n_l))
}

fn gain_unchecked(parent: &[u32], left: &[u32], right: &[u32], n_p: u64, n_l: u64) -> f64 {
    let p_l = n_l as f64 / n_p as f64;
    let p_r = (n_p - n_l) as f64 / n_p as f64;
    gini_index(parent) - p_l * gini_index(left) - p_r * gini_index(right)
}

/// A binary split: left is `feature == category`, right is `!=`.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitCandidate {
    pub feature_index: usize,
    pub category: String,
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode {
    Split {
        feature_index: usize,
        category: String,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        class: BehaviorClass,
        class_counts: ClassCounts,
    },
}

impl TreeNode {
    pub fn leaf(class_counts: ClassCounts) -> Self {
        TreeNode::Leaf {
            class: class_counts.majority(),
            class_counts,
        }
    }

    pub fn predict(&self, context: &ContextVector) -> BehaviorClass {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { class, .. } => return *class,
                TreeNode::Split {
                    feature_index,
                    category,
                    left,
                    right,
                } => {
                    node = if context.get(*feature_index) == Some(category.as_str()) {
                        left
                    } else {
                        right
                    };
                }
            }
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, TreeNode::Leaf { .. })
    }

    pub fn n_nodes(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Split { left, right, .. } => 1 + left.n_nodes() + right.n_nodes(),
        }
    }

    pub fn n_leaves(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Split { left, right, .. } => left.n_leaves() + right.n_leaves(),
        }
    }

    /// Edges on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    /// Sum of the leaf counts below this node.
    pub fn class_counts(&self) -> ClassCounts {
        match self {
            TreeNode::Leaf { class_counts, .. } => *class_counts,
            TreeNode::Split { left, right, .. } => {
                let mut c = left.class_counts();
                c += right.class_counts();
                c
            }
        }
    }
}

pub fn predict_tree(tree: &TreeNode, context: &ContextVector) -> BehaviorClass {
    tree.predict(context)
}

/// Examples encoded as per-feature category codes. Codes index a sorted
/// vocabulary, so code order is lexicographic category order.
#[derive(Debug, Clone)]
pub struct CategoricalTable {
    n_features: usize,
    codes: Vec<u32>,
    labels: Vec<BehaviorClass>,
    vocab: Vec<Vec<String>>,
}

impl CategoricalTable {
    pub fn from_examples(examples: &[LabeledExample]) -> Result<Self> {
        let first = examples
            .first()
            .ok_or_else(|| Error::InvalidInput("no examples".into()))?;
        let d = first.context.len();
        let mut sets: Vec<BTreeSet<&str>> = (0..d).map(|_| BTreeSet::new()).collect();
        for (row, e) in examples.iter().enumerate() {
            if e.context.len() != d {
                return Err(Error::InvalidInput(format!(
                    "example {row} has {} fields, expected {d}",
                    e.context.len()
                )));
            }
            for (set, v) in sets.iter_mut().zip(e.context.values()) {
                set.insert(v.as_str());
            }
        }
        let vocab = sets
            .into_iter()
            .map(|s| s.into_iter().map(String::from).collect())
            .collect();
        Self::with_vocab(examples, vocab)
    }

    /// Encodes against a given sorted vocabulary; every example value must
    /// be present in it.
    pub fn with_vocab(examples: &[LabeledExample], vocab: Vec<Vec<String>>) -> Result<Self> {
        let d = vocab.len();
        let mut codes = Vec::with_capacity(examples.len() * d);
        for (row, e) in examples.iter().enumerate() {
            if e.context.len() != d {
                return Err(Error::InvalidInput(format!(
                    "example {row} has {} fields, expected {d}",
                    e.context.len()
                )));
            }
            for (f, v) in e.context.values().iter().enumerate() {
                let code = vocab[f]
                    .binary_search(v)
                    .map_err(|_| Error::InvalidInput(format!("value {v:?} missing from vocabulary of feature {f}")))?;
                codes.push(code as u32);
            }
        }
        Ok(Self {
            n_features: d,
            codes,
            labels: examples.iter().map(|e| e.label).collect(),
            vocab,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn vocab(&self) -> &[Vec<String>] {
        &self.vocab
    }

    fn code(&self, row: usize, feature: usize) -> u32 {
        self.codes[row * self.n_features + feature]
    }

    fn label(&self, row: usize) -> BehaviorClass {
        self.labels[row]
    }

    fn counts(&self, rows: &[usize]) -> ClassCounts {
        ClassCounts::from_labels(rows.iter().map(|&r| self.label(r)))
    }
}

struct EncodedSplit {
    feature: usize,
    code: u32,
    gain: f64,
}

fn best_split_encoded(
    table: &CategoricalTable,
    rows: &[usize],
    features: &[usize],
    parent: ClassCounts,
    cfg: &TreeConfig,
) -> Option<EncodedSplit> {
    let parent = parent.as_array();
    let n_p = rows.len() as u64;
    let min_leaf = cfg.min_samples_leaf as u64;
    let mut best: Option<EncodedSplit> = None;
    let mut tally: Vec<[u32; 3]> = Vec::new();
    for &f in features {
        tally.clear();
        tally.resize(table.vocab[f].len(), [0; 3]);
        for &r in rows {
            tally[table.code(r, f) as usize][table.label(r).index()] += 1;
        }
        for (code, left) in tally.iter().enumerate() {
            let n_l: u64 = left.iter().map(|&c| u64::from(c)).sum();
            if n_l == 0 || n_l < min_leaf || n_p - n_l < min_leaf {
                continue;
            }
            let right = [parent[0] - left[0], parent[1] - left[1], parent[2] - left[2]];
            let gain = gain_unchecked(&parent, left, &right, n_p, n_l);
            if best.as_ref().is_none_or(|b| gain > b.gain + GAIN_TIE_EPS) {
                best = Some(EncodedSplit {
                    feature: f,
                    code: code as u32,
                    gain,
                });
            }
        }
    }
    best.filter(|b| b.gain > cfg.min_gain)
}

fn checked_features(features: &[usize], n_features: usize) -> Result<Vec<usize>> {
    let mut out: Vec<usize> = features.to_vec();
    out.sort_unstable();
    out.dedup();
    if let Some(&f) = out.iter().find(|&&f| f >= n_features) {
        return Err(Error::InvalidInput(format!(
            "feature index {f} out of range for {n_features} features"
        )));
    }
    Ok(out)
}

/// Best binary split over `candidate_features`, or `None` when no eligible
/// split improves the Gini index by more than `cfg.min_gain`. A split is
/// eligible only when both children hold at least `cfg.min_samples_leaf`
/// examples. Equal gains go to the lower feature index, then to the
/// lexicographically smaller category.
pub fn best_split(
    examples: &[LabeledExample],
    candidate_features: &[usize],
    cfg: &TreeConfig,
) -> Result<Option<SplitCandidate>> {
    if examples.is_empty() {
        return Err(Error::InvalidInput("best_split needs at least one example".into()));
    }
    let table = CategoricalTable::from_examples(examples)?;
    let features = checked_features(candidate_features, table.n_features())?;
    let rows: Vec<usize> = (0..table.len()).collect();
    let parent = table.counts(&rows);
    Ok(best_split_encoded(&table, &rows, &features, parent, cfg).map(|s| SplitCandidate {
        feature_index: s.feature,
        category: table.vocab[s.feature][s.code as usize].clone(),
        gain: s.gain,
    }))
}

/// Grows a tree on all `examples`.
pub fn build_tree<R: Rng + ?Sized>(
    examples: &[LabeledExample],
    cfg: &TreeConfig,
    rng: &mut R,
) -> Result<TreeNode> {
    if examples.is_empty() {
        return Err(Error::InvalidInput("cannot build a tree from zero examples".into()));
    }
    let table = CategoricalTable::from_examples(examples)?;
    build_tree_on(&table, (0..table.len()).collect(), cfg, rng)
}

/// Grows a tree on the given rows of `table` (rows may repeat, as in a
/// bootstrap sample).
pub fn build_tree_on<R: Rng + ?Sized>(
    table: &CategoricalTable,
    rows: Vec<usize>,
    cfg: &TreeConfig,
    rng: &mut R,
) -> Result<TreeNode> {
    if rows.is_empty() {
        return Err(Error::InvalidInput("cannot build a tree from zero examples".into()));
    }
    cfg.validate(table.n_features())?;
    Ok(grow(table, rows, 0, cfg, rng))
}

fn grow<R: Rng + ?Sized>(
    table: &CategoricalTable,
    rows: Vec<usize>,
    depth: usize,
    cfg: &TreeConfig,
    rng: &mut R,
) -> TreeNode {
    let counts = table.counts(&rows);
    if counts.distinct() <= 1
        || cfg.max_depth.is_some_and(|m| depth >= m)
        || rows.len() < 2 * cfg.min_samples_leaf
    {
        return TreeNode::leaf(counts);
    }
    let d = table.n_features();
    let features: Vec<usize> = match cfg.feature_subset_size {
        None => (0..d).collect(),
        Some(k) => {
            let mut f = rand::seq::index::sample(rng, d, k).into_vec();
            f.sort_unstable();
            f
        }
    };
    let Some(split) = best_split_encoded(table, &rows, &features, counts, cfg) else {
        return TreeNode::leaf(counts);
    };
    let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
        .into_iter()
        .partition(|&r| table.code(r, split.feature) == split.code);
    let left = grow(table, left_rows, depth + 1, cfg, rng);
    let right = grow(table, right_rows, depth + 1, cfg, rng);
    TreeNode::Split {
        feature_index: split.feature,
        category: table.vocab[split.feature][split.code as usize].clone(),
        left: Box::new(left),
        right: Box::new(right),
    }
}
