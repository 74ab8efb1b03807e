//! Random forest: bagged trees with per-node feature subsampling and a hard
//! majority vote.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::domain::{BehaviorClass, ClassCounts, ContextVector, Dataset};
use crate::error::{Error, Result};
use crate::tree::{build_tree_on, CategoricalTable, TreeConfig, TreeNode};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// Features sampled per node; `None` means `floor(sqrt(D))`, at least 1.
    pub max_features: Option<usize>,
    pub bootstrap: bool,
    /// Depth, leaf-size and gain limits for each tree. Its
    /// `feature_subset_size` is ignored in favor of `max_features`.
    pub tree: TreeConfig,
    pub master_seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_features: None,
            bootstrap: true,
            tree: TreeConfig::default(),
            master_seed: 0,
        }
    }
}

impl ForestConfig {
    /// Subset size actually used for `n_features` features.
    pub fn resolved_max_features(&self, n_features: usize) -> usize {
        self.max_features
            .unwrap_or_else(|| isqrt(n_features).max(1))
    }

    pub fn validate(&self, n_features: usize) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::InvalidConfig("forest needs at least one tree".into()));
        }
        let d = self.resolved_max_features(n_features);
        if d == 0 || d > n_features {
            return Err(Error::InvalidConfig(format!(
                "max_features {d} outside 1..={n_features}"
            )));
        }
        self.tree_config(n_features).validate(n_features)
    }

    fn tree_config(&self, n_features: usize) -> TreeConfig {
        TreeConfig {
            feature_subset_size: Some(self.resolved_max_features(n_features)),
            ..self.tree
        }
    }
}

fn isqrt(n: usize) -> usize {
    let mut r = 0usize;
    while (r + 1) * (r + 1) <= n {
        r += 1;
    }
    r
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of tree `index`: `mix64(master_seed + (index + 1) * 0x9E3779B97F4A7C15)`
/// with wrapping arithmetic. Depends only on its two arguments, so trees can
/// be trained in any order.
pub fn tree_seed(master_seed: u64, index: usize) -> u64 {
    mix64(master_seed.wrapping_add((index as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15)))
}

/// `n` indices drawn uniformly with replacement from `0..n`.
pub fn bootstrap_sample<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Vec<usize>> {
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    Ok((0..n).map(|_| rng.random_range(0..n)).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Forest {
    trees: Vec<TreeNode>,
    seeds: Vec<u64>,
    config: ForestConfig,
    feature_names: Vec<String>,
    feature_vocab: Vec<Vec<String>>,
}

impl Forest {
    /// Reassembles a trained forest, e.g. after loading it from disk.
    pub fn from_parts(
        trees: Vec<TreeNode>,
        seeds: Vec<u64>,
        config: ForestConfig,
        feature_names: Vec<String>,
        feature_vocab: Vec<Vec<String>>,
    ) -> Result<Self> {
        if trees.len() != config.n_trees || seeds.len() != config.n_trees {
            return Err(Error::InvalidInput(format!(
                "forest declares {} trees but has {} trees and {} seeds",
                config.n_trees,
                trees.len(),
                seeds.len()
            )));
        }
        if let Some(i) = (0..seeds.len()).find(|&i| seeds[i] != tree_seed(config.master_seed, i)) {
            return Err(Error::InvalidInput(format!("seed of tree {i} does not match the master seed")));
        }
        Ok(Self {
            trees,
            seeds,
            config,
            feature_names,
            feature_vocab,
        })
    }

    pub fn trees(&self) -> &[TreeNode] {
        &self.trees
    }

    pub fn seeds(&self) -> &[u64] {
        &self.seeds
    }

    pub fn config(&self) -> &ForestConfig {
        &self.config
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn feature_vocab(&self) -> &[Vec<String>] {
        &self.feature_vocab
    }

    pub fn len(&self) -> usize {
        self.trees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trees.is_empty()
    }

    pub fn predict(&self, context: &ContextVector) -> (BehaviorClass, ClassCounts) {
        let votes = ClassCounts::from_labels(self.trees.iter().map(|t| t.predict(context)));
        (votes.majority(), votes)
    }
}

/// Trains `n_trees` trees; tree `i` draws its bootstrap sample and feature
/// subsets from a generator seeded with [`tree_seed`]`(master_seed, i)`.
pub fn train_forest(dataset: &Dataset, cfg: &ForestConfig) -> Result<Forest> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let d = dataset.n_features();
    cfg.validate(d)?;
    let table = CategoricalTable::with_vocab(dataset.examples(), dataset.feature_vocab().to_vec())?;
    let tree_cfg = cfg.tree_config(d);
    let mut trees = Vec::with_capacity(cfg.n_trees);
    let mut seeds = Vec::with_capacity(cfg.n_trees);
    for i in 0..cfg.n_trees {
        let seed = tree_seed(cfg.master_seed, i);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows = if cfg.bootstrap {
            bootstrap_sample(table.len(), &mut rng)?
        } else {
            (0..table.len()).collect()
        };
        trees.push(build_tree_on(&table, rows, &tree_cfg, &mut rng)?);
        seeds.push(seed);
    }
    Ok(Forest {
        trees,
        seeds,
        config: *cfg,
        feature_names: dataset.feature_names().to_vec(),
        feature_vocab: dataset.feature_vocab().to_vec(),
    })
}

/// Majority vote over all trees (ties to the smaller class id) and the
/// full vote tally.
pub fn predict_forest(forest: &Forest, context: &ContextVector) -> (BehaviorClass, ClassCounts) {
    forest.predict(context)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{default_feature_names, LabeledExample};
    use alloc::vec;

    fn dataset(rows: &[([&str; 4], BehaviorClass)]) -> Dataset {
        let ex = rows
            .iter()
            .map(|(v, c)| LabeledExample::new(v.iter().copied().collect(), *c))
            .collect();
        Dataset::new("t", default_feature_names(), ex).unwrap()
    }

    #[test]
    fn bootstrap_of_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        assert_eq!(bootstrap_sample(1, &mut rng).unwrap(), vec![0]);
        assert_eq!(bootstrap_sample(0, &mut rng).unwrap_err(), Error::EmptyDataset);
    }

    #[test]
    fn bootstrap_is_seed_deterministic() {
        let a = bootstrap_sample(50, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let b = bootstrap_sample(50, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|&i| i < 50));
    }

    #[test]
    fn default_subset_is_floor_sqrt() {
        let cfg = ForestConfig::default();
        assert_eq!(cfg.resolved_max_features(4), 2);
        assert_eq!(cfg.resolved_max_features(1), 1);
        assert_eq!(cfg.resolved_max_features(8), 2);
        assert_eq!(cfg.resolved_max_features(9), 3);
    }

    #[test]
    fn invalid_configs() {
        let ds = dataset(&[(["S1", "Mon", "home", "C1"], BehaviorClass::Accept)]);
        let zero = ForestConfig { n_trees: 0, ..ForestConfig::default() };
        assert!(matches!(train_forest(&ds, &zero), Err(Error::InvalidConfig(_))));
        let wide = ForestConfig { max_features: Some(5), ..ForestConfig::default() };
        assert!(matches!(train_forest(&ds, &wide), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn pure_dataset_gives_leaf_trees() {
        let ds = dataset(&[
            (["S1", "Mon", "home", "C1"], BehaviorClass::Missed),
            (["S2", "Tue", "office", "C2"], BehaviorClass::Missed),
        ]);
        let f = train_forest(&ds, &ForestConfig { n_trees: 7, ..ForestConfig::default() }).unwrap();
        assert_eq!(f.len(), 7);
        assert!(f.trees().iter().all(|t| t.is_leaf()));
        let (c, votes) = f.predict(&["x", "y", "z", "w"].into_iter().collect());
        assert_eq!(c, BehaviorClass::Missed);
        assert_eq!(votes.as_array(), [0, 0, 7]);
    }

    #[test]
    fn vote_ties_go_to_accept() {
        let leaf = |c: [u32; 3]| TreeNode::leaf(ClassCounts::new(c));
        let cfg = ForestConfig { n_trees: 3, ..ForestConfig::default() };
        let f = Forest::from_parts(
            vec![leaf([1, 0, 0]), leaf([0, 1, 0]), leaf([0, 0, 1])],
            (0..3).map(|i| tree_seed(0, i)).collect(),
            cfg,
            default_feature_names(),
            vec![vec![]; 4],
        )
        .unwrap();
        let ctx: ContextVector = ["a", "b", "c", "d"].into_iter().collect();
        assert_eq!(predict_forest(&f, &ctx).0, BehaviorClass::Accept);
    }

    #[test]
    fn from_parts_checks_counts_and_seeds() {
        let cfg = ForestConfig { n_trees: 1, ..ForestConfig::default() };
        let leaf = TreeNode::leaf(ClassCounts::new([1, 0, 0]));
        assert!(Forest::from_parts(vec![leaf.clone()], vec![1], cfg, vec![], vec![]).is_err());
        assert!(Forest::from_parts(vec![], vec![], cfg, vec![], vec![]).is_err());
        assert!(Forest::from_parts(vec![leaf], vec![tree_seed(0, 0)], cfg, vec![], vec![]).is_ok());
    }

    #[test]
    fn tree_seeds_differ() {
        let s: Vec<u64> = (0..100).map(|i| tree_seed(7, i)).collect();
        let mut sorted = s.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), 100);
        assert_ne!(tree_seed(7, 0), tree_seed(8, 0));
    }
}
