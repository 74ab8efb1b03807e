//! Exhaustive split search with exact rational arithmetic, checked against
//! the tree builder.

use emiim_core::tree::{best_split, build_tree, TreeConfig, TreeNode};
use emiim_core::{BehaviorClass, ContextVector, LabeledExample};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Sum of squared class counts over node size, as an exact fraction.
fn purity(counts: [u64; 3]) -> (u128, u128) {
    let n: u64 = counts.iter().sum();
    let q: u64 = counts.iter().map(|c| c * c).sum();
    (q as u128, n as u128)
}

fn add(a: (u128, u128), b: (u128, u128)) -> (u128, u128) {
    (a.0 * b.1 + b.0 * a.1, a.1 * b.1)
}

fn cmp(a: (u128, u128), b: (u128, u128)) -> std::cmp::Ordering {
    (a.0 * b.1).cmp(&(b.0 * a.1))
}

fn counts(rows: &[&LabeledExample]) -> [u64; 3] {
    let mut c = [0u64; 3];
    for r in rows {
        c[r.label.index()] += 1;
    }
    c
}

#[derive(Debug, Clone, PartialEq)]
struct OracleSplit {
    feature: usize,
    category: String,
    gain: f64,
}

/// Tries every (feature, category) present; keeps the strictly best score,
/// so the first candidate in (feature, category) order wins ties.
fn oracle_split(rows: &[&LabeledExample], features: &[usize], min_leaf: usize) -> Option<OracleSplit> {
    let parent = counts(rows);
    let n = rows.len() as u128;
    let parent_score = purity(parent);
    let mut best: Option<((u128, u128), usize, String)> = None;
    for &f in features {
        let mut cats: Vec<&str> = rows.iter().map(|r| r.context.get(f).unwrap()).collect();
        cats.sort();
        cats.dedup();
        for cat in cats {
            let (l, r): (Vec<&LabeledExample>, Vec<&LabeledExample>) =
                rows.iter().partition(|e| e.context.get(f) == Some(cat));
            if l.len() < min_leaf || r.len() < min_leaf || r.is_empty() {
                continue;
            }
            let score = add(purity(counts(&l)), purity(counts(&r)));
            let better = best.as_ref().is_none_or(|(b, _, _)| cmp(score, *b).is_gt());
            if better {
                best = Some((score, f, cat.to_string()));
            }
        }
    }
    let (score, feature, category) = best?;
    // gain = (score - Q_p / n) / n; positive iff score > Q_p / n
    if !cmp(score, parent_score).is_gt() {
        return None;
    }
    let gain = (score.0 as f64 / score.1 as f64 - parent_score.0 as f64 / parent_score.1 as f64) / n as f64;
    Some(OracleSplit { feature, category, gain })
}

fn majority(c: [u64; 3]) -> BehaviorClass {
    let mut best = 0;
    for i in 1..3 {
        if c[i] > c[best] {
            best = i;
        }
    }
    BehaviorClass::from_index(best).unwrap()
}

fn oracle_tree(rows: &[&LabeledExample], features: &[usize]) -> TreeNode {
    let c = counts(rows);
    let leaf = || TreeNode::Leaf {
        class: majority(c),
        class_counts: emiim_core::ClassCounts::new(c.map(|v| v as u32)),
    };
    if c.iter().filter(|&&v| v > 0).count() <= 1 || rows.len() < 2 {
        return leaf();
    }
    match oracle_split(rows, features, 1) {
        None => leaf(),
        Some(s) => {
            let (l, r): (Vec<&LabeledExample>, Vec<&LabeledExample>) = rows
                .iter()
                .partition(|e| e.context.get(s.feature) == Some(s.category.as_str()));
            TreeNode::Split {
                feature_index: s.feature,
                category: s.category,
                left: Box::new(oracle_tree(&l, features)),
                right: Box::new(oracle_tree(&r, features)),
            }
        }
    }
}

fn example_strategy() -> impl Strategy<Value = LabeledExample> {
    (prop::array::uniform3(0usize..3), 1u8..=3).prop_map(|(cats, label)| {
        let ctx: ContextVector = cats.iter().map(|&c| ["a", "b", "c"][c]).collect();
        LabeledExample::new(ctx, BehaviorClass::from_id(label).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn best_split_matches_exhaustive_oracle(
        examples in prop::collection::vec(example_strategy(), 1..=12),
        min_leaf in 1usize..=3,
    ) {
        let cfg = TreeConfig { min_samples_leaf: min_leaf, ..TreeConfig::default() };
        let got = best_split(&examples, &[0, 1, 2], &cfg).unwrap();
        let rows: Vec<&LabeledExample> = examples.iter().collect();
        let want = oracle_split(&rows, &[0, 1, 2], min_leaf);
        match (got, want) {
            (None, None) => {}
            (Some(g), Some(w)) => {
                prop_assert_eq!(g.feature_index, w.feature);
                prop_assert_eq!(&g.category, &w.category);
                prop_assert!((g.gain - w.gain).abs() < 1e-12);
            }
            (g, w) => prop_assert!(false, "implementation {:?} vs oracle {:?}", g, w),
        }
    }

    #[test]
    fn subset_of_features_matches_oracle(
        examples in prop::collection::vec(example_strategy(), 2..=12),
        mask in 1usize..8,
    ) {
        let features: Vec<usize> = (0..3).filter(|f| mask & (1 << f) != 0).collect();
        let got = best_split(&examples, &features, &TreeConfig::default()).unwrap();
        let rows: Vec<&LabeledExample> = examples.iter().collect();
        let want = oracle_split(&rows, &features, 1);
        prop_assert_eq!(got.map(|g| (g.feature_index, g.category)), want.map(|w| (w.feature, w.category)));
    }

    #[test]
    fn full_tree_matches_recursive_oracle(
        examples in prop::collection::vec(example_strategy(), 1..=12),
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tree = build_tree(&examples, &TreeConfig::default(), &mut rng).unwrap();
        let rows: Vec<&LabeledExample> = examples.iter().collect();
        prop_assert_eq!(tree, oracle_tree(&rows, &[0, 1, 2]));
    }
}

#[test]
fn twelve_example_toy_set() {
    use BehaviorClass::{Accept as A, Missed as M, Reject as R};
    let rows = [
        (["S1", "office", "C1"], A),
        (["S1", "office", "C2"], R),
        (["S1", "home", "C2"], R),
        (["S2", "office", "C1"], A),
        (["S2", "home", "C3"], M),
        (["S2", "home", "C2"], M),
        (["S3", "home", "C1"], A),
        (["S3", "office", "C3"], A),
        (["S3", "home", "C3"], M),
        (["S1", "home", "C1"], A),
        (["S2", "office", "C2"], R),
        (["S3", "office", "C2"], R),
    ];
    let examples: Vec<LabeledExample> = rows
        .iter()
        .map(|(v, c)| LabeledExample::new(v.iter().copied().collect(), *c))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let tree = build_tree(&examples, &TreeConfig::default(), &mut rng).unwrap();
    let refs: Vec<&LabeledExample> = examples.iter().collect();
    assert_eq!(tree, oracle_tree(&refs, &[0, 1, 2]));
    for e in &examples {
        assert_eq!(tree.predict(&e.context), e.label);
    }
}
