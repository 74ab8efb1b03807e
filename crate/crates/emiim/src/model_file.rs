//! Versioned JSON model files.
//!
//! A model file carries everything needed to turn a raw call record into a
//! prediction: the configuration it was trained with, the fitted time
//! segmentation and social map, the feature vocabulary, and every tree as a
//! preorder list of node records. A split node is followed by its left
//! subtree and then its right subtree:
//!
//! ```json
//! {"split": {"feature": 0, "category": "S1"}}
//! {"leaf": {"class": "accept", "counts": [12, 0, 1]}}
//! ```
//!
//! Files are written with a fixed key order, so saving the same model twice
//! produces identical bytes.

use std::path::Path;

use emiim_core::context::{FeatureMaps, PipelineConfig, SocialContextConfig, SocialMap};
use emiim_core::forest::{Forest, ForestConfig};
use emiim_core::model::{Classifier, ModelKind, ModelSpec, TrainedModel};
use emiim_core::segmentation::{Segment, SegmentationConfig, SegmentationModel};
use emiim_core::tree::{TreeConfig, TreeNode};
use emiim_core::{BehaviorClass, ClassCounts};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

pub const FORMAT_VERSION: u64 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    format_version: u64,
    kind: String,
    config: ConfigEcho,
    segmentation: Vec<Vec<SegmentRecord>>,
    social: Vec<(String, String)>,
    features: Vec<String>,
    vocab: Vec<Vec<String>>,
    trees: Vec<TreeRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigEcho {
    base_granularity_min: u32,
    per_day: bool,
    top_k: usize,
    min_count: usize,
    tree: TreeEcho,
    /// Present for single-tree models.
    seed: Option<u64>,
    /// Present for forests.
    forest: Option<ForestEcho>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TreeEcho {
    max_depth: Option<usize>,
    min_samples_leaf: usize,
    min_gain: f64,
    feature_subset_size: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ForestEcho {
    n_trees: usize,
    max_features: Option<usize>,
    bootstrap: bool,
    master_seed: u64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SegmentRecord {
    start: u32,
    end: u32,
    id: String,
    dominant: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TreeRecord {
    seed: u64,
    nodes: Vec<Value>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
enum NodeRecord {
    Split { feature: usize, category: String },
    Leaf { class: String, counts: [u32; 3] },
}

impl From<TreeConfig> for TreeEcho {
    fn from(t: TreeConfig) -> Self {
        Self {
            max_depth: t.max_depth,
            min_samples_leaf: t.min_samples_leaf,
            min_gain: t.min_gain,
            feature_subset_size: t.feature_subset_size,
        }
    }
}

impl From<&TreeEcho> for TreeConfig {
    fn from(t: &TreeEcho) -> Self {
        Self {
            max_depth: t.max_depth,
            min_samples_leaf: t.min_samples_leaf,
            min_gain: t.min_gain,
            feature_subset_size: t.feature_subset_size,
        }
    }
}

fn preorder(node: &TreeNode, out: &mut Vec<Value>) -> Result<()> {
    let record = match node {
        TreeNode::Split {
            feature_index,
            category,
            ..
        } => NodeRecord::Split {
            feature: *feature_index,
            category: category.clone(),
        },
        TreeNode::Leaf { class, class_counts } => NodeRecord::Leaf {
            class: class.name().to_string(),
            counts: class_counts.as_array(),
        },
    };
    out.push(serde_json::to_value(record).map_err(|e| Error::parse("node", e.to_string()))?);
    if let TreeNode::Split { left, right, .. } = node {
        preorder(left, out)?;
        preorder(right, out)?;
    }
    Ok(())
}

/// Renders a trained model as model-file JSON.
pub fn model_to_json(model: &TrainedModel) -> Result<String> {
    let (tree_cfg, seed, forest) = match &model.spec {
        ModelSpec::Miim { tree, seed } => (*tree, Some(*seed), None),
        ModelSpec::Emiim(f) => (
            f.tree,
            None,
            Some(ForestEcho {
                n_trees: f.n_trees,
                max_features: f.max_features,
                bootstrap: f.bootstrap,
                master_seed: f.master_seed,
            }),
        ),
    };
    let trees: Vec<(u64, &TreeNode)> = match &model.classifier {
        Classifier::Tree(t) => vec![(seed.unwrap_or(0), t)],
        Classifier::Forest(f) => f.seeds().iter().copied().zip(f.trees()).collect(),
    };
    let mut tree_records = Vec::with_capacity(trees.len());
    for (seed, tree) in trees {
        let mut nodes = Vec::with_capacity(tree.n_nodes());
        preorder(tree, &mut nodes)?;
        tree_records.push(TreeRecord { seed, nodes });
    }
    let file = ModelFile {
        format_version: FORMAT_VERSION,
        kind: model.kind().tag().to_string(),
        config: ConfigEcho {
            base_granularity_min: model.pipeline.segmentation.base_granularity_min,
            per_day: model.pipeline.segmentation.per_day,
            top_k: model.pipeline.social.top_k,
            min_count: model.pipeline.social.min_count,
            tree: tree_cfg.into(),
            seed,
            forest,
        },
        segmentation: model
            .maps
            .segmentation
            .timelines()
            .iter()
            .map(|tl| {
                tl.iter()
                    .map(|s| SegmentRecord {
                        start: s.start_minute,
                        end: s.end_minute,
                        id: s.id.clone(),
                        dominant: s.dominant.map(|c| c.name().to_string()),
                    })
                    .collect()
            })
            .collect(),
        social: model
            .maps
            .social
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect(),
        features: model.feature_names.clone(),
        vocab: model.feature_vocab.clone(),
        trees: tree_records,
    };
    let mut text = serde_json::to_string_pretty(&file).map_err(|e| Error::parse("$", e.to_string()))?;
    text.push('\n');
    Ok(text)
}

fn class_at(path: &str, name: &str) -> Result<BehaviorClass> {
    name.parse().map_err(|_| Error::parse(path, format!("unknown class {name:?}")))
}

struct TreeReader<'a> {
    nodes: &'a [Value],
    tree: usize,
    cursor: usize,
    vocab: &'a [Vec<String>],
    max_depth: usize,
}

impl TreeReader<'_> {
    fn path(&self, j: usize) -> String {
        format!("trees[{}].nodes[{j}]", self.tree)
    }

    fn read(&mut self, depth: usize) -> Result<TreeNode> {
        let j = self.cursor;
        let raw = self.nodes.get(j).ok_or_else(|| {
            Error::parse(
                format!("trees[{}].nodes", self.tree),
                format!("ended after {j} nodes inside an unfinished subtree"),
            )
        })?;
        self.cursor += 1;
        let record: NodeRecord =
            serde_json::from_value(raw.clone()).map_err(|e| Error::parse(self.path(j), e.to_string()))?;
        match record {
            NodeRecord::Leaf { class, counts } => {
                let class = class_at(&self.path(j), &class)?;
                let counts = ClassCounts::new(counts);
                if counts.total() > 0 && counts.majority() != class {
                    return Err(Error::parse(self.path(j), "leaf class is not the majority of its counts"));
                }
                Ok(TreeNode::Leaf {
                    class,
                    class_counts: counts,
                })
            }
            NodeRecord::Split { feature, category } => {
                let known = self
                    .vocab
                    .get(feature)
                    .ok_or_else(|| Error::parse(self.path(j), format!("feature {feature} out of range")))?;
                if known.binary_search(&category).is_err() {
                    return Err(Error::parse(
                        self.path(j),
                        format!("category {category:?} is not in the vocabulary of feature {feature}"),
                    ));
                }
                if depth >= self.max_depth {
                    return Err(Error::parse(self.path(j), "tree is deeper than its vocabulary allows"));
                }
                let left = self.read(depth + 1)?;
                let right = self.read(depth + 1)?;
                Ok(TreeNode::Split {
                    feature_index: feature,
                    category,
                    left: Box::new(left),
                    right: Box::new(right),
                })
            }
        }
    }
}

fn read_tree(record: &TreeRecord, index: usize, vocab: &[Vec<String>]) -> Result<TreeNode> {
    // No valid tree tests the same (feature, category) twice on one path.
    let max_depth = vocab.iter().map(Vec::len).sum();
    let mut reader = TreeReader {
        nodes: &record.nodes,
        tree: index,
        cursor: 0,
        vocab,
        max_depth,
    };
    let root = reader.read(0)?;
    if reader.cursor != record.nodes.len() {
        return Err(Error::parse(reader.path(reader.cursor), "node after the end of the tree"));
    }
    Ok(root)
}

/// Parses model-file JSON. The version is checked before anything else.
pub fn model_from_json(text: &str) -> Result<TrainedModel> {
    let value: Value = serde_json::from_str(text).map_err(|e| Error::parse("$", e.to_string()))?;
    let version = value
        .get("format_version")
        .ok_or_else(|| Error::parse("format_version", "missing"))?
        .as_u64()
        .ok_or_else(|| Error::parse("format_version", "not a non-negative integer"))?;
    if version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let file: ModelFile = serde_json::from_value(value).map_err(|e| Error::parse("$", e.to_string()))?;
    let kind: ModelKind = file
        .kind
        .parse()
        .map_err(|_| Error::parse("kind", format!("unknown model kind {:?}", file.kind)))?;

    let cfg = &file.config;
    let pipeline = PipelineConfig {
        segmentation: SegmentationConfig {
            base_granularity_min: cfg.base_granularity_min,
            per_day: cfg.per_day,
        },
        social: SocialContextConfig {
            top_k: cfg.top_k,
            min_count: cfg.min_count,
        },
    };
    let tree_cfg = TreeConfig::from(&cfg.tree);
    let spec = match (kind, cfg.seed, &cfg.forest) {
        (ModelKind::Miim, Some(seed), None) => ModelSpec::Miim { tree: tree_cfg, seed },
        (ModelKind::Emiim, None, Some(f)) => ModelSpec::Emiim(ForestConfig {
            n_trees: f.n_trees,
            max_features: f.max_features,
            bootstrap: f.bootstrap,
            tree: tree_cfg,
            master_seed: f.master_seed,
        }),
        _ => {
            return Err(Error::parse(
                "config",
                format!("{kind} models need exactly one of `seed` (MIIM) or `forest` (E-MIIM)"),
            ))
        }
    };

    let mut timelines = Vec::with_capacity(file.segmentation.len());
    for (t, tl) in file.segmentation.iter().enumerate() {
        let mut segs = Vec::with_capacity(tl.len());
        for (i, s) in tl.iter().enumerate() {
            let dominant = match &s.dominant {
                Some(name) => Some(class_at(&format!("segmentation[{t}][{i}].dominant"), name)?),
                None => None,
            };
            segs.push(Segment {
                start_minute: s.start,
                end_minute: s.end,
                id: s.id.clone(),
                dominant,
            });
        }
        timelines.push(segs);
    }
    let segmentation = SegmentationModel::from_timelines(pipeline.segmentation, timelines)
        .map_err(|e| Error::parse("segmentation", e.to_string()))?;
    let social = SocialMap::from_pairs(file.social.iter().cloned());

    if file.features.len() != file.vocab.len() {
        return Err(Error::parse("vocab", "one vocabulary list per feature is required"));
    }
    for (f, v) in file.vocab.iter().enumerate() {
        if v.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::parse(format!("vocab[{f}]"), "must be sorted without duplicates"));
        }
    }

    let mut trees = Vec::with_capacity(file.trees.len());
    for (i, t) in file.trees.iter().enumerate() {
        trees.push(read_tree(t, i, &file.vocab)?);
    }
    let classifier = match spec {
        ModelSpec::Miim { seed, .. } => {
            if trees.len() != 1 || file.trees[0].seed != seed {
                return Err(Error::parse("trees", "a MIIM model holds exactly one tree with the configured seed"));
            }
            Classifier::Tree(trees.pop().expect("one tree"))
        }
        ModelSpec::Emiim(fc) => {
            let seeds = file.trees.iter().map(|t| t.seed).collect();
            let forest = Forest::from_parts(trees, seeds, fc, file.features.clone(), file.vocab.clone())
                .map_err(|e| Error::parse("trees", e.to_string()))?;
            Classifier::Forest(forest)
        }
    };

    Ok(TrainedModel {
        spec,
        pipeline,
        maps: FeatureMaps { segmentation, social },
        feature_names: file.features,
        feature_vocab: file.vocab,
        classifier,
    })
}

pub fn save_model(model: &TrainedModel, path: &Path) -> Result<()> {
    let text = model_to_json(model)?;
    std::fs::write(path, text).map_err(|e| Error::file(path, e))
}

pub fn load_model(path: &Path) -> Result<TrainedModel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
    model_from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::builtin;
    use emiim_core::synth::generate;

    fn trained(spec: ModelSpec) -> TrainedModel {
        let mut rules = builtin("alice").unwrap();
        rules.n_records = 300;
        let (records, _) = generate(&rules).unwrap();
        TrainedModel::train("alice", &records, &PipelineConfig::default(), &spec).unwrap()
    }

    fn small_forest() -> ModelSpec {
        ModelSpec::emiim(ForestConfig {
            n_trees: 5,
            master_seed: 11,
            ..ForestConfig::default()
        })
    }

    #[test]
    fn round_trip_is_lossless() {
        for spec in [ModelSpec::miim(), small_forest()] {
            let m = trained(spec);
            let text = model_to_json(&m).unwrap();
            let back = model_from_json(&text).unwrap();
            assert_eq!(back, m);
            assert_eq!(model_to_json(&back).unwrap(), text);
        }
    }

    fn edit(text: &str, f: impl FnOnce(&mut Value)) -> String {
        let mut v: Value = serde_json::from_str(text).unwrap();
        f(&mut v);
        serde_json::to_string(&v).unwrap()
    }

    #[test]
    fn unknown_version_is_refused() {
        let text = model_to_json(&trained(ModelSpec::miim())).unwrap();
        let bad = edit(&text, |v| v["format_version"] = 99.into());
        assert!(matches!(model_from_json(&bad), Err(Error::UnsupportedVersion(99))));
    }

    #[test]
    fn corrupt_node_reports_its_path() {
        let text = model_to_json(&trained(small_forest())).unwrap();
        let bad = edit(&text, |v| v["trees"][2]["nodes"][0] = serde_json::json!({"split": {"feature": 9, "category": "x"}}));
        match model_from_json(&bad) {
            Err(Error::Parse { path, .. }) => assert_eq!(path, "trees[2].nodes[0]"),
            other => panic!("unexpected {other:?}"),
        }
        let bad = edit(&text, |v| v["trees"][1]["nodes"][0] = serde_json::json!({"branch": {}}));
        assert!(matches!(model_from_json(&bad), Err(Error::Parse { path, .. }) if path == "trees[1].nodes[0]"));
    }

    #[test]
    fn truncated_and_padded_trees_are_rejected() {
        let text = model_to_json(&trained(small_forest())).unwrap();
        let bad = edit(&text, |v| {
            v["trees"][0]["nodes"].as_array_mut().unwrap().pop();
        });
        assert!(matches!(model_from_json(&bad), Err(Error::Parse { path, .. }) if path == "trees[0].nodes"));
        let bad = edit(&text, |v| {
            let leaf = serde_json::json!({"leaf": {"class": "accept", "counts": [1, 0, 0]}});
            v["trees"][0]["nodes"].as_array_mut().unwrap().push(leaf);
        });
        assert!(matches!(model_from_json(&bad), Err(Error::Parse { path, .. }) if path.starts_with("trees[0].nodes[")));
    }

    #[test]
    fn tampered_seed_is_rejected() {
        let text = model_to_json(&trained(small_forest())).unwrap();
        let bad = edit(&text, |v| v["trees"][3]["seed"] = 1.into());
        assert!(matches!(model_from_json(&bad), Err(Error::Parse { path, .. }) if path == "trees"));
    }
}
