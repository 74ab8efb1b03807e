//! The two classifiers compared by this crate and a trained end-to-end model
//! (feature maps plus classifier).

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::context::{build_dataset_with, FeatureMaps, PipelineConfig};
use crate::domain::{BehaviorClass, CallRecord, ClassCounts, ContextVector, Dataset};
use crate::error::{Error, Result};
use crate::forest::{train_forest, Forest, ForestConfig};
use crate::tree::{build_tree, TreeConfig, TreeNode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ModelKind {
    /// Single Gini decision tree.
    Miim,
    /// Random forest of Gini trees.
    Emiim,
}

impl ModelKind {
    pub fn tag(self) -> &'static str {
        match self {
            Self::Miim => "MIIM",
            Self::Emiim => "E-MIIM",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "").as_str() {
            "miim" => Ok(Self::Miim),
            "emiim" => Ok(Self::Emiim),
            other => Err(Error::InvalidInput(alloc::format!("unknown model kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelSpec {
    /// A single tree. The seed only matters if the config samples features.
    Miim { tree: TreeConfig, seed: u64 },
    Emiim(ForestConfig),
}

impl ModelSpec {
    /// Unbounded single tree over all features.
    pub fn miim() -> Self {
        Self::Miim {
            tree: TreeConfig::default(),
            seed: 0,
        }
    }

    pub fn emiim(cfg: ForestConfig) -> Self {
        Self::Emiim(cfg)
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            Self::Miim { .. } => ModelKind::Miim,
            Self::Emiim(_) => ModelKind::Emiim,
        }
    }

    pub fn fit(&self, dataset: &Dataset) -> Result<Classifier> {
        match self {
            Self::Miim { tree, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                Ok(Classifier::Tree(build_tree(dataset.examples(), tree, &mut rng)?))
            }
            Self::Emiim(cfg) => Ok(Classifier::Forest(train_forest(dataset, cfg)?)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Classifier {
    Tree(TreeNode),
    Forest(Forest),
}

impl Classifier {
    pub fn kind(&self) -> ModelKind {
        match self {
            Self::Tree(_) => ModelKind::Miim,
            Self::Forest(_) => ModelKind::Emiim,
        }
    }

    /// Predicted class and vote tally (a single tree casts one vote).
    pub fn predict(&self, context: &ContextVector) -> (BehaviorClass, ClassCounts) {
        match self {
            Self::Tree(t) => {
                let c = t.predict(context);
                (c, ClassCounts::from_labels([c]))
            }
            Self::Forest(f) => f.predict(context),
        }
    }

    pub fn predict_class(&self, context: &ContextVector) -> BehaviorClass {
        self.predict(context).0
    }
}

/// Everything needed to go from a raw call record to a prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub spec: ModelSpec,
    pub pipeline: PipelineConfig,
    pub maps: FeatureMaps,
    pub feature_names: Vec<String>,
    pub feature_vocab: Vec<Vec<String>>,
    pub classifier: Classifier,
}

impl TrainedModel {
    pub fn train(
        user_id: &str,
        records: &[CallRecord],
        pipeline: &PipelineConfig,
        spec: &ModelSpec,
    ) -> Result<Self> {
        let maps = FeatureMaps::fit(records, pipeline)?;
        let dataset = build_dataset_with(user_id, records, &maps)?;
        let classifier = spec.fit(&dataset)?;
        Ok(Self {
            spec: *spec,
            pipeline: *pipeline,
            maps,
            feature_names: dataset.feature_names().to_vec(),
            feature_vocab: dataset.feature_vocab().to_vec(),
            classifier,
        })
    }

    pub fn kind(&self) -> ModelKind {
        self.spec.kind()
    }

    pub fn predict(&self, context: &ContextVector) -> (BehaviorClass, ClassCounts) {
        self.classifier.predict(context)
    }

    pub fn predict_record(&self, record: &CallRecord) -> (BehaviorClass, ClassCounts) {
        self.predict(&self.maps.context(record))
    }
}
