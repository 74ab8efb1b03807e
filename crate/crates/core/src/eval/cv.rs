use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::metrics::{class_metrics, ClassMetrics, ConfusionMatrix, Summary};
use crate::context::{build_dataset_with, FeatureMaps, PipelineConfig};
use crate::domain::{BehaviorClass, CallRecord};
use crate::error::{Error, Result};
use crate::forest::ForestConfig;
use crate::model::{ModelKind, ModelSpec};
use crate::tree::TreeConfig;

/// Shuffles `0..n` with `seed` and deals the indices round-robin into `k`
/// folds, so fold sizes differ by at most one.
pub fn kfold_split(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 || k > n {
        return Err(Error::InvalidFoldCount { k, n });
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok(deal(idx, k))
}

/// Like [`kfold_split`], but shuffles within each class and deals the
/// classes one after another so every fold sees a similar class mix.
pub fn stratified_kfold_split(labels: &[BehaviorClass], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    let n = labels.len();
    if k < 2 || k > n {
        return Err(Error::InvalidFoldCount { k, n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order = Vec::with_capacity(n);
    for class in BehaviorClass::ALL {
        let mut group: Vec<usize> = (0..n).filter(|&i| labels[i] == class).collect();
        group.shuffle(&mut rng);
        order.extend(group);
    }
    Ok(deal(order, k))
}

fn deal(order: Vec<usize>, k: usize) -> Vec<Vec<usize>> {
    let mut folds: Vec<Vec<usize>> = (0..k).map(|_| Vec::new()).collect();
    for (pos, i) in order.into_iter().enumerate() {
        folds[pos % k].push(i);
    }
    folds
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CvOptions {
    pub k: usize,
    pub seed: u64,
    pub stratify: bool,
}

impl Default for CvOptions {
    fn default() -> Self {
        Self {
            k: 10,
            seed: 0,
            stratify: false,
        }
    }
}

impl CvOptions {
    fn folds(&self, labels: &[BehaviorClass]) -> Result<Vec<Vec<usize>>> {
        if self.stratify {
            stratified_kfold_split(labels, self.k, self.seed)
        } else {
            kfold_split(labels.len(), self.k, self.seed)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldResult {
    pub fold: usize,
    /// Positions (among the labeled records) held out in this fold.
    pub test_indices: Vec<usize>,
    pub train_size: usize,
    pub confusion: ConfusionMatrix,
    pub summary: Summary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub model: ModelKind,
    pub k: usize,
    pub n_examples: usize,
    /// All fold predictions pooled into one matrix.
    pub confusion: ConfusionMatrix,
    pub per_class: [ClassMetrics; 3],
    pub summary: Summary,
    pub folds: Vec<FoldResult>,
    /// Mean of the per-fold summaries.
    pub fold_mean: Summary,
}

impl EvalReport {
    /// Classes whose metrics contain a 0/0 ratio reported as 0.
    pub fn zero_division_classes(&self) -> impl Iterator<Item = BehaviorClass> + '_ {
        self.per_class.iter().filter(|m| m.zero_division).map(|m| m.class)
    }
}

/// k-fold cross validation over the labeled records of one log.
///
/// For every fold the segmentation and social map are fit on the training
/// records only; held-out records are mapped to contexts through those
/// maps before prediction.
pub fn cross_validate(
    records: &[CallRecord],
    pipeline: &PipelineConfig,
    spec: &ModelSpec,
    opts: &CvOptions,
) -> Result<EvalReport> {
    let labeled: Vec<(&CallRecord, BehaviorClass)> = records
        .iter()
        .filter_map(|r| r.behavior().map(|c| (r, c)))
        .collect();
    let n = labeled.len();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let labels: Vec<BehaviorClass> = labeled.iter().map(|(_, c)| *c).collect();
    let folds = opts.folds(&labels)?;

    let mut fold_of = alloc::vec![0usize; n];
    for (f, test) in folds.iter().enumerate() {
        for &i in test {
            fold_of[i] = f;
        }
    }

    let mut pooled = ConfusionMatrix::default();
    let mut results = Vec::with_capacity(folds.len());
    for (f, test) in folds.into_iter().enumerate() {
        let train: Vec<CallRecord> = (0..n)
            .filter(|&i| fold_of[i] != f)
            .map(|i| labeled[i].0.clone())
            .collect();
        let maps = FeatureMaps::fit(&train, pipeline)?;
        let dataset = build_dataset_with("fold", &train, &maps)?;
        let classifier = spec.fit(&dataset)?;

        let mut cm = ConfusionMatrix::default();
        for &i in &test {
            let (record, actual) = labeled[i];
            cm.record(actual, classifier.predict_class(&maps.context(record)));
        }
        pooled += cm;
        results.push(FoldResult {
            fold: f,
            test_indices: test,
            train_size: train.len(),
            confusion: cm,
            summary: Summary::from_confusion(&cm),
        });
    }

    let fold_summaries: Vec<Summary> = results.iter().map(|r| r.summary).collect();
    Ok(EvalReport {
        model: spec.kind(),
        k: opts.k,
        n_examples: n,
        confusion: pooled,
        per_class: BehaviorClass::ALL.map(|c| class_metrics(&pooled, c)),
        summary: Summary::from_confusion(&pooled),
        folds: results,
        fold_mean: Summary::mean(&fold_summaries),
    })
}

/// Dataset-averaged headline metrics of one model.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ModelAverages {
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
    pub kappa: f64,
}

impl ModelAverages {
    fn of(reports: &[&EvalReport]) -> Self {
        if reports.is_empty() {
            return Self::default();
        }
        let n = reports.len() as f64;
        let avg = |f: fn(&EvalReport) -> f64| reports.iter().map(|r| f(r)).sum::<f64>() / n;
        Self {
            precision: avg(|r| r.summary.weighted.precision),
            recall: avg(|r| r.summary.weighted.recall),
            f_measure: avg(|r| r.summary.weighted.f_measure),
            kappa: avg(|r| r.summary.kappa),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetComparison {
    pub name: String,
    pub miim: EvalReport,
    pub emiim: EvalReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub options: CvOptions,
    pub datasets: Vec<DatasetComparison>,
    pub miim: ModelAverages,
    pub emiim: ModelAverages,
}

/// Cross-validates both models on every log with the same fold options,
/// so both see identical train/test partitions, and averages the pooled
/// weighted precision, recall, f-measure and kappa across logs.
pub fn compare_models(
    logs: &[(String, Vec<CallRecord>)],
    pipeline: &PipelineConfig,
    tree: &TreeConfig,
    forest: &ForestConfig,
    opts: &CvOptions,
) -> Result<Comparison> {
    if logs.is_empty() {
        return Err(Error::InvalidInput("compare needs at least one log".into()));
    }
    let miim = ModelSpec::Miim {
        tree: *tree,
        seed: opts.seed,
    };
    let emiim = ModelSpec::Emiim(*forest);
    let mut datasets = Vec::with_capacity(logs.len());
    for (name, records) in logs {
        datasets.push(DatasetComparison {
            name: name.clone(),
            miim: cross_validate(records, pipeline, &miim, opts)?,
            emiim: cross_validate(records, pipeline, &emiim, opts)?,
        });
    }
    let m: Vec<&EvalReport> = datasets.iter().map(|d| &d.miim).collect();
    let e: Vec<&EvalReport> = datasets.iter().map(|d| &d.emiim).collect();
    Ok(Comparison {
        options: *opts,
        miim: ModelAverages::of(&m),
        emiim: ModelAverages::of(&e),
        datasets,
    })
}
