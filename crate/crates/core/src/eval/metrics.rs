use alloc::format;

use crate::domain::BehaviorClass;
use crate::error::{Error, Result};

const C: usize = BehaviorClass::COUNT;

/// Rows are actual classes, columns predicted classes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct ConfusionMatrix {
    counts: [[u64; C]; C],
}

impl ConfusionMatrix {
    pub fn new(counts: [[u64; C]; C]) -> Self {
        Self { counts }
    }

    pub fn record(&mut self, actual: BehaviorClass, predicted: BehaviorClass) {
        self.counts[actual.index()][predicted.index()] += 1;
    }

    pub fn get(&self, actual: BehaviorClass, predicted: BehaviorClass) -> u64 {
        self.counts[actual.index()][predicted.index()]
    }

    pub fn counts(&self) -> &[[u64; C]; C] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// Examples whose actual class is `class` (its support).
    pub fn row_total(&self, class: BehaviorClass) -> u64 {
        self.counts[class.index()].iter().sum()
    }

    pub fn col_total(&self, class: BehaviorClass) -> u64 {
        self.counts.iter().map(|row| row[class.index()]).sum()
    }

    pub fn trace(&self) -> u64 {
        (0..C).map(|i| self.counts[i][i]).sum()
    }

    pub fn accuracy(&self) -> f64 {
        ratio(self.trace(), self.total()).0
    }

    pub fn is_diagonal(&self) -> bool {
        (0..C).all(|i| (0..C).all(|j| i == j || self.counts[i][j] == 0))
    }
}

impl core::ops::AddAssign for ConfusionMatrix {
    fn add_assign(&mut self, rhs: Self) {
        for i in 0..C {
            for j in 0..C {
                self.counts[i][j] += rhs.counts[i][j];
            }
        }
    }
}

pub fn confusion(actual: &[BehaviorClass], predicted: &[BehaviorClass]) -> Result<ConfusionMatrix> {
    if actual.len() != predicted.len() {
        return Err(Error::InvalidInput(format!(
            "{} actual labels but {} predictions",
            actual.len(),
            predicted.len()
        )));
    }
    if actual.is_empty() {
        return Err(Error::InvalidInput("no labels to compare".into()));
    }
    let mut cm = ConfusionMatrix::default();
    for (&a, &p) in actual.iter().zip(predicted) {
        cm.record(a, p);
    }
    Ok(cm)
}

/// `num / den`, with 0/0 reported as `(0.0, true)`.
fn ratio(num: u64, den: u64) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn f_measure(precision: f64, recall: f64) -> f64 {
    let s = precision + recall;
    if s == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / s
    }
}

/// One-vs-rest rates for a single class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassMetrics {
    pub class: BehaviorClass,
    pub tp_rate: f64,
    pub fp_rate: f64,
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
    pub support: u64,
    /// Some ratio had a zero denominator and was reported as 0.
    pub zero_division: bool,
}

pub fn class_metrics(cm: &ConfusionMatrix, class: BehaviorClass) -> ClassMetrics {
    let tp = cm.get(class, class);
    let fp = cm.col_total(class) - tp;
    let fn_ = cm.row_total(class) - tp;
    let tn = cm.total() - tp - fp - fn_;
    let (recall, r0) = ratio(tp, tp + fn_);
    let (fp_rate, f0) = ratio(fp, fp + tn);
    let (precision, p0) = ratio(tp, tp + fp);
    ClassMetrics {
        class,
        tp_rate: recall,
        fp_rate,
        precision,
        recall,
        f_measure: f_measure(precision, recall),
        support: tp + fn_,
        zero_division: r0 || f0 || p0,
    }
}

/// Cohen's kappa with chance agreement from the matrix marginals. Defined
/// as 0 when chance agreement is 1 or the matrix is empty.
pub fn kappa(cm: &ConfusionMatrix) -> f64 {
    let n = cm.total();
    if n == 0 {
        return 0.0;
    }
    let nf = n as f64;
    let observed = cm.trace() as f64 / nf;
    let expected: f64 = BehaviorClass::ALL
        .iter()
        .map(|&k| cm.row_total(k) as f64 * cm.col_total(k) as f64)
        .sum::<f64>()
        / (nf * nf);
    if expected >= 1.0 {
        0.0
    } else {
        (observed - expected) / (1.0 - expected)
    }
}

/// `sum(value_k * support_k) / sum(support_k)`.
pub fn weighted_average(values: &[f64], supports: &[u64]) -> Result<f64> {
    if values.len() != supports.len() {
        return Err(Error::InvalidInput(format!(
            "{} values but {} supports",
            values.len(),
            supports.len()
        )));
    }
    let total: u64 = supports.iter().sum();
    if total == 0 {
        return Err(Error::InvalidInput("total support is zero".into()));
    }
    let num: f64 = values.iter().zip(supports).map(|(&v, &s)| v * s as f64).sum();
    Ok(num / total as f64)
}

/// Support-weighted means of the per-class metrics.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct WeightedMetrics {
    pub tp_rate: f64,
    pub fp_rate: f64,
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
}

/// Headline numbers for one confusion matrix.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Summary {
    pub accuracy: f64,
    pub kappa: f64,
    pub weighted: WeightedMetrics,
}

impl Summary {
    pub fn from_confusion(cm: &ConfusionMatrix) -> Self {
        let per_class = BehaviorClass::ALL.map(|c| class_metrics(cm, c));
        let supports = per_class.map(|m| m.support);
        let w = |f: fn(&ClassMetrics) -> f64| {
            weighted_average(&per_class.map(|m| f(&m)), &supports).unwrap_or(0.0)
        };
        Self {
            accuracy: cm.accuracy(),
            kappa: kappa(cm),
            weighted: WeightedMetrics {
                tp_rate: w(|m| m.tp_rate),
                fp_rate: w(|m| m.fp_rate),
                precision: w(|m| m.precision),
                recall: w(|m| m.recall),
                f_measure: w(|m| m.f_measure),
            },
        }
    }

    /// Component-wise mean; zero for an empty slice.
    pub fn mean(items: &[Summary]) -> Self {
        if items.is_empty() {
            return Self::default();
        }
        let n = items.len() as f64;
        let avg = |f: fn(&Summary) -> f64| items.iter().map(f).sum::<f64>() / n;
        Self {
            accuracy: avg(|s| s.accuracy),
            kappa: avg(|s| s.kappa),
            weighted: WeightedMetrics {
                tp_rate: avg(|s| s.weighted.tp_rate),
                fp_rate: avg(|s| s.weighted.fp_rate),
                precision: avg(|s| s.weighted.precision),
                recall: avg(|s| s.weighted.recall),
                f_measure: avg(|s| s.weighted.f_measure),
            },
        }
    }
}
