//! Records, context vectors, behavior classes and datasets shared by every
//! stage of the pipeline.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use chrono::{Datelike, NaiveDateTime, Timelike, Weekday};

use crate::error::{Error, Result};

/// Reserved category for a missing location or contact.
pub const UNKNOWN: &str = "UNKNOWN";
/// Reserved category for contacts outside the frequent set.
pub const RARE: &str = "RARE";

/// Names of the context fields in the default configuration (D = 4).
pub const FEATURE_NAMES: [&str; 4] = ["segment", "day", "location", "contact"];

pub const SEGMENT_FEATURE: usize = 0;
pub const DAY_FEATURE: usize = 1;
pub const LOCATION_FEATURE: usize = 2;
pub const CONTACT_FEATURE: usize = 3;

/// Outcome of an incoming call. Numeric ids are stable and used for
/// serialization and for every tie-break (smaller id wins).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[repr(u8)]
pub enum BehaviorClass {
    Accept = 1,
    Reject = 2,
    Missed = 3,
}

impl BehaviorClass {
    pub const COUNT: usize = 3;
    pub const ALL: [BehaviorClass; 3] = [Self::Accept, Self::Reject, Self::Missed];

    pub fn id(self) -> u8 {
        self as u8
    }

    /// Zero-based position, `id - 1`.
    pub fn index(self) -> usize {
        self as usize - 1
    }

    pub fn from_id(id: u8) -> Option<Self> {
        match id {
            1 => Some(Self::Accept),
            2 => Some(Self::Reject),
            3 => Some(Self::Missed),
            _ => None,
        }
    }

    pub fn from_index(index: usize) -> Option<Self> {
        u8::try_from(index + 1).ok().and_then(Self::from_id)
    }

    /// Lowercase name used in scenario files and CLI output.
    pub fn name(self) -> &'static str {
        match self {
            Self::Accept => "accept",
            Self::Reject => "reject",
            Self::Missed => "missed",
        }
    }
}

impl fmt::Display for BehaviorClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Accept => "Accept",
            Self::Reject => "Reject",
            Self::Missed => "Missed",
        })
    }
}

impl FromStr for BehaviorClass {
    type Err = Error;

    /// Accepts a class name (`accept`), a numeric id (`1`) or `class 1`,
    /// case-insensitively.
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        let lower = t.to_ascii_lowercase();
        let id_part = lower.strip_prefix("class").map(str::trim).unwrap_or(&lower);
        if let Ok(id) = id_part.parse::<u8>() {
            return Self::from_id(id)
                .ok_or_else(|| Error::InvalidInput(format!("unknown class id {id}")));
        }
        match lower.as_str() {
            "accept" => Ok(Self::Accept),
            "reject" => Ok(Self::Reject),
            "missed" => Ok(Self::Missed),
            _ => Err(Error::InvalidInput(format!("unknown behavior class {t:?}"))),
        }
    }
}

/// Per-class tallies indexed by [`BehaviorClass::index`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct ClassCounts([u32; 3]);

impl ClassCounts {
    pub const fn new(counts: [u32; 3]) -> Self {
        Self(counts)
    }

    pub fn from_labels<I: IntoIterator<Item = BehaviorClass>>(labels: I) -> Self {
        let mut counts = Self::default();
        for label in labels {
            counts.add(label);
        }
        counts
    }

    pub fn add(&mut self, class: BehaviorClass) {
        self.0[class.index()] += 1;
    }

    pub fn get(&self, class: BehaviorClass) -> u32 {
        self.0[class.index()]
    }

    pub fn as_array(&self) -> [u32; 3] {
        self.0
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }

    pub fn total(&self) -> u64 {
        self.0.iter().map(|&c| u64::from(c)).sum()
    }

    /// Class with the highest count; ties go to the smaller class id.
    pub fn majority(&self) -> BehaviorClass {
        let mut best = BehaviorClass::Accept;
        for class in BehaviorClass::ALL {
            if self.get(class) > self.get(best) {
                best = class;
            }
        }
        best
    }

    /// Number of classes with a non-zero count.
    pub fn distinct(&self) -> usize {
        self.0.iter().filter(|&&c| c > 0).count()
    }

    /// `count_k / total` for each class.
    pub fn priors(&self) -> Result<[f64; 3]> {
        let total = self.total();
        if total == 0 {
            return Err(Error::EmptyDataset);
        }
        let t = total as f64;
        Ok(self.0.map(|c| f64::from(c) / t))
    }
}

impl core::ops::AddAssign for ClassCounts {
    fn add_assign(&mut self, rhs: Self) {
        for (a, b) in self.0.iter_mut().zip(rhs.0) {
            *a += b;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CallType {
    Incoming,
    Outgoing,
    Missed,
}

impl CallType {
    pub fn name(self) -> &'static str {
        match self {
            Self::Incoming => "incoming",
            Self::Outgoing => "outgoing",
            Self::Missed => "missed",
        }
    }
}

impl FromStr for CallType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "incoming" | "in" => Ok(Self::Incoming),
            "outgoing" | "out" => Ok(Self::Outgoing),
            "missed" => Ok(Self::Missed),
            other => Err(Error::InvalidInput(format!("unknown call type {other:?}"))),
        }
    }
}

/// One raw call-log event. Timestamps are local wall-clock time with
/// minute precision (seconds are dropped on construction).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CallRecord {
    timestamp: NaiveDateTime,
    contact: String,
    call_type: CallType,
    duration_s: u32,
    location: Option<String>,
}

impl CallRecord {
    /// Fails when a missed call carries a non-zero duration.
    pub fn new(
        timestamp: NaiveDateTime,
        contact: impl Into<String>,
        call_type: CallType,
        duration_s: u32,
        location: Option<String>,
    ) -> Result<Self> {
        if call_type == CallType::Missed && duration_s != 0 {
            return Err(Error::InvalidInput(format!(
                "missed call with non-zero duration {duration_s}"
            )));
        }
        let timestamp = timestamp
            .with_second(0)
            .and_then(|t| t.with_nanosecond(0))
            .unwrap_or(timestamp);
        let location = location.filter(|l| !l.trim().is_empty());
        Ok(Self {
            timestamp,
            contact: contact.into(),
            call_type,
            duration_s,
            location,
        })
    }

    pub fn timestamp(&self) -> NaiveDateTime {
        self.timestamp
    }

    /// Raw contact identifier; empty when the log had none.
    pub fn contact(&self) -> &str {
        &self.contact
    }

    pub fn call_type(&self) -> CallType {
        self.call_type
    }

    pub fn duration_s(&self) -> u32 {
        self.duration_s
    }

    pub fn location(&self) -> Option<&str> {
        self.location.as_deref()
    }

    pub fn weekday(&self) -> Weekday {
        self.timestamp.weekday()
    }

    pub fn minute_of_day(&self) -> u32 {
        self.timestamp.hour() * 60 + self.timestamp.minute()
    }

    /// Behavior label, or `None` for outgoing calls.
    pub fn behavior(&self) -> Option<BehaviorClass> {
        crate::context::derive_behavior_class(self.call_type, self.duration_s)
    }
}

pub fn weekday_label(day: Weekday) -> &'static str {
    match day {
        Weekday::Mon => "Mon",
        Weekday::Tue => "Tue",
        Weekday::Wed => "Wed",
        Weekday::Thu => "Thu",
        Weekday::Fri => "Fri",
        Weekday::Sat => "Sat",
        Weekday::Sun => "Sun",
    }
}

pub fn parse_weekday(s: &str) -> Option<Weekday> {
    s.trim().parse::<Weekday>().ok()
}

/// Categorical context tuple fed to the classifiers.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ContextVector(Vec<String>);

impl ContextVector {
    pub fn new(values: Vec<String>) -> Self {
        Self(values)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, feature: usize) -> Option<&str> {
        self.0.get(feature).map(String::as_str)
    }

    pub fn values(&self) -> &[String] {
        &self.0
    }
}

impl<S: ToString> FromIterator<S> for ContextVector {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        Self(iter.into_iter().map(|s| s.to_string()).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledExample {
    pub context: ContextVector,
    pub label: BehaviorClass,
}

impl LabeledExample {
    pub fn new(context: ContextVector, label: BehaviorClass) -> Self {
        Self { context, label }
    }
}

/// Labeled examples for one user, with the per-feature vocabulary fixed at
/// build time.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    user_id: String,
    feature_names: Vec<String>,
    feature_vocab: Vec<Vec<String>>,
    examples: Vec<LabeledExample>,
    class_counts: ClassCounts,
}

impl Dataset {
    /// Builds a dataset whose vocabulary is exactly the observed values.
    pub fn new(
        user_id: impl Into<String>,
        feature_names: Vec<String>,
        examples: Vec<LabeledExample>,
    ) -> Result<Self> {
        let vocab = vec_of_sets(feature_names.len());
        Self::with_vocab(user_id, feature_names, vocab, examples)
    }

    /// Builds a dataset whose vocabulary is `extra_vocab` merged with the
    /// observed values, each feature sorted and deduplicated.
    pub fn with_vocab(
        user_id: impl Into<String>,
        feature_names: Vec<String>,
        extra_vocab: Vec<BTreeSet<String>>,
        examples: Vec<LabeledExample>,
    ) -> Result<Self> {
        if examples.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let d = feature_names.len();
        if d == 0 || extra_vocab.len() != d {
            return Err(Error::InvalidInput(format!(
                "{} feature names but {} vocabularies",
                d,
                extra_vocab.len()
            )));
        }
        let mut vocab = extra_vocab;
        for (row, example) in examples.iter().enumerate() {
            if example.context.len() != d {
                return Err(Error::InvalidInput(format!(
                    "example {row} has {} fields, expected {d}",
                    example.context.len()
                )));
            }
            for (set, value) in vocab.iter_mut().zip(example.context.values()) {
                if !set.contains(value) {
                    set.insert(value.clone());
                }
            }
        }
        let class_counts = ClassCounts::from_labels(examples.iter().map(|e| e.label));
        Ok(Self {
            user_id: user_id.into(),
            feature_names,
            feature_vocab: vocab.into_iter().map(|s| s.into_iter().collect()).collect(),
            examples,
            class_counts,
        })
    }

    pub fn user_id(&self) -> &str {
        &self.user_id
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    /// Number of context fields, D.
    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    /// Sorted category list per feature.
    pub fn feature_vocab(&self) -> &[Vec<String>] {
        &self.feature_vocab
    }

    pub fn examples(&self) -> &[LabeledExample] {
        &self.examples
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn class_counts(&self) -> ClassCounts {
        self.class_counts
    }

    pub fn class_priors(&self) -> Result<[f64; 3]> {
        class_priors(self)
    }
}

/// Empirical class distribution `class_counts[k] / N`.
pub fn class_priors(dataset: &Dataset) -> Result<[f64; 3]> {
    dataset.class_counts().priors()
}

fn vec_of_sets(n: usize) -> Vec<BTreeSet<String>> {
    (0..n).map(|_| BTreeSet::new()).collect()
}

pub fn default_feature_names() -> Vec<String> {
    FEATURE_NAMES.iter().map(|s| s.to_string()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use chrono::NaiveDate;

    fn counts_dataset(a: usize, r: usize, m: usize) -> Dataset {
        let mut examples = Vec::new();
        for (class, n) in [
            (BehaviorClass::Accept, a),
            (BehaviorClass::Reject, r),
            (BehaviorClass::Missed, m),
        ] {
            for _ in 0..n {
                examples.push(LabeledExample::new(["S1", "Mon", "home", "C1"].into_iter().collect(), class));
            }
        }
        Dataset::new("u", default_feature_names(), examples).unwrap()
    }

    #[test]
    fn priors_single_class() {
        assert_eq!(class_priors(&counts_dataset(10, 0, 0)).unwrap(), [1.0, 0.0, 0.0]);
    }

    #[test]
    fn priors_uniform() {
        let p = class_priors(&counts_dataset(5, 5, 5)).unwrap();
        for v in p {
            assert!((v - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn priors_hand_arithmetic() {
        let p = class_priors(&counts_dataset(7, 2, 1)).unwrap();
        assert!((p[0] - 0.7).abs() < 1e-12);
        assert!((p[1] - 0.2).abs() < 1e-12);
        assert!((p[2] - 0.1).abs() < 1e-12);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn empty_dataset_is_an_error() {
        assert_eq!(
            Dataset::new("u", default_feature_names(), vec![]).unwrap_err(),
            Error::EmptyDataset
        );
        assert_eq!(ClassCounts::default().priors().unwrap_err(), Error::EmptyDataset);
    }

    #[test]
    fn class_ids_are_stable() {
        assert_eq!(BehaviorClass::Accept.id(), 1);
        assert_eq!(BehaviorClass::Reject.id(), 2);
        assert_eq!(BehaviorClass::Missed.id(), 3);
        for c in BehaviorClass::ALL {
            assert_eq!(BehaviorClass::from_id(c.id()), Some(c));
            assert_eq!(BehaviorClass::from_index(c.index()), Some(c));
            assert_eq!(c.name().parse::<BehaviorClass>().unwrap(), c);
        }
        assert_eq!("Class 2".parse::<BehaviorClass>().unwrap(), BehaviorClass::Reject);
        assert!("4".parse::<BehaviorClass>().is_err());
    }

    #[test]
    fn majority_breaks_ties_toward_smaller_id() {
        assert_eq!(ClassCounts::new([0, 4, 4]).majority(), BehaviorClass::Reject);
        assert_eq!(ClassCounts::new([0, 0, 0]).majority(), BehaviorClass::Accept);
        assert_eq!(ClassCounts::new([1, 2, 3]).majority(), BehaviorClass::Missed);
    }

    #[test]
    fn missed_call_requires_zero_duration() {
        let ts = NaiveDate::from_ymd_opt(2004, 9, 13).unwrap().and_hms_opt(9, 15, 42).unwrap();
        assert!(CallRecord::new(ts, "x", CallType::Missed, 3, None).is_err());
        let r = CallRecord::new(ts, "x", CallType::Missed, 0, Some(String::from("  "))).unwrap();
        assert_eq!(r.location(), None);
        assert_eq!(r.minute_of_day(), 9 * 60 + 15);
        assert_eq!(weekday_label(r.weekday()), "Mon");
    }

    #[test]
    fn vocab_covers_every_example_value() {
        let examples = vec![
            LabeledExample::new(["S2", "Tue", "office", "C1"].into_iter().collect(), BehaviorClass::Accept),
            LabeledExample::new(["S1", "Mon", "home", "RARE"].into_iter().collect(), BehaviorClass::Missed),
        ];
        let ds = Dataset::new("u", default_feature_names(), examples).unwrap();
        for e in ds.examples() {
            for (f, v) in e.context.values().iter().enumerate() {
                assert!(ds.feature_vocab()[f].contains(v));
            }
        }
        assert_eq!(ds.feature_vocab()[0], vec![String::from("S1"), String::from("S2")]);
        assert_eq!(ds.class_counts().total(), 2);
    }
}
