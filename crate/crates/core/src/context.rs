//! Behavior labeling and context extraction from call records.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::domain::{
    default_feature_names, weekday_label, BehaviorClass, CallRecord, CallType, ContextVector,
    Dataset, LabeledExample, RARE, UNKNOWN,
};
use crate::error::{Error, Result};
use crate::segmentation::{fit_segments, lookup_segment, SegmentationConfig, SegmentationModel, WEEK};

/// Maps call type and duration onto a behavior class.
///
/// Answered incoming calls (positive duration) are `Accept`, incoming calls
/// with zero duration were declined (`Reject`), missed calls are `Missed`.
/// Outgoing calls carry no label.
pub fn derive_behavior_class(call_type: CallType, duration_s: u32) -> Option<BehaviorClass> {
    match call_type {
        CallType::Incoming if duration_s > 0 => Some(BehaviorClass::Accept),
        CallType::Incoming => Some(BehaviorClass::Reject),
        CallType::Missed => Some(BehaviorClass::Missed),
        CallType::Outgoing => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SocialContextConfig {
    pub top_k: usize,
    pub min_count: usize,
}

impl Default for SocialContextConfig {
    fn default() -> Self {
        Self {
            top_k: 20,
            min_count: 2,
        }
    }
}

impl SocialContextConfig {
    pub fn validate(&self) -> Result<()> {
        if self.top_k == 0 || self.min_count == 0 {
            return Err(Error::InvalidConfig(
                "social context top_k and min_count must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Relational contact ids derived from call frequency.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SocialMap {
    ids: BTreeMap<String, String>,
}

impl SocialMap {
    pub fn from_pairs<I: IntoIterator<Item = (String, String)>>(pairs: I) -> Self {
        Self {
            ids: pairs.into_iter().collect(),
        }
    }

    /// Empty contacts are `UNKNOWN`; contacts never seen are `RARE`.
    pub fn lookup(&self, contact: &str) -> &str {
        if contact.trim().is_empty() {
            return UNKNOWN;
        }
        self.ids.get(contact).map(String::as_str).unwrap_or(RARE)
    }

    /// `(raw contact, id)` pairs ordered by raw contact.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.ids.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Every id this map can return, reserved categories included.
    pub fn categories(&self) -> BTreeSet<String> {
        let mut out: BTreeSet<String> = self.ids.values().cloned().collect();
        out.insert(RARE.to_string());
        out.insert(UNKNOWN.to_string());
        out
    }
}

/// Ranks contacts by record count (ties by first appearance); the top
/// `top_k` with at least `min_count` records get ids `C1..Ck`, all other
/// non-empty contacts map to `RARE`.
pub fn derive_social_context(records: &[CallRecord], cfg: &SocialContextConfig) -> Result<SocialMap> {
    cfg.validate()?;
    if records.is_empty() {
        return Err(Error::EmptyLog);
    }
    // contact -> (count, first appearance)
    let mut seen: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for (pos, record) in records.iter().enumerate() {
        let contact = record.contact();
        if contact.trim().is_empty() {
            continue;
        }
        seen.entry(contact).or_insert((0, pos)).0 += 1;
    }
    let mut ranked: Vec<(&str, usize, usize)> = seen.into_iter().map(|(c, (n, first))| (c, n, first)).collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)));

    let mut ids = BTreeMap::new();
    for (rank, (contact, count, _)) in ranked.into_iter().enumerate() {
        let id = if rank < cfg.top_k && count >= cfg.min_count {
            format!("C{}", rank + 1)
        } else {
            RARE.to_string()
        };
        ids.insert(contact.to_string(), id);
    }
    Ok(SocialMap { ids })
}

/// Settings for turning records into contexts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PipelineConfig {
    pub segmentation: SegmentationConfig,
    pub social: SocialContextConfig,
}

/// Fitted segmentation and social map: everything needed to turn a raw
/// record into a [`ContextVector`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureMaps {
    pub segmentation: SegmentationModel,
    pub social: SocialMap,
}

impl FeatureMaps {
    /// Segmentation is fit on the labeled records; the social map on all
    /// of them (outgoing calls count toward contact frequency).
    pub fn fit(records: &[CallRecord], cfg: &PipelineConfig) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::EmptyLog);
        }
        let labeled: Vec<_> = records
            .iter()
            .filter_map(|r| r.behavior().map(|c| (r.timestamp(), c)))
            .collect();
        let segmentation = fit_segments(&labeled, &cfg.segmentation)?;
        let social = derive_social_context(records, &cfg.social)?;
        Ok(Self { segmentation, social })
    }

    pub fn context(&self, record: &CallRecord) -> ContextVector {
        ContextVector::new(alloc::vec![
            lookup_segment(&self.segmentation, record.timestamp()).to_string(),
            weekday_label(record.weekday()).to_string(),
            record.location().unwrap_or(UNKNOWN).to_string(),
            self.social.lookup(record.contact()).to_string(),
        ])
    }

    /// Per-feature categories reachable through these maps. Locations only
    /// contribute the reserved `UNKNOWN`; observed labels are added by the
    /// dataset itself.
    pub fn vocabulary(&self) -> Vec<BTreeSet<String>> {
        let segments = self.segmentation.segment_ids().map(String::from).collect();
        let days = WEEK.iter().map(|d| weekday_label(*d).to_string()).collect();
        let mut locations = BTreeSet::new();
        locations.insert(UNKNOWN.to_string());
        alloc::vec![segments, days, locations, self.social.categories()]
    }
}

/// One example per incoming or missed record, in record order.
pub fn build_dataset(
    user_id: &str,
    records: &[CallRecord],
    segmentation: &SegmentationModel,
    social: &SocialMap,
) -> Result<Dataset> {
    let maps = FeatureMaps {
        segmentation: segmentation.clone(),
        social: social.clone(),
    };
    build_dataset_with(user_id, records, &maps)
}

pub fn build_dataset_with(user_id: &str, records: &[CallRecord], maps: &FeatureMaps) -> Result<Dataset> {
    let examples: Vec<LabeledExample> = records
        .iter()
        .filter_map(|r| r.behavior().map(|label| LabeledExample::new(maps.context(r), label)))
        .collect();
    if examples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Dataset::with_vocab(user_id, default_feature_names(), maps.vocabulary(), examples)
}
