//! Behavior-oriented time segmentation.
//!
//! Each day-of-week timeline is cut into fixed base slots, every slot gets
//! the dominant class of the records falling into it, and adjacent slots are
//! merged left to right while their dominant classes agree. Empty slots are
//! absorbed into their left neighbor; leading empty slots join the first
//! non-empty segment. The resulting segment ids become the temporal context
//! feature.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use chrono::{NaiveDateTime, Timelike, Weekday, Datelike};

use crate::domain::{BehaviorClass, ClassCounts};
use crate::error::{Error, Result};

pub const MINUTES_PER_DAY: u32 = 1440;

pub const WEEK: [Weekday; 7] = [
    Weekday::Mon,
    Weekday::Tue,
    Weekday::Wed,
    Weekday::Thu,
    Weekday::Fri,
    Weekday::Sat,
    Weekday::Sun,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SegmentationConfig {
    /// Base slot width in minutes; must divide 1440.
    pub base_granularity_min: u32,
    /// Fit one timeline per day of week rather than one shared timeline.
    pub per_day: bool,
}

impl Default for SegmentationConfig {
    fn default() -> Self {
        Self {
            base_granularity_min: 60,
            per_day: true,
        }
    }
}

impl SegmentationConfig {
    pub fn validate(&self) -> Result<()> {
        let g = self.base_granularity_min;
        if g == 0 || !MINUTES_PER_DAY.is_multiple_of(g) {
            return Err(Error::InvalidConfig(format!(
                "base granularity {g} does not divide {MINUTES_PER_DAY}"
            )));
        }
        Ok(())
    }
}

/// Half-open interval `[start_minute, end_minute)` of one day.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub start_minute: u32,
    pub end_minute: u32,
    pub id: String,
    pub dominant: Option<BehaviorClass>,
}

impl Segment {
    pub fn contains(&self, minute: u32) -> bool {
        self.start_minute <= minute && minute < self.end_minute
    }
}

/// Fitted segments. With `per_day` there are seven timelines (Mon..Sun);
/// otherwise a single timeline shared by every day.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentationModel {
    config: SegmentationConfig,
    timelines: Vec<Vec<Segment>>,
}

impl SegmentationModel {
    /// Assembles a model from explicit timelines, checking every invariant:
    /// contiguous coverage of `[0, 1440)`, no adjacent equal non-empty
    /// dominant classes, and unique ids.
    pub fn from_timelines(config: SegmentationConfig, timelines: Vec<Vec<Segment>>) -> Result<Self> {
        config.validate()?;
        let expected = if config.per_day { 7 } else { 1 };
        if timelines.len() != expected {
            return Err(Error::InvalidInput(format!(
                "expected {expected} timelines, found {}",
                timelines.len()
            )));
        }
        let mut ids: Vec<&str> = Vec::new();
        for (t, segments) in timelines.iter().enumerate() {
            let mut cursor = 0;
            for (i, seg) in segments.iter().enumerate() {
                if seg.start_minute != cursor || seg.end_minute <= seg.start_minute {
                    return Err(Error::InvalidInput(format!(
                        "timeline {t} segment {i} [{}, {}) breaks contiguity",
                        seg.start_minute, seg.end_minute
                    )));
                }
                if i > 0 {
                    let prev = segments[i - 1].dominant;
                    if prev.is_some() && prev == seg.dominant {
                        return Err(Error::InvalidInput(format!(
                            "timeline {t} segments {} and {i} share a dominant class",
                            i - 1
                        )));
                    }
                }
                ids.push(&seg.id);
                cursor = seg.end_minute;
            }
            if cursor != MINUTES_PER_DAY {
                return Err(Error::InvalidInput(format!(
                    "timeline {t} ends at minute {cursor}"
                )));
            }
        }
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidInput("duplicate segment id".into()));
        }
        Ok(Self { config, timelines })
    }

    pub fn config(&self) -> SegmentationConfig {
        self.config
    }

    pub fn per_day(&self) -> bool {
        self.config.per_day
    }

    /// Segments for a day, in time order.
    pub fn day(&self, day: Weekday) -> &[Segment] {
        let t = if self.config.per_day {
            day.num_days_from_monday() as usize
        } else {
            0
        };
        &self.timelines[t]
    }

    pub fn timelines(&self) -> &[Vec<Segment>] {
        &self.timelines
    }

    pub fn segments(&self) -> impl Iterator<Item = &Segment> {
        self.timelines.iter().flatten()
    }

    /// Every segment id, in Mon..Sun then time order.
    pub fn segment_ids(&self) -> impl Iterator<Item = &str> {
        self.segments().map(|s| s.id.as_str())
    }

    pub fn lookup(&self, day: Weekday, minute_of_day: u32) -> &Segment {
        let segments = self.day(day);
        let minute = minute_of_day.min(MINUTES_PER_DAY - 1);
        let pos = segments.partition_point(|s| s.end_minute <= minute);
        &segments[pos]
    }
}

/// Segment id containing `timestamp`. Intervals are half-open, so a minute
/// equal to a segment's end belongs to the following segment.
pub fn lookup_segment(model: &SegmentationModel, timestamp: NaiveDateTime) -> &str {
    let minute = timestamp.hour() * 60 + timestamp.minute();
    &model.lookup(timestamp.weekday(), minute).id
}

/// Fits segments from labeled timestamps.
pub fn fit_segments(
    records: &[(NaiveDateTime, BehaviorClass)],
    config: &SegmentationConfig,
) -> Result<SegmentationModel> {
    config.validate()?;
    let g = config.base_granularity_min;
    let n_slots = (MINUTES_PER_DAY / g) as usize;
    let n_timelines = if config.per_day { 7 } else { 1 };

    let mut slots = alloc::vec![ClassCounts::default(); n_timelines * n_slots];
    for (ts, class) in records {
        let t = if config.per_day {
            ts.weekday().num_days_from_monday() as usize
        } else {
            0
        };
        let minute = ts.hour() * 60 + ts.minute();
        slots[t * n_slots + (minute / g) as usize].add(*class);
    }

    let mut next_id = 1usize;
    let mut timelines = Vec::with_capacity(n_timelines);
    for t in 0..n_timelines {
        let dominant: Vec<Option<BehaviorClass>> = slots[t * n_slots..(t + 1) * n_slots]
            .iter()
            .map(|c| (c.total() > 0).then(|| c.majority()))
            .collect();
        let mut segments: Vec<Segment> = Vec::new();
        // (start, end, dominant) of the segment being grown
        let mut open: (u32, u32, Option<BehaviorClass>) = (0, 0, None);
        for (s, slot_class) in dominant.into_iter().enumerate() {
            let end = (s as u32 + 1) * g;
            match (open.2, slot_class) {
                (_, None) => open.1 = end,
                (None, Some(c)) => open = (open.0, end, Some(c)),
                (Some(cur), Some(c)) if cur == c => open.1 = end,
                (Some(_), Some(c)) => {
                    segments.push(new_segment(open, &mut next_id));
                    open = (open.1, end, Some(c));
                }
            }
        }
        segments.push(new_segment(open, &mut next_id));
        timelines.push(segments);
    }
    SegmentationModel::from_timelines(*config, timelines)
}

fn new_segment(open: (u32, u32, Option<BehaviorClass>), next_id: &mut usize) -> Segment {
    let id = format!("S{}", *next_id);
    *next_id += 1;
    Segment {
        start_minute: open.0,
        end_minute: open.1,
        id,
        dominant: open.2,
    }
}
