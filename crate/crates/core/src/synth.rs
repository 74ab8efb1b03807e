//! Synthetic call logs from planted context rules.
//!
//! A rule set declares time slots, locations and contacts (with sampling
//! weights) plus an ordered list of `IF ... THEN class` rules. Each
//! generated call samples a context, takes the class of the first matching
//! rule (or the default), flips it to a different class with probability
//! `noise`, and is rendered back into a call record.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use chrono::{Datelike, Days, NaiveDate, NaiveTime, Weekday};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::domain::{weekday_label, BehaviorClass, CallRecord, CallType, ClassCounts};
use crate::error::{Error, Result};
use crate::segmentation::MINUTES_PER_DAY;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Field {
    Segment,
    Day,
    Location,
    Contact,
}

impl Field {
    pub fn name(self) -> &'static str {
        match self {
            Self::Segment => "segment",
            Self::Day => "day",
            Self::Location => "location",
            Self::Contact => "contact",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "segment" | "slot" | "time" => Some(Self::Segment),
            "day" => Some(Self::Day),
            "location" => Some(Self::Location),
            "contact" => Some(Self::Contact),
            _ => None,
        }
    }
}

/// `field = value` (or `!=` when negated).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Condition {
    pub field: Field,
    pub value: String,
    pub negated: bool,
}

/// Conjunction of conditions; an empty list matches everything.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    pub conditions: Vec<Condition>,
    pub class: BehaviorClass,
}

/// A named window `[start_minute, end_minute)` on the listed days.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSlot {
    pub name: String,
    pub days: Vec<Weekday>,
    pub start_minute: u32,
    pub end_minute: u32,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Choice {
    pub name: String,
    pub weight: f64,
}

/// A generator-side contact: `name` is used by rules, `number` is what
/// appears in the log.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactSpec {
    pub name: String,
    pub number: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedRuleSet {
    pub rules: Vec<Rule>,
    pub default_class: BehaviorClass,
    pub noise: f64,
    pub n_records: usize,
    pub seed: u64,
    pub slots: Vec<TimeSlot>,
    pub locations: Vec<Choice>,
    pub contacts: Vec<ContactSpec>,
    /// First day of the simulated period.
    pub start_date: NaiveDate,
    pub weeks: u32,
}

/// Indices into the rule set's slots, locations and contacts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlantedContext {
    pub slot: usize,
    pub day: Weekday,
    pub location: usize,
    pub contact: usize,
}

impl PlantedRuleSet {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(0.0..0.5).contains(&self.noise) {
            return bad(format!("noise {} outside [0, 0.5)", self.noise));
        }
        if self.n_records == 0 {
            return bad("record count must be positive".into());
        }
        if self.weeks == 0 {
            return bad("weeks must be positive".into());
        }
        if self.slots.is_empty() || self.locations.is_empty() || self.contacts.is_empty() {
            return bad("scenario needs at least one slot, location and contact".into());
        }
        for s in &self.slots {
            if s.days.is_empty() || s.start_minute >= s.end_minute || s.end_minute > MINUTES_PER_DAY {
                return bad(format!("slot {} has an empty or invalid window", s.name));
            }
        }
        let weights = self
            .slots
            .iter()
            .map(|s| s.weight)
            .chain(self.locations.iter().map(|l| l.weight))
            .chain(self.contacts.iter().map(|c| c.weight));
        for w in weights {
            if !(w.is_finite() && w > 0.0) {
                return bad(format!("weight {w} must be positive"));
            }
        }
        for (i, rule) in self.rules.iter().enumerate() {
            for c in &rule.conditions {
                let known = match c.field {
                    Field::Segment => self.slots.iter().any(|s| s.name == c.value),
                    Field::Day => crate::domain::parse_weekday(&c.value).is_some(),
                    Field::Location => self.locations.iter().any(|l| l.name == c.value),
                    Field::Contact => self.contacts.iter().any(|k| k.name == c.value),
                };
                if !known {
                    return bad(format!(
                        "rule {} refers to undeclared {} {:?}",
                        i + 1,
                        c.field.name(),
                        c.value
                    ));
                }
            }
        }
        Ok(())
    }

    fn field_value(&self, ctx: &PlantedContext, field: Field) -> &str {
        match field {
            Field::Segment => &self.slots[ctx.slot].name,
            Field::Day => weekday_label(ctx.day),
            Field::Location => &self.locations[ctx.location].name,
            Field::Contact => &self.contacts[ctx.contact].name,
        }
    }

    fn matches(&self, rule: &Rule, ctx: &PlantedContext) -> bool {
        rule.conditions.iter().all(|c| {
            let v = self.field_value(ctx, c.field);
            let eq = if c.field == Field::Day {
                crate::domain::parse_weekday(&c.value) == Some(ctx.day)
            } else {
                v == c.value
            };
            eq != c.negated
        })
    }

    /// Index of the first matching rule (`None` for the default) and the
    /// class it assigns.
    pub fn label(&self, ctx: &PlantedContext) -> (Option<usize>, BehaviorClass) {
        self.rules
            .iter()
            .position(|r| self.matches(r, ctx))
            .map_or((None, self.default_class), |i| (Some(i), self.rules[i].class))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub context: PlantedContext,
    pub rule: Option<usize>,
    pub rule_class: BehaviorClass,
    pub emitted_class: BehaviorClass,
}

impl GroundTruth {
    pub fn flipped(&self) -> bool {
        self.rule_class != self.emitted_class
    }
}

/// What the generator did, aligned one-to-one with the emitted records.
#[derive(Debug, Clone, PartialEq)]
pub struct GenReport {
    pub tally: ClassCounts,
    pub truth: Vec<GroundTruth>,
    pub flips: usize,
}

impl GenReport {
    pub fn flip_fraction(&self) -> f64 {
        if self.truth.is_empty() {
            0.0
        } else {
            self.flips as f64 / self.truth.len() as f64
        }
    }

    /// Accuracy of predicting every record by its noiseless rule label,
    /// the best any classifier can expect.
    pub fn rule_replay_accuracy(&self) -> f64 {
        1.0 - self.flip_fraction()
    }
}

/// Generates `n_records` calls sorted by timestamp.
pub fn generate(rules: &PlantedRuleSet) -> Result<(Vec<CallRecord>, GenReport)> {
    rules.validate()?;
    let weights_err = |e| Error::InvalidConfig(format!("bad weights: {e}"));
    let slot_dist = WeightedIndex::new(rules.slots.iter().map(|s| s.weight)).map_err(weights_err)?;
    let loc_dist = WeightedIndex::new(rules.locations.iter().map(|l| l.weight)).map_err(weights_err)?;
    let contact_dist = WeightedIndex::new(rules.contacts.iter().map(|c| c.weight)).map_err(weights_err)?;
    let mut rng = ChaCha8Rng::seed_from_u64(rules.seed);
    let start_dow = rules.start_date.weekday().num_days_from_monday();

    let mut rows: Vec<(CallRecord, GroundTruth)> = Vec::with_capacity(rules.n_records);
    for _ in 0..rules.n_records {
        let slot_i = slot_dist.sample(&mut rng);
        let slot = &rules.slots[slot_i];
        let day = slot.days[rng.random_range(0..slot.days.len())];
        let week = rng.random_range(0..rules.weeks);
        let minute = rng.random_range(slot.start_minute..slot.end_minute);
        let ctx = PlantedContext {
            slot: slot_i,
            day,
            location: loc_dist.sample(&mut rng),
            contact: contact_dist.sample(&mut rng),
        };
        let (rule, rule_class) = rules.label(&ctx);
        let emitted_class = if rng.random_bool(rules.noise) {
            let others: Vec<BehaviorClass> = BehaviorClass::ALL.into_iter().filter(|&c| c != rule_class).collect();
            others[rng.random_range(0..others.len())]
        } else {
            rule_class
        };
        let (call_type, duration) = match emitted_class {
            BehaviorClass::Accept => (CallType::Incoming, rng.random_range(10..=600)),
            BehaviorClass::Reject => (CallType::Incoming, 0),
            BehaviorClass::Missed => (CallType::Missed, 0),
        };

        let offset = u64::from((day.num_days_from_monday() + 7 - start_dow) % 7) + 7 * u64::from(week);
        let date = rules
            .start_date
            .checked_add_days(Days::new(offset))
            .ok_or_else(|| Error::InvalidConfig("simulated period overflows the calendar".into()))?;
        let time = NaiveTime::from_hms_opt(minute / 60, minute % 60, 0).expect("minute < 1440");
        let record = CallRecord::new(
            date.and_time(time),
            rules.contacts[ctx.contact].number.clone(),
            call_type,
            duration,
            Some(rules.locations[ctx.location].name.clone()),
        )?;
        rows.push((
            record,
            GroundTruth {
                context: ctx,
                rule,
                rule_class,
                emitted_class,
            },
        ));
    }
    rows.sort_by_key(|(r, _)| r.timestamp());

    let (records, truth): (Vec<CallRecord>, Vec<GroundTruth>) = rows.into_iter().unzip();
    let tally = ClassCounts::from_labels(truth.iter().map(|t| t.emitted_class));
    let flips = truth.iter().filter(|t| t.flipped()).count();
    Ok((records, GenReport { tally, truth, flips }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use alloc::string::ToString;

    fn small(noise: f64, n: usize) -> PlantedRuleSet {
        let weekdays = vec![Weekday::Mon, Weekday::Tue, Weekday::Wed, Weekday::Thu, Weekday::Fri];
        PlantedRuleSet {
            rules: vec![
                Rule {
                    conditions: vec![
                        Condition { field: Field::Segment, value: "S1".into(), negated: false },
                        Condition { field: Field::Contact, value: "C1".into(), negated: false },
                    ],
                    class: BehaviorClass::Accept,
                },
                Rule {
                    conditions: vec![Condition { field: Field::Segment, value: "S1".into(), negated: false }],
                    class: BehaviorClass::Reject,
                },
            ],
            default_class: BehaviorClass::Missed,
            noise,
            n_records: n,
            seed: 11,
            slots: vec![
                TimeSlot { name: "S1".into(), days: weekdays.clone(), start_minute: 540, end_minute: 600, weight: 1.0 },
                TimeSlot { name: "S2".into(), days: weekdays, start_minute: 600, end_minute: 1020, weight: 1.0 },
            ],
            locations: vec![Choice { name: "office".into(), weight: 1.0 }],
            contacts: (1..=3)
                .map(|i| ContactSpec { name: format!("C{i}"), number: format!("+1555000{i}"), weight: 1.0 })
                .collect(),
            start_date: NaiveDate::from_ymd_opt(2004, 9, 13).unwrap(),
            weeks: 4,
        }
    }

    #[test]
    fn noiseless_labels_follow_rules() {
        let (recs, report) = generate(&small(0.0, 300)).unwrap();
        assert_eq!(report.flips, 0);
        assert_eq!(recs.len(), 300);
        for (r, t) in recs.iter().zip(&report.truth) {
            assert_eq!(r.behavior(), Some(t.emitted_class));
            assert_eq!(t.emitted_class, t.rule_class);
        }
        assert_eq!(report.tally.total(), 300);
    }

    #[test]
    fn first_matching_rule_wins() {
        let rs = small(0.0, 1);
        let ctx = PlantedContext { slot: 0, day: Weekday::Mon, location: 0, contact: 0 };
        assert_eq!(rs.label(&ctx), (Some(0), BehaviorClass::Accept));
        let ctx = PlantedContext { contact: 1, ..ctx };
        assert_eq!(rs.label(&ctx), (Some(1), BehaviorClass::Reject));
        let ctx = PlantedContext { slot: 1, ..ctx };
        assert_eq!(rs.label(&ctx), (None, BehaviorClass::Missed));
    }

    #[test]
    fn flip_fraction_concentrates() {
        let (_, report) = generate(&small(0.1, 2000)).unwrap();
        assert!((report.flip_fraction() - 0.1).abs() <= 0.02, "{}", report.flip_fraction());
    }

    #[test]
    fn same_seed_same_log() {
        assert_eq!(generate(&small(0.2, 100)).unwrap(), generate(&small(0.2, 100)).unwrap());
    }

    #[test]
    fn records_sit_inside_their_slots() {
        let rs = small(0.0, 200);
        let (recs, report) = generate(&rs).unwrap();
        for (r, t) in recs.iter().zip(&report.truth) {
            let slot = &rs.slots[t.context.slot];
            assert!(slot.start_minute <= r.minute_of_day() && r.minute_of_day() < slot.end_minute);
            assert_eq!(r.weekday(), t.context.day);
        }
        assert!(recs.windows(2).all(|w| w[0].timestamp() <= w[1].timestamp()));
    }

    #[test]
    fn invalid_configs() {
        let mut rs = small(0.5, 10);
        assert!(matches!(generate(&rs), Err(Error::InvalidConfig(_))));
        rs.noise = 0.0;
        rs.n_records = 0;
        assert!(generate(&rs).is_err());
        let mut rs = small(0.0, 10);
        rs.rules[0].conditions[0].value = "S9".to_string();
        assert!(generate(&rs).is_err());
    }
}
