//! Planted-rule scenario files.
//!
//! One directive per line; `#` starts a comment.
//!
//! ```text
//! records 2000                      # number of calls (M)
//! noise 0.1                         # label flip probability
//! seed 42
//! start 2004-09-13                  # first simulated day
//! weeks 12
//! default missed                    # class when no rule matches
//! slot S1 Mon-Fri 09:00-10:00 3     # name, days, window, weight
//! location office 5                 # name, weight
//! contact C1 1 +15550100            # name, weight, optional number
//! IF segment=S1 AND contact=C1 THEN accept
//! IF segment=S1 THEN reject
//! ```
//!
//! Days are `Mon-Fri`, `Sat,Sun`, single days, `all`, `weekdays` or
//! `weekend`; windows are `HH:MM-HH:MM` with `24:00` allowed as an end.
//! Conditions use `=` or `!=` on `segment`, `day`, `location` or
//! `contact`, joined with `AND`. Rules are tried in file order.

use std::path::Path;

use chrono::{NaiveDate, Weekday};
use emiim_core::domain::parse_weekday;
use emiim_core::segmentation::WEEK;
use emiim_core::synth::{Choice, Condition, ContactSpec, Field, PlantedRuleSet, Rule, TimeSlot};
use emiim_core::BehaviorClass;

use crate::error::{Error, Result};

pub const BUILTIN: [(&str, &str); 4] = [
    ("alice", include_str!("../scenarios/alice.scenario")),
    ("student", include_str!("../scenarios/student.scenario")),
    ("nightshift", include_str!("../scenarios/nightshift.scenario")),
    ("sales", include_str!("../scenarios/sales.scenario")),
];

pub fn builtin(name: &str) -> Option<PlantedRuleSet> {
    BUILTIN
        .iter()
        .find(|(n, _)| n.eq_ignore_ascii_case(name))
        .map(|(_, text)| parse_scenario(text).expect("built-in scenarios parse"))
}

pub fn read_scenario_file(path: &Path) -> Result<PlantedRuleSet> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
    parse_scenario(&text)
}

pub fn parse_scenario(text: &str) -> Result<PlantedRuleSet> {
    let mut rs = PlantedRuleSet {
        rules: Vec::new(),
        default_class: BehaviorClass::Missed,
        noise: 0.0,
        n_records: 1000,
        seed: 0,
        slots: Vec::new(),
        locations: Vec::new(),
        contacts: Vec::new(),
        start_date: NaiveDate::from_ymd_opt(2004, 9, 13).expect("valid date"),
        weeks: 12,
    };
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| Error::Scenario { line: line_no, message };
        let words: Vec<&str> = line.split_whitespace().collect();
        let arg = |n: usize| words.get(n).copied().ok_or_else(|| err(format!("{} needs more arguments", words[0])));
        match words[0].to_ascii_lowercase().as_str() {
            "records" => rs.n_records = number(arg(1)?).map_err(err)?,
            "noise" => rs.noise = number(arg(1)?).map_err(err)?,
            "seed" => rs.seed = number(arg(1)?).map_err(err)?,
            "weeks" => rs.weeks = number(arg(1)?).map_err(err)?,
            "start" => {
                rs.start_date = NaiveDate::parse_from_str(arg(1)?, "%Y-%m-%d")
                    .map_err(|e| err(format!("bad start date: {e}")))?
            }
            "default" => rs.default_class = class(arg(1)?).map_err(err)?,
            "slot" => {
                let (start, end) = window(arg(3)?).map_err(err)?;
                rs.slots.push(TimeSlot {
                    name: arg(1)?.to_string(),
                    days: days(arg(2)?).map_err(err)?,
                    start_minute: start,
                    end_minute: end,
                    weight: words.get(4).map_or(Ok(1.0), |w| number(w)).map_err(err)?,
                });
            }
            "location" => rs.locations.push(Choice {
                name: arg(1)?.to_string(),
                weight: words.get(2).map_or(Ok(1.0), |w| number(w)).map_err(err)?,
            }),
            "contact" => {
                let index = rs.contacts.len() + 1;
                rs.contacts.push(ContactSpec {
                    name: arg(1)?.to_string(),
                    weight: words.get(2).map_or(Ok(1.0), |w| number(w)).map_err(err)?,
                    number: words
                        .get(3)
                        .map_or_else(|| format!("+1555{index:07}"), |s| s.to_string()),
                });
            }
            "if" => rs.rules.push(rule(&words[1..]).map_err(err)?),
            other => return Err(err(format!("unknown directive {other:?}"))),
        }
    }
    rs.validate()?;
    Ok(rs)
}

fn number<T: std::str::FromStr>(s: &str) -> std::result::Result<T, String> {
    s.parse().map_err(|_| format!("invalid number {s:?}"))
}

fn class(s: &str) -> std::result::Result<BehaviorClass, String> {
    s.parse().map_err(|e: emiim_core::Error| e.to_string())
}

fn days(spec: &str) -> std::result::Result<Vec<Weekday>, String> {
    match spec.to_ascii_lowercase().as_str() {
        "all" | "daily" => return Ok(WEEK.to_vec()),
        "weekdays" => return Ok(WEEK[..5].to_vec()),
        "weekend" => return Ok(WEEK[5..].to_vec()),
        _ => {}
    }
    let mut out = Vec::new();
    for part in spec.split(',') {
        let day = |s: &str| parse_weekday(s).ok_or_else(|| format!("unknown day {s:?}"));
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b) = (day(a)?.num_days_from_monday(), day(b)?.num_days_from_monday());
                if a > b {
                    return Err(format!("day range {part:?} runs backwards"));
                }
                out.extend(&WEEK[a as usize..=b as usize]);
            }
            None => out.push(day(part)?),
        }
    }
    out.sort_by_key(|d| d.num_days_from_monday());
    out.dedup();
    Ok(out)
}

fn clock(s: &str) -> std::result::Result<u32, String> {
    let (h, m) = s.split_once(':').ok_or_else(|| format!("bad time {s:?}"))?;
    let (h, m): (u32, u32) = (number(h)?, number(m)?);
    if m >= 60 || h * 60 + m > 1440 {
        return Err(format!("bad time {s:?}"));
    }
    Ok(h * 60 + m)
}

fn window(s: &str) -> std::result::Result<(u32, u32), String> {
    let (a, b) = s.split_once('-').ok_or_else(|| format!("bad window {s:?}"))?;
    let (start, end) = (clock(a)?, clock(b)?);
    if start >= end {
        return Err(format!("window {s:?} is empty"));
    }
    Ok((start, end))
}

fn rule(words: &[&str]) -> std::result::Result<Rule, String> {
    let then = words
        .iter()
        .position(|w| w.eq_ignore_ascii_case("then"))
        .ok_or("rule without THEN")?;
    let target = words.get(then + 1).ok_or("rule without a class after THEN")?;
    if words.len() > then + 2 {
        return Err("unexpected text after the rule class".into());
    }
    let mut conditions = Vec::new();
    for (i, w) in words[..then].iter().enumerate() {
        if i % 2 == 1 {
            if !w.eq_ignore_ascii_case("and") {
                return Err(format!("expected AND, found {w:?}"));
            }
            continue;
        }
        let (field, value, negated) = if let Some((f, v)) = w.split_once("!=") {
            (f, v, true)
        } else if let Some((f, v)) = w.split_once('=') {
            (f, v, false)
        } else {
            return Err(format!("bad condition {w:?}"));
        };
        let field = Field::parse(field).ok_or_else(|| format!("unknown field {field:?}"))?;
        conditions.push(Condition { field, value: value.to_string(), negated });
    }
    if conditions.is_empty() || then % 2 == 0 {
        return Err("rule needs at least one condition".into());
    }
    Ok(Rule { conditions, class: class(target)? })
}
