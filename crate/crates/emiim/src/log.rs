//! Delimited call-log files.
//!
//! A log has a header row naming its columns; `timestamp`, `contact`,
//! `call_type` and `duration` are required, `location` is optional, and
//! columns are matched by name. Timestamps are local ISO-8601 datetimes
//! with minute precision (`2004-09-13T09:15`). Rows that cannot be turned
//! into a valid record are skipped and listed in the parse report.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDateTime;
use emiim_core::{CallRecord, CallType, Dataset};

use crate::error::{Error, Result};

pub const LOG_HEADER: [&str; 5] = ["timestamp", "contact", "call_type", "duration", "location"];
pub const DATASET_HEADER: [&str; 5] = ["segment", "day", "location", "contact", "class"];

const TIMESTAMP_OUT: &str = "%Y-%m-%dT%H:%M";
const TIMESTAMP_IN: [&str; 4] = ["%Y-%m-%dT%H:%M", "%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M", "%Y-%m-%d %H:%M:%S"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LogFormatSpec {
    pub delimiter: u8,
}

impl Default for LogFormatSpec {
    fn default() -> Self {
        Self { delimiter: b',' }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedRow {
    /// 1-based line number in the file.
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedLog {
    pub records: Vec<CallRecord>,
    pub skipped: Vec<SkippedRow>,
}

struct Columns {
    timestamp: usize,
    contact: usize,
    call_type: usize,
    duration: usize,
    location: Option<usize>,
}

impl Columns {
    fn from_header(header: &csv::StringRecord) -> Result<Self> {
        let find = |name: &str| {
            header
                .iter()
                .position(|h| h.trim().trim_start_matches('\u{feff}').eq_ignore_ascii_case(name))
        };
        let required = |name: &str| find(name).ok_or_else(|| Error::MissingColumn(name.to_string()));
        Ok(Self {
            timestamp: required("timestamp")?,
            contact: required("contact")?,
            call_type: required("call_type")?,
            duration: required("duration")?,
            location: find("location"),
        })
    }
}

pub fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    let s = s.trim();
    TIMESTAMP_IN
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
}

fn parse_row(row: &csv::StringRecord, cols: &Columns) -> std::result::Result<CallRecord, String> {
    let field = |i: usize| row.get(i).map(str::trim).ok_or_else(|| format!("missing column {}", i + 1));
    let ts_raw = field(cols.timestamp)?;
    let timestamp = parse_timestamp(ts_raw).ok_or_else(|| format!("invalid timestamp {ts_raw:?}"))?;
    let contact = field(cols.contact)?;
    let call_type: CallType = field(cols.call_type)?.parse().map_err(|e: emiim_core::Error| e.to_string())?;
    let dur_raw = field(cols.duration)?;
    let duration: i64 = dur_raw
        .parse()
        .map_err(|_| format!("invalid duration {dur_raw:?}"))?;
    if duration < 0 {
        return Err("negative duration".into());
    }
    let duration = u32::try_from(duration).map_err(|_| format!("duration {duration} too large"))?;
    let location = match cols.location {
        Some(i) => row.get(i).map(|s| s.trim().to_string()),
        None => None,
    };
    CallRecord::new(timestamp, contact, call_type, duration, location).map_err(|e| e.to_string())
}

/// Parses a log, keeping well-formed rows in file order.
pub fn parse_log<R: Read>(reader: R, spec: &LogFormatSpec) -> Result<ParsedLog> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(spec.delimiter)
        .flexible(true)
        .has_headers(true)
        .from_reader(reader);
    let header = rdr.headers().map_err(io_or_csv)?.clone();
    let cols = Columns::from_header(&header)?;

    let mut records = Vec::new();
    let mut skipped = Vec::new();
    let mut raw = csv::ByteRecord::new();
    loop {
        match rdr.read_byte_record(&mut raw) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => return Err(io_or_csv(e)),
        }
        let line = raw.position().map_or(0, |p| p.line());
        if raw.iter().all(|f| f.iter().all(u8::is_ascii_whitespace)) {
            continue;
        }
        let row = match csv::StringRecord::from_byte_record(raw.clone()) {
            Ok(r) => r,
            Err(_) => {
                skipped.push(SkippedRow { line, reason: "invalid UTF-8".into() });
                continue;
            }
        };
        match parse_row(&row, &cols) {
            Ok(r) => records.push(r),
            Err(reason) => skipped.push(SkippedRow { line, reason }),
        }
    }
    if records.is_empty() {
        return Err(Error::Core(emiim_core::Error::EmptyLog));
    }
    Ok(ParsedLog { records, skipped })
}

fn io_or_csv(e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            _ => unreachable!(),
        }
    } else {
        Error::Csv(e)
    }
}

pub fn read_log_file(path: &Path, spec: &LogFormatSpec) -> Result<ParsedLog> {
    let file = File::open(path).map_err(|e| Error::file(path, e))?;
    parse_log(std::io::BufReader::new(file), spec)
}

/// Writes records with the standard header.
pub fn write_log<W: Write>(records: &[CallRecord], writer: W, spec: &LogFormatSpec) -> Result<()> {
    let mut w = csv::WriterBuilder::new().delimiter(spec.delimiter).from_writer(writer);
    w.write_record(LOG_HEADER)?;
    for r in records {
        let ts = r.timestamp().format(TIMESTAMP_OUT).to_string();
        let dur = r.duration_s().to_string();
        w.write_record([
            ts.as_str(),
            r.contact(),
            r.call_type().name(),
            dur.as_str(),
            r.location().unwrap_or(""),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes a labeled dataset as `segment,day,location,contact,class`, the
/// class as its numeric id.
pub fn write_dataset<W: Write>(dataset: &Dataset, writer: W, spec: &LogFormatSpec) -> Result<()> {
    let mut w = csv::WriterBuilder::new().delimiter(spec.delimiter).from_writer(writer);
    w.write_record(DATASET_HEADER)?;
    for e in dataset.examples() {
        let mut row: Vec<String> = e.context.values().to_vec();
        row.push(e.label.id().to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use emiim_core::BehaviorClass;

    fn parse(text: &str) -> Result<ParsedLog> {
        parse_log(text.as_bytes(), &LogFormatSpec::default())
    }

    #[test]
    fn well_formed_row() {
        let log = parse("timestamp,contact,call_type,duration,location\n2004-09-13T09:15,+15551234,incoming,45,office\n").unwrap();
        assert_eq!(log.records.len(), 1);
        let r = &log.records[0];
        assert_eq!(r.duration_s(), 45);
        assert_eq!(r.contact(), "+15551234");
        assert_eq!(r.call_type(), CallType::Incoming);
        assert_eq!(r.location(), Some("office"));
        assert_eq!(r.behavior(), Some(BehaviorClass::Accept));
    }

    #[test]
    fn negative_duration_is_skipped() {
        let log = parse(
            "timestamp,contact,call_type,duration,location\n\
             2004-09-13T09:15,a,incoming,-3,office\n\
             2004-09-13T09:20,a,missed,0,home\n",
        )
        .unwrap();
        assert_eq!(log.records.len(), 1);
        assert_eq!(log.records[0].call_type(), CallType::Missed);
        assert_eq!(log.records[0].duration_s(), 0);
        assert_eq!(log.skipped, vec![SkippedRow { line: 2, reason: "negative duration".into() }]);
    }

    #[test]
    fn columns_matched_by_name() {
        let log = parse("duration,location,call_type,contact,timestamp\n0,,missed,x,2004-09-14 18:02:11\n").unwrap();
        let r = &log.records[0];
        assert_eq!(r.location(), None);
        assert_eq!(r.timestamp().format("%H:%M:%S").to_string(), "18:02:00");
    }

    #[test]
    fn location_column_is_optional() {
        let log = parse("timestamp,contact,call_type,duration\n2004-09-13T09:15,a,outgoing,30\n").unwrap();
        assert_eq!(log.records[0].location(), None);
        assert_eq!(log.records[0].behavior(), None);
    }

    #[test]
    fn missing_required_column() {
        assert!(matches!(parse("timestamp,contact,duration\n"), Err(Error::MissingColumn(c)) if c == "call_type"));
    }

    #[test]
    fn no_good_rows_is_empty_log() {
        let err = parse("timestamp,contact,call_type,duration,location\nbad,a,incoming,1,x\n").unwrap_err();
        assert!(matches!(err, Error::Core(emiim_core::Error::EmptyLog)));
    }

    #[test]
    fn assorted_bad_rows() {
        let log = parse(
            "timestamp,contact,call_type,duration,location\n\
             2004-09-13T09:15,a,incoming,1,x\n\
             2004-09-13T09:15,a,sms,1,x\n\
             2004-09-13T09:15,a,incoming,ten,x\n\
             2004-09-13T09:15,a,missed,4,x\n\
             2004-09-13T09:15,a\n",
        )
        .unwrap();
        assert_eq!(log.records.len(), 1);
        assert_eq!(log.skipped.len(), 4);
        assert_eq!(log.skipped[0].line, 3);
    }

    #[test]
    fn write_then_parse_preserves_records() {
        let src = "timestamp,contact,call_type,duration,location\n\
                   2004-09-13T09:15,a,incoming,12,office\n\
                   2004-09-13T10:00,,missed,0,\n";
        let log = parse(src).unwrap();
        let mut out = Vec::new();
        write_log(&log.records, &mut out, &LogFormatSpec::default()).unwrap();
        assert_eq!(String::from_utf8(out.clone()).unwrap(), src);
        assert_eq!(parse(std::str::from_utf8(&out).unwrap()).unwrap().records, log.records);
    }

    #[test]
    fn semicolon_delimiter() {
        let spec = LogFormatSpec { delimiter: b';' };
        let log = parse_log("timestamp;contact;call_type;duration\n2004-09-13T09:15;a;incoming;0\n".as_bytes(), &spec).unwrap();
        assert_eq!(log.records[0].behavior(), Some(BehaviorClass::Reject));
    }
}
