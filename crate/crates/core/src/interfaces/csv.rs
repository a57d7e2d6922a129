//! Event-log CSV export and import.
//!
//! One row per event, in case order then event order. Timestamps are the
//! event completion times as ISO-8601 instants counted from [`epoch`].
//! Numeric fields carry six decimals, so writing a log twice gives the same
//! bytes and re-reading it gives back the quantized values exactly.

use std::io::{Read, Write};
use std::path::Path;

use chrono::{DateTime, Duration, NaiveDate, Utc};
use serde::Deserialize;

use crate::engine::EventLog;
use crate::error::{Result, SimError};
use crate::policies::RegimeTag;
use crate::process::{ActivityKind, InterestRate};

pub const COLUMNS: [&str; 10] = [
    "case_nr",
    "activity",
    "timestamp",
    "cost",
    "amount",
    "est_quality",
    "unc_quality",
    "interest_rate",
    "discount_factor",
    "regime_tag",
];

pub const HIDDEN_COLUMN: &str = "quality";

const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%S%.6fZ";

/// 2024-01-01T00:00:00Z.
pub fn epoch() -> DateTime<Utc> {
    NaiveDate::from_ymd_opt(2024, 1, 1)
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .expect("valid epoch")
        .and_utc()
}

pub fn timestamp(days: f64) -> DateTime<Utc> {
    epoch() + Duration::microseconds((days * 86_400e6).round() as i64)
}

fn quantize(v: f64) -> f64 {
    format!("{v:.6}").parse().unwrap_or(v)
}

/// One exported row.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRecord {
    pub case_nr: u64,
    pub activity: ActivityKind,
    pub timestamp: DateTime<Utc>,
    pub cost: f64,
    pub amount: f64,
    pub est_quality: f64,
    pub unc_quality: f64,
    pub interest_rate: Option<InterestRate>,
    pub discount_factor: Option<f64>,
    pub regime_tag: RegimeTag,
    pub quality: Option<f64>,
}

impl LogRecord {
    fn fields(&self, include_hidden: bool) -> Vec<String> {
        let mut row = vec![
            self.case_nr.to_string(),
            self.activity.name().to_string(),
            self.timestamp.format(TIMESTAMP_FORMAT).to_string(),
            format!("{:.6}", self.cost),
            format!("{:.6}", self.amount),
            format!("{:.6}", self.est_quality),
            format!("{:.6}", self.unc_quality),
            self.interest_rate.map(|r| format!("{:.6}", r.value())).unwrap_or_default(),
            self.discount_factor.map(|d| format!("{d:.6}")).unwrap_or_default(),
            self.regime_tag.name().to_string(),
        ];
        if include_hidden {
            row.push(self.quality.map(|q| format!("{q:.6}")).unwrap_or_default());
        }
        row
    }

    /// The record as it reads back from a file: six-decimal values and
    /// microsecond timestamps.
    pub fn quantized(&self) -> Self {
        Self {
            cost: quantize(self.cost),
            amount: quantize(self.amount),
            est_quality: quantize(self.est_quality),
            unc_quality: quantize(self.unc_quality),
            discount_factor: self.discount_factor.map(quantize),
            quality: self.quality.map(quantize),
            ..self.clone()
        }
    }
}

/// Rows of `log` in export order. Hidden quality is filled in only when
/// `include_hidden` is set.
pub fn records(log: &EventLog, include_hidden: bool) -> Vec<LogRecord> {
    log.cases
        .iter()
        .flat_map(|case| {
            case.events.iter().map(move |e| LogRecord {
                case_nr: case.case_nr,
                activity: e.activity,
                timestamp: timestamp(e.end),
                cost: e.attributes.cost,
                amount: e.attributes.amount,
                est_quality: e.attributes.est_quality,
                unc_quality: e.attributes.unc_quality,
                interest_rate: e.attributes.interest_rate,
                discount_factor: e.attributes.discount_factor,
                regime_tag: case.tag,
                quality: include_hidden.then_some(case.quality),
            })
        })
        .collect()
}

pub fn write_records<W: Write>(writer: W, rows: &[LogRecord], include_hidden: bool) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = COLUMNS.to_vec();
    if include_hidden {
        header.push(HIDDEN_COLUMN);
    }
    w.write_record(&header)?;
    for r in rows {
        w.write_record(r.fields(include_hidden))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_log<W: Write>(writer: W, log: &EventLog, include_hidden: bool) -> Result<()> {
    write_records(writer, &records(log, include_hidden), include_hidden)
}

pub fn export_csv(log: &EventLog, path: &Path, include_hidden: bool) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_log(std::io::BufWriter::new(file), log, include_hidden)
}

#[derive(Deserialize)]
struct RawRow {
    case_nr: u64,
    activity: String,
    timestamp: String,
    cost: f64,
    amount: f64,
    est_quality: f64,
    unc_quality: f64,
    interest_rate: Option<f64>,
    discount_factor: Option<f64>,
    regime_tag: String,
    #[serde(default)]
    quality: Option<f64>,
}

fn parse_row(raw: RawRow) -> Result<LogRecord> {
    let bad = |what: &str, v: &str| SimError::InvalidArgument(format!("bad {what} '{v}'"));
    let timestamp = DateTime::parse_from_rfc3339(&raw.timestamp)
        .map_err(|_| bad("timestamp", &raw.timestamp))?
        .with_timezone(&Utc);
    let regime_tag = match raw.regime_tag.as_str() {
        "bank" => RegimeTag::Bank,
        "rct" => RegimeTag::Rct,
        other => return Err(bad("regime_tag", other)),
    };
    let interest_rate = match raw.interest_rate {
        Some(r) => Some(InterestRate::from_value(r).ok_or_else(|| bad("interest_rate", &r.to_string()))?),
        None => None,
    };
    Ok(LogRecord {
        case_nr: raw.case_nr,
        activity: raw.activity.parse()?,
        timestamp,
        cost: raw.cost,
        amount: raw.amount,
        est_quality: raw.est_quality,
        unc_quality: raw.unc_quality,
        interest_rate,
        discount_factor: raw.discount_factor,
        regime_tag,
        quality: raw.quality,
    })
}

pub fn read_records<R: Read>(reader: R) -> Result<Vec<LogRecord>> {
    let mut r = csv::Reader::from_reader(reader);
    let header = r.headers()?.clone();
    let expected = header.len() == COLUMNS.len() || header.len() == COLUMNS.len() + 1;
    if !expected || header.iter().zip(COLUMNS).any(|(a, b)| a != b) {
        return Err(SimError::InvalidArgument(format!("unexpected header {header:?}")));
    }
    r.deserialize::<RawRow>()
        .map(|row| parse_row(row?))
        .collect()
}

pub fn import_csv(path: &Path) -> Result<Vec<LogRecord>> {
    read_records(std::fs::File::open(path)?)
}
