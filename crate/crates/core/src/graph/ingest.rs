//! Streaming edge-list ingestion.
//!
//! Records are `timestamp<d>retweeter<d>author[<d>count]`, or with
//! [`TimeFormat::Week`] a pre-binned `week<d>retweeter<d>author[<d>count]`.
//! Timestamps are integer epoch seconds or ISO-8601 (date, naive datetime, or
//! RFC 3339 with offset). Blank lines and lines starting with `#` are ignored,
//! as is a leading header line whose first field is `timestamp` or `week`.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use chrono::{DateTime, NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use super::{TemporalRetweetNetwork, UserIndex, WeeklyGraph};
use crate::error::{Error, Result};

const SECONDS_PER_DAY: i64 = 86_400;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorPolicy {
    FailFast,
    Skip,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimeFormat {
    /// First column is a timestamp, binned against the epoch.
    Timestamp,
    /// First column is already a 0-based week index.
    Week,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestOptions {
    pub delimiter: u8,
    /// Bin origin in seconds since the Unix epoch.
    pub epoch: i64,
    pub week_days: u32,
    pub time_format: TimeFormat,
    pub on_error: ErrorPolicy,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            delimiter: b'\t',
            epoch: 0,
            week_days: 7,
            time_format: TimeFormat::Timestamp,
            on_error: ErrorPolicy::FailFast,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub lines: u64,
    pub records: u64,
    pub self_loops: u64,
    pub skipped: u64,
    /// First few skipped records as `line: reason`.
    pub sample_errors: Vec<String>,
    pub weeks: u64,
    pub users: u64,
    pub edges: u64,
}

/// Parses an ISO-8601 or integer-seconds timestamp into Unix seconds.
pub fn parse_timestamp(raw: &str) -> Option<i64> {
    let raw = raw.trim();
    if let Ok(secs) = raw.parse::<i64>() {
        return Some(secs);
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(raw) {
        return Some(dt.timestamp());
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M:%S%.f"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(raw, fmt) {
            return Some(dt.and_utc().timestamp());
        }
    }
    NaiveDate::parse_from_str(raw, "%Y-%m-%d")
        .ok()
        .map(|d| d.and_hms_opt(0, 0, 0).unwrap().and_utc().timestamp())
}

pub fn ingest_path(path: &Path, opts: &IngestOptions) -> Result<(TemporalRetweetNetwork, IngestReport)> {
    ingest_paths(&[path], opts)
}

/// Ingests several files into one network; line numbers in errors are per file.
pub fn ingest_paths<P: AsRef<Path>>(paths: &[P], opts: &IngestOptions) -> Result<(TemporalRetweetNetwork, IngestReport)> {
    let mut b = Builder::new(opts)?;
    for path in paths {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        b.feed(BufReader::with_capacity(1 << 20, file)).map_err(|e| match e {
            Error::Io { source, .. } => Error::io(path, source),
            other => other,
        })?;
    }
    Ok(b.finish())
}

pub fn ingest<R: BufRead>(reader: R, opts: &IngestOptions) -> Result<(TemporalRetweetNetwork, IngestReport)> {
    let mut b = Builder::new(opts)?;
    b.feed(reader)?;
    Ok(b.finish())
}

struct Builder<'a> {
    opts: &'a IngestOptions,
    bin_seconds: i64,
    users: UserIndex,
    buckets: BTreeMap<u32, Vec<(u32, u32, u32)>>,
    report: IngestReport,
}

impl<'a> Builder<'a> {
    fn new(opts: &'a IngestOptions) -> Result<Self> {
        if opts.week_days == 0 {
            return Err(Error::InvalidArgument("week length must be at least one day".into()));
        }
        Ok(Builder {
            opts,
            bin_seconds: i64::from(opts.week_days) * SECONDS_PER_DAY,
            users: UserIndex::new(),
            buckets: BTreeMap::new(),
            report: IngestReport::default(),
        })
    }

    fn feed<R: BufRead>(&mut self, reader: R) -> Result<()> {
        let delim = char::from(self.opts.delimiter);
        for (lineno, line) in reader.lines().enumerate() {
            let lineno = lineno + 1;
            let line = line.map_err(|e| Error::io("<input>", e))?;
            self.report.lines += 1;
            let trimmed = line.trim_end_matches(['\r', '\n']);
            if trimmed.trim().is_empty() || trimmed.starts_with('#') {
                continue;
            }
            if lineno == 1 {
                let head = trimmed.split(delim).next().unwrap_or("").trim();
                if head.eq_ignore_ascii_case("timestamp") || head.eq_ignore_ascii_case("week") {
                    continue;
                }
            }
            match parse_record(trimmed, delim, lineno, self.opts, self.bin_seconds) {
                Ok((week, retweeter, author, count)) => {
                    self.report.records += 1;
                    let i = self.users.intern(retweeter);
                    let j = self.users.intern(author);
                    self.buckets.entry(week).or_default().push((i, j, count));
                }
                Err(err) => match self.opts.on_error {
                    ErrorPolicy::FailFast => return Err(err),
                    ErrorPolicy::Skip => {
                        self.report.skipped += 1;
                        if self.report.sample_errors.len() < 20 {
                            self.report.sample_errors.push(err.to_string());
                        }
                    }
                },
            }
        }
        Ok(())
    }

    fn finish(self) -> (TemporalRetweetNetwork, IngestReport) {
        let mut report = self.report;
        let mut weeks = Vec::with_capacity(self.buckets.len());
        for (week, triples) in self.buckets {
            let (g, self_loops) = WeeklyGraph::from_triples(week, triples);
            report.self_loops += self_loops;
            if g.n_edges() > 0 {
                weeks.push(g);
            }
        }
        report.weeks = weeks.len() as u64;
        report.users = self.users.len() as u64;
        report.edges = weeks.iter().map(|g| g.n_edges() as u64).sum();
        (TemporalRetweetNetwork::new(self.users, weeks), report)
    }
}

fn parse_record<'a>(
    line: &'a str,
    delim: char,
    line_no: usize,
    opts: &IngestOptions,
    bin_seconds: i64,
) -> Result<(u32, &'a str, &'a str, u32)> {
    let bad = |reason: &str| Error::MalformedRecord {
        line: line_no,
        reason: reason.to_owned(),
    };
    let fields: Vec<&str> = line.split(delim).map(str::trim).collect();
    if !(3..=4).contains(&fields.len()) {
        return Err(bad(&format!("expected 3 or 4 fields, found {}", fields.len())));
    }
    let (retweeter, author) = (fields[1], fields[2]);
    if retweeter.is_empty() || author.is_empty() {
        return Err(bad("empty user field"));
    }
    let count = match fields.get(3) {
        Some(raw) => match raw.parse::<u32>() {
            Ok(c) if c > 0 => c,
            _ => return Err(bad(&format!("count `{raw}` is not a positive integer"))),
        },
        None => 1,
    };
    let week = match opts.time_format {
        TimeFormat::Week => fields[0]
            .parse::<u32>()
            .map_err(|_| bad(&format!("week `{}` is not a non-negative integer", fields[0])))?,
        TimeFormat::Timestamp => {
            let ts = parse_timestamp(fields[0]).ok_or_else(|| bad(&format!("unparseable timestamp `{}`", fields[0])))?;
            if ts < opts.epoch {
                return Err(Error::BeforeEpoch {
                    line: line_no,
                    timestamp: ts,
                });
            }
            u32::try_from((ts - opts.epoch) / bin_seconds).map_err(|_| bad("timestamp too far past the epoch"))?
        }
    };
    Ok((week, retweeter, author, count))
}
