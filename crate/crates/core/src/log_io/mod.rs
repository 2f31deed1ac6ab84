//! Event log model, XES/CSV input and output, and relative-time derivation.
//!
//! Only the three core attributes survive parsing: case id, activity label
//! and a single (end) timestamp. Everything else in the source is dropped.

mod csv_format;
mod time;
mod xes;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use csv_format::CsvColumns;
pub use time::{Timestamp, SECONDS_PER_DAY};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Event {
    pub activity: String,
    pub timestamp: Timestamp,
}

impl Event {
    pub fn new(activity: impl Into<String>, timestamp: Timestamp) -> Self {
        Event {
            activity: activity.into(),
            timestamp,
        }
    }
}

/// The events of one case, in timestamp order (ties keep input order).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    pub case_id: String,
    pub events: Vec<Event>,
}

impl Trace {
    pub fn variant(&self) -> Vec<&str> {
        self.events.iter().map(|e| e.activity.as_str()).collect()
    }

    pub fn start(&self) -> Timestamp {
        self.events[0].timestamp
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }
}

/// A validated collection of traces with pairwise distinct case ids.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EventLog {
    traces: Vec<Trace>,
}

impl EventLog {
    /// Validates and normalizes the traces: events are stably sorted by
    /// timestamp, case ids must be unique, and no trace or activity may be
    /// empty. An empty collection is allowed here (a release can delete every
    /// case); the parsers reject empty input.
    pub fn from_traces(mut traces: Vec<Trace>) -> Result<Self> {
        let mut seen = HashMap::with_capacity(traces.len());
        for (i, trace) in traces.iter_mut().enumerate() {
            if trace.events.is_empty() {
                return Err(Error::Validation(format!(
                    "case '{}' has no events",
                    trace.case_id
                )));
            }
            if let Some(pos) = trace.events.iter().position(|e| e.activity.is_empty()) {
                return Err(Error::Validation(format!(
                    "event #{} of case '{}' has an empty activity",
                    pos + 1,
                    trace.case_id
                )));
            }
            if seen.insert(trace.case_id.clone(), i).is_some() {
                return Err(Error::Validation(format!(
                    "duplicate case id '{}'",
                    trace.case_id
                )));
            }
            trace.events.sort_by_key(|e| e.timestamp);
        }
        Ok(EventLog { traces })
    }

    /// Groups `(case id, event)` rows into traces, keeping cases in order of
    /// first appearance.
    pub fn from_events<I, S>(rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, Event)>,
        S: Into<String>,
    {
        let mut index: HashMap<String, usize> = HashMap::new();
        let mut traces: Vec<Trace> = Vec::new();
        for (case, event) in rows {
            let case = case.into();
            match index.get(&case) {
                Some(&i) => traces[i].events.push(event),
                None => {
                    index.insert(case.clone(), traces.len());
                    traces.push(Trace {
                        case_id: case,
                        events: vec![event],
                    });
                }
            }
        }
        EventLog::from_traces(traces)
    }

    pub fn traces(&self) -> &[Trace] {
        &self.traces
    }

    pub fn into_traces(self) -> Vec<Trace> {
        self.traces
    }

    pub fn len(&self) -> usize {
        self.traces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.traces.is_empty()
    }

    pub fn event_count(&self) -> usize {
        self.traces.iter().map(Trace::len).sum()
    }

    pub fn log_start(&self) -> Option<Timestamp> {
        self.traces.iter().map(Trace::start).min()
    }

    pub fn log_end(&self) -> Option<Timestamp> {
        self.traces
            .iter()
            .filter_map(|t| t.events.last().map(|e| e.timestamp))
            .max()
    }

    /// Distinct variants with the number of cases following each.
    pub fn variant_counts(&self) -> BTreeMap<Vec<String>, usize> {
        let mut out = BTreeMap::new();
        for t in &self.traces {
            let v: Vec<String> = t.events.iter().map(|e| e.activity.clone()).collect();
            *out.entry(v).or_insert(0) += 1;
        }
        out
    }

    pub fn variant_set(&self) -> BTreeSet<Vec<String>> {
        self.variant_counts().into_keys().collect()
    }

    /// Equality on case/activity/timestamp content, ignoring trace order.
    pub fn structurally_eq(&self, other: &EventLog) -> bool {
        if self.len() != other.len() {
            return false;
        }
        let by_id: HashMap<&str, &Trace> = other
            .traces
            .iter()
            .map(|t| (t.case_id.as_str(), t))
            .collect();
        self.traces
            .iter()
            .all(|t| by_id.get(t.case_id.as_str()).is_some_and(|o| *o == t))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogFormat {
    Xes,
    Csv,
}

impl LogFormat {
    /// Guesses the format from a file extension (`.xes`, `.csv`).
    pub fn from_path(path: &Path) -> Option<LogFormat> {
        let ext = path.extension()?.to_str()?.to_ascii_lowercase();
        ext.parse().ok()
    }
}

impl FromStr for LogFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "xes" => Ok(LogFormat::Xes),
            "csv" => Ok(LogFormat::Csv),
            other => Err(Error::domain(format!("unknown log format '{other}'"))),
        }
    }
}

impl fmt::Display for LogFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LogFormat::Xes => "xes",
            LogFormat::Csv => "csv",
        })
    }
}

/// Privacy parameters attached to a released log: `epsilon_per_event` on
/// every event and `epsilon_per_trace` on every trace. Shapes mirror the
/// log's traces and events.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EpsilonAnnotations {
    pub per_event: Vec<Vec<f64>>,
    pub per_trace: Vec<f64>,
}

impl EpsilonAnnotations {
    fn check_shape(&self, log: &EventLog) -> Result<()> {
        let ok = self.per_trace.len() == log.len()
            && self.per_event.len() == log.len()
            && self
                .per_event
                .iter()
                .zip(log.traces())
                .all(|(eps, t)| eps.len() == t.len());
        if ok {
            Ok(())
        } else {
            Err(Error::Consistency(
                "epsilon annotations do not match the log shape".into(),
            ))
        }
    }
}

pub fn parse_event_log<R: Read>(
    mut source: R,
    format: LogFormat,
    columns: Option<&CsvColumns>,
) -> Result<EventLog> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    let log = match format {
        LogFormat::Xes => xes::parse(&bytes)?,
        LogFormat::Csv => csv_format::parse(&bytes, columns.cloned().unwrap_or_default())?,
    };
    if log.is_empty() {
        return Err(Error::Validation("event log contains no events".into()));
    }
    Ok(log)
}

pub fn read_event_log(path: &Path, format: LogFormat, columns: Option<&CsvColumns>) -> Result<EventLog> {
    let file = std::fs::File::open(path)?;
    parse_event_log(std::io::BufReader::new(file), format, columns)
}

pub fn write_event_log<W: Write>(
    log: &EventLog,
    format: LogFormat,
    extras: Option<&EpsilonAnnotations>,
    sink: W,
) -> Result<()> {
    if let Some(extras) = extras {
        extras.check_shape(log)?;
    }
    match format {
        LogFormat::Xes => xes::write(log, extras, sink),
        LogFormat::Csv => csv_format::write(log, extras, sink),
    }
}

/// Renders an ε value for output; +∞ becomes `INF`.
pub(crate) fn format_epsilon(value: f64) -> String {
    if value.is_infinite() {
        "INF".to_string()
    } else {
        format!("{value}")
    }
}

/// Start offsets of every case from the log start and the gaps between
/// consecutive events, in whole seconds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelativeTimes {
    pub log_start: Timestamp,
    /// Indexed like the log's traces.
    pub start_offsets: Vec<i64>,
    /// `deltas[i][k]` is the gap between event `k + 1` and event `k` of trace `i`.
    pub deltas: Vec<Vec<i64>>,
}

impl RelativeTimes {
    pub fn reconstruct(&self) -> Vec<Vec<Timestamp>> {
        self.start_offsets
            .iter()
            .zip(&self.deltas)
            .map(|(&offset, deltas)| {
                let mut t = self.log_start.offset(offset);
                let mut out = Vec::with_capacity(deltas.len() + 1);
                out.push(t);
                for &d in deltas {
                    t = t.offset(d);
                    out.push(t);
                }
                out
            })
            .collect()
    }
}

pub fn compute_relative_times(log: &EventLog) -> RelativeTimes {
    let log_start = log.log_start().unwrap_or_default();
    let mut start_offsets = Vec::with_capacity(log.len());
    let mut deltas = Vec::with_capacity(log.len());
    for trace in log.traces() {
        start_offsets.push(trace.start().0 - log_start.0);
        deltas.push(
            trace
                .events
                .windows(2)
                .map(|w| w[1].timestamp.0 - w[0].timestamp.0)
                .collect(),
        );
    }
    RelativeTimes {
        log_start,
        start_offsets,
        deltas,
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    /// The six-case running example, chronologically ordered per case.
    pub const RUNNING_EXAMPLE_CSV: &str = "case_id,activity,timestamp
1,A,2020-08-08T10:20
1,B,2020-08-08T10:50
1,C,2020-08-08T16:15
2,D,2020-08-08T12:37
2,A,2020-08-08T14:37
2,E,2020-08-08T15:07
2,C,2020-08-08T20:31
3,A,2020-08-09T13:30
3,B,2020-08-09T13:55
3,C,2020-08-09T20:55
4,D,2020-08-09T15:00
4,A,2020-08-09T17:00
4,B,2020-08-09T17:40
4,C,2020-08-09T23:05
5,A,2020-08-09T17:25
5,E,2020-08-09T17:55
5,C,2020-08-10T23:55
6,A,2020-08-11T17:00
6,B,2020-08-11T17:27
6,C,2020-08-11T23:45
";

    pub fn running_example() -> super::EventLog {
        super::parse_event_log(RUNNING_EXAMPLE_CSV.as_bytes(), super::LogFormat::Csv, None).unwrap()
    }
}
