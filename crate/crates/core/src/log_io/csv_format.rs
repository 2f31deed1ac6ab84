use std::io::Write;

use super::{format_epsilon, EpsilonAnnotations, Event, EventLog, Timestamp};
use crate::error::{Error, Result};

/// Header names of the three core columns in a CSV log.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvColumns {
    pub case_id: String,
    pub activity: String,
    pub timestamp: String,
}

impl Default for CsvColumns {
    fn default() -> Self {
        CsvColumns {
            case_id: "case_id".into(),
            activity: "activity".into(),
            timestamp: "timestamp".into(),
        }
    }
}

pub(super) fn parse(bytes: &[u8], columns: CsvColumns) -> Result<EventLog> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(bytes);

    let headers = reader
        .headers()
        .map_err(|e| Error::parse("line 1", e.to_string()))?
        .clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::parse("line 1", format!("missing column '{name}'")))
    };
    let case_col = column(&columns.case_id)?;
    let activity_col = column(&columns.activity)?;
    let ts_col = column(&columns.timestamp)?;

    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let locus = e
                .position()
                .map(|p| format!("line {}", p.line()))
                .unwrap_or_else(|| "unknown line".into());
            Error::parse(locus, e.to_string())
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let case = record.get(case_col).unwrap_or("");
        let activity = record.get(activity_col).unwrap_or("");
        let raw_ts = record.get(ts_col).unwrap_or("");
        if case.is_empty() {
            return Err(Error::Validation(format!("event on line {line} has no case id")));
        }
        if activity.is_empty() {
            return Err(Error::Validation(format!(
                "event on line {line} (case '{case}') has no activity"
            )));
        }
        if raw_ts.is_empty() {
            return Err(Error::Validation(format!(
                "event on line {line} (case '{case}', activity '{activity}') has no timestamp"
            )));
        }
        let ts = Timestamp::parse(raw_ts).ok_or_else(|| {
            Error::parse(format!("line {line}"), format!("unparseable timestamp '{raw_ts}'"))
        })?;
        rows.push((case.to_string(), Event::new(activity, ts)));
    }
    EventLog::from_events(rows)
}

/// Writes one row per event in global timestamp order.
pub(super) fn write<W: Write>(
    log: &EventLog,
    extras: Option<&EpsilonAnnotations>,
    sink: W,
) -> Result<()> {
    let mut order: Vec<(usize, usize)> = log
        .traces()
        .iter()
        .enumerate()
        .flat_map(|(i, t)| (0..t.len()).map(move |k| (i, k)))
        .collect();
    order.sort_by_key(|&(i, k)| log.traces()[i].events[k].timestamp);

    let mut writer = csv::Writer::from_writer(sink);
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    if extras.is_some() {
        writer
            .write_record(["case_id", "activity", "timestamp", "epsilon_per_event", "epsilon_per_trace"])
            .map_err(io)?;
    } else {
        writer
            .write_record(["case_id", "activity", "timestamp"])
            .map_err(io)?;
    }
    for (i, k) in order {
        let trace = &log.traces()[i];
        let event = &trace.events[k];
        let ts = event.timestamp.to_string();
        match extras {
            Some(x) => writer
                .write_record([
                    trace.case_id.as_str(),
                    event.activity.as_str(),
                    ts.as_str(),
                    format_epsilon(x.per_event[i][k]).as_str(),
                    format_epsilon(x.per_trace[i]).as_str(),
                ])
                .map_err(io)?,
            None => writer
                .write_record([trace.case_id.as_str(), event.activity.as_str(), ts.as_str()])
                .map_err(io)?,
        }
    }
    writer.flush()?;
    Ok(())
}
