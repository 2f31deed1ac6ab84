//! Minimal XES subset: `<trace>` elements carrying `concept:name` and
//! `<event>` elements carrying `concept:name` and `time:timestamp`.

use std::io::Write;

use quick_xml::escape::escape;
use quick_xml::events::{BytesStart, Event as XmlEvent};
use quick_xml::{Reader, XmlVersion};

use super::{format_epsilon, EpsilonAnnotations, Event, EventLog, Timestamp, Trace};
use crate::error::{Error, Result};

#[derive(Clone, Copy, PartialEq, Eq)]
enum Frame {
    Trace,
    Event,
    Other,
}

#[derive(Default)]
struct PendingEvent {
    line: usize,
    activity: Option<String>,
    timestamp: Option<String>,
    lifecycle: Option<String>,
}

#[derive(Default)]
struct PendingTrace {
    case_id: Option<String>,
    events: Vec<Event>,
}

fn line_at(bytes: &[u8], pos: u64) -> usize {
    let end = (pos as usize).min(bytes.len());
    bytes[..end].iter().filter(|&&b| b == b'\n').count() + 1
}

/// Line numbers for monotonically increasing byte positions.
struct LineCounter {
    pos: usize,
    line: usize,
}

impl LineCounter {
    fn advance(&mut self, bytes: &[u8], pos: usize) -> usize {
        let end = pos.min(bytes.len());
        if end > self.pos {
            self.line += bytes[self.pos..end].iter().filter(|&&b| b == b'\n').count();
            self.pos = end;
        }
        self.line
    }
}

fn key_value(e: &BytesStart<'_>, line: usize) -> Result<(Option<String>, Option<String>)> {
    let mut key = None;
    let mut value = None;
    for attr in e.attributes() {
        let attr = attr.map_err(|err| Error::parse(format!("line {line}"), err.to_string()))?;
        let text = attr
            .normalized_value(XmlVersion::Implicit1_0)
            .map_err(|err| Error::parse(format!("line {line}"), err.to_string()))?
            .into_owned();
        match attr.key.local_name().as_ref() {
            "key" => key = Some(text),
            "value" => value = Some(text),
            _ => {}
        }
    }
    Ok((key, value))
}

struct Parser<'a> {
    bytes: &'a [u8],
    stack: Vec<Frame>,
    trace: Option<PendingTrace>,
    event: Option<PendingEvent>,
    traces: Vec<Trace>,
}

impl<'a> Parser<'a> {
    fn open(&mut self, e: &BytesStart<'_>, line: usize, empty: bool) -> Result<()> {
        let parent = self.stack.last().copied();
        let frame = match e.local_name().as_ref() {
            "trace" => {
                self.trace = Some(PendingTrace::default());
                Frame::Trace
            }
            "event" if parent == Some(Frame::Trace) => {
                self.event = Some(PendingEvent {
                    line,
                    ..Default::default()
                });
                Frame::Event
            }
            _ => {
                self.attribute(e, line, parent)?;
                Frame::Other
            }
        };
        if empty {
            self.close(frame)
        } else {
            self.stack.push(frame);
            Ok(())
        }
    }

    fn attribute(&mut self, e: &BytesStart<'_>, line: usize, parent: Option<Frame>) -> Result<()> {
        match parent {
            Some(Frame::Event) => {
                let (key, value) = key_value(e, line)?;
                let ev = self.event.as_mut().expect("event frame without pending event");
                match key.as_deref() {
                    Some("concept:name") => ev.activity = value,
                    Some("time:timestamp") => ev.timestamp = value,
                    Some("lifecycle:transition") => ev.lifecycle = value,
                    _ => {}
                }
            }
            Some(Frame::Trace) => {
                let (key, value) = key_value(e, line)?;
                if key.as_deref() == Some("concept:name") {
                    self.trace.as_mut().expect("trace frame without pending trace").case_id = value;
                }
            }
            _ => {}
        }
        Ok(())
    }

    fn close(&mut self, frame: Frame) -> Result<()> {
        match frame {
            Frame::Event => {
                let ev = self.event.take().expect("closing an event that was never opened");
                let trace = self.trace.as_mut().expect("event outside trace");
                let case = trace.case_id.clone().unwrap_or_else(|| format!("#{}", self.traces.len() + 1));
                let ordinal = trace.events.len() + 1;
                let activity = ev.activity.filter(|a| !a.is_empty()).ok_or_else(|| {
                    Error::Validation(format!(
                        "event #{ordinal} of case '{case}' (line {}) has no concept:name",
                        ev.line
                    ))
                })?;
                let raw = ev.timestamp.ok_or_else(|| {
                    Error::Validation(format!(
                        "event '{activity}' #{ordinal} of case '{case}' (line {}) has no time:timestamp",
                        ev.line
                    ))
                })?;
                let ts = Timestamp::parse(&raw).ok_or_else(|| {
                    Error::parse(format!("line {}", ev.line), format!("unparseable timestamp '{raw}'"))
                })?;
                // only completion (end) timestamps are kept
                let keep = ev
                    .lifecycle
                    .as_deref()
                    .is_none_or(|l| l.eq_ignore_ascii_case("complete"));
                if keep {
                    trace.events.push(Event::new(activity, ts));
                }
            }
            Frame::Trace => {
                let trace = self.trace.take().expect("closing a trace that was never opened");
                if !trace.events.is_empty() {
                    let case_id = trace
                        .case_id
                        .unwrap_or_else(|| format!("#{}", self.traces.len() + 1));
                    self.traces.push(Trace {
                        case_id,
                        events: trace.events,
                    });
                }
            }
            Frame::Other => {}
        }
        Ok(())
    }
}

pub(super) fn parse(bytes: &[u8]) -> Result<EventLog> {
    let mut reader = Reader::from_reader(bytes);
    reader.config_mut().trim_text(true);
    let mut parser = Parser {
        bytes,
        stack: Vec::new(),
        trace: None,
        event: None,
        traces: Vec::new(),
    };
    let mut buf = Vec::new();
    let mut lines = LineCounter { pos: 0, line: 1 };
    loop {
        let before = reader.buffer_position();
        let event = reader.read_event_into(&mut buf).map_err(|e| {
            Error::parse(format!("line {}", line_at(parser.bytes, reader.error_position())), e.to_string())
        })?;
        let mut start = before as usize;
        while start < bytes.len() && bytes[start].is_ascii_whitespace() {
            start += 1;
        }
        let line = lines.advance(parser.bytes, start);
        match event {
            XmlEvent::Start(e) => parser.open(&e, line, false)?,
            XmlEvent::Empty(e) => parser.open(&e, line, true)?,
            XmlEvent::End(_) => {
                let frame = parser
                    .stack
                    .pop()
                    .ok_or_else(|| Error::parse(format!("line {line}"), "unbalanced closing tag"))?;
                parser.close(frame)?;
            }
            XmlEvent::Eof => break,
            _ => {}
        }
        buf.clear();
    }
    if !parser.stack.is_empty() {
        return Err(Error::parse("end of input", "unclosed element"));
    }
    EventLog::from_traces(parser.traces)
}

pub(super) fn write<W: Write>(
    log: &EventLog,
    extras: Option<&EpsilonAnnotations>,
    mut sink: W,
) -> Result<()> {
    let mut out = String::with_capacity(256 + log.event_count() * 160);
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\" ?>\n");
    out.push_str("<log xes.version=\"1.0\" xes.features=\"nested-attributes\" xmlns=\"http://www.xes-standard.org/\">\n");
    out.push_str("  <extension name=\"Concept\" prefix=\"concept\" uri=\"http://www.xes-standard.org/concept.xesext\"/>\n");
    out.push_str("  <extension name=\"Time\" prefix=\"time\" uri=\"http://www.xes-standard.org/time.xesext\"/>\n");
    for (i, trace) in log.traces().iter().enumerate() {
        out.push_str("  <trace>\n");
        out.push_str(&format!(
            "    <string key=\"concept:name\" value=\"{}\"/>\n",
            escape(trace.case_id.as_str())
        ));
        if let Some(x) = extras {
            out.push_str(&format!(
                "    <float key=\"epsilon_per_trace\" value=\"{}\"/>\n",
                format_epsilon(x.per_trace[i])
            ));
        }
        for (k, event) in trace.events.iter().enumerate() {
            out.push_str("    <event>\n");
            out.push_str(&format!(
                "      <string key=\"concept:name\" value=\"{}\"/>\n",
                escape(event.activity.as_str())
            ));
            out.push_str(&format!(
                "      <date key=\"time:timestamp\" value=\"{}\"/>\n",
                event.timestamp
            ));
            if let Some(x) = extras {
                out.push_str(&format!(
                    "      <float key=\"epsilon_per_event\" value=\"{}\"/>\n",
                    format_epsilon(x.per_event[i][k])
                ));
            }
            out.push_str("    </event>\n");
        }
        out.push_str("  </trace>\n");
    }
    out.push_str("</log>\n");
    sink.write_all(out.as_bytes())?;
    sink.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::*;
    use super::super::*;

    const SAMPLE: &str = r#"<?xml version="1.0" encoding="UTF-8" ?>
<log xes.version="1.0" xmlns="http://www.xes-standard.org/">
  <global scope="trace"><string key="concept:name" value="__INVALID__"/></global>
  <trace>
    <string key="concept:name" value="c&amp;1"/>
    <event>
      <string key="concept:name" value="Register"/>
      <string key="org:resource" value="nurse"/>
      <date key="time:timestamp" value="2014-10-22T11:15:41.000+02:00"/>
      <list key="meta"><string key="concept:name" value="nested"/></list>
    </event>
    <event>
      <string key="concept:name" value="Triage"/>
      <string key="lifecycle:transition" value="complete"/>
      <date key="time:timestamp" value="2014-10-22T11:27:00.000+02:00"/>
    </event>
    <event>
      <string key="concept:name" value="Triage"/>
      <string key="lifecycle:transition" value="start"/>
      <date key="time:timestamp" value="2014-10-22T11:20:00.000+02:00"/>
    </event>
  </trace>
  <trace>
    <string key="concept:name" value="c2"/>
    <event>
      <date key="time:timestamp" value="2014-10-23T08:00:00Z"/>
      <string key="concept:name" value="Register"/>
    </event>
  </trace>
</log>
"#;

    #[test]
    fn parses_subset_and_drops_the_rest() {
        let log = parse_event_log(SAMPLE.as_bytes(), LogFormat::Xes, None).unwrap();
        assert_eq!(log.len(), 2);
        let t = &log.traces()[0];
        assert_eq!(t.case_id, "c&1");
        assert_eq!(t.variant(), vec!["Register", "Triage"]);
        assert_eq!(t.events[0].timestamp, Timestamp::parse("2014-10-22T09:15:41Z").unwrap());
        assert_eq!(log.traces()[1].variant(), vec!["Register"]);
    }

    #[test]
    fn missing_timestamp_is_validation_error() {
        let src = r#"<log><trace><string key="concept:name" value="7"/>
<event><string key="concept:name" value="A"/></event></trace></log>"#;
        match parse_event_log(src.as_bytes(), LogFormat::Xes, None).unwrap_err() {
            Error::Validation(msg) => {
                assert!(msg.contains("case '7'") && msg.contains("'A'") && msg.contains("line 2"), "{msg}")
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_xml_reports_line() {
        let src = "<log>\n<trace>\n<event></trace>\n</log>";
        match parse_event_log(src.as_bytes(), LogFormat::Xes, None).unwrap_err() {
            Error::Parse { locus, .. } => assert!(locus.starts_with("line 3"), "{locus}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_log_is_rejected() {
        let src = "<log></log>";
        assert!(matches!(
            parse_event_log(src.as_bytes(), LogFormat::Xes, None).unwrap_err(),
            Error::Validation(_)
        ));
    }

    #[test]
    fn round_trip_with_annotations() {
        let log = running_example();
        let extras = EpsilonAnnotations {
            per_event: log
                .traces()
                .iter()
                .map(|t| (0..t.len()).map(|k| if k == 0 { f64::INFINITY } else { 1.5 }).collect())
                .collect(),
            per_trace: vec![1.238; log.len()],
        };
        let mut bytes = Vec::new();
        write_event_log(&log, LogFormat::Xes, Some(&extras), &mut bytes).unwrap();
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert_eq!(text.matches("key=\"epsilon_per_event\"").count(), log.event_count());
        assert_eq!(text.matches("key=\"epsilon_per_trace\"").count(), log.len());
        let back = parse_event_log(&bytes[..], LogFormat::Xes, None).unwrap();
        assert_eq!(back, log);
    }
}
