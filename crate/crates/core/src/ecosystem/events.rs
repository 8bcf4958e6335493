//! JSON-lines event log.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::model::HabitatId;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EventKind {
    Request,
    Evolved,
    Executed,
    Skipped,
    Registered,
    Migrated,
    LinkCreated,
    LinkRemoved,
    Escape,
    Deleted,
    Disconnected,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Event {
    pub round: u64,
    pub phase: u8,
    #[serde(rename = "type")]
    pub kind: EventKind,
    pub habitat: HabitatId,
    pub payload: Value,
}

impl Event {
    pub fn new(round: u64, phase: u8, kind: EventKind, habitat: HabitatId, payload: Value) -> Self {
        Self {
            round,
            phase,
            kind,
            habitat,
            payload,
        }
    }

    /// Ordering key; the sequence number is the position in the log.
    pub fn key(&self) -> (u64, u8, HabitatId) {
        (self.round, self.phase, self.habitat)
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("events always serialize")
    }
}

#[derive(Debug, thiserror::Error)]
#[error("line {line}: {source}")]
pub struct EventParseError {
    pub line: usize,
    #[source]
    pub source: serde_json::Error,
}

pub fn parse_event_line(line: &str) -> Result<Event, serde_json::Error> {
    serde_json::from_str(line)
}

/// Parses a whole log; blank lines are skipped, line numbers are 1-based.
pub fn parse_jsonl(text: &str) -> Result<Vec<Event>, EventParseError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| parse_event_line(l).map_err(|source| EventParseError { line: i + 1, source }))
        .collect()
}

pub fn write_jsonl<W: Write>(events: &[Event], mut out: W) -> io::Result<()> {
    for e in events {
        out.write_all(e.to_line().as_bytes())?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn to_jsonl(events: &[Event]) -> String {
    let mut s = String::new();
    for e in events {
        s.push_str(&e.to_line());
        s.push('\n');
    }
    s
}

/// True when `(round, phase, habitat)` never decreases along the log, which
/// together with the line position makes the full key strictly increasing.
pub fn is_ordered(events: &[Event]) -> bool {
    events.windows(2).all(|w| w[0].key() <= w[1].key())
}
