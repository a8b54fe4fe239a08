use std::io::{BufRead, Write};

use super::{Action, FsmEvent};
use crate::error::{Error, Result};

/// Reads one event per line; blank lines are skipped.
pub fn read_events_jsonl<R: BufRead>(reader: R, context: &str) -> Result<Vec<FsmEvent>> {
    let mut events = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::parse(format!("{context}:{}", n + 1), e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let event = serde_json::from_str(&line)
            .map_err(|e| Error::parse(format!("{context}:{}", n + 1), e.to_string()))?;
        events.push(event);
    }
    Ok(events)
}

pub fn write_events_jsonl<W: Write>(mut out: W, events: &[FsmEvent]) -> std::io::Result<()> {
    for e in events {
        serde_json::to_writer(&mut out, e)?;
        writeln!(out)?;
    }
    Ok(())
}

pub fn write_actions_jsonl<W: Write>(mut out: W, actions: &[Action]) -> std::io::Result<()> {
    for a in actions {
        serde_json::to_writer(&mut out, a)?;
        writeln!(out)?;
    }
    Ok(())
}
