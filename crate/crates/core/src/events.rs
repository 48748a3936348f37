//! Append-only record of every control-plane event.

use std::io::Write;
use std::sync::{Arc, Mutex};

use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Request,
    Confirm,
    Delete,
    Renew,
    Purge,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct EventRecord {
    /// Milliseconds since the Unix epoch, from the engine clock.
    pub ts: u64,
    pub event: EventKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub id: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub group: Option<u16>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub user: Option<u32>,
    pub outcome: String,
}

pub trait EventSink: Send {
    fn record(&mut self, event: &EventRecord);
}

/// Writes one JSON object per line.
pub struct JsonLinesSink<W: Write + Send>(pub W);

impl<W: Write + Send> EventSink for JsonLinesSink<W> {
    fn record(&mut self, event: &EventRecord) {
        let line = serde_json::to_string(event).expect("event records always serialize");
        if let Err(e) = writeln!(self.0, "{line}").and_then(|_| self.0.flush()) {
            log::warn!("event log write failed: {e}");
        }
    }
}

/// Keeps records in memory; clones share the buffer.
#[derive(Clone, Default)]
pub struct MemorySink(pub Arc<Mutex<Vec<EventRecord>>>);

impl MemorySink {
    pub fn records(&self) -> Vec<EventRecord> {
        self.0.lock().unwrap().clone()
    }
}

impl EventSink for MemorySink {
    fn record(&mut self, event: &EventRecord) {
        self.0.lock().unwrap().push(event.clone());
    }
}
