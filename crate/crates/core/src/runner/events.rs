use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::game::Action;
use crate::llm::ClarificationOrigin;

use super::experiment::RepetitionStatus;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EventKind {
    ExperimentStarted {
        repetitions: u32,
    },
    RepetitionStarted {
        seed: u64,
    },
    RoundStarted {
        round: u32,
    },
    AwaitingInput {
        round: u32,
        agent: usize,
    },
    DialogueFlagged {
        round: u32,
        agent: usize,
        attempts_used: u32,
    },
    ClarificationSent {
        round: u32,
        agent: usize,
        origin: ClarificationOrigin,
    },
    ActionRecorded {
        round: u32,
        agent: usize,
        action: Action,
        #[serde(default, skip_serializing_if = "std::ops::Not::not")]
        substituted: bool,
    },
    RoundResolved {
        round: u32,
        cooperators: usize,
        cooperation: f64,
    },
    RepetitionFinished {
        outcome: RepetitionStatus,
    },
    ExperimentFinished {
        completed: usize,
        failed: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub seq: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repetition: Option<usize>,
    #[serde(flatten)]
    pub kind: EventKind,
}

pub trait EventSink: Send + Sync {
    fn emit(&self, repetition: Option<usize>, kind: EventKind);
}

/// Discards everything.
pub struct NullSink;

impl EventSink for NullSink {
    fn emit(&self, _repetition: Option<usize>, _kind: EventKind) {}
}

/// Append-only, sequence-numbered event log that readers can follow.
#[derive(Debug, Default)]
pub struct EventLog {
    events: Mutex<Vec<Event>>,
    appended: Condvar,
}

impl EventSink for EventLog {
    fn emit(&self, repetition: Option<usize>, kind: EventKind) {
        let mut events = self.events.lock().unwrap();
        let seq = events.len() as u64;
        events.push(Event { seq, repetition, kind });
        self.appended.notify_all();
    }
}

impl EventLog {
    pub fn len(&self) -> usize {
        self.events.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Events with `seq >= from`.
    pub fn since(&self, from: u64) -> Vec<Event> {
        let events = self.events.lock().unwrap();
        events.get(from as usize..).map(<[Event]>::to_vec).unwrap_or_default()
    }

    /// Like [`since`](Self::since) but waits up to `timeout` for new events.
    pub fn wait_since(&self, from: u64, timeout: Duration) -> Vec<Event> {
        let events = self.events.lock().unwrap();
        let (events, _) = self
            .appended
            .wait_timeout_while(events, timeout, |e| e.len() as u64 <= from)
            .unwrap();
        events.get(from as usize..).map(<[Event]>::to_vec).unwrap_or_default()
    }

    pub fn for_repetition(&self, repetition: usize) -> Vec<Event> {
        self.events
            .lock()
            .unwrap()
            .iter()
            .filter(|e| e.repetition == Some(repetition))
            .cloned()
            .collect()
    }

    pub fn is_finished(&self) -> bool {
        self.events
            .lock()
            .unwrap()
            .last()
            .is_some_and(|e| matches!(e.kind, EventKind::ExperimentFinished { .. }))
    }
}
