use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::provider::Role;
use super::rectify::ClarificationOrigin;
use crate::topology::Graph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Out,
    In,
}

/// Role column of a transcript line; `error` marks a failed exchange.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TranscriptRole {
    System,
    Experimenter,
    Agent,
    Error,
}

impl From<Role> for TranscriptRole {
    fn from(role: Role) -> Self {
        match role {
            Role::System => TranscriptRole::System,
            Role::Experimenter => TranscriptRole::Experimenter,
            Role::Agent => TranscriptRole::Agent,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageEntry {
    pub t: String,
    pub agent: usize,
    pub dir: Direction,
    pub role: TranscriptRole,
    pub content: String,
    /// 0 for the tutorial exchanges before the first choice.
    pub round: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<ClarificationOrigin>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphEntry {
    pub round: u32,
    pub graph: Graph,
}

/// One line of `transcripts.jsonl`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TranscriptEntry {
    Message(MessageEntry),
    Graph(GraphEntry),
}

/// Append-only transcript of one repetition.
#[derive(Debug, Default)]
pub struct TranscriptLog {
    entries: Mutex<Vec<TranscriptEntry>>,
}

impl TranscriptLog {
    pub fn push(&self, entry: TranscriptEntry) {
        self.entries.lock().unwrap().push(entry);
    }

    pub fn snapshot(&self) -> Vec<TranscriptEntry> {
        self.entries.lock().unwrap().clone()
    }

    pub fn take(&self) -> Vec<TranscriptEntry> {
        std::mem::take(&mut self.entries.lock().unwrap())
    }
}

/// Messages exchanged with one agent, in order.
pub fn dialogue_of(entries: &[TranscriptEntry], agent: usize) -> Vec<&MessageEntry> {
    entries
        .iter()
        .filter_map(|e| match e {
            TranscriptEntry::Message(m) if m.agent == agent => Some(m),
            _ => None,
        })
        .collect()
}
