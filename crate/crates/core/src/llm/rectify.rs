//! Handling of replies that are not a bare C or D.
//!
//! Every ambiguous reply to a choice request uses up one attempt. The first
//! two are answered with a clarification and the reply is parsed again; the
//! third ambiguous reply fails the dialogue.

use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::parse::{parse_action, ParsedReply};
use crate::game::Action;

pub const MAX_ATTEMPTS: u32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "outcome", content = "action")]
pub enum RectificationOutcome {
    Pending,
    Resolved(Action),
    Failed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RectificationState {
    pub attempts_used: u32,
    pub outcome: RectificationOutcome,
}

impl Default for RectificationState {
    fn default() -> Self {
        RectificationState {
            attempts_used: 0,
            outcome: RectificationOutcome::Pending,
        }
    }
}

impl RectificationState {
    /// Feeds one reply into the state machine.
    pub fn on_reply(&mut self, reply: &str) -> RectificationOutcome {
        assert_eq!(self.outcome, RectificationOutcome::Pending, "dialogue already settled");
        self.outcome = match parse_action(reply) {
            ParsedReply::Action(action) => RectificationOutcome::Resolved(action),
            ParsedReply::Ambiguous => {
                self.attempts_used += 1;
                if self.attempts_used >= MAX_ATTEMPTS {
                    RectificationOutcome::Failed
                } else {
                    RectificationOutcome::Pending
                }
            }
        };
        self.outcome
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RectifyError<E> {
    #[error("no valid choice after {attempts} ambiguous replies")]
    Failed { attempts: u32 },
    #[error(transparent)]
    Send(E),
}

/// Drives the rectification loop from the first reply. `clarify` is called
/// with the attempt count so far, sends a clarification and returns the new
/// reply. Transport errors from `clarify` pass through untouched.
pub fn rectify<E>(
    first_reply: &str,
    state: &mut RectificationState,
    mut clarify: impl FnMut(u32) -> Result<String, E>,
) -> Result<Action, RectifyError<E>> {
    let mut outcome = state.on_reply(first_reply);
    loop {
        match outcome {
            RectificationOutcome::Resolved(action) => return Ok(action),
            RectificationOutcome::Failed => {
                return Err(RectifyError::Failed {
                    attempts: state.attempts_used,
                })
            }
            RectificationOutcome::Pending => {
                let reply = clarify(state.attempts_used).map_err(RectifyError::Send)?;
                outcome = state.on_reply(&reply);
            }
        }
    }
}

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum InjectError {
    #[error("dialogue is not awaiting a clarification")]
    NotFlagged,
    #[error("dialogue already failed")]
    Exhausted,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct DialogueStatus {
    pub flagged: bool,
    /// Ambiguous replies in the current, or most recently settled, choice.
    pub attempts_used: u32,
    pub exhausted: bool,
    pub pending_override: Option<String>,
}

/// Where a clarification came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClarificationOrigin {
    Canned,
    Operator,
}

/// Shared between a chat agent and the operator console: lets an operator
/// replace the canned clarification while a dialogue is flagged.
#[derive(Debug, Default)]
pub struct DialogueControl {
    status: Mutex<DialogueStatus>,
    changed: Condvar,
}

impl DialogueControl {
    pub fn status(&self) -> DialogueStatus {
        self.status.lock().unwrap().clone()
    }

    pub fn flag(&self, attempts_used: u32) {
        let mut s = self.status.lock().unwrap();
        s.flagged = true;
        s.attempts_used = attempts_used;
    }

    pub fn settle(&self, attempts_used: u32, failed: bool) {
        let mut s = self.status.lock().unwrap();
        s.flagged = false;
        s.pending_override = None;
        s.attempts_used = attempts_used;
        s.exhausted |= failed;
    }

    pub fn inject(&self, text: String) -> Result<(), InjectError> {
        let mut s = self.status.lock().unwrap();
        if s.exhausted {
            return Err(InjectError::Exhausted);
        }
        if !s.flagged {
            return Err(InjectError::NotFlagged);
        }
        s.pending_override = Some(text);
        self.changed.notify_all();
        Ok(())
    }

    /// Text for the next clarification: an operator override if one arrives
    /// within `wait`, otherwise `canned`.
    pub fn next_clarification(&self, canned: &str, wait: Duration) -> (String, ClarificationOrigin) {
        let s = self.status.lock().unwrap();
        let (mut s, _) = self
            .changed
            .wait_timeout_while(s, wait, |s| s.pending_override.is_none())
            .unwrap();
        match s.pending_override.take() {
            Some(text) => (text, ClarificationOrigin::Operator),
            None => (canned.to_string(), ClarificationOrigin::Canned),
        }
    }
}
