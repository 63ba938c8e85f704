use std::collections::BTreeMap;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};

use thiserror::Error;

use crate::agents::HumanGate;
use crate::llm::{DialogueControl, DialogueStatus, InjectError, LimiterPool, TranscriptEntry, TranscriptLog};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ControlError {
    #[error("agent {0} has no chat dialogue")]
    UnknownDialogue(usize),
    #[error(transparent)]
    Inject(#[from] InjectError),
}

/// Live handles into a running experiment: human input, operator dialogue
/// overrides and abort.
#[derive(Debug, Default)]
pub struct ControlSurface {
    pub humans: Arc<HumanGate>,
    pub limiters: LimiterPool,
    dialogues: Mutex<BTreeMap<usize, Arc<DialogueControl>>>,
    transcript: Mutex<Option<(usize, Arc<TranscriptLog>)>>,
    aborted: AtomicBool,
}

impl ControlSurface {
    /// Installs a fresh dialogue control for `agent`, replacing any from an
    /// earlier repetition.
    pub fn register_dialogue(&self, agent: usize) -> Arc<DialogueControl> {
        let control = Arc::new(DialogueControl::default());
        self.dialogues.lock().unwrap().insert(agent, control.clone());
        control
    }

    pub fn dialogue(&self, agent: usize) -> Option<Arc<DialogueControl>> {
        self.dialogues.lock().unwrap().get(&agent).cloned()
    }

    pub fn dialogue_statuses(&self) -> BTreeMap<usize, DialogueStatus> {
        self.dialogues
            .lock()
            .unwrap()
            .iter()
            .map(|(&id, c)| (id, c.status()))
            .collect()
    }

    pub fn inject(&self, agent: usize, text: String) -> Result<(), ControlError> {
        let control = self.dialogue(agent).ok_or(ControlError::UnknownDialogue(agent))?;
        Ok(control.inject(text)?)
    }

    /// Publishes the transcript of the repetition now running.
    pub fn set_transcript(&self, repetition: usize, log: Arc<TranscriptLog>) {
        *self.transcript.lock().unwrap() = Some((repetition, log));
    }

    /// Transcript lines of the most recent repetition so far.
    pub fn live_transcript(&self) -> Option<(usize, Vec<TranscriptEntry>)> {
        let guard = self.transcript.lock().unwrap();
        guard.as_ref().map(|(rep, log)| (*rep, log.snapshot()))
    }

    pub fn abort(&self) {
        self.aborted.store(true, Ordering::SeqCst);
        self.humans.close();
    }

    pub fn is_aborted(&self) -> bool {
        self.aborted.load(Ordering::SeqCst)
    }
}
