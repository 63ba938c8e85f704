use std::collections::BTreeMap;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant};

use serde::Serialize;
use thiserror::Error;

use super::{Agent, AgentEnv, AgentError, Observation};
use crate::game::Action;
use crate::llm::PromptTemplateSet;
use crate::runner::{EventKind, EventSink};

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum SubmitError {
    #[error("agent {0} is not a human participant")]
    UnknownAgent(usize),
    #[error("agent {0} is not awaiting input")]
    NotAwaiting(usize),
    #[error("agent {0} already submitted a choice for this round")]
    AlreadySubmitted(usize),
}

#[derive(Debug, Default, Clone, Serialize)]
pub struct HumanSlot {
    pub awaiting_round: Option<u32>,
    pub submitted: Option<Action>,
    pub last_feedback: Option<String>,
}

/// Rendezvous between the round barrier and human submissions.
#[derive(Debug, Default)]
pub struct HumanGate {
    slots: Mutex<BTreeMap<usize, HumanSlot>>,
    changed: Condvar,
    closed: AtomicBool,
}

impl HumanGate {
    pub fn register(&self, agent: usize) {
        self.slots.lock().unwrap().entry(agent).or_default();
    }

    /// Wakes every waiter and makes further waits return immediately.
    pub fn close(&self) {
        let _slots = self.slots.lock().unwrap();
        self.closed.store(true, Ordering::SeqCst);
        self.changed.notify_all();
    }

    /// Blocks until a choice arrives for `round`, the timeout elapses or the
    /// gate is closed.
    pub fn wait_for_action(&self, agent: usize, round: u32, timeout: Duration) -> Option<Action> {
        let deadline = Instant::now() + timeout;
        let mut slots = self.slots.lock().unwrap();
        {
            let slot = slots.entry(agent).or_default();
            slot.awaiting_round = Some(round);
            slot.submitted = None;
        }
        loop {
            let slot = slots.get_mut(&agent).expect("registered above");
            if let Some(action) = slot.submitted.take() {
                slot.awaiting_round = None;
                return Some(action);
            }
            let now = Instant::now();
            if now >= deadline || self.closed.load(Ordering::SeqCst) {
                slot.awaiting_round = None;
                return None;
            }
            slots = self.changed.wait_timeout(slots, deadline - now).unwrap().0;
        }
    }

    /// Delivers a choice; returns the round it applies to.
    pub fn submit(&self, agent: usize, action: Action) -> Result<u32, SubmitError> {
        let mut slots = self.slots.lock().unwrap();
        let slot = slots.get_mut(&agent).ok_or(SubmitError::UnknownAgent(agent))?;
        let round = slot.awaiting_round.ok_or(SubmitError::NotAwaiting(agent))?;
        if slot.submitted.is_some() {
            return Err(SubmitError::AlreadySubmitted(agent));
        }
        slot.submitted = Some(action);
        self.changed.notify_all();
        Ok(round)
    }

    pub fn set_feedback(&self, agent: usize, text: String) {
        self.slots.lock().unwrap().entry(agent).or_default().last_feedback = Some(text);
    }

    pub fn snapshot(&self) -> BTreeMap<usize, HumanSlot> {
        self.slots.lock().unwrap().clone()
    }

    /// Agents currently awaiting input, with the round they owe.
    pub fn pending(&self) -> Vec<(usize, u32)> {
        self.slots
            .lock()
            .unwrap()
            .iter()
            .filter_map(|(&id, s)| s.awaiting_round.filter(|_| s.submitted.is_none()).map(|r| (id, r)))
            .collect()
    }
}

/// A participant playing through the control surface.
pub struct HumanAgent {
    id: usize,
    repetition: usize,
    gate: Arc<HumanGate>,
    sink: Arc<dyn EventSink>,
    timeout: Duration,
    templates: PromptTemplateSet,
}

impl HumanAgent {
    pub fn new(id: usize, env: &AgentEnv) -> Self {
        let gate = env.control.humans.clone();
        gate.register(id);
        HumanAgent {
            id,
            repetition: env.repetition,
            gate,
            sink: env.sink.clone(),
            timeout: env.human_timeout,
            templates: PromptTemplateSet::default(),
        }
    }
}

impl Agent for HumanAgent {
    fn decide(&mut self, round: u32) -> Result<Action, AgentError> {
        self.sink.emit(
            Some(self.repetition),
            EventKind::AwaitingInput { round, agent: self.id },
        );
        self.gate
            .wait_for_action(self.id, round, self.timeout)
            .ok_or(AgentError::Timeout(self.timeout))
    }

    fn observe(&mut self, obs: &Observation) -> Result<(), AgentError> {
        let text = self
            .templates
            .render_feedback(obs)
            .map_err(|e| AgentError::Template(e.to_string()))?;
        self.gate.set_feedback(self.id, text);
        Ok(())
    }

    fn is_blocking(&self) -> bool {
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::thread;

    #[test]
    fn submit_unblocks_waiter() {
        let gate = Arc::new(HumanGate::default());
        gate.register(3);
        assert_eq!(gate.submit(3, Action::Cooperate), Err(SubmitError::NotAwaiting(3)));
        let waiter = {
            let gate = gate.clone();
            thread::spawn(move || gate.wait_for_action(3, 1, Duration::from_secs(10)))
        };
        while gate.pending().is_empty() {
            thread::yield_now();
        }
        assert_eq!(gate.pending(), vec![(3, 1)]);
        assert_eq!(gate.submit(3, Action::Cooperate), Ok(1));
        let second = gate.submit(3, Action::Defect);
        assert!(matches!(
            second,
            Err(SubmitError::AlreadySubmitted(3)) | Err(SubmitError::NotAwaiting(3))
        ));
        assert_eq!(waiter.join().unwrap(), Some(Action::Cooperate));
        assert_eq!(gate.submit(3, Action::Defect), Err(SubmitError::NotAwaiting(3)));
    }

    #[test]
    fn timeout_returns_none_and_rejects_late_submission() {
        let gate = HumanGate::default();
        assert_eq!(gate.wait_for_action(1, 1, Duration::from_millis(20)), None);
        assert_eq!(gate.submit(1, Action::Cooperate), Err(SubmitError::NotAwaiting(1)));
        assert_eq!(gate.submit(9, Action::Cooperate), Err(SubmitError::UnknownAgent(9)));
    }

    #[test]
    fn close_releases_waiters() {
        let gate = Arc::new(HumanGate::default());
        let waiter = {
            let gate = gate.clone();
            thread::spawn(move || gate.wait_for_action(0, 1, Duration::from_secs(60)))
        };
        while gate.pending().is_empty() {
            thread::yield_now();
        }
        gate.close();
        assert_eq!(waiter.join().unwrap(), None);
    }
}
