use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::clock::{Clock, TokenBucket};
use super::prompts::{PromptTemplateSet, TutorialBindings};
use super::provider::{provider_for, ChatClient, ChatMessage, LlmError, ProviderConfig};
use super::rectify::{rectify, ClarificationOrigin, DialogueControl, RectificationState, RectifyError};
use super::transcript::{Direction, MessageEntry, TranscriptEntry, TranscriptLog, TranscriptRole};
use crate::agents::{Agent, AgentEnv, AgentError, Observation};
use crate::game::Action;
use crate::runner::{EventKind, EventSink};

/// Chat-model agent as written in experiment configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChatAgentSpec {
    pub provider: ProviderConfig,
    /// Round count announced in the tutorial; defaults to the configured rounds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub announced_rounds: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub templates: Option<PromptTemplateSet>,
    /// How long a flagged dialogue waits for an operator clarification before
    /// sending the canned one.
    #[serde(default)]
    pub clarification_wait_ms: u64,
}

impl ChatAgentSpec {
    pub fn mock(script: super::MockScript) -> Self {
        ChatAgentSpec {
            provider: ProviderConfig::mock(script),
            announced_rounds: None,
            templates: None,
            clarification_wait_ms: 0,
        }
    }

    pub fn validate(&self) -> Result<(), AgentError> {
        self.provider
            .validate()
            .map_err(|e| AgentError::Config(e.to_string()))?;
        if let Some(t) = &self.templates {
            t.validate().map_err(|e| AgentError::Config(e.to_string()))?;
        }
        Ok(())
    }
}

/// Rate limiters shared by every agent talking to the same endpoint and model.
#[derive(Debug, Default)]
pub struct LimiterPool {
    buckets: Mutex<HashMap<(String, String), Arc<TokenBucket>>>,
}

impl LimiterPool {
    pub fn get(&self, config: &ProviderConfig) -> Arc<TokenBucket> {
        if config.is_mock() {
            return Arc::new(TokenBucket::per_minute(config.rate_limit_per_min));
        }
        self.buckets
            .lock()
            .unwrap()
            .entry((config.endpoint.clone(), config.model.clone()))
            .or_insert_with(|| Arc::new(TokenBucket::per_minute(config.rate_limit_per_min)))
            .clone()
    }
}

/// Plays the game through a chat conversation: tutorial, choice requests,
/// per-round feedback and rectification of unclear replies.
pub struct ChatAgent {
    id: usize,
    repetition: usize,
    client: ChatClient,
    templates: PromptTemplateSet,
    bindings: TutorialBindings,
    history: Vec<ChatMessage>,
    pending_feedback: Option<String>,
    transcript: Arc<TranscriptLog>,
    sink: Arc<dyn EventSink>,
    control: Arc<DialogueControl>,
    clock: Arc<dyn Clock>,
    clarification_wait: Duration,
}

impl ChatAgent {
    pub fn new(id: usize, spec: &ChatAgentSpec, env: &AgentEnv) -> Result<Self, AgentError> {
        spec.validate()?;
        let provider = provider_for(&spec.provider).map_err(|e| AgentError::Config(e.to_string()))?;
        let limiter = env.control.limiters.get(&spec.provider);
        let client = ChatClient::new(spec.provider.clone(), provider, limiter, env.clock.clone());
        Ok(ChatAgent {
            id,
            repetition: env.repetition,
            client,
            templates: spec.templates.clone().unwrap_or_default(),
            bindings: TutorialBindings::new(&env.params, spec.announced_rounds.unwrap_or(env.rounds), env.mode),
            history: Vec::new(),
            pending_feedback: None,
            transcript: env.transcript.clone(),
            sink: env.sink.clone(),
            control: env.control.register_dialogue(id),
            clock: env.clock.clone(),
            clarification_wait: Duration::from_millis(spec.clarification_wait_ms),
        })
    }

    fn log(&self, round: u32, dir: Direction, role: TranscriptRole, content: &str, origin: Option<ClarificationOrigin>) {
        self.transcript.push(TranscriptEntry::Message(MessageEntry {
            t: self.clock.timestamp(),
            agent: self.id,
            dir,
            role,
            content: content.to_string(),
            round,
            origin,
        }));
    }

    /// Sends one experimenter message and returns the reply text.
    fn exchange(&mut self, round: u32, text: String, origin: Option<ClarificationOrigin>) -> Result<String, AgentError> {
        self.log(round, Direction::Out, TranscriptRole::Experimenter, &text, origin);
        self.history.push(ChatMessage::experimenter(text));
        let reply = {
            let (client, history) = (&self.client, &self.history);
            let mut failures = Vec::new();
            let result = client.chat(history, &mut |e: &LlmError| failures.push(e.to_string()));
            for failure in &failures {
                self.log(round, Direction::In, TranscriptRole::Error, failure, None);
            }
            result.map_err(|e| AgentError::Transport(e.to_string()))?
        };
        if reply.content.trim().is_empty() {
            self.log(round, Direction::In, TranscriptRole::Error, "empty reply", None);
            return Err(AgentError::Transport("provider returned an empty reply".into()));
        }
        self.log(round, Direction::In, TranscriptRole::Agent, &reply.content, None);
        let content = reply.content.clone();
        self.history.push(reply);
        Ok(content)
    }

    pub fn history(&self) -> &[ChatMessage] {
        &self.history
    }
}

impl Agent for ChatAgent {
    fn decide(&mut self, round: u32) -> Result<Action, AgentError> {
        let request = if round == 1 {
            let opening = self
                .templates
                .opening(&self.bindings)
                .map_err(|e| AgentError::Template(e.to_string()))?;
            for text in opening {
                self.exchange(0, text, None)?;
            }
            self.templates.action_request.clone()
        } else {
            self.pending_feedback
                .take()
                .ok_or_else(|| AgentError::Protocol(format!("no feedback queued before round {round}")))?
        };
        let first = self.exchange(round, request, None)?;
        let mut state = RectificationState::default();
        let canned = self.templates.clarification.clone();
        let wait = self.clarification_wait;
        let control = self.control.clone();
        let sink = self.sink.clone();
        let (id, repetition) = (self.id, self.repetition);
        let result = rectify(&first, &mut state, |attempts_used| {
            control.flag(attempts_used);
            sink.emit(
                Some(repetition),
                EventKind::DialogueFlagged {
                    round,
                    agent: id,
                    attempts_used,
                },
            );
            let (text, origin) = control.next_clarification(&canned, wait);
            sink.emit(
                Some(repetition),
                EventKind::ClarificationSent { round, agent: id, origin },
            );
            self.exchange(round, text, Some(origin))
        });
        match result {
            Ok(action) => {
                self.control.settle(state.attempts_used, false);
                Ok(action)
            }
            Err(RectifyError::Failed { attempts }) => {
                self.control.settle(attempts, true);
                Err(AgentError::RectificationFailed { round, attempts })
            }
            Err(RectifyError::Send(e)) => {
                self.control.settle(state.attempts_used, false);
                Err(e)
            }
        }
    }

    fn observe(&mut self, obs: &Observation) -> Result<(), AgentError> {
        let text = self
            .templates
            .render_feedback(obs)
            .map_err(|e| AgentError::Template(e.to_string()))?;
        self.pending_feedback = Some(text);
        Ok(())
    }

    fn is_blocking(&self) -> bool {
        !self.client.config().is_mock()
    }
}
