//! Chat-model agents: dialogue templates, reply parsing, rectification and the
//! provider wire protocol.

mod agent;
mod clock;
#[cfg(feature = "http")]
mod http;
mod parse;
mod prompts;
mod provider;
mod rectify;
mod transcript;

pub use agent::{ChatAgent, ChatAgentSpec, LimiterPool};
pub use clock::{Clock, ManualClock, SystemClock, TokenBucket};
#[cfg(feature = "http")]
pub use http::HttpProvider;
pub use parse::{parse_action, ParsedReply};
pub use prompts::{fill, render_feedback, FeedbackTemplate, PromptTemplateSet, TemplateError, TutorialBindings};
pub use provider::{
    provider_for, ChatClient, ChatMessage, ChatProvider, ChatRequest, ChatResponse, LlmError, MockProvider,
    MockScript, MockStep, ProviderConfig, Role, WireMessage, BACKOFF_BASE,
};
pub use rectify::{
    rectify, ClarificationOrigin, DialogueControl, DialogueStatus, InjectError, RectificationOutcome,
    RectificationState, RectifyError, MAX_ATTEMPTS,
};
pub use transcript::{
    dialogue_of, Direction, GraphEntry, MessageEntry, TranscriptEntry, TranscriptLog, TranscriptRole,
};
