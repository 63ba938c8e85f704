use serde::{Deserialize, Serialize};

use crate::game::Action;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ParsedReply {
    Action(Action),
    Ambiguous,
}

fn is_wrapper(c: char) -> bool {
    c.is_whitespace() || c.is_ascii_punctuation() || matches!(c, '“' | '”' | '‘' | '’' | '—' | '–')
}

fn letter(s: &str) -> Option<Action> {
    match s {
        "c" | "C" => Some(Action::Cooperate),
        "d" | "D" => Some(Action::Defect),
        _ => None,
    }
}

/// Strict reply parser. After stripping surrounding whitespace, punctuation
/// and quotes the reply must be a lone `C` or `D` (any case), or its first
/// word must be `C.` or `D.`. Anything else is ambiguous, including prose
/// that names the action.
pub fn parse_action(reply: &str) -> ParsedReply {
    if let Some(action) = letter(reply.trim_matches(is_wrapper)) {
        return ParsedReply::Action(action);
    }
    let first = reply
        .trim_start_matches(is_wrapper)
        .split_whitespace()
        .next()
        .unwrap_or("");
    match first.strip_suffix('.').and_then(letter) {
        Some(action) => ParsedReply::Action(action),
        None => ParsedReply::Ambiguous,
    }
}
