//! Experimenter-side dialogue text. The defaults are the instructions shown to
//! human participants, prefixed with a request to act as a human.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::Observation;
use crate::game::GameParams;
use crate::topology::TopologyMode;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TemplateError {
    #[error("unknown placeholder {{{0}}}")]
    UnknownPlaceholder(String),
    #[error("unterminated placeholder in {0:?}")]
    Unterminated(String),
    #[error("neighbor labels must run 1..={expected} in order, found {found:?}")]
    LabelMismatch { expected: usize, found: Vec<usize> },
}

/// Sentences of the per-round feedback message.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeedbackTemplate {
    /// Placeholders: `{action}`, `{paid}`, `{gained}`, `{net}`.
    pub own: String,
    /// Placeholders: `{label}`, `{action}`, `{paid}`, `{from_you}`, `{from_others}`, `{net}`.
    pub neighbor: String,
    pub closing: String,
}

/// Every experimenter message. Numeric placeholders (`{cost}`, `{benefit}`,
/// `{rounds}`, `{points_per_dollar}`, `{partners}`) are bound from the game
/// parameters and topology only.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PromptTemplateSet {
    pub persona_preamble: String,
    pub tutorial_steps: Vec<String>,
    pub readiness_checks: Vec<String>,
    pub action_request: String,
    pub feedback: FeedbackTemplate,
    pub clarification: String,
    /// `{partners}` in a fixed network.
    pub partners_fixed: String,
    /// `{partners}` when partners are re-drawn every round.
    pub partners_rematched: String,
}

impl Default for PromptTemplateSet {
    fn default() -> Self {
        PromptTemplateSet {
            persona_preamble: "Pretend you are a human playing a prisoner's dilemma game in a lab environment. \
                I will now explain the rules to you, are you ready?"
                .into(),
            tutorial_steps: vec![
                "The game will be played over a series of rounds. In every round, you make a choice about \
                 whether to pay to give points to the other players you are connected to. The game will last \
                 for about {rounds} rounds. You will be connected to {partners} every round. We now describe \
                 the game in more detail. Are you ready?"
                    .into(),
                "In every round, you choose whether to pay to give points to the people you are connected to. \
                 If you choose to cooperate (represented by \"C\"), you pay {cost} points for each player you \
                 are connected to, and each of them gains {benefit} points. If you choose to defect \
                 (represented by \"D\"), you do not pay any points and do not change the points of the players \
                 you are connected to. Each player you are connected to has the same choice. For each of them \
                 that chooses \"C,\" you gain {benefit} points. Once everyone makes a decision, I will tell you \
                 the result of the round. You will be shown the choices of each player you are connected to \
                 and how many points in total you gained or lost. You will also be shown how many points each \
                 player you are connected to gained or lost in total. These numbers are affected by your \
                 choice, their choice, and also the choices of any other players connected by them who may or \
                 may not be connected to you. Remember, for every {points_per_dollar} points you have at the \
                 end of the game, we will pay you 1 dollar. You should aim to get as many points as you can. \
                 Do you understand?"
                    .into(),
                "You have now completed the tutorial. Are you ready to play the game?".into(),
            ],
            readiness_checks: vec![
                "Thank you for completing the tutorial. You will now be playing with other participants. \
                 Please only give your choice with \"D\" or \"C.\" Are you ready?"
                    .into(),
            ],
            action_request: "Please make a choice for the first round. Please only reply with \"D\" or \"C.\"".into(),
            feedback: FeedbackTemplate {
                own: "Last round, you chose {action}, paid {paid} points, and gained {gained} points, \
                      for a total of {net} points."
                    .into(),
                neighbor: "Neighbor {label} chose {action}, paid {paid} points, and gained {from_you} points \
                           from you and {from_others} points from other players, for a total of {net} points."
                    .into(),
                closing: "Please choose D or C for the current round.".into(),
            },
            clarification: "Please only reply with \"D\" or \"C.\"".into(),
            partners_fixed: "the same people".into(),
            partners_rematched: "different people".into(),
        }
    }
}

/// Values substituted into the tutorial.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TutorialBindings {
    pub cost: i64,
    pub benefit: i64,
    pub rounds: u32,
    pub points_per_dollar: u32,
    pub fixed_partners: bool,
}

impl TutorialBindings {
    pub fn new(params: &GameParams, announced_rounds: u32, mode: TopologyMode) -> Self {
        TutorialBindings {
            cost: params.cost(),
            benefit: params.benefit_per_edge(),
            rounds: announced_rounds,
            points_per_dollar: params.points_per_dollar,
            fixed_partners: mode != TopologyMode::WellMixed,
        }
    }
}

/// Replaces `{name}` placeholders from `values`.
pub fn fill(template: &str, values: &BTreeMap<&str, String>) -> Result<String, TemplateError> {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(start) = rest.find('{') {
        out.push_str(&rest[..start]);
        let after = &rest[start + 1..];
        let end = after
            .find('}')
            .ok_or_else(|| TemplateError::Unterminated(template.to_string()))?;
        let name = &after[..end];
        let value = values
            .get(name)
            .ok_or_else(|| TemplateError::UnknownPlaceholder(name.to_string()))?;
        out.push_str(value);
        rest = &after[end + 1..];
    }
    out.push_str(rest);
    Ok(out)
}

impl PromptTemplateSet {
    /// Experimenter messages sent before the first choice, in order; each one
    /// waits for a (free-form) reply.
    pub fn opening(&self, bindings: &TutorialBindings) -> Result<Vec<String>, TemplateError> {
        let partners = if bindings.fixed_partners {
            &self.partners_fixed
        } else {
            &self.partners_rematched
        };
        let values = BTreeMap::from([
            ("cost", bindings.cost.to_string()),
            ("benefit", bindings.benefit.to_string()),
            ("rounds", bindings.rounds.to_string()),
            ("points_per_dollar", bindings.points_per_dollar.to_string()),
            ("partners", partners.clone()),
        ]);
        std::iter::once(&self.persona_preamble)
            .chain(&self.tutorial_steps)
            .chain(&self.readiness_checks)
            .map(|t| fill(t, &values))
            .collect()
    }

    pub fn render_feedback(&self, obs: &Observation) -> Result<String, TemplateError> {
        let labels: Vec<usize> = obs.neighbors.iter().map(|n| n.label).collect();
        if labels.iter().enumerate().any(|(i, &l)| l != i + 1) {
            return Err(TemplateError::LabelMismatch {
                expected: labels.len(),
                found: labels,
            });
        }
        let own = BTreeMap::from([
            ("action", obs.my_action.to_string()),
            ("paid", obs.my_paid.to_string()),
            ("gained", obs.my_gained.to_string()),
            ("net", obs.my_net.to_string()),
        ]);
        let mut parts = vec![fill(&self.feedback.own, &own)?];
        for n in &obs.neighbors {
            let values = BTreeMap::from([
                ("label", n.label.to_string()),
                ("action", n.action.to_string()),
                ("paid", n.paid.to_string()),
                ("from_you", n.gained_from_me.to_string()),
                ("from_others", n.gained_from_others.to_string()),
                ("net", n.net.to_string()),
            ]);
            parts.push(fill(&self.feedback.neighbor, &values)?);
        }
        parts.push(self.feedback.closing.clone());
        Ok(parts.join(" "))
    }

    /// Checks every template for unknown placeholders.
    pub fn validate(&self) -> Result<(), TemplateError> {
        let bindings = TutorialBindings {
            cost: 1,
            benefit: 2,
            rounds: 1,
            points_per_dollar: 1,
            fixed_partners: true,
        };
        self.opening(&bindings)?;
        fill(&self.action_request, &BTreeMap::new())?;
        fill(&self.clarification, &BTreeMap::new())?;
        let probe = Observation {
            round: 1,
            my_action: crate::game::Action::Cooperate,
            my_paid: 0,
            my_gained: 0,
            my_net: 0,
            neighbors: vec![crate::agents::NeighborView {
                label: 1,
                action: crate::game::Action::Cooperate,
                paid: 0,
                gained_from_me: 0,
                gained_from_others: 0,
                net: 0,
            }],
        };
        self.render_feedback(&probe).map(|_| ())
    }
}

/// Feedback with the default templates.
pub fn render_feedback(obs: &Observation) -> Result<String, TemplateError> {
    PromptTemplateSet::default().render_feedback(obs)
}
