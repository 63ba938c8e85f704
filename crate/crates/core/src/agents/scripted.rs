use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Agent, AgentError, Observation};
use crate::game::{Action, GameParams};

/// Scripted strategies. History-dependent strategies open with C.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "snake_case", from = "StrategyRepr")]
pub enum Strategy {
    AllC,
    AllD,
    /// Cooperates with probability `p` every round.
    Random { p: f64 },
    /// Cooperates iff at least half of its neighbors cooperated last round.
    TitForTatMajority,
    /// Cooperates until any neighbor defects, then defects forever.
    Grim,
    /// Pairwise-comparison imitation: copy a random neighbor's last action with
    /// a logistic probability in the payoff difference.
    FermiImitate {
        beta: f64,
        /// Round-1 action; drawn uniformly when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        initial: Option<Action>,
    },
}

// Unit variants of an internally tagged enum ignore extra keys, so parsing
// goes through empty struct variants that reject them.
#[derive(Deserialize)]
#[serde(tag = "strategy", rename_all = "snake_case", deny_unknown_fields)]
enum StrategyRepr {
    AllC {},
    AllD {},
    Random {
        p: f64,
    },
    TitForTatMajority {},
    Grim {},
    FermiImitate {
        beta: f64,
        #[serde(default)]
        initial: Option<Action>,
    },
}

impl From<StrategyRepr> for Strategy {
    fn from(repr: StrategyRepr) -> Self {
        match repr {
            StrategyRepr::AllC {} => Strategy::AllC,
            StrategyRepr::AllD {} => Strategy::AllD,
            StrategyRepr::Random { p } => Strategy::Random { p },
            StrategyRepr::TitForTatMajority {} => Strategy::TitForTatMajority,
            StrategyRepr::Grim {} => Strategy::Grim,
            StrategyRepr::FermiImitate { beta, initial } => Strategy::FermiImitate { beta, initial },
        }
    }
}

impl Strategy {
    pub fn validate(&self) -> Result<(), AgentError> {
        match *self {
            Strategy::Random { p } if !(0.0..=1.0).contains(&p) => {
                Err(AgentError::Config(format!("random(p) needs p in [0, 1], got {p}")))
            }
            Strategy::FermiImitate { beta, .. } if !beta.is_finite() || beta < 0.0 => {
                Err(AgentError::Config(format!("fermi_imitate needs a finite beta >= 0, got {beta}")))
            }
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Strategy::AllC => "all_c",
            Strategy::AllD => "all_d",
            Strategy::Random { .. } => "random",
            Strategy::TitForTatMajority => "tit_for_tat_majority",
            Strategy::Grim => "grim",
            Strategy::FermiImitate { .. } => "fermi_imitate",
        }
    }
}

/// Probability of adopting a neighbor's action under the Fermi rule.
pub fn fermi_adoption_probability(beta: f64, their_net: f64, my_net: f64, payoff_scale: f64) -> f64 {
    1.0 / (1.0 + (-beta * (their_net - my_net) / payoff_scale).exp())
}

pub struct ScriptedAgent {
    strategy: Strategy,
    rng: ChaCha8Rng,
    payoff_scale: f64,
    last: Option<Observation>,
    grim_triggered: bool,
}

impl ScriptedAgent {
    pub fn new(strategy: Strategy, params: GameParams, rng: ChaCha8Rng) -> Self {
        ScriptedAgent {
            strategy,
            rng,
            payoff_scale: params.benefit_per_edge() as f64,
            last: None,
            grim_triggered: false,
        }
    }
}

impl Agent for ScriptedAgent {
    fn decide(&mut self, _round: u32) -> Result<Action, AgentError> {
        let action = match (&self.strategy, &self.last) {
            (Strategy::AllC, _) => Action::Cooperate,
            (Strategy::AllD, _) => Action::Defect,
            (Strategy::Random { p }, _) => {
                if self.rng.random_bool(*p) {
                    Action::Cooperate
                } else {
                    Action::Defect
                }
            }
            (Strategy::Grim, _) if self.grim_triggered => Action::Defect,
            (Strategy::Grim, _) => Action::Cooperate,
            (Strategy::TitForTatMajority, None) => Action::Cooperate,
            (Strategy::TitForTatMajority, Some(obs)) => {
                if 2 * obs.cooperating_neighbors() >= obs.neighbors.len() {
                    Action::Cooperate
                } else {
                    Action::Defect
                }
            }
            (Strategy::FermiImitate { initial, .. }, None) => match initial {
                Some(a) => *a,
                None if self.rng.random_bool(0.5) => Action::Cooperate,
                None => Action::Defect,
            },
            (Strategy::FermiImitate { beta, .. }, Some(obs)) => {
                let model = &obs.neighbors[self.rng.random_range(0..obs.neighbors.len())];
                let p = fermi_adoption_probability(*beta, model.net as f64, obs.my_net as f64, self.payoff_scale);
                if self.rng.random::<f64>() < p {
                    model.action
                } else {
                    obs.my_action
                }
            }
        };
        Ok(action)
    }

    fn observe(&mut self, obs: &Observation) -> Result<(), AgentError> {
        if obs.neighbors.iter().any(|n| n.action == Action::Defect) {
            self.grim_triggered = true;
        }
        self.last = Some(obs.clone());
        Ok(())
    }
}
