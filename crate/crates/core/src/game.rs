//! Actions, payoff parameters and resolution of a single simultaneous-move round.
//!
//! Payoffs are per edge: a cooperator pays `cost_per_edge` for every neighbor
//! and each of those neighbors gains `benefit_per_edge`. Defectors pay nothing
//! and give nothing. All quantities are integer points.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::topology::Graph;

/// Integer payoff unit.
pub type Points = i64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GameError {
    #[error("invalid game parameters: {0}")]
    InvalidParams(String),
    #[error("no action for node {node}")]
    MissingAction { node: usize },
    #[error("{actions} actions supplied for a graph of {nodes} nodes")]
    NodeCountMismatch { actions: usize, nodes: usize },
    #[error("node {node} has no neighbors")]
    IsolatedNode { node: usize },
    #[error("negative point balance {0} cannot be converted to currency")]
    NegativePoints(Points),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Action {
    #[serde(rename = "C")]
    Cooperate,
    #[serde(rename = "D")]
    Defect,
}

impl Action {
    pub fn symbol(self) -> &'static str {
        match self {
            Action::Cooperate => "C",
            Action::Defect => "D",
        }
    }

    pub fn is_cooperate(self) -> bool {
        self == Action::Cooperate
    }

    pub fn flip(self) -> Action {
        match self {
            Action::Cooperate => Action::Defect,
            Action::Defect => Action::Cooperate,
        }
    }

    pub fn from_symbol(s: &str) -> Option<Action> {
        match s {
            "C" => Some(Action::Cooperate),
            "D" => Some(Action::Defect),
            _ => None,
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

fn default_cost() -> u32 {
    10
}

fn default_points_per_dollar() -> u32 {
    300
}

/// Payoff parameters shared by every edge of the interaction graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameParams {
    #[serde(default = "default_cost")]
    pub cost_per_edge: u32,
    pub bc_ratio: u32,
    #[serde(default = "default_points_per_dollar")]
    pub points_per_dollar: u32,
    /// Pay whole dollars only instead of the pro-rata amount.
    #[serde(default)]
    pub floor_currency: bool,
}

impl Default for GameParams {
    fn default() -> Self {
        GameParams {
            cost_per_edge: default_cost(),
            bc_ratio: 2,
            points_per_dollar: default_points_per_dollar(),
            floor_currency: false,
        }
    }
}

impl GameParams {
    pub fn new(bc_ratio: u32) -> Result<Self, GameError> {
        let params = GameParams {
            bc_ratio,
            ..GameParams::default()
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), GameError> {
        if self.cost_per_edge == 0 {
            return Err(GameError::InvalidParams("cost_per_edge must be positive".into()));
        }
        if self.bc_ratio < 2 {
            return Err(GameError::InvalidParams(format!(
                "bc_ratio must be an integer greater than 1, got {}",
                self.bc_ratio
            )));
        }
        if self.points_per_dollar == 0 {
            return Err(GameError::InvalidParams("points_per_dollar must be positive".into()));
        }
        if (self.cost_per_edge as u64) * (self.bc_ratio as u64) > i32::MAX as u64 {
            return Err(GameError::InvalidParams("benefit_per_edge overflows".into()));
        }
        Ok(())
    }

    pub fn cost(&self) -> Points {
        self.cost_per_edge as Points
    }

    pub fn benefit_per_edge(&self) -> Points {
        self.cost() * self.bc_ratio as Points
    }
}

/// Points transferred from a cooperator to one neighbor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeFlow {
    pub from: usize,
    pub to: usize,
    pub points: Points,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundRecord {
    /// 1-based.
    pub round: u32,
    pub actions: Vec<Action>,
    pub paid: Vec<Points>,
    pub gained: Vec<Points>,
    pub net: Vec<Points>,
    pub edge_flows: Vec<EdgeFlow>,
}

impl RoundRecord {
    pub fn players(&self) -> usize {
        self.actions.len()
    }

    pub fn cooperators(&self) -> usize {
        self.actions.iter().filter(|a| a.is_cooperate()).count()
    }

    pub fn cooperation_level(&self) -> f64 {
        if self.actions.is_empty() {
            return 0.0;
        }
        self.cooperators() as f64 / self.actions.len() as f64
    }

    /// Points `to` received from `from` this round (zero unless `from` cooperated
    /// and the two are adjacent).
    pub fn flow_between(&self, from: usize, to: usize) -> Points {
        self.edge_flows
            .iter()
            .filter(|f| f.from == from && f.to == to)
            .map(|f| f.points)
            .sum()
    }
}

/// Resolves one round of simultaneous choices on `graph`.
pub fn resolve_round(
    round: u32,
    actions: &[Action],
    graph: &Graph,
    params: &GameParams,
) -> Result<RoundRecord, GameError> {
    params.validate()?;
    let n = graph.node_count();
    if actions.len() > n {
        return Err(GameError::NodeCountMismatch {
            actions: actions.len(),
            nodes: n,
        });
    }
    if actions.len() < n {
        return Err(GameError::MissingAction { node: actions.len() });
    }
    let cost = params.cost();
    let benefit = params.benefit_per_edge();

    let mut paid = vec![0; n];
    let mut gained = vec![0; n];
    let mut edge_flows = Vec::new();
    for (node, action) in actions.iter().enumerate() {
        let neighbors = graph.neighbors_of(node);
        if neighbors.is_empty() {
            return Err(GameError::IsolatedNode { node });
        }
        if action.is_cooperate() {
            paid[node] = cost * neighbors.len() as Points;
            for &to in neighbors {
                gained[to] += benefit;
                edge_flows.push(EdgeFlow {
                    from: node,
                    to,
                    points: benefit,
                });
            }
        }
    }
    let net = gained.iter().zip(&paid).map(|(g, p)| g - p).collect();
    Ok(RoundRecord {
        round,
        actions: actions.to_vec(),
        paid,
        gained,
        net,
        edge_flows,
    })
}

/// A currency amount in whole cents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Currency {
    pub cents: i64,
}

impl fmt::Display for Currency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:02}", self.cents / 100, self.cents % 100)
    }
}

/// Converts end-of-game points to dollars. Pro-rata amounts round half-up to
/// the nearest cent; with `floor_currency` only whole dollars are paid.
pub fn points_to_currency(points: Points, params: &GameParams) -> Result<Currency, GameError> {
    if points < 0 {
        return Err(GameError::NegativePoints(points));
    }
    let per_dollar = params.points_per_dollar as i64;
    let cents = if params.floor_currency {
        (points / per_dollar) * 100
    } else {
        (points * 100 * 2 + per_dollar) / (2 * per_dollar)
    };
    Ok(Currency { cents })
}

/// Largest net a player of the given degree can earn in one round: defecting
/// while every neighbor cooperates.
pub fn max_round_net(degree: usize, params: &GameParams) -> Points {
    params.benefit_per_edge() * degree as Points
}
