//! Experiment grids: cross products of degree, benefit-to-cost ratio,
//! topology mode, roster and population regime.

use netdilemma::agents::AgentSpec;
use netdilemma::game::GameParams;
use netdilemma::runner::{ConfigError, ExperimentConfig, FailurePolicy, StimulusSpec};
use netdilemma::topology::{TopologyMode, TopologySpec};
use serde::{Deserialize, Serialize};

/// Named agent line-ups; every node gets the same strategy except in
/// `alternating`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Roster {
    AllC,
    AllD,
    /// random(0.5)
    Random,
    /// fermi_imitate(1.0) with a uniformly drawn first action
    Fermi,
    TitForTat,
    Grim,
    /// C on even nodes, D on odd nodes
    Alternating,
}

impl Roster {
    pub fn name(self) -> &'static str {
        match self {
            Roster::AllC => "all_c",
            Roster::AllD => "all_d",
            Roster::Random => "random",
            Roster::Fermi => "fermi",
            Roster::TitForTat => "tit_for_tat",
            Roster::Grim => "grim",
            Roster::Alternating => "alternating",
        }
    }

    pub fn agents(self, n: usize) -> Vec<AgentSpec> {
        (0..n)
            .map(|i| match self {
                Roster::AllC => AgentSpec::all_c(),
                Roster::AllD => AgentSpec::all_d(),
                Roster::Random => AgentSpec::random(0.5),
                Roster::Fermi => AgentSpec::fermi_imitate(1.0),
                Roster::TitForTat => AgentSpec::tit_for_tat_majority(),
                Roster::Grim => AgentSpec::grim(),
                Roster::Alternating if i % 2 == 0 => AgentSpec::all_c(),
                Roster::Alternating => AgentSpec::all_d(),
            })
            .collect()
    }
}

/// Population size and horizon shared by a block of cells.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Regime {
    pub name: String,
    pub n: usize,
    pub rounds: u32,
}

fn default_modes() -> Vec<TopologyMode> {
    vec![TopologyMode::FixedRing]
}
fn default_cost() -> u32 {
    GameParams::default().cost_per_edge
}
fn default_ppd() -> u32 {
    GameParams::default().points_per_dollar
}
fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub k: Vec<usize>,
    pub bc_ratio: Vec<u32>,
    #[serde(default = "default_modes")]
    pub modes: Vec<TopologyMode>,
    pub rosters: Vec<Roster>,
    pub regimes: Vec<Regime>,
    pub repetitions: u32,
    pub master_seed: u64,
    #[serde(default = "default_cost")]
    pub cost_per_edge: u32,
    #[serde(default = "default_ppd")]
    pub points_per_dollar: u32,
    #[serde(default)]
    pub failure_policy: FailurePolicy,
    #[serde(default = "default_true")]
    pub shuffle_labels: bool,
}

/// Grid coordinates of a cell, kept for metrics labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellCoords {
    pub regime: String,
    pub mode: TopologyMode,
    pub roster: Roster,
    pub k: usize,
    pub bc_ratio: u32,
}

/// One experiment of a plan.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub id: String,
    pub coords: Option<CellCoords>,
    pub config: ExperimentConfig,
}

fn mode_name(mode: TopologyMode) -> &'static str {
    match mode {
        TopologyMode::FixedRing => "fixed_ring",
        TopologyMode::WellMixed => "well_mixed",
        TopologyMode::Star => "star",
    }
}

impl GridSpec {
    fn check_nonempty(&self) -> Result<(), ConfigError> {
        for (field, empty) in [
            ("k", self.k.is_empty()),
            ("bc_ratio", self.bc_ratio.is_empty()),
            ("modes", self.modes.is_empty()),
            ("rosters", self.rosters.is_empty()),
            ("regimes", self.regimes.is_empty()),
        ] {
            if empty {
                return Err(ConfigError::new(field, "must list at least one value"));
            }
        }
        Ok(())
    }

    /// Expands the grid; the first invalid cell is reported with its id.
    pub fn cells(&self) -> Result<Vec<Cell>, ConfigError> {
        self.check_nonempty()?;
        let mut cells = Vec::new();
        for regime in &self.regimes {
            for &mode in &self.modes {
                for &roster in &self.rosters {
                    for &k in &self.k {
                        for &bc in &self.bc_ratio {
                            let id = format!("{}-{}-{}-k{k}-bc{bc}", regime.name, mode_name(mode), roster.name());
                            let config = ExperimentConfig {
                                topology: TopologySpec { n: regime.n, k, mode },
                                params: GameParams {
                                    cost_per_edge: self.cost_per_edge,
                                    bc_ratio: bc,
                                    points_per_dollar: self.points_per_dollar,
                                    floor_currency: false,
                                },
                                rounds: regime.rounds,
                                repetitions: self.repetitions,
                                agents: roster.agents(regime.n),
                                master_seed: self.master_seed,
                                failure_policy: self.failure_policy,
                                human_timeout_secs: 120.0,
                                shuffle_labels: self.shuffle_labels,
                                stimulus: None,
                            };
                            config
                                .validate()
                                .map_err(|e| ConfigError::new(format!("cell {id}: {}", e.field), e.message))?;
                            cells.push(Cell {
                                id,
                                coords: Some(CellCoords {
                                    regime: regime.name.clone(),
                                    mode,
                                    roster,
                                    k,
                                    bc_ratio: bc,
                                }),
                                config,
                            });
                        }
                    }
                }
            }
        }
        let mut ids: Vec<&str> = cells.iter().map(|c| c.id.as_str()).collect();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(ConfigError::new("regimes", format!("duplicate cell id {}", w[0])));
        }
        Ok(cells)
    }
}

/// The stimulus conditions run as one plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StimulusPlan {
    pub params: GameParams,
    pub master_seed: u64,
    pub conditions: Vec<StimulusSpec>,
}

impl StimulusPlan {
    pub fn cells(&self) -> Result<Vec<Cell>, ConfigError> {
        if self.conditions.is_empty() {
            return Err(ConfigError::new("conditions", "must list at least one condition"));
        }
        self.conditions
            .iter()
            .enumerate()
            .map(|(i, spec)| {
                let id = format!("stimulus-{i}-post{}", spec.post_change_cooperators);
                let config = ExperimentConfig::stimulus(spec.clone(), self.params, self.master_seed);
                config
                    .validate()
                    .map_err(|e| ConfigError::new(format!("conditions[{i}].{}", e.field), e.message))?;
                Ok(Cell {
                    id,
                    coords: None,
                    config,
                })
            })
            .collect()
    }
}

/// What a plan file contains.
#[derive(Debug, Clone, PartialEq)]
pub enum PlanSource {
    Experiment(ExperimentConfig),
    Grid(GridSpec),
    Stimulus(StimulusPlan),
}

/// Flag overrides; they win over file values.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub repetitions: Option<u32>,
    pub rounds: Option<u32>,
}

impl PlanSource {
    pub fn parse_experiment(text: &str) -> Result<Self, ConfigError> {
        let config: ExperimentConfig = serde_json::from_str(text).map_err(|e| ConfigError::new("config", e))?;
        Ok(PlanSource::Experiment(config))
    }

    pub fn parse_grid(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text)
            .map(PlanSource::Grid)
            .map_err(|e| ConfigError::new("grid", e))
    }

    pub fn parse_stimulus(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text)
            .map(PlanSource::Stimulus)
            .map_err(|e| ConfigError::new("stimulus", e))
    }

    /// Picks the file kind from its top-level keys.
    pub fn detect(text: &str) -> Result<Self, ConfigError> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| ConfigError::new("file", e))?;
        if value.get("conditions").is_some() {
            Self::parse_stimulus(text)
        } else if value.get("regimes").is_some() {
            Self::parse_grid(text)
        } else {
            Self::parse_experiment(text)
        }
    }

    pub fn apply(&mut self, o: Overrides) {
        match self {
            PlanSource::Experiment(c) => {
                if let Some(s) = o.seed {
                    c.master_seed = s;
                }
                if let Some(r) = o.repetitions {
                    c.repetitions = r;
                }
                if let Some(r) = o.rounds {
                    c.rounds = r;
                    if let Some(spec) = &mut c.stimulus {
                        spec.rounds = r;
                    }
                }
                if let Some(spec) = c.stimulus.clone() {
                    if o.repetitions.is_some() || o.rounds.is_some() {
                        let mut spec = spec;
                        spec.runs = c.repetitions;
                        *c = ExperimentConfig::stimulus(spec, c.params, c.master_seed);
                    }
                }
            }
            PlanSource::Grid(g) => {
                if let Some(s) = o.seed {
                    g.master_seed = s;
                }
                if let Some(r) = o.repetitions {
                    g.repetitions = r;
                }
                if let Some(r) = o.rounds {
                    g.regimes.iter_mut().for_each(|reg| reg.rounds = r);
                }
            }
            PlanSource::Stimulus(p) => {
                if let Some(s) = o.seed {
                    p.master_seed = s;
                }
                for spec in &mut p.conditions {
                    if let Some(r) = o.repetitions {
                        spec.runs = r;
                    }
                    if let Some(r) = o.rounds {
                        spec.rounds = r;
                    }
                }
            }
        }
    }

    pub fn cells(&self) -> Result<Vec<Cell>, ConfigError> {
        match self {
            PlanSource::Experiment(config) => {
                config.validate()?;
                Ok(vec![Cell {
                    id: "experiment".into(),
                    coords: None,
                    config: config.clone(),
                }])
            }
            PlanSource::Grid(g) => g.cells(),
            PlanSource::Stimulus(p) => p.cells(),
        }
    }
}

/// Shipped presets, by file name.
pub const PRESETS: &[(&str, &str)] = &[
    ("ring-grid.json", include_str!("../presets/ring-grid.json")),
    ("stimulus.json", include_str!("../presets/stimulus.json")),
    ("mock-dialogue.json", include_str!("../presets/mock-dialogue.json")),
];
