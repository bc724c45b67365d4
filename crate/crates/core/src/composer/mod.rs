//! Failure-sentient route composition and mission simulation.

mod mission;
mod physics;
mod plan;
mod predict;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::energy::{DroneSpec, EnergyError};
use crate::failure::{DeliveryOutcome, DroneFailureState, FailurePolicy, SeverityReport};
use crate::fed::FedError;
use crate::net::NetError;

pub use mission::{compose, compose_exhaustive, compose_greedy, compose_heuristic, compose_lookahead, simulate_pinned, Mission};
pub use physics::{fly_drone, DroneEnergy, DroneLeg, FactorProfile, SpeedProfile};
pub use plan::{segment_interval, select_next_node, speed_decision, Candidate, DecisionInputs, Interval, Planner};
pub use predict::{drone_id, reference_uptime, MissionPredictor, PredictorConfig, PretrainedFleet};

#[derive(Debug, Error)]
pub enum ComposeError {
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error(transparent)]
    Fed(#[from] FedError),
    #[error("invalid mission: {0}")]
    Invalid(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Heuristic,
    Lookahead,
    Greedy,
    Exhaustive,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [Strategy::Heuristic, Strategy::Lookahead, Strategy::Greedy, Strategy::Exhaustive];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Heuristic => "heuristic",
            Strategy::Lookahead => "lookahead",
            Strategy::Greedy => "greedy",
            Strategy::Exhaustive => "exhaustive",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Strategy::ALL
            .into_iter()
            .find(|k| k.as_str() == s.trim())
            .ok_or_else(|| format!("unknown strategy '{s}' (expected heuristic, lookahead, greedy or exhaustive)"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DroneStatus {
    pub id: String,
    pub battery_pct: f64,
    pub payload_kg: f64,
    /// Ground truth, hidden from planning until the onset is observed.
    pub failure: DroneFailureState,
}

/// The swarm moves as one: a single node, speed and clock for all drones.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwarmState {
    pub drones: Vec<DroneStatus>,
    pub current_node: usize,
    pub current_speed: f64,
    pub clock: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpeedAction {
    SlowDown,
    SpeedUp,
    Maintain,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpeedDecision {
    pub action: SpeedAction,
    pub target_speed: f64,
    /// Mission time the change takes effect.
    pub effective_from: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Depletion {
    pub drone_id: String,
    /// Meters from the leg's departure node.
    pub position_m: f64,
    pub time: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LegRecord {
    pub from: String,
    pub to: String,
    /// Intermediate nodes overflown without stopping.
    pub via: Vec<String>,
    pub distance_m: f64,
    pub wait_time: f64,
    pub depart: f64,
    pub entry_speed: f64,
    pub decision: Option<SpeedDecision>,
    /// `(mission time, new speed)`.
    pub speed_changes: Vec<(f64, f64)>,
    pub travel_time: f64,
    pub arrive: f64,
    pub battery_in: Vec<f64>,
    pub battery_out: Vec<f64>,
    pub energy_pct: Vec<f64>,
    /// Node time at `to`: charging plus queueing for pads.
    pub charge_time: f64,
    pub severity: Option<SeverityReport>,
    pub depletion: Option<Depletion>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationTrace {
    pub request_id: String,
    pub strategy: Strategy,
    pub drones: Vec<String>,
    pub legs: Vec<LegRecord>,
    pub path: Vec<String>,
    pub delivery_time: f64,
    pub travel_time: f64,
    pub node_time: f64,
    pub wait_time: f64,
    pub distance_m: f64,
    pub outcome: DeliveryOutcome,
    /// Exhaustive search found no path that avoided a hard failure.
    pub flagged: bool,
}

impl SimulationTrace {
    /// Reached the destination without a hard failure.
    pub fn successful(&self) -> bool {
        self.outcome != DeliveryOutcome::HardFailure
    }

    pub fn on_time(&self) -> bool {
        self.outcome == DeliveryOutcome::Success
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ComposerConfig {
    pub drone: DroneSpec,
    pub policy: FailurePolicy,
    /// Battery share (percent) every drone must keep on arrival when planning.
    pub reserve_pct: f64,
    pub lookahead_depth: usize,
    pub exhaustive_cap: usize,
    pub predictor: PredictorConfig,
}

impl Default for ComposerConfig {
    fn default() -> Self {
        ComposerConfig {
            drone: DroneSpec::default(),
            policy: FailurePolicy::default(),
            reserve_pct: 20.0,
            lookahead_depth: 1,
            exhaustive_cap: 100,
            predictor: PredictorConfig::default(),
        }
    }
}

impl ComposerConfig {
    pub fn validate(&self) -> Result<(), ComposeError> {
        self.drone.validate()?;
        if !(0.0..100.0).contains(&self.reserve_pct) {
            return Err(ComposeError::Invalid("reserve_pct must be in [0, 100)".into()));
        }
        if self.lookahead_depth == 0 {
            return Err(ComposeError::Invalid("lookahead depth must be at least 1".into()));
        }
        if self.exhaustive_cap == 0 {
            return Err(ComposeError::Invalid("exhaustive cap must be at least 1".into()));
        }
        Ok(())
    }
}
