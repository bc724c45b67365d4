//! Failure taxonomy, severity scoring, and ground-truth failure injection.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::net::DeliveryRequest;

#[derive(Debug, Error, PartialEq)]
pub enum FailureError {
    #[error("domain error: {0}")]
    Domain(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DroneKind {
    Healthy,
    Soft,
    Hard,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SwarmCondition {
    Operational,
    Partial,
    Complete,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeverityCategory {
    Low,
    Mid,
    High,
}

/// Mission result. Variants are ordered best to worst.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeliveryOutcome {
    Success,
    Early,
    Late,
    NonSimultaneous,
    HardFailure,
}

impl DeliveryOutcome {
    pub fn as_str(self) -> &'static str {
        match self {
            DeliveryOutcome::Success => "success",
            DeliveryOutcome::Early => "early",
            DeliveryOutcome::Late => "late",
            DeliveryOutcome::NonSimultaneous => "non_simultaneous",
            DeliveryOutcome::HardFailure => "hard_failure",
        }
    }
}

/// Thresholds for the taxonomy predicates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FailurePolicy {
    /// Hard-failure threshold on the performance scale (`p - delta <= sigma`).
    pub sigma_perf: f64,
    /// Soft-failure threshold on the performance scale.
    pub alpha_perf: f64,
    /// Soft-failing drones that make a swarm fail completely; `None` means
    /// half the swarm, rounded up.
    pub omega: Option<usize>,
    /// Maximum arrival spread (seconds) for a simultaneous delivery.
    pub rho: f64,
    /// Relative excess consumption over the expected rate that counts as a
    /// soft failure.
    pub epsilon: f64,
}

impl Default for FailurePolicy {
    fn default() -> Self {
        FailurePolicy { sigma_perf: 0.2, alpha_perf: 0.9, omega: None, rho: 90.0, epsilon: 0.05 }
    }
}

impl FailurePolicy {
    pub fn omega_for(&self, swarm_size: usize) -> usize {
        self.omega.unwrap_or_else(|| swarm_size.div_ceil(2)).max(1)
    }
}

/// Ground-truth or predicted failure status of one drone.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DroneFailureState {
    pub drone_id: String,
    pub kind: DroneKind,
    /// Failure onset on the mission clock (seconds).
    pub failure_time: Option<f64>,
    /// How long the drone keeps flying after onset on a full battery.
    pub uptime_after: Option<f64>,
    pub degradation_factor: f64,
}

impl DroneFailureState {
    pub fn healthy(id: impl Into<String>) -> Self {
        DroneFailureState {
            drone_id: id.into(),
            kind: DroneKind::Healthy,
            failure_time: None,
            uptime_after: None,
            degradation_factor: 1.0,
        }
    }

    /// Degradation multiplier in force at mission time `t`.
    pub fn factor_at(&self, t: f64) -> f64 {
        match self.failure_time {
            Some(ft) if t >= ft && self.kind != DroneKind::Healthy => self.degradation_factor,
            _ => 1.0,
        }
    }
}

pub fn classify_drone(performance: f64, degradation: f64, policy: &FailurePolicy) -> Result<DroneKind, FailureError> {
    if degradation < 0.0 {
        return Err(FailureError::Domain(format!("negative degradation {degradation}")));
    }
    if !(0.0..=1.0).contains(&performance) {
        return Err(FailureError::Domain(format!("performance {performance} outside [0, 1]")));
    }
    if !(policy.sigma_perf < policy.alpha_perf) {
        return Err(FailureError::Domain("sigma must be below alpha".into()));
    }
    let left = performance - degradation;
    Ok(if left <= policy.sigma_perf {
        DroneKind::Hard
    } else if left <= policy.alpha_perf {
        DroneKind::Soft
    } else {
        DroneKind::Healthy
    })
}

pub fn classify_swarm(states: &[DroneFailureState], policy: &FailurePolicy) -> SwarmCondition {
    let hard = states.iter().filter(|s| s.kind == DroneKind::Hard).count();
    let soft = states.iter().filter(|s| s.kind == DroneKind::Soft).count();
    if hard >= 1 || soft >= policy.omega_for(states.len()) {
        SwarmCondition::Complete
    } else if soft >= 1 {
        SwarmCondition::Partial
    } else {
        SwarmCondition::Operational
    }
}

/// Drone-level severity from default (`dec_*`) and actual (`aec_*`)
/// cumulative consumption percentages at the failure time and at the next
/// node. Out-of-range values are clamped to [0, 1].
pub fn drone_level_severity(dec_node: f64, dec_ft: f64, aec_node: f64, aec_ft: f64) -> Result<f64, FailureError> {
    if aec_node == aec_ft {
        return Err(FailureError::Domain("actual consumption does not grow after the failure time".into()));
    }
    if aec_node < aec_ft || dec_node < dec_ft {
        return Err(FailureError::Domain("consumption trajectories must be non-decreasing".into()));
    }
    let dls = 1.0 - (dec_node - dec_ft) / (aec_node - aec_ft);
    if !(0.0..=1.0).contains(&dls) {
        log::warn!("drone level severity {dls} clamped to [0, 1]");
    }
    Ok(dls.clamp(0.0, 1.0))
}

/// `1 - dec_node / 100`: the battery share left at the next node.
pub fn hard_failure_threshold(dec_node: f64) -> f64 {
    1.0 - dec_node / 100.0
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "result")]
pub enum SwarmSeverity {
    NoFailure,
    Scored { sls: f64, category: SeverityCategory },
}

pub fn severity_category(sls: f64) -> SeverityCategory {
    if sls < 1.0 / 3.0 {
        SeverityCategory::Low
    } else if sls < 2.0 / 3.0 {
        SeverityCategory::Mid
    } else {
        SeverityCategory::High
    }
}

pub fn swarm_level_severity(dls_values: &[f64]) -> SwarmSeverity {
    if dls_values.is_empty() {
        return SwarmSeverity::NoFailure;
    }
    let sls = dls_values.iter().sum::<f64>() / dls_values.len() as f64;
    SwarmSeverity::Scored { sls, category: severity_category(sls) }
}

/// Per-drone severities with the segment's hard threshold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeverityReport {
    pub per_drone_dls: BTreeMap<String, f64>,
    pub sigma: f64,
    pub swarm: SwarmSeverity,
}

impl SeverityReport {
    pub fn new(per_drone_dls: BTreeMap<String, f64>, sigma: f64) -> Self {
        let values: Vec<f64> = per_drone_dls.values().copied().collect();
        SeverityReport { swarm: swarm_level_severity(&values), per_drone_dls, sigma }
    }

    /// Drones whose severity exceeds the hard threshold.
    pub fn hard_failures(&self) -> impl Iterator<Item = &str> {
        self.per_drone_dls.iter().filter(move |(_, v)| **v > self.sigma).map(|(k, _)| k.as_str())
    }
}

pub fn delivery_success(
    arrivals: &BTreeMap<String, f64>,
    request: &DeliveryRequest,
    policy: &FailurePolicy,
) -> Result<DeliveryOutcome, FailureError> {
    let first = arrivals.values().copied().fold(f64::INFINITY, f64::min);
    let last = arrivals.values().copied().fold(f64::NEG_INFINITY, f64::max);
    if arrivals.is_empty() {
        return Err(FailureError::Domain("no arrivals".into()));
    }
    Ok(if last - first > policy.rho {
        DeliveryOutcome::NonSimultaneous
    } else if first < request.window.st {
        DeliveryOutcome::Early
    } else if last > request.window.et {
        DeliveryOutcome::Late
    } else {
        DeliveryOutcome::Success
    })
}

/// Soft-failure injection settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InjectionConfig {
    /// Chance that a given drone soft-fails during a mission.
    pub probability: f64,
    /// Onset drawn uniformly over this fraction range of the mission estimate.
    pub onset_fraction: (f64, f64),
    pub factor_range: (f64, f64),
}

impl Default for InjectionConfig {
    fn default() -> Self {
        InjectionConfig { probability: 0.3, onset_fraction: (0.0, 1.0), factor_range: (1.3, 2.2) }
    }
}

impl InjectionConfig {
    pub fn disabled() -> Self {
        InjectionConfig { probability: 0.0, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), FailureError> {
        if !(0.0..=1.0).contains(&self.probability) {
            return Err(FailureError::Domain("injection probability must be in [0, 1]".into()));
        }
        let (lo, hi) = self.onset_fraction;
        if !(lo >= 0.0 && lo <= hi && hi.is_finite()) {
            return Err(FailureError::Domain("onset fraction range must satisfy 0 <= lo <= hi".into()));
        }
        let (flo, fhi) = self.factor_range;
        if !(flo >= 1.0 && flo <= fhi && fhi.is_finite()) {
            return Err(FailureError::Domain("factor range must satisfy 1 <= lo <= hi".into()));
        }
        Ok(())
    }
}

/// Mission-specific scales for injection.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MissionScale {
    /// Estimated failure-free mission duration (seconds).
    pub duration_s: f64,
    /// Full-battery endurance of a healthy reference drone; uptime after a
    /// failure is this divided by the degradation factor.
    pub uptime_ref_s: f64,
}

/// Draws ground-truth soft failures, one state per drone, deterministic in
/// `rng_seed`.
pub fn inject_failures(
    drone_ids: &[String],
    rng_seed: u64,
    cfg: &InjectionConfig,
    scale: MissionScale,
) -> Vec<DroneFailureState> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let (lo, hi) = cfg.onset_fraction;
    let (flo, fhi) = cfg.factor_range;
    drone_ids
        .iter()
        .map(|id| {
            let u: f64 = rng.random();
            let frac = lo + (hi - lo) * rng.random::<f64>();
            let factor = flo + (fhi - flo) * rng.random::<f64>();
            if u < cfg.probability {
                DroneFailureState {
                    drone_id: id.clone(),
                    kind: DroneKind::Soft,
                    failure_time: Some(frac * scale.duration_s),
                    uptime_after: Some(scale.uptime_ref_s / factor),
                    degradation_factor: factor,
                }
            } else {
                DroneFailureState::healthy(id.clone())
            }
        })
        .collect()
}
