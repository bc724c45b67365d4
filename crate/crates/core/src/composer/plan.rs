//! Next-node selection and the speed-decision matrix.

use serde::{Deserialize, Serialize};

use crate::energy::{node_time, DroneSpec};
use crate::failure::SeverityCategory;
use crate::net::SkywayNetwork;

use super::physics::{fly_drone, DroneEnergy, FactorProfile, SpeedProfile};
use super::{SpeedAction, SpeedDecision, SwarmState};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interval {
    Early,
    Mid,
    Late,
}

/// Third of the segment in which `ft` (seconds after departure) falls.
pub fn segment_interval(ft: f64, tt: f64) -> Option<Interval> {
    if !(ft >= 0.0 && ft <= tt) {
        return None;
    }
    Some(if ft < tt / 3.0 {
        Interval::Early
    } else if ft < 2.0 * tt / 3.0 {
        Interval::Mid
    } else {
        Interval::Late
    })
}

/// Battery use of every drone for a leg, or `None` if any drone would end
/// below `reserve_pct`.
pub(crate) fn leg_usage(
    energies: &[DroneEnergy],
    batteries: &[f64],
    profiles: &[FactorProfile],
    distance: f64,
    speed: &SpeedProfile,
    reserve_pct: f64,
) -> Option<Vec<f64>> {
    let mut used = Vec::with_capacity(energies.len());
    for ((e, b), p) in energies.iter().zip(batteries).zip(profiles) {
        let leg = fly_drone(e, *b, distance, speed, p);
        if leg.depleted_at.is_some() || b - leg.used_pct < reserve_pct {
            return None;
        }
        used.push(leg.used_pct);
    }
    Some(used)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Candidate {
    pub target: usize,
    /// Current node first, target last.
    pub route: Vec<usize>,
    pub distance: f64,
    pub entry_speed: f64,
    pub tt: f64,
    pub nt: f64,
    pub h: f64,
}

impl Candidate {
    pub fn cost(&self) -> f64 {
        self.tt + self.nt + self.h
    }
}

/// Everything node selection needs besides the swarm state.
#[derive(Clone, Debug)]
pub struct Planner<'a> {
    pub net: &'a SkywayNetwork,
    pub spec: &'a DroneSpec,
    pub energies: &'a [DroneEnergy],
    pub reserve_pct: f64,
    pub dst: usize,
    /// Meters from each node to the destination along the pinned path;
    /// ignored otherwise.
    pub remaining: Vec<f64>,
    /// Nodes a single leg may overfly without stopping.
    pub depth: usize,
    /// Fly every leg at the minimum-energy speed.
    pub greedy: bool,
    /// Restrict legs to this path.
    pub pinned: Option<Vec<usize>>,
}

impl<'a> Planner<'a> {
    /// Candidate routes from the current node, at most `depth + 1` hops,
    /// avoiding visited nodes and never passing through the destination.
    fn routes(&self, from: usize, visited: &[bool]) -> Vec<(Vec<usize>, f64)> {
        if let Some(path) = &self.pinned {
            let Some(pos) = path.iter().position(|&n| n == from) else {
                return Vec::new();
            };
            let last = (pos + self.depth + 1).min(path.len() - 1);
            return (pos + 1..=last)
                .map(|j| {
                    let r = path[pos..=j].to_vec();
                    let d = self.net.path_length(&r).expect("pinned path follows segments");
                    (r, d)
                })
                .collect();
        }
        let mut best: Vec<Option<(f64, Vec<usize>)>> = vec![None; self.net.len()];
        let mut layer = vec![(vec![from], 0.0)];
        for _ in 0..=self.depth {
            let mut next = Vec::new();
            for (route, d) in &layer {
                let u = *route.last().unwrap();
                if u == self.dst && route.len() > 1 {
                    continue;
                }
                for &(v, w) in self.net.neighbors(u) {
                    if visited[v] || route.contains(&v) {
                        continue;
                    }
                    let nd = d + w;
                    let mut r = route.clone();
                    r.push(v);
                    let better = match &best[v] {
                        None => true,
                        Some((bd, br)) => nd < *bd || (nd == *bd && r < *br),
                    };
                    if better {
                        best[v] = Some((nd, r.clone()));
                    }
                    next.push((r, nd));
                }
            }
            layer = next;
        }
        best.into_iter().flatten().map(|(d, r)| (r, d)).collect()
    }

    /// Meters to the destination from each node without revisiting a node.
    fn remaining(&self, visited: &[bool]) -> std::borrow::Cow<'_, [f64]> {
        match self.pinned {
            Some(_) => std::borrow::Cow::Borrowed(&self.remaining),
            None => std::borrow::Cow::Owned(self.net.distances_avoiding(self.dst, visited)),
        }
    }

    fn tiers(&self) -> [(f64, f64, f64); 3] {
        let (base, vmin, res) = (self.spec.base_speed, self.spec.min_energy_speed, self.reserve_pct);
        let fly = if self.greedy { vmin } else { base };
        [(base, res, fly), (vmin, res, vmin), (vmin, 0.0, vmin)]
    }
}

/// Picks the next stop minimizing travel time, node time and the remaining
/// distance at cruise speed. Planning is at base speed with the battery
/// reserve, falling back to the minimum-energy speed and then to no reserve.
/// `None` when no candidate is reachable.
pub fn select_next_node(
    planner: &Planner,
    state: &SwarmState,
    profiles: &[FactorProfile],
    visited: &[bool],
) -> Option<Candidate> {
    let batteries: Vec<f64> = state.drones.iter().map(|d| d.battery_pct).collect();
    let routes = planner.routes(state.current_node, visited);
    let remaining = planner.remaining(visited);
    for (check, reserve, fly) in planner.tiers() {
        let mut best: Option<Candidate> = None;
        for (route, distance) in &routes {
            let target = *route.last().unwrap();
            if !remaining[target].is_finite() {
                continue;
            }
            let check_profile = SpeedProfile::constant(state.clock, check);
            if leg_usage(planner.energies, &batteries, profiles, *distance, &check_profile, reserve).is_none() {
                continue;
            }
            let fly_profile = SpeedProfile::constant(state.clock, fly);
            let nt = if target == planner.dst {
                0.0
            } else {
                let per_drone = planner
                    .energies
                    .iter()
                    .zip(&batteries)
                    .zip(profiles)
                    .map(|((e, b), p)| fly_drone(e, *b, *distance, &fly_profile, p).used_pct / 100.0 * e.capacity_j)
                    .fold(0.0, f64::max)
                    / planner.spec.charge_power;
                node_time(state.drones.len(), planner.net.node(target).pads, per_drone)
            };
            let c = Candidate {
                target,
                route: route.clone(),
                distance: *distance,
                entry_speed: fly,
                tt: distance / fly,
                nt,
                h: remaining[target] / fly,
            };
            let replace = match &best {
                None => true,
                Some(b) => match c.cost().total_cmp(&b.cost()) {
                    std::cmp::Ordering::Less => true,
                    std::cmp::Ordering::Equal => c.target < b.target,
                    std::cmp::Ordering::Greater => false,
                },
            };
            if replace {
                best = Some(c);
            }
        }
        if best.is_some() {
            return best;
        }
    }
    None
}

/// State needed to test a speed change on the upcoming leg.
#[derive(Clone, Debug)]
pub struct DecisionInputs<'a> {
    pub energies: &'a [DroneEnergy],
    pub batteries: Vec<f64>,
    /// Predicted degradation of each drone.
    pub profiles: &'a [FactorProfile],
    pub distance: f64,
    pub depart: f64,
    pub v0: f64,
    pub reserve_pct: f64,
    pub v_min: f64,
    pub v_max: f64,
}

impl DecisionInputs<'_> {
    fn reaches(&self, switch_at: f64, v1: f64) -> bool {
        let sp = SpeedProfile { depart: self.depart, v0: self.v0, switch_at: Some(switch_at), v1 };
        leg_usage(self.energies, &self.batteries, self.profiles, self.distance, &sp, self.reserve_pct).is_some()
    }

    /// Highest speed above `v0` that keeps every drone reachable.
    fn raised_speed(&self, switch_at: f64) -> Option<f64> {
        let floor = self.v0 + 0.01;
        if floor > self.v_max || !self.reaches(switch_at, floor) {
            return None;
        }
        if self.reaches(switch_at, self.v_max) {
            return Some(self.v_max);
        }
        let (mut lo, mut hi) = (floor, self.v_max);
        for _ in 0..50 {
            let mid = 0.5 * (lo + hi);
            if self.reaches(switch_at, mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some(lo)
    }
}

/// Speed matrix over (failure interval, severity). Corners follow the
/// published rules; grey cells lean to the adjacent region.
pub fn speed_decision(
    interval: Interval,
    severity: SeverityCategory,
    effective_from: f64,
    inp: &DecisionInputs,
) -> SpeedDecision {
    use SeverityCategory as S;
    let keep = SpeedDecision { action: SpeedAction::Maintain, target_speed: inp.v0, effective_from };
    let slow = if inp.v0 > inp.v_min + 1e-9 {
        SpeedDecision { action: SpeedAction::SlowDown, target_speed: inp.v_min, effective_from }
    } else {
        keep
    };
    let up_or_keep = || match inp.raised_speed(effective_from) {
        Some(v) => SpeedDecision { action: SpeedAction::SpeedUp, target_speed: v, effective_from },
        None => keep,
    };
    let decision = match (interval, severity) {
        (Interval::Early, _) | (Interval::Mid, S::High) | (Interval::Late, S::High) => slow,
        (Interval::Late, S::Low | S::Mid) | (Interval::Mid, S::Low) => up_or_keep(),
        (Interval::Mid, S::Mid) => keep,
    };
    if decision.action == SpeedAction::Maintain && !inp.reaches(effective_from, inp.v0) {
        return slow;
    }
    decision
}
