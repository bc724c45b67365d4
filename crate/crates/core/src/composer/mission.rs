//! The mission loop shared by all strategies.

use std::collections::BTreeMap;

use crate::energy::node_time;
use crate::failure::{
    delivery_success, drone_level_severity, hard_failure_threshold, inject_failures, DeliveryOutcome, DroneFailureState,
    InjectionConfig, MissionScale, SeverityReport, SwarmSeverity,
};
use crate::fed::FailurePrediction;
use crate::net::ksp::topk_indices;
use crate::net::{DeliveryRequest, SkywayNetwork};

use super::physics::{fly_drone, DroneEnergy, FactorProfile, SpeedProfile};
use super::plan::{segment_interval, select_next_node, speed_decision, DecisionInputs, Planner};
use super::predict::{drone_id, reference_uptime, seed_of, str_seed, MissionPredictor, PretrainedFleet, RoundMemo};
use super::{
    ComposeError, ComposerConfig, Depletion, DroneStatus, LegRecord, SimulationTrace, SpeedAction, SpeedDecision,
    Strategy, SwarmState,
};

/// One request bound to a network, a swarm, and its ground-truth failures.
#[derive(Clone, Debug)]
pub struct Mission<'a> {
    pub net: &'a SkywayNetwork,
    pub request: &'a DeliveryRequest,
    pub cfg: &'a ComposerConfig,
    pub fleet: Option<&'a PretrainedFleet>,
    pub truth: Vec<DroneFailureState>,
    pub seed: u64,
    src: usize,
    dst: usize,
    energies: Vec<DroneEnergy>,
    remaining: Vec<f64>,
}

#[derive(Clone, Debug)]
enum Mode {
    Free { depth: usize, greedy: bool, predict: bool },
    Pinned { path: Vec<usize>, depth: usize },
}

impl<'a> Mission<'a> {
    /// A mission whose failures are drawn by the injector. The onset range
    /// spans a failure-free run of the plain heuristic.
    pub fn new(
        net: &'a SkywayNetwork,
        request: &'a DeliveryRequest,
        cfg: &'a ComposerConfig,
        fleet: Option<&'a PretrainedFleet>,
        injection: &InjectionConfig,
        seed: u64,
    ) -> Result<Self, ComposeError> {
        let healthy: Vec<DroneFailureState> =
            (0..request.payloads_kg.len()).map(|i| DroneFailureState::healthy(drone_id(i))).collect();
        let mut m = Self::with_truth(net, request, cfg, fleet, healthy, seed)?;
        let ids: Vec<String> = m.truth.iter().map(|t| t.drone_id.clone()).collect();
        let scale = MissionScale { duration_s: m.nominal_duration(), uptime_ref_s: reference_uptime(&cfg.drone) };
        m.truth = inject_failures(&ids, seed_of(&[seed, str_seed(&request.id), 0x1a7ec7]), injection, scale);
        Ok(m)
    }

    /// A mission with explicit ground truth, one state per package.
    pub fn with_truth(
        net: &'a SkywayNetwork,
        request: &'a DeliveryRequest,
        cfg: &'a ComposerConfig,
        fleet: Option<&'a PretrainedFleet>,
        truth: Vec<DroneFailureState>,
        seed: u64,
    ) -> Result<Self, ComposeError> {
        cfg.validate()?;
        request.validate(cfg.drone.max_payload)?;
        if truth.len() != request.payloads_kg.len() {
            return Err(ComposeError::Invalid("one failure state per drone required".into()));
        }
        if let Some(f) = fleet {
            if request.payloads_kg.len() > f.drones.len() {
                return Err(ComposeError::Invalid(format!(
                    "swarm of {} exceeds fleet of {}",
                    request.payloads_kg.len(),
                    f.drones.len()
                )));
            }
        }
        let src = net.index_of(&request.source)?;
        let dst = net.index_of(&request.destination)?;
        let energies =
            request.payloads_kg.iter().map(|p| DroneEnergy::new(&cfg.drone, *p)).collect::<Result<Vec<_>, _>>()?;
        Ok(Mission { net, request, cfg, fleet, truth, seed, src, dst, energies, remaining: net.distances_from(dst) })
    }

    /// Duration of a failure-free heuristic run, waits excluded.
    pub fn nominal_duration(&self) -> f64 {
        let healthy = Mission {
            truth: self.truth.iter().map(|t| DroneFailureState::healthy(t.drone_id.clone())).collect(),
            fleet: None,
            ..self.clone()
        };
        let t = healthy.run(Strategy::Heuristic, Mode::Free { depth: 0, greedy: false, predict: false }, None);
        let d = t.delivery_time - t.wait_time;
        if t.successful() && d > 0.0 {
            d
        } else {
            self.remaining[self.src] / self.cfg.drone.base_speed
        }
    }

    fn initial_state(&self) -> SwarmState {
        SwarmState {
            drones: self
                .truth
                .iter()
                .zip(&self.request.payloads_kg)
                .map(|(t, p)| DroneStatus { id: t.drone_id.clone(), battery_pct: 100.0, payload_kg: *p, failure: t.clone() })
                .collect(),
            current_node: self.src,
            current_speed: 0.0,
            clock: 0.0,
        }
    }

    fn truth_profile(t: &DroneFailureState) -> FactorProfile {
        match t.failure_time {
            Some(ft) if t.degradation_factor > 1.0 => FactorProfile { onset: Some(ft), factor: t.degradation_factor },
            _ => FactorProfile::NONE,
        }
    }

    /// What the swarm believes: observed onsets exactly, predicted onsets
    /// within the horizon with the predicted factor.
    fn planning_profiles(&self, now: f64, preds: Option<&[FailurePrediction]>, uptime_ref: f64) -> Vec<FactorProfile> {
        let horizon = self.cfg.predictor.horizon_s;
        self.truth
            .iter()
            .enumerate()
            .map(|(i, t)| {
                if matches!(t.failure_time, Some(ft) if ft <= now) && t.degradation_factor > 1.0 {
                    return Self::truth_profile(t);
                }
                let Some(p) = preds.and_then(|p| p.get(i)) else {
                    return FactorProfile::NONE;
                };
                let factor = (uptime_ref / p.predicted_uptime.max(uptime_ref / 3.0)).max(1.0);
                if p.predicted_ft < horizon * 0.98 && factor - 1.0 > self.cfg.policy.epsilon {
                    FactorProfile { onset: Some(now + p.predicted_ft), factor }
                } else {
                    FactorProfile::NONE
                }
            })
            .collect()
    }

    fn planner(&self, mode: &Mode) -> Planner<'_> {
        let (depth, greedy, pinned) = match mode {
            Mode::Free { depth, greedy, .. } => (*depth, *greedy, None),
            Mode::Pinned { path, depth } => (*depth, false, Some(path.clone())),
        };
        let remaining = match mode {
            Mode::Pinned { path, .. } => {
                let mut r = vec![f64::INFINITY; self.net.len()];
                let mut acc = 0.0;
                r[*path.last().unwrap()] = 0.0;
                for w in path.windows(2).rev() {
                    acc += self.net.distance_between(w[0], w[1]).unwrap();
                    r[w[0]] = acc;
                }
                r
            }
            Mode::Free { .. } => self.remaining.clone(),
        };
        Planner {
            net: self.net,
            spec: &self.cfg.drone,
            energies: &self.energies,
            reserve_pct: self.cfg.reserve_pct,
            dst: self.dst,
            remaining,
            depth,
            greedy,
            pinned,
        }
    }

    fn run(&self, strategy: Strategy, mode: Mode, mut memo: Option<&mut RoundMemo>) -> SimulationTrace {
        let spec = &self.cfg.drone;
        let planner = self.planner(&mode);
        let predict = match mode {
            Mode::Free { predict, .. } => predict,
            Mode::Pinned { .. } => true,
        };
        let mut predictor = self
            .fleet
            .filter(|_| predict)
            .map(|f| MissionPredictor::new(f, self.truth.len(), seed_of(&[self.seed, str_seed(&self.request.id)])));
        let uptime_ref = reference_uptime(spec);
        let mut state = self.initial_state();
        let mut visited = vec![false; self.net.len()];
        visited[self.src] = true;
        let mut legs: Vec<LegRecord> = Vec::new();
        let mut path = vec![self.net.id(self.src).to_string()];
        let mut hard = false;

        while state.current_node != self.dst {
            let preds = match predictor.as_mut() {
                Some(p) => match p.update_memo(state.clock, &self.truth, memo.as_deref_mut()) {
                    Ok(v) => Some(v),
                    Err(e) => {
                        log::warn!("prediction failed for {}: {e}", self.request.id);
                        None
                    }
                },
                None => None,
            };
            let profiles = self.planning_profiles(state.clock, preds.as_deref(), uptime_ref);
            let Some(choice) = select_next_node(&planner, &state, &profiles, &visited) else {
                hard = true;
                break;
            };
            let v0 = choice.entry_speed;
            let batteries: Vec<f64> = state.drones.iter().map(|d| d.battery_pct).collect();

            let mut wait = 0.0;
            if choice.target == self.dst {
                let projected = state.clock + choice.distance / v0;
                if projected < self.request.window.st {
                    wait = self.request.window.st - projected;
                }
            }
            let depart = state.clock + wait;

            let (decision, severity) = if planner.greedy || preds.is_none() {
                (None, None)
            } else {
                self.decide(&profiles, &batteries, choice.distance, depart, v0, wait > 0.0)
            };
            let speed = match decision {
                Some(d) if d.action != SpeedAction::Maintain => {
                    SpeedProfile { depart, v0, switch_at: Some(d.effective_from), v1: d.target_speed }
                }
                _ => SpeedProfile::constant(depart, v0),
            };

            // Ground-truth flight.
            let mut energy = Vec::with_capacity(self.truth.len());
            let mut depletion: Option<Depletion> = None;
            for (i, (e, t)) in self.energies.iter().zip(&self.truth).enumerate() {
                let leg = fly_drone(e, batteries[i], choice.distance, &speed, &Self::truth_profile(t));
                if let Some(pos) = leg.depleted_at {
                    if depletion.as_ref().is_none_or(|d| pos < d.position_m) {
                        depletion = Some(Depletion {
                            drone_id: t.drone_id.clone(),
                            position_m: pos,
                            time: speed.time_at(pos, choice.distance),
                        });
                    }
                }
                energy.push(leg.used_pct);
            }
            let (travel_time, arrive) = match &depletion {
                Some(d) => (d.time - depart, d.time),
                None => {
                    let tt = speed.travel_time(choice.distance);
                    (tt, depart + tt)
                }
            };
            let speed_changes = match speed.switch_at {
                Some(t) if t < arrive => vec![(t.max(depart), speed.v1)],
                _ => vec![],
            };
            if let Some(p) = predictor.as_mut() {
                p.observe_flight(depart, arrive, &self.truth);
            }
            let battery_out: Vec<f64> = batteries.iter().zip(&energy).map(|(b, u)| b - u).collect();
            let via: Vec<String> =
                choice.route[1..choice.route.len() - 1].iter().map(|&n| self.net.id(n).to_string()).collect();
            let mut leg = LegRecord {
                from: self.net.id(state.current_node).to_string(),
                to: self.net.id(choice.target).to_string(),
                via,
                distance_m: choice.distance,
                wait_time: wait,
                depart,
                entry_speed: v0,
                decision,
                speed_changes,
                travel_time,
                arrive,
                battery_in: batteries,
                battery_out: battery_out.clone(),
                energy_pct: energy,
                charge_time: 0.0,
                severity,
                depletion: depletion.clone(),
            };
            if depletion.is_some() {
                legs.push(leg);
                hard = true;
                break;
            }
            for &n in &choice.route[1..] {
                visited[n] = true;
                path.push(self.net.id(n).to_string());
            }
            state.clock = state.clock + wait + travel_time;
            state.current_node = choice.target;
            state.current_speed = speed.v1;
            for (d, b) in state.drones.iter_mut().zip(&battery_out) {
                d.battery_pct = *b;
            }
            if choice.target != self.dst {
                let needing: Vec<f64> = battery_out
                    .iter()
                    .filter(|b| **b < 100.0)
                    .map(|b| (100.0 - b) / 100.0 * self.energies[0].capacity_j / spec.charge_power)
                    .collect();
                let per = needing.iter().copied().fold(0.0, f64::max);
                let nt = node_time(needing.len(), self.net.node(choice.target).pads, per);
                leg.charge_time = nt;
                state.clock += nt;
                for d in &mut state.drones {
                    d.battery_pct = 100.0;
                }
            }
            legs.push(leg);
        }
        self.finish(strategy, legs, path, hard)
    }

    /// Speed decision for the upcoming leg from predicted onsets inside it.
    fn decide(
        &self,
        profiles: &[FactorProfile],
        batteries: &[f64],
        distance: f64,
        depart: f64,
        v0: f64,
        waiting: bool,
    ) -> (Option<SpeedDecision>, Option<SeverityReport>) {
        let tt = distance / v0;
        let speed = SpeedProfile::constant(depart, v0);
        let mut dls = BTreeMap::new();
        let mut dec_node_max: f64 = 0.0;
        // (dls, onset) of the most severe drone.
        let mut worst: Option<(f64, f64)> = None;
        for (i, p) in profiles.iter().enumerate() {
            let Some(onset) = p.onset else { continue };
            if onset < depart || onset > depart + tt {
                continue;
            }
            let e = &self.energies[i];
            let pos = speed.pos_at(onset, distance);
            let dec_ft = 100.0 - batteries[i] + pos * e.pct_per_m(v0, 1.0);
            let dec_node = 100.0 - batteries[i] + distance * e.pct_per_m(v0, 1.0);
            let aec_ft = dec_ft;
            let aec_node = dec_ft + (distance - pos) * e.pct_per_m(v0, p.factor);
            let v = drone_level_severity(dec_node, dec_ft, aec_node, aec_ft).unwrap_or(1.0 - 1.0 / p.factor);
            dec_node_max = dec_node_max.max(dec_node);
            dls.insert(self.truth[i].drone_id.clone(), v);
            let better = match worst {
                None => true,
                Some((wv, wt)) => v > wv || (v == wv && onset < wt),
            };
            if better {
                worst = Some((v, onset));
            }
        }
        let Some((_, onset)) = worst else {
            return (None, None);
        };
        let report = SeverityReport::new(dls, hard_failure_threshold(dec_node_max.min(100.0)));
        let SwarmSeverity::Scored { category, .. } = report.swarm else {
            return (None, Some(report));
        };
        let interval = segment_interval(onset - depart, tt).expect("onset inside segment");
        let inp = DecisionInputs {
            energies: &self.energies,
            batteries: batteries.to_vec(),
            profiles,
            distance,
            depart,
            v0,
            reserve_pct: self.cfg.reserve_pct,
            v_min: self.cfg.drone.min_energy_speed,
            v_max: self.cfg.drone.max_speed,
        };
        let mut d = speed_decision(interval, category, onset, &inp);
        // Already waiting for the window: speeding up would only arrive early.
        if waiting && d.action == SpeedAction::SpeedUp {
            d = SpeedDecision { action: SpeedAction::Maintain, target_speed: v0, effective_from: onset };
        }
        (Some(d), Some(report))
    }

    fn finish(&self, strategy: Strategy, legs: Vec<LegRecord>, path: Vec<String>, hard: bool) -> SimulationTrace {
        let mut delivery_time = 0.0;
        for l in &legs {
            delivery_time = delivery_time + l.wait_time + l.travel_time + l.charge_time;
        }
        let outcome = if hard {
            DeliveryOutcome::HardFailure
        } else {
            let arrivals: BTreeMap<String, f64> = self.truth.iter().map(|t| (t.drone_id.clone(), delivery_time)).collect();
            delivery_success(&arrivals, self.request, &self.cfg.policy).expect("non-empty swarm")
        };
        SimulationTrace {
            request_id: self.request.id.clone(),
            strategy,
            drones: self.truth.iter().map(|t| t.drone_id.clone()).collect(),
            travel_time: legs.iter().map(|l| l.travel_time).sum(),
            node_time: legs.iter().map(|l| l.charge_time).sum(),
            wait_time: legs.iter().map(|l| l.wait_time).sum(),
            distance_m: legs.iter().map(|l| l.distance_m).sum(),
            legs,
            path,
            delivery_time,
            outcome,
            flagged: false,
        }
    }

    /// No run along `path` can deliver sooner: top speed throughout, and the
    /// hungriest drone recharging at least what it burns beyond one battery.
    fn delivery_lower_bound(&self, path: &[usize]) -> f64 {
        let len = self.net.path_length(path).unwrap_or(f64::INFINITY);
        let spec = &self.cfg.drone;
        let recharge_pct = self
            .energies
            .iter()
            .map(|e| len * e.pct_per_m(spec.min_energy_speed, 1.0) - 100.0)
            .fold(0.0, f64::max);
        len / spec.max_speed + recharge_pct / 100.0 * self.energies[0].capacity_j / spec.charge_power
    }

    fn rank(t: &SimulationTrace) -> (DeliveryOutcome, f64, f64) {
        (t.outcome, t.delivery_time, t.node_time)
    }
}

pub fn compose_heuristic(m: &Mission) -> SimulationTrace {
    m.run(Strategy::Heuristic, Mode::Free { depth: 0, greedy: false, predict: true }, None)
}

pub fn compose_lookahead(m: &Mission, depth: usize) -> SimulationTrace {
    m.run(Strategy::Lookahead, Mode::Free { depth: depth.max(1), greedy: false, predict: true }, None)
}

pub fn compose_greedy(m: &Mission) -> SimulationTrace {
    m.run(Strategy::Greedy, Mode::Free { depth: 0, greedy: true, predict: false }, None)
}

/// The speed heuristic pinned to `path`, allowed to overfly up to `depth`
/// stops per leg.
pub fn simulate_pinned(m: &Mission, path: &[usize], depth: usize) -> SimulationTrace {
    m.run(Strategy::Exhaustive, Mode::Pinned { path: path.to_vec(), depth }, None)
}

/// Best pinned run over the `cap` shortest paths: outcome first, then
/// delivery time, then node time. A path is skipped once a lower bound on
/// its delivery time shows it cannot beat the best on-time or late trace.
pub fn compose_exhaustive(m: &Mission, cap: usize) -> SimulationTrace {
    let depth = m.cfg.lookahead_depth;
    let mut best: Option<SimulationTrace> = None;
    let mut memo = RoundMemo::new();
    for path in topk_indices(m.net, m.src, m.dst, cap.max(1)) {
        if let Some(b) = &best {
            let prunable = matches!(b.outcome, DeliveryOutcome::Success | DeliveryOutcome::Late);
            if prunable && m.delivery_lower_bound(&path) > b.delivery_time {
                // Paths come sorted by length and the bound grows with it.
                break;
            }
        }
        let t = m.run(Strategy::Exhaustive, Mode::Pinned { path, depth }, Some(&mut memo));
        let better = match &best {
            None => true,
            Some(b) => {
                let (o, d, n) = Mission::rank(&t);
                let (bo, bd, bn) = Mission::rank(b);
                o.cmp(&bo).then(d.total_cmp(&bd)).then(n.total_cmp(&bn)).is_lt()
            }
        };
        if better {
            best = Some(t);
        }
    }
    let mut t = best.expect("source and destination are connected");
    t.flagged = t.outcome == DeliveryOutcome::HardFailure;
    t
}

pub fn compose(m: &Mission, strategy: Strategy) -> SimulationTrace {
    match strategy {
        Strategy::Heuristic => compose_heuristic(m),
        Strategy::Lookahead => compose_lookahead(m, m.cfg.lookahead_depth),
        Strategy::Greedy => compose_greedy(m),
        Strategy::Exhaustive => compose_exhaustive(m, m.cfg.exhaustive_cap),
    }
}
