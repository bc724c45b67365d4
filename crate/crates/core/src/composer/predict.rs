//! In-flight failure prediction: a fleet pretrained on prior flights, and a
//! per-mission predictor updated by continual federated rounds at each node.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::energy::DroneSpec;
use crate::failure::DroneFailureState;
use crate::fed::{
    continual_update, fed_average, local_train_traced, DroneData, FailurePrediction, FedError, PredictorModels, Sample,
    SegmentLog, Target, TargetScale, TracePoint, TrainConfig, TrainingSet,
};
use crate::flightlog::{standardize_fit, DriftConfig, FeatureModel, FlightTruth, Scaler, FEATURE_COUNT};

use super::physics::DroneEnergy;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PredictorConfig {
    pub horizon_s: f64,
    pub telemetry_interval_s: f64,
    pub fleet_size: usize,
    pub old_flights: usize,
    /// Sampling interval of prior-flight telemetry kept as old history.
    pub old_interval_s: f64,
    pub old_onset_range: (f64, f64),
    pub old_factor_range: (f64, f64),
    pub pretrain: TrainConfig,
    pub continual: TrainConfig,
    /// Conditions of the current flights, shifted against prior flights.
    pub drift: DriftConfig,
    pub flight_offset_sd: f64,
    pub noise: f64,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        PredictorConfig {
            horizon_s: 300.0,
            telemetry_interval_s: 15.0,
            fleet_size: 5,
            old_flights: 3,
            old_interval_s: 40.0,
            old_onset_range: (60.0, 900.0),
            old_factor_range: (1.1, 1.6),
            pretrain: TrainConfig { epochs: 800, history_weight: 1, ..TrainConfig::default() },
            continual: TrainConfig { epochs: 40, initial_lr: 1e-2, ..TrainConfig::default() },
            drift: DriftConfig::on(),
            flight_offset_sd: 0.3,
            noise: 1.0,
        }
    }
}

/// Full-battery endurance (s) of a reference drone carrying half the maximum
/// payload at base speed.
pub fn reference_uptime(spec: &DroneSpec) -> f64 {
    let e = DroneEnergy::new(spec, spec.max_payload / 2.0).expect("valid spec");
    let pct_per_s = e.pct_per_m(spec.base_speed, 1.0) * spec.base_speed;
    100.0 / pct_per_s
}

fn mix(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_add(0x9e3779b97f4a7c15).wrapping_add(a << 6).wrapping_add(a >> 2);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

pub(crate) fn seed_of(parts: &[u64]) -> u64 {
    parts.iter().fold(0x5eed, |acc, p| mix(acc, *p))
}

pub(crate) fn str_seed(s: &str) -> u64 {
    s.bytes().fold(0xcbf29ce484222325u64, |h, b| (h ^ b as u64).wrapping_mul(0x100000001b3))
}

/// Models and private data of the drone fleet before any mission.
#[derive(Clone, Debug)]
pub struct PretrainedFleet {
    pub scaler: Scaler,
    pub models: PredictorModels,
    pub scale: TargetScale,
    pub feature_model: FeatureModel,
    /// Old-history training sets per fleet drone.
    pub drones: Vec<DroneData>,
    pub cfg: PredictorConfig,
    /// Pretraining trace rows named `<target>/<drone>`.
    pub loss: Vec<(String, TracePoint)>,
}

impl PretrainedFleet {
    pub fn train(seed: u64, spec: &DroneSpec, cfg: &PredictorConfig) -> Result<Self, FedError> {
        let uptime_ref = reference_uptime(spec);
        let fm = FeatureModel {
            horizon_s: cfg.horizon_s,
            uptime_ref_s: uptime_ref,
            flight_offset_sd: cfg.flight_offset_sd,
            noise: cfg.noise,
        };
        let scale = TargetScale { horizon_s: cfg.horizon_s, uptime_ref_s: uptime_ref };
        let no_drift = DriftConfig::default();
        let mut raw: Vec<Vec<(Vec<f64>, f64, f64)>> = Vec::new();
        for d in 0..cfg.fleet_size {
            let mut rng = ChaCha8Rng::seed_from_u64(seed_of(&[seed, 0xf1ee7, d as u64]));
            let mut rows = Vec::new();
            for _ in 0..cfg.old_flights {
                let (olo, ohi) = cfg.old_onset_range;
                let onset = olo + (ohi - olo) * rng.random::<f64>();
                let (flo, fhi) = cfg.old_factor_range;
                let factor = flo + (fhi - flo) * rng.random::<f64>();
                let end = onset + uptime_ref / factor;
                let truth = FlightTruth { onset: Some(onset), factor };
                let offsets = fm.flight_offsets(&mut rng);
                let mut t = cfg.old_interval_s * rng.random::<f64>();
                while t < end {
                    let v = fm.sample_vector(t as i64, t, truth, &no_drift, &offsets, &mut rng);
                    rows.push((v.values.to_vec(), scale.ttf_label(onset - t), scale.uptime_label(uptime_ref / factor)));
                    t += cfg.old_interval_s;
                }
            }
            raw.push(rows);
        }
        let mut columns = vec![Vec::new(); FEATURE_COUNT];
        for rows in &raw {
            for (x, _, _) in rows {
                for (c, v) in columns.iter_mut().zip(x) {
                    c.push(*v);
                }
            }
        }
        let scaler = standardize_fit(&columns)?;
        let mut drones = Vec::new();
        for (d, rows) in raw.into_iter().enumerate() {
            let mut ft = TrainingSet::default();
            let mut up = TrainingSet::default();
            for (x, yf, yu) in rows {
                let z = crate::flightlog::standardize_apply(&scaler, &x)?;
                ft.old.push(Sample { x: z.clone(), y: yf });
                up.old.push(Sample { x: z, y: yu });
            }
            drones.push(DroneData { drone_id: drone_id(d), ft, uptime: up, latest: None });
        }
        // One federated round from zero weights, with each local run traced.
        let mut loss = Vec::new();
        let mut round = |target: Target, name: &str| -> Result<_, FedError> {
            let mut locals = Vec::new();
            for d in &drones {
                let set = if target == Target::Ttf { &d.ft } else { &d.uptime };
                let series = format!("{name}/{}", d.drone_id);
                let init = crate::fed::RegressionModel::zeros(FEATURE_COUNT);
                locals.push(local_train_traced(&init, set, &cfg.pretrain, |p| loss.push((series.clone(), p)))?);
            }
            fed_average(&locals)
        };
        let models = PredictorModels { ft: round(Target::Ttf, "ft")?, uptime: round(Target::Uptime, "uptime")? };
        Ok(PretrainedFleet { scaler, models, scale, feature_model: fm, drones, cfg: cfg.clone(), loss })
    }
}

pub fn drone_id(i: usize) -> String {
    format!("d{i}")
}

/// Telemetry reading awaiting a known label.
#[derive(Clone, Debug)]
struct Pending {
    t: f64,
    x: Vec<f64>,
}

/// The swarm's predictor for one mission.
#[derive(Clone, Debug)]
pub struct MissionPredictor<'a> {
    fleet: &'a PretrainedFleet,
    models: PredictorModels,
    drones: Vec<DroneData>,
    pending: Vec<Vec<Pending>>,
    offsets: Vec<[f64; FEATURE_COUNT]>,
    seed: u64,
    /// Bit patterns of every call so far; the state is a function of it.
    history: Vec<u64>,
}

/// Trained rounds keyed by predictor call history, so simulations that share
/// a prefix skip retraining.
pub(crate) type RoundMemo = HashMap<Vec<u64>, (PredictorModels, Vec<FailurePrediction>)>;

impl<'a> MissionPredictor<'a> {
    /// Swarm drone `i` is fleet drone `i`.
    pub fn new(fleet: &'a PretrainedFleet, swarm: usize, mission_seed: u64) -> Self {
        let offsets = (0..swarm)
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed_of(&[mission_seed, 0x0ff5e7, i as u64]));
                fleet.feature_model.flight_offsets(&mut rng)
            })
            .collect();
        MissionPredictor {
            fleet,
            models: fleet.models.clone(),
            drones: (0..swarm).map(|i| fleet.drones[i % fleet.drones.len()].clone()).collect(),
            pending: vec![Vec::new(); swarm],
            offsets,
            seed: mission_seed,
            history: Vec::new(),
        }
    }

    pub fn models(&self) -> &PredictorModels {
        &self.models
    }

    /// Standardized reading of drone `i` at mission time `t`. Readings are a
    /// pure function of drone, time and seed, so every strategy sees the
    /// same world.
    fn reading(&self, i: usize, t: f64, truth: &DroneFailureState) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed_of(&[self.seed, i as u64, t.to_bits()]));
        let ft = FlightTruth {
            onset: truth.failure_time.filter(|_| truth.degradation_factor > 1.0),
            factor: truth.degradation_factor,
        };
        let v = self.fleet.feature_model.sample_vector(t as i64, t, ft, &self.fleet.cfg.drift, &self.offsets[i], &mut rng);
        self.fleet.scaler.apply_vector(&v).expect("schema fixed").to_vec()
    }

    /// Records telemetry on the grid of telemetry times inside `[t0, t1)`.
    pub fn observe_flight(&mut self, t0: f64, t1: f64, truth: &[DroneFailureState]) {
        self.history.extend([t0.to_bits(), t1.to_bits()]);
        let dt = self.fleet.cfg.telemetry_interval_s;
        let mut k = (t0 / dt).ceil() as i64;
        while (k as f64) * dt < t1 {
            let t = k as f64 * dt;
            for (i, tr) in truth.iter().enumerate() {
                let x = self.reading(i, t, tr);
                self.pending[i].push(Pending { t, x });
            }
            k += 1;
        }
    }

    /// Labels whatever the swarm can know at `now`, runs a continual round if
    /// any new labeled data exists, and predicts from the current readings.
    pub fn update(&mut self, now: f64, truth: &[DroneFailureState]) -> Result<Vec<FailurePrediction>, FedError> {
        self.update_memo(now, truth, None)
    }

    pub(crate) fn update_memo(
        &mut self,
        now: f64,
        truth: &[DroneFailureState],
        memo: Option<&mut RoundMemo>,
    ) -> Result<Vec<FailurePrediction>, FedError> {
        self.history.push(now.to_bits());
        let scale = self.fleet.scale;
        let mut logs = Vec::with_capacity(truth.len());
        let mut any = false;
        for (i, tr) in truth.iter().enumerate() {
            let observed = tr.failure_time.filter(|ft| *ft <= now && tr.degradation_factor > 1.0);
            let mut log = SegmentLog::default();
            let mut keep = Vec::new();
            for p in self.pending[i].drain(..) {
                if let Some(ft) = observed {
                    log.ft.push(Sample { x: p.x.clone(), y: scale.ttf_label(ft - p.t) });
                    if p.t >= ft - scale.horizon_s {
                        log.uptime.push(Sample { x: p.x, y: 1.0 / tr.degradation_factor });
                    }
                } else if p.t <= now - scale.horizon_s {
                    // No failure within a horizon of this reading.
                    log.ft.push(Sample { x: p.x, y: 1.0 });
                } else {
                    keep.push(p);
                }
            }
            self.pending[i] = keep;
            any |= !log.ft.is_empty() || !log.uptime.is_empty();
            log.latest = Some(self.reading(i, now, tr));
            logs.push(log);
        }
        if any {
            if let Some((m, preds)) = memo.as_ref().and_then(|c| c.get(&self.history)) {
                for (d, log) in self.drones.iter_mut().zip(logs) {
                    d.ft.new.extend(log.ft);
                    d.uptime.new.extend(log.uptime);
                    d.latest = log.latest;
                }
                self.models = m.clone();
                return Ok(preds.clone());
            }
            let (m, preds) = continual_update(&mut self.drones, logs, &self.models, &self.fleet.cfg.continual, &scale)?;
            if let Some(c) = memo {
                c.insert(self.history.clone(), (m.clone(), preds.clone()));
            }
            self.models = m;
            Ok(preds)
        } else {
            Ok(logs
                .iter()
                .zip(&self.drones)
                .map(|(l, d)| self.models.predict(&d.drone_id, l.latest.as_ref().unwrap(), &scale))
                .collect())
        }
    }

    pub fn uptime_ref(&self) -> f64 {
        self.fleet.scale.uptime_ref_s
    }
}
