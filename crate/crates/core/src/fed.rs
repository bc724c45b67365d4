//! Weighted continual federated learning of two linear regressors: time to
//! failure and uptime after failure.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::flightlog::{
    generate_synthetic_flights, DriftConfig, FlightLog, LabeledSeries, LogError, Scaler, SyntheticConfig,
    FEATURE_COUNT,
};

#[derive(Debug, Error)]
pub enum FedError {
    #[error("empty training history")]
    EmptyHistory,
    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("arity mismatch: expected {expected}, got {got}")]
    Arity { expected: usize, got: usize },
    #[error("no models to average")]
    NoModels,
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Log(#[from] LogError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl RegressionModel {
    pub fn zeros(arity: usize) -> Self {
        RegressionModel { weights: vec![0.0; arity], bias: 0.0 }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.weights.iter().zip(x).fold(self.bias, |acc, (w, v)| acc + w * v)
    }

    pub fn is_finite(&self) -> bool {
        self.bias.is_finite() && self.weights.iter().all(|w| w.is_finite())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub initial_lr: f64,
    /// The learning rate drops tenfold every this many epochs.
    pub lr_decay_every: usize,
    /// Times each new-history point enters the training set.
    pub history_weight: usize,
    /// Step halvings tried when a full step would raise the training loss.
    pub max_backtracks: u32,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { epochs: 3000, initial_lr: 1e-2, lr_decay_every: 1000, history_weight: 2, max_backtracks: 8 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), FedError> {
        if self.epochs == 0 {
            return Err(FedError::Config("epochs must be at least 1".into()));
        }
        if !(self.initial_lr > 0.0) {
            return Err(FedError::Config("initial_lr must be positive".into()));
        }
        if self.history_weight == 0 {
            return Err(FedError::Config("history weight must be at least 1".into()));
        }
        if self.lr_decay_every == 0 {
            return Err(FedError::Config("lr_decay_every must be at least 1".into()));
        }
        Ok(())
    }

    pub fn lr_at(&self, epoch: usize) -> f64 {
        self.initial_lr * 10f64.powi(-((epoch / self.lr_decay_every) as i32))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub x: Vec<f64>,
    pub y: f64,
}

/// A drone's private training data for one target.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainingSet {
    pub old: Vec<Sample>,
    pub new: Vec<Sample>,
}

impl TrainingSet {
    pub fn is_empty(&self) -> bool {
        self.old.is_empty() && self.new.is_empty()
    }

    /// Old points once, then the new block `w` times, in a fixed order.
    pub fn weighted(&self, w: usize) -> impl Iterator<Item = &Sample> {
        self.old.iter().chain((0..w).flat_map(move |_| self.new.iter()))
    }

    pub fn effective_len(&self, w: usize) -> usize {
        self.old.len() + w * self.new.len()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Ttf,
    Uptime,
}

/// Regression targets are fitted on a unit scale: time to failure divided
/// by the horizon (and capped there), uptime divided by the reference uptime.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetScale {
    pub horizon_s: f64,
    pub uptime_ref_s: f64,
}

impl TargetScale {
    pub fn ttf_label(&self, ttf_s: f64) -> f64 {
        ttf_s.clamp(0.0, self.horizon_s) / self.horizon_s
    }

    pub fn uptime_label(&self, uptime_s: f64) -> f64 {
        uptime_s / self.uptime_ref_s
    }
}

/// Prior flights and the current flight of one drone.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DroneHistory {
    pub old: Vec<LabeledSeries>,
    pub new: Vec<LabeledSeries>,
}

fn series_samples(
    series: &[LabeledSeries],
    scaler: &Scaler,
    target: Target,
    scale: &TargetScale,
    stride: usize,
) -> Result<Vec<Sample>, FedError> {
    let mut out = Vec::new();
    for s in series {
        let start = s.vectors.first().map(|v| v.second).unwrap_or(0);
        for v in s.vectors.iter().step_by(stride.max(1)) {
            let t = (v.second - start) as f64;
            let y = match target {
                Target::Ttf => scale.ttf_label(s.label_ttf - t),
                Target::Uptime => scale.uptime_label(s.label_uptime),
            };
            out.push(Sample { x: scaler.apply_vector(v)?.to_vec(), y });
        }
    }
    Ok(out)
}

impl DroneHistory {
    /// Standardized samples for one target, keeping every `stride`-th vector.
    pub fn training_set(
        &self,
        scaler: &Scaler,
        target: Target,
        scale: &TargetScale,
        stride: usize,
    ) -> Result<TrainingSet, FedError> {
        Ok(TrainingSet {
            old: series_samples(&self.old, scaler, target, scale, stride)?,
            new: series_samples(&self.new, scaler, target, scale, stride)?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FailurePrediction {
    pub drone_id: String,
    /// Seconds from the prediction time.
    pub predicted_ft: f64,
    pub predicted_uptime: f64,
}

/// One row of the training trace.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TracePoint {
    pub epoch: usize,
    pub lr: f64,
    pub loss: f64,
}

fn accumulate(model: &RegressionModel, block: &[Sample], loss: &mut f64, gw: &mut [f64], gb: &mut f64) {
    for s in block {
        let r = model.predict(&s.x) - s.y;
        *loss += r.abs();
        if r != 0.0 {
            let sign = if r > 0.0 { 1.0 } else { -1.0 };
            for (g, x) in gw.iter_mut().zip(&s.x) {
                *g += sign * x;
            }
            *gb += sign;
        }
    }
}

/// Mean absolute error and its subgradient (zero at zero residual), over
/// the same sequence as [`TrainingSet::weighted`].
fn mae_grad(model: &RegressionModel, data: &TrainingSet, w: usize) -> (f64, Vec<f64>, f64) {
    let mut loss = 0.0;
    let mut gw = vec![0.0; model.weights.len()];
    let mut gb = 0.0;
    accumulate(model, &data.old, &mut loss, &mut gw, &mut gb);
    for _ in 0..w {
        accumulate(model, &data.new, &mut loss, &mut gw, &mut gb);
    }
    let n = data.effective_len(w) as f64;
    gw.iter_mut().for_each(|g| *g /= n);
    (loss / n, gw, gb / n)
}

pub fn training_loss(model: &RegressionModel, data: &TrainingSet, w: usize) -> f64 {
    mae_grad(model, data, w).0
}

pub fn local_train(model: &RegressionModel, data: &TrainingSet, cfg: &TrainConfig) -> Result<RegressionModel, FedError> {
    local_train_traced(model, data, cfg, |_| {})
}

/// Full-batch subgradient descent on the MAE. A step that would raise the
/// training loss is halved up to `max_backtracks` times and otherwise
/// skipped, so the loss never increases.
pub fn local_train_traced(
    model: &RegressionModel,
    data: &TrainingSet,
    cfg: &TrainConfig,
    mut hook: impl FnMut(TracePoint),
) -> Result<RegressionModel, FedError> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(FedError::EmptyHistory);
    }
    let arity = model.weights.len();
    if let Some(s) = data.old.iter().chain(&data.new).find(|s| s.x.len() != arity) {
        return Err(FedError::Arity { expected: arity, got: s.x.len() });
    }
    let w = cfg.history_weight;
    let mut m = model.clone();
    let (mut loss, mut gw, mut gb) = mae_grad(&m, data, w);
    let mut stalled_plateau = None;
    for epoch in 0..cfg.epochs {
        let lr = cfg.lr_at(epoch);
        let plateau = epoch / cfg.lr_decay_every;
        if stalled_plateau != Some(plateau) {
            let mut step = lr;
            let mut accepted = false;
            for _ in 0..=cfg.max_backtracks {
                let cand = RegressionModel {
                    weights: m.weights.iter().zip(&gw).map(|(a, g)| a - step * g).collect(),
                    bias: m.bias - step * gb,
                };
                if !cand.is_finite() {
                    return Err(FedError::Diverged { epoch });
                }
                let (cl, cgw, cgb) = mae_grad(&cand, data, w);
                if cl <= loss {
                    m = cand;
                    loss = cl;
                    gw = cgw;
                    gb = cgb;
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            // Same inputs give the same rejection until the rate drops.
            if !accepted {
                stalled_plateau = Some(plateau);
            }
        }
        hook(TracePoint { epoch, lr, loss });
    }
    if !m.is_finite() {
        return Err(FedError::Diverged { epoch: cfg.epochs });
    }
    Ok(m)
}

/// Element-wise mean. Each coordinate is summed in sorted order so the
/// result does not depend on the order of `models`.
pub fn fed_average(models: &[RegressionModel]) -> Result<RegressionModel, FedError> {
    let first = models.first().ok_or(FedError::NoModels)?;
    let arity = first.weights.len();
    if let Some(m) = models.iter().find(|m| m.weights.len() != arity) {
        return Err(FedError::Arity { expected: arity, got: m.weights.len() });
    }
    let n = models.len() as f64;
    let mean = |mut vals: Vec<f64>| {
        vals.sort_by(f64::total_cmp);
        vals.iter().sum::<f64>() / n
    };
    Ok(RegressionModel {
        weights: (0..arity).map(|j| mean(models.iter().map(|m| m.weights[j]).collect())).collect(),
        bias: mean(models.iter().map(|m| m.bias).collect()),
    })
}

/// Lead-drone side of a round. It only ever sees model weights.
#[derive(Debug, Default)]
pub struct Aggregator {
    received: Vec<RegressionModel>,
}

impl Aggregator {
    pub fn connect() -> Self {
        Aggregator::default()
    }

    pub fn submit(&mut self, model: RegressionModel) {
        self.received.push(model);
    }

    pub fn average(self) -> Result<RegressionModel, FedError> {
        fed_average(&self.received)
    }
}

/// Both regressors of the swarm predictor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictorModels {
    pub ft: RegressionModel,
    pub uptime: RegressionModel,
}

impl PredictorModels {
    pub fn zeros() -> Self {
        PredictorModels { ft: RegressionModel::zeros(FEATURE_COUNT), uptime: RegressionModel::zeros(FEATURE_COUNT) }
    }

    pub fn get(&self, t: Target) -> &RegressionModel {
        match t {
            Target::Ttf => &self.ft,
            Target::Uptime => &self.uptime,
        }
    }

    /// Predictions in seconds; negative regression outputs are clamped to 0.
    pub fn predict(&self, drone_id: &str, x: &[f64], scale: &TargetScale) -> FailurePrediction {
        let clamp = |v: f64, what: &str| {
            if v < 0.0 {
                log::debug!("negative {what} prediction {v} for {drone_id} clamped to 0");
                0.0
            } else {
                v
            }
        };
        FailurePrediction {
            drone_id: drone_id.to_string(),
            predicted_ft: clamp(self.ft.predict(x), "ft") * scale.horizon_s,
            predicted_uptime: clamp(self.uptime.predict(x), "uptime") * scale.uptime_ref_s,
        }
    }
}

/// A follower drone with its private data for both targets.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DroneData {
    pub drone_id: String,
    pub ft: TrainingSet,
    pub uptime: TrainingSet,
    /// Most recent standardized telemetry vector.
    pub latest: Option<Vec<f64>>,
}

impl DroneData {
    fn set(&self, t: Target) -> &TrainingSet {
        match t {
            Target::Ttf => &self.ft,
            Target::Uptime => &self.uptime,
        }
    }

    /// Trains the distributed global model locally; only weights leave.
    pub fn train(&self, global: &RegressionModel, target: Target, cfg: &TrainConfig) -> Result<RegressionModel, FedError> {
        let data = self.set(target);
        if data.is_empty() {
            return Ok(global.clone());
        }
        local_train(global, data, cfg)
    }
}

fn round_for(drones: &[DroneData], global: &RegressionModel, target: Target, cfg: &TrainConfig) -> Result<RegressionModel, FedError> {
    if drones.iter().all(|d| d.set(target).is_empty()) {
        return Ok(global.clone());
    }
    let mut agg = Aggregator::connect();
    for d in drones {
        agg.submit(d.train(global, target, cfg)?);
    }
    agg.average()
}

/// Distribute, train locally, average; then predict each drone from its
/// latest vector with the new global models.
pub fn federated_round(
    drones: &[DroneData],
    global: &PredictorModels,
    cfg: &TrainConfig,
    scale: &TargetScale,
) -> Result<(PredictorModels, Vec<FailurePrediction>), FedError> {
    if drones.iter().all(|d| d.ft.is_empty() && d.uptime.is_empty()) {
        return Err(FedError::EmptyHistory);
    }
    let next = PredictorModels {
        ft: round_for(drones, &global.ft, Target::Ttf, cfg)?,
        uptime: round_for(drones, &global.uptime, Target::Uptime, cfg)?,
    };
    let preds = drones
        .iter()
        .filter_map(|d| d.latest.as_ref().map(|x| next.predict(&d.drone_id, x, scale)))
        .collect();
    Ok((next, preds))
}

/// Telemetry gathered by one drone on the last segment.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SegmentLog {
    pub ft: Vec<Sample>,
    pub uptime: Vec<Sample>,
    pub latest: Option<Vec<f64>>,
}

/// Grows each drone's new history with its segment log and reruns a round.
pub fn continual_update(
    drones: &mut [DroneData],
    segment_logs: Vec<SegmentLog>,
    global: &PredictorModels,
    cfg: &TrainConfig,
    scale: &TargetScale,
) -> Result<(PredictorModels, Vec<FailurePrediction>), FedError> {
    for (d, log) in drones.iter_mut().zip(segment_logs) {
        d.ft.new.extend(log.ft);
        d.uptime.new.extend(log.uptime);
        if log.latest.is_some() {
            d.latest = log.latest;
        }
    }
    federated_round(drones, global, cfg, scale)
}

/// Which third of `[0, segment_s]` a time falls in; `None` outside.
pub fn interval_of(t: f64, segment_s: f64) -> Option<u8> {
    if !(0.0..=segment_s).contains(&t) {
        return None;
    }
    Some(if t < segment_s / 3.0 {
        0
    } else if t < 2.0 * segment_s / 3.0 {
        1
    } else {
        2
    })
}

/// Share of `(predicted, true)` pairs with the true time inside the segment
/// whose prediction lands in the same third.
pub fn interval_accuracy(pairs: &[(f64, f64)], segment_s: f64) -> Option<f64> {
    let inside: Vec<_> = pairs.iter().filter_map(|(p, t)| interval_of(*t, segment_s).map(|i| (p, i))).collect();
    if inside.is_empty() {
        return None;
    }
    let hits = inside.iter().filter(|(p, i)| interval_of(**p, segment_s) == Some(*i)).count();
    Some(hits as f64 / inside.len() as f64)
}

/// Stable 64-bit FNV-1a, used to tag checkpoints with their config.
pub fn config_hash(cfg: &TrainConfig) -> String {
    let text = serde_json::to_string(cfg).expect("config serializes");
    let mut h: u64 = 0xcbf29ce484222325;
    for b in text.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    format!("{h:016x}")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub target: Target,
    pub model: RegressionModel,
    pub scale: TargetScale,
    /// Path of the scaler JSON this model was trained against.
    pub scaler: String,
    pub config_hash: String,
}

pub fn write_loss_csv(rows: &[(String, TracePoint)], mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "series,epoch,lr,loss")?;
    for (name, p) in rows {
        writeln!(out, "{name},{},{:e},{}", p.epoch, p.lr, p.loss)?;
    }
    Ok(())
}

/// Federated training over a log corpus: flights are dealt to drones in
/// turn, each drone's last `new_fraction` of flights is its new history.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusTrainConfig {
    pub drones: usize,
    pub rounds: usize,
    pub new_fraction: f64,
    pub stride: usize,
    pub train: TrainConfig,
    pub scale: TargetScale,
}

impl Default for CorpusTrainConfig {
    fn default() -> Self {
        let m = crate::flightlog::FeatureModel::default();
        CorpusTrainConfig {
            drones: 4,
            rounds: 1,
            new_fraction: 0.2,
            stride: 1,
            train: TrainConfig::default(),
            scale: TargetScale { horizon_s: m.horizon_s, uptime_ref_s: m.uptime_ref_s },
        }
    }
}

#[derive(Clone, Debug)]
pub struct CorpusTrainResult {
    pub scaler: Scaler,
    pub models: PredictorModels,
    /// Trace rows named `round<r>/<target>/<drone>`.
    pub loss: Vec<(String, TracePoint)>,
}

pub fn train_corpus(flights: &[LabeledSeries], cfg: &CorpusTrainConfig) -> Result<CorpusTrainResult, FedError> {
    cfg.train.validate()?;
    if cfg.drones == 0 || cfg.rounds == 0 || !(0.0..=1.0).contains(&cfg.new_fraction) {
        return Err(FedError::Config("need drones >= 1, rounds >= 1 and new_fraction in [0, 1]".into()));
    }
    if flights.is_empty() {
        return Err(FedError::EmptyHistory);
    }
    let scaler = Scaler::fit_series(flights.iter())?;
    let mut drones = Vec::new();
    for d in 0..cfg.drones {
        let mine: Vec<LabeledSeries> = flights.iter().skip(d).step_by(cfg.drones).cloned().collect();
        let n_new = ((mine.len() as f64) * cfg.new_fraction).round() as usize;
        let (old, new) = mine.split_at(mine.len() - n_new.min(mine.len()));
        let h = DroneHistory { old: old.to_vec(), new: new.to_vec() };
        drones.push(DroneData {
            drone_id: format!("d{d}"),
            ft: h.training_set(&scaler, Target::Ttf, &cfg.scale, cfg.stride)?,
            uptime: h.training_set(&scaler, Target::Uptime, &cfg.scale, cfg.stride)?,
            latest: None,
        });
    }
    let mut models = PredictorModels::zeros();
    let mut loss = Vec::new();
    for r in 0..cfg.rounds {
        for (target, name) in [(Target::Ttf, "ft"), (Target::Uptime, "uptime")] {
            let global = models.get(target).clone();
            let mut agg = Aggregator::connect();
            for d in drones.iter().filter(|d| !d.set(target).is_empty()) {
                let series = format!("round{r}/{name}/{}", d.drone_id);
                agg.submit(local_train_traced(&global, d.set(target), &cfg.train, |p| loss.push((series.clone(), p)))?);
            }
            let next = agg.average()?;
            match target {
                Target::Ttf => models.ft = next,
                Target::Uptime => models.uptime = next,
            }
        }
    }
    Ok(CorpusTrainResult { scaler, models, loss })
}

/// Settings of the history-weight experiment on drifting synthetic logs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WeightStudyConfig {
    pub drones: usize,
    pub old_flights: usize,
    pub new_flights: usize,
    pub test_flights: usize,
    /// Keep every n-th per-second vector.
    pub stride: usize,
    pub pretrain: TrainConfig,
    pub continual: TrainConfig,
    pub synthetic: SyntheticConfig,
    pub drift: DriftConfig,
}

impl Default for WeightStudyConfig {
    fn default() -> Self {
        WeightStudyConfig {
            drones: 4,
            old_flights: 6,
            new_flights: 1,
            test_flights: 2,
            stride: 4,
            pretrain: TrainConfig { epochs: 1000, history_weight: 1, ..TrainConfig::default() },
            continual: TrainConfig { epochs: 400, initial_lr: 1e-2, lr_decay_every: 200, ..TrainConfig::default() },
            synthetic: SyntheticConfig::default(),
            drift: DriftConfig::on(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WeightStudyResult {
    pub seed: u64,
    /// Held-out time-to-failure MAE in seconds of the model trained on old
    /// history only.
    pub ncfl_mae: f64,
    /// `(w, held-out MAE)` of continual training with history weight `w`.
    pub wcfl_mae: Vec<(usize, f64)>,
}

/// Per-drone flights (old, then drifted new and test flights) and the
/// scaler fitted on the old flights.
struct StudyData {
    histories: Vec<DroneHistory>,
    test: Vec<LabeledSeries>,
    scaler: Scaler,
}

fn study_data(seed: u64, cfg: &WeightStudyConfig) -> Result<StudyData, FedError> {
    let per = cfg.old_flights + cfg.new_flights + cfg.test_flights;
    let recent = (cfg.new_flights + cfg.test_flights) as f64 / per as f64;
    let drift = DriftConfig { recent_fraction: recent, ..cfg.drift.clone() };
    let mut histories = Vec::new();
    let mut test = Vec::new();
    for d in 0..cfg.drones {
        let flights: Vec<FlightLog> =
            generate_synthetic_flights(per, seed.wrapping_mul(1000).wrapping_add(d as u64), &drift, &cfg.synthetic);
        let series: Vec<LabeledSeries> = flights.iter().map(FlightLog::to_series).collect();
        let (old, rest) = series.split_at(cfg.old_flights);
        let (new, held) = rest.split_at(cfg.new_flights);
        histories.push(DroneHistory { old: old.to_vec(), new: new.to_vec() });
        test.extend_from_slice(held);
    }
    let scaler = Scaler::fit_series(histories.iter().flat_map(|h| h.old.iter()))?;
    Ok(StudyData { histories, test, scaler })
}

fn held_out_mae(model: &RegressionModel, test: &[LabeledSeries], scaler: &Scaler, scale: &TargetScale) -> Result<f64, FedError> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for s in test {
        let start = s.vectors.first().map(|v| v.second).unwrap_or(0);
        for v in &s.vectors {
            let truth = (s.label_ttf - (v.second - start) as f64).clamp(0.0, scale.horizon_s);
            let x = scaler.apply_vector(v)?;
            let pred = model.predict(&x).clamp(0.0, 1.0) * scale.horizon_s;
            sum += (pred - truth).abs();
            n += 1;
        }
    }
    Ok(if n == 0 { 0.0 } else { sum / n as f64 })
}

/// Pretrains on old history, then compares non-continual (old only) with
/// continual rounds at each history weight, on held-out drifted flights.
pub fn weight_study(seed: u64, weights: &[usize], cfg: &WeightStudyConfig) -> Result<WeightStudyResult, FedError> {
    let data = study_data(seed, cfg)?;
    let scale = TargetScale { horizon_s: cfg.synthetic.model.horizon_s, uptime_ref_s: cfg.synthetic.model.uptime_ref_s };
    let sets: Vec<TrainingSet> = data
        .histories
        .iter()
        .map(|h| h.training_set(&data.scaler, Target::Ttf, &scale, cfg.stride))
        .collect::<Result<_, _>>()?;
    let old_only: Vec<DroneData> = sets
        .iter()
        .map(|s| DroneData { ft: TrainingSet { old: s.old.clone(), new: vec![] }, ..Default::default() })
        .collect();
    let pretrained = round_for(&old_only, &RegressionModel::zeros(FEATURE_COUNT), Target::Ttf, &cfg.pretrain)?;
    // The non-continual model keeps training on old history for the same
    // number of epochs the continual models get.
    let ncfl = round_for(&old_only, &pretrained, Target::Ttf, &TrainConfig { history_weight: 1, ..cfg.continual.clone() })?;
    let ncfl_mae = held_out_mae(&ncfl, &data.test, &data.scaler, &scale)?;
    let drones: Vec<DroneData> = sets.into_iter().map(|s| DroneData { ft: s, ..Default::default() }).collect();
    let mut wcfl_mae = Vec::new();
    for &w in weights {
        let c = TrainConfig { history_weight: w, ..cfg.continual.clone() };
        let m = round_for(&drones, &pretrained, Target::Ttf, &c)?;
        wcfl_mae.push((w, held_out_mae(&m, &data.test, &data.scaler, &scale)?));
    }
    Ok(WeightStudyResult { seed, ncfl_mae, wcfl_mae })
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}
