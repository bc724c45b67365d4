//! Telemetry feature pipeline: one-second range merge, standardization,
//! labeled series, flight-log files, and a synthetic fault-log generator.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const FEATURE_COUNT: usize = 18;

pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "velocity_x",
    "velocity_y",
    "velocity_z",
    "angular_velocity_x",
    "angular_velocity_y",
    "angular_velocity_z",
    "linear_acceleration_x",
    "linear_acceleration_y",
    "linear_acceleration_z",
    "magnetic_field_x",
    "magnetic_field_y",
    "magnetic_field_z",
    "fluid_pressure",
    "temperature",
    "altitude_error",
    "airspeed_error",
    "tracking_error",
    "distance_to_ideal",
];

pub fn feature_index(name: &str) -> Option<usize> {
    FEATURE_NAMES.iter().position(|n| *n == name)
}

#[derive(Debug, Error)]
pub enum LogError {
    #[error("schema mismatch: expected {expected} features, got {got}")]
    Schema { expected: usize, got: usize },
    #[error("empty column {0}")]
    EmptyColumn(usize),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawLogPoint {
    pub timestamp: f64,
    pub feature: usize,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub second: i64,
    pub values: [f64; FEATURE_COUNT],
}

/// Time-ordered vectors of one flight with its failure labels. `label_ttf`
/// is the onset second relative to the series start.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledSeries {
    pub vectors: Vec<FeatureVector>,
    pub label_ttf: f64,
    pub label_uptime: f64,
}

/// Per-feature standardization statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct Scaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Columns with zero variance; their std is stored as 1.
    pub constant: Vec<bool>,
}

pub fn standardize_fit(columns: &[Vec<f64>]) -> Result<Scaler, LogError> {
    let mut mean = Vec::with_capacity(columns.len());
    let mut std = Vec::with_capacity(columns.len());
    let mut constant = Vec::with_capacity(columns.len());
    for (j, col) in columns.iter().enumerate() {
        if col.is_empty() {
            return Err(LogError::EmptyColumn(j));
        }
        let n = col.len() as f64;
        let m = col.iter().sum::<f64>() / n;
        let var = col.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
        let s = var.sqrt();
        let flat = !(s > 0.0) || col.iter().all(|x| *x == col[0]);
        mean.push(if flat { col[0] } else { m });
        std.push(if flat { 1.0 } else { s });
        constant.push(flat);
    }
    Ok(Scaler { mean, std, constant })
}

pub fn standardize_apply(scaler: &Scaler, vector: &[f64]) -> Result<Vec<f64>, LogError> {
    if vector.len() != scaler.mean.len() {
        return Err(LogError::Schema { expected: scaler.mean.len(), got: vector.len() });
    }
    Ok(vector
        .iter()
        .zip(scaler.mean.iter().zip(&scaler.std))
        .map(|(x, (m, s))| (x - m) / s)
        .collect())
}

impl Scaler {
    /// Fits on every vector of every series.
    pub fn fit_series<'a>(series: impl IntoIterator<Item = &'a LabeledSeries>) -> Result<Scaler, LogError> {
        let mut columns = vec![Vec::new(); FEATURE_COUNT];
        for s in series {
            for v in &s.vectors {
                for (c, x) in columns.iter_mut().zip(v.values.iter()) {
                    c.push(*x);
                }
            }
        }
        standardize_fit(&columns)
    }

    pub fn apply_vector(&self, v: &FeatureVector) -> Result<[f64; FEATURE_COUNT], LogError> {
        let z = standardize_apply(self, &v.values)?;
        let mut out = [0.0; FEATURE_COUNT];
        out.copy_from_slice(&z);
        Ok(out)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let features: Vec<_> = (0..self.mean.len())
            .map(|j| {
                serde_json::json!({
                    "feature": FEATURE_NAMES.get(j).copied().unwrap_or("unnamed"),
                    "mean": self.mean[j],
                    "std": self.std[j],
                    "constant": self.constant[j],
                })
            })
            .collect();
        serde_json::json!({ "features": features })
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Scaler, LogError> {
        let bad = |m: &str| LogError::Parse { line: 0, msg: m.to_string() };
        let feats = v["features"].as_array().ok_or_else(|| bad("missing features"))?;
        let mut s = Scaler { mean: vec![], std: vec![], constant: vec![] };
        for f in feats {
            s.mean.push(f["mean"].as_f64().ok_or_else(|| bad("mean"))?);
            s.std.push(f["std"].as_f64().ok_or_else(|| bad("std"))?);
            s.constant.push(f["constant"].as_bool().unwrap_or(false));
        }
        Ok(s)
    }
}

/// Averages raw points into one vector per integer second. A feature absent
/// from a second carries its previous value forward, or zero before its
/// first report.
pub fn range_merge(points: &[RawLogPoint]) -> Vec<FeatureVector> {
    let mut buckets: BTreeMap<i64, [(f64, usize); FEATURE_COUNT]> = BTreeMap::new();
    for p in points {
        if p.feature >= FEATURE_COUNT {
            continue;
        }
        let sec = p.timestamp.floor() as i64;
        let slot = &mut buckets.entry(sec).or_insert([(0.0, 0); FEATURE_COUNT])[p.feature];
        slot.0 += p.value;
        slot.1 += 1;
    }
    let mut last = [0.0; FEATURE_COUNT];
    buckets
        .into_iter()
        .map(|(second, sums)| {
            for (j, (sum, n)) in sums.iter().enumerate() {
                if *n > 0 {
                    last[j] = sum / *n as f64;
                }
            }
            FeatureVector { second, values: last }
        })
        .collect()
}

/// Shift applied to the flight the swarm is currently flying.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DriftConfig {
    pub enabled: bool,
    /// Multiplier on the pre-failure precursor gains.
    pub ramp_gain: f64,
    /// Offset on precursor features, in units of their noise scale.
    pub offset_shift: f64,
    /// Share of the newest generated series that drift.
    pub recent_fraction: f64,
}

impl Default for DriftConfig {
    fn default() -> Self {
        DriftConfig { enabled: false, ramp_gain: 0.55, offset_shift: 1.5, recent_fraction: 0.2 }
    }
}

impl DriftConfig {
    pub fn on() -> Self {
        DriftConfig { enabled: true, ..Self::default() }
    }
}

/// Per-feature signal layout: baseline, noise scale, and gains on the
/// precursor ramp, the severity-scaled ramp, and the post-onset excess.
struct FeatureSignal {
    base: f64,
    scale: f64,
    ramp: f64,
    severity_ramp: f64,
    post: f64,
}

const fn sig(base: f64, scale: f64, ramp: f64, severity_ramp: f64, post: f64) -> FeatureSignal {
    FeatureSignal { base, scale, ramp, severity_ramp, post }
}

const SIGNALS: [FeatureSignal; FEATURE_COUNT] = [
    sig(15.0, 2.0, 0.0, 0.0, 0.0),
    sig(2.0, 1.5, 0.0, 0.0, 0.0),
    sig(0.0, 0.5, 0.3, 0.0, 0.5),
    sig(0.0, 0.2, 1.5, 2.0, 1.0),
    sig(0.0, 0.2, 1.2, 0.0, 0.0),
    sig(0.0, 0.2, 0.0, 3.0, 0.0),
    sig(0.0, 0.5, 0.8, 2.0, 0.0),
    sig(0.0, 0.5, 0.0, 0.0, 0.0),
    sig(-9.8, 0.4, 0.5, 2.5, 1.0),
    sig(0.2, 0.02, 0.0, 0.0, 0.0),
    sig(0.05, 0.02, 0.0, 0.0, 0.0),
    sig(-0.4, 0.02, 0.0, 0.0, 0.0),
    sig(98_000.0, 50.0, 0.0, 0.0, 0.0),
    sig(25.0, 1.0, 3.0, 1.0, 0.0),
    sig(0.0, 1.0, 1.0, 0.0, 2.0),
    sig(0.0, 0.8, 1.5, 2.0, 2.0),
    sig(0.0, 1.0, 1.2, 1.0, 1.5),
    sig(0.0, 2.0, 1.0, 0.5, 2.0),
];

/// Latent degradation process shared by the synthetic corpus and the
/// simulator's in-flight telemetry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureModel {
    /// Precursors start rising this many seconds before onset.
    pub horizon_s: f64,
    /// Uptime of a drone with degradation factor 1.
    pub uptime_ref_s: f64,
    /// Per-flight offset spread, in units of each feature's noise scale.
    pub flight_offset_sd: f64,
    /// Per-reading noise multiplier.
    pub noise: f64,
}

impl Default for FeatureModel {
    fn default() -> Self {
        FeatureModel { horizon_s: 120.0, uptime_ref_s: 150.0, flight_offset_sd: 0.3, noise: 1.0 }
    }
}

/// Ground truth of one flight, seen by the feature model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlightTruth {
    /// Onset time on the flight's clock; `None` for a failure-free flight.
    pub onset: Option<f64>,
    pub factor: f64,
}

impl FeatureModel {
    pub fn ramp(&self, t: f64, onset: Option<f64>) -> f64 {
        match onset {
            Some(ft) => (1.0 - (ft - t) / self.horizon_s).clamp(0.0, 1.0),
            None => 0.0,
        }
    }

    /// Per-flight offsets drawn once per flight.
    pub fn flight_offsets(&self, rng: &mut impl Rng) -> [f64; FEATURE_COUNT] {
        let mut o = [0.0; FEATURE_COUNT];
        for (j, s) in SIGNALS.iter().enumerate() {
            let z: f64 = StandardNormal.sample(rng);
            o[j] = z * self.flight_offset_sd * s.scale;
        }
        o
    }

    pub fn mean_value(&self, j: usize, t: f64, truth: FlightTruth, drift: &DriftConfig) -> f64 {
        let s = &SIGNALS[j];
        let ramp = self.ramp(t, truth.onset);
        let sev = truth.factor - 1.0;
        let post = matches!(truth.onset, Some(ft) if t >= ft) as u8 as f64;
        let (gain, shift) = if drift.enabled && s.ramp != 0.0 {
            (drift.ramp_gain, drift.offset_shift)
        } else {
            (1.0, 0.0)
        };
        s.base + s.scale * (shift + gain * s.ramp * ramp + s.severity_ramp * sev * ramp + s.post * sev * post)
    }

    pub fn reading(
        &self,
        j: usize,
        t: f64,
        truth: FlightTruth,
        drift: &DriftConfig,
        offsets: &[f64; FEATURE_COUNT],
        rng: &mut impl Rng,
    ) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        self.mean_value(j, t, truth, drift) + offsets[j] + z * self.noise * SIGNALS[j].scale
    }

    /// One already-merged vector at flight time `t`. Per-second averaging of
    /// several readings is folded into a reduced noise level.
    pub fn sample_vector(
        &self,
        second: i64,
        t: f64,
        truth: FlightTruth,
        drift: &DriftConfig,
        offsets: &[f64; FEATURE_COUNT],
        rng: &mut impl Rng,
    ) -> FeatureVector {
        let mut values = [0.0; FEATURE_COUNT];
        for (j, v) in values.iter_mut().enumerate() {
            let z: f64 = StandardNormal.sample(rng);
            *v = self.mean_value(j, t, truth, drift) + offsets[j] + z * self.noise * 0.5 * SIGNALS[j].scale;
        }
        FeatureVector { second, values }
    }
}

/// A raw single-flight log with its labels, as stored in flight CSV files.
#[derive(Clone, Debug, PartialEq)]
pub struct FlightLog {
    pub points: Vec<RawLogPoint>,
    pub label_ttf: f64,
    pub label_uptime: f64,
}

impl FlightLog {
    pub fn to_series(&self) -> LabeledSeries {
        LabeledSeries { vectors: range_merge(&self.points), label_ttf: self.label_ttf, label_uptime: self.label_uptime }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub model: FeatureModel,
    /// Onset time range within a flight (seconds).
    pub onset_range: (f64, f64),
    pub factor_range: (f64, f64),
    /// Sensor rates are drawn per feature from this range (Hz).
    pub sensor_rate_hz: (f64, f64),
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            model: FeatureModel::default(),
            onset_range: (60.0, 240.0),
            factor_range: (1.1, 1.6),
            sensor_rate_hz: (2.0, 8.0),
        }
    }
}

/// One raw flight with irregular per-sensor timestamps.
pub fn synthetic_flight(cfg: &SyntheticConfig, drift: &DriftConfig, rng: &mut impl Rng) -> FlightLog {
    let (olo, ohi) = cfg.onset_range;
    let onset = olo + (ohi - olo) * rng.random::<f64>();
    let (flo, fhi) = cfg.factor_range;
    let factor = flo + (fhi - flo) * rng.random::<f64>();
    let uptime = cfg.model.uptime_ref_s / factor;
    let duration = onset + uptime;
    let truth = FlightTruth { onset: Some(onset), factor };
    let offsets = cfg.model.flight_offsets(rng);
    let mut points = Vec::new();
    for j in 0..FEATURE_COUNT {
        let (rlo, rhi) = cfg.sensor_rate_hz;
        let rate = rlo + (rhi - rlo) * rng.random::<f64>();
        let period = 1.0 / rate;
        let mut t = period * rng.random::<f64>();
        while t < duration {
            let value = cfg.model.reading(j, t, truth, drift, &offsets, rng);
            points.push(RawLogPoint { timestamp: t, feature: j, value });
            t += period * (0.8 + 0.4 * rng.random::<f64>());
        }
    }
    points.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp).then(a.feature.cmp(&b.feature)));
    FlightLog { points, label_ttf: onset, label_uptime: uptime }
}

/// Raw synthetic flights, oldest first. With drift enabled, the newest
/// `recent_fraction` of flights carry the drifted signal.
pub fn generate_synthetic_flights(count: usize, rng_seed: u64, drift: &DriftConfig, cfg: &SyntheticConfig) -> Vec<FlightLog> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let drifted_from = if drift.enabled {
        count - ((count as f64 * drift.recent_fraction).round() as usize).min(count)
    } else {
        count
    };
    let off = DriftConfig { enabled: false, ..drift.clone() };
    (0..count)
        .map(|i| synthetic_flight(cfg, if i >= drifted_from { drift } else { &off }, &mut rng))
        .collect()
}

pub fn generate_synthetic_logs(count: usize, rng_seed: u64, drift: &DriftConfig) -> Vec<LabeledSeries> {
    generate_synthetic_logs_with(count, rng_seed, drift, &SyntheticConfig::default())
}

pub fn generate_synthetic_logs_with(
    count: usize,
    rng_seed: u64,
    drift: &DriftConfig,
    cfg: &SyntheticConfig,
) -> Vec<LabeledSeries> {
    generate_synthetic_flights(count, rng_seed, drift, cfg).iter().map(FlightLog::to_series).collect()
}

/// Writes `timestamp,feature,value` rows followed by a `label,<ttf>,<uptime>` row.
pub fn write_flight_csv(log: &FlightLog, mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "timestamp,feature,value")?;
    for p in &log.points {
        writeln!(out, "{},{},{}", p.timestamp, FEATURE_NAMES[p.feature], p.value)?;
    }
    writeln!(out, "label,{},{}", log.label_ttf, log.label_uptime)
}

pub fn read_flight_csv(input: impl Read) -> Result<FlightLog, LogError> {
    let mut points = Vec::new();
    let mut labels = None;
    for (i, line) in BufReader::new(input).lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        if i == 0 || line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        let err = |m: String| LogError::Parse { line: lineno, msg: m };
        if f.len() != 3 {
            return Err(err("expected three fields".into()));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| err(format!("bad number '{s}'")));
        if f[0] == "label" {
            labels = Some((num(f[1])?, num(f[2])?));
            continue;
        }
        let timestamp = num(f[0])?;
        if timestamp < 0.0 {
            return Err(err("negative timestamp".into()));
        }
        let feature = feature_index(f[1]).ok_or_else(|| err(format!("unknown feature '{}'", f[1])))?;
        points.push(RawLogPoint { timestamp, feature, value: num(f[2])? });
    }
    let (label_ttf, label_uptime) = labels.ok_or(LogError::Parse { line: 0, msg: "missing label row".into() })?;
    Ok(FlightLog { points, label_ttf, label_uptime })
}

pub fn write_series_jsonl(series: &[LabeledSeries], mut out: impl Write) -> Result<(), LogError> {
    for s in series {
        serde_json::to_writer(&mut out, s)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_series_jsonl(input: impl Read) -> Result<Vec<LabeledSeries>, LogError> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(input).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| LogError::Parse { line: i + 1, msg: e.to_string() })?);
    }
    Ok(out)
}
