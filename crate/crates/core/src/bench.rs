//! Seeded experiment harness over request corpora.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::composer::{compose, ComposeError, ComposerConfig, Mission, PretrainedFleet, SimulationTrace, Strategy};
use crate::failure::{DroneFailureState, InjectionConfig};
use crate::fed::{median, write_loss_csv, FedError};
use crate::net::{DeliveryRequest, SkywayNetwork};

/// Header of `metrics.csv`; bump the version when columns change.
pub const METRICS_HEADER: &str = "# skyway-metrics v1\nstrategy,seed,total_requests,successful_requests,on_time_requests,mean_delivery_time_s";
pub const TIMING_HEADER: &str = "strategy,seed,requests,mean_execution_time_s,median_execution_time_s";

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Compose(#[from] ComposeError),
    #[error(transparent)]
    Fed(#[from] FedError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    pub strategies: Vec<Strategy>,
    pub seeds: Vec<u64>,
    pub composer: ComposerConfig,
    pub injection: InjectionConfig,
    /// Worker threads; 0 uses all cores.
    pub workers: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            strategies: Strategy::ALL.to_vec(),
            seeds: vec![0],
            composer: ComposerConfig::default(),
            injection: InjectionConfig::default(),
            workers: 0,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self, net: &SkywayNetwork, requests: &[DeliveryRequest]) -> Result<(), BenchError> {
        if self.strategies.is_empty() {
            return Err(BenchError::Config("at least one strategy required".into()));
        }
        if self.seeds.is_empty() {
            return Err(BenchError::Config("at least one seed required".into()));
        }
        self.composer.validate()?;
        self.injection.validate().map_err(|e| BenchError::Config(e.to_string()))?;
        let fleet = self.composer.predictor.fleet_size;
        for r in requests {
            r.validate(self.composer.drone.max_payload).map_err(|e| BenchError::Config(e.to_string()))?;
            net.index_of(&r.source).map_err(|e| BenchError::Config(format!("request {}: {e}", r.id)))?;
            net.index_of(&r.destination).map_err(|e| BenchError::Config(format!("request {}: {e}", r.id)))?;
            if r.payloads_kg.len() > fleet {
                return Err(BenchError::Config(format!("request {} needs more drones than the fleet of {fleet}", r.id)));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricsRow {
    pub strategy: Strategy,
    pub seed: u64,
    pub total_requests: usize,
    pub successful_requests: usize,
    pub on_time_requests: usize,
    /// Over successful requests only; NaN when none succeeded.
    pub mean_delivery_time: f64,
    pub mean_execution_time: f64,
    pub median_execution_time: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RequestResult {
    pub seed: u64,
    pub trace: SimulationTrace,
    /// Wall-clock seconds for composition and simulation.
    pub execution_time: f64,
}

#[derive(Clone, Debug)]
pub struct BenchReport {
    pub rows: Vec<MetricsRow>,
    /// Ordered by seed, request id, strategy.
    pub results: Vec<RequestResult>,
    /// Ground truth per seed and request.
    pub truth: Vec<(u64, String, Vec<DroneFailureState>)>,
    pub loss: Vec<(String, crate::fed::TracePoint)>,
}

pub fn aggregate(strategy: Strategy, seed: u64, results: &[&RequestResult]) -> MetricsRow {
    let ok: Vec<f64> = results.iter().filter(|r| r.trace.successful()).map(|r| r.trace.delivery_time).collect();
    let mut exec: Vec<f64> = results.iter().map(|r| r.execution_time).collect();
    MetricsRow {
        strategy,
        seed,
        total_requests: results.len(),
        successful_requests: ok.len(),
        on_time_requests: results.iter().filter(|r| r.trace.on_time()).count(),
        mean_delivery_time: if ok.is_empty() { f64::NAN } else { ok.iter().sum::<f64>() / ok.len() as f64 },
        mean_execution_time: if exec.is_empty() { f64::NAN } else { exec.iter().sum::<f64>() / exec.len() as f64 },
        median_execution_time: median(&mut exec),
    }
}

pub fn run_bench(net: &SkywayNetwork, requests: &[DeliveryRequest], cfg: &BenchConfig) -> Result<BenchReport, BenchError> {
    cfg.validate(net, requests)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| BenchError::Config(e.to_string()))?;
    let mut fleets = Vec::new();
    let mut loss = Vec::new();
    for &seed in &cfg.seeds {
        let f = PretrainedFleet::train(seed, &cfg.composer.drone, &cfg.composer.predictor)?;
        loss.extend(f.loss.iter().map(|(n, p)| (format!("seed{seed}/{n}"), *p)));
        fleets.push(f);
    }
    let jobs: Vec<(usize, &DeliveryRequest)> =
        (0..cfg.seeds.len()).flat_map(|s| requests.iter().map(move |r| (s, r))).collect();
    type JobOut = (Vec<RequestResult>, (u64, String, Vec<DroneFailureState>));
    let outputs: Vec<Result<JobOut, BenchError>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(si, req)| {
                let seed = cfg.seeds[si];
                let m = Mission::new(net, req, &cfg.composer, Some(&fleets[si]), &cfg.injection, seed)?;
                let mut out = Vec::with_capacity(cfg.strategies.len());
                for &s in &cfg.strategies {
                    let start = Instant::now();
                    let trace = compose(&m, s);
                    out.push(RequestResult { seed, trace, execution_time: start.elapsed().as_secs_f64() });
                }
                Ok((out, (seed, req.id.clone(), m.truth.clone())))
            })
            .collect()
    });
    let mut results = Vec::new();
    let mut truth = Vec::new();
    for o in outputs {
        let (r, t) = o?;
        results.extend(r);
        truth.push(t);
    }
    results.sort_by(|a, b| {
        (a.seed, &a.trace.request_id, a.trace.strategy).cmp(&(b.seed, &b.trace.request_id, b.trace.strategy))
    });
    truth.sort_by(|a, b| (a.0, &a.1).cmp(&(b.0, &b.1)));
    let mut rows = Vec::new();
    for &s in &cfg.strategies {
        for &seed in &cfg.seeds {
            let sel: Vec<&RequestResult> =
                results.iter().filter(|r| r.seed == seed && r.trace.strategy == s).collect();
            rows.push(aggregate(s, seed, &sel));
        }
    }
    Ok(BenchReport { rows, results, truth, loss })
}

fn num(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else {
        format!("{v:.6}")
    }
}

pub fn write_metrics_csv(rows: &[MetricsRow], mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "{METRICS_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.strategy,
            r.seed,
            r.total_requests,
            r.successful_requests,
            r.on_time_requests,
            num(r.mean_delivery_time)
        )?;
    }
    Ok(())
}

pub fn write_timing_csv(rows: &[MetricsRow], mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "{TIMING_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{:.9},{:.9}",
            r.strategy, r.seed, r.total_requests, r.mean_execution_time, r.median_execution_time
        )?;
    }
    Ok(())
}

/// One line per leg, then a summary line per trace.
pub fn write_traces_jsonl(results: &[RequestResult], mut out: impl Write) -> Result<(), BenchError> {
    for r in results {
        let t = &r.trace;
        for (i, leg) in t.legs.iter().enumerate() {
            let line = serde_json::json!({
                "record": "leg",
                "seed": r.seed,
                "strategy": t.strategy,
                "request_id": t.request_id,
                "index": i,
                "leg": leg,
            });
            serde_json::to_writer(&mut out, &line)?;
            out.write_all(b"\n")?;
        }
        let summary = serde_json::json!({
            "record": "summary",
            "seed": r.seed,
            "strategy": t.strategy,
            "request_id": t.request_id,
            "drones": t.drones,
            "path": t.path,
            "legs": t.legs.len(),
            "delivery_time": t.delivery_time,
            "travel_time": t.travel_time,
            "node_time": t.node_time,
            "wait_time": t.wait_time,
            "distance_m": t.distance_m,
            "outcome": t.outcome,
            "successful": t.successful(),
            "flagged": t.flagged,
        });
        serde_json::to_writer(&mut out, &summary)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn write_truth_jsonl(truth: &[(u64, String, Vec<DroneFailureState>)], mut out: impl Write) -> Result<(), BenchError> {
    for (seed, id, states) in truth {
        serde_json::to_writer(&mut out, &serde_json::json!({ "seed": seed, "request_id": id, "drones": states }))?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Writes metrics.csv, timing.csv, traces.jsonl, truth.jsonl and loss.csv.
pub fn write_report(report: &BenchReport, dir: &std::path::Path) -> Result<(), BenchError> {
    use std::fs::File;
    use std::io::BufWriter;
    std::fs::create_dir_all(dir)?;
    write_metrics_csv(&report.rows, BufWriter::new(File::create(dir.join("metrics.csv"))?))?;
    write_timing_csv(&report.rows, BufWriter::new(File::create(dir.join("timing.csv"))?))?;
    let mut w = BufWriter::new(File::create(dir.join("traces.jsonl"))?);
    write_traces_jsonl(&report.results, &mut w)?;
    w.flush()?;
    let mut w = BufWriter::new(File::create(dir.join("truth.jsonl"))?);
    write_truth_jsonl(&report.truth, &mut w)?;
    w.flush()?;
    write_loss_csv(&report.loss, BufWriter::new(File::create(dir.join("loss.csv"))?))?;
    Ok(())
}
