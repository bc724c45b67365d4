use std::io::{BufRead, BufReader, Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{NetError, SkywayNetwork};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeWindow {
    pub st: f64,
    pub et: f64,
}

/// A consumer request: packages to carry from `source` to `destination`,
/// delivered together inside `window`. Times are on the mission clock, which
/// reads zero when the swarm leaves the source.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeliveryRequest {
    pub id: String,
    pub source: String,
    pub destination: String,
    pub payloads_kg: Vec<f64>,
    pub window: TimeWindow,
}

impl DeliveryRequest {
    pub fn validate(&self, max_payload_kg: f64) -> Result<(), NetError> {
        let bad = |m: String| Err(NetError::Requests(format!("request {}: {m}", self.id)));
        if self.source == self.destination {
            return bad("source equals destination".into());
        }
        if self.payloads_kg.is_empty() {
            return bad("no packages".into());
        }
        if let Some(w) = self.payloads_kg.iter().find(|w| !(**w > 0.0 && **w <= max_payload_kg)) {
            return bad(format!("package weight {w} outside (0, {max_payload_kg}]"));
        }
        if !(self.window.st < self.window.et) {
            return bad("window start not before end".into());
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PayloadLimits {
    pub max_packages: usize,
    pub max_weight_kg: f64,
}

impl Default for PayloadLimits {
    fn default() -> Self {
        PayloadLimits { max_packages: 5, max_weight_kg: 2.5 }
    }
}

/// Delivery windows scale with the shortest source-destination distance:
/// `[start_factor, end_factor] x pace x distance`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WindowPolicy {
    /// Expected seconds per meter of shortest-path distance, stops included.
    pub pace_s_per_m: f64,
    pub start_factor: f64,
    pub end_factor: f64,
}

impl Default for WindowPolicy {
    fn default() -> Self {
        WindowPolicy { pace_s_per_m: 0.06, start_factor: 0.5, end_factor: 1.15 }
    }
}

/// Draws `count` requests with distinct random endpoints. Endpoint pairs may
/// repeat across requests; the network must offer at least one pair.
pub fn generate_requests(
    net: &SkywayNetwork,
    count: usize,
    rng_seed: u64,
    limits: PayloadLimits,
    window: WindowPolicy,
) -> Result<Vec<DeliveryRequest>, NetError> {
    if count == 0 {
        return Err(NetError::Requests("count must be at least 1".into()));
    }
    if net.len() < 2 {
        return Err(NetError::Requests("network has no distinct source/destination pair".into()));
    }
    if limits.max_packages == 0 || !(limits.max_weight_kg > 0.0) {
        return Err(NetError::Requests("payload limits must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let width = format!("{}", count - 1).len().max(4);
    let mut out = Vec::with_capacity(count);
    let mut dist_cache: std::collections::HashMap<usize, Vec<f64>> = Default::default();
    for i in 0..count {
        let s = rng.random_range(0..net.len());
        let mut d = rng.random_range(0..net.len() - 1);
        if d >= s {
            d += 1;
        }
        let n_pkg = rng.random_range(1..=limits.max_packages);
        let payloads_kg = (0..n_pkg)
            .map(|_| {
                // Uniform on (0, max], truncated to grams; never zero.
                let w: f64 = rng.random_range(0.0..limits.max_weight_kg);
                let g = ((limits.max_weight_kg - w) * 1000.0).floor().max(1.0) / 1000.0;
                g.min(limits.max_weight_kg)
            })
            .collect();
        let dist = dist_cache.entry(s).or_insert_with(|| net.distances_from(s))[d];
        let nominal = dist * window.pace_s_per_m;
        let st = (nominal * window.start_factor).round();
        let et = (nominal * window.end_factor).round().max(st + 1.0);
        out.push(DeliveryRequest {
            id: format!("r{:0width$}", i, width = width),
            source: net.id(s).to_string(),
            destination: net.id(d).to_string(),
            payloads_kg,
            window: TimeWindow { st, et },
        });
    }
    Ok(out)
}

pub fn write_requests(reqs: &[DeliveryRequest], mut out: impl Write) -> Result<(), NetError> {
    for r in reqs {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_requests(input: impl Read) -> Result<Vec<DeliveryRequest>, NetError> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(input).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let r: DeliveryRequest = serde_json::from_str(&line).map_err(|e| NetError::Parse {
            line: i + 1,
            msg: e.to_string(),
        })?;
        out.push(r);
    }
    Ok(out)
}
