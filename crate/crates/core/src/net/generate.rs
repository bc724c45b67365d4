use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{NetError, PadPolicy, Segment, SkywayNetwork, SkywayNode};

/// Synthetic city-style skyway generator.
///
/// Nodes are grown outward from an origin: every new node is placed within
/// `max_edge_m` of an existing one and joined to it, so the graph is connected
/// and no segment exceeds `max_edge_m`. Each node is then also joined to its
/// `extra_neighbors` nearest nodes within range.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetworkGenConfig {
    pub nodes: usize,
    pub seed: u64,
    pub min_edge_m: f64,
    pub max_edge_m: f64,
    /// Minimum spacing between any two nodes.
    pub min_separation_m: f64,
    pub extra_neighbors: usize,
    pub pads: PadPolicy,
}

impl Default for NetworkGenConfig {
    fn default() -> Self {
        NetworkGenConfig {
            nodes: 50,
            seed: 0,
            min_edge_m: 1_500.0,
            max_edge_m: 4_500.0,
            min_separation_m: 1_200.0,
            extra_neighbors: 2,
            pads: PadPolicy::default(),
        }
    }
}

pub fn generate_network(cfg: &NetworkGenConfig) -> Result<SkywayNetwork, NetError> {
    if cfg.nodes < 2 {
        return Err(NetError::Invalid("need at least two nodes".into()));
    }
    if !(cfg.min_edge_m > 0.0 && cfg.max_edge_m >= cfg.min_edge_m) {
        return Err(NetError::Invalid("edge length bounds".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut pts: Vec<(f64, f64)> = vec![(0.0, 0.0)];
    let mut links: Vec<(usize, usize)> = Vec::new();
    let mut attempts = 0usize;
    while pts.len() < cfg.nodes {
        attempts += 1;
        if attempts > cfg.nodes * 10_000 {
            return Err(NetError::Invalid("could not place nodes; relax separation".into()));
        }
        let anchor = rng.random_range(0..pts.len());
        let theta = rng.random_range(0.0..std::f64::consts::TAU);
        let r = rng.random_range(cfg.min_edge_m..=cfg.max_edge_m);
        let p = (pts[anchor].0 + r * theta.cos(), pts[anchor].1 + r * theta.sin());
        let crowded = pts
            .iter()
            .any(|q| ((p.0 - q.0).powi(2) + (p.1 - q.1).powi(2)).sqrt() < cfg.min_separation_m);
        if crowded {
            continue;
        }
        links.push((anchor, pts.len()));
        pts.push(p);
    }

    let dist = |a: usize, b: usize| ((pts[a].0 - pts[b].0).powi(2) + (pts[a].1 - pts[b].1).powi(2)).sqrt();
    let mut pairs: std::collections::BTreeSet<(usize, usize)> =
        links.iter().map(|&(a, b)| (a.min(b), a.max(b))).collect();
    for a in 0..pts.len() {
        let mut near: Vec<(f64, usize)> = (0..pts.len())
            .filter(|&b| b != a)
            .map(|b| (dist(a, b), b))
            .filter(|(d, _)| *d <= cfg.max_edge_m)
            .collect();
        near.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
        for &(_, b) in near.iter().take(cfg.extra_neighbors) {
            pairs.insert((a.min(b), a.max(b)));
        }
    }

    let width = format!("{}", cfg.nodes - 1).len().max(3);
    let name = |i: usize| format!("n{:0width$}", i, width = width);
    let mut pad_rng = ChaCha8Rng::seed_from_u64(match cfg.pads {
        PadPolicy::Uniform { seed, .. } => seed ^ cfg.seed.rotate_left(17),
        PadPolicy::Fixed(_) => 0,
    });
    let nodes = (0..pts.len())
        .map(|i| {
            let pads = match cfg.pads {
                PadPolicy::Fixed(p) => p,
                PadPolicy::Uniform { min, max, .. } => pad_rng.random_range(min..=max),
            };
            // Round to centimeters so files round-trip cleanly.
            let x = (pts[i].0 * 100.0).round() / 100.0;
            let y = (pts[i].1 * 100.0).round() / 100.0;
            SkywayNode { id: name(i), position: Some((x, y)), pads }
        })
        .collect::<Vec<_>>();
    let segments = pairs
        .into_iter()
        .map(|(a, b)| {
            let (pa, pb) = (nodes[a].position.unwrap(), nodes[b].position.unwrap());
            let d = ((pa.0 - pb.0).powi(2) + (pa.1 - pb.1).powi(2)).sqrt();
            Segment { from: name(a), to: name(b), dist: d }
        })
        .collect();
    SkywayNetwork::new(nodes, segments)
}
