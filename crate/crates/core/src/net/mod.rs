//! Skyway network: rooftop charging nodes joined by flight segments.
//!
//! Nodes are kept sorted by id, so a node's index order is also its id order.
//! Algorithms work on indices; the public surface speaks in string ids.

mod generate;
pub(crate) mod ksp;
mod requests;

use std::collections::{HashMap, VecDeque};
use std::io::{BufRead, BufReader, Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use generate::{generate_network, NetworkGenConfig};
pub use ksp::shortest_paths_topk;
pub use requests::{
    generate_requests, read_requests, write_requests, DeliveryRequest, PayloadLimits, TimeWindow,
    WindowPolicy,
};

#[derive(Debug, Error)]
pub enum NetError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid network: {0}")]
    Invalid(String),
    #[error("network is disconnected: node {0} cannot be reached")]
    Disconnected(String),
    #[error("unknown node id {0}")]
    UnknownNode(String),
    #[error("request generation: {0}")]
    Requests(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkywayNode {
    pub id: String,
    /// Planar position in meters, when known.
    pub position: Option<(f64, f64)>,
    /// Recharging pads, always at least one.
    pub pads: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub from: String,
    pub to: String,
    pub dist: f64,
}

/// How pad counts are assigned to nodes that do not carry one.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PadPolicy {
    Fixed(u32),
    Uniform { min: u32, max: u32, seed: u64 },
}

impl Default for PadPolicy {
    fn default() -> Self {
        PadPolicy::Uniform { min: 1, max: 4, seed: 0 }
    }
}

/// Undirected skyway graph. Immutable once built.
#[derive(Clone, Debug)]
pub struct SkywayNetwork {
    nodes: Vec<SkywayNode>,
    segments: Vec<Segment>,
    adjacency: Vec<Vec<(usize, f64)>>,
    index: HashMap<String, usize>,
}

impl SkywayNetwork {
    /// Builds and validates a network. Nodes are re-sorted by id.
    pub fn new(mut nodes: Vec<SkywayNode>, segments: Vec<Segment>) -> Result<Self, NetError> {
        if nodes.is_empty() {
            return Err(NetError::Invalid("no nodes".into()));
        }
        nodes.sort_by(|a, b| a.id.cmp(&b.id));
        let mut index = HashMap::with_capacity(nodes.len());
        for (i, n) in nodes.iter().enumerate() {
            if n.pads == 0 {
                return Err(NetError::Invalid(format!("node {} has zero pads", n.id)));
            }
            if index.insert(n.id.clone(), i).is_some() {
                return Err(NetError::Invalid(format!("duplicate node id {}", n.id)));
            }
        }
        let mut adjacency = vec![Vec::new(); nodes.len()];
        let mut seen = std::collections::HashSet::new();
        for s in &segments {
            let a = *index.get(&s.from).ok_or_else(|| NetError::UnknownNode(s.from.clone()))?;
            let b = *index.get(&s.to).ok_or_else(|| NetError::UnknownNode(s.to.clone()))?;
            if a == b {
                return Err(NetError::Invalid(format!("self-loop at {}", s.from)));
            }
            if !(s.dist.is_finite() && s.dist > 0.0) {
                return Err(NetError::Invalid(format!(
                    "segment {}-{} has non-positive distance {}",
                    s.from, s.to, s.dist
                )));
            }
            if !seen.insert((a.min(b), a.max(b))) {
                return Err(NetError::Invalid(format!("duplicate segment {}-{}", s.from, s.to)));
            }
            adjacency[a].push((b, s.dist));
            adjacency[b].push((a, s.dist));
        }
        for list in &mut adjacency {
            list.sort_by(|x, y| x.0.cmp(&y.0));
        }
        let net = SkywayNetwork { nodes, segments, adjacency, index };
        net.check_connected()?;
        Ok(net)
    }

    fn check_connected(&self) -> Result<(), NetError> {
        let mut seen = vec![false; self.nodes.len()];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(u) = queue.pop_front() {
            for &(v, _) in &self.adjacency[u] {
                if !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        match seen.iter().position(|s| !s) {
            Some(i) => Err(NetError::Disconnected(self.nodes[i].id.clone())),
            None => Ok(()),
        }
    }

    pub fn nodes(&self) -> &[SkywayNode] {
        &self.nodes
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn index_of(&self, id: &str) -> Result<usize, NetError> {
        self.index.get(id).copied().ok_or_else(|| NetError::UnknownNode(id.to_string()))
    }

    pub fn node(&self, idx: usize) -> &SkywayNode {
        &self.nodes[idx]
    }

    pub fn id(&self, idx: usize) -> &str {
        &self.nodes[idx].id
    }

    /// Neighbors of `idx` with segment lengths, sorted by neighbor index.
    pub fn neighbors(&self, idx: usize) -> &[(usize, f64)] {
        &self.adjacency[idx]
    }

    pub fn distance_between(&self, a: usize, b: usize) -> Option<f64> {
        self.adjacency[a].iter().find(|(n, _)| *n == b).map(|(_, d)| *d)
    }

    /// Single-source shortest distances (meters) over the whole network.
    pub fn distances_from(&self, src: usize) -> Vec<f64> {
        self.distances_avoiding(src, &vec![false; self.nodes.len()])
    }

    /// Like [`Self::distances_from`], never entering a `blocked` node.
    pub fn distances_avoiding(&self, src: usize, blocked: &[bool]) -> Vec<f64> {
        use std::cmp::Reverse;
        use std::collections::BinaryHeap;
        let mut dist = vec![f64::INFINITY; self.nodes.len()];
        let mut heap = BinaryHeap::new();
        dist[src] = 0.0;
        heap.push(Reverse((OrdF64(0.0), src)));
        while let Some(Reverse((OrdF64(d), u))) = heap.pop() {
            if d > dist[u] {
                continue;
            }
            for &(v, w) in &self.adjacency[u] {
                if blocked[v] {
                    continue;
                }
                let nd = d + w;
                if nd < dist[v] {
                    dist[v] = nd;
                    heap.push(Reverse((OrdF64(nd), v)));
                }
            }
        }
        dist
    }

    /// Length of a node-index path, summed front to back.
    pub fn path_length(&self, path: &[usize]) -> Option<f64> {
        let mut total = 0.0;
        for w in path.windows(2) {
            total += self.distance_between(w[0], w[1])?;
        }
        Some(total)
    }
}

/// Total order wrapper for finite distances.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub(crate) struct OrdF64(pub f64);

impl Eq for OrdF64 {}

impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

fn split_row(line: &str) -> Vec<&str> {
    line.split(',').map(str::trim).collect()
}

fn parse_f64(field: &str, line: usize, what: &str) -> Result<f64, NetError> {
    field.parse::<f64>().map_err(|_| NetError::Parse {
        line,
        msg: format!("bad {what} '{field}'"),
    })
}

/// Reads the optional node file `id,x_m,y_m,pads`. Empty fields are allowed
/// for coordinates (both or neither) and pads.
fn read_node_rows(reader: impl Read) -> Result<Vec<(String, Option<(f64, f64)>, Option<u32>)>, NetError> {
    let mut rows = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        if i == 0 || line.trim().is_empty() {
            continue;
        }
        let f = split_row(&line);
        if f.len() < 3 || f.len() > 4 {
            return Err(NetError::Parse { line: lineno, msg: "expected id,x_m,y_m[,pads]".into() });
        }
        if f[0].is_empty() {
            return Err(NetError::Parse { line: lineno, msg: "empty node id".into() });
        }
        let pos = match (f[1].is_empty(), f[2].is_empty()) {
            (true, true) => None,
            (false, false) => Some((parse_f64(f[1], lineno, "x_m")?, parse_f64(f[2], lineno, "y_m")?)),
            _ => return Err(NetError::Parse { line: lineno, msg: "partial coordinates".into() }),
        };
        let pads = match f.get(3) {
            Some(p) if !p.is_empty() => {
                let v: u32 = p.parse().map_err(|_| NetError::Parse {
                    line: lineno,
                    msg: format!("bad pads '{p}'"),
                })?;
                if v == 0 {
                    return Err(NetError::Parse { line: lineno, msg: "pads must be >= 1".into() });
                }
                Some(v)
            }
            _ => None,
        };
        rows.push((f[0].to_string(), pos, pads));
    }
    Ok(rows)
}

/// Loads a network from an edge list (`from,to,dist_m` or `from,to`) and an
/// optional node file. Rows without a distance take the Euclidean distance of
/// their endpoints' coordinates. Pads missing from the node file come from
/// `pads`, drawn in node-id order.
pub fn load_network(
    edges: impl Read,
    node_file: Option<impl Read>,
    pads: PadPolicy,
) -> Result<SkywayNetwork, NetError> {
    let node_rows = match node_file {
        Some(r) => read_node_rows(r)?,
        None => Vec::new(),
    };
    let mut positions: HashMap<String, Option<(f64, f64)>> = HashMap::new();
    let mut explicit_pads: HashMap<String, Option<u32>> = HashMap::new();
    for (id, pos, p) in node_rows {
        positions.insert(id.clone(), pos);
        explicit_pads.insert(id, p);
    }

    let mut segments = Vec::new();
    let mut edge_nodes: Vec<String> = Vec::new();
    for (i, line) in BufReader::new(edges).lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let f = split_row(&line);
        if i == 0 {
            if f.first() != Some(&"from") || f.get(1) != Some(&"to") {
                return Err(NetError::Parse { line: lineno, msg: "expected header from,to[,dist_m]".into() });
            }
            continue;
        }
        if f.len() < 2 || f.len() > 3 {
            return Err(NetError::Parse { line: lineno, msg: "expected from,to[,dist_m]".into() });
        }
        if f[0].is_empty() || f[1].is_empty() {
            return Err(NetError::Parse { line: lineno, msg: "empty node id".into() });
        }
        if f[0] == f[1] {
            return Err(NetError::Parse { line: lineno, msg: format!("self-loop at {}", f[0]) });
        }
        let dist = match f.get(2) {
            Some(d) if !d.is_empty() => {
                let d = parse_f64(d, lineno, "distance")?;
                if !(d.is_finite() && d > 0.0) {
                    return Err(NetError::Parse { line: lineno, msg: format!("non-positive distance {d}") });
                }
                d
            }
            _ => {
                let lookup = |id: &str| positions.get(id).copied().flatten();
                match (lookup(f[0]), lookup(f[1])) {
                    (Some(a), Some(b)) => {
                        let d = ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt();
                        if d <= 0.0 {
                            return Err(NetError::Parse { line: lineno, msg: "coincident endpoints".into() });
                        }
                        d
                    }
                    _ => {
                        return Err(NetError::Parse {
                            line: lineno,
                            msg: "no distance and no coordinates for endpoints".into(),
                        })
                    }
                }
            }
        };
        edge_nodes.push(f[0].to_string());
        edge_nodes.push(f[1].to_string());
        segments.push(Segment { from: f[0].to_string(), to: f[1].to_string(), dist });
    }

    let mut ids: Vec<String> = positions.keys().cloned().chain(edge_nodes).collect();
    ids.sort();
    ids.dedup();
    if !positions.is_empty() {
        if let Some(missing) = ids.iter().find(|id| !positions.contains_key(*id)) {
            return Err(NetError::UnknownNode(missing.clone()));
        }
    }

    let mut rng = match pads {
        PadPolicy::Uniform { seed, .. } => Some(ChaCha8Rng::seed_from_u64(seed)),
        PadPolicy::Fixed(_) => None,
    };
    let mut nodes = Vec::with_capacity(ids.len());
    for id in ids {
        let drawn = match (pads, rng.as_mut()) {
            (PadPolicy::Fixed(p), _) => p,
            (PadPolicy::Uniform { min, max, .. }, Some(r)) => r.random_range(min..=max),
            _ => unreachable!(),
        };
        let p = explicit_pads.get(&id).copied().flatten().unwrap_or(drawn);
        let position = positions.get(&id).copied().flatten();
        nodes.push(SkywayNode { id, position, pads: p });
    }
    SkywayNetwork::new(nodes, segments)
}

/// Writes the edge list with explicit distances.
pub fn write_edges(net: &SkywayNetwork, mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "from,to,dist_m")?;
    for s in &net.segments {
        writeln!(out, "{},{},{}", s.from, s.to, s.dist)?;
    }
    Ok(())
}

pub fn write_nodes(net: &SkywayNetwork, mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "id,x_m,y_m,pads")?;
    for n in &net.nodes {
        match n.position {
            Some((x, y)) => writeln!(out, "{},{},{},{}", n.id, x, y, n.pads)?,
            None => writeln!(out, "{},,,{}", n.id, n.pads)?,
        }
    }
    Ok(())
}
