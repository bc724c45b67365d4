//! Loopless k-shortest paths (Yen) with a deterministic tie-break: equal
//! lengths are ordered by their node-id sequence.

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap, HashSet};

use super::{NetError, SkywayNetwork};

#[derive(Clone, Debug, PartialEq)]
struct Candidate {
    cost: f64,
    path: Vec<usize>,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    // Reversed so the max-heap pops the cheapest, lexicographically first path.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.path.cmp(&self.path))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Dijkstra restricted by banned nodes/edges. Among equal-length paths the
/// lexicographically smallest index sequence wins.
fn restricted_shortest(
    net: &SkywayNetwork,
    src: usize,
    dst: usize,
    banned_nodes: &[bool],
    banned_edges: &HashSet<(usize, usize)>,
) -> Option<Vec<usize>> {
    let n = net.len();
    let mut dist = vec![f64::INFINITY; n];
    let mut path: Vec<Option<Vec<usize>>> = vec![None; n];
    let mut done = vec![false; n];
    dist[src] = 0.0;
    path[src] = Some(vec![src]);
    loop {
        // Small graphs: a linear scan keeps the tie rule simple and exact.
        let mut best: Option<usize> = None;
        for v in 0..n {
            if done[v] || !dist[v].is_finite() {
                continue;
            }
            best = match best {
                None => Some(v),
                Some(b) => match dist[v].total_cmp(&dist[b]) {
                    Ordering::Less => Some(v),
                    Ordering::Equal if path[v] < path[b] => Some(v),
                    _ => Some(b),
                },
            };
        }
        let u = best?;
        if u == dst {
            return path[u].take();
        }
        done[u] = true;
        for &(v, w) in net.neighbors(u) {
            if done[v] || banned_nodes[v] || banned_edges.contains(&(u, v)) {
                continue;
            }
            let nd = dist[u] + w;
            let better = match nd.total_cmp(&dist[v]) {
                Ordering::Less => true,
                Ordering::Equal => {
                    let mut cand = path[u].clone().unwrap();
                    cand.push(v);
                    Some(&cand) < path[v].as_ref()
                }
                Ordering::Greater => false,
            };
            if better {
                dist[v] = nd;
                let mut p = path[u].clone().unwrap();
                p.push(v);
                path[v] = Some(p);
            }
        }
    }
}

/// Up to `k` simple paths from `src` to `dst`, shortest first. Returns index
/// paths; map through [`SkywayNetwork::id`] for ids.
pub fn shortest_paths_topk(
    net: &SkywayNetwork,
    src: &str,
    dst: &str,
    k: usize,
) -> Result<Vec<Vec<usize>>, NetError> {
    let s = net.index_of(src)?;
    let t = net.index_of(dst)?;
    Ok(topk_indices(net, s, t, k))
}

pub(crate) fn topk_indices(net: &SkywayNetwork, s: usize, t: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return Vec::new();
    }
    if s == t {
        return vec![vec![s]];
    }
    let n = net.len();
    let no_nodes = vec![false; n];
    let Some(first) = restricted_shortest(net, s, t, &no_nodes, &HashSet::new()) else {
        return Vec::new();
    };
    let mut accepted: Vec<Vec<usize>> = vec![first];
    let mut heap: BinaryHeap<Candidate> = BinaryHeap::new();
    let mut queued: BTreeSet<Vec<usize>> = BTreeSet::new();

    while accepted.len() < k {
        let last = accepted.last().unwrap().clone();
        for i in 0..last.len() - 1 {
            let spur = last[i];
            let root = &last[..=i];
            let mut banned_edges = HashSet::new();
            for p in &accepted {
                if p.len() > i + 1 && &p[..=i] == root {
                    banned_edges.insert((p[i], p[i + 1]));
                    banned_edges.insert((p[i + 1], p[i]));
                }
            }
            let mut banned_nodes = vec![false; n];
            for &r in &root[..i] {
                banned_nodes[r] = true;
            }
            if let Some(spur_path) = restricted_shortest(net, spur, t, &banned_nodes, &banned_edges) {
                let mut full = root[..i].to_vec();
                full.extend(spur_path);
                if !queued.contains(&full) && !accepted.contains(&full) {
                    let cost = net.path_length(&full).expect("path follows segments");
                    queued.insert(full.clone());
                    heap.push(Candidate { cost, path: full });
                }
            }
        }
        match heap.pop() {
            Some(c) => {
                queued.remove(&c.path);
                accepted.push(c.path);
            }
            None => break,
        }
    }
    accepted
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{load_network, PadPolicy};

    fn net(edges: &str) -> SkywayNetwork {
        load_network(edges.as_bytes(), None::<&[u8]>, PadPolicy::Fixed(1)).unwrap()
    }

    fn ids(net: &SkywayNetwork, paths: &[Vec<usize>]) -> Vec<Vec<String>> {
        paths.iter().map(|p| p.iter().map(|&i| net.id(i).to_string()).collect()).collect()
    }

    #[test]
    fn triangle_two_paths() {
        let g = net("from,to,dist_m\nA,B,100\nB,C,120\nA,C,150\n");
        let p = shortest_paths_topk(&g, "A", "B", 2).unwrap();
        assert_eq!(ids(&g, &p), vec![vec!["A", "B"], vec!["A", "C", "B"]]);
    }

    #[test]
    fn same_node_is_zero_length_path() {
        let g = net("from,to,dist_m\nA,B,100\n");
        let p = shortest_paths_topk(&g, "A", "A", 5).unwrap();
        assert_eq!(ids(&g, &p), vec![vec!["A"]]);
    }

    #[test]
    fn line_graph_has_unique_path() {
        let g = net("from,to,dist_m\nA,B,1\nB,C,1\nC,D,1\n");
        let p = shortest_paths_topk(&g, "A", "D", 1).unwrap();
        assert_eq!(ids(&g, &p), vec![vec!["A", "B", "C", "D"]]);
        let all = shortest_paths_topk(&g, "A", "D", 10).unwrap();
        assert_eq!(all.len(), 1);
    }

    #[test]
    fn ties_follow_id_sequence() {
        // Square: A-B-D and A-C-D have equal length.
        let g = net("from,to,dist_m\nA,C,1\nC,D,1\nA,B,1\nB,D,1\n");
        let p = shortest_paths_topk(&g, "A", "D", 2).unwrap();
        assert_eq!(ids(&g, &p), vec![vec!["A", "B", "D"], vec!["A", "C", "D"]]);
    }
}
