//! Pairwise connectivity, per-node connectivity scores and top-k spanner
//! selection.
//!
//! `P(G)` counts ordered pairs `(i, j)`, `i != j`, that lie in the same
//! component, so a component of size `s` contributes `s * (s - 1)`. Under the
//! unordered-pair convention every value halves; rankings are unchanged.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, ShsError};
use crate::graph::{Graph, NodeId};

/// Drop in total pairwise connectivity when `node` is removed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConnectivityScore {
    pub node: NodeId,
    pub score: u64,
}

/// Selected spanners, in selection order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShsResult {
    pub spanners: Vec<NodeId>,
    /// `P` of the graph after isolating every spanner.
    pub residual_connectivity: u64,
}

impl ShsResult {
    /// 0/1 label per node, 1 for spanners.
    pub fn labels(&self, n: usize) -> Vec<u8> {
        let mut labels = vec![0u8; n];
        for &s in &self.spanners {
            labels[s] = 1;
        }
        labels
    }
}

/// `u(i, j)`: 1 when `i` and `j` are connected.
pub fn pairwise_connectivity(g: &Graph, i: NodeId, j: NodeId) -> Result<u8> {
    let n = g.node_count();
    if i == j || i >= n || j >= n {
        return Err(ShsError::InvalidPair(i, j));
    }
    let reach = g.bfs_distances(i);
    Ok(u8::from(reach[j].is_some()))
}

/// `P(G)` from component sizes.
pub fn total_pairwise_connectivity(g: &Graph) -> u64 {
    g.connected_components()
        .component_sizes
        .iter()
        .map(|&s| pairs(s))
        .sum()
}

#[inline]
fn pairs(size: usize) -> u64 {
    let s = size as u64;
    s * s.saturating_sub(1)
}

/// Reusable traversal state for computing `P` of a graph with some nodes
/// masked out, without materializing the subgraph.
pub(crate) struct MaskedCounter {
    visited: Vec<bool>,
    stack: Vec<NodeId>,
}

impl MaskedCounter {
    pub(crate) fn new(n: usize) -> Self {
        MaskedCounter {
            visited: vec![false; n],
            stack: Vec::new(),
        }
    }

    /// `P` of `g` with the nodes flagged in `removed` (plus `extra`) isolated.
    pub(crate) fn total(&mut self, g: &Graph, removed: &[bool], extra: Option<NodeId>) -> u64 {
        let n = g.node_count();
        self.visited.clear();
        self.visited.extend_from_slice(removed);
        if let Some(x) = extra {
            self.visited[x] = true;
        }
        let mut total = 0u64;
        for start in 0..n {
            if self.visited[start] {
                continue;
            }
            self.visited[start] = true;
            self.stack.push(start);
            let mut size = 0usize;
            while let Some(u) = self.stack.pop() {
                size += 1;
                for &v in g.neighbors(u) {
                    if !self.visited[v] {
                        self.visited[v] = true;
                        self.stack.push(v);
                    }
                }
            }
            total += pairs(size);
        }
        total
    }
}

/// `c(j) = P(G) - P(G \ {j})`.
pub fn connectivity_score(g: &Graph, j: NodeId) -> Result<ConnectivityScore> {
    let n = g.node_count();
    if j >= n {
        return Err(ShsError::NodeOutOfRange { node: j, n });
    }
    let mut counter = MaskedCounter::new(n);
    let removed = vec![false; n];
    let full = counter.total(g, &removed, None);
    let without = counter.total(g, &removed, Some(j));
    Ok(ConnectivityScore {
        node: j,
        score: full - without,
    })
}

/// Scores of the nodes not flagged in `removed`, on the residual graph.
/// Removed nodes score 0. Evaluated in parallel on the current rayon pool.
fn residual_scores(g: &Graph, removed: &[bool]) -> Vec<u64> {
    let n = g.node_count();
    let base = MaskedCounter::new(n).total(g, removed, None);
    (0..n)
        .into_par_iter()
        .map_init(
            || MaskedCounter::new(n),
            |counter, j| {
                if removed[j] {
                    0
                } else {
                    base - counter.total(g, removed, Some(j))
                }
            },
        )
        .collect()
}

/// Connectivity score of every node, ordered by node id.
pub fn score_all_nodes(g: &Graph) -> Vec<ConnectivityScore> {
    let removed = vec![false; g.node_count()];
    residual_scores(g, &removed)
        .into_iter()
        .enumerate()
        .map(|(node, score)| ConnectivityScore { node, score })
        .collect()
}

fn check_k(g: &Graph, k: usize) -> Result<()> {
    if k == 0 || k > g.node_count() {
        return Err(ShsError::InvalidK {
            k,
            n: g.node_count(),
        });
    }
    Ok(())
}

/// Ranks `(score, node)` pairs by score descending, then node id ascending.
pub fn rank_by_score(scores: &[ConnectivityScore]) -> Vec<NodeId> {
    let mut order: Vec<&ConnectivityScore> = scores.iter().collect();
    order.sort_by(|a, b| b.score.cmp(&a.score).then(a.node.cmp(&b.node)));
    order.into_iter().map(|s| s.node).collect()
}

/// Ground-truth labeling: the `k` nodes with the highest one-shot scores.
pub fn label_top_k(g: &Graph, k: usize) -> Result<ShsResult> {
    check_k(g, k)?;
    let scores = score_all_nodes(g);
    let spanners: Vec<NodeId> = rank_by_score(&scores).into_iter().take(k).collect();
    let residual_connectivity = total_pairwise_connectivity(&g.induced_subgraph_without(&spanners));
    Ok(ShsResult {
        spanners,
        residual_connectivity,
    })
}

/// Greedy heuristic: repeatedly remove the node with the highest score on
/// the residual graph. O(k n (n + m)).
pub fn greedy_top_k(g: &Graph, k: usize) -> Result<ShsResult> {
    check_k(g, k)?;
    let n = g.node_count();
    let mut removed = vec![false; n];
    let mut spanners = Vec::with_capacity(k);
    for _ in 0..k {
        let scores = residual_scores(g, &removed);
        // Highest score, lowest id among live nodes.
        let best = (0..n)
            .filter(|&j| !removed[j])
            .max_by(|&a, &b| scores[a].cmp(&scores[b]).then(b.cmp(&a)))
            .expect("k <= n leaves a live node");
        removed[best] = true;
        spanners.push(best);
    }
    let residual_connectivity = MaskedCounter::new(n).total(g, &removed, None);
    Ok(ShsResult {
        spanners,
        residual_connectivity,
    })
}

/// Writes the labels file: one `<node-id> <0|1>` line per node.
pub fn labels_to_string(labels: &[u8]) -> String {
    let mut out = String::with_capacity(labels.len() * 6);
    for (i, l) in labels.iter().enumerate() {
        let _ = writeln!(out, "{i} {l}");
    }
    out
}

pub fn parse_labels(text: &str, path: &Path) -> Result<Vec<u8>> {
    let mut labels = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |msg: String| ShsError::Parse {
            path: path.to_path_buf(),
            line: idx + 1,
            msg,
        };
        let mut fields = line.split_whitespace();
        let id: usize = fields
            .next()
            .unwrap()
            .parse()
            .map_err(|_| err(format!("bad node id in {line:?}")))?;
        let label = match fields.next() {
            Some("0") => 0u8,
            Some("1") => 1u8,
            _ => return Err(err(format!("expected label 0 or 1 in {line:?}"))),
        };
        if fields.next().is_some() {
            return Err(err(format!("trailing fields in {line:?}")));
        }
        if id != labels.len() {
            return Err(err(format!(
                "expected node {} but found {id}",
                labels.len()
            )));
        }
        labels.push(label);
    }
    Ok(labels)
}

pub fn read_labels(path: &Path) -> Result<Vec<u8>> {
    let text = std::fs::read_to_string(path).map_err(|e| ShsError::io(path, e))?;
    parse_labels(&text, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(n: usize) -> Graph {
        Graph::from_edges(n, (1..n).map(|i| (i - 1, i))).unwrap()
    }

    fn triangle() -> Graph {
        Graph::from_edges(3, [(0, 1), (1, 2), (0, 2)]).unwrap()
    }

    /// Two triangles {0,1,2} and {4,5,6} joined through cut vertex 3.
    fn barbell() -> Graph {
        Graph::from_edges(
            7,
            [
                (0, 1),
                (1, 2),
                (0, 2),
                (2, 3),
                (3, 4),
                (4, 5),
                (5, 6),
                (4, 6),
            ],
        )
        .unwrap()
    }

    #[test]
    fn pairwise_examples() {
        assert_eq!(pairwise_connectivity(&triangle(), 0, 2).unwrap(), 1);
        let g = Graph::from_edges(4, [(0, 1), (2, 3)]).unwrap();
        assert_eq!(pairwise_connectivity(&g, 0, 3).unwrap(), 0);
        assert!(matches!(
            pairwise_connectivity(&g, 0, 0),
            Err(ShsError::InvalidPair(0, 0))
        ));
    }

    #[test]
    fn total_examples() {
        assert_eq!(total_pairwise_connectivity(&triangle()), 6);
        let g = Graph::from_edges(5, [(0, 1), (2, 3), (3, 4)]).unwrap();
        assert_eq!(total_pairwise_connectivity(&g), 8);
        assert_eq!(total_pairwise_connectivity(&Graph::new(17)), 0);
        assert_eq!(total_pairwise_connectivity(&Graph::new(0)), 0);
    }

    #[test]
    fn score_examples() {
        let p = path(3);
        assert_eq!(connectivity_score(&p, 1).unwrap().score, 6);
        assert_eq!(connectivity_score(&p, 0).unwrap().score, 4);
        // P = 7*6 = 42; removing 3 leaves two triangles: 2 * 3*2 = 12.
        assert_eq!(connectivity_score(&barbell(), 3).unwrap().score, 30);
        assert!(matches!(
            connectivity_score(&p, 3),
            Err(ShsError::NodeOutOfRange { node: 3, n: 3 })
        ));
    }

    #[test]
    fn score_all_examples() {
        let s: Vec<u64> = score_all_nodes(&path(3)).iter().map(|c| c.score).collect();
        assert_eq!(s, vec![4, 6, 4]);
        assert!(score_all_nodes(&Graph::new(6)).iter().all(|c| c.score == 0));
    }

    #[test]
    fn label_top_k_examples() {
        assert_eq!(label_top_k(&path(3), 1).unwrap().spanners, vec![1]);
        assert_eq!(label_top_k(&path(3), 2).unwrap().spanners, vec![1, 0]);
        assert!(matches!(
            label_top_k(&path(3), 4),
            Err(ShsError::InvalidK { .. })
        ));
        assert!(matches!(
            label_top_k(&path(3), 0),
            Err(ShsError::InvalidK { .. })
        ));
    }

    #[test]
    fn greedy_examples() {
        assert_eq!(greedy_top_k(&barbell(), 1).unwrap().spanners, vec![3]);
        let r = greedy_top_k(&path(5), 2).unwrap();
        assert_eq!(r.spanners, vec![2, 0]);
        assert_eq!(r.residual_connectivity, 2);
        let r = greedy_top_k(&path(5), 5).unwrap();
        let mut sorted = r.spanners.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, vec![0, 1, 2, 3, 4]);
        assert_eq!(r.residual_connectivity, 0);
    }

    #[test]
    fn labels_round_trip_and_errors() {
        let labels = vec![0, 1, 0, 1];
        let text = labels_to_string(&labels);
        assert_eq!(text, "0 0\n1 1\n2 0\n3 1\n");
        assert_eq!(parse_labels(&text, Path::new("l")).unwrap(), labels);
        assert!(parse_labels("0 0\n1 2\n", Path::new("l")).is_err());
        assert!(parse_labels("0 0\n2 1\n", Path::new("l")).is_err());
    }
}
