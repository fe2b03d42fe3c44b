//! Ego-network node features: effective size, efficiency and degree.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::graph::{Graph, NodeId};

pub const FEATURE_COUNT: usize = 3;
pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = ["effective_size", "efficiency", "degree"];

/// Number of edges among the neighbors of `i`.
fn ego_edges(g: &Graph, i: NodeId) -> usize {
    let ns = g.neighbors(i);
    ns.iter()
        .map(|&a| {
            // Sorted-list intersection of N(a) with the part of N(i) above a.
            let mut count = 0;
            let na = g.neighbors(a);
            let (mut x, mut y) = (0, 0);
            while x < na.len() && y < ns.len() {
                match na[x].cmp(&ns[y]) {
                    std::cmp::Ordering::Less => x += 1,
                    std::cmp::Ordering::Greater => y += 1,
                    std::cmp::Ordering::Equal => {
                        if na[x] > a {
                            count += 1;
                        }
                        x += 1;
                        y += 1;
                    }
                }
            }
            count
        })
        .sum()
}

/// Burt's effective size for a binary graph: `d - 2 t / d`, 0 when isolated.
pub fn effective_size(g: &Graph, i: NodeId) -> f64 {
    let d = g.degree(i);
    if d == 0 {
        return 0.0;
    }
    let t = ego_edges(g, i);
    d as f64 - 2.0 * t as f64 / d as f64
}

/// Effective size over degree, 0 when isolated.
pub fn efficiency(g: &Graph, i: NodeId) -> f64 {
    let d = g.degree(i);
    if d == 0 {
        return 0.0;
    }
    effective_size(g, i) / d as f64
}

/// Per-column min/max captured from a training graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureStats {
    pub min: [f64; FEATURE_COUNT],
    pub max: [f64; FEATURE_COUNT],
}

/// Raw per-node features, one row of `[effective_size, efficiency, degree]`
/// per node, together with the column statistics of this graph.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub rows: Vec<[f64; FEATURE_COUNT]>,
    pub stats: FeatureStats,
}

impl FeatureMatrix {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Min-max scales each column into `[0, 1]` using `stats`, clamping values
    /// outside the recorded range. Constant columns map to 0.
    pub fn normalize_with(&self, stats: &FeatureStats) -> Vec<[f64; FEATURE_COUNT]> {
        self.rows
            .iter()
            .map(|row| {
                let mut out = [0.0; FEATURE_COUNT];
                for c in 0..FEATURE_COUNT {
                    let span = stats.max[c] - stats.min[c];
                    out[c] = if span > 0.0 {
                        ((row[c] - stats.min[c]) / span).clamp(0.0, 1.0)
                    } else {
                        0.0
                    };
                }
                out
            })
            .collect()
    }

    /// Normalizes with this matrix's own statistics.
    pub fn normalize(&self) -> Vec<[f64; FEATURE_COUNT]> {
        self.normalize_with(&self.stats)
    }

    /// CSV dump: `node,effective_size,efficiency,degree`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("node,effective_size,efficiency,degree\n");
        for (i, r) in self.rows.iter().enumerate() {
            let _ = writeln!(out, "{i},{},{},{}", r[0], r[1], r[2]);
        }
        out
    }
}

fn column_stats(rows: &[[f64; FEATURE_COUNT]]) -> FeatureStats {
    let mut min = [0.0; FEATURE_COUNT];
    let mut max = [0.0; FEATURE_COUNT];
    if let Some(first) = rows.first() {
        min = *first;
        max = *first;
    }
    for r in rows {
        for c in 0..FEATURE_COUNT {
            min[c] = min[c].min(r[c]);
            max[c] = max[c].max(r[c]);
        }
    }
    FeatureStats { min, max }
}

pub fn build_features(g: &Graph) -> FeatureMatrix {
    let rows: Vec<[f64; FEATURE_COUNT]> = (0..g.node_count())
        .map(|i| {
            let d = g.degree(i);
            if d == 0 {
                return [0.0; FEATURE_COUNT];
            }
            let es = effective_size(g, i);
            [es, es / d as f64, d as f64]
        })
        .collect();
    let stats = column_stats(&rows);
    FeatureMatrix { rows, stats }
}
