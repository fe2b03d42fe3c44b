//! Independent reference implementations used as test oracles.
//!
//! Nothing here calls the library's connectivity, feature or model code;
//! only `Graph` adjacency accessors are shared.

#![allow(dead_code, clippy::needless_range_loop, clippy::too_many_arguments)]

use gnn_shs::graph::Graph;
use gnn_shs::model::ModelParams;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random G(n, p) built with its own RNG loop.
pub fn random_graph(n: usize, p: f64, seed: u64) -> Graph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = Graph::new(n);
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.gen_bool(p) {
                g.add_edge(i, j).unwrap();
            }
        }
    }
    g
}

/// `reach[i][j]` by a plain BFS from every node, skipping `removed` nodes.
pub fn reachability(g: &Graph, removed: &[bool]) -> Vec<Vec<bool>> {
    let n = g.node_count();
    (0..n)
        .map(|s| {
            let mut seen = vec![false; n];
            if removed[s] {
                return seen;
            }
            let mut frontier = vec![s];
            seen[s] = true;
            while let Some(u) = frontier.pop() {
                for &v in g.neighbors(u) {
                    if !removed[v] && !seen[v] {
                        seen[v] = true;
                        frontier.push(v);
                    }
                }
            }
            seen
        })
        .collect()
}

/// Ordered-pair double sum of `u(i, j)` over surviving nodes.
pub fn brute_total(g: &Graph, removed: &[bool]) -> u64 {
    let reach = reachability(g, removed);
    let n = g.node_count();
    let mut total = 0;
    for i in 0..n {
        for j in 0..n {
            if i != j && !removed[i] && !removed[j] && reach[i][j] {
                total += 1;
            }
        }
    }
    total
}

pub fn brute_score(g: &Graph, removed: &[bool], j: usize) -> u64 {
    let mut without = removed.to_vec();
    without[j] = true;
    brute_total(g, removed) - brute_total(g, &without)
}

/// Greedy removal with a full brute-force rescoring each round.
pub fn naive_greedy(g: &Graph, k: usize) -> Vec<usize> {
    let n = g.node_count();
    let mut removed = vec![false; n];
    let mut picked = Vec::new();
    for _ in 0..k {
        let mut best: Option<(u64, usize)> = None;
        for j in 0..n {
            if removed[j] {
                continue;
            }
            let s = brute_score(g, &removed, j);
            if best.map_or(true, |(bs, _)| s > bs) {
                best = Some((s, j));
            }
        }
        let (_, j) = best.unwrap();
        removed[j] = true;
        picked.push(j);
    }
    picked
}

/// Straight-line forward pass written from the layer equations, using
/// nested vectors and no shared helpers. Returns spanner-class probabilities
/// and the pre-activations of every layer.
pub fn reference_forward(
    g: &Graph,
    x: &[Vec<f64>],
    p: &ModelParams,
) -> (Vec<f64>, Vec<Vec<Vec<f64>>>) {
    let n = g.node_count();
    let mut h: Vec<Vec<f64>> = x.to_vec();
    let mut pre = Vec::new();
    for w in &p.layers {
        let d_in = h[0].len();
        let d_out = w.cols;
        let mut z_layer = Vec::with_capacity(n);
        let mut next = Vec::with_capacity(n);
        for i in 0..n {
            let ns = g.neighbors(i);
            let mut agg = vec![0.0; d_in];
            for &j in ns {
                for c in 0..d_in {
                    agg[c] += h[j][c] / ns.len() as f64;
                }
            }
            let mut cat = h[i].clone();
            cat.extend(agg);
            let mut z = vec![0.0; d_out];
            for o in 0..d_out {
                for r in 0..cat.len() {
                    z[o] += cat[r] * w.data[r * d_out + o];
                }
            }
            next.push(z.iter().map(|v| if *v > 0.0 { *v } else { 0.0 }).collect());
            z_layer.push(z);
        }
        pre.push(z_layer);
        h = next;
    }
    let probs = h
        .iter()
        .map(|z| {
            let mut l = [0.0; 2];
            for c in 0..2 {
                for r in 0..z.len() {
                    l[c] += z[r] * p.head.data[r * 2 + c];
                }
            }
            1.0 / (1.0 + (l[0] - l[1]).exp())
        })
        .collect();
    (probs, pre)
}

/// Cross-entropy plus `wd / 2 * ||W||^2`, evaluated with [`reference_forward`].
pub fn reference_objective(
    g: &Graph,
    x: &[Vec<f64>],
    p: &ModelParams,
    labels: &[u8],
    mask: &[usize],
    wd: f64,
) -> f64 {
    let (probs, _) = reference_forward(g, x, p);
    let mut loss = 0.0;
    for &i in mask {
        let q = probs[i].clamp(1e-12, 1.0 - 1e-12);
        loss -= if labels[i] == 1 {
            q.ln()
        } else {
            (1.0 - q).ln()
        };
    }
    let sq: f64 = p.flat().iter().map(|v| v * v).sum();
    loss / mask.len() as f64 + 0.5 * wd * sq
}

/// Mutable access to parameter `idx` in flattened order.
pub fn param_mut(p: &mut ModelParams, mut idx: usize) -> &mut f64 {
    for m in p.matrices_mut() {
        if idx < m.data.len() {
            return &mut m.data[idx];
        }
        idx -= m.data.len();
    }
    panic!("parameter index out of range")
}

/// Central finite-difference check of `analytic` against the reference
/// objective. Returns the largest relative error, with denominators floored
/// at `1e-6`.
pub fn max_fd_rel_error(
    g: &Graph,
    x: &[Vec<f64>],
    p: &ModelParams,
    labels: &[u8],
    mask: &[usize],
    wd: f64,
    analytic: &[f64],
    step: f64,
) -> f64 {
    let mut worst: f64 = 0.0;
    for (idx, &a) in analytic.iter().enumerate() {
        let mut plus = p.clone();
        *param_mut(&mut plus, idx) += step;
        let mut minus = p.clone();
        *param_mut(&mut minus, idx) -= step;
        let numeric = (reference_objective(g, x, &plus, labels, mask, wd)
            - reference_objective(g, x, &minus, labels, mask, wd))
            / (2.0 * step);
        let denom = a.abs().max(numeric.abs()).max(1e-6);
        worst = worst.max((a - numeric).abs() / denom);
    }
    worst
}

/// Smallest nonzero |pre-activation| across all layers. Configurations close
/// to the ReLU kink are not differentiable at finite-difference resolution;
/// exact zeros come from all-zero inputs and stay put under perturbation.
pub fn min_abs_preactivation(g: &Graph, x: &[Vec<f64>], p: &ModelParams) -> f64 {
    let (_, pre) = reference_forward(g, x, p);
    pre.iter()
        .flatten()
        .flatten()
        .filter(|v| **v != 0.0)
        .fold(f64::INFINITY, |m, v| m.min(v.abs()))
}

/// Hop distances from `source`; `usize::MAX` when unreachable.
pub fn hop_distances(g: &Graph, source: usize) -> Vec<usize> {
    let mut dist = vec![usize::MAX; g.node_count()];
    dist[source] = 0;
    let mut queue = std::collections::VecDeque::from([source]);
    while let Some(u) = queue.pop_front() {
        for &w in g.neighbors(u) {
            if dist[w] == usize::MAX {
                dist[w] = dist[u] + 1;
                queue.push_back(w);
            }
        }
    }
    dist
}

/// Edge toggles `(a, b)` that a two-layer model over ego features cannot see
/// from `v`: both endpoints at least 3 hops away, and no common neighbor
/// within 2 hops (that neighbor's ego network would gain or lose a tie).
pub fn invisible_toggles(g: &Graph, v: usize) -> Vec<(usize, usize)> {
    let dist = hop_distances(g, v);
    let n = g.node_count();
    let mut out = Vec::new();
    for a in 0..n {
        if dist[a] < 3 {
            continue;
        }
        for b in (a + 1)..n {
            if dist[b] < 3 {
                continue;
            }
            let shared_near = g
                .neighbors(a)
                .iter()
                .any(|&c| dist[c] <= 2 && g.has_edge(c, b));
            if !shared_near {
                out.push((a, b));
            }
        }
    }
    out
}

/// Applies a toggle: deletes the edge if present, inserts it otherwise.
pub fn toggle(g: &mut Graph, a: usize, b: usize) {
    if g.has_edge(a, b) {
        g.remove_edge(a, b).unwrap();
    } else {
        g.add_edge(a, b).unwrap();
    }
}
