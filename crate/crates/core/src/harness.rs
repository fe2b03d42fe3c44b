//! Snapshot sequences and the oracle-versus-model benchmark.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::time::{Duration, Instant};

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::connectivity::{greedy_top_k, label_top_k};
use crate::error::{Result, ShsError};
use crate::features::build_features;
use crate::graph::{Graph, NodeId};
use crate::model::{input_matrix, Model};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum Update {
    Delete { i: NodeId, j: NodeId },
    Insert { i: NodeId, j: NodeId },
}

impl Update {
    pub fn apply(&self, g: &mut Graph) -> Result<()> {
        let changed = match *self {
            Update::Delete { i, j } => g.remove_edge(i, j)?,
            Update::Insert { i, j } => g.add_edge(i, j)?,
        };
        if !changed {
            return Err(ShsError::config(format!(
                "update {self:?} does not change the graph"
            )));
        }
        Ok(())
    }
}

/// A base graph and a list of update batches; snapshot `t` is the base with
/// batches `0..=t` applied.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotSequence {
    pub base: Graph,
    pub batches: Vec<Vec<Update>>,
    pub snapshots: Vec<Graph>,
}

impl SnapshotSequence {
    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    /// Re-applies every batch to a copy of the base.
    pub fn replay(&self) -> Result<Vec<Graph>> {
        let mut g = self.base.clone();
        let mut out = Vec::with_capacity(self.batches.len());
        for batch in &self.batches {
            for u in batch {
                u.apply(&mut g)?;
            }
            out.push(g.clone());
        }
        Ok(out)
    }
}

/// `count` snapshots, each deleting one uniformly chosen remaining edge.
pub fn make_deletion_sequence(g: &Graph, count: usize, seed: u64) -> Result<SnapshotSequence> {
    if count > g.edge_count() {
        return Err(ShsError::config(format!(
            "cannot delete {count} edges from a graph with {}",
            g.edge_count()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges: Vec<(NodeId, NodeId)> = g.edges().collect();
    let mut current = g.clone();
    let mut batches = Vec::with_capacity(count);
    let mut snapshots = Vec::with_capacity(count);
    for _ in 0..count {
        let (i, j) = edges.swap_remove(rng.gen_range(0..edges.len()));
        let u = Update::Delete { i, j };
        u.apply(&mut current)?;
        batches.push(vec![u]);
        snapshots.push(current.clone());
    }
    Ok(SnapshotSequence {
        base: g.clone(),
        batches,
        snapshots,
    })
}

/// One snapshot that deletes `deletions` existing edges and inserts
/// `insertions` absent pairs at once.
pub fn make_batch_update(
    g: &Graph,
    deletions: usize,
    insertions: usize,
    seed: u64,
) -> Result<SnapshotSequence> {
    let n = g.node_count();
    let m = g.edge_count();
    let non_edges = n * n.saturating_sub(1) / 2 - m;
    if deletions > m || insertions > non_edges {
        return Err(ShsError::config(format!(
            "cannot delete {deletions} of {m} edges and insert {insertions} of {non_edges} absent pairs"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let edges: Vec<(NodeId, NodeId)> = g.edges().collect();
    let mut batch: Vec<Update> = sample(&mut rng, m, deletions)
        .into_iter()
        .map(|idx| {
            let (i, j) = edges[idx];
            Update::Delete { i, j }
        })
        .collect();

    if insertions > 0 {
        let picks: Vec<(NodeId, NodeId)> = if non_edges >= 2 * insertions {
            let mut seen = HashSet::new();
            let mut picks = Vec::with_capacity(insertions);
            while picks.len() < insertions {
                let i = rng.gen_range(0..n);
                let j = rng.gen_range(0..n);
                let pair = (i.min(j), i.max(j));
                if i != j && !g.has_edge(i, j) && seen.insert(pair) {
                    picks.push(pair);
                }
            }
            picks
        } else {
            let all: Vec<(NodeId, NodeId)> = (0..n)
                .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
                .filter(|&(i, j)| !g.has_edge(i, j))
                .collect();
            sample(&mut rng, all.len(), insertions)
                .into_iter()
                .map(|idx| all[idx])
                .collect()
        };
        batch.extend(picks.into_iter().map(|(i, j)| Update::Insert { i, j }));
    }

    let mut snapshot = g.clone();
    for u in &batch {
        u.apply(&mut snapshot)?;
    }
    Ok(SnapshotSequence {
        base: g.clone(),
        batches: vec![batch],
        snapshots: vec![snapshot],
    })
}

/// Which oracle run the model is timed against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Baseline {
    /// Greedy removal with full rescoring each round, O(k n (n + m)).
    #[default]
    Greedy,
    /// One-shot scoring of every node, O(n (n + m)).
    OneShot,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchOptions {
    pub k: usize,
    pub repetitions: usize,
    pub baseline: Baseline,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions {
            k: 50,
            repetitions: 3,
            baseline: Baseline::Greedy,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotRecord {
    pub snapshot: usize,
    /// Baseline recomputation time.
    pub oracle_s: f64,
    /// Model time including feature extraction.
    pub model_s: f64,
    pub speedup: f64,
    /// Fraction of nodes whose predicted label equals the oracle label.
    pub accuracy: f64,
    /// Feature extraction share of `model_s`.
    pub features_s: f64,
    /// Time of the one-shot ground-truth labeling.
    pub label_s: f64,
    pub oracle_spanners: Vec<NodeId>,
    pub predicted_spanners: Vec<NodeId>,
}

fn median_time<T>(reps: usize, mut f: impl FnMut() -> Result<T>) -> Result<(Duration, T)> {
    let mut times = Vec::with_capacity(reps.max(1));
    let mut last = None;
    for _ in 0..reps.max(1) {
        let start = Instant::now();
        let out = std::hint::black_box(f()?);
        times.push(start.elapsed());
        last = Some(out);
    }
    times.sort_unstable();
    let t = times[times.len() / 2].max(Duration::from_nanos(1));
    Ok((t, last.unwrap()))
}

/// Times the oracle and the model on one snapshot and scores the model's
/// top-k against the one-shot ground truth.
///
/// Timed sections run on a single rayon worker.
pub fn evaluate_snapshot(
    g: &Graph,
    model: &Model,
    opts: &BenchOptions,
    snapshot: usize,
) -> Result<SnapshotRecord> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(|e| ShsError::config(e.to_string()))?;
    pool.install(|| {
        let reps = opts.repetitions;
        let (label_t, truth) = median_time(reps, || label_top_k(g, opts.k))?;
        let oracle_t = match opts.baseline {
            Baseline::OneShot => label_t,
            Baseline::Greedy => median_time(reps, || greedy_top_k(g, opts.k))?.0,
        };
        let (features_t, _) = median_time(reps, || {
            let fm = build_features(g);
            Ok(input_matrix(&fm.normalize_with(&model.stats)))
        })?;
        let (model_t, predicted) = median_time(reps, || model.predict(g, opts.k))?;

        let n = g.node_count();
        let truth_labels = truth.labels(n);
        let pred_labels = predicted.labels(n);
        let agree = truth_labels
            .iter()
            .zip(&pred_labels)
            .filter(|(a, b)| a == b)
            .count();
        let oracle_s = oracle_t.as_secs_f64();
        let model_s = model_t.as_secs_f64();
        Ok(SnapshotRecord {
            snapshot,
            oracle_s,
            model_s,
            speedup: oracle_s / model_s,
            accuracy: agree as f64 / n.max(1) as f64,
            features_s: features_t.as_secs_f64(),
            label_s: label_t.as_secs_f64(),
            oracle_spanners: truth.spanners,
            predicted_spanners: predicted.spanners,
        })
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedupSummary {
    pub geometric_mean: f64,
    pub min: f64,
    pub max: f64,
}

/// Geometric mean, minimum and maximum of per-snapshot speedups.
pub fn speedup_stats(speedups: &[f64]) -> Result<SpeedupSummary> {
    if speedups.is_empty() {
        return Err(ShsError::config("no snapshots to summarize"));
    }
    if speedups.iter().any(|&s| s <= 0.0 || !s.is_finite()) {
        return Err(ShsError::config("speedups must be positive and finite"));
    }
    let min = speedups.iter().copied().fold(f64::INFINITY, f64::min);
    let max = speedups.iter().copied().fold(0.0, f64::max);
    let log_mean = speedups.iter().map(|s| s.ln()).sum::<f64>() / speedups.len() as f64;
    Ok(SpeedupSummary {
        geometric_mean: log_mean.exp().clamp(min, max),
        min,
        max,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub dataset: String,
    pub k: usize,
    pub baseline: Baseline,
    pub repetitions: usize,
    /// Pair counting used for connectivity; unordered counts are half.
    pub pair_convention: String,
    pub records: Vec<SnapshotRecord>,
    pub summary: SpeedupSummary,
    pub mean_accuracy: f64,
}

impl BenchReport {
    pub fn from_records(
        dataset: impl Into<String>,
        opts: &BenchOptions,
        records: Vec<SnapshotRecord>,
    ) -> Result<Self> {
        let speedups: Vec<f64> = records.iter().map(|r| r.speedup).collect();
        let summary = speedup_stats(&speedups)?;
        let mean_accuracy = records.iter().map(|r| r.accuracy).sum::<f64>() / records.len() as f64;
        Ok(BenchReport {
            dataset: dataset.into(),
            k: opts.k,
            baseline: opts.baseline,
            repetitions: opts.repetitions,
            pair_convention: "ordered".into(),
            records,
            summary,
            mean_accuracy,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("snapshot,oracle_s,model_s,speedup,accuracy,features_s,label_s\n");
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.snapshot, r.oracle_s, r.model_s, r.speedup, r.accuracy, r.features_s, r.label_s
            );
        }
        let _ = writeln!(
            out,
            "aggregate,,,{},{},,",
            self.summary.geometric_mean, self.mean_accuracy
        );
        out
    }

    /// Summary table with geometric mean, min and max speedup.
    pub fn summary_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<16} {:>10} {:>10} {:>10} {:>10}",
            "dataset", "geo-mean", "min", "max", "accuracy"
        );
        let _ = writeln!(
            out,
            "{:<16} {:>10.1} {:>10.1} {:>10.1} {:>9.2}%",
            self.dataset,
            self.summary.geometric_mean,
            self.summary.min,
            self.summary.max,
            100.0 * self.mean_accuracy
        );
        out
    }
}

/// Evaluates every snapshot of `seq` in order.
pub fn run_bench(
    dataset: &str,
    seq: &SnapshotSequence,
    model: &Model,
    opts: &BenchOptions,
) -> Result<BenchReport> {
    let records = seq
        .snapshots
        .iter()
        .enumerate()
        .map(|(t, g)| evaluate_snapshot(g, model, opts, t + 1))
        .collect::<Result<Vec<_>>>()?;
    BenchReport::from_records(dataset, opts, records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::generate_pa;
    use approx::assert_relative_eq;

    #[test]
    fn deletion_sequence_shrinks_by_one() {
        let g = generate_pa(100, 1).unwrap();
        let seq = make_deletion_sequence(&g, 10, 2).unwrap();
        assert_eq!(seq.len(), 10);
        for (t, s) in seq.snapshots.iter().enumerate() {
            assert_eq!(s.edge_count(), 99 - (t + 1));
        }
        assert_eq!(seq.replay().unwrap(), seq.snapshots);

        assert!(make_deletion_sequence(&g, 0, 2).unwrap().is_empty());
        let all = make_deletion_sequence(&g, 99, 2).unwrap();
        assert_eq!(all.snapshots.last().unwrap().edge_count(), 0);
        assert!(matches!(
            make_deletion_sequence(&g, 100, 2),
            Err(ShsError::InvalidConfig(_))
        ));
    }

    #[test]
    fn batch_update_conserves_edge_count() {
        let g = generate_pa(62, 8).unwrap();
        let seq = make_batch_update(&g, 5, 5, 3).unwrap();
        assert_eq!(seq.len(), 1);
        assert_eq!(seq.snapshots[0].edge_count(), g.edge_count());
        assert_eq!(seq.batches[0].len(), 10);
        assert_eq!(seq.replay().unwrap(), seq.snapshots);

        let same = make_batch_update(&g, 0, 0, 3).unwrap();
        assert_eq!(same.snapshots[0], g);
        assert!(make_batch_update(&g, g.edge_count() + 1, 0, 3).is_err());

        // Nearly complete graph forces the enumeration path.
        let mut k5 =
            Graph::from_edges(5, (0..5).flat_map(|i| ((i + 1)..5).map(move |j| (i, j)))).unwrap();
        k5.remove_edge(0, 1).unwrap();
        k5.remove_edge(2, 3).unwrap();
        let seq = make_batch_update(&k5, 1, 2, 0).unwrap();
        assert_eq!(seq.snapshots[0].edge_count(), 9);
        assert!(seq.snapshots[0].has_edge(0, 1) && seq.snapshots[0].has_edge(2, 3));
        assert!(make_batch_update(&k5, 0, 3, 0).is_err());
    }

    #[test]
    fn speedup_examples() {
        let s = speedup_stats(&[2.0, 8.0]).unwrap();
        assert_relative_eq!(s.geometric_mean, 4.0, max_relative = 1e-12);
        assert_eq!((s.min, s.max), (2.0, 8.0));
        let s = speedup_stats(&[3.7]).unwrap();
        assert_eq!((s.geometric_mean, s.min, s.max), (3.7, 3.7, 3.7));
        assert!(speedup_stats(&[]).is_err());
    }
}
