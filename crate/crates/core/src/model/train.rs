//! Node splits, metrics and the full-batch training loop.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamConfig, AdamState};
use super::forward::{backward_from, bce_loss, forward, input_matrix, Prediction};
use super::params::{ModelDims, ModelParams};
use super::{Model, TrainingMeta, FORMAT_VERSION};
use crate::error::{Result, ShsError};
use crate::features::FeatureMatrix;
use crate::graph::{Graph, NodeId};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    /// Train, validation and test fractions.
    pub split: [f64; 3],
    pub seed: u64,
    pub hidden: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 200,
            learning_rate: 0.01,
            weight_decay: 5e-4,
            split: [0.6, 0.2, 0.2],
            seed: 0,
            hidden: 32,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.split.iter().any(|&f| f.is_nan() || f <= 0.0) {
            return Err(ShsError::config(format!(
                "split fractions must be positive, got {:?}",
                self.split
            )));
        }
        let total: f64 = self.split.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(ShsError::config(format!(
                "split fractions sum to {total}, expected 1"
            )));
        }
        if self.learning_rate.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater)
            || self.weight_decay.is_nan()
            || self.weight_decay < 0.0
        {
            return Err(ShsError::config(
                "learning rate must be positive and weight decay nonnegative",
            ));
        }
        if self.hidden == 0 {
            return Err(ShsError::config("hidden width must be positive"));
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
        }
    }

    pub fn dims(&self) -> ModelDims {
        ModelDims::with_hidden(self.hidden)
    }
}

/// Disjoint node sets, each sorted by id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<NodeId>,
    pub val: Vec<NodeId>,
    pub test: Vec<NodeId>,
}

/// Per-class allocation of `count` nodes to (train, val, test).
fn allocate(count: usize, fracs: &[f64; 3], at_least_one: bool) -> [usize; 3] {
    let mut train = (count as f64 * fracs[0]).round() as usize;
    let mut val = (count as f64 * fracs[1]).round() as usize;
    train = train.min(count);
    val = val.min(count - train);
    let mut test = count - train - val;
    if at_least_one && count >= 3 {
        for _ in 0..2 {
            if val == 0 {
                val += 1;
                if train > 1 {
                    train -= 1
                } else {
                    test -= 1
                }
            }
            if test == 0 {
                test += 1;
                if train > 1 {
                    train -= 1
                } else {
                    val -= 1
                }
            }
        }
    }
    [train, val, test]
}

/// Seeded split stratified by label, so each part receives its share of
/// spanners (at least one each once there are three or more).
pub fn split_nodes(n: usize, cfg: &TrainConfig, labels: &[u8]) -> Result<Split> {
    cfg.validate()?;
    if labels.len() != n {
        return Err(ShsError::Shape(format!(
            "{} labels for {n} nodes",
            labels.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut parts: [Vec<NodeId>; 3] = Default::default();
    let (mut pos, mut neg): (Vec<NodeId>, Vec<NodeId>) = (0..n).partition(|&i| labels[i] == 1);
    if pos.is_empty() || neg.is_empty() {
        return Err(ShsError::config(format!(
            "need both classes to split: {} spanners among {n} nodes",
            pos.len()
        )));
    }
    for (class, at_least_one) in [(&mut pos, true), (&mut neg, false)] {
        class.shuffle(&mut rng);
        let sizes = allocate(class.len(), &cfg.split, at_least_one);
        let mut offset = 0;
        for (part, size) in parts.iter_mut().zip(sizes) {
            part.extend_from_slice(&class[offset..offset + size]);
            offset += size;
        }
    }
    if parts.iter().any(Vec::is_empty) {
        return Err(ShsError::config(format!(
            "{n} nodes are too few for a {:?} split",
            cfg.split
        )));
    }
    for p in parts.iter_mut() {
        p.sort_unstable();
    }
    let [train, val, test] = parts;
    Ok(Split { train, val, test })
}

/// Classification quality on a node subset; precision/recall/F1 refer to
/// the spanner class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub normal_accuracy: f64,
}

pub fn metrics(predicted: &[u8], labels: &[u8], nodes: &[NodeId]) -> Metrics {
    let (mut tp, mut fp, mut tn, mut fneg) = (0usize, 0usize, 0usize, 0usize);
    for &i in nodes {
        match (predicted[i], labels[i]) {
            (1, 1) => tp += 1,
            (1, _) => fp += 1,
            (_, 1) => fneg += 1,
            _ => tn += 1,
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fneg);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Metrics {
        accuracy: ratio(tp + tn, nodes.len()),
        precision,
        recall,
        f1,
        normal_accuracy: ratio(tn, tn + fp),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub train_accuracy: f64,
    pub val_accuracy: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub epochs: Vec<EpochRecord>,
}

impl TrainLog {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,loss,train_accuracy,val_accuracy,val_loss\n");
        for r in &self.epochs {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.epoch, r.loss, r.train_accuracy, r.val_accuracy, r.val_loss
            ));
        }
        out
    }
}

/// Result of [`train`].
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Model,
    pub log: TrainLog,
    pub split: Split,
    pub test: Metrics,
}

struct Candidate {
    val_accuracy: f64,
    val_loss: f64,
    epoch: usize,
}

impl Candidate {
    fn beats(&self, other: &Candidate) -> bool {
        self.val_accuracy > other.val_accuracy
            || (self.val_accuracy == other.val_accuracy && self.val_loss < other.val_loss)
    }
}

/// Full-batch training with Adam. Keeps the weights with the best
/// validation accuracy (lower validation loss breaks ties).
///
/// Log entry `e` describes the weights after `e - 1` updates, i.e. the
/// ones the `e`-th gradient step starts from.
pub fn train(
    g: &Graph,
    fm: &FeatureMatrix,
    labels: &[u8],
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let n = g.node_count();
    if fm.len() != n {
        return Err(ShsError::Shape(format!(
            "{} feature rows for {n} nodes",
            fm.len()
        )));
    }
    let split = split_nodes(n, cfg, labels)?;
    let stats = fm.stats.clone();
    let inputs = input_matrix(&fm.normalize_with(&stats));
    let mut params = ModelParams::init(cfg.dims(), cfg.seed.wrapping_add(1))?;
    let mut adam = AdamState::new(&params)?;
    let adam_cfg = cfg.adam();
    let mut log = TrainLog::default();

    let evaluate = |pred: &Prediction| -> Result<(f64, f64)> {
        let acc = metrics(&pred.predicted_labels(), labels, &split.val).accuracy;
        Ok((acc, bce_loss(pred, labels, &split.val)?))
    };

    let pass = forward(g, &inputs, &params)?;
    let (val_accuracy, val_loss) = evaluate(&pass.prediction)?;
    let mut best = Candidate {
        val_accuracy,
        val_loss,
        epoch: 0,
    };
    let mut best_params = params.clone();
    let mut pass = Some(pass);

    for epoch in 1..=cfg.epochs {
        let current = match pass.take() {
            Some(p) => p,
            None => forward(g, &inputs, &params).map_err(|e| match e {
                ShsError::NonFiniteLayer { .. } => ShsError::Diverged {
                    epoch,
                    loss: f64::NAN,
                },
                other => other,
            })?,
        };
        let (loss, grads) =
            backward_from(g, &current, &params, labels, &split.train, cfg.weight_decay)?;
        if !loss.is_finite() || !grads.flat().iter().all(|v| v.is_finite()) {
            return Err(ShsError::Diverged { epoch, loss });
        }
        let (val_accuracy, val_loss) = evaluate(&current.prediction)?;
        let train_accuracy =
            metrics(&current.prediction.predicted_labels(), labels, &split.train).accuracy;
        log.epochs.push(EpochRecord {
            epoch,
            loss,
            train_accuracy,
            val_accuracy,
            val_loss,
        });
        let cand = Candidate {
            val_accuracy,
            val_loss,
            epoch: epoch - 1,
        };
        if cand.beats(&best) {
            best = cand;
            best_params = params.clone();
        }
        adam_step(&mut params, &grads, &mut adam, epoch as u64, &adam_cfg)?;
    }

    if cfg.epochs > 0 {
        let last = forward(g, &inputs, &params).map_err(|_| ShsError::Diverged {
            epoch: cfg.epochs,
            loss: f64::NAN,
        })?;
        let (val_accuracy, val_loss) = evaluate(&last.prediction)?;
        let cand = Candidate {
            val_accuracy,
            val_loss,
            epoch: cfg.epochs,
        };
        if cand.beats(&best) {
            best = cand;
            best_params = params.clone();
        }
    }

    let final_pass = forward(g, &inputs, &best_params)?;
    let test = metrics(
        &final_pass.prediction.predicted_labels(),
        labels,
        &split.test,
    );
    let model = Model {
        format_version: FORMAT_VERSION,
        dims: best_params.dims,
        params: best_params,
        stats,
        seed: cfg.seed,
        meta: TrainingMeta {
            epochs: cfg.epochs,
            best_epoch: best.epoch,
            learning_rate: cfg.learning_rate,
            weight_decay: cfg.weight_decay,
            split: cfg.split,
            train_nodes: split.train.len(),
            val_accuracy: best.val_accuracy,
            test_accuracy: test.accuracy,
            test_f1: test.f1,
        },
    };
    Ok(TrainOutcome {
        model,
        log,
        split,
        test,
    })
}
