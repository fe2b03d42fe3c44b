//! Two-layer mean-aggregation GNN that classifies nodes as spanner or normal.

pub mod adam;
pub mod forward;
pub mod matrix;
pub mod params;
pub mod train;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::connectivity::ShsResult;
use crate::error::{Result, ShsError};
use crate::features::{build_features, FeatureStats};
use crate::graph::{Graph, NodeId};

pub use adam::{adam_step, AdamConfig, AdamState};
pub use forward::{
    aggregate_neighbors, backward, bce_loss, combine, forward, input_matrix, objective, softmax,
    ForwardPass, Prediction,
};
pub use matrix::Matrix;
pub use params::{ModelDims, ModelParams, CLASS_COUNT, SHS_CLASS};
pub use train::{metrics, split_nodes, train, Metrics, Split, TrainConfig, TrainLog, TrainOutcome};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub epochs: usize,
    /// Number of updates applied to the kept weights.
    pub best_epoch: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub split: [f64; 3],
    pub train_nodes: usize,
    pub val_accuracy: f64,
    pub test_accuracy: f64,
    pub test_f1: f64,
}

/// A trained model together with the feature scaling of its training graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub format_version: u32,
    pub dims: ModelDims,
    pub params: ModelParams,
    pub stats: FeatureStats,
    pub seed: u64,
    pub meta: TrainingMeta,
}

impl Model {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Model> {
        let model: Model = serde_json::from_str(text)?;
        if model.format_version != FORMAT_VERSION {
            return Err(ShsError::config(format!(
                "unsupported model format version {}",
                model.format_version
            )));
        }
        if model.dims != model.params.dims {
            return Err(ShsError::Shape(
                "model dims disagree with its weights".into(),
            ));
        }
        model.params.validate()?;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| ShsError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Model> {
        let text = std::fs::read_to_string(path).map_err(|e| ShsError::io(path, e))?;
        Model::from_json(&text)
    }

    /// Recomputes features on `g`, scales them with the training statistics
    /// and runs the network.
    pub fn infer(&self, g: &Graph) -> Result<Prediction> {
        let fm = build_features(g);
        let inputs = input_matrix(&fm.normalize_with(&self.stats));
        Ok(forward(g, &inputs, &self.params)?.prediction)
    }

    /// The `k` nodes with the highest spanner probability (ties by id).
    pub fn predict(&self, g: &Graph, k: usize) -> Result<ShsResult> {
        if k > g.node_count() {
            return Err(ShsError::InvalidK {
                k,
                n: g.node_count(),
            });
        }
        if k == 0 {
            return Ok(ShsResult {
                spanners: Vec::new(),
                residual_connectivity: crate::connectivity::total_pairwise_connectivity(g),
            });
        }
        let pred = self.infer(g)?;
        let spanners = top_k_by_probability(&pred, k);
        let residual_connectivity = crate::connectivity::total_pairwise_connectivity(
            &g.induced_subgraph_without(&spanners),
        );
        Ok(ShsResult {
            spanners,
            residual_connectivity,
        })
    }
}

/// Nodes ordered by spanner probability descending, then id, first `k` kept.
pub fn top_k_by_probability(pred: &Prediction, k: usize) -> Vec<NodeId> {
    let mut order: Vec<NodeId> = (0..pred.probabilities.len()).collect();
    order.sort_by(|&a, &b| {
        pred.shs_probability(b)
            .total_cmp(&pred.shs_probability(a))
            .then(a.cmp(&b))
    });
    order.truncate(k);
    order
}
