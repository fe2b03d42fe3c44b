//! Discovery of top-k structural hole spanners in dynamic networks.
//!
//! An exact connectivity oracle labels the `k` nodes whose removal most
//! reduces pairwise connectivity. A two-layer graph neural network is
//! trained on those labels and then applied to later snapshots of the
//! graph in place of recomputing the oracle.

pub mod connectivity;
pub mod datasets;
pub mod error;
pub mod experiment;
pub mod features;
pub mod graph;
pub mod harness;
pub mod model;

pub use connectivity::{
    connectivity_score, greedy_top_k, label_top_k, pairwise_connectivity, score_all_nodes,
    total_pairwise_connectivity, ConnectivityScore, ShsResult,
};
pub use error::{Result, ShsError};
pub use features::{build_features, effective_size, efficiency, FeatureMatrix, FeatureStats};
pub use graph::{ComponentLabeling, Graph, NodeId};
pub use model::{Model, ModelParams, TrainConfig};
