//! Tri-graph information propagation for polypharmacy side-effect prediction.
//!
//! Drug-drug side effects are predicted as labeled links on a multimodal
//! graph. Protein embeddings are learned on the protein-protein graph, pushed
//! to drugs through protein→drug edges, refined by a relational convolution
//! over the drug-drug graph, and decoded per side effect.
//!
//! The crate carries its own small reverse-mode autodiff ([`autodiff`]) over
//! dense `f64` tensors with sparse neighborhood aggregations, so the whole
//! pipeline is deterministic for a fixed set of seeds.

pub mod autodiff;
pub mod decoder;
pub mod encoder;
pub mod error;
pub mod graph;
pub mod init;
pub mod metrics;
pub mod model;
pub mod optim;
pub mod params;
pub mod sparse;
pub mod synth;
pub mod tensor;
pub mod train;

pub use autodiff::{sigmoid, Tape, Var};
pub use decoder::{df_score, nn_score, score_batch, Decoder, Triple};
pub use encoder::{GraphContext, NodeInput};
pub use error::{Result, TipError};
pub use graph::{
    load_edge_lists, sample_negatives, split_train_test, DrugPair, IdMap, MultiModalGraph,
    NegativeSampleSet, SplitGraph,
};
pub use metrics::{ap_at_k, auprc, auroc};
pub use model::{GraphShape, ModelConfig, TipModel, Variant};
pub use optim::{AdamConfig, AdamState};
pub use params::{ParamId, ParamStore, Parameter};
pub use sparse::{Adjacency, RelationalAdjacency};
pub use synth::{synth_graph, SynthConfig, SyntheticGraph};
pub use tensor::Tensor;
pub use train::{
    bce_loss, evaluate, evaluate_embeddings, report_extremes, train, train_with, EvalReport,
    RankingReport, RelationMetrics, TrainConfig, TrainOutcome,
};
