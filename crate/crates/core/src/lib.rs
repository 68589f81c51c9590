//! Hyperedge anomaly detection with two-stage hypergraph message passing.

pub mod data;
pub mod error;
pub mod eval;
pub mod hypergraph;
pub mod model;
pub mod nn;
pub mod train;

pub use data::synthetic::{generate_synthetic, SyntheticConfig};
pub use data::{
    load_dataset, make_splits, DatasetManifest, EvalSplit, Label, LabeledHypergraphDataset,
    SplitConfig,
};
pub use error::{HadError, Result};
pub use eval::{
    auroc, evaluate_cv, evaluate_cv_with, normalize_scores, EvalOptions, EvalReport, ScoredTestSet,
};
pub use hypergraph::{Hypergraph, IncidenceView};
pub use model::{forward, score_hyperedge, CentroidMode, ModelConfig, Pooling, TrainedModel};
pub use nn::{Activation, AdamConfig, ParameterStore};
pub use train::{train, train_from, Termination, TrainConfig, TrainingRecord};
