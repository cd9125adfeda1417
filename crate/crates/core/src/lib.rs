//! Learned bilinear similarity over deep image embeddings, fit to human
//! triplet judgments ("is the query more like reference 1 or reference 2?").
//!
//! The pipeline: fit a PCA projection on a reference corpus, project the
//! judged images into the top-`k` subspace, and learn a weight matrix `W`
//! so that `P(choose r1) = σ(f(q)ᵀ W (f(r1) − f(r2)))` matches the human
//! choices. Five constraint families on `W` are provided, from the fixed
//! identity up to a fully unconstrained (and therefore asymmetric) matrix.
//!
//! The [`synth`] module generates data from a known model so every stage can
//! be checked against an exact accuracy ceiling.

pub mod cli;
pub mod data;
pub mod error;
pub mod experiments;
pub mod io;
pub mod model;
pub mod pca;
pub mod rng;
pub mod synth;
pub mod train;

pub use data::{
    expand_ranked_trial, validate_dataset, Choice, EmbeddingTable, RankedTrial, TripletConstraint,
    TripletDataset,
};
pub use error::{Error, Result};
pub use experiments::{kfold_images, kfold_triplets, run_sweep, FoldSpec, SweepSpec};
pub use model::{param_count, FactoredTriplets, Family, TripletBatch, WeightModel};
pub use pca::{fit_pca, PcaProjection};
pub use train::{epoch_accuracy, mean_log_likelihood, train, TrainingConfig, TrainingHistory};
