//! Aligning two frozen embedding spaces with small MLP heads trained on a
//! contrastive objective plus a neighborhood-geometry regularizer, with
//! Procrustes and anchor-relative (ASIF) baselines.
//!
//! Data flows `store` -> `neighborhood` -> `losses` (built on `kernels` and
//! `network`) -> `trainer`, and models are scored with `eval`.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod error;
pub mod eval;
pub mod kernels;
pub mod losses;
pub mod neighborhood;
pub mod network;
pub mod store;
pub mod trainer;

pub use baselines::{asif_encode, asif_retrieve, procrustes_fit, AsifModel, ProcrustesModel};
pub use error::{Error, Result};
pub use eval::{
    bench_inference, neighbor_rank_metric, precision_at_k, zero_shot_classify, Direction, MetricRecords,
    RetrievalResult, Retriever, TimingReport, ZeroShotResult,
};
pub use kernels::{encode_neighborhood, KernelConfig, KernelKind, NeighborhoodEncoding};
pub use losses::{contrastive_loss, geometric_loss, gera_batch_loss, AlignmentData, BatchLossReport, LossConfig};
pub use neighborhood::{build_knn_pool, sample_neighborhood, NeighborConfig, NeighborPool, Strategy};
pub use network::{backward, forward, init_mlp, predict, Mode, MlpGrads, MlpParams};
pub use store::{Dtype, EmbeddingMatrix, PairIndex, SynthConfig};
pub use trainer::{train, AdamConfig, TrainConfig, TrainLog, TrainOutcome};
