//! Autoencoder training lab built around decoder-column orthogonality.
//!
//! The centerpiece is an autoencoder penalty that drives the Gram matrix of
//! the decoder columns toward identity, so each latent unit contributes an
//! independent direction to the reconstruction — the same structure modal
//! decomposition imposes on vibration data. Around it: the classic denoising,
//! contractive, and sparse variants and their modal combinations, a
//! deterministic mini-batch gradient descent trainer, a softmax
//! classification stage for benchmarking representations, subspace-recovery
//! diagnostics, and seeded sweep harnesses.
//!
//! Everything is f64 with fixed accumulation order; a run is reproducible
//! bit for bit from its seed.

pub mod classifier;
pub mod config;
pub mod data;
pub mod error;
pub mod gradcheck;
pub mod linalg;
pub mod mat;
pub mod model;
pub mod params;
pub mod rng;
pub mod trainer;

pub use classifier::{
    error_rate, export_latents, extract_features, hidden_sweep, lambda_sweep, ortho_report,
    run_pipeline, subspace_alignment, train_softmax, ClassifierParams, EvalMetrics, HiddenRow,
    LambdaRow, OrthoReport, PipelineConfig, PipelineOutcome,
};
pub use data::{
    load_amat, load_csv, load_idx, make_modal_dataset, normalize, save_amat, split, Dataset,
    ModalGroundTruth, SplitSpec,
};
pub use error::{Error, Result};
pub use gradcheck::{finite_diff_grad, grad_relative_error};
pub use mat::{frob_sq, matmul, sigmoid, softmax_rows, Mat};
pub use model::{
    backward, build_m, contractive_penalty, corrupt, decode, encode, modal_penalty,
    modal_penalty_grad, recon_loss, sparse_penalty, total_loss, AEConfig, LossBreakdown, MMode,
    PenaltyCtx, Sparsity, Variant,
};
pub use params::{init_params, ParamSet};
pub use rng::Rng;
pub use trainer::{
    load_checkpoint, save_checkpoint, train_autoencoder, TrainConfig, TrainReport,
};
