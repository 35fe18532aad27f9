//! Dictionary learning under a global sparsity budget.
//!
//! The learner in [`learner`] fits `X ~ D A` with unit-norm atoms and at
//! most `K` nonzeros in all of `A`, letting each signal use as many atoms
//! as it needs. [`baselines`] holds per-signal-sparsity comparators,
//! [`metrics`] the evaluation quantities and [`pipeline`] data generation,
//! noise, patches and file formats.

// `!(x >= 0.0)` rejects NaN on purpose; index loops mirror the math.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod baselines;
pub mod denoise;
pub mod error;
pub mod learner;
pub mod linalg;
pub mod matrix;
pub mod metrics;
pub mod omp;
pub mod pipeline;
pub mod rank1;

pub use baselines::{ksvd_pk_learn, mod_learn, overcomplete_dct_dictionary, BaselineConfig};
pub use denoise::{denoise, DenoiseConfig, DenoiseMethod, DenoiseOutput};
pub use error::{Error, Result};
pub use learner::{
    column_stage, gdl_init, gdl_learn, gdl_learn_from, objective, row_stage, GdlConfig,
    GroundTruth, IterationRecord, LearnedModel, RunHistory,
};
pub use matrix::{DenseMatrix, SparseCoeffMatrix, SparseVector};
pub use metrics::{
    atom_usage_map, dictionary_mosaic, dictionary_recovery_rate, psnr, representation_error,
    MetricsReport, RECOVERY_THRESHOLD,
};
pub use omp::{exact_sparse_oracle, global_budget_code, omp, OmpConfig};
pub use pipeline::{GrayImage, NoiseSpec, PatchGrid, SparsityMode, SyntheticData, SyntheticSpec};
pub use rank1::{
    sparse_pca_oracle, sparse_pca_rank1, sparse_rank1_update, theorem1_transform, SparsePcaConfig,
};
