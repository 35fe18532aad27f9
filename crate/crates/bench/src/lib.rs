//! Fixtures shared by the criterion benchmarks.

use gdl_core::pipeline::synthetic::gen_synthetic;
use gdl_core::{DenseMatrix, SparsityMode, SyntheticSpec};

/// Noisy signals from the per-signal-sparsity generator with `n` columns.
pub fn synthetic_signals(n: usize, seed: u64) -> DenseMatrix {
    let spec = SyntheticSpec {
        d: 20,
        m: 50,
        n,
        sparsity: SparsityMode::PerColumn(3),
        noise_sigma: 0.05,
    };
    gen_synthetic(&spec, seed)
        .expect("fixture spec is valid")
        .noisy
}
