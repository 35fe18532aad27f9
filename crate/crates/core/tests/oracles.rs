//! Checks against nalgebra's dense factorizations.

use gdl_core::baselines::mod_dictionary_update;
use gdl_core::pipeline::seeded_rng;
use gdl_core::rank1::rank1_objective;
use gdl_core::{
    omp, sparse_pca_oracle, sparse_pca_rank1, DenseMatrix, OmpConfig, SparseCoeffMatrix,
    SparsePcaConfig,
};
use nalgebra::DMatrix;

fn gaussian(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
    let mut rng = seeded_rng(seed);
    DenseMatrix::from_fn(rows, cols, |_, _| rng.normal())
}

fn to_na(m: &DenseMatrix) -> DMatrix<f64> {
    DMatrix::from_fn(m.rows(), m.cols(), |r, c| m.get(r, c))
}

fn top_singular_sq(m: &DenseMatrix) -> f64 {
    let s = to_na(m).singular_values();
    s.max().powi(2)
}

#[test]
fn unconstrained_sparse_pca_reaches_top_singular_value() {
    for seed in 0..20 {
        let e = gaussian(7, 5, seed);
        let want = top_singular_sq(&e);
        // with k = n the iteration is plain power iteration; run it to convergence
        let cfg = SparsePcaConfig {
            inner_iters: 20_000,
            tol: 1e-15,
            ..SparsePcaConfig::default()
        };
        let w = sparse_pca_rank1(&e, 5, None, &cfg).unwrap();
        let got = rank1_objective(&e, &w);
        assert!(
            (got - want).abs() <= 1e-6 * want,
            "seed {seed}: {got} vs {want}"
        );
        let oracle = rank1_objective(&e, &sparse_pca_oracle(&e, 5).unwrap());
        assert!((oracle - want).abs() <= 1e-9 * want);
    }
}

#[test]
fn sparse_oracle_matches_restricted_svd() {
    // best over supports of size 2 of the top singular value of E restricted to them
    for seed in 0..10 {
        let e = gaussian(4, 6, 100 + seed);
        let mut best: f64 = 0.0;
        for a in 0..6 {
            for b in a + 1..6 {
                best = best.max(top_singular_sq(&e.select_columns(&[a, b])));
            }
        }
        let got = rank1_objective(&e, &sparse_pca_oracle(&e, 2).unwrap());
        assert!((got - best).abs() <= 1e-9 * best);
    }
}

#[test]
fn omp_with_full_support_solves_least_squares() {
    for seed in 0..10 {
        let d = gdl_core::matrix::normalize_columns(&gaussian(6, 4, 200 + seed)).unwrap();
        let x = gaussian(6, 1, 300 + seed).column(0);
        let alpha = omp(&d, &x, 4, &OmpConfig::default()).unwrap();
        let dn = to_na(&d);
        let ls = dn
            .clone()
            .svd(true, true)
            .solve(&nalgebra::DVector::from_vec(x.clone()), 1e-12)
            .unwrap();
        for i in 0..4 {
            assert!((alpha.get(i) - ls[i]).abs() < 1e-8);
        }
    }
}

#[test]
fn mod_update_is_the_normal_equation_solution() {
    let x = gaussian(5, 30, 1);
    let dense_a = gaussian(8, 30, 2);
    let a = SparseCoeffMatrix::from_dense(&dense_a, 240).unwrap();
    let d = mod_dictionary_update(&x, &a, 0.0).unwrap();
    let (xn, an) = (to_na(&x), to_na(&dense_a));
    let gram = &an * an.transpose();
    let want = &xn * an.transpose() * gram.try_inverse().unwrap();
    for r in 0..5 {
        for c in 0..8 {
            assert!((d.get(r, c) - want[(r, c)]).abs() < 1e-9);
        }
    }
}
