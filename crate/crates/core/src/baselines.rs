//! Comparison learners with a fixed per-signal sparsity `k`: K-SVD and
//! MOD, plus the fixed overcomplete DCT dictionary.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::learner::{
    bookkeeping_ok, init_dictionary_from_samples, objective, residual, GroundTruth,
    IterationRecord, LearnedModel, RunHistory,
};
use crate::linalg::{self, Cholesky};
use crate::matrix::{
    normalize_columns, DenseMatrix, SparseCoeffMatrix, SparseVector, ZERO_COLUMN_TOL,
};
use crate::omp::{
    check_unit_columns, least_squares_on_support, omp_unchecked, residual_norm_sq, OmpConfig,
};

/// Power iterations inside the K-SVD atom update stop at this relative
/// change of the leading eigenvalue.
pub const KSVD_POWER_TOL: f64 = 1e-12;
const KSVD_POWER_MAX_ITERS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineConfig {
    pub m: usize,
    pub k_per_column: usize,
    pub max_iters: usize,
    pub seed: u64,
    /// Tikhonov term of the MOD update.
    pub ridge: f64,
    pub omp: OmpConfig,
}

impl BaselineConfig {
    pub fn new(m: usize, k_per_column: usize, max_iters: usize, seed: u64) -> Self {
        Self {
            m,
            k_per_column,
            max_iters,
            seed,
            ridge: 1e-8,
            omp: OmpConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::InvalidConfig("need at least one atom".into()));
        }
        if self.k_per_column == 0 {
            return Err(Error::InvalidConfig("k_per_column must be >= 1".into()));
        }
        if self.k_per_column > self.m {
            return Err(Error::InvalidConfig(format!(
                "k_per_column {} exceeds m = {}",
                self.k_per_column, self.m
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be >= 1".into()));
        }
        if !(self.ridge >= 0.0) || !self.ridge.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "ridge {} must be finite and >= 0",
                self.ridge
            )));
        }
        self.omp.validate()
    }

    fn budget(&self, n: usize) -> usize {
        self.k_per_column * n
    }
}

/// OMP with `k` atoms per signal. With `previous` given, a signal keeps
/// the refit of its old support whenever that is at least as good.
fn code_fixed_k(
    x: &DenseMatrix,
    d: &DenseMatrix,
    k: usize,
    previous: Option<&SparseCoeffMatrix>,
    cfg: &OmpConfig,
) -> Result<SparseCoeffMatrix> {
    let mut signal = vec![0.0; x.rows()];
    let mut cols = Vec::with_capacity(x.cols());
    for j in 0..x.cols() {
        x.column_into(j, &mut signal);
        let fresh = omp_unchecked(d, &signal, k, cfg).coefficients;
        let chosen = match previous {
            Some(a) if !a.column(j).is_empty() => {
                let support: Vec<usize> = a.column(j).iter().map(|e| e.0).collect();
                let refit = least_squares_on_support(d, &signal, &support);
                if residual_norm_sq(d, &signal, &refit) < residual_norm_sq(d, &signal, &fresh) {
                    refit
                } else {
                    fresh
                }
            }
            _ => fresh,
        };
        cols.push(chosen);
    }
    SparseCoeffMatrix::from_columns(d.cols(), k * x.cols(), cols)
}

#[allow(clippy::too_many_arguments)]
fn record(
    history: &mut RunHistory,
    iteration: usize,
    coding: (f64, usize),
    x: &DenseMatrix,
    d: &DenseMatrix,
    a: &SparseCoeffMatrix,
    start: Instant,
    truth: Option<&GroundTruth<'_>>,
) -> Result<f64> {
    let current = objective(x, d, a)?;
    let seconds = start.elapsed().as_secs_f64();
    let (re, dr) = match truth {
        Some(t) => {
            let (re, dr) = t.evaluate(d, a)?;
            (Some(re), Some(dr))
        }
        None => (None, None),
    };
    history.records.push(IterationRecord {
        iteration,
        coding_objective: coding.0,
        objective: current,
        coding_nnz: coding.1,
        nnz: a.nnz(),
        seconds,
        re,
        dr,
    });
    Ok(current)
}

/// K-SVD for the per-signal model: OMP coding, then every atom is replaced
/// by the leading singular pair of the residual restricted to the signals
/// that use it. Supports are preserved by the atom update.
pub fn ksvd_pk_learn(
    x: &DenseMatrix,
    cfg: &BaselineConfig,
    truth: Option<GroundTruth<'_>>,
) -> Result<LearnedModel> {
    cfg.validate()?;
    let d = init_dictionary_from_samples(x, cfg.m, cfg.seed)?;
    let a = SparseCoeffMatrix::empty(cfg.m, x.cols(), cfg.budget(x.cols()));
    ksvd_pk_learn_from(x, d, a, cfg, truth)
}

/// [`ksvd_pk_learn`] from a given dictionary and, optionally, codes whose
/// supports seed the first coding stage.
pub fn ksvd_pk_learn_from(
    x: &DenseMatrix,
    mut d: DenseMatrix,
    a: SparseCoeffMatrix,
    cfg: &BaselineConfig,
    truth: Option<GroundTruth<'_>>,
) -> Result<LearnedModel> {
    cfg.validate()?;
    if d.shape() != (x.rows(), cfg.m) || a.rows() != cfg.m || a.cols() != x.cols() {
        return Err(Error::DimensionMismatch(
            "K-SVD start does not match the data".into(),
        ));
    }
    check_unit_columns(&d)?;
    let mut a = SparseCoeffMatrix::from_columns(
        cfg.m,
        cfg.budget(x.cols()),
        (0..a.cols()).map(|j| a.column_vector(j)).collect(),
    )?;
    let mut history = RunHistory {
        initial_objective: objective(x, &d, &a)?,
        ..Default::default()
    };
    for iteration in 1..=cfg.max_iters {
        let start = Instant::now();
        let previous = (a.nnz() > 0).then_some(&a);
        a = code_fixed_k(x, &d, cfg.k_per_column, previous, &cfg.omp)?;
        let coding = (objective(x, &d, &a)?, a.nnz());
        history.bookkeeping_violations += usize::from(!bookkeeping_ok(&a));
        (d, a) = ksvd_atom_updates(x, &d, &a)?;
        history.bookkeeping_violations += usize::from(!bookkeeping_ok(&a));
        let current = record(
            &mut history,
            iteration,
            coding,
            x,
            &d,
            &a,
            start,
            truth.as_ref(),
        )?;
        if current == 0.0 {
            break;
        }
    }
    Ok(LearnedModel {
        dictionary: d,
        coefficients: a,
        history,
    })
}

/// One sweep of K-SVD atom updates; never increases the objective.
pub fn ksvd_atom_updates(
    x: &DenseMatrix,
    d: &DenseMatrix,
    a: &SparseCoeffMatrix,
) -> Result<(DenseMatrix, SparseCoeffMatrix)> {
    let mut r = residual(x, d, a)?;
    let mut dict = d.clone();
    let mut rows = a.row_vectors();
    let dim = x.rows();
    for i in 0..d.cols() {
        let users = rows[i].indices().to_vec();
        if users.is_empty() {
            continue;
        }
        let old_atom = dict.column(i);
        // restricted residual with atom i restored
        let cols: Vec<Vec<f64>> = users
            .iter()
            .zip(rows[i].values())
            .map(|(&j, &v)| {
                let mut c = r.column(j);
                linalg::axpy(v, &old_atom, &mut c);
                c
            })
            .collect();
        let mut gram = vec![0.0; dim * dim];
        for c in &cols {
            for p in 0..dim {
                if c[p] == 0.0 {
                    continue;
                }
                for q in 0..dim {
                    gram[p * dim + q] += c[p] * c[q];
                }
            }
        }
        let (_, u) = linalg::leading_eigenpair(
            &gram,
            dim,
            Some(&old_atom),
            KSVD_POWER_TOL,
            KSVD_POWER_MAX_ITERS,
        );
        let fit = |atom: &[f64]| {
            cols.iter()
                .map(|c| linalg::dot(atom, c).powi(2))
                .sum::<f64>()
        };
        let atom = if fit(&u) >= fit(&old_atom) {
            u
        } else {
            old_atom
        };
        let pairs: Vec<(usize, f64)> = users
            .iter()
            .zip(&cols)
            .map(|(&j, c)| (j, linalg::dot(&atom, c)))
            .collect();
        for ((&j, c), &(_, v)) in users.iter().zip(&cols).zip(&pairs) {
            let mut next = c.clone();
            linalg::axpy(-v, &atom, &mut next);
            r.set_column(j, &next);
        }
        dict.set_column(i, &atom);
        rows[i] = SparseVector::from_pairs(x.cols(), pairs)?;
    }
    let coefficients = SparseCoeffMatrix::from_rows(x.cols(), a.budget(), &rows)?;
    Ok((dict, coefficients))
}

/// `X A^T (A A^T + ridge I)^{-1}`, not normalised.
pub fn mod_dictionary_update(
    x: &DenseMatrix,
    a: &SparseCoeffMatrix,
    ridge: f64,
) -> Result<DenseMatrix> {
    if a.cols() != x.cols() {
        return Err(Error::DimensionMismatch(format!(
            "{} codes for {} signals",
            a.cols(),
            x.cols()
        )));
    }
    let (m, dim) = (a.rows(), x.rows());
    let mut gram = vec![0.0; m * m];
    // rows of A X^T, one per atom
    let mut rhs = vec![0.0; m * dim];
    let mut signal = vec![0.0; dim];
    for j in 0..x.cols() {
        let col = a.column(j);
        if col.is_empty() {
            continue;
        }
        x.column_into(j, &mut signal);
        for &(p, vp) in col {
            for &(q, vq) in col {
                gram[p * m + q] += vp * vq;
            }
            linalg::axpy(vp, &signal, &mut rhs[p * dim..(p + 1) * dim]);
        }
    }
    for i in 0..m {
        gram[i * m + i] += ridge;
    }
    let chol = Cholesky::factor(&gram, m)?;
    let mut out = DenseMatrix::zeros(dim, m);
    let mut b = vec![0.0; m];
    for p in 0..dim {
        for i in 0..m {
            b[i] = rhs[i * dim + p];
        }
        let sol = chol.solve(&b);
        for (i, v) in sol.into_iter().enumerate() {
            out.set(p, i, v);
        }
    }
    Ok(out)
}

/// MOD: OMP coding alternating with the closed-form least-squares
/// dictionary. Coding uses the same keep-the-refit rule as K-SVD. Atoms
/// the update leaves at zero keep their old value.
pub fn mod_learn(
    x: &DenseMatrix,
    cfg: &BaselineConfig,
    truth: Option<GroundTruth<'_>>,
) -> Result<LearnedModel> {
    cfg.validate()?;
    let mut d = init_dictionary_from_samples(x, cfg.m, cfg.seed)?;
    let mut a = SparseCoeffMatrix::empty(cfg.m, x.cols(), cfg.budget(x.cols()));
    let mut history = RunHistory {
        initial_objective: objective(x, &d, &a)?,
        ..Default::default()
    };
    for iteration in 1..=cfg.max_iters {
        let start = Instant::now();
        let previous = (a.nnz() > 0).then_some(&a);
        a = code_fixed_k(x, &d, cfg.k_per_column, previous, &cfg.omp)?;
        let coding = (objective(x, &d, &a)?, a.nnz());
        history.bookkeeping_violations += usize::from(!bookkeeping_ok(&a));
        let raw = mod_dictionary_update(x, &a, cfg.ridge)?;
        let mut scales = vec![1.0; cfg.m];
        for i in 0..cfg.m {
            let col = raw.column(i);
            let n = linalg::norm(&col);
            if n > ZERO_COLUMN_TOL {
                d.set_column(i, &col.iter().map(|v| v / n).collect::<Vec<_>>());
                scales[i] = n;
            } else {
                // unused atom: its row of A is zero, so D A is unchanged
                scales[i] = 0.0;
            }
        }
        a.scale_rows(&scales);
        history.bookkeeping_violations += usize::from(!bookkeeping_ok(&a));
        let current = record(
            &mut history,
            iteration,
            coding,
            x,
            &d,
            &a,
            start,
            truth.as_ref(),
        )?;
        if current == 0.0 {
            break;
        }
    }
    Ok(LearnedModel {
        dictionary: d,
        coefficients: a,
        history,
    })
}

/// Overcomplete 2-D DCT dictionary for `p * p` patches with `q * q` atoms.
///
/// 1-D prototype `V[r, c] = cos(pi r c / q)`, non-constant columns
/// mean-subtracted; the 2-D atoms are `kron(V, V)` normalised to unit
/// length.
pub fn overcomplete_dct_dictionary(p: usize, q: usize) -> Result<DenseMatrix> {
    if p == 0 || q < p {
        return Err(Error::InvalidDims(format!(
            "need 1 <= p <= q, got p = {p}, q = {q}"
        )));
    }
    let mut v = DenseMatrix::from_fn(p, q, |r, c| {
        (std::f64::consts::PI * (r * c) as f64 / q as f64).cos()
    });
    for c in 1..q {
        let col = v.column(c);
        let mean = col.iter().sum::<f64>() / p as f64;
        v.set_column(c, &col.iter().map(|x| x - mean).collect::<Vec<_>>());
    }
    let d = DenseMatrix::from_fn(p * p, q * q, |row, col| {
        let (r1, r2) = (row / p, row % p);
        let (c1, c2) = (col / q, col % q);
        v.get(r1, c1) * v.get(r2, c2)
    });
    normalize_columns(&d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::rng::seeded_rng;
    use crate::pipeline::synthetic::{gen_synthetic, SparsityMode, SyntheticSpec};

    fn small(seed: u64, sigma: f64) -> crate::pipeline::SyntheticData {
        let spec = SyntheticSpec {
            d: 10,
            m: 20,
            n: 200,
            sparsity: SparsityMode::PerColumn(3),
            noise_sigma: sigma,
        };
        gen_synthetic(&spec, seed).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(BaselineConfig::new(20, 0, 5, 1).validate().is_err());
        assert!(BaselineConfig::new(20, 21, 5, 1).validate().is_err());
        assert!(BaselineConfig::new(20, 3, 0, 1).validate().is_err());
        let mut c = BaselineConfig::new(20, 3, 5, 1);
        c.ridge = -1.0;
        assert!(c.validate().is_err());
        let x = small(1, 0.0).noisy;
        assert!(matches!(
            ksvd_pk_learn(&x, &BaselineConfig::new(20, 0, 5, 1), None),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn ksvd_is_monotone_and_keeps_k() {
        let data = small(2, 0.05);
        let cfg = BaselineConfig::new(20, 3, 20, 4);
        let model = ksvd_pk_learn(&data.noisy, &cfg, None).unwrap();
        let objs = model.history.stage_objectives();
        // the initial objective is with empty codes
        for w in objs[1..].windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "{} > {}", w[1], w[0]);
        }
        assert!(model.coefficients.nnz_per_column().iter().all(|&c| c <= 3));
        assert_eq!(model.history.bookkeeping_violations, 0);
        for n in model.dictionary.column_norms() {
            assert!((n - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn ksvd_atom_update_preserves_supports() {
        let data = small(3, 0.05);
        let d = init_dictionary_from_samples(&data.noisy, 20, 1).unwrap();
        let a = code_fixed_k(&data.noisy, &d, 3, None, &OmpConfig::default()).unwrap();
        let (d2, a2) = ksvd_atom_updates(&data.noisy, &d, &a).unwrap();
        for j in 0..a.cols() {
            let s1: Vec<usize> = a.column(j).iter().map(|e| e.0).collect();
            let s2: Vec<usize> = a2.column(j).iter().map(|e| e.0).collect();
            assert!(s2.iter().all(|i| s1.contains(i)));
        }
        assert!(
            objective(&data.noisy, &d2, &a2).unwrap()
                <= objective(&data.noisy, &d, &a).unwrap() + 1e-9
        );
    }

    #[test]
    fn mod_recovers_square_dictionary() {
        let mut rng = seeded_rng(5);
        let d = normalize_columns(&DenseMatrix::from_fn(4, 4, |_, _| rng.normal())).unwrap();
        let a_dense = DenseMatrix::from_fn(4, 4, |r, c| {
            if r == c {
                2.0 + r as f64
            } else {
                0.3 * rng.normal()
            }
        });
        let a = SparseCoeffMatrix::from_dense(&a_dense, 16).unwrap();
        let x = d.matmul(&a_dense).unwrap();
        let raw = mod_dictionary_update(&x, &a, 0.0).unwrap();
        let rec = normalize_columns(&raw).unwrap();
        for i in 0..4 {
            let c = linalg::dot(&rec.column(i), &d.column(i));
            assert!((c.abs() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn mod_ridge_handles_rank_deficiency() {
        let x = DenseMatrix::from_fn(3, 4, |r, c| (r + c) as f64);
        let a = SparseCoeffMatrix::from_triplets(3, 4, 4, vec![(0, 0, 1.0), (0, 1, 2.0)]).unwrap();
        assert!(mod_dictionary_update(&x, &a, 1e-8).is_ok());
        assert!(matches!(
            mod_dictionary_update(&x, &a, 0.0),
            Err(Error::SingularGram)
        ));
    }

    #[test]
    fn mod_mostly_descends() {
        let data = small(6, 0.0);
        let model = mod_learn(&data.noisy, &BaselineConfig::new(20, 3, 30, 2), None).unwrap();
        let objs: Vec<f64> = model.history.records.iter().map(|r| r.objective).collect();
        let ups = objs.windows(2).filter(|w| w[1] > w[0] + 1e-9).count();
        assert!(ups * 20 <= objs.len(), "{ups} increases in {}", objs.len());
        for n in model.dictionary.column_norms() {
            assert!((n - 1.0).abs() < 1e-10);
        }
        assert!(model.coefficients.nnz_per_column().iter().all(|&c| c <= 3));
    }

    #[test]
    fn dct_shape_and_constant_atom() {
        let d = overcomplete_dct_dictionary(8, 16).unwrap();
        assert_eq!(d.shape(), (64, 256));
        for n in d.column_norms() {
            assert!((n - 1.0).abs() < 1e-12);
        }
        for v in d.column(0) {
            assert!((v - 0.125).abs() < 1e-15);
        }
        assert!(matches!(
            overcomplete_dct_dictionary(8, 7),
            Err(Error::InvalidDims(_))
        ));
        assert!(matches!(
            overcomplete_dct_dictionary(0, 3),
            Err(Error::InvalidDims(_))
        ));
    }

    #[test]
    fn dct_complete_case_spans_the_space() {
        let d = overcomplete_dct_dictionary(8, 8).unwrap();
        assert_eq!(d.shape(), (64, 64));
        // mean subtraction breaks orthogonality but keeps full rank
        let g = d.transpose().matmul(&d).unwrap();
        assert!(Cholesky::factor(g.as_slice(), 64).is_ok());
        // the constant atom is orthogonal to every other
        for c in 1..64 {
            assert!(linalg::dot(&d.column(0), &d.column(c)).abs() < 1e-12);
        }
    }
}
