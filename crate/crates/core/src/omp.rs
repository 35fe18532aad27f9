//! Sparse coding of single signals over a fixed dictionary.
//!
//! [`omp`] is orthogonal matching pursuit: greedily add the atom most
//! correlated with the residual, then re-fit all selected coefficients by
//! least squares. [`exact_sparse_oracle`] enumerates every support and is
//! only meant for tiny instances in tests.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::linalg::{self, solve_spd_with_ridge};
use crate::matrix::{DenseMatrix, SparseCoeffMatrix, SparseVector};

/// Dictionary columns must have unit norm within this tolerance.
pub const UNIT_NORM_TOL: f64 = 1e-8;

/// Cap on the number of supports [`exact_sparse_oracle`] will enumerate.
pub const ORACLE_SUPPORT_CAP: u128 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OmpConfig {
    /// Stop once `||r|| <= residual_tol * ||x||`.
    pub residual_tol: f64,
    /// Hard cap on atoms per signal, on top of the per-call budget.
    pub max_atoms: usize,
}

impl Default for OmpConfig {
    fn default() -> Self {
        Self {
            residual_tol: 1e-12,
            max_atoms: usize::MAX,
        }
    }
}

impl OmpConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.residual_tol >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "residual_tol {} must be >= 0",
                self.residual_tol
            )));
        }
        Ok(())
    }
}

/// Greedy path of one OMP run.
#[derive(Debug, Clone, PartialEq)]
pub struct OmpPath {
    pub coefficients: SparseVector,
    /// Atoms in the order they were selected.
    pub selected: Vec<usize>,
    /// `||r||` before the first step and after every accepted step.
    pub residual_norms: Vec<f64>,
}

pub fn check_unit_columns(d: &DenseMatrix) -> Result<()> {
    for (col, norm) in d.column_norms().into_iter().enumerate() {
        if (norm - 1.0).abs() > UNIT_NORM_TOL {
            return Err(Error::NonUnitDictionary { col, norm });
        }
    }
    Ok(())
}

fn check_signal(d: &DenseMatrix, x: &[f64], k: usize) -> Result<()> {
    if x.len() != d.rows() {
        return Err(Error::DimensionMismatch(format!(
            "signal of length {} against a {}x{} dictionary",
            x.len(),
            d.rows(),
            d.cols()
        )));
    }
    if k > d.cols() {
        return Err(Error::DimensionMismatch(format!(
            "k = {k} exceeds {} atoms",
            d.cols()
        )));
    }
    Ok(())
}

/// k-sparse approximation of `x` over the unit-norm columns of `d`.
pub fn omp(d: &DenseMatrix, x: &[f64], k: usize, cfg: &OmpConfig) -> Result<SparseVector> {
    Ok(omp_trace(d, x, k, cfg)?.coefficients)
}

/// [`omp`] that also reports the greedy path.
pub fn omp_trace(d: &DenseMatrix, x: &[f64], k: usize, cfg: &OmpConfig) -> Result<OmpPath> {
    check_signal(d, x, k)?;
    check_unit_columns(d)?;
    Ok(omp_unchecked(d, x, k, cfg))
}

pub(crate) fn omp_unchecked(d: &DenseMatrix, x: &[f64], k: usize, cfg: &OmpConfig) -> OmpPath {
    let m = d.cols();
    let dim = d.rows();
    let k = k.min(cfg.max_atoms).min(m);
    let x_norm = linalg::norm(x);
    let stop_at = cfg.residual_tol * x_norm;

    let mut residual = x.to_vec();
    let mut residual_norm = x_norm;
    let mut norms = vec![x_norm];
    let mut support: Vec<usize> = Vec::with_capacity(k);
    let mut atoms: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut gram: Vec<f64> = Vec::new();
    let mut rhs: Vec<f64> = Vec::with_capacity(k);
    let mut coefs: Vec<f64> = Vec::new();
    let mut in_support = vec![false; m];

    while support.len() < k && residual_norm > stop_at {
        let corr = d.tr_mul_vec(&residual);
        let mut best = None;
        let mut best_abs = 0.0;
        for (j, c) in corr.iter().enumerate() {
            if !in_support[j] && c.abs() > best_abs {
                best_abs = c.abs();
                best = Some(j);
            }
        }
        let Some(j) = best else { break };
        if best_abs <= 1e-14 * x_norm {
            break;
        }

        let atom = d.column(j);
        let s = support.len();
        let mut next_gram = vec![0.0; (s + 1) * (s + 1)];
        for a in 0..s {
            for b in 0..s {
                next_gram[a * (s + 1) + b] = gram[a * s + b];
            }
            let g = linalg::dot(&atoms[a], &atom);
            next_gram[a * (s + 1) + s] = g;
            next_gram[s * (s + 1) + a] = g;
        }
        next_gram[s * (s + 1) + s] = linalg::norm_sq(&atom);
        let mut next_rhs = rhs.clone();
        next_rhs.push(linalg::dot(&atom, x));
        let next_coefs = solve_spd_with_ridge(&next_gram, &next_rhs);

        let mut next_residual = x.to_vec();
        for (a, c) in atoms.iter().chain(std::iter::once(&atom)).zip(&next_coefs) {
            linalg::axpy(-c, a, &mut next_residual);
        }
        let next_norm = linalg::norm(&next_residual);
        if next_norm > residual_norm || !next_norm.is_finite() {
            // a ridged solve on a near-dependent atom; the previous fit stands
            break;
        }

        in_support[j] = true;
        support.push(j);
        atoms.push(atom);
        gram = next_gram;
        rhs = next_rhs;
        coefs = next_coefs;
        residual = next_residual;
        residual_norm = next_norm;
        norms.push(next_norm);
        debug_assert_eq!(residual.len(), dim);
    }

    let pairs = support.iter().copied().zip(coefs.iter().copied()).collect();
    let coefficients =
        SparseVector::from_pairs(m, pairs).expect("support indices are distinct and in range");
    OmpPath {
        coefficients,
        selected: support,
        residual_norms: norms,
    }
}

/// Least-squares coefficients of `x` on the given atoms (ridged on
/// singularity).
pub fn least_squares_on_support(d: &DenseMatrix, x: &[f64], support: &[usize]) -> SparseVector {
    if support.is_empty() {
        return SparseVector::empty(d.cols());
    }
    let atoms: Vec<Vec<f64>> = support.iter().map(|&j| d.column(j)).collect();
    let s = support.len();
    let mut gram = vec![0.0; s * s];
    for a in 0..s {
        for b in a..s {
            let g = linalg::dot(&atoms[a], &atoms[b]);
            gram[a * s + b] = g;
            gram[b * s + a] = g;
        }
    }
    let rhs: Vec<f64> = atoms.iter().map(|a| linalg::dot(a, x)).collect();
    let coefs = solve_spd_with_ridge(&gram, &rhs);
    let pairs = support.iter().copied().zip(coefs).collect();
    SparseVector::from_pairs(d.cols(), pairs).expect("support indices are distinct and in range")
}

/// `||x - D alpha||^2`
pub fn residual_norm_sq(d: &DenseMatrix, x: &[f64], alpha: &SparseVector) -> f64 {
    let mut r = x.to_vec();
    for (j, v) in alpha.iter() {
        for (i, ri) in r.iter_mut().enumerate() {
            *ri -= d.get(i, j) * v;
        }
    }
    linalg::norm_sq(&r)
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k.min(n));
    (0..k as u128).fold(1u128, |acc, i| acc * (n as u128 - i) / (i + 1))
}

/// Global minimiser of `||x - D alpha||^2` over all supports of size at
/// most `k`, by enumeration. Supports are visited in lexicographic order
/// and only a strict improvement replaces the incumbent, so ties go to the
/// lexicographically smallest support.
pub fn exact_sparse_oracle(d: &DenseMatrix, x: &[f64], k: usize) -> Result<SparseVector> {
    check_signal(d, x, k)?;
    let m = d.cols();
    let count: u128 = (0..=k).map(|s| binomial(m, s)).sum();
    if count > ORACLE_SUPPORT_CAP {
        return Err(Error::TooLarge {
            count,
            cap: ORACLE_SUPPORT_CAP,
        });
    }
    let tie = 1e-12 * linalg::norm_sq(x).max(f64::MIN_POSITIVE);
    let mut best = SparseVector::empty(m);
    let mut best_obj = linalg::norm_sq(x);
    let mut support = Vec::with_capacity(k);

    #[allow(clippy::too_many_arguments)]
    fn visit(
        d: &DenseMatrix,
        x: &[f64],
        k: usize,
        start: usize,
        support: &mut Vec<usize>,
        best: &mut SparseVector,
        best_obj: &mut f64,
        tie: f64,
    ) {
        for j in start..d.cols() {
            support.push(j);
            let alpha = least_squares_on_support(d, x, support);
            let obj = residual_norm_sq(d, x, &alpha);
            if obj < *best_obj - tie {
                *best_obj = obj;
                *best = alpha;
            }
            if support.len() < k {
                visit(d, x, k, j + 1, support, best, best_obj, tie);
            }
            support.pop();
        }
    }
    if k > 0 {
        visit(d, x, k, 0, &mut support, &mut best, &mut best_obj, tie);
    }
    Ok(best)
}

/// Codes every column of `x` with its own atom budget.
pub fn column_stage_code(
    d: &DenseMatrix,
    x: &DenseMatrix,
    budgets: &[usize],
    cfg: &OmpConfig,
) -> Result<SparseCoeffMatrix> {
    if budgets.len() != x.cols() {
        return Err(Error::DimensionMismatch(format!(
            "{} budgets for {} signals",
            budgets.len(),
            x.cols()
        )));
    }
    if x.rows() != d.rows() {
        return Err(Error::DimensionMismatch(format!(
            "signals of dim {} vs atoms of dim {}",
            x.rows(),
            d.rows()
        )));
    }
    if let Some(&b) = budgets.iter().find(|&&b| b > d.cols()) {
        return Err(Error::DimensionMismatch(format!(
            "budget {b} exceeds {} atoms",
            d.cols()
        )));
    }
    check_unit_columns(d)?;
    let total: usize = budgets.iter().sum();
    let mut signal = vec![0.0; x.rows()];
    let mut cols = Vec::with_capacity(x.cols());
    for (j, &b) in budgets.iter().enumerate() {
        x.column_into(j, &mut signal);
        cols.push(omp_unchecked(d, &signal, b, cfg).coefficients);
    }
    SparseCoeffMatrix::from_columns(d.cols(), total, cols)
}

#[derive(Debug, PartialEq)]
struct Gain {
    value: f64,
    col: usize,
}

impl Eq for Gain {}

impl Ord for Gain {
    fn cmp(&self, other: &Self) -> Ordering {
        self.value
            .total_cmp(&other.value)
            .then_with(|| other.col.cmp(&self.col))
    }
}

impl PartialOrd for Gain {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Codes all columns of `x` under one shared budget of `total` nonzeros.
///
/// Nonzeros are handed out one at a time to the signal whose next OMP step
/// removes the most residual energy (ties to the lower column index).
pub fn global_budget_code(
    d: &DenseMatrix,
    x: &DenseMatrix,
    total: usize,
    cfg: &OmpConfig,
) -> Result<SparseCoeffMatrix> {
    if x.rows() != d.rows() {
        return Err(Error::DimensionMismatch(format!(
            "signals of dim {} vs atoms of dim {}",
            x.rows(),
            d.rows()
        )));
    }
    check_unit_columns(d)?;
    let n = x.cols();
    let m = d.cols();
    let columns: Vec<Vec<f64>> = (0..n).map(|j| x.column(j)).collect();
    let next_gain = |j: usize, steps: usize| -> Option<f64> {
        if steps >= m {
            return None;
        }
        let path = omp_unchecked(d, &columns[j], steps + 1, cfg);
        let norms = &path.residual_norms;
        (norms.len() > steps + 1).then(|| norms[steps].powi(2) - norms[steps + 1].powi(2))
    };

    let mut steps = vec![0usize; n];
    let mut heap: BinaryHeap<Gain> = (0..n)
        .filter_map(|j| next_gain(j, 0).map(|value| Gain { value, col: j }))
        .collect();
    let mut spent = 0;
    while spent < total {
        let Some(Gain { col, .. }) = heap.pop() else {
            break;
        };
        steps[col] += 1;
        spent += 1;
        if let Some(value) = next_gain(col, steps[col]) {
            heap.push(Gain { value, col });
        }
    }
    column_stage_code(d, x, &steps, cfg).map(|a| {
        SparseCoeffMatrix::from_columns(m, total, (0..n).map(|j| a.column_vector(j)).collect())
            .expect("spent nonzeros never exceed the budget")
    })
}
