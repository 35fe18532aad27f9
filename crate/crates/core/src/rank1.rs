//! Sparse rank-1 approximation of a residual matrix.
//!
//! Minimising `||E - d a^T||_F^2` over unit `d` and `a` with at most `k`
//! nonzeros reduces to the sparse PCA problem
//!
//! ```text
//! max_w  w^T E^T E w   s.t.  ||w||_2 = 1,  ||w||_0 <= k
//! ```
//!
//! followed by `d = E w / ||E w||`, `a = ||E w|| w`, since for any unit `w`
//! the identity `||E - E w w^T||_F^2 = ||E||_F^2 - ||E w||^2` holds. The
//! sparse PCA problem is solved by truncated power iteration, which is
//! monotone in the objective and warm-startable from the current row.

use crate::error::{Error, Result};
use crate::linalg;
use crate::matrix::{DenseMatrix, SparseVector};

/// Cap on the number of supports [`sparse_pca_oracle`] will enumerate.
pub const ORACLE_SUPPORT_CAP: u128 = 1_000_000;

const ZERO_NORM: f64 = 1e-12;

/// A residual matrix accessed only through products, so the learner can
/// work with `E_i = R + d_i a_i^T` without materialising it.
pub trait ResidualOperator {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    /// `E w`
    fn apply_sparse(&self, w: &SparseVector) -> Vec<f64>;
    /// `E^T u`
    fn apply_transpose(&self, u: &[f64]) -> Vec<f64>;
    fn frobenius_norm_sq(&self) -> f64;
    fn column_norms_sq(&self) -> Vec<f64>;
}

impl ResidualOperator for DenseMatrix {
    fn nrows(&self) -> usize {
        self.rows()
    }

    fn ncols(&self) -> usize {
        self.cols()
    }

    fn apply_sparse(&self, w: &SparseVector) -> Vec<f64> {
        let mut out = vec![0.0; self.rows()];
        for (j, v) in w.iter() {
            for (i, o) in out.iter_mut().enumerate() {
                *o += self.get(i, j) * v;
            }
        }
        out
    }

    fn apply_transpose(&self, u: &[f64]) -> Vec<f64> {
        self.tr_mul_vec(u)
    }

    fn frobenius_norm_sq(&self) -> f64 {
        DenseMatrix::frobenius_norm_sq(self)
    }

    fn column_norms_sq(&self) -> Vec<f64> {
        self.column_norms().into_iter().map(|v| v * v).collect()
    }
}

/// `E = R + atom * row^T`: the residual with one atom's contribution
/// added back.
#[derive(Debug, Clone, Copy)]
pub struct AtomResidual<'a> {
    residual: &'a DenseMatrix,
    residual_norm_sq: f64,
    atom: &'a [f64],
    row: &'a SparseVector,
}

impl<'a> AtomResidual<'a> {
    /// `residual_norm_sq` must be `||residual||_F^2`.
    pub fn new(
        residual: &'a DenseMatrix,
        residual_norm_sq: f64,
        atom: &'a [f64],
        row: &'a SparseVector,
    ) -> Self {
        debug_assert_eq!(atom.len(), residual.rows());
        debug_assert_eq!(row.dim(), residual.cols());
        Self {
            residual,
            residual_norm_sq,
            atom,
            row,
        }
    }

    fn column(&self, j: usize) -> Vec<f64> {
        let a = self.row.get(j);
        (0..self.residual.rows())
            .map(|i| self.residual.get(i, j) + self.atom[i] * a)
            .collect()
    }
}

impl ResidualOperator for AtomResidual<'_> {
    fn nrows(&self) -> usize {
        self.residual.rows()
    }

    fn ncols(&self) -> usize {
        self.residual.cols()
    }

    fn apply_sparse(&self, w: &SparseVector) -> Vec<f64> {
        let mut out = self.residual.apply_sparse(w);
        let s: f64 = w.iter().map(|(j, v)| self.row.get(j) * v).sum();
        linalg::axpy(s, self.atom, &mut out);
        out
    }

    fn apply_transpose(&self, u: &[f64]) -> Vec<f64> {
        let mut out = self.residual.tr_mul_vec(u);
        let s = linalg::dot(self.atom, u);
        for (j, a) in self.row.iter() {
            out[j] += a * s;
        }
        out
    }

    fn frobenius_norm_sq(&self) -> f64 {
        let mut total = self.residual_norm_sq;
        for &j in self.row.indices() {
            total += linalg::norm_sq(&self.column(j)) - self.residual.column_norm_sq(j);
        }
        total.max(0.0)
    }

    fn column_norms_sq(&self) -> Vec<f64> {
        let mut out = ResidualOperator::column_norms_sq(self.residual);
        for &j in self.row.indices() {
            out[j] = linalg::norm_sq(&self.column(j));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SparsePcaConfig {
    pub inner_iters: usize,
    /// Stop when the objective changes by at most `tol` relative.
    pub tol: f64,
    /// Extra starts from the top single coordinates of `E^T E`'s diagonal,
    /// tried only when no warm start is given.
    pub restarts: usize,
}

impl Default for SparsePcaConfig {
    fn default() -> Self {
        Self {
            inner_iters: 30,
            tol: 1e-9,
            restarts: 1,
        }
    }
}

impl SparsePcaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.inner_iters == 0 {
            return Err(Error::InvalidConfig("inner_iters must be >= 1".into()));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "tol {} must be >= 0",
                self.tol
            )));
        }
        Ok(())
    }
}

/// Keeps the `k` largest-magnitude entries of `v` (ties to the smaller
/// index), dropping exact zeros.
pub fn truncate_k(v: &[f64], k: usize) -> SparseVector {
    let mut order: Vec<usize> = (0..v.len()).filter(|&i| v[i] != 0.0).collect();
    let by_magnitude = |a: &usize, b: &usize| v[*b].abs().total_cmp(&v[*a].abs()).then(a.cmp(b));
    if order.len() > k {
        if k == 0 {
            order.clear();
        } else {
            order.select_nth_unstable_by(k - 1, by_magnitude);
            order.truncate(k);
        }
    }
    let pairs = order.into_iter().map(|i| (i, v[i])).collect();
    SparseVector::from_pairs(v.len(), pairs).expect("indices are distinct")
}

/// `||E w||^2`, the sparse PCA objective.
pub fn rank1_objective<E: ResidualOperator + ?Sized>(e: &E, w: &SparseVector) -> f64 {
    linalg::norm_sq(&e.apply_sparse(w))
}

fn unit(v: SparseVector) -> Option<SparseVector> {
    let n = v.norm();
    (n > 0.0 && n.is_finite()).then(|| v.scaled(1.0 / n))
}

/// Outcome of one truncated power run.
#[derive(Debug, Clone, PartialEq)]
pub struct SparsePcaPath {
    pub w: SparseVector,
    /// `||E w||^2` of the returned `w`, the best iterate seen.
    pub objective: f64,
    /// Objective of the start vector and of every iterate.
    pub objectives: Vec<f64>,
}

fn check_k(n: usize, k: usize) -> Result<()> {
    if k == 0 || k > n {
        return Err(Error::InvalidConfig(format!(
            "sparsity {k} must lie in 1..={n}"
        )));
    }
    Ok(())
}

fn check_unit(w: &SparseVector) -> Result<()> {
    let n = w.norm();
    if (n - 1.0).abs() > 1e-8 {
        return Err(Error::NonUnitVector(n));
    }
    Ok(())
}

/// Unit `w` with at most `k` nonzeros approximately maximising `||E w||`.
pub fn sparse_pca_rank1<E: ResidualOperator + ?Sized>(
    e: &E,
    k: usize,
    w0: Option<&SparseVector>,
    cfg: &SparsePcaConfig,
) -> Result<SparseVector> {
    Ok(sparse_pca_rank1_trace(e, k, w0, cfg)?.w)
}

/// [`sparse_pca_rank1`], reporting the objective path of the best start.
pub fn sparse_pca_rank1_trace<E: ResidualOperator + ?Sized>(
    e: &E,
    k: usize,
    w0: Option<&SparseVector>,
    cfg: &SparsePcaConfig,
) -> Result<SparsePcaPath> {
    let n = e.ncols();
    check_k(n, k)?;
    cfg.validate()?;
    let total = e.frobenius_norm_sq();
    if total.sqrt() < ZERO_NORM {
        return Err(Error::ZeroMatrix);
    }
    let floor = 1e-24 * total;

    let from_warm = match w0 {
        Some(w) => {
            if w.dim() != n {
                return Err(Error::DimensionMismatch(format!(
                    "warm start of dim {} for {n} columns",
                    w.dim()
                )));
            }
            check_unit(w)?;
            let w = if w.nnz() > k {
                unit(truncate_k(&w.to_dense(), k))
            } else {
                Some(w.clone())
            };
            w.filter(|w| rank1_objective(e, w) > floor)
        }
        None => None,
    };

    // the warm start competes with a cold start on the heaviest columns;
    // single-coordinate restarts are added only without a warm start
    let warm_given = from_warm.is_some();
    let mut starts: Vec<SparseVector> = from_warm.into_iter().collect();
    let norms = e.column_norms_sq();
    let mut cold: Vec<SparseVector> = unit(truncate_k(&norms, k)).into_iter().collect();
    if !warm_given {
        cold.extend(
            truncate_k(&norms, cfg.restarts.min(n))
                .indices()
                .iter()
                .map(|&s| SparseVector::indicator(n, s, 1.0)),
        );
    }
    for w in cold {
        if !starts.contains(&w) {
            starts.push(w);
        }
    }

    let mut best: Option<SparsePcaPath> = None;
    for start in starts {
        let path = power_path(e, k, start, cfg);
        let better = match &best {
            Some(b) => path.objective > b.objective,
            None => true,
        };
        if better {
            best = Some(path);
        }
    }
    best.ok_or(Error::ZeroMatrix)
}

fn power_path<E: ResidualOperator + ?Sized>(
    e: &E,
    k: usize,
    start: SparseVector,
    cfg: &SparsePcaConfig,
) -> SparsePcaPath {
    let mut w = start;
    let mut u = e.apply_sparse(&w);
    let mut f = linalg::norm_sq(&u);
    let mut objectives = vec![f];
    let mut best = (f, w.clone());
    for _ in 0..cfg.inner_iters {
        let v = e.apply_transpose(&u);
        let Some(next) = unit(truncate_k(&v, k)) else {
            break;
        };
        let next_u = e.apply_sparse(&next);
        let next_f = linalg::norm_sq(&next_u);
        objectives.push(next_f);
        let converged = (next_f - f).abs() <= cfg.tol * next_f.max(f64::MIN_POSITIVE);
        w = next;
        u = next_u;
        f = next_f;
        if f > best.0 {
            best = (f, w.clone());
        }
        if converged {
            break;
        }
    }
    // best-seen guards against cycling when the objective plateaus
    SparsePcaPath {
        w: best.1,
        objective: best.0,
        objectives,
    }
}

fn binomial(n: usize, k: usize) -> u128 {
    (0..k as u128).fold(1u128, |acc, i| acc * (n as u128 - i) / (i + 1))
}

/// Exhaustive sparse PCA over every size-`k` support, each solved by
/// dense power iteration on the restricted `E^T E`. Ties go to the
/// lexicographically smallest support; the largest-magnitude entry of the
/// result is positive.
pub fn sparse_pca_oracle(e: &DenseMatrix, k: usize) -> Result<SparseVector> {
    let n = e.cols();
    check_k(n, k)?;
    let count = binomial(n, k);
    if count > ORACLE_SUPPORT_CAP {
        return Err(Error::TooLarge {
            count,
            cap: ORACLE_SUPPORT_CAP,
        });
    }
    let gram = e.transpose().matmul(e)?;
    let scale = gram
        .as_slice()
        .iter()
        .fold(0.0f64, |a, v| a.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    let mut best: Option<(f64, Vec<usize>, Vec<f64>)> = None;
    let mut support: Vec<usize> = (0..k).collect();
    loop {
        let sub: Vec<f64> = support
            .iter()
            .flat_map(|&a| support.iter().map(move |&b| (a, b)))
            .map(|(a, b)| gram.get(a, b))
            .collect();
        let start: Vec<f64> = (0..k).map(|i| 1.0 + 0.1 * i as f64).collect();
        let (lambda, vec) = linalg::leading_eigenpair(&sub, k, Some(&start), 1e-15, 200_000);
        if best.as_ref().is_none_or(|b| lambda > b.0 + 1e-12 * scale) {
            best = Some((lambda, support.clone(), vec));
        }
        if !next_combination(&mut support, n) {
            break;
        }
    }
    let (_, support, vec) = best.expect("at least one support");
    let mut dense = vec![0.0; n];
    for (s, v) in support.iter().zip(vec) {
        dense[*s] = v;
    }
    linalg::fix_sign(&mut dense);
    Ok(SparseVector::from_dense(&dense))
}

/// Advances `c` to the next k-combination of `0..n` in lexicographic order.
fn next_combination(c: &mut [usize], n: usize) -> bool {
    let k = c.len();
    for i in (0..k).rev() {
        if c[i] < n - k + i {
            c[i] += 1;
            for j in i + 1..k {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Unit atom and coefficient row built from a sparse PCA direction.
#[derive(Debug, Clone, PartialEq)]
pub struct Rank1Factor {
    pub atom: Vec<f64>,
    pub coefficients: SparseVector,
}

impl Rank1Factor {
    /// `||E - atom * coefficients^T||_F^2`
    pub fn residual_norm_sq<E: ResidualOperator + ?Sized>(&self, e: &E) -> f64 {
        let ea = e.apply_sparse(&self.coefficients);
        let cross = linalg::dot(&self.atom, &ea);
        let a2 = linalg::norm_sq(self.coefficients.values()) * linalg::norm_sq(&self.atom);
        (e.frobenius_norm_sq() - 2.0 * cross + a2).max(0.0)
    }
}

/// `atom = E w / ||E w||`, `coefficients = ||E w|| w`.
pub fn theorem1_transform<E: ResidualOperator + ?Sized>(
    e: &E,
    w: &SparseVector,
) -> Result<Rank1Factor> {
    if w.dim() != e.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "w of dim {} for {} columns",
            w.dim(),
            e.ncols()
        )));
    }
    check_unit(w)?;
    let ew = e.apply_sparse(w);
    let scale = linalg::norm(&ew);
    if !(scale > ZERO_NORM) {
        return Err(Error::DegenerateDirection(scale));
    }
    let atom = ew.iter().map(|v| v / scale).collect();
    Ok(Rank1Factor {
        atom,
        coefficients: w.scaled(scale),
    })
}

/// Best found `(atom, row)` with at most `k` nonzeros in the row.
///
/// With a warm start (the current row) the result is never worse than the
/// warm row's direction refitted through [`theorem1_transform`].
pub fn sparse_rank1_update<E: ResidualOperator + ?Sized>(
    e: &E,
    k: usize,
    warm: Option<&SparseVector>,
    cfg: &SparsePcaConfig,
) -> Result<Rank1Factor> {
    let warm_dir = match warm {
        Some(w) if !w.is_empty() => {
            let w = if w.nnz() > k {
                truncate_k(&w.to_dense(), k)
            } else {
                w.clone()
            };
            unit(w)
        }
        _ => None,
    };
    let w = sparse_pca_rank1(e, k, warm_dir.as_ref(), cfg)?;
    let chosen = match warm_dir {
        Some(wd) if rank1_objective(e, &wd) > rank1_objective(e, &w) => wd,
        _ => w,
    };
    theorem1_transform(e, &chosen)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::rng::seeded_rng;

    fn random(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
        let mut rng = seeded_rng(seed);
        DenseMatrix::from_fn(rows, cols, |_, _| rng.normal())
    }

    fn outer(u: &[f64], v: &[f64]) -> DenseMatrix {
        DenseMatrix::from_fn(u.len(), v.len(), |i, j| u[i] * v[j])
    }

    #[test]
    fn truncation_ties_go_to_small_index() {
        let w = truncate_k(&[1.0, -3.0, 3.0, 0.5], 2);
        assert_eq!(w.indices(), &[1, 2]);
        let w = truncate_k(&[2.0, 2.0, 2.0], 2);
        assert_eq!(w.indices(), &[0, 1]);
        assert!(truncate_k(&[0.0, 0.0], 1).is_empty());
    }

    #[test]
    fn single_column_matrix() {
        let mut e = DenseMatrix::zeros(4, 5);
        e.set_column(3, &[1.0, -2.0, 0.5, 0.0]);
        let w = sparse_pca_rank1(&e, 1, None, &SparsePcaConfig::default()).unwrap();
        assert_eq!(w.indices(), &[3]);
        assert!((w.values()[0].abs() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn exact_sparse_rank1_is_found() {
        let u = [1.0, 2.0, -1.0];
        let v = [0.0, 3.0, 0.0, -4.0, 0.0];
        let e = outer(&u, &v);
        for k in 2..=5 {
            let w = sparse_pca_rank1(&e, k, None, &SparsePcaConfig::default()).unwrap();
            let obj = rank1_objective(&e, &w);
            assert!((obj - 6.0 * 25.0).abs() < 1e-9, "k={k}: {obj}");
            let f = sparse_rank1_update(&e, k, None, &SparsePcaConfig::default()).unwrap();
            assert!(f.residual_norm_sq(&e) < 1e-9);
        }
    }

    #[test]
    fn zero_matrix_errors() {
        let e = DenseMatrix::zeros(3, 3);
        assert!(matches!(
            sparse_pca_rank1(&e, 1, None, &SparsePcaConfig::default()),
            Err(Error::ZeroMatrix)
        ));
    }

    #[test]
    fn bad_sparsity_or_warm_start() {
        let e = random(3, 4, 1);
        assert!(sparse_pca_rank1(&e, 0, None, &SparsePcaConfig::default()).is_err());
        assert!(sparse_pca_rank1(&e, 5, None, &SparsePcaConfig::default()).is_err());
        let w = SparseVector::indicator(4, 0, 2.0);
        assert!(matches!(
            sparse_pca_rank1(&e, 2, Some(&w), &SparsePcaConfig::default()),
            Err(Error::NonUnitVector(_))
        ));
    }

    #[test]
    fn power_iteration_is_monotone() {
        for seed in 0..50 {
            let e = random(8, 15, 100 + seed);
            let cfg = SparsePcaConfig {
                inner_iters: 100,
                tol: 0.0,
                restarts: 1,
            };
            let path = sparse_pca_rank1_trace(&e, 4, None, &cfg).unwrap();
            for pair in path.objectives.windows(2) {
                assert!(pair[1] >= pair[0] - 1e-12 * pair[0], "{pair:?}");
            }
            assert!(path.w.nnz() <= 4);
            assert!((path.w.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn oracle_diagonal_case() {
        // E^T E = diag(3, 1, 2)
        let e = DenseMatrix::from_fn(3, 3, |i, j| {
            if i == j {
                [3f64, 1.0, 2.0][i].sqrt()
            } else {
                0.0
            }
        });
        let w = sparse_pca_oracle(&e, 1).unwrap();
        assert_eq!(w.indices(), &[0]);
        assert!((w.values()[0] - 1.0).abs() < 1e-12);
        assert!((rank1_objective(&e, &w) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn oracle_column_norm_case() {
        let e = DenseMatrix::new(2, 3, vec![1.0, 0.0, 2.0, 0.0, 1.0, 0.0]).unwrap();
        let w = sparse_pca_oracle(&e, 1).unwrap();
        assert_eq!(w.indices(), &[2]);
        assert!((rank1_objective(&e, &w) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn oracle_unconstrained_limit_is_leading_eigenvector() {
        let e = random(5, 6, 3);
        let w = sparse_pca_oracle(&e, 6).unwrap();
        let g = e.transpose().matmul(&e).unwrap();
        let (lambda, _) = linalg::leading_eigenpair(g.as_slice(), 6, None, 1e-15, 100_000);
        assert!((rank1_objective(&e, &w) - lambda).abs() < 1e-9 * lambda);
    }

    #[test]
    fn transform_exact_factorisation() {
        let u = [3.0, 0.0, 4.0];
        let v = [1.0, 2.0, 2.0, 0.0];
        let e = outer(&u, &v);
        let w = SparseVector::from_dense(&[1.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0, 0.0]);
        let f = theorem1_transform(&e, &w).unwrap();
        for (a, b) in f.atom.iter().zip([0.6, 0.0, 0.8]) {
            assert!((a - b).abs() < 1e-14);
        }
        for (a, b) in f.coefficients.iter().zip(w.iter()) {
            assert_eq!(a.0, b.0);
            assert!((a.1 - 15.0 * b.1).abs() < 1e-12);
        }
        assert!(f.residual_norm_sq(&e) < 1e-20);
    }

    #[test]
    fn transform_degenerate() {
        let e = DenseMatrix::new(2, 2, vec![1.0, 0.0, 1.0, 0.0]).unwrap();
        let w = SparseVector::indicator(2, 1, 1.0);
        assert!(matches!(
            theorem1_transform(&e, &w),
            Err(Error::DegenerateDirection(_))
        ));
    }

    #[test]
    fn atom_residual_matches_dense() {
        let r = random(6, 9, 4);
        let atom = crate::matrix::normalize_columns(&random(6, 1, 5))
            .unwrap()
            .column(0);
        let row = SparseVector::from_pairs(9, vec![(1, 0.7), (4, -1.2), (8, 2.0)]).unwrap();
        let op = AtomResidual::new(&r, r.frobenius_norm_sq(), &atom, &row);
        let mut dense = r.clone();
        for (j, a) in row.iter() {
            dense.add_to_column(j, a, &atom);
        }
        let w = SparseVector::from_pairs(9, vec![(0, 0.3), (4, 0.5), (7, -0.2)]).unwrap();
        let u: Vec<f64> = (0..6).map(|i| i as f64 - 2.5).collect();
        let close = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12);
        assert!(close(&op.apply_sparse(&w), &dense.apply_sparse(&w)));
        assert!(close(&op.apply_transpose(&u), &dense.apply_transpose(&u)));
        assert!((op.frobenius_norm_sq() - dense.frobenius_norm_sq()).abs() < 1e-10);
        assert!(close(
            &op.column_norms_sq(),
            &ResidualOperator::column_norms_sq(&dense)
        ));
    }

    #[test]
    fn update_never_worse_than_warm_start() {
        let mut rng = seeded_rng(6);
        for seed in 0..50 {
            let e = random(6, 10, 300 + seed);
            let warm =
                SparseVector::from_pairs(10, vec![(rng.sample_indices(10, 1)[0], 1.0)]).unwrap();
            let warm_fit = theorem1_transform(&e, &warm).unwrap().residual_norm_sq(&e);
            let cfg = SparsePcaConfig {
                inner_iters: 1,
                ..Default::default()
            };
            let f = sparse_rank1_update(&e, 1, Some(&warm), &cfg).unwrap();
            assert!(f.residual_norm_sq(&e) <= warm_fit + 1e-12);
        }
    }
}
