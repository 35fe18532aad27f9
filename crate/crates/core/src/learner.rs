//! Dictionary learning under a global sparsity budget.
//!
//! Minimises `||X - D A||_F^2` subject to `nnz(A) <= K` by alternating
//! two stages, each of which keeps the budget and never increases the
//! objective:
//!
//! * column stage: every signal is re-coded by OMP with as many atoms as
//!   its column currently holds, so nonzeros can move between rows;
//! * row stage: every atom and its coefficient row are refitted as a sparse
//!   rank-1 approximation of the residual with that atom restored, keeping
//!   the row's nonzero count, so nonzeros can move between columns.
//!
//! Together the two stages let the per-signal sparsities drift wherever
//! the data needs them while the total stays fixed.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::linalg;
use crate::matrix::{normalize_columns, DenseMatrix, SparseCoeffMatrix, SparseVector};
use crate::metrics::{dictionary_recovery_rate, representation_error, RECOVERY_THRESHOLD};
use crate::omp::{
    check_unit_columns, least_squares_on_support, omp_unchecked, residual_norm_sq, OmpConfig,
};
use crate::pipeline::rng::{keys, SeededRng};
use crate::pipeline::synthetic::nonzero_normal;
use crate::rank1::{sparse_rank1_update, AtomResidual, SparsePcaConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GdlConfig {
    /// Number of atoms `m`.
    pub atoms: usize,
    /// Global nonzero budget `K`.
    pub budget: usize,
    pub max_iters: usize,
    /// Stop once an iteration lowers the objective by less than this
    /// fraction.
    pub objective_tol: f64,
    pub seed: u64,
    pub omp: OmpConfig,
    pub spca: SparsePcaConfig,
    /// After each coding stage, give nonzeros that early-stopped OMP left
    /// unused to the worst-represented signals.
    pub recycle_spare_budget: bool,
}

impl GdlConfig {
    pub fn new(atoms: usize, budget: usize, seed: u64) -> Self {
        Self {
            atoms,
            budget,
            max_iters: 100,
            objective_tol: 1e-6,
            seed,
            omp: OmpConfig::default(),
            spca: SparsePcaConfig::default(),
            recycle_spare_budget: true,
        }
    }

    pub fn with_max_iters(mut self, iters: usize) -> Self {
        self.max_iters = iters;
        self
    }

    pub fn with_objective_tol(mut self, tol: f64) -> Self {
        self.objective_tol = tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.atoms == 0 {
            return Err(Error::InvalidConfig("need at least one atom".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be >= 1".into()));
        }
        if !(self.objective_tol >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "objective_tol {} must be >= 0",
                self.objective_tol
            )));
        }
        self.omp.validate()?;
        self.spca.validate()
    }
}

/// One row of a learner's history.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    /// 1-based.
    pub iteration: usize,
    /// Objective after the coding stage of this iteration.
    pub coding_objective: f64,
    /// Objective at the end of the iteration.
    pub objective: f64,
    pub coding_nnz: usize,
    pub nnz: usize,
    pub seconds: f64,
    pub re: Option<f64>,
    pub dr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunHistory {
    /// Objective of the initial `(D, A)`.
    pub initial_objective: f64,
    pub records: Vec<IterationRecord>,
    /// Stages after which `nnz(A) > K` or the row and column counts
    /// disagreed with `nnz(A)`.
    pub bookkeeping_violations: usize,
}

impl RunHistory {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Initial objective followed by the objective after every stage.
    pub fn stage_objectives(&self) -> Vec<f64> {
        let mut out = vec![self.initial_objective];
        for r in &self.records {
            out.push(r.coding_objective);
            out.push(r.objective);
        }
        out
    }

    pub fn last(&self) -> Option<&IterationRecord> {
        self.records.last()
    }

    /// CSV with header. Wall time is written only when `timing` is set,
    /// so untimed output is reproducible byte for byte.
    pub fn to_csv(&self, timing: bool) -> String {
        let mut out = String::from(
            "iteration,objective,coding_objective,nnz,coding_nnz,re,dr,wall_seconds\n",
        );
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.records {
            let secs = if timing {
                r.seconds.to_string()
            } else {
                String::new()
            };
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                r.iteration,
                r.objective,
                r.coding_objective,
                r.nnz,
                r.coding_nnz,
                opt(r.re),
                opt(r.dr),
                secs
            ));
        }
        out
    }
}

/// Generating dictionary and clean signals, for per-iteration RE and DR.
#[derive(Debug, Clone, Copy)]
pub struct GroundTruth<'a> {
    pub dictionary: &'a DenseMatrix,
    pub clean: &'a DenseMatrix,
}

impl GroundTruth<'_> {
    pub(crate) fn evaluate(&self, d: &DenseMatrix, a: &SparseCoeffMatrix) -> Result<(f64, f64)> {
        let re = representation_error(self.clean, &d.mul_sparse(a)?)?;
        let dr = dictionary_recovery_rate(self.dictionary, d, RECOVERY_THRESHOLD)?;
        Ok((re, dr))
    }
}

/// Output of any of the learners.
#[derive(Debug, Clone)]
pub struct LearnedModel {
    pub dictionary: DenseMatrix,
    pub coefficients: SparseCoeffMatrix,
    pub history: RunHistory,
}

/// `||X - D A||_F^2`
pub fn objective(x: &DenseMatrix, d: &DenseMatrix, a: &SparseCoeffMatrix) -> Result<f64> {
    Ok(residual(x, d, a)?.frobenius_norm_sq())
}

/// `X - D A`
pub fn residual(x: &DenseMatrix, d: &DenseMatrix, a: &SparseCoeffMatrix) -> Result<DenseMatrix> {
    if d.rows() != x.rows() || a.cols() != x.cols() || a.rows() != d.cols() {
        return Err(Error::DimensionMismatch(format!(
            "X {:?}, D {:?}, A {}x{}",
            x.shape(),
            d.shape(),
            a.rows(),
            a.cols()
        )));
    }
    x.sub(&d.mul_sparse(a)?)
}

/// `m` distinct nonzero training signals drawn uniformly, normalised.
///
/// With fewer usable signals than atoms the remaining atoms are random
/// Gaussian directions.
pub fn init_dictionary_from_samples(
    x: &DenseMatrix,
    atoms: usize,
    seed: u64,
) -> Result<DenseMatrix> {
    let mut rng = SeededRng::new(seed).substream(keys::DICTIONARY);
    let n = x.cols();
    let order = rng.sample_indices(n, n);
    let mut picked = Vec::with_capacity(atoms);
    for j in order {
        if picked.len() == atoms {
            break;
        }
        if x.column_norm_sq(j).sqrt() >= crate::matrix::ZERO_COLUMN_TOL {
            picked.push(x.column(j));
        }
    }
    if picked.is_empty() {
        return Err(Error::ZeroColumn(0));
    }
    while picked.len() < atoms {
        picked.push((0..x.rows()).map(|_| rng.normal()).collect());
    }
    normalize_columns(&DenseMatrix::from_columns(x.rows(), &picked)?)
}

/// Initial `(D, A)`: sampled signals as atoms, and exactly `K` standard
/// normal coefficients at uniformly random distinct positions.
pub fn gdl_init(x: &DenseMatrix, cfg: &GdlConfig) -> Result<(DenseMatrix, SparseCoeffMatrix)> {
    cfg.validate()?;
    let (m, n) = (cfg.atoms, x.cols());
    if cfg.budget > m * n {
        return Err(Error::BudgetTooLarge {
            budget: cfg.budget,
            capacity: m * n,
        });
    }
    let d = init_dictionary_from_samples(x, m, cfg.seed)?;
    let mut rng = SeededRng::new(cfg.seed).substream(keys::COEFFICIENTS);
    let slots = rng.sample_indices(m * n, cfg.budget);
    let trip: Vec<_> = slots
        .into_iter()
        .map(|s| (s / n, s % n, nonzero_normal(&mut rng)))
        .collect();
    let a = SparseCoeffMatrix::from_triplets(m, n, cfg.budget, trip)?;
    Ok((d, a))
}

/// Re-codes every signal with its current nonzero count as budget.
///
/// A column keeps the least-squares refit of its previous support when
/// that beats the OMP solution, so the objective cannot increase.
pub fn column_stage(
    x: &DenseMatrix,
    d: &DenseMatrix,
    a: &SparseCoeffMatrix,
    cfg: &OmpConfig,
) -> Result<SparseCoeffMatrix> {
    if d.rows() != x.rows() || a.cols() != x.cols() || a.rows() != d.cols() {
        return Err(Error::DimensionMismatch(
            "column stage operands disagree".into(),
        ));
    }
    check_unit_columns(d)?;
    let mut signal = vec![0.0; x.rows()];
    let mut cols = Vec::with_capacity(x.cols());
    for j in 0..x.cols() {
        let budget = a.column(j).len();
        if budget == 0 {
            cols.push(SparseVector::empty(d.cols()));
            continue;
        }
        x.column_into(j, &mut signal);
        let fresh = omp_unchecked(d, &signal, budget, cfg).coefficients;
        let support: Vec<usize> = a.column(j).iter().map(|e| e.0).collect();
        let refit = least_squares_on_support(d, &signal, &support);
        let keep_refit =
            residual_norm_sq(d, &signal, &refit) < residual_norm_sq(d, &signal, &fresh);
        cols.push(if keep_refit { refit } else { fresh });
    }
    SparseCoeffMatrix::from_columns(d.cols(), a.budget(), cols)
}

/// Hands nonzeros that are inside the budget but unused back to the
/// signals with the largest residuals, one extra atom each. A signal
/// keeps its old code unless the extra atom lowers its residual.
pub fn spend_spare_budget(
    x: &DenseMatrix,
    d: &DenseMatrix,
    a: &SparseCoeffMatrix,
    cfg: &OmpConfig,
) -> Result<SparseCoeffMatrix> {
    let spare = a.budget().saturating_sub(a.nnz());
    if spare == 0 {
        return Ok(a.clone());
    }
    let r = residual(x, d, a)?;
    let norms = r.column_norms();
    let cap = d.cols().min(d.rows());
    let mut order: Vec<usize> = (0..x.cols())
        .filter(|&j| a.column(j).len() < cap && norms[j] > 0.0)
        .collect();
    order.sort_by(|&p, &q| norms[q].total_cmp(&norms[p]).then(p.cmp(&q)));
    let mut out = a.clone();
    let mut signal = vec![0.0; x.rows()];
    let mut granted = 0;
    for j in order {
        if granted == spare {
            break;
        }
        x.column_into(j, &mut signal);
        let code = omp_unchecked(d, &signal, a.column(j).len() + 1, cfg).coefficients;
        if code.nnz() > a.column(j).len()
            && residual_norm_sq(d, &signal, &code) < norms[j] * norms[j]
        {
            granted += code.nnz() - a.column(j).len();
            out.set_column(j, &code)?;
        }
    }
    Ok(out)
}

/// Result of [`row_stage_traced`].
#[derive(Debug, Clone)]
pub struct RowStageOutcome {
    pub dictionary: DenseMatrix,
    pub coefficients: SparseCoeffMatrix,
    /// Objective before the stage.
    pub initial_objective: f64,
    /// Objective after each atom update (tracked incrementally).
    pub atom_objectives: Vec<f64>,
    /// Atoms replaced because their rows were empty or degenerate.
    pub reseeded: Vec<usize>,
}

/// Refits every atom together with its coefficient row.
pub fn row_stage(
    x: &DenseMatrix,
    d: &DenseMatrix,
    a: &SparseCoeffMatrix,
    cfg: &SparsePcaConfig,
) -> Result<(DenseMatrix, SparseCoeffMatrix)> {
    let out = row_stage_traced(x, d, a, cfg)?;
    Ok((out.dictionary, out.coefficients))
}

/// [`row_stage`] that also reports the objective after every atom.
pub fn row_stage_traced(
    x: &DenseMatrix,
    d: &DenseMatrix,
    a: &SparseCoeffMatrix,
    cfg: &SparsePcaConfig,
) -> Result<RowStageOutcome> {
    cfg.validate()?;
    let mut r = residual(x, d, a)?;
    let mut r_norm = r.frobenius_norm_sq();
    let initial_objective = r_norm;
    let mut dict = d.clone();
    let mut rows = a.row_vectors();
    let mut atom_objectives = Vec::with_capacity(d.cols());
    let mut reseeded = Vec::new();
    let mut reseed_used = vec![false; x.cols()];

    for i in 0..d.cols() {
        let k = rows[i].nnz();
        let old_atom = dict.column(i);
        let update = if k == 0 {
            None
        } else {
            let op = AtomResidual::new(&r, r_norm, &old_atom, &rows[i]);
            match sparse_rank1_update(&op, k, Some(&rows[i]), cfg) {
                Ok(f) => Some((f.atom, f.coefficients)),
                Err(Error::ZeroMatrix | Error::DegenerateDirection(_)) => {
                    Some((old_atom.clone(), SparseVector::empty(x.cols())))
                }
                Err(e) => return Err(e),
            }
        };

        if let Some((new_atom, new_row)) = update {
            let mut touched: Vec<usize> = rows[i]
                .indices()
                .iter()
                .chain(new_row.indices())
                .copied()
                .collect();
            touched.sort_unstable();
            touched.dedup();
            let before: f64 = touched.iter().map(|&j| r.column_norm_sq(j)).sum();
            let mut cols_after = Vec::with_capacity(touched.len());
            for &j in &touched {
                let mut col = r.column(j);
                linalg::axpy(rows[i].get(j), &old_atom, &mut col);
                linalg::axpy(-new_row.get(j), &new_atom, &mut col);
                cols_after.push(col);
            }
            let after: f64 = cols_after.iter().map(|c| linalg::norm_sq(c)).sum();
            // the solver guarantees descent up to rounding; reject anything else
            if after <= before + 1e-12 * before.max(f64::MIN_POSITIVE) {
                for (&j, col) in touched.iter().zip(&cols_after) {
                    r.set_column(j, col);
                }
                r_norm = (r_norm - before + after).max(0.0);
                dict.set_column(i, &new_atom);
                rows[i] = new_row;
            }
        }

        if rows[i].is_empty() {
            if let Some(atom) = reseed_atom(x, &r, &mut reseed_used) {
                dict.set_column(i, &atom);
                reseeded.push(i);
            }
        }
        atom_objectives.push(r_norm);
    }

    let coefficients = SparseCoeffMatrix::from_rows(x.cols(), a.budget(), &rows)?;
    Ok(RowStageOutcome {
        dictionary: dict,
        coefficients,
        initial_objective,
        atom_objectives,
        reseeded,
    })
}

/// The not-yet-used training signal with the largest residual, normalised.
fn reseed_atom(x: &DenseMatrix, r: &DenseMatrix, used: &mut [bool]) -> Option<Vec<f64>> {
    let norms = r.column_norms();
    let mut best: Option<usize> = None;
    for j in 0..x.cols() {
        if used[j] || x.column_norm_sq(j).sqrt() < crate::matrix::ZERO_COLUMN_TOL {
            continue;
        }
        if best.is_none_or(|b| norms[j] > norms[b]) {
            best = Some(j);
        }
    }
    let j = best?;
    used[j] = true;
    let col = x.column(j);
    let n = linalg::norm(&col);
    Some(col.into_iter().map(|v| v / n).collect())
}

pub(crate) fn bookkeeping_ok(a: &SparseCoeffMatrix) -> bool {
    let by_col: usize = a.nnz_per_column().iter().sum();
    let by_row: usize = a.nnz_per_row().iter().sum();
    a.nnz() <= a.budget() && by_col == a.nnz() && by_row == a.nnz()
}

/// Runs the alternating learner from [`gdl_init`].
pub fn gdl_learn(
    x: &DenseMatrix,
    cfg: &GdlConfig,
    truth: Option<GroundTruth<'_>>,
) -> Result<LearnedModel> {
    let (d, a) = gdl_init(x, cfg)?;
    gdl_learn_from(x, d, a, cfg, truth)
}

/// Runs the alternating learner from a given starting point.
pub fn gdl_learn_from(
    x: &DenseMatrix,
    mut d: DenseMatrix,
    mut a: SparseCoeffMatrix,
    cfg: &GdlConfig,
    truth: Option<GroundTruth<'_>>,
) -> Result<LearnedModel> {
    cfg.validate()?;
    if a.budget() != cfg.budget {
        return Err(Error::InvalidConfig(format!(
            "coefficients carry budget {}, configuration says {}",
            a.budget(),
            cfg.budget
        )));
    }
    let mut history = RunHistory {
        initial_objective: objective(x, &d, &a)?,
        ..Default::default()
    };
    let mut previous = history.initial_objective;
    for iteration in 1..=cfg.max_iters {
        let start = Instant::now();
        a = column_stage(x, &d, &a, &cfg.omp)?;
        if cfg.recycle_spare_budget {
            a = spend_spare_budget(x, &d, &a, &cfg.omp)?;
        }
        let coding_objective = objective(x, &d, &a)?;
        let coding_nnz = a.nnz();
        history.bookkeeping_violations += usize::from(!bookkeeping_ok(&a));

        (d, a) = row_stage(x, &d, &a, &cfg.spca)?;
        let current = objective(x, &d, &a)?;
        history.bookkeeping_violations += usize::from(!bookkeeping_ok(&a));
        let seconds = start.elapsed().as_secs_f64();

        let (re, dr) = match &truth {
            Some(t) => {
                let (re, dr) = t.evaluate(&d, &a)?;
                (Some(re), Some(dr))
            }
            None => (None, None),
        };
        history.records.push(IterationRecord {
            iteration,
            coding_objective,
            objective: current,
            coding_nnz,
            nnz: a.nnz(),
            seconds,
            re,
            dr,
        });
        let stalled = previous - current < cfg.objective_tol * previous;
        previous = current;
        if current == 0.0 || stalled {
            break;
        }
    }
    Ok(LearnedModel {
        dictionary: d,
        coefficients: a,
        history,
    })
}
