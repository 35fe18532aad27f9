//! Synthetic signals: random unit-norm generating dictionary, sparse random
//! coefficients, optional homogeneous Gaussian noise.

use super::rng::{keys, SeededRng};
use crate::error::{Error, Result};
use crate::matrix::{normalize_columns, DenseMatrix, SparseCoeffMatrix, SparseVector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SparsityMode {
    /// Every signal combines exactly this many atoms.
    PerColumn(usize),
    /// This many nonzeros placed anywhere in the coefficient matrix.
    TotalNnz(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSpec {
    pub d: usize,
    pub m: usize,
    pub n: usize,
    pub sparsity: SparsityMode,
    pub noise_sigma: f64,
}

impl SyntheticSpec {
    /// 1500 signals of dimension 20 over 50 atoms, 3 atoms per signal.
    pub fn per_column_default(noise_sigma: f64) -> Self {
        Self {
            d: 20,
            m: 50,
            n: 1500,
            sparsity: SparsityMode::PerColumn(3),
            noise_sigma,
        }
    }

    /// 1500 signals of dimension 20 over 50 atoms, 4500 nonzeros overall.
    pub fn total_nnz_default(noise_sigma: f64) -> Self {
        Self {
            d: 20,
            m: 50,
            n: 1500,
            sparsity: SparsityMode::TotalNnz(4500),
            noise_sigma,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.m == 0 || self.n == 0 {
            return Err(Error::InvalidConfig("d, m and n must be positive".into()));
        }
        match self.sparsity {
            SparsityMode::PerColumn(k) if k > self.m => {
                return Err(Error::InvalidConfig(format!(
                    "{k} atoms per signal exceeds m = {}",
                    self.m
                )))
            }
            SparsityMode::TotalNnz(k) if k > self.m * self.n => {
                return Err(Error::BudgetTooLarge {
                    budget: k,
                    capacity: self.m * self.n,
                })
            }
            _ => {}
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "noise sigma {} must be >= 0",
                self.noise_sigma
            )));
        }
        Ok(())
    }

    pub fn total_nnz(&self) -> usize {
        match self.sparsity {
            SparsityMode::PerColumn(k) => k * self.n,
            SparsityMode::TotalNnz(k) => k,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub dictionary: DenseMatrix,
    pub coefficients: SparseCoeffMatrix,
    pub clean: DenseMatrix,
    pub noisy: DenseMatrix,
}

pub fn gen_synthetic(spec: &SyntheticSpec, seed: u64) -> Result<SyntheticData> {
    spec.validate()?;
    let root = SeededRng::new(seed);
    let SyntheticSpec { d, m, n, .. } = *spec;

    let mut rng = root.substream(keys::DICTIONARY);
    let raw = DenseMatrix::from_fn(d, m, |_, _| rng.normal());
    let dictionary = normalize_columns(&raw)?;

    let mut rng = root.substream(keys::COEFFICIENTS);
    let coefficients = match spec.sparsity {
        SparsityMode::PerColumn(k) => {
            let cols = (0..n)
                .map(|_| {
                    let rows = rng.sample_indices(m, k);
                    let pairs = rows
                        .into_iter()
                        .map(|r| (r, nonzero_normal(&mut rng)))
                        .collect();
                    SparseVector::from_pairs(m, pairs)
                })
                .collect::<Result<Vec<_>>>()?;
            SparseCoeffMatrix::from_columns(m, k * n, cols)?
        }
        SparsityMode::TotalNnz(k) => {
            let slots = rng.sample_indices(m * n, k);
            let trip: Vec<_> = slots
                .into_iter()
                .map(|s| (s / n, s % n, nonzero_normal(&mut rng)))
                .collect();
            SparseCoeffMatrix::from_triplets(m, n, k, trip)?
        }
    };

    let clean = dictionary.mul_sparse(&coefficients)?;
    let noisy = if spec.noise_sigma > 0.0 {
        let mut rng = root.substream(keys::SIGNAL_NOISE);
        let sigma = spec.noise_sigma;
        DenseMatrix::from_fn(d, n, |i, j| clean.get(i, j) + sigma * rng.normal())
    } else {
        clean.clone()
    };
    Ok(SyntheticData {
        dictionary,
        coefficients,
        clean,
        noisy,
    })
}

/// Standard normal draw, redrawn on the (measure-zero) exact zero so that
/// nonzero counts are exact.
pub(crate) fn nonzero_normal(rng: &mut SeededRng) -> f64 {
    loop {
        let v = rng.normal();
        if v != 0.0 {
            return v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_copies_clean() {
        let data = gen_synthetic(&SyntheticSpec::per_column_default(0.0), 1).unwrap();
        assert_eq!(data.noisy, data.clean);
    }

    #[test]
    fn per_column_three() {
        let data = gen_synthetic(&SyntheticSpec::per_column_default(0.0), 2).unwrap();
        assert!(data.coefficients.nnz_per_column().iter().all(|&c| c == 3));
        assert_eq!(data.coefficients.nnz(), 4500);
        for norm in data.dictionary.column_norms() {
            assert!((norm - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn total_nnz_4500() {
        let data = gen_synthetic(&SyntheticSpec::total_nnz_default(0.0), 3).unwrap();
        assert_eq!(data.coefficients.nnz(), 4500);
        let counts = data.coefficients.nnz_per_column();
        assert!(counts.iter().min() != counts.iter().max());
    }

    #[test]
    fn noise_level_matches_sigma() {
        for sigma in [0.01, 0.05, 0.1] {
            let data = gen_synthetic(&SyntheticSpec::per_column_default(sigma), 4).unwrap();
            let diff = data.noisy.sub(&data.clean).unwrap();
            let var = diff.frobenius_norm_sq() / (20.0 * 1500.0);
            assert!(
                (var / (sigma * sigma) - 1.0).abs() < 0.05,
                "sigma {sigma}: var {var}"
            );
        }
    }

    #[test]
    fn deterministic() {
        let spec = SyntheticSpec::total_nnz_default(0.05);
        let a = gen_synthetic(&spec, 99).unwrap();
        let b = gen_synthetic(&spec, 99).unwrap();
        assert_eq!(a.noisy, b.noisy);
        assert_eq!(a.coefficients, b.coefficients);
    }
}
