//! Patch-based image denoising with a learned or fixed dictionary.
//!
//! Every overlapping patch has its mean removed before coding and added
//! back afterwards, so the sparse budget is spent on texture only and a
//! patch left without coefficients still reproduces its local brightness.

use crate::baselines::{ksvd_pk_learn, overcomplete_dct_dictionary, BaselineConfig};
use crate::error::{Error, Result};
use crate::learner::{gdl_learn, GdlConfig, RunHistory};
use crate::matrix::{DenseMatrix, SparseCoeffMatrix};
use crate::omp::{global_budget_code, OmpConfig};
use crate::pipeline::{extract_patches, reconstruct_from_patches, GrayImage, PatchGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DenoiseMethod {
    /// Dictionary learned under the global budget.
    Gdl,
    /// K-SVD with `k` atoms per patch.
    Ksvd,
    /// Fixed overcomplete DCT, patches coded under the global budget.
    Dct,
}

impl DenoiseMethod {
    pub fn name(self) -> &'static str {
        match self {
            DenoiseMethod::Gdl => "gdl",
            DenoiseMethod::Ksvd => "ksvd",
            DenoiseMethod::Dct => "dct",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DenoiseConfig {
    pub method: DenoiseMethod,
    pub patch_side: usize,
    pub stride: usize,
    pub atoms: usize,
    /// Global budget, used by `Gdl` and `Dct`.
    pub budget: usize,
    /// Per-patch sparsity, used by `Ksvd`.
    pub k_per_patch: usize,
    pub iters: usize,
    pub seed: u64,
}

impl DenoiseConfig {
    pub fn new(method: DenoiseMethod, seed: u64) -> Self {
        Self {
            method,
            patch_side: 8,
            stride: 1,
            atoms: 256,
            budget: 15_000,
            k_per_patch: 1,
            iters: 10,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.patch_side == 0 || self.stride == 0 {
            return Err(Error::InvalidConfig(
                "patch side and stride must be >= 1".into(),
            ));
        }
        if self.atoms == 0 || self.iters == 0 {
            return Err(Error::InvalidConfig("atoms and iters must be >= 1".into()));
        }
        if self.method == DenoiseMethod::Dct {
            let q = dct_atoms_per_dim(self.atoms);
            if q * q != self.atoms || q < self.patch_side {
                return Err(Error::InvalidConfig(format!(
                    "DCT needs a square atom count of at least {}, got {}",
                    self.patch_side * self.patch_side,
                    self.atoms
                )));
            }
        }
        Ok(())
    }
}

fn dct_atoms_per_dim(atoms: usize) -> usize {
    let mut q = (atoms as f64).sqrt() as usize;
    while q * q > atoms {
        q -= 1;
    }
    while (q + 1) * (q + 1) <= atoms {
        q += 1;
    }
    q
}

#[derive(Debug, Clone)]
pub struct DenoiseOutput {
    /// Patch-averaged estimate, not clipped.
    pub reconstructed: GrayImage,
    pub dictionary: DenseMatrix,
    pub coefficients: SparseCoeffMatrix,
    pub grid: PatchGrid,
    /// Learner history; `None` for the fixed dictionary.
    pub history: Option<RunHistory>,
}

/// Subtracts each column's mean in place and returns the means.
pub fn remove_patch_means(patches: &mut DenseMatrix) -> Vec<f64> {
    let (d, n) = patches.shape();
    let mut means = vec![0.0; n];
    for r in 0..d {
        for (j, m) in patches.row(r).iter().zip(means.iter_mut()) {
            *m += j;
        }
    }
    means.iter_mut().for_each(|m| *m /= d as f64);
    let data: Vec<f64> = patches
        .as_slice()
        .iter()
        .enumerate()
        .map(|(i, v)| v - means[i % n])
        .collect();
    *patches = DenseMatrix::new(d, n, data).expect("centering keeps values finite");
    means
}

/// Denoises `noisy` by sparse coding its overlapping patches.
pub fn denoise(noisy: &GrayImage, cfg: &DenoiseConfig) -> Result<DenoiseOutput> {
    cfg.validate()?;
    let (mut x, grid) = extract_patches(noisy, cfg.patch_side, cfg.stride)?;
    let means = remove_patch_means(&mut x);
    let (dictionary, coefficients, history) = match cfg.method {
        DenoiseMethod::Gdl => {
            let gcfg = GdlConfig::new(cfg.atoms, cfg.budget, cfg.seed).with_max_iters(cfg.iters);
            let model = gdl_learn(&x, &gcfg, None)?;
            (model.dictionary, model.coefficients, Some(model.history))
        }
        DenoiseMethod::Ksvd => {
            let bcfg = BaselineConfig::new(cfg.atoms, cfg.k_per_patch, cfg.iters, cfg.seed);
            let model = ksvd_pk_learn(&x, &bcfg, None)?;
            (model.dictionary, model.coefficients, Some(model.history))
        }
        DenoiseMethod::Dct => {
            let d = overcomplete_dct_dictionary(cfg.patch_side, dct_atoms_per_dim(cfg.atoms))?;
            let a = global_budget_code(&d, &x, cfg.budget, &OmpConfig::default())?;
            (d, a, None)
        }
    };
    let approx = dictionary.mul_sparse(&coefficients)?;
    let n = approx.cols();
    let data: Vec<f64> = approx
        .as_slice()
        .iter()
        .enumerate()
        .map(|(i, v)| v + means[i % n])
        .collect();
    let approx = DenseMatrix::new(approx.rows(), n, data)?;
    let reconstructed = reconstruct_from_patches(&approx, &grid, Some(noisy))?;
    Ok(DenoiseOutput {
        reconstructed,
        dictionary,
        coefficients,
        grid,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::psnr;
    use crate::pipeline::{apply_noise, NoiseSpec};

    fn scene(h: usize, w: usize) -> GrayImage {
        GrayImage::from_fn(h, w, |r, c| {
            let (y, x) = (r as f64, c as f64);
            let disc = if (y - 20.0).powi(2) + (x - 22.0).powi(2) < 100.0 {
                70.0
            } else {
                0.0
            };
            90.0 + 40.0 * (y / 9.0).sin() * (x / 13.0).cos() + disc
        })
    }

    #[test]
    fn centering_round_trip() {
        let mut m = DenseMatrix::from_fn(3, 2, |r, c| (r * 2 + c) as f64);
        let means = remove_patch_means(&mut m);
        assert_eq!(means, vec![2.0, 3.0]);
        assert_eq!(m.column(0), vec![-2.0, 0.0, 2.0]);
    }

    #[test]
    fn zero_budget_gives_patch_mean_smoothing() {
        let img = scene(24, 24);
        let mut cfg = DenoiseConfig::new(DenoiseMethod::Dct, 1);
        cfg.budget = 0;
        let out = denoise(&img, &cfg).unwrap();
        assert_eq!(out.coefficients.nnz(), 0);
        assert!(out.history.is_none());
        let flat = GrayImage::filled(24, 24, 77.0);
        let out = denoise(&flat, &cfg).unwrap();
        for v in out.reconstructed.pixels() {
            assert!((v - 77.0).abs() < 1e-9);
        }
    }

    #[test]
    fn methods_improve_psnr_on_small_scene() {
        let clean = scene(40, 40);
        let noisy = apply_noise(
            &clean,
            &NoiseSpec::HomogeneousGaussianPlusSaltPepper {
                sigma: 20.0,
                p: 0.0,
            },
            3,
        );
        let base = psnr(&clean, &noisy).unwrap();
        for method in [DenoiseMethod::Gdl, DenoiseMethod::Ksvd, DenoiseMethod::Dct] {
            let mut cfg = DenoiseConfig::new(method, 5);
            cfg.atoms = 64;
            cfg.budget = 2000;
            cfg.iters = 3;
            let out = denoise(&noisy, &cfg).unwrap();
            let got = psnr(&clean, &out.reconstructed).unwrap();
            assert!(got > base, "{}: {got} <= {base}", method.name());
            assert!(out.coefficients.nnz() <= cfg.budget.max(cfg.k_per_patch * out.grid.len()));
        }
    }

    #[test]
    fn dct_atom_count_must_be_square() {
        let mut cfg = DenoiseConfig::new(DenoiseMethod::Dct, 0);
        cfg.atoms = 200;
        assert!(cfg.validate().is_err());
        cfg.atoms = 49;
        assert!(cfg.validate().is_err());
        cfg.atoms = 81;
        assert!(cfg.validate().is_ok());
    }
}
