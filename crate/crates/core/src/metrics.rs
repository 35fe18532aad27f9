//! Evaluation quantities: atom recovery, dictionary recovery rate,
//! representation error, PSNR and atom-usage maps.

use crate::error::{Error, Result};
use crate::linalg;
use crate::matrix::{DenseMatrix, SparseCoeffMatrix};
use crate::pipeline::{GrayImage, PatchGrid};

/// An atom counts as recovered when `1 - |cos|` to its nearest learned atom
/// is below this.
pub const RECOVERY_THRESHOLD: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub re: f64,
    pub dr: f64,
    pub psnr_db: Option<f64>,
    pub per_atom_distances: Vec<f64>,
}

impl MetricsReport {
    pub const CSV_HEADER: &'static str = "re,dr,psnr_db";

    pub fn csv_row(&self) -> String {
        let psnr = self.psnr_db.map(|p| p.to_string()).unwrap_or_default();
        format!("{},{},{}", self.re, self.dr, psnr)
    }
}

/// `min_c (1 - |d_true . c|)` over the columns `c` of `learned`, in `[0, 1]`.
pub fn atom_recovery_distance(d_true: &[f64], learned: &DenseMatrix) -> Result<f64> {
    if learned.cols() == 0 {
        return Err(Error::EmptyDictionary);
    }
    if d_true.len() != learned.rows() {
        return Err(Error::DimensionMismatch(format!(
            "atom of dim {} against {}-dimensional dictionary",
            d_true.len(),
            learned.rows()
        )));
    }
    let corr = learned.tr_mul_vec(d_true);
    let best = corr.iter().fold(0.0f64, |b, c| b.max(c.abs()));
    Ok((1.0 - best).clamp(0.0, 1.0))
}

/// Per-true-atom recovery distances.
pub fn recovery_distances(truth: &DenseMatrix, learned: &DenseMatrix) -> Result<Vec<f64>> {
    (0..truth.cols())
        .map(|j| atom_recovery_distance(&truth.column(j), learned))
        .collect()
}

/// Fraction of `truth`'s atoms recovered by `learned`. A learned atom may
/// serve as the nearest neighbour of several true atoms.
pub fn dictionary_recovery_rate(
    truth: &DenseMatrix,
    learned: &DenseMatrix,
    threshold: f64,
) -> Result<f64> {
    if truth.cols() == 0 {
        return Ok(0.0);
    }
    let hits = recovery_distances(truth, learned)?
        .into_iter()
        .filter(|d| *d < threshold)
        .count();
    Ok(hits as f64 / truth.cols() as f64)
}

/// Mean over signals of the residual RMS `||x_hat_i - x_i|| / sqrt(d)`.
pub fn representation_error(reference: &DenseMatrix, approx: &DenseMatrix) -> Result<f64> {
    if reference.shape() != approx.shape() {
        return Err(Error::DimensionMismatch(format!(
            "{:?} vs {:?}",
            reference.shape(),
            approx.shape()
        )));
    }
    let (d, n) = reference.shape();
    if n == 0 || d == 0 {
        return Ok(0.0);
    }
    let diff = approx.sub(reference)?;
    let total: f64 = diff.column_norms().iter().sum();
    Ok(total / (n as f64 * (d as f64).sqrt()))
}

/// `10 log10(255^2 / MSE)` in dB; `+inf` for identical images.
pub fn psnr(reference: &GrayImage, test: &GrayImage) -> Result<f64> {
    if reference.dims() != test.dims() {
        return Err(Error::DimensionMismatch(format!(
            "{:?} vs {:?}",
            reference.dims(),
            test.dims()
        )));
    }
    let n = reference.pixels().len();
    let sse: f64 = reference
        .pixels()
        .iter()
        .zip(test.pixels())
        .map(|(a, b)| (a - b).powi(2))
        .sum();
    if sse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (255.0f64 * 255.0 / (sse / n as f64)).log10())
}

/// Per-pixel mean nonzero count over the patches covering each pixel.
pub fn atom_usage_raw(a: &SparseCoeffMatrix, grid: &PatchGrid) -> Result<GrayImage> {
    if a.cols() != grid.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} coefficient columns for {} patches",
            a.cols(),
            grid.len()
        )));
    }
    let (h, w) = grid.image_dims;
    let p = grid.patch_side;
    let counts = a.nnz_per_column();
    let mut sum = vec![0.0; h * w];
    for (&(r0, c0), &c) in grid.positions().iter().zip(&counts) {
        for r in r0..r0 + p {
            for s in &mut sum[r * w + c0..r * w + c0 + p] {
                *s += c as f64;
            }
        }
    }
    let cover = grid.coverage();
    let mut pixels = Vec::with_capacity(h * w);
    for (i, (s, c)) in sum.iter().zip(&cover).enumerate() {
        if *c == 0 {
            return Err(Error::UncoveredPixel {
                row: i / w,
                col: i % w,
            });
        }
        pixels.push(s / *c as f64);
    }
    GrayImage::new(h, w, pixels)
}

/// [`atom_usage_raw`] rescaled linearly to `[0, 255]`; a constant map
/// becomes all zeros.
pub fn atom_usage_map(a: &SparseCoeffMatrix, grid: &PatchGrid) -> Result<GrayImage> {
    let raw = atom_usage_raw(a, grid)?;
    Ok(rescale_to_display(&raw))
}

pub(crate) fn rescale_to_display(img: &GrayImage) -> GrayImage {
    let (lo, hi) = img
        .pixels()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(*v), hi.max(*v))
        });
    let span = hi - lo;
    GrayImage::from_fn(img.height(), img.width(), |r, c| {
        if span > 0.0 {
            255.0 * (img.get(r, c) - lo) / span
        } else {
            0.0
        }
    })
}

/// Tiles the atoms (columns of side `patch_side^2`) into a square-ish
/// mosaic with one-pixel gutters, each atom stretched to `[0, 255]`.
pub fn dictionary_mosaic(d: &DenseMatrix, patch_side: usize) -> Result<GrayImage> {
    if d.rows() != patch_side * patch_side {
        return Err(Error::DimensionMismatch(format!(
            "atoms of dim {} are not {patch_side}x{patch_side}",
            d.rows()
        )));
    }
    let m = d.cols();
    let per_row = (m as f64).sqrt().ceil().max(1.0) as usize;
    let tiles_down = m.div_ceil(per_row).max(1);
    let cell = patch_side + 1;
    let mut img = GrayImage::filled(tiles_down * cell + 1, per_row * cell + 1, 255.0);
    for j in 0..m {
        let atom = d.column(j);
        let tile = rescale_to_display(&GrayImage::new(patch_side, patch_side, atom)?);
        let (r0, c0) = ((j / per_row) * cell + 1, (j % per_row) * cell + 1);
        for r in 0..patch_side {
            for c in 0..patch_side {
                img.set(r0 + r, c0 + c, tile.get(r, c));
            }
        }
    }
    Ok(img)
}

/// Cosine between two vectors (0 when either is zero).
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let den = linalg::norm(a) * linalg::norm(b);
    if den == 0.0 {
        0.0
    } else {
        linalg::dot(a, b) / den
    }
}
