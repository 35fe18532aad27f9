//! Overlapping patch extraction and patch-averaged reconstruction.

use super::image::GrayImage;
use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

/// Lattice of square patches over an image.
///
/// Top-left corners start at `origin` and step by `stride` along both axes,
/// listed row-major; every patch lies fully inside the image.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchGrid {
    pub patch_side: usize,
    pub stride: usize,
    pub origin: (usize, usize),
    pub image_dims: (usize, usize),
    positions: Vec<(usize, usize)>,
}

impl PatchGrid {
    pub fn new(
        image_dims: (usize, usize),
        patch_side: usize,
        stride: usize,
        origin: (usize, usize),
    ) -> Result<Self> {
        let (h, w) = image_dims;
        if patch_side == 0 || stride == 0 {
            return Err(Error::InvalidDims(
                "patch side and stride must be positive".into(),
            ));
        }
        if h < patch_side + origin.0 || w < patch_side + origin.1 {
            return Err(Error::ImageTooSmall {
                height: h,
                width: w,
                side: patch_side,
            });
        }
        let rows: Vec<usize> = (origin.0..=h - patch_side).step_by(stride).collect();
        let cols: Vec<usize> = (origin.1..=w - patch_side).step_by(stride).collect();
        let positions = rows
            .iter()
            .flat_map(|&r| cols.iter().map(move |&c| (r, c)))
            .collect();
        Ok(Self {
            patch_side,
            stride,
            origin,
            image_dims,
            positions,
        })
    }

    /// Builds a grid from explicit top-left corners.
    pub fn from_positions(
        image_dims: (usize, usize),
        patch_side: usize,
        positions: Vec<(usize, usize)>,
    ) -> Result<Self> {
        let (h, w) = image_dims;
        if let Some(&(r, c)) = positions
            .iter()
            .find(|&&(r, c)| r + patch_side > h || c + patch_side > w)
        {
            return Err(Error::InvalidDims(format!(
                "patch at ({r}, {c}) leaves the {h}x{w} image"
            )));
        }
        Ok(Self {
            patch_side,
            stride: 0,
            origin: (0, 0),
            image_dims,
            positions,
        })
    }

    pub fn positions(&self) -> &[(usize, usize)] {
        &self.positions
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// How many patches cover each pixel, row-major.
    pub fn coverage(&self) -> Vec<u32> {
        let (h, w) = self.image_dims;
        let p = self.patch_side;
        let mut cover = vec![0u32; h * w];
        for &(r0, c0) in &self.positions {
            for r in r0..r0 + p {
                for c in c0..c0 + p {
                    cover[r * w + c] += 1;
                }
            }
        }
        cover
    }
}

/// Every patch of `img` on a `stride` lattice from `(0, 0)`, one column per
/// patch, each flattened row-major.
pub fn extract_patches(
    img: &GrayImage,
    patch_side: usize,
    stride: usize,
) -> Result<(DenseMatrix, PatchGrid)> {
    let grid = PatchGrid::new(img.dims(), patch_side, stride, (0, 0))?;
    Ok((patches_on_grid(img, &grid)?, grid))
}

pub fn patches_on_grid(img: &GrayImage, grid: &PatchGrid) -> Result<DenseMatrix> {
    if grid.image_dims != img.dims() {
        return Err(Error::DimensionMismatch(format!(
            "grid for {:?} applied to a {:?} image",
            grid.image_dims,
            img.dims()
        )));
    }
    let p = grid.patch_side;
    let n = grid.len();
    let mut data = vec![0.0; p * p * n];
    for (j, &(r0, c0)) in grid.positions().iter().enumerate() {
        for dr in 0..p {
            for dc in 0..p {
                data[(dr * p + dc) * n + j] = img.get(r0 + dr, c0 + dc);
            }
        }
    }
    DenseMatrix::new(p * p, n, data)
}

/// Averages overlapping patches back into an image.
///
/// Pixels no patch covers are copied from `fallback`; without one they are
/// an error.
pub fn reconstruct_from_patches(
    patches: &DenseMatrix,
    grid: &PatchGrid,
    fallback: Option<&GrayImage>,
) -> Result<GrayImage> {
    let p = grid.patch_side;
    let (h, w) = grid.image_dims;
    if patches.rows() != p * p || patches.cols() != grid.len() {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} patch matrix for {} patches of side {p}",
            patches.rows(),
            patches.cols(),
            grid.len()
        )));
    }
    if let Some(f) = fallback {
        if f.dims() != (h, w) {
            return Err(Error::DimensionMismatch(
                "fallback image dims differ from grid".into(),
            ));
        }
    }
    let n = grid.len();
    let data = patches.as_slice();
    let mut sum = vec![0.0; h * w];
    let mut cover = vec![0u32; h * w];
    for (j, &(r0, c0)) in grid.positions().iter().enumerate() {
        for dr in 0..p {
            let base = (r0 + dr) * w + c0;
            for dc in 0..p {
                sum[base + dc] += data[(dr * p + dc) * n + j];
                cover[base + dc] += 1;
            }
        }
    }
    let mut pixels = Vec::with_capacity(h * w);
    for (i, (s, c)) in sum.iter().zip(&cover).enumerate() {
        if *c > 0 {
            pixels.push(s / *c as f64);
        } else if let Some(f) = fallback {
            pixels.push(f.pixels()[i]);
        } else {
            return Err(Error::UncoveredPixel {
                row: i / w,
                col: i % w,
            });
        }
    }
    GrayImage::new(h, w, pixels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::rng::seeded_rng;

    #[test]
    fn patch_counts() {
        let img = GrayImage::filled(256, 256, 1.0);
        let (x, grid) = extract_patches(&img, 8, 1).unwrap();
        assert_eq!(grid.len(), 62_001);
        assert_eq!(x.shape(), (64, 62_001));

        let img = GrayImage::filled(512, 512, 1.0);
        let grid = PatchGrid::new(img.dims(), 8, 2, (0, 0)).unwrap();
        assert_eq!(grid.len(), 253 * 253);
    }

    #[test]
    fn single_patch_equals_image() {
        let img = GrayImage::from_fn(8, 8, |r, c| (r * 8 + c) as f64);
        let (x, grid) = extract_patches(&img, 8, 1).unwrap();
        assert_eq!(grid.len(), 1);
        assert_eq!(x.column(0), img.pixels().to_vec());
    }

    #[test]
    fn too_small() {
        let img = GrayImage::filled(7, 20, 0.0);
        assert!(matches!(
            extract_patches(&img, 8, 1),
            Err(Error::ImageTooSmall { .. })
        ));
    }

    #[test]
    fn round_trip_stride_one() {
        let mut rng = seeded_rng(3);
        let img = GrayImage::from_fn(23, 17, |_, _| 255.0 * rng.unit());
        let (x, grid) = extract_patches(&img, 8, 1).unwrap();
        let back = reconstruct_from_patches(&x, &grid, None).unwrap();
        let err = back
            .pixels()
            .iter()
            .zip(img.pixels())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err <= 1e-12);
    }

    #[test]
    fn overlapping_patches_average() {
        // two 2x2 patches on a 2x3 image share the middle column
        let grid = PatchGrid::new((2, 3), 2, 1, (0, 0)).unwrap();
        assert_eq!(grid.len(), 2);
        let x = DenseMatrix::from_columns(4, &[vec![1.0; 4], vec![3.0; 4]]).unwrap();
        let img = reconstruct_from_patches(&x, &grid, None).unwrap();
        assert_eq!(img.get(0, 0), 1.0);
        assert_eq!(img.get(0, 1), 2.0);
        assert_eq!(img.get(1, 2), 3.0);
    }

    #[test]
    fn uncovered_pixels_need_fallback() {
        let img = GrayImage::from_fn(11, 11, |r, c| (r + c) as f64);
        let (x, grid) = extract_patches(&img, 8, 2).unwrap();
        assert!(matches!(
            reconstruct_from_patches(&x, &grid, None),
            Err(Error::UncoveredPixel { .. })
        ));
        let back = reconstruct_from_patches(&x, &grid, Some(&img)).unwrap();
        assert_eq!(back, img);
    }
}
