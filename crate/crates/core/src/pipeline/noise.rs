//! Image corruption models: a spatial ramp of Gaussian noise, salt-and-pepper
//! dead pixels, and their mixtures with homogeneous or ramped Gaussian noise.

use super::image::GrayImage;
use super::rng::{keys, SeededRng};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseSpec {
    /// Gaussian noise whose deviation grows linearly from 0 at the
    /// lower-right pixel to `delta` at the upper-left one.
    NonhomogeneousGaussian {
        delta: f64,
    },
    /// `p` percent of the pixels set to 0 or 255.
    SaltPepper {
        p: f64,
    },
    HomogeneousGaussianPlusSaltPepper {
        sigma: f64,
        p: f64,
    },
    NonhomogeneousGaussianPlusSaltPepper {
        delta: f64,
        p: f64,
    },
}

impl NoiseSpec {
    pub fn validate(&self) -> crate::Result<()> {
        let (dev, p) = match *self {
            NoiseSpec::NonhomogeneousGaussian { delta } => (delta, 0.0),
            NoiseSpec::SaltPepper { p } => (0.0, p),
            NoiseSpec::HomogeneousGaussianPlusSaltPepper { sigma, p } => (sigma, p),
            NoiseSpec::NonhomogeneousGaussianPlusSaltPepper { delta, p } => (delta, p),
        };
        if !(dev >= 0.0 && dev.is_finite()) {
            return Err(crate::Error::InvalidConfig(format!(
                "noise deviation {dev} must be >= 0"
            )));
        }
        if !(0.0..=100.0).contains(&p) {
            return Err(crate::Error::InvalidConfig(format!(
                "percentage {p} outside [0, 100]"
            )));
        }
        Ok(())
    }

    fn salt_pepper_percent(&self) -> f64 {
        match *self {
            NoiseSpec::NonhomogeneousGaussian { .. } => 0.0,
            NoiseSpec::SaltPepper { p }
            | NoiseSpec::HomogeneousGaussianPlusSaltPepper { p, .. }
            | NoiseSpec::NonhomogeneousGaussianPlusSaltPepper { p, .. } => p,
        }
    }
}

/// Deviation of the ramp at `(row, col)`: `delta` at `(0, 0)`, 0 at the
/// lower-right corner, linear in the Manhattan distance to that corner.
pub fn ramp_sigma(delta: f64, height: usize, width: usize, row: usize, col: usize) -> f64 {
    let span = (height - 1) + (width - 1);
    if span == 0 {
        return delta;
    }
    delta * ((height - 1 - row) + (width - 1 - col)) as f64 / span as f64
}

/// Number of dead pixels for `p` percent of `pixels`, rounded half-up.
pub fn salt_pepper_count(p: f64, pixels: usize) -> usize {
    ((p / 100.0 * pixels as f64) + 0.5).floor() as usize
}

/// Corrupts `img`. Gaussian components are applied first, then dead pixels.
/// The result is not clipped; see [`GrayImage::clipped`].
pub fn apply_noise(img: &GrayImage, spec: &NoiseSpec, seed: u64) -> GrayImage {
    let root = SeededRng::new(seed);
    let (h, w) = img.dims();
    let mut out = img.clone();

    let gaussian: Option<Box<dyn Fn(usize, usize) -> f64>> = match *spec {
        NoiseSpec::NonhomogeneousGaussian { delta }
        | NoiseSpec::NonhomogeneousGaussianPlusSaltPepper { delta, .. } => {
            Some(Box::new(move |r, c| ramp_sigma(delta, h, w, r, c)))
        }
        NoiseSpec::HomogeneousGaussianPlusSaltPepper { sigma, .. } => {
            Some(Box::new(move |_, _| sigma))
        }
        NoiseSpec::SaltPepper { .. } => None,
    };
    if let Some(sigma_at) = gaussian {
        let mut rng = root.substream(keys::GAUSSIAN);
        for r in 0..h {
            for c in 0..w {
                let z = rng.normal();
                let s = sigma_at(r, c);
                if s > 0.0 {
                    out.set(r, c, out.get(r, c) + s * z);
                }
            }
        }
    }

    let count = salt_pepper_count(spec.salt_pepper_percent(), h * w);
    if count > 0 {
        let mut rng = root.substream(keys::SALT_PEPPER);
        for idx in rng.sample_indices(h * w, count) {
            let v = if rng.coin() { 255.0 } else { 0.0 };
            out.set(idx / w, idx % w, v);
        }
    }
    out
}
