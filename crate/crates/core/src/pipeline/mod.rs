//! Data generation, image corruption, patch handling and file I/O.

pub mod image;
pub mod io;
pub mod noise;
pub mod patches;
pub mod rng;
pub mod synthetic;

pub use image::GrayImage;
pub use io::{
    load_matrix_csv, load_pgm, load_triplets_csv, store_matrix_csv, store_pgm, store_triplets_csv,
    PgmFormat,
};
pub use noise::{apply_noise, NoiseSpec};
pub use patches::{extract_patches, reconstruct_from_patches, PatchGrid};
pub use rng::{seeded_rng, SeededRng};
pub use synthetic::{gen_synthetic, SparsityMode, SyntheticData, SyntheticSpec};
