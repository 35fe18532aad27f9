//! Subcommand bodies.
//!
//! One `--seed` drives every run. Data, initialisation and noise use the
//! substreams `derive_seed(seed, DATA)`, `derive_seed(seed, INIT)` and
//! `derive_seed(seed, NOISE)`, so runs of different methods on the same
//! seed see the same signals and the same corrupted image.

use std::fs;
use std::path::Path;
use std::time::Instant;

use gdl_core::baselines::{ksvd_pk_learn, mod_learn, overcomplete_dct_dictionary, BaselineConfig};
use gdl_core::denoise::{denoise as run_denoise, DenoiseConfig, DenoiseMethod};
use gdl_core::learner::{gdl_learn, GdlConfig, GroundTruth, LearnedModel};
use gdl_core::metrics::{atom_usage_map, dictionary_mosaic, psnr};
use gdl_core::pipeline::io::{decode_pgm, encode_pgm, PgmFormat};
use gdl_core::pipeline::rng::{derive_seed, keys};
use gdl_core::pipeline::{
    apply_noise, gen_synthetic, load_matrix_csv, load_pgm, store_matrix_csv, store_pgm,
    store_triplets_csv, GrayImage, NoiseSpec, SyntheticSpec,
};
use gdl_core::{DenseMatrix, Error};

use crate::{
    CliError, DctDictArgs, DenoiseArgs, DenoiseMethodArg, LearnArgs, LearnMethod, NoiseArgs,
    NoiseFlags, SynthBenchArgs,
};

type CliResult = Result<(), CliError>;

const SYNTH_ATOMS: usize = 50;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Configuration problems detected by the core are flag errors.
fn classify(e: Error) -> CliError {
    match e {
        Error::InvalidConfig(msg) => CliError::Usage(msg),
        Error::BudgetTooLarge { budget, capacity } => CliError::Usage(format!(
            "budget {budget} exceeds the {capacity} coefficient slots"
        )),
        other => CliError::Runtime(other),
    }
}

fn write_text(path: &Path, text: &str) -> CliResult {
    fs::write(path, text).map_err(|e| CliError::Runtime(Error::io(path, e)))
}

fn ensure_dir(dir: &Path) -> CliResult {
    fs::create_dir_all(dir).map_err(|e| CliError::Runtime(Error::io(dir, e)))
}

fn method_name(m: LearnMethod) -> &'static str {
    match m {
        LearnMethod::Gdl => "gdl",
        LearnMethod::Ksvd => "ksvd",
        LearnMethod::Mod => "mod",
    }
}

fn opt_f64(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

#[allow(clippy::too_many_arguments)]
fn learn_with(
    method: LearnMethod,
    x: &DenseMatrix,
    atoms: usize,
    budget: usize,
    k: usize,
    iters: usize,
    seed: u64,
    truth: Option<GroundTruth<'_>>,
) -> Result<LearnedModel, CliError> {
    match method {
        LearnMethod::Gdl => gdl_learn(
            x,
            &GdlConfig::new(atoms, budget, seed).with_max_iters(iters),
            truth,
        ),
        LearnMethod::Ksvd => ksvd_pk_learn(x, &BaselineConfig::new(atoms, k, iters, seed), truth),
        LearnMethod::Mod => mod_learn(x, &BaselineConfig::new(atoms, k, iters, seed), truth),
    }
    .map_err(classify)
}

pub fn synth_bench(a: &SynthBenchArgs) -> CliResult {
    if a.sigma_list.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
        return Err(usage("--sigma-list entries must be finite and >= 0"));
    }
    if a.iters == 0 {
        return Err(usage("--iters must be >= 1"));
    }
    ensure_dir(&a.out_dir)?;
    let data_seed = derive_seed(a.seed, keys::DATA);
    let init_seed = derive_seed(a.seed, keys::INIT);
    let name = method_name(a.method);
    let mut summary = String::from(
        "method,series,sigma,seed,K,k,iterations,objective,re,dr,nnz,bookkeeping_violations,wall_seconds\n",
    );
    for &sigma in &a.sigma_list {
        let spec = if a.series == 1 {
            SyntheticSpec::per_column_default(sigma)
        } else {
            SyntheticSpec::total_nnz_default(sigma)
        };
        let data = gen_synthetic(&spec, data_seed).map_err(classify)?;
        let truth = GroundTruth {
            dictionary: &data.dictionary,
            clean: &data.clean,
        };
        let start = Instant::now();
        let model = learn_with(
            a.method,
            &data.noisy,
            SYNTH_ATOMS,
            a.budget,
            a.k,
            a.iters,
            init_seed,
            Some(truth),
        )?;
        let seconds = start.elapsed().as_secs_f64();
        let hist = &model.history;
        write_text(
            &a.out_dir.join(format!("history-sigma-{sigma}.csv")),
            &hist.to_csv(a.timing),
        )?;
        let last = hist.last().expect("at least one iteration runs");
        eprintln!(
            "{name} sigma={sigma}: {} iterations, objective {:.6e}, RE {}, DR {}",
            hist.len(),
            last.objective,
            opt_f64(last.re),
            opt_f64(last.dr)
        );
        let budget = if a.method == LearnMethod::Gdl {
            a.budget
        } else {
            a.k * spec.n
        };
        summary.push_str(&format!(
            "{name},{},{sigma},{},{budget},{},{},{},{},{},{},{},{}\n",
            a.series,
            a.seed,
            a.k,
            hist.len(),
            last.objective,
            opt_f64(last.re),
            opt_f64(last.dr),
            model.coefficients.nnz(),
            hist.bookkeeping_violations,
            if a.timing {
                seconds.to_string()
            } else {
                String::new()
            }
        ));
    }
    write_text(&a.out_dir.join("summary.csv"), &summary)
}

pub fn learn(a: &LearnArgs) -> CliResult {
    let (budget, k) = match a.method {
        LearnMethod::Gdl => (a.budget.ok_or_else(|| usage("--K is required for gdl"))?, 0),
        LearnMethod::Ksvd | LearnMethod::Mod => (
            0,
            a.k.ok_or_else(|| usage("--k is required for ksvd and mod"))?,
        ),
    };
    if a.iters == 0 {
        return Err(usage("--iters must be >= 1"));
    }
    let x = load_matrix_csv(&a.signals)?;
    ensure_dir(&a.out_dir)?;
    let model = learn_with(
        a.method,
        &x,
        a.atoms,
        budget,
        k,
        a.iters,
        derive_seed(a.seed, keys::INIT),
        None,
    )?;
    let last = model.history.last().expect("at least one iteration runs");
    eprintln!(
        "{}: {} iterations, objective {:.6e}, {} nonzeros",
        method_name(a.method),
        model.history.len(),
        last.objective,
        model.coefficients.nnz()
    );
    store_matrix_csv(&model.dictionary, a.out_dir.join("dictionary.csv"))?;
    store_triplets_csv(&model.coefficients, a.out_dir.join("coefficients.csv"))?;
    write_text(
        &a.out_dir.join("history.csv"),
        &model.history.to_csv(a.timing),
    )
}

fn noise_spec(flags: &NoiseFlags) -> Result<NoiseSpec, CliError> {
    let spec = match (flags.delta, flags.sigma, flags.p) {
        (None, None, None) => return Err(usage("give at least one of --delta, --sigma, --p")),
        (Some(_), Some(_), _) => return Err(usage("--delta and --sigma are exclusive")),
        (Some(delta), None, None) => NoiseSpec::NonhomogeneousGaussian { delta },
        (Some(delta), None, Some(p)) => {
            NoiseSpec::NonhomogeneousGaussianPlusSaltPepper { delta, p }
        }
        (None, Some(sigma), p) => NoiseSpec::HomogeneousGaussianPlusSaltPepper {
            sigma,
            p: p.unwrap_or(0.0),
        },
        (None, None, Some(p)) => NoiseSpec::SaltPepper { p },
    };
    spec.validate().map_err(classify)?;
    Ok(spec)
}

/// The image exactly as a PGM file stores it.
fn as_stored(img: &GrayImage) -> Result<GrayImage, CliError> {
    Ok(decode_pgm(&encode_pgm(img, PgmFormat::Binary, true)?)?)
}

pub fn noise(a: &NoiseArgs) -> CliResult {
    let spec = noise_spec(&a.noise)?;
    let img = load_pgm(&a.image)?;
    let noisy = apply_noise(&img, &spec, derive_seed(a.seed, keys::NOISE));
    store_pgm(&noisy, &a.out, true)?;
    eprintln!("wrote {}", a.out.display());
    Ok(())
}

pub fn denoise(a: &DenoiseArgs) -> CliResult {
    let spec = noise_spec(&a.noise)?;
    let method = match a.method {
        DenoiseMethodArg::Gdl => DenoiseMethod::Gdl,
        DenoiseMethodArg::Ksvd => DenoiseMethod::Ksvd,
        DenoiseMethodArg::Dct => DenoiseMethod::Dct,
    };
    let cfg = DenoiseConfig {
        method,
        patch_side: a.patch_side,
        stride: a.stride,
        atoms: a.atoms,
        budget: a.budget,
        k_per_patch: a.k,
        iters: a.iters,
        seed: derive_seed(a.seed, keys::INIT),
    };
    cfg.validate().map_err(classify)?;
    let clean = load_pgm(&a.image)?;
    ensure_dir(&a.out_dir)?;

    let noisy = as_stored(&apply_noise(
        &clean,
        &spec,
        derive_seed(a.seed, keys::NOISE),
    ))?;
    store_pgm(&noisy, a.out_dir.join("noisy.pgm"), true)?;
    let psnr_noisy = psnr(&clean, &noisy)?;
    eprintln!(
        "{}: noisy PSNR {psnr_noisy:.3} dB, learning on {}x{} image",
        method.name(),
        clean.height(),
        clean.width()
    );

    let start = Instant::now();
    let out = run_denoise(&noisy, &cfg).map_err(classify)?;
    let seconds = start.elapsed().as_secs_f64();
    let recon = as_stored(&out.reconstructed)?;
    let psnr_recon = psnr(&clean, &recon)?;
    eprintln!("{}: reconstructed PSNR {psnr_recon:.3} dB", method.name());

    store_pgm(&recon, a.out_dir.join("reconstructed.pgm"), true)?;
    store_matrix_csv(&out.dictionary, a.out_dir.join("dictionary.csv"))?;
    store_pgm(
        &dictionary_mosaic(&out.dictionary, cfg.patch_side)?,
        a.out_dir.join("dictionary-mosaic.pgm"),
        true,
    )?;
    store_pgm(
        &atom_usage_map(&out.coefficients, &out.grid)?,
        a.out_dir.join("usage-map.pgm"),
        true,
    )?;
    let iters = out.history.as_ref().map_or(0, |h| h.len());
    if let Some(h) = &out.history {
        write_text(&a.out_dir.join("history.csv"), &h.to_csv(a.timing))?;
    }
    let budget = match method {
        DenoiseMethod::Ksvd => cfg.k_per_patch * out.grid.len(),
        DenoiseMethod::Gdl | DenoiseMethod::Dct => cfg.budget,
    };
    let metrics = format!(
        "method,seed,K,iters,psnr_noisy_db,psnr_recon_db,wall_seconds\n{},{},{budget},{iters},{psnr_noisy},{psnr_recon},{}\n",
        method.name(),
        a.seed,
        if a.timing { seconds.to_string() } else { String::new() }
    );
    write_text(&a.out_dir.join("metrics.csv"), &metrics)
}

pub fn dct_dict(a: &DctDictArgs) -> CliResult {
    let d = overcomplete_dct_dictionary(a.patch_side, a.atoms_per_dim).map_err(|e| {
        if let Error::InvalidDims(msg) = e {
            CliError::Usage(msg)
        } else {
            CliError::Runtime(e)
        }
    })?;
    store_matrix_csv(&d, &a.out)?;
    eprintln!(
        "wrote {}x{} dictionary to {}",
        d.rows(),
        d.cols(),
        a.out.display()
    );
    Ok(())
}
