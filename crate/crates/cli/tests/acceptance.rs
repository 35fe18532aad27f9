//! Acceptance criteria AC-1 .. AC-9, one PASS/FAIL line each.
//!
//! Runs without the libtest harness so every line reaches the terminal;
//! the process exits non-zero if any criterion fails.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use gdl_core::linalg;
use gdl_core::matrix::normalize_columns;
use gdl_core::metrics::{
    atom_usage_map, atom_usage_raw, dictionary_recovery_rate, psnr, RECOVERY_THRESHOLD,
};
use gdl_core::omp::{exact_sparse_oracle, omp, residual_norm_sq};
use gdl_core::pipeline::patches::extract_patches;
use gdl_core::pipeline::rng::seeded_rng;
use gdl_core::pipeline::{gen_synthetic, load_pgm, store_pgm, GrayImage, PatchGrid, SeededRng};
use gdl_core::rank1::{rank1_objective, sparse_pca_oracle, sparse_pca_rank1, theorem1_transform};
use gdl_core::{
    gdl_learn, DenseMatrix, GdlConfig, OmpConfig, SparseCoeffMatrix, SparsePcaConfig, SparseVector,
    SparsityMode, SyntheticSpec,
};

struct Outcome {
    id: &'static str,
    pass: bool,
    detail: String,
}

/// Shared state: runs whose outputs later criteria inspect.
struct Runs {
    dir: PathBuf,
    /// Bookkeeping violations collected across every criterion's runs.
    violations: usize,
    budget_checks: usize,
}

fn gdl_bin() -> &'static str {
    env!("CARGO_BIN_EXE_gdl")
}

fn run_cli(args: &[&str]) -> std::process::Output {
    let out = Command::new(gdl_bin())
        .args(args)
        .output()
        .expect("binary runs");
    if !out.status.success() {
        eprintln!(
            "gdl {:?} failed: {}",
            args,
            String::from_utf8_lossy(&out.stderr)
        );
    }
    out
}

fn read_rows(path: &Path) -> Vec<Vec<String>> {
    let text = fs::read_to_string(path).unwrap_or_default();
    text.lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_owned).collect())
        .collect()
}

fn header_index(path: &Path, name: &str) -> usize {
    let text = fs::read_to_string(path).unwrap_or_default();
    let header = text.lines().next().unwrap_or_default();
    header
        .split(',')
        .position(|h| h == name)
        .unwrap_or_else(|| panic!("{name} missing from {}", path.display()))
}

fn column_f64(path: &Path, name: &str) -> Vec<f64> {
    let idx = header_index(path, name);
    read_rows(path)
        .iter()
        .map(|r| r[idx].parse().unwrap_or(f64::NAN))
        .collect()
}

fn synth_dir(runs: &Runs, seed: u64, tag: &str) -> PathBuf {
    runs.dir.join(format!("synth-{seed}-{tag}"))
}

const AC1_SEEDS: [u64; 3] = [7, 8, 9];

fn ac1(runs: &mut Runs) -> Outcome {
    let start = Instant::now();
    let mut worst_dr: f64 = 1.0;
    let mut failures = Vec::new();
    for seed in AC1_SEEDS {
        let dir = synth_dir(runs, seed, "a");
        let s = seed.to_string();
        let out = run_cli(&[
            "synth-bench",
            "--series",
            "1",
            "--sigma-list",
            "0,0.05",
            "--method",
            "gdl",
            "--K",
            "4500",
            "--iters",
            "100",
            "--seed",
            &s,
            "--out-dir",
            dir.to_str().unwrap(),
        ]);
        if !out.status.success() {
            failures.push(format!("seed {seed}: exit {:?}", out.status.code()));
            continue;
        }
        let summary = dir.join("summary.csv");
        let sigmas = column_f64(&summary, "sigma");
        let res = column_f64(&summary, "re");
        let drs = column_f64(&summary, "dr");
        let nnz = column_f64(&summary, "nnz");
        let viol = column_f64(&summary, "bookkeeping_violations");
        for i in 0..sigmas.len() {
            runs.violations += viol[i] as usize;
            runs.budget_checks += 1;
            if nnz[i] > 4500.0 {
                runs.violations += 1;
            }
            worst_dr = worst_dr.min(drs[i]);
            let ok = drs[i] >= 0.80 && res[i] <= sigmas[i] + 0.02;
            if !ok {
                failures.push(format!(
                    "seed {seed} sigma {}: DR {:.2}, RE {:.4}",
                    sigmas[i], drs[i], res[i]
                ));
            }
        }
        for sigma in ["0", "0.05"] {
            let hist = dir.join(format!("history-sigma-{sigma}.csv"));
            for n in column_f64(&hist, "nnz")
                .into_iter()
                .chain(column_f64(&hist, "coding_nnz"))
            {
                runs.budget_checks += 1;
                if n > 4500.0 {
                    runs.violations += 1;
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Outcome {
        id: "AC-1",
        pass: failures.is_empty(),
        detail: if failures.is_empty() {
            format!("6 runs, worst DR {worst_dr:.2}, {secs:.0}s total")
        } else {
            format!(
                "{} of 6 runs missed DR >= 0.80 / RE <= sigma + 0.02: {}",
                failures.len(),
                failures.join("; ")
            )
        },
    }
}

fn ac2(runs: &mut Runs) -> Outcome {
    let mut worst_rise = f64::NEG_INFINITY;
    let mut bad = 0;
    for t in 0..50u64 {
        let spec = SyntheticSpec {
            d: 10,
            m: 20,
            n: 100,
            sparsity: SparsityMode::PerColumn(3),
            noise_sigma: 0.05,
        };
        let data = gen_synthetic(&spec, 1000 + t).unwrap();
        let cfg = GdlConfig::new(20, 300, 2000 + t)
            .with_max_iters(20)
            .with_objective_tol(0.0);
        let model = gdl_learn(&data.noisy, &cfg, None).unwrap();
        runs.violations += model.history.bookkeeping_violations;
        runs.budget_checks += 2 * model.history.len();
        let objs = model.history.stage_objectives();
        let rise = objs
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::NEG_INFINITY, f64::max);
        worst_rise = worst_rise.max(rise);
        if rise > 1e-9 {
            bad += 1;
        }
    }
    Outcome {
        id: "AC-2",
        pass: bad == 0,
        detail: format!("50 instances x 20 iterations, largest stage-to-stage change {worst_rise:.3e}, {bad} violations"),
    }
}

fn random_sparse_unit(rng: &mut SeededRng, n: usize, k: usize) -> SparseVector {
    let pairs = rng
        .sample_indices(n, k)
        .into_iter()
        .map(|i| (i, rng.normal()))
        .collect();
    let w = SparseVector::from_pairs(n, pairs).unwrap();
    w.scaled(1.0 / w.norm())
}

fn ac3() -> Outcome {
    let mut rng = seeded_rng(303);
    let (mut worst_a, mut worst_cos, mut worst_b): (f64, f64, f64) = (0.0, 1.0, 0.0);
    for _ in 0..1000 {
        let d = 1 + (rng.next_u64() % 12) as usize;
        let n = 1 + (rng.next_u64() % 12) as usize;
        let k = 1 + (rng.next_u64() % 4.min(n as u64)) as usize;
        let e = DenseMatrix::from_fn(d, n, |_, _| rng.normal());
        let w = random_sparse_unit(&mut rng, n, k);
        // (a) via an explicitly formed E - E w w^T
        let ew = e.mul_vec(&w.to_dense());
        let wd = w.to_dense();
        let resid = DenseMatrix::from_fn(d, n, |r, c| e.get(r, c) - ew[r] * wd[c]);
        let total = e.frobenius_norm_sq();
        let lhs = resid.frobenius_norm_sq() + linalg::norm_sq(&ew);
        worst_a = worst_a.max((lhs - total).abs() / total);
        // (b) on the solver's direction and on the random one
        let solved = sparse_pca_rank1(&e, k, None, &SparsePcaConfig::default()).unwrap();
        for dir in [&w, &solved] {
            let Ok(f) = theorem1_transform(&e, dir) else {
                continue;
            };
            let ea = e.mul_vec(&f.coefficients.to_dense());
            let cos = linalg::dot(&f.atom, &ea) / (linalg::norm(&f.atom) * linalg::norm(&ea));
            worst_cos = worst_cos.min(cos);
            let a2 = linalg::norm_sq(f.coefficients.values());
            let nea = linalg::norm(&ea);
            worst_b = worst_b.max((a2 - nea).abs() / nea);
        }
    }
    let pass = worst_a <= 1e-10 && worst_cos >= 1.0 - 1e-10 && worst_b <= 1e-8;
    Outcome {
        id: "AC-3",
        pass,
        detail: format!(
            "1000 pairs: identity rel err {worst_a:.2e}, min cos(d, E alpha) {worst_cos:.15}, |alpha|^2 vs |E alpha| rel err {worst_b:.2e}"
        ),
    }
}

fn ac4() -> Outcome {
    // (a) OMP against exhaustive search
    let mut rng = seeded_rng(404);
    let cfg = OmpConfig::default();
    let (mut close, mut exact_cases, mut exact_hits) = (0, 0, 0);
    for t in 0..100 {
        let d = normalize_columns(&DenseMatrix::from_fn(6, 8, |_, _| rng.normal())).unwrap();
        // every fifth instance is exactly 2-sparse in D
        let x: Vec<f64> = if t % 5 == 0 {
            let idx = rng.sample_indices(8, 2);
            let (c0, c1) = (rng.normal(), rng.normal());
            (0..6)
                .map(|r| c0 * d.get(r, idx[0]) + c1 * d.get(r, idx[1]))
                .collect()
        } else {
            (0..6).map(|_| rng.normal()).collect()
        };
        let greedy = residual_norm_sq(&d, &x, &omp(&d, &x, 2, &cfg).unwrap());
        let best = residual_norm_sq(&d, &x, &exact_sparse_oracle(&d, &x, 2).unwrap());
        if greedy <= 1.1 * best + 1e-12 * linalg::norm_sq(&x) {
            close += 1;
        }
        if t % 5 == 0 {
            exact_cases += 1;
            if (greedy - best).abs() <= 1e-8 * linalg::norm_sq(&x).max(1.0) {
                exact_hits += 1;
            }
        }
    }
    let pass_a = close >= 95 && exact_hits == exact_cases;

    // (b) truncated power iteration from every single-coordinate start
    let mut rng = seeded_rng(405);
    let (mut tight, mut all_within) = (0, true);
    let spca = SparsePcaConfig::default();
    for _ in 0..100 {
        let e = DenseMatrix::from_fn(5, 6, |_, _| rng.normal());
        let best = rank1_objective(&e, &sparse_pca_oracle(&e, 2).unwrap());
        let got = (0..6)
            .map(|j| {
                let w0 = SparseVector::indicator(6, j, 1.0);
                rank1_objective(&e, &sparse_pca_rank1(&e, 2, Some(&w0), &spca).unwrap())
            })
            .fold(f64::NEG_INFINITY, f64::max);
        if (best - got).abs() <= 1e-6 {
            tight += 1;
        }
        if got < 0.95 * best {
            all_within = false;
        }
    }
    let pass_b = tight >= 95 && all_within;
    Outcome {
        id: "AC-4",
        pass: pass_a && pass_b,
        detail: format!(
            "(a) OMP within 10% of oracle on {close}/100 (need 95), exact on {exact_hits}/{exact_cases} exactly-sparse signals; \
             (b) sparse PCA within 1e-6 on {tight}/100 (need 95), within 5% on all: {all_within}"
        ),
    }
}

/// Deterministic piecewise-smooth test scene.
fn test_scene() -> GrayImage {
    GrayImage::from_fn(256, 256, |r, c| {
        let (y, x) = (r as f64, c as f64);
        let mut v =
            110.0 + 50.0 * (y / 41.0).sin() * (x / 57.0).cos() + 8.0 * (y / 6.0 + x / 9.0).sin();
        if (y - 80.0).powi(2) + (x - 170.0).powi(2) < 45.0f64.powi(2) {
            v += 60.0;
        }
        if (150..230).contains(&r) && (30..130).contains(&c) {
            v = 190.0 - 0.3 * (y - 150.0);
            if ((r - 150) / 20) % 2 == 1 && ((c - 30) / 25) % 2 == 1 {
                v = 60.0;
            }
        }
        v.clamp(0.0, 255.0).round()
    })
}

fn denoise_dir(runs: &Runs, method: &str, tag: &str) -> PathBuf {
    runs.dir.join(format!("denoise-{method}-{tag}"))
}

fn run_denoise(runs: &Runs, image: &Path, method: &str, tag: &str) -> (bool, f64) {
    let dir = denoise_dir(runs, method, tag);
    let start = Instant::now();
    let out = run_cli(&[
        "denoise",
        "--image",
        image.to_str().unwrap(),
        "--sigma",
        "20",
        "--p",
        "0",
        "--method",
        method,
        "--seed",
        "5",
        "--out-dir",
        dir.to_str().unwrap(),
    ]);
    (out.status.success(), start.elapsed().as_secs_f64())
}

fn ac5(runs: &mut Runs) -> Outcome {
    let image = runs.dir.join("scene.pgm");
    store_pgm(&test_scene(), &image, true).unwrap();
    let clean = load_pgm(&image).unwrap();
    let (_, grid) = extract_patches(&clean, 8, 1).unwrap();
    let count_ok = grid.len() == 62_001;

    let (gdl_ok, gdl_secs) = run_denoise(runs, &image, "gdl", "a");
    let (dct_ok, _) = run_denoise(runs, &image, "dct", "a");
    if !(gdl_ok && dct_ok) {
        return Outcome {
            id: "AC-5",
            pass: false,
            detail: "denoise run failed".into(),
        };
    }
    let g = denoise_dir(runs, "gdl", "a").join("metrics.csv");
    let d = denoise_dir(runs, "dct", "a").join("metrics.csv");
    let (noisy, gdl) = (
        column_f64(&g, "psnr_noisy_db")[0],
        column_f64(&g, "psnr_recon_db")[0],
    );
    let dct = column_f64(&d, "psnr_recon_db")[0];
    let hist = denoise_dir(runs, "gdl", "a").join("history.csv");
    for n in column_f64(&hist, "nnz")
        .into_iter()
        .chain(column_f64(&hist, "coding_nnz"))
    {
        runs.budget_checks += 1;
        if n > 15_000.0 {
            runs.violations += 1;
        }
    }
    let pass = count_ok && gdl >= noisy + 2.0 && dct > noisy && gdl_secs <= 1800.0;
    Outcome {
        id: "AC-5",
        pass,
        detail: format!(
            "{} patches; PSNR noisy {noisy:.2} dB, GDL {gdl:.2} dB (+{:.2}), DCT {dct:.2} dB; GDL run {gdl_secs:.0}s",
            grid.len(),
            gdl - noisy
        ),
    }
}

fn ac6(runs: &Runs) -> Outcome {
    Outcome {
        id: "AC-6",
        pass: runs.violations == 0 && runs.budget_checks > 0,
        detail: format!(
            "{} stage checks across AC-1, AC-2, AC-5, {} violations",
            runs.budget_checks, runs.violations
        ),
    }
}

fn files_equal(a: &Path, b: &Path) -> Result<(), String> {
    let mut names: Vec<_> = fs::read_dir(a)
        .map_err(|e| e.to_string())?
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    for name in &names {
        let (x, y) = (
            fs::read(a.join(name)).unwrap(),
            fs::read(b.join(name)).map_err(|e| e.to_string())?,
        );
        if x != y {
            return Err(format!("{} differs", name.to_string_lossy()));
        }
    }
    Ok(())
}

fn ac7(runs: &Runs) -> Outcome {
    let mut problems = Vec::new();
    let first = synth_dir(runs, 7, "a");
    let again = synth_dir(runs, 7, "b");
    let out = run_cli(&[
        "synth-bench",
        "--series",
        "1",
        "--sigma-list",
        "0,0.05",
        "--method",
        "gdl",
        "--K",
        "4500",
        "--iters",
        "100",
        "--seed",
        "7",
        "--out-dir",
        again.to_str().unwrap(),
    ]);
    if !out.status.success() {
        problems.push("synth-bench rerun failed".to_owned());
    } else if let Err(e) = files_equal(&first, &again) {
        problems.push(format!("synth-bench: {e}"));
    }
    let image = runs.dir.join("scene.pgm");
    let (ok, _) = run_denoise(runs, &image, "gdl", "b");
    if !ok {
        problems.push("denoise rerun failed".to_owned());
    } else if let Err(e) = files_equal(
        &denoise_dir(runs, "gdl", "a"),
        &denoise_dir(runs, "gdl", "b"),
    ) {
        problems.push(format!("denoise: {e}"));
    }
    Outcome {
        id: "AC-7",
        pass: problems.is_empty(),
        detail: if problems.is_empty() {
            "synth-bench (seed 7) and denoise reruns byte-identical".into()
        } else {
            problems.join("; ")
        },
    }
}

fn per_iteration_seconds(n: usize, seed: u64) -> f64 {
    let spec = SyntheticSpec {
        d: 20,
        m: 50,
        n,
        sparsity: SparsityMode::PerColumn(3),
        noise_sigma: 0.05,
    };
    let data = gen_synthetic(&spec, seed).unwrap();
    let cfg = GdlConfig::new(50, 3 * n, seed)
        .with_max_iters(10)
        .with_objective_tol(0.0);
    let model = gdl_learn(&data.noisy, &cfg, None).unwrap();
    // median over iterations so a single scheduler stall does not dominate
    median(model.history.records.iter().map(|r| r.seconds).collect())
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn ac8() -> Outcome {
    // sizes interleaved so drifting machine load hits both alike
    let (mut small, mut large) = (Vec::new(), Vec::new());
    for s in 0..3 {
        small.push(per_iteration_seconds(750, 80 + s));
        large.push(per_iteration_seconds(1500, 80 + s));
    }
    let (small, large) = (median(small), median(large));
    let ratio = large / small;
    Outcome {
        id: "AC-8",
        pass: (1.5..=3.5).contains(&ratio),
        detail: format!(
            "per-iteration {:.2} ms at n=750, {:.2} ms at n=1500, ratio {ratio:.2}",
            small * 1e3,
            large * 1e3
        ),
    }
}

fn ac9() -> Outcome {
    let mut notes = Vec::new();
    // DR invariance under shuffling and sign flips
    let mut rng = seeded_rng(909);
    let truth = normalize_columns(&DenseMatrix::from_fn(20, 50, |_, _| rng.normal())).unwrap();
    let perm = rng.sample_indices(50, 50);
    let shuffled = DenseMatrix::from_fn(20, 50, |r, c| {
        let s = if c % 3 == 0 { -1.0 } else { 1.0 };
        s * truth.get(r, perm[c])
    });
    let dr = dictionary_recovery_rate(&truth, &shuffled, RECOVERY_THRESHOLD).unwrap();
    let dr_ok = dr == 1.0;
    notes.push(format!("DR on shuffled/flipped truth {dr}"));

    // PSNR fixed points
    let zeros = GrayImage::filled(4, 4, 0.0);
    let p255 = psnr(&zeros, &GrayImage::filled(4, 4, 255.0)).unwrap();
    let p25 = psnr(&zeros, &GrayImage::filled(4, 4, 25.5)).unwrap();
    let psnr_ok = p255.abs() < 1e-12 && (p25 - 20.0).abs() < 1e-12;
    notes.push(format!("PSNR {p255} dB and {p25} dB"));

    // usage map: 3x3 image, 2x2 patches with 1, 2, 3, 4 nonzeros
    let grid = PatchGrid::new((3, 3), 2, 1, (0, 0)).unwrap();
    let mut trip = Vec::new();
    for (j, count) in [1, 2, 3, 4].into_iter().enumerate() {
        for r in 0..count {
            trip.push((r, j, 1.0));
        }
    }
    let a = SparseCoeffMatrix::from_triplets(4, 4, 10, trip).unwrap();
    let raw = atom_usage_raw(&a, &grid).unwrap();
    let want = [1.0, 1.5, 2.0, 2.0, 2.5, 3.0, 3.0, 3.5, 4.0];
    let raw_ok = raw
        .pixels()
        .iter()
        .zip(want)
        .all(|(g, w)| (g - w).abs() < 1e-12);
    let shown = atom_usage_map(&a, &grid).unwrap();
    let map_ok = shown
        .pixels()
        .iter()
        .zip(want)
        .all(|(g, w)| (g - 255.0 * (w - 1.0) / 3.0).abs() < 1e-9);
    notes.push(format!("usage map {:?}", raw.pixels()));
    Outcome {
        id: "AC-9",
        pass: dr_ok && psnr_ok && raw_ok && map_ok,
        detail: notes.join("; "),
    }
}

fn main() {
    // `cargo test -- --list` and similar probes pass flags; run only on a plain invocation
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let tmp = tempfile::tempdir().expect("temp dir");
    let mut runs = Runs {
        dir: tmp.path().to_owned(),
        violations: 0,
        budget_checks: 0,
    };
    let mut outcomes = Vec::new();
    let t = Instant::now();
    outcomes.push(ac1(&mut runs));
    outcomes.push(ac2(&mut runs));
    outcomes.push(ac3());
    outcomes.push(ac4());
    outcomes.push(ac5(&mut runs));
    outcomes.push(ac6(&runs));
    outcomes.push(ac7(&runs));
    outcomes.push(ac8());
    outcomes.push(ac9());
    println!();
    for o in &outcomes {
        println!(
            "{} {}: {}",
            o.id,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    let failed = outcomes.iter().filter(|o| !o.pass).count();
    println!(
        "acceptance: {} passed, {failed} failed in {:.0}s",
        outcomes.len() - failed,
        t.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
