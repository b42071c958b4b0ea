//! One PASS/FAIL line per acceptance criterion. Oracles are written out
//! here independently of the library paths they check.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use finola::analysis::{dct_baseline, gaussian_curvature_with_spacing, psnr_slices, quantize_uniform, QuantSpec};
use finola::cli::bench_parallel;
use finola::finola::{propagate, FeatureMap, FinolaParams, LatentSet, Position, ScanOrder};
use finola::image::Image;
use finola::io::{decode_pnm, encode_pnm, Checkpoint};
use finola::linalg::{eig_real_nonsymmetric, Matrix};
use finola::masked::{LocationClass, QuadrantMask};
use finola::model::{
    evaluate_psnr, mean_image_baseline_psnr, model_grad_check, synthetic_images, train, GradCheckOptions, Model,
    ModelConfig, TrainConfig,
};
use finola::wave::{build_wave_basis, materialize_constrained, project_map, propagate_projected, ConstrainedParams};

struct Outcome {
    pass: bool,
    detail: String,
    /// Failures that depend on the host rather than the code (reported, not
    /// asserted).
    host_limited: bool,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome {
        pass,
        detail,
        host_limited: false,
    }
}

fn within(t: Instant, budget_s: f64) -> (bool, String) {
    let e = t.elapsed().as_secs_f64();
    (e < budget_s, format!("{e:.2}s/{budget_s}s"))
}

fn seeded(c: usize, seed: u64) -> (Vec<f64>, FinolaParams<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = FinolaParams::random(c, &mut rng);
    let q = (0..c).map(|_| rng.gen_range(-1.0..1.0)).collect();
    (q, p)
}

/// `z + M·(z − μ)/(σ + ε)` with population σ, written out with plain loops.
fn oracle_step(z: &[f64], m: &Matrix<f64>, eps: f64) -> Vec<f64> {
    let c = z.len() as f64;
    let mu = z.iter().sum::<f64>() / c;
    let sigma = (z.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / c).sqrt();
    let zh: Vec<f64> = z.iter().map(|v| (v - mu) / (sigma + eps)).collect();
    (0..z.len())
        .map(|i| z[i] + (0..z.len()).map(|j| m.row(i)[j] * zh[j]).sum::<f64>())
        .collect()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Solves `X·B = A` by Gauss–Jordan with partial pivoting on `Bᵀ Xᵀ = Aᵀ`.
fn right_divide(a: &Matrix<f64>, b: &Matrix<f64>) -> Matrix<f64> {
    let n = a.rows();
    let mut m: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| b.row(j)[i]).chain((0..n).map(|j| a.row(j)[i])).collect())
        .collect();
    for col in 0..n {
        let piv = (col..n).max_by(|&x, &y| m[x][col].abs().total_cmp(&m[y][col].abs())).unwrap();
        m.swap(col, piv);
        let d = m[col][col];
        m[col].iter_mut().for_each(|v| *v /= d);
        for r in 0..n {
            if r != col {
                let f = m[r][col];
                let pivot_row = m[col].clone();
                m[r].iter_mut().zip(&pivot_row).for_each(|(v, p)| *v -= f * p);
            }
        }
    }
    Matrix::from_fn(n, n, |i, j| m[j][n + i])
}

fn criterion_1() -> Outcome {
    let t = Instant::now();
    let (w, h, c) = (16, 16, 8);
    let mut worst = 0.0f64;
    for seed in 0..10 {
        let (q, p) = seeded(c, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let (x0, y0) = (rng.gen_range(0..w), rng.gen_range(0..h));
        let origin = Position::At(x0, y0);
        let zh = propagate(&q, origin, &p, w, h, ScanOrder::HorizontalFirst).unwrap();
        let zv = propagate(&q, origin, &p, w, h, ScanOrder::VerticalFirst).unwrap();
        let mut check = |z: &FeatureMap<f64>, from: (usize, usize), to: (usize, usize), m: &Matrix<f64>| {
            worst = worst.max(max_diff(z.cell(to.0, to.1), &oracle_step(z.cell(from.0, from.1), m, p.epsilon)));
        };
        for x in 0..w {
            for y in 0..h {
                // Horizontal-first: origin row grows sideways, columns grow vertically.
                if y == y0 && x > x0 {
                    check(&zh, (x - 1, y), (x, y), &p.a);
                }
                if y == y0 && x < x0 {
                    check(&zh, (x + 1, y), (x, y), &p.a_minus);
                }
                if y > y0 {
                    check(&zh, (x, y - 1), (x, y), &p.b);
                }
                if y < y0 {
                    check(&zh, (x, y + 1), (x, y), &p.b_minus);
                }
                // Vertical-first: the transpose of the above.
                if x == x0 && y > y0 {
                    check(&zv, (x, y - 1), (x, y), &p.b);
                }
                if x == x0 && y < y0 {
                    check(&zv, (x, y + 1), (x, y), &p.b_minus);
                }
                if x > x0 {
                    check(&zv, (x - 1, y), (x, y), &p.a);
                }
                if x < x0 {
                    check(&zv, (x + 1, y), (x, y), &p.a_minus);
                }
            }
        }
    }
    let (fast, time) = within(t, 1.0);
    outcome(worst <= 1e-10 && fast, format!("max step error {worst:.2e} (≤ 1e-10), {time}"))
}

fn criterion_2() -> Outcome {
    let t = Instant::now();
    let (w, h, c) = (16, 16, 8);
    let mut worst = 0.0f64;
    for seed in 0..10 {
        let (q, p) = seeded(c, seed);
        let qm = right_divide(&p.a, &p.b);
        let z = propagate(&q, Position::Center, &p, w, h, ScanOrder::HorizontalFirst).unwrap();
        let (x0, y0) = (w / 2, h / 2);
        for x in x0..w - 1 {
            let dx: Vec<f64> = z.cell(x + 1, y0).iter().zip(z.cell(x, y0)).map(|(a, b)| a - b).collect();
            let dy: Vec<f64> = z.cell(x, y0 + 1).iter().zip(z.cell(x, y0)).map(|(a, b)| a - b).collect();
            let qdy: Vec<f64> = (0..c).map(|i| (0..c).map(|j| qm.row(i)[j] * dy[j]).sum()).collect();
            worst = worst.max(max_diff(&dx, &qdy));
        }
    }
    let (fast, time) = within(t, 1.0);
    outcome(worst <= 1e-8 && fast, format!("max |Δx z − QΔy z| {worst:.2e} (≤ 1e-8), {time}"))
}

fn criterion_3() -> Outcome {
    let t = Instant::now();
    let mut worst = 0.0f64;
    for seed in 0..10 {
        let (q, p) = seeded(8, seed);
        let basis = build_wave_basis(&p).unwrap();
        for order in [ScanOrder::HorizontalFirst, ScanOrder::VerticalFirst, ScanOrder::Averaged] {
            let z = propagate(&q, Position::Center, &p, 9, 9, order).unwrap();
            // V⁻¹ applied cell by cell with explicit sums.
            let vinv = &basis.v_inv;
            let want: Vec<Complex64> = z
                .as_slice()
                .chunks(8)
                .flat_map(|cell| {
                    (0..8)
                        .map(|i| (0..8).map(|j| vinv.row(i)[j] * cell[j]).sum::<Complex64>())
                        .collect::<Vec<_>>()
                })
                .collect();
            let got = propagate_projected(&q, Position::Center, &basis, 9, 9, order).unwrap();
            let scale = want.iter().fold(0.0f64, |m, v| m.max(v.norm()));
            let dev = want.iter().zip(got.as_slice()).fold(0.0f64, |m, (a, b)| m.max((a - b).norm()));
            worst = worst.max(dev / scale);
            // The library projection agrees with the explicit one.
            let lib = project_map(&z, &basis).unwrap();
            assert!(lib.as_slice().iter().zip(&want).all(|(a, b)| (a - b).norm() <= 1e-12 * scale));
        }
    }
    let (fast, time) = within(t, 5.0);
    outcome(worst <= 1e-6 && fast, format!("max relative deviation {worst:.2e} (≤ 1e-6), {time}"))
}

fn criterion_4() -> Outcome {
    let t = Instant::now();
    let (mut worst, mut pairing) = (0.0f64, 0.0f64);
    for i in 0..20u64 {
        let n = 2 + (62 * i as usize) / 19;
        let mut rng = ChaCha8Rng::seed_from_u64(400 + i);
        let q = Matrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let eig = eig_real_nonsymmetric(&q).unwrap();
        let (v, l) = (&eig.vectors, &eig.values);
        let mut num = 0.0;
        for r in 0..n {
            for k in 0..n {
                let qv: Complex64 = (0..n).map(|j| q.row(r)[j] * v.row(j)[k]).sum();
                num += (qv - v.row(r)[k] * l[k]).norm_sqr();
            }
        }
        let den: f64 = q.as_slice().iter().map(|x| x * x).sum();
        worst = worst.max((num / den).sqrt());
        for a in l {
            let nearest = l.iter().map(|b| (b - a.conj()).norm()).fold(f64::INFINITY, f64::min);
            pairing = pairing.max(nearest);
        }
    }
    let (fast, time) = within(t, 10.0);
    outcome(
        worst <= 1e-8 && pairing <= 1e-8 && fast,
        format!("max ‖QV−VΛ‖_F/‖Q‖_F {worst:.2e} (≤ 1e-8), conjugate pairing {pairing:.2e}, {time}"),
    )
}

fn criterion_5() -> Outcome {
    let (mut real_err, mut one_err, mut imag) = (0.0f64, 0.0f64, 0.0f64);
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(500 + seed);
        let c = 8;
        let p = Matrix::from_fn(c, c, |i, j| if i == j { 1.5 } else { 0.0 } + rng.gen_range(-0.4..0.4));
        let alpha: Vec<f64> = (0..c).map(|_| rng.gen_range(0.5..1.5)).collect();
        let beta: Vec<f64> = (0..c).map(|_| rng.gen_range(0.5..1.5)).collect();
        let params = materialize_constrained(&ConstrainedParams::RealSpeed { p: p.clone(), alpha: alpha.clone(), beta: beta.clone() }, 1e-12).unwrap();
        let basis = build_wave_basis(&params).unwrap();
        let mut got: Vec<f64> = basis.speeds().iter().map(|l| l.re).collect();
        imag = basis.speeds().iter().fold(imag, |m, l| m.max(l.im.abs()));
        let mut want: Vec<f64> = alpha.iter().zip(&beta).map(|(a, b)| a / b).collect();
        got.sort_by(f64::total_cmp);
        want.sort_by(f64::total_cmp);
        real_err = real_err.max(max_diff(&got, &want));

        let params = materialize_constrained(&ConstrainedParams::AllOne { p }, 1e-12).unwrap();
        let basis = build_wave_basis(&params).unwrap();
        one_err = basis.speeds().iter().fold(one_err, |m, l| m.max((l - 1.0).norm()));
    }
    outcome(
        real_err <= 1e-8 && imag < 1e-8 && one_err <= 1e-10,
        format!("real_speed |λ−α/β| {real_err:.2e}, max |Im λ| {imag:.2e} (≤ 1e-8); all_one |λ−1| {one_err:.2e} (≤ 1e-10)"),
    )
}

fn criterion_6() -> Outcome {
    let t = Instant::now();
    let rows = bench_parallel(64, 16, &[1, 8], 15, 6).unwrap();
    let (one, eight) = (&rows[0], &rows[1]);
    let equal = rows.iter().all(|r| r.max_rel_dev <= 1e-6);
    let faster = eight.seconds <= one.seconds;
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    let (fast, time) = within(t, 30.0);
    Outcome {
        pass: equal && faster && fast,
        detail: format!(
            "max rel deviation {:.1e} (≤ 1e-6); median 1 worker {:.3} ms, 8 workers {:.3} ms on {cores} core(s); {time}",
            eight.max_rel_dev.max(one.max_rel_dev),
            one.seconds * 1e3,
            eight.seconds * 1e3
        ),
        // With a single core the timing comparison measures noise.
        host_limited: equal && fast && cores == 1,
    }
}

fn criterion_7() -> Outcome {
    let t = Instant::now();
    let cfg = ModelConfig::gradcheck();
    let model = Model::<f64>::new(cfg.clone(), &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
    let images = synthetic_images(2, cfg.image_width, cfg.image_height, 7);
    let refs: Vec<&Image> = images.iter().collect();
    let report = model_grad_check(&model, &refs, &GradCheckOptions::default()).unwrap();
    let checked: usize = report.groups.iter().map(|g| g.checked).sum();
    let worst = report.max_rel_error();
    let (fast, time) = within(t, 120.0);
    outcome(
        worst < 1e-3 && fast && checked == model.params.count(),
        format!("max rel error {worst:.2e} (< 1e-3) over {checked} entries in {} groups, {time}", report.groups.len()),
    )
}

fn criterion_8() -> Outcome {
    let t = Instant::now();
    let data = synthetic_images(512, 16, 16, 2024);
    let baseline = mean_image_baseline_psnr(&data);
    let mut means = [0.0f64; 2];
    let mut runs = Vec::new();
    for seed in 0..3u64 {
        for (i, m) in [1usize, 4].into_iter().enumerate() {
            let mut model = Model::<f32>::new(ModelConfig::desk(16, m), &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            train(&mut model, &data, &TrainConfig::desk(), seed, |_| {}).unwrap();
            let v = evaluate_psnr(&model, &data).unwrap();
            means[i] += v / 3.0;
            runs.push(format!("s{seed}/M{m}={v:.2}"));
        }
    }
    let (fast, time) = within(t, 1800.0);
    outcome(
        means[0] >= baseline + 3.0 && means[1] >= baseline + 3.0 && means[1] >= means[0] - 0.1 && fast,
        format!(
            "baseline {baseline:.2} dB; mean M=1 {:.2} dB, M=4 {:.2} dB [{}]; {time}",
            means[0],
            means[1],
            runs.join(" ")
        ),
    )
}

fn criterion_9() -> Outcome {
    let t = Instant::now();
    let images = synthetic_images(20, 32, 24, 9);
    let ks = [1usize, 3, 6, 10, 64];
    let (mut lossless, mut monotone) = (0.0f64, true);
    let mut means = [0.0f64; 5];
    for img in &images {
        let values: Vec<f64> = ks
            .iter()
            .map(|&k| psnr_slices(img.as_slice(), dct_baseline(img, k).as_slice(), 1.0).unwrap())
            .collect();
        monotone &= values.windows(2).all(|w| w[1] >= w[0]);
        for (m, v) in means.iter_mut().zip(&values) {
            *m += v / images.len() as f64;
        }
        lossless = lossless.max(max_diff(img.as_slice(), dct_baseline(img, 64).as_slice()));
    }
    let (fast, time) = within(t, 10.0);
    let curve: Vec<String> = ks.iter().zip(&means).map(|(k, m)| format!("K{k}={m:.1}")).collect();
    outcome(
        lossless <= 1e-6 && monotone && fast,
        format!("K=64 max error {lossless:.1e} (≤ 1e-6); per-image PSNR nondecreasing: {monotone} [{}]; {time}", curve.join(" ")),
    )
}

fn criterion_10() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let sets: Vec<LatentSet<f64>> = (0..64)
        .map(|_| LatentSet::centered((0..4).map(|_| (0..16).map(|k| rng.gen_range(-1.0..1.0) * (k + 1) as f64).collect()).collect()))
        .collect();
    let spec = QuantSpec::fit(8, &sets).unwrap();
    let mut ratio = 0.0f64;
    let mut elements = 0;
    for set in &sets {
        let qz = quantize_uniform(set, &spec, 16, 16).unwrap();
        for (v, d) in set.vectors.iter().zip(&qz.dequantized.vectors) {
            for (k, (x, y)) in v.iter().zip(d).enumerate() {
                ratio = ratio.max((x - y).abs() / spec.step(k));
                elements += 1;
            }
        }
    }
    let (fast, time) = within(t, 1.0);
    outcome(
        ratio <= 0.5 * (1.0 + 1e-12) && fast,
        format!("max |error|/step {ratio:.6} (≤ 0.5) over {elements} elements, {time}"),
    )
}

fn criterion_11() -> Outcome {
    let t = Instant::now();
    let n = 41;
    let h = 0.1;
    let coord = |i: usize| (i as f64 - (n / 2) as f64) * h;
    let plane = FeatureMap::from_vec(n, n, 1, (0..n * n).map(|i| 0.3 * coord(i % n) - 0.7 * coord(i / n) + 2.0).collect()).unwrap();
    let flat = gaussian_curvature_with_spacing(&plane, h).kappa[0].iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let r = 10.0f64;
    let sphere = FeatureMap::from_vec(
        n,
        n,
        1,
        (0..n * n).map(|i| (r * r - coord(i % n).powi(2) - coord(i / n).powi(2)).sqrt()).collect(),
    )
    .unwrap();
    let field = gaussian_curvature_with_spacing(&sphere, h);
    let mut worst = 0.0f64;
    for y in 1..n - 1 {
        for x in 1..n - 1 {
            worst = worst.max((field.at(0, x, y) - 0.01).abs() / 0.01);
        }
    }
    let (fast, time) = within(t, 1.0);
    outcome(
        flat < 1e-12 && worst <= 0.02 && fast,
        format!("plane max |κ| {flat:.1e} (< 1e-12); sphere interior max |κ/0.01 − 1| {:.3}% (≤ 2%), {time}", worst * 100.0),
    )
}

fn criterion_12() -> Outcome {
    let t = Instant::now();
    let mut ok = true;
    let mut counts = [0usize; 3];
    for n in [8usize, 16] {
        for ox in 0..=n / 2 {
            for oy in 0..=n / 2 {
                let mask = QuadrantMask::new(n, n, ox, oy).unwrap();
                let (idx, want) = match mask.class {
                    LocationClass::Corner => (0, 1),
                    LocationClass::Edge => (1, 2),
                    LocationClass::Middle => (2, 4),
                };
                counts[idx] += 1;
                ok &= mask.groups.len() == want;
                let mut hits = vec![0usize; n * n];
                for g in &mask.groups {
                    for cell in &g.cells {
                        ok &= mask.is_unmasked(cell.source.0, cell.source.1);
                        for (x, y) in [cell.horizontal, cell.vertical, cell.diagonal] {
                            hits[y * n + x] += 1;
                        }
                    }
                }
                for y in 0..n {
                    for x in 0..n {
                        ok &= hits[y * n + x] == usize::from(!mask.is_unmasked(x, y));
                    }
                }
            }
        }
    }
    let (fast, time) = within(t, 5.0);
    outcome(
        ok && fast && counts.iter().all(|&c| c > 0),
        format!("corner/edge/middle placements {counts:?} with 1/2/4 groups and exact single cover: {ok}, {time}"),
    )
}

fn run_cli(dir: &Path, args: &[&str]) -> String {
    let out = Command::new(env!("CARGO_BIN_EXE_finola")).args(args).current_dir(dir).output().unwrap();
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn criterion_13() -> Outcome {
    // Library round trips.
    let mut ok = true;
    for seed in 0..3 {
        let m32 = Model::<f32>::new(ModelConfig::desk(8, 2), &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let ck = Checkpoint::from_model(&m32, seed, 5, &[]);
        let back = Checkpoint::from_bytes(&ck.to_bytes()).unwrap();
        ok &= back.to_bytes() == ck.to_bytes() && back.to_model::<f32>().unwrap() == m32;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for magic in ["P5", "P6"] {
        let ch = if magic == "P5" { 1 } else { 3 };
        let mut bytes = format!("{magic}\n7 5\n255\n").into_bytes();
        bytes.extend((0..35 * ch).map(|_| rng.gen::<u8>()));
        ok &= encode_pnm(&decode_pnm(&bytes).unwrap()).unwrap() == bytes;
    }

    // Every seeded subcommand twice, comparing file outputs byte for byte.
    let runs: Vec<Vec<Vec<u8>>> = (0..2)
        .map(|_| {
            let dir = tempfile::tempdir().unwrap();
            let d = dir.path();
            std::fs::write(
                d.join("run.cfg"),
                "channels = 6\npaths = 2\ndataset = synthetic:16\nepochs = 2\nwarmup_epochs = 1\nbatch_size = 8\nseed = 4\n",
            )
            .unwrap();
            let img = synthetic_images(1, 16, 16, 99).remove(0);
            std::fs::write(d.join("in.pgm"), encode_pnm(&img).unwrap()).unwrap();
            run_cli(d, &["train", "--config", "run.cfg", "--checkpoint", "ck.bin", "--metrics", "m.csv"]);
            run_cli(d, &["reconstruct", "--checkpoint", "ck.bin", "--image", "in.pgm", "--out", "rec.pgm", "--psnr"]);
            run_cli(d, &["waves", "--checkpoint", "ck.bin", "--out", "spec.csv", "--residual", "res.csv", "--seed", "3"]);
            run_cli(d, &["curvature", "--checkpoint", "ck.bin", "--image", "in.pgm", "--out", "curv.csv", "--heatmaps", "hm"]);
            run_cli(d, &["compress", "--checkpoint", "ck.bin", "--out", "comp.csv"]);
            run_cli(d, &["baseline-dct", "--out", "dct.csv"]);
            run_cli(d, &["latent-study", "--checkpoint", "ck.bin", "--out", "lat.csv", "--frames", "fr", "--seed", "2"]);
            run_cli(d, &["gradcheck", "--seed", "1", "--max-per-group", "3", "--out", "gc.csv"]);
            let mut files: Vec<_> = walk(d);
            files.sort();
            files
                .iter()
                .map(|p| {
                    let mut v = p.strip_prefix(d).unwrap().to_string_lossy().as_bytes().to_vec();
                    v.extend(std::fs::read(p).unwrap());
                    v
                })
                .collect()
        })
        .collect();
    let identical = runs[0] == runs[1];
    outcome(
        ok && identical,
        format!("checkpoint/PGM round trips bitwise: {ok}; {} CLI output files identical across two runs: {identical}", runs[0].len()),
    )
}

fn walk(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(walk(&p));
        } else {
            out.push(p);
        }
    }
    out
}

#[test]
fn acceptance() {
    let criteria: [(usize, fn() -> Outcome); 13] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
        (10, criterion_10),
        (11, criterion_11),
        (12, criterion_12),
        (13, criterion_13),
    ];
    let mut failures = Vec::new();
    let start = Instant::now();
    for (n, f) in criteria {
        let o = f();
        let tag = match (o.pass, o.host_limited) {
            (true, _) => "PASS",
            (false, true) => "FAIL (host-limited)",
            (false, false) => "FAIL",
        };
        println!("criterion {n:>2}: {tag} — {}", o.detail);
        if !o.pass && !o.host_limited {
            failures.push(n);
        }
    }
    println!("acceptance finished in {:?}", Duration::from_secs(start.elapsed().as_secs()));
    assert!(failures.is_empty(), "failed criteria: {failures:?}");
}
