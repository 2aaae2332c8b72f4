//! Acceptance suite. Each check prints one PASS/FAIL line; the process exits
//! non-zero if any check fails.

mod common;

use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use latent_decode::dataio::{
    decode_csv, decode_ldm, encode_csv, encode_ldm, read_image_set, read_matrix, write_eigen_model,
    write_matrix, write_netpbm, MatrixFormat, NetpbmImage,
};
use latent_decode::eigenimage::fit_pca;
use latent_decode::linmap::{augment_bias, decode_latents, fit_encoder, rescale_latents};
use latent_decode::metrics::{pairwise_decoding_accuracy, pearson};
use latent_decode::roi::union_masks;
use latent_decode::synth::{
    decoding_accuracy, generate, noise_sweep, oracle_pairwise, EvalOptions, NormalStream,
};
use latent_decode::{DecodeOptions, EigenImageModel, EncoderMap, ImageGeometry, Matrix, SynthConfig};

type Check = Result<String, String>;
type Entry = (&'static str, &'static str, fn() -> Check, Option<Duration>);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn lib<T>(r: latent_decode::Result<T>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn normal_matrix(rng: &mut NormalStream, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.standard_normal())
}

fn inverse_identity() -> Check {
    let config = SynthConfig {
        n_train: 300,
        latent_dim: 20,
        n_voxels: 200,
        noise_sigma: 0.0,
        seed: 1,
        ..SynthConfig::default()
    };
    let ds = lib(generate(&config))?;
    let map = lib(fit_encoder(&ds.x_train, &ds.y_train, 0.0))?;
    let opts = DecodeOptions { center_test: false, rescale: false, drop_bias: true };
    let decoded = lib(decode_latents(&map, &ds.y_test, opts))?;
    let err = decoded.latents.max_abs_diff(&ds.test_latents()).ok_or("shape mismatch")?;
    let report = lib(pairwise_decoding_accuracy(&ds.test_latents(), &decoded.latents))?;
    ensure(err < 1e-6, || format!("max abs error {err:e} >= 1e-6"))?;
    ensure(report.accuracy == 1.0, || format!("accuracy {} != 1", report.accuracy))?;
    Ok(format!("max abs error {err:.2e}, accuracy {:.6}", report.accuracy))
}

fn encoder_recovery() -> Check {
    let mut worst: f64 = 0.0;
    for seed in 0..20u64 {
        let mut rng = NormalStream::new(seed);
        let x = augment_bias(&normal_matrix(&mut rng, 200, 120));
        let w = normal_matrix(&mut rng, 121, 50);
        let y = lib(x.matmul(&w))?;
        let map = lib(fit_encoder(&x, &y, 0.0))?;
        let rel = lib(map.w.sub(&w))?.frobenius_norm() / w.frobenius_norm();
        ensure(rel < 1e-8, || format!("seed {seed}: relative error {rel:e}"))?;
        worst = worst.max(rel);
    }
    Ok(format!("20 seeds, worst relative Frobenius error {worst:.2e}"))
}

fn metric_oracle() -> Check {
    let mut rng = NormalStream::new(2024);
    let mut with_ties = 0;
    for instance in 0..200 {
        let v = normal_matrix(&mut rng, 10, 8);
        let mut p = normal_matrix(&mut rng, 10, 8);
        // every fourth instance duplicates a prediction row to force ties
        if instance % 4 == 0 {
            let copy = p.row(0).to_vec();
            p.row_mut(1).copy_from_slice(&copy);
        }
        let fast = lib(pairwise_decoding_accuracy(&v, &p))?;
        let slow = lib(oracle_pairwise(&v, &p))?;
        ensure(fast.n_correct == slow.n_correct && fast.n_ties == slow.n_ties, || {
            format!("instance {instance}: {fast:?} vs oracle {slow:?}")
        })?;
        if fast.n_ties > 0 {
            with_ties += 1;
        }
    }
    Ok(format!("200 instances agree exactly ({with_ties} with ties)"))
}

fn close(label: &str, got: f64, want: f64) -> Result<(), String> {
    ensure((got - want).abs() <= 1e-9, || format!("{label}: got {got}, want {want}"))
}

fn hand_fixtures() -> Check {
    close("pearson", lib(pearson(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0]))?, 0.5)?;

    let w = lib(Matrix::from_rows(&[[2.0, 0.0], [0.0, 0.5]]))?;
    let map = EncoderMap {
        w,
        latent_dim: 1,
        n_voxels: 2,
        train_latent_mean: vec![0.0],
        train_latent_std: vec![1.0],
        ridge_lambda: 0.0,
        fit_residual_rms: 0.0,
    };
    let raw = DecodeOptions { center_test: false, rescale: false, drop_bias: false };
    let x = lib(decode_latents(&map, &lib(Matrix::from_rows(&[[1.0, 1.0]]))?, raw))?.latents;
    close("decode x0", x[(0, 0)], 0.5)?;
    close("decode x1", x[(0, 1)], 2.0)?;

    let map = EncoderMap {
        w: Matrix::identity(2),
        train_latent_mean: vec![5.0],
        train_latent_std: vec![2.0],
        ..map
    };
    let (r, _) = lib(rescale_latents(&lib(Matrix::from_rows(&[[0.0], [2.0]]))?, &map))?;
    close("rescale low", r[(0, 0)], 3.0)?;
    close("rescale high", r[(1, 0)], 7.0)?;

    let pts = lib(Matrix::from_rows(&[[0.0, 0.0], [2.0, 2.0]]))?;
    let geometry = ImageGeometry { height: 1, width: 2, channels: 1 };
    let model = lib(EigenImageModel::fit(&pts, 1, geometry))?;
    let h = 2f64.sqrt() / 2.0;
    close("pca mean", model.mean_pixel[0], 1.0)?;
    close("pca mean", model.mean_pixel[1], 1.0)?;
    close("pca component", model.components[(0, 0)], h)?;
    close("pca component", model.components[(0, 1)], h)?;
    close("pca variance", model.explained_variance[0], 2.0)?;
    let c = lib(model.project(&lib(Matrix::from_rows(&[[2.0, 2.0]]))?))?;
    close("pca project", c[(0, 0)], 2f64.sqrt())?;
    let back = lib(model.reconstruct(&lib(Matrix::from_rows(&[[2f64.sqrt()]]))?, false))?;
    close("pca reconstruct", back[(0, 0)], 2.0)?;
    close("pca reconstruct", back[(0, 1)], 2.0)?;

    let v = lib(Matrix::from_rows(&[[1.0, 2.0, 3.0], [3.0, 1.0, 2.0]]))?;
    let p = lib(Matrix::from_rows(&[[3.0, 1.0, 2.0], [1.0, 2.0, 3.0]]))?;
    close("swapped accuracy", lib(pairwise_decoding_accuracy(&v, &p))?.accuracy, 0.0)?;
    Ok("pearson, decode, rescale, 2-point PCA, swapped pair".into())
}

fn noise_monotonicity() -> Check {
    let sigmas = [0.0, 0.5, 1.0, 2.0, 8.0];
    let reps = 20;
    let rows = lib(noise_sweep(&SynthConfig::default(), &sigmas, reps, &EvalOptions::default()))?;
    for pair in rows.windows(2) {
        let (prev, cur) = (&pair[0], &pair[1]);
        let se = ((prev.std_accuracy.powi(2) + cur.std_accuracy.powi(2)) / 2.0).sqrt()
            / (reps as f64).sqrt();
        ensure(cur.mean_accuracy <= prev.mean_accuracy + se, || {
            format!(
                "mean at sigma {} ({:.4}) exceeds sigma {} ({:.4}) + SE {se:.4}",
                cur.sigma, cur.mean_accuracy, prev.sigma, prev.mean_accuracy
            )
        })?;
    }
    let last = rows.last().unwrap().mean_accuracy;
    ensure((last - 0.5).abs() <= 0.06, || format!("sigma 8 mean {last:.4} outside 0.5 +/- 0.06"))?;
    let means: Vec<String> = rows.iter().map(|r| format!("{:.4}", r.mean_accuracy)).collect();
    Ok(format!("means [{}]", means.join(", ")))
}

fn region_union() -> Check {
    let seeds = 50;
    let mut wins = 0;
    for seed in 0..seeds {
        let config = SynthConfig { n_groups: 2, noise_sigma: 1.0, seed, ..SynthConfig::default() };
        let ds = lib(generate(&config))?;
        let vc = lib(union_masks(&ds.voxel_groups, "VC"))?;
        let opts = EvalOptions::default();
        let union = lib(decoding_accuracy(&ds, Some(&vc), &opts))?.accuracy;
        let mut best_single: f64 = 0.0;
        for g in &ds.voxel_groups {
            best_single = best_single.max(lib(decoding_accuracy(&ds, Some(g), &opts))?.accuracy);
        }
        if union > best_single {
            wins += 1;
        }
    }
    let share = wins as f64 / seeds as f64;
    ensure(share >= 0.9, || format!("union won in {wins}/{seeds} seeds"))?;
    Ok(format!("union beats every single group in {wins}/{seeds} seeds"))
}

fn blob_image(rng: &mut NormalStream, side: usize) -> NetpbmImage {
    let blobs: Vec<(f64, f64, f64, f64)> = (0..3)
        .map(|_| {
            (
                rng.uniform() * side as f64,
                rng.uniform() * side as f64,
                2.0 + 4.0 * rng.uniform(),
                0.3 + 0.7 * rng.uniform(),
            )
        })
        .collect();
    let pixels = (0..side * side)
        .map(|k| {
            let (r, c) = ((k / side) as f64, (k % side) as f64);
            let v: f64 = blobs
                .iter()
                .map(|&(cr, cc, s, a)| a * (-((r - cr).powi(2) + (c - cc).powi(2)) / (2.0 * s * s)).exp())
                .sum();
            (255.0 * (0.1 + 0.8 * v.min(1.0) + 0.03 * rng.standard_normal()).clamp(0.0, 1.0)).round() as u8
        })
        .collect();
    NetpbmImage { width: side, height: side, channels: 1, pixels }
}

fn reconstruction_error(model: &EigenImageModel, image: &Matrix) -> Result<f64, String> {
    let back = lib(model.reconstruct(&lib(model.project(image))?, false))?;
    Ok(lib(back.sub(image))?.frobenius_norm())
}

fn pca_codec() -> Check {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let corpus = tmp.path().join("corpus");
    let held = tmp.path().join("held");
    fs::create_dir_all(&corpus).and_then(|_| fs::create_dir_all(&held)).map_err(|e| e.to_string())?;
    let mut rng = NormalStream::new(99);
    for i in 0..200 {
        lib(write_netpbm(&blob_image(&mut rng, 32), &corpus.join(format!("{i:03}.pgm"))))?;
    }
    lib(write_netpbm(&blob_image(&mut rng, 32), &held.join("x.pgm")))?;
    let set = lib(read_image_set(&corpus))?;
    let held_out = lib(read_image_set(&held))?.images;

    let full = set.images.rows() - 1;
    let model = lib(fit_pca(&set, full))?;
    let gram = lib(model.components.matmul(&model.components.transpose()))?;
    let ortho = lib(gram.sub(&Matrix::identity(full)))?.max_abs();
    ensure(ortho < 1e-8, || format!("orthonormality error {ortho:e}"))?;
    let back = lib(model.reconstruct(&lib(model.project(&set.images))?, false))?;
    let round = back.max_abs_diff(&set.images).ok_or("shape mismatch")?;
    ensure(round < 1e-8, || format!("full-rank round trip error {round:e}"))?;

    let mut errors = Vec::new();
    for k in [1, 5, 20, full] {
        errors.push(reconstruction_error(&lib(fit_pca(&set, k))?, &held_out)?);
    }
    ensure(errors.windows(2).all(|e| e[1] <= e[0] + 1e-9), || format!("held-out errors {errors:?}"))?;

    let again = lib(fit_pca(&set, full))?;
    lib(write_eigen_model(&model, &tmp.path().join("a")))?;
    lib(write_eigen_model(&again, &tmp.path().join("b")))?;
    for suffix in ["mean.ldm", "components.ldm", "var.ldm", "meta.txt"] {
        let a = fs::read(tmp.path().join(format!("a.{suffix}"))).map_err(|e| e.to_string())?;
        let b = fs::read(tmp.path().join(format!("b.{suffix}"))).map_err(|e| e.to_string())?;
        ensure(a == b, || format!("model file {suffix} differs between runs"))?;
    }
    Ok(format!(
        "orthonormality {ortho:.1e}, round trip {round:.1e}, held-out errors {:.2} > {:.2} > {:.2} > {:.2}",
        errors[0], errors[1], errors[2], errors[3]
    ))
}

fn format_round_trips() -> Check {
    let mut rng = NormalStream::new(8);
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut worst_csv: f64 = 0.0;
    for i in 0..50 {
        let rows = 1 + (rng.uniform() * 40.0) as usize;
        let cols = 1 + (rng.uniform() * 12.0) as usize;
        let scale = 10f64.powf(6.0 * rng.uniform() - 3.0);
        let m = Matrix::from_fn(rows, cols, |_, _| scale * rng.standard_normal());
        let ldm_path = tmp.path().join(format!("m{i}.ldm"));
        lib(write_matrix(&m, &ldm_path, MatrixFormat::Ldm))?;
        let back = lib(read_matrix(&ldm_path, MatrixFormat::Ldm))?;
        ensure(back == m, || format!("matrix {i}: LDM round trip not bit-exact"))?;
        ensure(lib(decode_ldm(&lib(encode_ldm(&m))?, "mem"))? == m, || format!("matrix {i}: LDM codec"))?;
        let csv_path = tmp.path().join(format!("m{i}.csv"));
        lib(write_matrix(&m, &csv_path, MatrixFormat::Csv))?;
        let back = lib(read_matrix(&csv_path, MatrixFormat::Csv))?;
        let diff = back.max_abs_diff(&m).ok_or("csv shape changed")?;
        let mem = lib(decode_csv(encode_csv(&m).as_bytes(), "mem"))?;
        ensure(mem == back, || format!("matrix {i}: CSV file and memory codecs disagree"))?;
        ensure(diff <= 1e-12, || format!("matrix {i}: CSV error {diff:e}"))?;
        worst_csv = worst_csv.max(diff);
    }
    for name in ["tiny.pgm", "tiny.ppm"] {
        let original = fs::read(common::fixtures().join(name)).map_err(|e| e.to_string())?;
        let image = lib(NetpbmImage::parse(&original, name))?;
        let written = image.encode();
        let reread = lib(NetpbmImage::parse(&written, name))?;
        ensure(reread == image, || format!("{name}: pixels changed"))?;
        ensure(written == original, || format!("{name}: written bytes differ from the file read"))?;
        ensure(reread.encode() == original, || format!("{name}: second write differs"))?;
    }
    Ok(format!("50 matrices, LDM bit-exact, CSV max error {worst_csv:.1e}; P5 and P6 bytes stable"))
}

fn cli(dir: &Path, args: &[&str]) -> Result<String, String> {
    let o = common::run_in(dir, args);
    if o.code == 0 {
        Ok(o.stdout)
    } else {
        Err(format!("`latent-decode {}` exited {}: {}", args.join(" "), o.code, o.stderr.trim()))
    }
}

fn cli_workflow() -> Check {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let d = tmp.path();
    cli(d, &["synth", "generate", "--n-groups", "2", "--out-dir", "ds"])?;
    cli(d, &["roi", "union", "--masks", "ds/group0.txt,ds/group1.txt", "--name", "VC", "--out", "vc.txt"])?;
    let regions = [("V1", "ds/group0.txt"), ("V2", "ds/group1.txt"), ("VC", "vc.txt")];
    let mut pairs = Vec::new();
    for (name, mask) in regions {
        let train = format!("{name}.train.ldm");
        let test = format!("{name}.test.ldm");
        let map = format!("{name}.map");
        let pred = format!("{name}.pred.ldm");
        let report = format!("{name}.report.txt");
        cli(d, &["roi", "select", "--responses", "ds/responses_train.ldm", "--mask", mask, "--out", &train])?;
        cli(d, &["roi", "select", "--responses", "ds/responses_test.ldm", "--mask", mask, "--out", &test])?;
        cli(d, &["fit", "--latents", "ds/latents_train.ldm", "--responses", &train, "--out", &map])?;
        cli(d, &["decode", "--map", &map, "--responses", &test, "--out", &pred])?;
        cli(d, &["eval", "pairwise", "--original", "ds/latents_test.ldm", "--predicted", &pred, "--out", &report])?;
        pairs.push(format!("{name}={report}"));
    }
    cli(d, &["report", "--pairs", &pairs.join(","), "--out", "regions.csv"])?;
    let csv = fs::read_to_string(d.join("regions.csv")).map_err(|e| e.to_string())?;
    let top = csv.lines().nth(1).unwrap_or_default().to_string();
    ensure(top.starts_with("VC,"), || format!("top row is {top:?}"))?;
    let rows: Vec<String> = csv
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            format!("{}={}", f[0], f[f.len() - 1])
        })
        .collect();
    Ok(format!("all commands exit 0; ranking {}", rows.join(" ")))
}

fn main() {
    let checks: [Entry; 9] = [
        ("1", "inverse identity", inverse_identity, Some(Duration::from_secs(5))),
        ("2", "encoder recovery", encoder_recovery, Some(Duration::from_secs(10))),
        ("3", "metric matches oracle", metric_oracle, Some(Duration::from_secs(5))),
        ("4", "hand fixtures", hand_fixtures, None),
        ("5", "noise monotonicity", noise_monotonicity, Some(Duration::from_secs(120))),
        ("6", "region union", region_union, Some(Duration::from_secs(120))),
        ("7", "PCA codec", pca_codec, Some(Duration::from_secs(30))),
        ("8", "format round trips", format_round_trips, None),
        ("9", "CLI workflow", cli_workflow, None),
    ];
    let mut failed = 0;
    for (id, name, check, limit) in checks {
        let start = Instant::now();
        let mut outcome = check();
        let elapsed = start.elapsed();
        if let (Ok(_), Some(limit)) = (&outcome, limit) {
            if elapsed > limit {
                outcome = Err(format!("took {:.2} s, limit {} s", elapsed.as_secs_f64(), limit.as_secs()));
            }
        }
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("{tag} [{id}] {name}: {detail} ({:.2} s)", elapsed.as_secs_f64());
    }
    if failed > 0 {
        println!("acceptance: {failed} of 9 failed");
        std::process::exit(1);
    }
    println!("acceptance: all 9 passed");
}
