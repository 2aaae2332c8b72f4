use std::path::Path;

use latent_decode::dataio::{
    self, read_encoder_map, read_eigen_model, read_image_set, read_matrix, read_matrix_auto,
    read_roi_mask, write_encoder_map, write_eigen_model, write_image_set, write_matrix,
    write_matrix_auto, write_roi_mask, write_text, MatrixFormat,
};
use latent_decode::eigenimage::fit_pca;
use latent_decode::linmap::{augment_bias, decode_latents, fit_encoder};
use latent_decode::metrics::{self, PairwiseReport, REPORT_CSV_HEADER};
use latent_decode::roi::{select_voxels, union_masks};
use latent_decode::synth::{self, EvalOptions, SynthConfig};
use latent_decode::{DecodeOptions, ImageSet, Matrix};

use crate::{
    CmdResult, DecodeArgs, Failure, FeatureDistArgs, FitArgs, PairwiseArgs, PcaFitArgs,
    PcaReconstructArgs, PcaTransformArgs, PixcompArgs, ReportArgs, RoiSelectArgs, RoiUnionArgs,
    SynthGenerateArgs, SynthSweepArgs,
};

fn load(path: &Path, format: Option<MatrixFormat>) -> Result<Matrix, Failure> {
    Ok(match format {
        Some(f) => read_matrix(path, f)?,
        None => read_matrix_auto(path)?,
    })
}

pub fn fit(a: &FitArgs) -> CmdResult {
    let latents = load(&a.latents, a.format)?;
    let responses = load(&a.responses, a.format)?;
    if latents.rows() != responses.rows() {
        return Err(Failure::invalid(format!(
            "row counts differ: latents {} ({}) vs responses {} ({})",
            latents.shape_str(),
            a.latents.display(),
            responses.shape_str(),
            a.responses.display()
        )));
    }
    let map = fit_encoder(&augment_bias(&latents), &responses, a.ridge)?;
    write_encoder_map(&map, &a.out)?;
    println!("latents={}", latents.shape_str());
    println!("responses={}", responses.shape_str());
    println!("w={}", map.w.shape_str());
    println!("ridge_lambda={}", map.ridge_lambda);
    println!("fit_residual_rms={:e}", map.fit_residual_rms);
    Ok(())
}

pub fn decode(a: &DecodeArgs) -> CmdResult {
    let map = read_encoder_map(&a.map)?;
    let responses = load(&a.responses, a.format)?;
    let opts = DecodeOptions {
        center_test: !a.no_center,
        rescale: !a.no_rescale,
        drop_bias: !a.keep_bias,
    };
    let decoded = decode_latents(&map, &responses, opts)?;
    for w in &decoded.warnings {
        eprintln!("warning: {w}");
    }
    match a.format {
        Some(f) => write_matrix(&decoded.latents, &a.out, f)?,
        None => write_matrix_auto(&decoded.latents, &a.out)?,
    }
    println!("latents={}", decoded.latents.shape_str());
    Ok(())
}

fn emit_report(report: &PairwiseReport, csv: Option<&Path>, out: Option<&Path>) -> CmdResult {
    let text = report.to_key_value();
    print!("{text}");
    if let Some(path) = out {
        write_text(path, &text)?;
    }
    if let Some(path) = csv {
        write_text(path, &format!("{REPORT_CSV_HEADER}\n{}\n", report.to_csv_row()))?;
    }
    Ok(())
}

pub fn eval_pairwise(a: &PairwiseArgs) -> CmdResult {
    let original = read_matrix_auto(&a.original)?;
    let predicted = read_matrix_auto(&a.predicted)?;
    let report = metrics::pairwise_decoding_accuracy(&original, &predicted)?;
    emit_report(&report, a.csv.as_deref(), a.out.as_deref())
}

pub fn eval_feature_dist(a: &FeatureDistArgs) -> CmdResult {
    let orig = read_matrix_auto(&a.orig)?;
    let recon = read_matrix_auto(&a.recon)?;
    let distance = metrics::feature_distance(&orig, &recon)?;
    println!("items={}", orig.rows());
    println!("distance={distance:.6}");
    if let Some(path) = &a.csv {
        write_text(path, &format!("item_count,distance\n{},{distance:.6}\n", orig.rows()))?;
    }
    Ok(())
}

pub fn eval_pixcomp(a: &PixcompArgs) -> CmdResult {
    let orig = read_image_set(&a.orig_dir)?;
    let recon = read_image_set(&a.recon_dir)?;
    let report = metrics::pixcomp(&orig, &recon)?;
    emit_report(&report, a.csv.as_deref(), a.out.as_deref())
}

pub fn pca_fit(a: &PcaFitArgs) -> CmdResult {
    let images = read_image_set(&a.images)?;
    let model = fit_pca(&images, a.k)?;
    write_eigen_model(&model, &a.out)?;
    let total: f64 = model.explained_variance.iter().sum();
    println!("images={}", images.len());
    println!("geometry={}", model.geometry);
    println!("k={}", model.k());
    println!("explained_variance_total={total:e}");
    Ok(())
}

pub fn pca_transform(a: &PcaTransformArgs) -> CmdResult {
    let model = read_eigen_model(&a.model)?;
    let images = read_image_set(&a.images)?;
    if images.geometry != model.geometry {
        return Err(Failure::invalid(format!(
            "images are {} but the model was fit on {}",
            images.geometry, model.geometry
        )));
    }
    let coeffs = model.project(&images.images)?;
    write_matrix_auto(&coeffs, &a.out)?;
    println!("coefficients={}", coeffs.shape_str());
    Ok(())
}

pub fn pca_reconstruct(a: &PcaReconstructArgs) -> CmdResult {
    let model = read_eigen_model(&a.model)?;
    let coeffs = read_matrix_auto(&a.coeffs)?;
    let pixels = model.reconstruct(&coeffs, true)?;
    let set = ImageSet::new(pixels, model.geometry)?;
    let written = write_image_set(&set, &a.out_dir)?;
    println!("images={}", written.len());
    Ok(())
}

pub fn roi_select(a: &RoiSelectArgs) -> CmdResult {
    let responses = read_matrix_auto(&a.responses)?;
    let mask = read_roi_mask(&a.mask)?;
    let selected = select_voxels(&responses, &mask)?;
    write_matrix_auto(&selected, &a.out)?;
    println!("roi={}", mask.name());
    println!("responses={}", selected.shape_str());
    Ok(())
}

pub fn roi_union(a: &RoiUnionArgs) -> CmdResult {
    let masks = a
        .masks
        .iter()
        .map(|p| read_roi_mask(p))
        .collect::<Result<Vec<_>, _>>()?;
    let merged = union_masks(&masks, a.name.as_str())?;
    write_roi_mask(&merged, &a.out)?;
    println!("roi={}", merged.name());
    println!("voxels={}", merged.len());
    Ok(())
}

fn config_lines(c: &SynthConfig) -> String {
    format!(
        "n-train={}\nn-test={}\nlatent-dim={}\nn-voxels={}\nnoise-sigma={}\nseed={}\nn-groups={}\n",
        c.n_train, c.n_test, c.latent_dim, c.n_voxels, c.noise_sigma, c.seed, c.n_groups
    )
}

pub fn synth_generate(a: &SynthGenerateArgs) -> CmdResult {
    let config = SynthConfig::from(&a.params);
    let ds = synth::generate(&config)?;
    let dir = &a.out_dir;
    dataio::create_dir_all(dir)?;
    let ldm = MatrixFormat::Ldm;
    let mut files = vec![
        ("latents_train", "latents_train.ldm"),
        ("latents_test", "latents_test.ldm"),
        ("responses_train", "responses_train.ldm"),
        ("responses_test", "responses_test.ldm"),
        ("w_true", "w_true.ldm"),
    ];
    write_matrix(&ds.train_latents(), &dir.join(files[0].1), ldm)?;
    write_matrix(&ds.test_latents(), &dir.join(files[1].1), ldm)?;
    write_matrix(&ds.y_train, &dir.join(files[2].1), ldm)?;
    write_matrix(&ds.y_test, &dir.join(files[3].1), ldm)?;
    write_matrix(&ds.w_true, &dir.join(files[4].1), ldm)?;
    let mask_files: Vec<(String, String)> = ds
        .voxel_groups
        .iter()
        .map(|m| (m.name().to_string(), format!("{}.txt", m.name())))
        .collect();
    for (mask, (_, file)) in ds.voxel_groups.iter().zip(&mask_files) {
        write_roi_mask(mask, &dir.join(file))?;
    }
    files.extend(mask_files.iter().map(|(k, f)| (k.as_str(), f.as_str())));

    let mut manifest = String::from("# synthetic dataset; rows of latents_* align with rows of responses_*\n");
    manifest.push_str(&config_lines(&config));
    for (key, file) in &files {
        manifest.push_str(&format!("file.{key}={file}\n"));
    }
    write_text(&dir.join("manifest.txt"), &manifest)?;
    print!("{}", config_lines(&config));
    println!("files={}", files.len());
    Ok(())
}

pub fn synth_sweep(a: &SynthSweepArgs) -> CmdResult {
    let base = SynthConfig::from(&a.params);
    let opts = EvalOptions {
        ridge_lambda: a.ridge,
        decode: DecodeOptions {
            center_test: a.center,
            rescale: a.rescale,
            drop_bias: true,
        },
    };
    let rows = synth::noise_sweep(&base, &a.sigmas, a.reps, &opts)?;
    write_text(&a.out, &synth::sweep_to_csv(&rows))?;
    println!("sigma,mean_accuracy,std_accuracy");
    for r in &rows {
        println!("{},{:.6},{:.6}", r.sigma, r.mean_accuracy, r.std_accuracy);
    }
    Ok(())
}

pub fn report(a: &ReportArgs) -> CmdResult {
    let mut rows = Vec::new();
    for entry in a.pairs.split(',').map(str::trim).filter(|e| !e.is_empty()) {
        let (name, file) = entry
            .split_once('=')
            .ok_or_else(|| Failure::invalid(format!("expected NAME=FILE, got {entry:?}")))?;
        let path = Path::new(file.trim());
        let text = dataio::read_text(path)?;
        let parsed = PairwiseReport::parse_key_value(&text, &path.display().to_string())?;
        rows.push((name.trim().to_string(), parsed));
    }
    if rows.is_empty() {
        return Err(Failure::invalid("--pairs lists no regions"));
    }
    // best region first; ties keep the order given
    rows.sort_by(|x, y| y.1.accuracy.total_cmp(&x.1.accuracy));

    let mut csv = String::from("region,items,pairs,correct,ties,accuracy\n");
    for (name, r) in &rows {
        csv.push_str(&format!("{name},{}\n", r.to_csv_row()));
    }
    write_text(&a.out, &csv)?;

    let width = rows.iter().map(|(n, _)| n.len()).max().unwrap_or(0).max("region".len());
    println!("{:<width$}  {:>6}  {:>7}  {:>7}  {:>5}  {:>8}", "region", "items", "pairs", "correct", "ties", "accuracy");
    for (name, r) in &rows {
        println!(
            "{name:<width$}  {:>6}  {:>7}  {:>7}  {:>5}  {:>8.6}",
            r.n_items, r.n_pairs, r.n_correct, r.n_ties, r.accuracy
        );
    }
    Ok(())
}
