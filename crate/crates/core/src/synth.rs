//! Seeded synthetic datasets with a known encoder, plus independent oracles.
//!
//! # Random stream
//!
//! All draws come from one xoshiro256++ generator whose 256-bit state is
//! filled by four successive SplitMix64 outputs starting from `seed`.
//! A uniform variate is `((next_u64 >> 11) + 0.5) · 2⁻⁵³`, which lies strictly
//! inside `(0, 1)`. Standard normals use Box–Muller on consecutive uniforms
//! `u₁, u₂`: `√(−2 ln u₁)·cos(2πu₂)` is returned first and
//! `√(−2 ln u₁)·sin(2πu₂)` is returned by the following call.
//!
//! Draw order: training latents (row-major, `n_train × d`), test latents,
//! `W_true` (row-major, `(d+1) × nv`, bias row last), training noise, then
//! test noise. Noise is drawn even when `noise_sigma` is zero so that the
//! latents and weights for a seed never depend on the noise level.

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linmap::{augment_bias, decode_latents, fit_encoder, DecodeOptions};
use crate::matrix::Matrix;
use crate::metrics::{pairwise_decoding_accuracy, PairwiseReport};
use crate::roi::{select_voxels, RoiMask};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_train: usize,
    pub n_test: usize,
    pub latent_dim: usize,
    pub n_voxels: usize,
    /// Noise standard deviation relative to each voxel's noiseless signal std.
    pub noise_sigma: f64,
    pub seed: u64,
    /// Number of contiguous voxel groups; groups above one each see only a
    /// disjoint block of latent dimensions.
    pub n_groups: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_train: 50,
            n_test: 50,
            latent_dim: 20,
            n_voxels: 42,
            noise_sigma: 1.0,
            seed: 7,
            n_groups: 1,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::ConfigInvalid(msg));
        let d = self.latent_dim;
        if d == 0 {
            return bad("latent_dim must be positive".into());
        }
        if self.n_train < d + 1 {
            return bad(format!("n_train = {} must be at least latent_dim + 1 = {}", self.n_train, d + 1));
        }
        if self.n_voxels < d + 1 {
            return bad(format!("n_voxels = {} must be at least latent_dim + 1 = {}", self.n_voxels, d + 1));
        }
        if self.n_test < 2 {
            return bad(format!("n_test = {} must be at least 2", self.n_test));
        }
        if !self.noise_sigma.is_finite() || self.noise_sigma < 0.0 {
            return bad(format!("noise_sigma must be finite and non-negative, got {}", self.noise_sigma));
        }
        if self.n_groups == 0 {
            return bad("n_groups must be at least 1".into());
        }
        if self.n_groups > 1 && (self.n_voxels % self.n_groups != 0 || d % self.n_groups != 0) {
            return bad(format!(
                "n_groups = {} must divide both n_voxels = {} and latent_dim = {d}",
                self.n_groups, self.n_voxels
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthDataset {
    pub config: SynthConfig,
    pub w_true: Matrix,
    /// Latents with the bias column appended.
    pub x_train: Matrix,
    pub x_test: Matrix,
    pub y_train: Matrix,
    pub y_test: Matrix,
    /// One mask per voxel group; empty when `n_groups == 1`.
    pub voxel_groups: Vec<RoiMask>,
}

impl SynthDataset {
    pub fn latent_dim(&self) -> usize {
        self.config.latent_dim
    }

    /// Test latents without the bias column.
    pub fn test_latents(&self) -> Matrix {
        self.x_test.leading_columns(self.latent_dim())
    }

    pub fn train_latents(&self) -> Matrix {
        self.x_train.leading_columns(self.latent_dim())
    }
}

/// Standard-normal source over xoshiro256++.
pub struct NormalStream {
    rng: Xoshiro256PlusPlus,
    spare: Option<f64>,
}

impl NormalStream {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: Xoshiro256PlusPlus::seed_from_u64(seed),
            spare: None,
        }
    }

    pub fn uniform(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    pub fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.spare = Some(r * theta.sin());
        r * theta.cos()
    }

    fn matrix(&mut self, rows: usize, cols: usize, scale: f64) -> Matrix {
        Matrix::from_fn(rows, cols, |_, _| self.standard_normal() * scale)
    }
}

pub fn generate(config: &SynthConfig) -> Result<SynthDataset> {
    config.validate()?;
    let d = config.latent_dim;
    let nv = config.n_voxels;
    let mut stream = NormalStream::new(config.seed);

    let x_train = augment_bias(&stream.matrix(config.n_train, d, 1.0));
    let x_test = augment_bias(&stream.matrix(config.n_test, d, 1.0));
    let mut w_true = stream.matrix(d + 1, nv, 1.0 / ((d + 1) as f64).sqrt());

    let mut voxel_groups = Vec::new();
    if config.n_groups > 1 {
        let g = config.n_groups;
        let (vox, lat) = (nv / g, d / g);
        for group in 0..g {
            let latent_block = group * lat..(group + 1) * lat;
            for v in group * vox..(group + 1) * vox {
                for i in (0..d).filter(|i| !latent_block.contains(i)) {
                    w_true[(i, v)] = 0.0;
                }
            }
            voxel_groups.push(RoiMask::range(format!("group{group}"), group * vox, (group + 1) * vox));
        }
    }

    let clean_train = x_train.matmul(&w_true)?;
    let clean_test = x_test.matmul(&w_true)?;
    let signal_mean = clean_train.column_means();
    let signal_std = clean_train.column_stds(&signal_mean);
    let noise_scale: Vec<f64> = signal_std.iter().map(|s| config.noise_sigma * s).collect();
    let mut add_noise = |clean: Matrix| {
        Matrix::from_fn(clean.rows(), clean.cols(), |i, v| {
            clean[(i, v)] + stream.standard_normal() * noise_scale[v]
        })
    };
    let y_train = add_noise(clean_train);
    let y_test = add_noise(clean_test);

    Ok(SynthDataset {
        config: config.clone(),
        w_true,
        x_train,
        x_test,
        y_train,
        y_test,
        voxel_groups,
    })
}

/// Fit → decode → evaluate settings used by the synthetic harness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOptions {
    pub ridge_lambda: f64,
    pub decode: DecodeOptions,
}

impl Default for EvalOptions {
    /// Raw test responses, no rescaling, bias dropped, plain least squares.
    fn default() -> Self {
        Self {
            ridge_lambda: 0.0,
            decode: DecodeOptions {
                center_test: false,
                rescale: false,
                drop_bias: true,
            },
        }
    }
}

/// Runs the decoding pipeline on `dataset`, optionally restricted to the
/// voxels of `mask`, and scores predicted against true test latents.
pub fn decoding_accuracy(
    dataset: &SynthDataset,
    mask: Option<&RoiMask>,
    opts: &EvalOptions,
) -> Result<PairwiseReport> {
    let (y_train, y_test) = match mask {
        Some(m) => (select_voxels(&dataset.y_train, m)?, select_voxels(&dataset.y_test, m)?),
        None => (dataset.y_train.clone(), dataset.y_test.clone()),
    };
    let map = fit_encoder(&dataset.x_train, &y_train, opts.ridge_lambda)?;
    let decode = DecodeOptions {
        drop_bias: true,
        ..opts.decode
    };
    let predicted = decode_latents(&map, &y_test, decode)?.latents;
    pairwise_decoding_accuracy(&dataset.test_latents(), &predicted)
}

/// Brute-force pairwise accuracy: a plain double loop over pairs with a
/// textbook two-pass Pearson correlation per comparison.
pub fn oracle_pairwise(v: &Matrix, p: &Matrix) -> Result<PairwiseReport> {
    if v.rows() != p.rows() || v.cols() != p.cols() {
        return Err(Error::ShapeMismatch(format!(
            "originals are {} but predictions are {}",
            v.shape_str(),
            p.shape_str()
        )));
    }
    let n = v.rows();
    if n < 2 {
        return Err(Error::TooFewRows { needed: 2, got: n });
    }
    for i in 0..n {
        if is_constant(v.row(i)) {
            return Err(Error::ZeroVariance { which: "original", row: i });
        }
    }
    for i in 0..n {
        if is_constant(p.row(i)) {
            return Err(Error::ZeroVariance { which: "predicted", row: i });
        }
    }
    let mut correct = 0;
    let mut ties = 0;
    for i in 0..n {
        for j in (i + 1)..n {
            let same = textbook_pearson(v.row(i), p.row(i)) + textbook_pearson(v.row(j), p.row(j));
            let cross = textbook_pearson(v.row(i), p.row(j)) + textbook_pearson(v.row(j), p.row(i));
            if same > cross {
                correct += 1;
            } else if same == cross {
                ties += 1;
            }
        }
    }
    Ok(PairwiseReport::from_counts(n, correct, ties))
}

fn is_constant(x: &[f64]) -> bool {
    x.iter().skip(1).all(|&e| e == x[0])
}

fn textbook_pearson(a: &[f64], b: &[f64]) -> f64 {
    let len = a.len() as f64;
    let mut mean_a = 0.0;
    let mut mean_b = 0.0;
    for k in 0..a.len() {
        mean_a += a[k];
        mean_b += b[k];
    }
    mean_a /= len;
    mean_b /= len;
    let mut cov = 0.0;
    let mut var_a = 0.0;
    let mut var_b = 0.0;
    for k in 0..a.len() {
        let da = a[k] - mean_a;
        let db = b[k] - mean_b;
        cov += da * db;
        var_a += da * da;
        var_b += db * db;
    }
    let r = cov / (var_a.sqrt() * var_b.sqrt());
    r.clamp(-1.0, 1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub sigma: f64,
    /// Accuracy of each repetition, in repetition order.
    pub accuracies: Vec<f64>,
    pub mean_accuracy: f64,
    /// Population standard deviation across repetitions.
    pub std_accuracy: f64,
}

/// Repeats generate → fit → decode → score for every noise level.
///
/// Repetition `r` uses seed `base.seed + r`, so every σ sees the same
/// latents and weights for a given repetition.
pub fn noise_sweep(
    base: &SynthConfig,
    sigmas: &[f64],
    repetitions: usize,
    opts: &EvalOptions,
) -> Result<Vec<SweepRow>> {
    if sigmas.is_empty() {
        return Err(Error::ConfigInvalid("noise sweep needs at least one sigma".into()));
    }
    if repetitions == 0 {
        return Err(Error::ConfigInvalid("noise sweep needs at least one repetition".into()));
    }
    sigmas
        .iter()
        .map(|&sigma| {
            let accuracies = (0..repetitions)
                .into_par_iter()
                .map(|rep| {
                    let config = SynthConfig {
                        noise_sigma: sigma,
                        seed: base.seed.wrapping_add(rep as u64),
                        ..base.clone()
                    };
                    decoding_accuracy(&generate(&config)?, None, opts).map(|r| r.accuracy)
                })
                .collect::<Result<Vec<f64>>>()?;
            let n = accuracies.len() as f64;
            let mean_accuracy = accuracies.iter().sum::<f64>() / n;
            let std_accuracy =
                (accuracies.iter().map(|a| (a - mean_accuracy).powi(2)).sum::<f64>() / n).sqrt();
            Ok(SweepRow {
                sigma,
                accuracies,
                mean_accuracy,
                std_accuracy,
            })
        })
        .collect()
}

/// `sigma,rep,accuracy` rows, then per-σ aggregate rows whose `rep` column is
/// `mean` or `std`.
pub fn sweep_to_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("sigma,rep,accuracy\n");
    for row in rows {
        for (rep, acc) in row.accuracies.iter().enumerate() {
            out.push_str(&format!("{},{rep},{acc:.6}\n", row.sigma));
        }
    }
    for row in rows {
        out.push_str(&format!("{},mean,{:.6}\n", row.sigma, row.mean_accuracy));
        out.push_str(&format!("{},std,{:.6}\n", row.sigma, row.std_accuracy));
    }
    out
}
