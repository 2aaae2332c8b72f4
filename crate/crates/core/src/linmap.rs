//! Linear map between bias-augmented latent vectors and voxel responses.
//!
//! Training fits `Y = X_aug · W` by (optionally ridge-penalised) least
//! squares. Decoding inverts the fitted map on held-out responses with
//! `X = Y Wᵀ (W Wᵀ)⁻¹`, solving against `W Wᵀ` rather than forming an inverse.
//! The constant bias column is always the last column of `X_aug`.

use std::fmt;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{dot, gram_of_columns, gram_of_rows, Cholesky, RCOND_THRESHOLD};
use crate::matrix::Matrix;

/// Fitted latent → voxel transform together with training latent statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderMap {
    /// `(latent_dim + 1) × n_voxels`; the last row is the bias.
    pub w: Matrix,
    pub latent_dim: usize,
    pub n_voxels: usize,
    pub train_latent_mean: Vec<f64>,
    /// Population standard deviation of each training latent dimension.
    pub train_latent_std: Vec<f64>,
    pub ridge_lambda: f64,
    pub fit_residual_rms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecodeOptions {
    /// Subtract the mean test response from every test row first.
    pub center_test: bool,
    /// Map predicted latents onto the training mean/std per dimension.
    pub rescale: bool,
    /// Drop the bias column from the output.
    pub drop_bias: bool,
}

impl Default for DecodeOptions {
    fn default() -> Self {
        Self {
            center_test: true,
            rescale: true,
            drop_bias: true,
        }
    }
}

/// Non-fatal numerical events raised while decoding.
#[derive(Debug, Clone, PartialEq)]
pub enum Warning {
    /// `W Wᵀ` was ill-conditioned and `epsilon · I` was added before solving.
    Jitter { rcond: f64, epsilon: f64 },
    /// A predicted latent dimension had zero spread and was set to the training mean.
    ConstantLatent { dim: usize },
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Warning::Jitter { rcond, epsilon } => write!(
                f,
                "W·Wᵀ is ill-conditioned (rcond estimate {rcond:.3e}); added {epsilon:.3e}·I"
            ),
            Warning::ConstantLatent { dim } => write!(
                f,
                "predicted latent dimension {dim} is constant; set to the training mean"
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decoded {
    pub latents: Matrix,
    pub warnings: Vec<Warning>,
}

/// Appends a constant 1.0 column.
pub fn augment_bias(x: &Matrix) -> Matrix {
    let d = x.cols();
    Matrix::from_fn(x.rows(), d + 1, |i, j| if j == d { 1.0 } else { x[(i, j)] })
}

/// Fits `W = argmin ‖X_aug W − Y‖² + λ‖W₀..d‖²` via the normal equations.
///
/// The bias row is never penalised. Every voxel column is solved against the
/// same Cholesky factor, sequentially within the column, so the result does
/// not depend on how many threads run the column solves.
pub fn fit_encoder(x_aug: &Matrix, y: &Matrix, ridge_lambda: f64) -> Result<EncoderMap> {
    let (n, p) = x_aug.shape();
    if n != y.rows() {
        return Err(Error::ShapeMismatch(format!(
            "latents are {} but responses are {} (row counts differ)",
            x_aug.shape_str(),
            y.shape_str()
        )));
    }
    if p == 0 || y.cols() == 0 {
        return Err(Error::ShapeMismatch("latents and responses need at least one column".into()));
    }
    if !ridge_lambda.is_finite() || ridge_lambda < 0.0 {
        return Err(Error::ConfigInvalid(format!(
            "ridge lambda must be finite and non-negative, got {ridge_lambda}"
        )));
    }
    if x_aug.iter_rows().any(|r| r[p - 1] != 1.0) {
        return Err(Error::ShapeMismatch("last latent column must be the all-ones bias".into()));
    }
    let d = p - 1;
    if ridge_lambda == 0.0 && n < p {
        return Err(Error::SingularSystem(format!(
            "{n} training rows cannot determine {p} coefficients per voxel without ridge"
        )));
    }

    let mut normal = gram_of_columns(x_aug);
    for i in 0..d {
        normal[(i, i)] += ridge_lambda;
    }
    let chol = Cholesky::factor(&normal).ok_or_else(|| {
        Error::SingularSystem("XᵀX is not positive definite (rank-deficient latents)".into())
    })?;
    let rcond = chol.rcond_estimate();
    if rcond < RCOND_THRESHOLD {
        return Err(Error::SingularSystem(format!(
            "XᵀX reciprocal condition estimate {rcond:.3e} is below {RCOND_THRESHOLD:e}"
        )));
    }

    // One contiguous row per coefficient / voxel so column solves are slices.
    let xt = x_aug.transpose();
    let yt = y.transpose();
    let mut w_rows: Vec<Vec<f64>> = (0..y.cols())
        .into_par_iter()
        .map(|v| {
            let target = yt.row(v);
            let mut rhs: Vec<f64> = (0..p).map(|i| dot(xt.row(i), target)).collect();
            chol.solve_in_place(&mut rhs);
            rhs
        })
        .collect();
    let w = Matrix::from_fn(p, y.cols(), |i, v| std::mem::take(&mut w_rows[v][i]));

    let residual = x_aug.matmul(&w)?.sub(y)?;
    let fit_residual_rms = (residual.data().iter().map(|r| r * r).sum::<f64>() / (n * y.cols()) as f64).sqrt();

    let latents = x_aug.leading_columns(d);
    let train_latent_mean = latents.column_means();
    let train_latent_std = latents.column_stds(&train_latent_mean);

    Ok(EncoderMap {
        w,
        latent_dim: d,
        n_voxels: y.cols(),
        train_latent_mean,
        train_latent_std,
        ridge_lambda,
        fit_residual_rms,
    })
}

/// Subtracts the per-voxel mean across the test rows.
pub fn center_test_responses(y_test: &Matrix) -> Result<Matrix> {
    if y_test.rows() < 2 {
        return Err(Error::TooFewRows {
            needed: 2,
            got: y_test.rows(),
        });
    }
    let means = y_test.column_means();
    Ok(Matrix::from_fn(y_test.rows(), y_test.cols(), |i, j| y_test[(i, j)] - means[j]))
}

/// Predicts latent vectors for each response row.
pub fn decode_latents(map: &EncoderMap, y_test: &Matrix, opts: DecodeOptions) -> Result<Decoded> {
    if y_test.cols() != map.n_voxels {
        return Err(Error::ShapeMismatch(format!(
            "responses are {} but the map expects {} voxels",
            y_test.shape_str(),
            map.n_voxels
        )));
    }
    let centered;
    let y = if opts.center_test {
        centered = center_test_responses(y_test)?;
        &centered
    } else {
        y_test
    };
    if opts.rescale && y.rows() < 2 {
        return Err(Error::TooFewRows {
            needed: 2,
            got: y.rows(),
        });
    }

    let p = map.latent_dim + 1;
    let mut warnings = Vec::new();
    let mut wwt = gram_of_rows(&map.w);
    let chol = match Cholesky::factor(&wwt) {
        Some(c) if c.rcond_estimate() >= RCOND_THRESHOLD => c,
        other => {
            let rcond = other.map_or(0.0, |c| c.rcond_estimate());
            let trace: f64 = (0..p).map(|i| wwt[(i, i)]).sum();
            let epsilon = 1e-10 * trace / p as f64;
            for i in 0..p {
                wwt[(i, i)] += epsilon;
            }
            let c = Cholesky::factor(&wwt).ok_or_else(|| {
                Error::SingularSystem("W·Wᵀ is singular even after diagonal jitter".into())
            })?;
            warnings.push(Warning::Jitter { rcond, epsilon });
            c
        }
    };

    let mut rows: Vec<Vec<f64>> = y
        .iter_rows()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|resp| {
            let mut rhs: Vec<f64> = (0..p).map(|i| dot(map.w.row(i), resp)).collect();
            chol.solve_in_place(&mut rhs);
            rhs
        })
        .collect();
    let mut latents = Matrix::from_fn(y.rows(), p, |i, j| std::mem::take(&mut rows[i][j]));

    if opts.rescale {
        let (scaled, w) = rescale_latents(&latents.leading_columns(map.latent_dim), map)?;
        warnings.extend(w);
        let bias = latents.column(map.latent_dim);
        latents = Matrix::from_fn(latents.rows(), p, |i, j| {
            if j < map.latent_dim {
                scaled[(i, j)]
            } else {
                bias[i]
            }
        });
    }
    if opts.drop_bias {
        latents = latents.leading_columns(map.latent_dim);
    }
    Ok(Decoded { latents, warnings })
}

/// Standardises each predicted dimension across rows, then maps it onto the
/// training mean and standard deviation of that dimension.
pub fn rescale_latents(x_pred: &Matrix, map: &EncoderMap) -> Result<(Matrix, Vec<Warning>)> {
    if x_pred.cols() != map.latent_dim {
        return Err(Error::ShapeMismatch(format!(
            "predicted latents are {} but the map has {} latent dimensions",
            x_pred.shape_str(),
            map.latent_dim
        )));
    }
    if x_pred.rows() < 2 {
        return Err(Error::TooFewRows {
            needed: 2,
            got: x_pred.rows(),
        });
    }
    let mu = x_pred.column_means();
    let sigma = x_pred.column_stds(&mu);
    let warnings = (0..x_pred.cols())
        .filter(|&j| sigma[j] == 0.0)
        .map(|dim| Warning::ConstantLatent { dim })
        .collect();
    let out = Matrix::from_fn(x_pred.rows(), x_pred.cols(), |i, j| {
        if sigma[j] == 0.0 {
            map.train_latent_mean[j]
        } else {
            (x_pred[(i, j)] - mu[j]) / sigma[j] * map.train_latent_std[j] + map.train_latent_mean[j]
        }
    });
    Ok((out, warnings))
}
