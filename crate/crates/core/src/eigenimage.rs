//! PCA eigen-image codec: fit principal components on an image corpus,
//! project images to coefficient vectors and reconstruct images from them.

use nalgebra::DMatrix;

use crate::dataio::{ImageGeometry, ImageSet};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Latent dimensionality used when no `k` is given.
pub const DEFAULT_COMPONENTS: usize = 120;

#[derive(Debug, Clone, PartialEq)]
pub struct EigenImageModel {
    pub mean_pixel: Vec<f64>,
    /// `k × p`, orthonormal rows ordered by decreasing variance.
    pub components: Matrix,
    /// Population variance along each component (`σᵢ² / n`).
    pub explained_variance: Vec<f64>,
    pub geometry: ImageGeometry,
}

impl EigenImageModel {
    pub fn k(&self) -> usize {
        self.components.rows()
    }

    pub fn pixel_count(&self) -> usize {
        self.mean_pixel.len()
    }

    /// Fits the top `k` principal directions of the rows of `data`.
    ///
    /// Components come from the thin SVD of the centered data. Each
    /// component is signed so that its largest-magnitude entry is positive
    /// (first such entry on ties), which makes the model reproducible.
    pub fn fit(data: &Matrix, k: usize, geometry: ImageGeometry) -> Result<Self> {
        let (n, p) = data.shape();
        if p != geometry.pixel_count() {
            return Err(Error::GeometryMismatch(format!(
                "{p} values per row do not fit geometry {geometry}"
            )));
        }
        let max_k = n.saturating_sub(1).min(p);
        if k == 0 {
            return Err(Error::ConfigInvalid("k must be positive".into()));
        }
        if k > max_k {
            return Err(Error::KTooLarge { k, max: max_k });
        }
        let first = data.row(0);
        if data.iter_rows().all(|r| r == first) {
            return Err(Error::DegenerateData);
        }

        let mean_pixel = data.column_means();
        let centered = DMatrix::from_fn(n, p, |i, j| data[(i, j)] - mean_pixel[j]);
        let svd = centered.svd(false, true);
        let v_t = svd.v_t.expect("right singular vectors requested");
        let sigma = svd.singular_values;

        let mut order: Vec<usize> = (0..sigma.len()).collect();
        order.sort_by(|&a, &b| sigma[b].total_cmp(&sigma[a]).then(a.cmp(&b)));
        if sigma[order[0]] == 0.0 {
            return Err(Error::DegenerateData);
        }

        let mut components = Matrix::zeros(k, p);
        let mut explained_variance = Vec::with_capacity(k);
        for (c, &src) in order.iter().take(k).enumerate() {
            let row = components.row_mut(c);
            for (j, r) in row.iter_mut().enumerate() {
                *r = v_t[(src, j)];
            }
            fix_sign(row);
            explained_variance.push(sigma[src] * sigma[src] / n as f64);
        }
        Ok(Self {
            mean_pixel,
            components,
            explained_variance,
            geometry,
        })
    }

    /// `(images − mean) · componentsᵀ`.
    pub fn project(&self, images: &Matrix) -> Result<Matrix> {
        if images.cols() != self.pixel_count() {
            return Err(Error::ShapeMismatch(format!(
                "images have {} pixels, model expects {}",
                images.cols(),
                self.pixel_count()
            )));
        }
        let k = self.k();
        let mut out = Matrix::zeros(images.rows(), k);
        let mut centered = vec![0.0; self.pixel_count()];
        for (i, img) in images.iter_rows().enumerate() {
            for ((c, &v), &m) in centered.iter_mut().zip(img).zip(&self.mean_pixel) {
                *c = v - m;
            }
            for c in 0..k {
                out[(i, c)] = self
                    .components
                    .row(c)
                    .iter()
                    .zip(&centered)
                    .map(|(a, b)| a * b)
                    .sum();
            }
        }
        Ok(out)
    }

    /// `coeffs · components + mean`, optionally clipped to `[0, 1]`.
    pub fn reconstruct(&self, coeffs: &Matrix, clamp: bool) -> Result<Matrix> {
        if coeffs.cols() != self.k() {
            return Err(Error::ShapeMismatch(format!(
                "coefficients have {} columns, model has {} components",
                coeffs.cols(),
                self.k()
            )));
        }
        let mut out = coeffs.matmul(&self.components)?;
        for i in 0..out.rows() {
            for (v, &m) in out.row_mut(i).iter_mut().zip(&self.mean_pixel) {
                *v += m;
                if clamp {
                    *v = v.clamp(0.0, 1.0);
                }
            }
        }
        Ok(out)
    }
}

fn fix_sign(row: &mut [f64]) {
    let mut best = 0;
    for (j, v) in row.iter().enumerate() {
        if v.abs() > row[best].abs() {
            best = j;
        }
    }
    if row[best] < 0.0 {
        row.iter_mut().for_each(|v| *v = -*v);
    }
}

pub fn fit_pca(images: &ImageSet, k: usize) -> Result<EigenImageModel> {
    EigenImageModel::fit(&images.images, k, images.geometry)
}

pub fn project(model: &EigenImageModel, images: &Matrix) -> Result<Matrix> {
    model.project(images)
}

pub fn reconstruct(model: &EigenImageModel, coeffs: &Matrix, clamp: bool) -> Result<Matrix> {
    model.reconstruct(coeffs, clamp)
}
