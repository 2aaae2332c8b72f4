//! Evaluation measures: Pearson correlation, pairwise decoding accuracy,
//! pixel-space pairwise accuracy and mean correlation distance.
//!
//! Pairwise accuracy divides the number of correctly ordered pairs by the
//! number of pairs `n(n−1)/2`, so it always lies in `[0, 1]`. A pair whose
//! matched and crossed correlation sums are exactly equal is a tie; ties
//! score zero and are counted separately.

use rayon::prelude::*;

use crate::dataio::{parse_key_values, ImageSet};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairwiseReport {
    pub accuracy: f64,
    pub n_items: usize,
    pub n_pairs: usize,
    pub n_correct: usize,
    pub n_ties: usize,
}

pub const REPORT_CSV_HEADER: &str = "item_count,pair_count,correct,ties,accuracy";

impl PairwiseReport {
    pub fn from_counts(n_items: usize, n_correct: usize, n_ties: usize) -> Self {
        let n_pairs = n_items * n_items.saturating_sub(1) / 2;
        let accuracy = if n_pairs == 0 {
            0.0
        } else {
            n_correct as f64 / n_pairs as f64
        };
        Self {
            accuracy,
            n_items,
            n_pairs,
            n_correct,
            n_ties,
        }
    }

    pub fn to_key_value(&self) -> String {
        format!(
            "items={}\npairs={}\ncorrect={}\nties={}\naccuracy={:.6}\n",
            self.n_items, self.n_pairs, self.n_correct, self.n_ties, self.accuracy
        )
    }

    /// Parses [`to_key_value`](Self::to_key_value) output. Accuracy is
    /// recomputed from the counts rather than read back from its rounded text.
    pub fn parse_key_value(text: &str, context: &str) -> Result<Self> {
        let pairs = parse_key_values(text, context)?;
        let get = |key: &str| -> Result<usize> {
            let raw = pairs
                .iter()
                .find(|(k, _)| k == key)
                .map(|(_, v)| v)
                .ok_or_else(|| Error::Format {
                    context: context.to_string(),
                    message: format!("missing key {key}"),
                })?;
            raw.parse().map_err(|_| Error::Format {
                context: context.to_string(),
                message: format!("bad value {raw:?} for {key}"),
            })
        };
        let report = Self::from_counts(get("items")?, get("correct")?, get("ties")?);
        if get("pairs")? != report.n_pairs || report.n_correct + report.n_ties > report.n_pairs {
            return Err(Error::Format {
                context: context.to_string(),
                message: "pair counts are inconsistent with the item count".into(),
            });
        }
        Ok(report)
    }

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{:.6}",
            self.n_items, self.n_pairs, self.n_correct, self.n_ties, self.accuracy
        )
    }
}

struct Centered {
    dev: Vec<f64>,
    sum_sq: f64,
}

fn centered(x: &[f64], which: &'static str, row: usize) -> Result<Centered> {
    if x.iter().all(|&v| v == x[0]) {
        return Err(Error::ZeroVariance { which, row });
    }
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    let dev: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let sum_sq = dev.iter().map(|d| d * d).sum();
    Ok(Centered { dev, sum_sq })
}

fn correlation(a: &Centered, b: &Centered) -> f64 {
    let cross: f64 = a.dev.iter().zip(&b.dev).map(|(x, y)| x * y).sum();
    (cross / (a.sum_sq * b.sum_sq).sqrt()).clamp(-1.0, 1.0)
}

/// Pearson correlation of two equal-length vectors.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::ZeroVariance { which: "first", row: 0 });
    }
    Ok(correlation(&centered(a, "first", 0)?, &centered(b, "second", 0)?))
}

fn check_same_shape(v: &Matrix, p: &Matrix) -> Result<()> {
    if v.shape() != p.shape() {
        return Err(Error::ShapeMismatch(format!(
            "originals are {} but predictions are {}",
            v.shape_str(),
            p.shape_str()
        )));
    }
    Ok(())
}

/// Pairwise decoding accuracy of predictions `p` against originals `v` (row-aligned).
///
/// Pair `(i, j)` counts as correct when
/// `c(vᵢ,pᵢ) + c(vⱼ,pⱼ) > c(vᵢ,pⱼ) + c(vⱼ,pᵢ)`.
pub fn pairwise_decoding_accuracy(v: &Matrix, p: &Matrix) -> Result<PairwiseReport> {
    check_same_shape(v, p)?;
    let n = v.rows();
    if n < 2 {
        return Err(Error::TooFewRows { needed: 2, got: n });
    }
    let cv = (0..n)
        .map(|i| centered(v.row(i), "original", i))
        .collect::<Result<Vec<_>>>()?;
    let cp = (0..n)
        .map(|i| centered(p.row(i), "predicted", i))
        .collect::<Result<Vec<_>>>()?;
    // corr[i][j] = c(vᵢ, pⱼ)
    let corr: Vec<Vec<f64>> = cv
        .par_iter()
        .map(|a| cp.iter().map(|b| correlation(a, b)).collect())
        .collect();
    let (correct, ties) = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut correct = 0usize;
            let mut ties = 0usize;
            for j in i + 1..n {
                let matched = corr[i][i] + corr[j][j];
                let crossed = corr[i][j] + corr[j][i];
                if matched > crossed {
                    correct += 1;
                } else if matched == crossed {
                    ties += 1;
                }
            }
            (correct, ties)
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    Ok(PairwiseReport::from_counts(n, correct, ties))
}

/// Pairwise decoding accuracy on flattened pixels.
pub fn pixcomp(orig: &ImageSet, recon: &ImageSet) -> Result<PairwiseReport> {
    if orig.geometry != recon.geometry || orig.len() != recon.len() {
        return Err(Error::GeometryMismatch(format!(
            "{} images of {} vs {} images of {}",
            orig.len(),
            orig.geometry,
            recon.len(),
            recon.geometry
        )));
    }
    pairwise_decoding_accuracy(&orig.images, &recon.images)
}

/// Mean over rows of `1 − pearson(f_orig[i], f_recon[i])`.
pub fn feature_distance(f_orig: &Matrix, f_recon: &Matrix) -> Result<f64> {
    check_same_shape(f_orig, f_recon)?;
    if f_orig.rows() == 0 {
        return Err(Error::EmptyInput("no feature rows".into()));
    }
    let mut total = 0.0;
    for i in 0..f_orig.rows() {
        let a = centered(f_orig.row(i), "original", i)?;
        let b = centered(f_recon.row(i), "reconstructed", i)?;
        total += 1.0 - correlation(&a, &b);
    }
    Ok(total / f_orig.rows() as f64)
}
