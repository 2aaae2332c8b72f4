//! Dense symmetric positive-definite solves used by the encoder fit and the
//! decoder inversion.

use crate::matrix::Matrix;

/// Reciprocal condition estimates below this are treated as singular.
pub const RCOND_THRESHOLD: f64 = 1e-12;

/// Lower-triangular Cholesky factor `A = L Lᵀ` of a symmetric matrix.
#[derive(Debug, Clone)]
pub(crate) struct Cholesky {
    n: usize,
    l: Vec<f64>,
}

impl Cholesky {
    /// Factors `a`, reading only its lower triangle. Returns `None` when a
    /// pivot is not strictly positive.
    pub fn factor(a: &Matrix) -> Option<Self> {
        let n = a.rows();
        debug_assert_eq!(n, a.cols());
        let mut l = vec![0.0; n * n];
        for j in 0..n {
            let mut d = a[(j, j)];
            for k in 0..j {
                d -= l[j * n + k] * l[j * n + k];
            }
            if !d.is_finite() || d <= 0.0 {
                return None;
            }
            let ljj = d.sqrt();
            l[j * n + j] = ljj;
            for i in j + 1..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = s / ljj;
            }
        }
        Some(Self { n, l })
    }

    /// Cheap reciprocal condition estimate `(min Lᵢᵢ / max Lᵢᵢ)²`.
    pub fn rcond_estimate(&self) -> f64 {
        let n = self.n;
        let (lo, hi) = (0..n)
            .map(|i| self.l[i * n + i])
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), d| (lo.min(d), hi.max(d)));
        if n == 0 || hi == 0.0 {
            return 0.0;
        }
        (lo / hi).powi(2)
    }

    /// Overwrites `b` with the solution of `L Lᵀ x = b`.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        debug_assert_eq!(b.len(), n);
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s -= self.l[i * n + k] * b[k];
            }
            b[i] = s / self.l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in i + 1..n {
                s -= self.l[k * n + i] * b[k];
            }
            b[i] = s / self.l[i * n + i];
        }
    }
}

/// `AᵀA` for row-major `a`, summing over rows in ascending order.
pub(crate) fn gram_of_columns(a: &Matrix) -> Matrix {
    let p = a.cols();
    let mut g = Matrix::zeros(p, p);
    for r in a.iter_rows() {
        for i in 0..p {
            let ri = r[i];
            if ri == 0.0 {
                continue;
            }
            for j in 0..=i {
                g[(i, j)] += ri * r[j];
            }
        }
    }
    for i in 0..p {
        for j in 0..i {
            g[(j, i)] = g[(i, j)];
        }
    }
    g
}

/// `AAᵀ` for row-major `a` (dot products of rows).
pub(crate) fn gram_of_rows(a: &Matrix) -> Matrix {
    let n = a.rows();
    let mut g = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = dot(a.row(i), a.row(j));
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    g
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_spd_system() {
        let a = Matrix::from_rows(&[[4.0, 2.0], [2.0, 3.0]]).unwrap();
        let ch = Cholesky::factor(&a).unwrap();
        let mut b = vec![2.0, 1.0];
        ch.solve_in_place(&mut b);
        // 4x + 2y = 2, 2x + 3y = 1 -> x = 0.5, y = 0
        assert!((b[0] - 0.5).abs() < 1e-15);
        assert!(b[1].abs() < 1e-15);
        assert!(ch.rcond_estimate() > 0.1);
    }

    #[test]
    fn rank_deficient_is_rejected_or_flagged() {
        let a = Matrix::from_rows(&[[2.0, 2.0], [2.0, 2.0]]).unwrap();
        match Cholesky::factor(&a) {
            None => {}
            Some(ch) => assert!(ch.rcond_estimate() < RCOND_THRESHOLD),
        }
    }

    #[test]
    fn grams_agree_with_transpose_products() {
        let a = Matrix::from_rows(&[[1.0, 2.0, 0.5], [-1.0, 0.0, 3.0]]).unwrap();
        let at = a.transpose();
        assert_eq!(gram_of_columns(&a), at.matmul(&a).unwrap());
        assert_eq!(gram_of_rows(&a), a.matmul(&at).unwrap());
    }
}
