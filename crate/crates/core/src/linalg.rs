//! Small dense linear algebra on fixed-width rows.
//!
//! Everything here works on `P`-column problems with `P` known at compile time
//! (3 for the scale regression, 6 for the nonlinear solver). Least squares goes
//! through a one-sided Jacobi SVD so the condition number falls out of the same
//! factorization.

use crate::Scalar;

const MAX_SWEEPS: usize = 80;

pub fn dot<T: Scalar, const P: usize>(a: &[T; P], b: &[T; P]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (x, y)| acc + *x * *y)
}

pub fn norm<T: Scalar, const P: usize>(a: &[T; P]) -> T {
    dot(a, a).sqrt()
}

/// Moment matrix `XᵀX` of a row-major design.
pub fn gram<T: Scalar, const P: usize>(rows: &[[T; P]]) -> [[T; P]; P] {
    let mut out = [[T::zero(); P]; P];
    for row in rows {
        for i in 0..P {
            for j in 0..P {
                out[i][j] = out[i][j] + row[i] * row[j];
            }
        }
    }
    out
}

/// Thin SVD of an `m × P` matrix, `A = U diag(σ) Vᵀ`.
#[derive(Debug, Clone)]
pub struct Svd<T, const P: usize> {
    /// Columns of `A·V`; column `j` has norm `singular[j]`.
    scaled_left: Vec<[T; P]>,
    /// Right singular vectors stored as columns: `v[i][j]` is component `i` of vector `j`.
    v: [[T; P]; P],
    pub singular: [T; P],
}

impl<T: Scalar, const P: usize> Svd<T, P> {
    /// One-sided (Hestenes) Jacobi. Accurate for the small, possibly badly scaled
    /// matrices this crate produces.
    pub fn new(rows: &[[T; P]]) -> Self {
        let mut a: Vec<[T; P]> = rows.to_vec();
        let mut v = [[T::zero(); P]; P];
        for (i, row) in v.iter_mut().enumerate() {
            row[i] = T::one();
        }
        let eps = T::epsilon();
        for _ in 0..MAX_SWEEPS {
            let mut rotated = false;
            for p in 0..P {
                for q in (p + 1)..P {
                    let (mut alpha, mut beta, mut gamma) = (T::zero(), T::zero(), T::zero());
                    for row in &a {
                        alpha = alpha + row[p] * row[p];
                        beta = beta + row[q] * row[q];
                        gamma = gamma + row[p] * row[q];
                    }
                    if gamma == T::zero() || gamma.abs() <= eps * (alpha * beta).sqrt() {
                        continue;
                    }
                    rotated = true;
                    let zeta = (beta - alpha) / (T::lit(2.0) * gamma);
                    let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                    let c = T::one() / (T::one() + t * t).sqrt();
                    let s = c * t;
                    for row in a.iter_mut() {
                        let (ap, aq) = (row[p], row[q]);
                        row[p] = c * ap - s * aq;
                        row[q] = s * ap + c * aq;
                    }
                    for row in v.iter_mut() {
                        let (vp, vq) = (row[p], row[q]);
                        row[p] = c * vp - s * vq;
                        row[q] = s * vp + c * vq;
                    }
                }
            }
            if !rotated {
                break;
            }
        }
        let mut singular = [T::zero(); P];
        for (j, sigma) in singular.iter_mut().enumerate() {
            *sigma = a
                .iter()
                .fold(T::zero(), |acc, row| acc + row[j] * row[j])
                .sqrt();
        }
        Self {
            scaled_left: a,
            v,
            singular,
        }
    }

    pub fn max_singular(&self) -> T {
        self.singular.iter().copied().fold(T::zero(), T::max)
    }

    pub fn min_singular(&self) -> T {
        self.singular.iter().copied().fold(T::infinity(), T::min)
    }

    /// `σ_max / σ_min`, infinite for a rank-deficient matrix.
    pub fn condition_number(&self) -> T {
        let min = self.min_singular();
        if min == T::zero() {
            T::infinity()
        } else {
            self.max_singular() / min
        }
    }

    /// Minimum-norm least-squares solution of `A x = y`. `None` when `A` is rank deficient.
    pub fn solve(&self, y: &[T]) -> Option<[T; P]> {
        assert_eq!(
            y.len(),
            self.scaled_left.len(),
            "right-hand side length mismatch"
        );
        let mut x = [T::zero(); P];
        for j in 0..P {
            let sigma = self.singular[j];
            if sigma == T::zero() {
                return None;
            }
            let proj = self
                .scaled_left
                .iter()
                .zip(y)
                .fold(T::zero(), |acc, (row, yi)| acc + row[j] * *yi);
            let coeff = proj / (sigma * sigma);
            for (i, xi) in x.iter_mut().enumerate() {
                *xi = *xi + self.v[i][j] * coeff;
            }
        }
        Some(x)
    }
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn symmetric_eigenvalues<T: Scalar, const P: usize>(matrix: [[T; P]; P]) -> [T; P] {
    let mut m = matrix;
    let eps = T::epsilon();
    for _ in 0..MAX_SWEEPS {
        let mut off = T::zero();
        let mut diag = T::zero();
        for i in 0..P {
            diag = diag + m[i][i] * m[i][i];
            for j in 0..P {
                if i != j {
                    off = off + m[i][j] * m[i][j];
                }
            }
        }
        if off == T::zero() || off <= eps * eps * diag {
            break;
        }
        for p in 0..P {
            for q in (p + 1)..P {
                if m[p][q] == T::zero() {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (T::lit(2.0) * m[p][q]);
                let t = theta.signum() / (theta.abs() + (T::one() + theta * theta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                // m <- Jᵀ m J
                for k in 0..P {
                    let (mkp, mkq) = (m[k][p], m[k][q]);
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..P {
                    let (mpk, mqk) = (m[p][k], m[q][k]);
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
            }
        }
    }
    let mut eig = [T::zero(); P];
    for (i, e) in eig.iter_mut().enumerate() {
        *e = m[i][i];
    }
    eig.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    eig
}

/// Gaussian elimination with partial pivoting. `None` on an exactly singular pivot.
pub fn solve<T: Scalar, const P: usize>(matrix: [[T; P]; P], rhs: [T; P]) -> Option<[T; P]> {
    let mut a = matrix;
    let mut b = rhs;
    for col in 0..P {
        let pivot = (col..P).max_by(|&i, &j| {
            a[i][col]
                .abs()
                .partial_cmp(&a[j][col].abs())
                .unwrap_or(std::cmp::Ordering::Equal)
        })?;
        if a[pivot][col] == T::zero() || !a[pivot][col].is_finite() {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in (col + 1)..P {
            let factor = a[row][col] / a[col][col];
            for k in col..P {
                a[row][k] = a[row][k] - factor * a[col][k];
            }
            b[row] = b[row] - factor * b[col];
        }
    }
    let mut x = [T::zero(); P];
    for row in (0..P).rev() {
        let mut acc = b[row];
        for k in (row + 1)..P {
            acc = acc - a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::{DMatrix, DVector, Matrix3};

    fn sample_rows() -> Vec<[f64; 3]> {
        vec![
            [4.0, 1.0, 0.5],
            [1.0, 3.0, -0.2],
            [0.3, -0.7, 2.0],
            [1.5, 0.2, 0.9],
        ]
    }

    #[test]
    fn svd_matches_nalgebra_singular_values() {
        let rows = sample_rows();
        let svd = Svd::new(&rows);
        let mut ours = svd.singular;
        ours.sort_by(|a, b| b.partial_cmp(a).unwrap());

        let m = DMatrix::from_fn(4, 3, |i, j| rows[i][j]);
        let mut theirs: Vec<f64> = m
            .svd(false, false)
            .singular_values
            .iter()
            .copied()
            .collect();
        theirs.sort_by(|a, b| b.partial_cmp(a).unwrap());
        for (a, b) in ours.iter().zip(&theirs) {
            assert_relative_eq!(*a, *b, max_relative = 1e-12);
        }
    }

    #[test]
    fn least_squares_matches_nalgebra() {
        let rows = sample_rows();
        let y = [1.0, -2.0, 0.5, 3.0];
        let ours = Svd::new(&rows).solve(&y).unwrap();

        let m = DMatrix::from_fn(4, 3, |i, j| rows[i][j]);
        let theirs = m
            .svd(true, true)
            .solve(&DVector::from_column_slice(&y), 1e-14)
            .unwrap();
        for j in 0..3 {
            assert_relative_eq!(ours[j], theirs[j], max_relative = 1e-11);
        }
    }

    #[test]
    fn rank_deficient_has_no_solution() {
        let rows: Vec<[f64; 3]> = vec![[1.0, 0.0, 0.0], [2.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        let svd = Svd::new(&rows);
        assert!(svd.condition_number().is_infinite());
        assert!(svd.solve(&[1.0, 2.0, 3.0]).is_none());
    }

    #[test]
    fn eigenvalues_match_nalgebra() {
        let m = [[4.0, 1.0, 0.3], [1.0, 3.0, -0.5], [0.3, -0.5, 2.0]];
        let ours = symmetric_eigenvalues(m);
        let na = Matrix3::new(4.0, 1.0, 0.3, 1.0, 3.0, -0.5, 0.3, -0.5, 2.0);
        let mut theirs: Vec<f64> = na.symmetric_eigenvalues().iter().copied().collect();
        theirs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (a, b) in ours.iter().zip(&theirs) {
            assert_relative_eq!(*a, *b, max_relative = 1e-12);
        }
    }

    #[test]
    fn gaussian_solve() {
        let a = [[2.0, 1.0, 0.0], [1.0, 3.0, 1.0], [0.0, 1.0, 4.0]];
        let x = solve(a, [1.0, 2.0, 3.0]).unwrap();
        for (row, rhs) in a.iter().zip([1.0, 2.0, 3.0]) {
            assert_relative_eq!(dot(row, &x), rhs, epsilon = 1e-14);
        }
        assert!(solve([[1.0, 2.0], [2.0, 4.0]], [1.0, 1.0]).is_none());
    }

    #[test]
    fn f32_svd_works() {
        let rows: Vec<[f32; 3]> = vec![[2.0, 0.0, 0.0], [0.0, 3.0, 0.0], [0.0, 0.0, 4.0]];
        let x = Svd::new(&rows).solve(&[2.0, 6.0, 12.0]).unwrap();
        assert_relative_eq!(x[0], 1.0, epsilon = 1e-6);
        assert_relative_eq!(x[1], 2.0, epsilon = 1e-6);
        assert_relative_eq!(x[2], 3.0, epsilon = 1e-6);
    }
}
