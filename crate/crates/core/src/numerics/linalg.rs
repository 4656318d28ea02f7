use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative pivot threshold used by [`factor_logdet`].
pub const DEFAULT_PIVOT_TOL: f64 = 1e-10;

const SYMMETRY_TOL: f64 = 1e-12;

/// Dense symmetric matrix expected to be positive definite.
///
/// Symmetry is checked on construction. Definiteness is only established by a
/// successful [`factor_logdet`].
#[derive(Debug, Clone, PartialEq)]
pub struct SpdMatrix(DMatrix<f64>);

impl SpdMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::Dimension(format!(
                "expected a square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let scale = m.amax().max(f64::MIN_POSITIVE);
        let mut worst = 0.0_f64;
        for i in 0..m.nrows() {
            for j in 0..i {
                worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
            }
        }
        if worst > SYMMETRY_TOL * scale {
            return Err(Error::NotSymmetric(worst / scale));
        }
        Ok(SpdMatrix(m))
    }

    /// Wraps a matrix that is symmetric by construction, averaging away
    /// rounding asymmetry.
    pub(crate) fn symmetrized(m: DMatrix<f64>) -> Self {
        let t = m.transpose();
        SpdMatrix((m + t) * 0.5)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }
}

/// Lower Cholesky factor `L` with `L Lᵀ = A`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: DMatrix<f64>,
}

impl Cholesky {
    pub fn new(m: &SpdMatrix, pivot_tol: f64) -> Result<Self> {
        let a = m.matrix();
        let n = a.nrows();
        let scale = (0..n).map(|i| a[(i, i)].abs()).fold(0.0, f64::max);
        let mut l = DMatrix::<f64>::zeros(n, n);
        for j in 0..n {
            let mut d = a[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if !(d > pivot_tol * scale) {
                return Err(Error::NotPositiveDefinite { column: j, pivot: d });
            }
            let ljj = d.sqrt();
            l[(j, j)] = ljj;
            for i in (j + 1)..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / ljj;
            }
        }
        Ok(Cholesky { l })
    }

    pub fn factor(&self) -> &DMatrix<f64> {
        &self.l
    }

    pub fn logdet(&self) -> f64 {
        2.0 * self.l.diagonal().iter().map(|d| d.ln()).sum::<f64>()
    }

    /// Solves `A x = b` by forward and back substitution.
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let n = self.l.nrows();
        let mut z = b.clone();
        for i in 0..n {
            let mut s = z[i];
            for k in 0..i {
                s -= self.l[(i, k)] * z[k];
            }
            z[i] = s / self.l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = z[i];
            for k in (i + 1)..n {
                s -= self.l[(k, i)] * z[k];
            }
            z[i] = s / self.l[(i, i)];
        }
        z
    }
}

/// Cholesky factorization with the default pivot tolerance. Returns the lower
/// factor and `log det m`.
pub fn factor_logdet(m: &SpdMatrix) -> Result<(DMatrix<f64>, f64)> {
    factor_logdet_with(m, DEFAULT_PIVOT_TOL)
}

/// A pivot `d_j` fails when `d_j <= pivot_tol * max_i |m_ii|`.
pub fn factor_logdet_with(m: &SpdMatrix, pivot_tol: f64) -> Result<(DMatrix<f64>, f64)> {
    let chol = Cholesky::new(m, pivot_tol)?;
    let logdet = chol.logdet();
    Ok((chol.l, logdet))
}

fn power_iteration(a: &DMatrix<f64>, tol: f64) -> f64 {
    let n = a.nrows();
    if n == 0 {
        return 0.0;
    }
    // Fixed non-symmetric start so that no eigenvector is systematically missed.
    let mut v = DVector::from_fn(n, |i, _| 1.0 + 0.1 * ((i * 7919) % 13) as f64);
    v /= v.norm();
    let mut lambda = (v.transpose() * a * &v)[(0, 0)];
    for _ in 0..100_000 {
        let w = a * &v;
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        v = w / norm;
        let next = (v.transpose() * a * &v)[(0, 0)];
        let done = (next - lambda).abs() <= tol * next.abs().max(f64::MIN_POSITIVE);
        lambda = next;
        if done {
            break;
        }
    }
    lambda
}

/// Smallest and largest eigenvalue of a symmetric PSD matrix by power
/// iteration; the smallest comes from iterating on `lambda_max I - A`.
pub fn extremal_eigenvalues(m: &SpdMatrix, tol: f64) -> (f64, f64) {
    let a = m.matrix();
    let n = a.nrows();
    if n == 0 {
        return (0.0, 0.0);
    }
    if n == 1 {
        return (a[(0, 0)], a[(0, 0)]);
    }
    let max = power_iteration(a, tol);
    let shifted = DMatrix::<f64>::identity(n, n) * max - a;
    let gap = power_iteration(&shifted, tol);
    (max - gap, max)
}

/// Spectral norm `sqrt(lambda_max(AᵀA))`.
pub fn spectral_norm(a: &DMatrix<f64>, tol: f64) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    let ata = a.transpose() * a;
    power_iteration(&ata, tol).max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::make_stream;
    use approx::assert_relative_eq;

    fn cofactor_det(a: &DMatrix<f64>) -> f64 {
        let n = a.nrows();
        if n == 1 {
            return a[(0, 0)];
        }
        (0..n)
            .map(|j| {
                let minor = a.clone().remove_row(0).remove_column(j);
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                sign * a[(0, j)] * cofactor_det(&minor)
            })
            .sum()
    }

    fn random_spd(dim: usize, seed: u64) -> DMatrix<f64> {
        let mut s = make_stream(seed);
        let b = DMatrix::from_fn(dim, dim, |_, _| s.uniform() * 2.0 - 1.0);
        &b * b.transpose() + DMatrix::identity(dim, dim) * 0.5
    }

    #[test]
    fn identity_and_diagonal() {
        let (_, ld) = factor_logdet(&SpdMatrix::new(DMatrix::identity(2, 2)).unwrap()).unwrap();
        assert_eq!(ld, 0.0);
        let d = SpdMatrix::new(DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 9.0]))).unwrap();
        let (l, ld) = factor_logdet(&d).unwrap();
        assert_relative_eq!(ld, 36f64.ln(), epsilon = 1e-14);
        assert_relative_eq!(l[(1, 1)], 3.0);
    }

    #[test]
    fn logdet_matches_cofactor_expansion() {
        for seed in 0..5 {
            let a = random_spd(5, seed);
            let det = cofactor_det(&a);
            let (_, ld) = factor_logdet(&SpdMatrix::new(a).unwrap()).unwrap();
            assert!((ld - det.ln()).abs() < 1e-9, "seed {seed}");
        }
    }

    #[test]
    fn reconstruction_up_to_dim_50() {
        for dim in [1, 2, 7, 20, 50] {
            let a = random_spd(dim, dim as u64 + 100);
            let (l, _) = factor_logdet(&SpdMatrix::new(a.clone()).unwrap()).unwrap();
            let err = (&l * l.transpose() - &a).amax();
            assert!(err <= 1e-10 * a.amax(), "dim {dim}: {err:e}");
        }
    }

    #[test]
    fn rejects_indefinite_and_asymmetric() {
        let m = SpdMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0])).unwrap();
        assert!(matches!(
            factor_logdet(&m),
            Err(Error::NotPositiveDefinite { column: 1, .. })
        ));
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]);
        assert!(matches!(SpdMatrix::new(asym), Err(Error::NotSymmetric(_))));
        let singular = SpdMatrix::new(DMatrix::from_element(3, 3, 1.0)).unwrap();
        assert!(factor_logdet(&singular).is_err());
    }

    #[test]
    fn solve_recovers_rhs() {
        let a = random_spd(6, 9);
        let chol = Cholesky::new(&SpdMatrix::new(a.clone()).unwrap(), DEFAULT_PIVOT_TOL).unwrap();
        let b = DVector::from_fn(6, |i, _| i as f64 - 2.5);
        let x = chol.solve(&b);
        assert!((&a * x - b).amax() < 1e-10);
    }

    #[test]
    fn eigenvalues_of_two_by_two() {
        // [[2,1],[1,2]] has eigenvalues 1 and 3.
        let m = SpdMatrix::new(DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0])).unwrap();
        let (lo, hi) = extremal_eigenvalues(&m, 1e-12);
        assert_relative_eq!(lo, 1.0, epsilon = 1e-6);
        assert_relative_eq!(hi, 3.0, epsilon = 1e-6);
        let ind = DMatrix::from_row_slice(2, 2, &[0.0, 2.0, 2.0, 0.0]);
        assert_relative_eq!(spectral_norm(&ind, 1e-12), 2.0, epsilon = 1e-6);
    }
}
