//! Small dense linear algebra and Gaussian sampling.
//!
//! Covariance (not precision) is the canonical stored form. Rank-one
//! precision updates go through Sherman–Morrison on the covariance and the
//! result is re-symmetrized after every update.

use crate::error::{check_dim, Error, Result};
use crate::rng::SeededRng;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::scaled_identity(n, 1.0)
    }

    pub fn scaled_identity(n: usize, s: f64) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = s;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for row in rows {
            check_dim(n_cols, row.len())?;
            data.extend_from_slice(row);
        }
        Self::from_vec(n_rows, n_cols, data)
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        check_dim(rows * cols, data.len())?;
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("matrix entries must be finite"));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.cols, x.len())?;
        Ok((0..self.rows).map(|i| dot(self.row(i), x)).collect())
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        check_dim(self.cols, other.rows)?;
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        check_dim(self.data.len(), other.data.len())?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// `‖self − other‖_F / ‖other‖_F`.
    pub fn relative_frobenius_error(&self, other: &Matrix) -> Result<f64> {
        let diff = self.sub(other)?.frobenius_norm();
        let scale = other.frobenius_norm();
        Ok(if scale == 0.0 { diff } else { diff / scale })
    }

    fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    fn symmetrize(&mut self) {
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                let avg = 0.5 * (self[(i, j)] + self[(j, i)]);
                self[(i, j)] = avg;
                self[(j, i)] = avg;
            }
        }
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Lower-triangular Cholesky factor `L` with `L·Lᵀ = A`.
#[derive(Debug, Clone, PartialEq)]
pub struct LowerTriangular(Matrix);

impl LowerTriangular {
    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.rows
    }

    /// `L·Lᵀ`.
    pub fn reconstruct(&self) -> Matrix {
        self.0
            .matmul(&self.0.transpose())
            .expect("square factor")
    }

    /// `L·x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let l = &self.0;
        (0..l.rows)
            .map(|i| dot(&l.row(i)[..=i], &x[..=i]))
            .collect()
    }

    /// Solves `L·y = b`.
    pub fn solve_lower(&self, b: &[f64]) -> Vec<f64> {
        let l = &self.0;
        let mut y = b.to_vec();
        for i in 0..l.rows {
            let s = dot(&l.row(i)[..i], &y[..i]);
            y[i] = (y[i] - s) / l[(i, i)];
        }
        y
    }

    /// Solves `Lᵀ·x = y`.
    pub fn solve_upper(&self, y: &[f64]) -> Vec<f64> {
        let l = &self.0;
        let n = l.rows;
        let mut x = y.to_vec();
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in (i + 1)..n {
                s -= l[(k, i)] * x[k];
            }
            x[i] = s / l[(i, i)];
        }
        x
    }

    /// Solves `L·Lᵀ·x = b`.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), b.len())?;
        Ok(self.solve_upper(&self.solve_lower(b)))
    }

    /// `(L·Lᵀ)⁻¹`, column by column.
    pub fn inverse(&self) -> Matrix {
        let n = self.dim();
        let mut inv = Matrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|x| *x = 0.0);
            e[j] = 1.0;
            let col = self.solve_upper(&self.solve_lower(&e));
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        inv.symmetrize();
        inv
    }
}

/// Cholesky factorization of a symmetric positive definite matrix.
///
/// Fails with [`Error::NotPositiveDefinite`] naming the first nonpositive pivot.
pub fn cholesky(m: &Matrix) -> Result<LowerTriangular> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch {
            expected: m.rows,
            got: m.cols,
        });
    }
    let n = m.rows;
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = m[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::NotPositiveDefinite { pivot: j, value: d });
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in (j + 1)..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / djj;
        }
    }
    Ok(LowerTriangular(l))
}

/// Symmetric positive definite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdMatrix(Matrix);

impl SpdMatrix {
    /// Validates symmetry (1e-12 relative to the largest entry) and
    /// positive definiteness.
    pub fn new(m: Matrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::DimensionMismatch {
                expected: m.rows,
                got: m.cols,
            });
        }
        let tol = 1e-12 * m.max_abs();
        for i in 0..m.rows {
            for j in (i + 1)..m.cols {
                if (m[(i, j)] - m[(j, i)]).abs() > tol {
                    return Err(Error::NotSymmetric { row: i, col: j });
                }
            }
        }
        cholesky(&m)?;
        Ok(SpdMatrix(m))
    }

    pub fn identity(n: usize) -> Self {
        SpdMatrix(Matrix::identity(n))
    }

    pub fn scaled_identity(n: usize, s: f64) -> Result<Self> {
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::invalid(format!("scale must be positive, got {s}")));
        }
        Ok(SpdMatrix(Matrix::scaled_identity(n, s)))
    }

    pub fn dim(&self) -> usize {
        self.0.rows
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn cholesky(&self) -> Result<LowerTriangular> {
        cholesky(&self.0)
    }

    pub fn inverse(&self) -> Result<Matrix> {
        Ok(self.cholesky()?.inverse())
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.0.matvec(x)
    }

    /// Applies `Σ ← (Σ⁻¹ + a·aᵀ/σ²)⁻¹` in place via Sherman–Morrison and
    /// returns the pre-update `Σ·a` and `σ² + aᵀΣa`.
    ///
    /// Every conditioned mean update has the form
    /// `x ← x + Σa·(y − aᵀx)/(σ² + aᵀΣa)` using these two quantities.
    pub fn rank_one_precision_update(&mut self, a: &[f64], noise_var: f64) -> Result<RankOneGain> {
        check_dim(self.dim(), a.len())?;
        if !(noise_var > 0.0) || !noise_var.is_finite() {
            return Err(Error::invalid(format!(
                "noise variance must be positive, got {noise_var}"
            )));
        }
        let cov_a = self.0.matvec(a)?;
        let denom = noise_var + dot(a, &cov_a);
        let n = self.dim();
        for i in 0..n {
            let ci = cov_a[i] / denom;
            if ci == 0.0 {
                continue;
            }
            for j in 0..n {
                self.0[(i, j)] -= ci * cov_a[j];
            }
        }
        self.0.symmetrize();
        Ok(RankOneGain { cov_a, denom })
    }
}

/// Quantities produced by a rank-one precision update.
#[derive(Debug, Clone)]
pub struct RankOneGain {
    pub cov_a: Vec<f64>,
    pub denom: f64,
}

impl RankOneGain {
    /// `x ← x + Σa·(target − aᵀx)/(σ² + aᵀΣa)`.
    pub fn condition(&self, x: &mut [f64], a: &[f64], target: f64) {
        let innovation = (target - dot(a, x)) / self.denom;
        for (xi, ci) in x.iter_mut().zip(&self.cov_a) {
            *xi += ci * innovation;
        }
    }
}

/// Returns `(cov⁻¹ + a·aᵀ/noise_var)⁻¹` without forming any inverse.
pub fn precision_rank_one_update(cov: &SpdMatrix, a: &[f64], noise_var: f64) -> Result<SpdMatrix> {
    let mut out = cov.clone();
    out.rank_one_precision_update(a, noise_var)?;
    Ok(out)
}

/// Draws `mean + L·z` with `z` standard normal and `L` the Cholesky factor of `cov`.
pub fn sample_gaussian(mean: &[f64], cov: &SpdMatrix, rng: &mut SeededRng) -> Result<Vec<f64>> {
    let l = cov.cholesky()?;
    sample_with_factor(mean, &l, rng)
}

/// Same as [`sample_gaussian`] with a precomputed factor.
pub fn sample_with_factor(mean: &[f64], l: &LowerTriangular, rng: &mut SeededRng) -> Result<Vec<f64>> {
    check_dim(l.dim(), mean.len())?;
    let z: Vec<f64> = (0..mean.len()).map(|_| rng.standard_normal()).collect();
    Ok(mean.iter().zip(l.mul_vec(&z)).map(|(m, x)| m + x).collect())
}

/// Sample covariance (unbiased) of equal-length vectors.
pub fn empirical_covariance(samples: &[Vec<f64>]) -> (Vec<f64>, Matrix) {
    let n = samples.first().map_or(0, Vec::len);
    let count = samples.len() as f64;
    let mut mean = vec![0.0; n];
    for s in samples {
        for (m, x) in mean.iter_mut().zip(s) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= count);
    let mut cov = Matrix::zeros(n, n);
    for s in samples {
        for i in 0..n {
            let di = s[i] - mean[i];
            for j in 0..n {
                cov[(i, j)] += di * (s[j] - mean[j]);
            }
        }
    }
    let denom = (count - 1.0).max(1.0);
    cov.data.iter_mut().for_each(|c| *c /= denom);
    (mean, cov)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn random_spd(n: usize, rng: &mut SeededRng) -> SpdMatrix {
        let mut b = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                b[(i, j)] = rng.standard_normal();
            }
        }
        let mut m = b.matmul(&b.transpose()).unwrap();
        for i in 0..n {
            m[(i, i)] += 0.5;
        }
        m.symmetrize();
        SpdMatrix::new(m).unwrap()
    }

    /// Gauss–Jordan inversion with partial pivoting, independent of Cholesky.
    fn gauss_jordan_inverse(m: &Matrix) -> Matrix {
        let n = m.rows();
        let mut a = m.clone();
        let mut inv = Matrix::identity(n);
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&x, &y| a[(x, col)].abs().total_cmp(&a[(y, col)].abs()))
                .unwrap();
            for j in 0..n {
                let (p, q) = (a[(pivot, j)], a[(col, j)]);
                a[(pivot, j)] = q;
                a[(col, j)] = p;
                let (p, q) = (inv[(pivot, j)], inv[(col, j)]);
                inv[(pivot, j)] = q;
                inv[(col, j)] = p;
            }
            let d = a[(col, col)];
            for j in 0..n {
                a[(col, j)] /= d;
                inv[(col, j)] /= d;
            }
            for r in 0..n {
                if r != col {
                    let f = a[(r, col)];
                    for j in 0..n {
                        a[(r, j)] -= f * a[(col, j)];
                        inv[(r, j)] -= f * inv[(col, j)];
                    }
                }
            }
        }
        inv
    }

    #[test]
    fn cholesky_identity_and_diagonal() {
        let l = cholesky(&Matrix::identity(3)).unwrap();
        assert_eq!(l.as_matrix(), &Matrix::identity(3));
        let l = cholesky(&Matrix::from_diag(&[4.0, 9.0])).unwrap();
        assert_eq!(l.as_matrix(), &Matrix::from_diag(&[2.0, 3.0]));
    }

    #[test]
    fn cholesky_reconstructs() {
        let m = Matrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let l = cholesky(&m).unwrap();
        assert!(l.reconstruct().relative_frobenius_error(&m).unwrap() < 1e-10);
    }

    #[test]
    fn cholesky_names_failing_pivot() {
        let m = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        match cholesky(&m) {
            Err(Error::NotPositiveDefinite { pivot, .. }) => assert_eq!(pivot, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn zero_covariance_is_rejected() {
        assert!(matches!(
            SpdMatrix::new(Matrix::zeros(2, 2)),
            Err(Error::NotPositiveDefinite { pivot: 0, .. })
        ));
    }

    #[test]
    fn sample_dimension_mismatch() {
        let mut rng = SeededRng::new(0);
        assert!(sample_gaussian(&[0.0; 3], &SpdMatrix::identity(2), &mut rng).is_err());
    }

    #[test]
    fn sample_is_deterministic() {
        let cov = SpdMatrix::new(Matrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap()).unwrap();
        let a = sample_gaussian(&[1.0, 2.0], &cov, &mut SeededRng::new(3)).unwrap();
        let b = sample_gaussian(&[1.0, 2.0], &cov, &mut SeededRng::new(3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sample_standard_normal_means() {
        let mut rng = SeededRng::new(11);
        let n = 100_000;
        let cov = SpdMatrix::identity(2);
        let samples: Vec<Vec<f64>> = (0..n)
            .map(|_| sample_gaussian(&[0.0, 0.0], &cov, &mut rng).unwrap())
            .collect();
        let (mean, _) = empirical_covariance(&samples);
        for m in mean {
            assert!(m.abs() < 4.0 / (n as f64).sqrt(), "{m}");
        }
    }

    #[test]
    fn sample_covariance_within_five_percent() {
        let mut rng = SeededRng::new(12);
        for dim in 1..=5 {
            let cov = random_spd(dim, &mut rng);
            let l = cov.cholesky().unwrap();
            let mean = vec![1.0; dim];
            let samples: Vec<Vec<f64>> = (0..100_000)
                .map(|_| sample_with_factor(&mean, &l, &mut rng).unwrap())
                .collect();
            let (_, emp) = empirical_covariance(&samples);
            let err = emp.relative_frobenius_error(cov.as_matrix()).unwrap();
            assert!(err < 0.05, "dim {dim}: {err}");
        }
    }

    #[test]
    fn rank_one_examples() {
        let out = precision_rank_one_update(&SpdMatrix::identity(2), &[1.0, 0.0], 1.0).unwrap();
        assert_eq!(out.as_matrix(), &Matrix::from_diag(&[0.5, 1.0]));
        let out = precision_rank_one_update(&SpdMatrix::identity(2), &[0.0, 0.0], 1.0).unwrap();
        assert_eq!(out, SpdMatrix::identity(2));
        assert!(precision_rank_one_update(&SpdMatrix::identity(2), &[1.0, 0.0], 0.0).is_err());
        assert!(precision_rank_one_update(&SpdMatrix::identity(2), &[1.0, 0.0], -1.0).is_err());
    }

    #[test]
    fn rank_one_matches_explicit_inversion() {
        let mut rng = SeededRng::new(99);
        for case in 0..100 {
            let n = 1 + case % 10;
            let cov = random_spd(n, &mut rng);
            let a: Vec<f64> = (0..n).map(|_| rng.standard_normal()).collect();
            let noise_var = 0.1 + rng.uniform() * 3.0;
            let fast = precision_rank_one_update(&cov, &a, noise_var).unwrap();

            let mut precision = gauss_jordan_inverse(cov.as_matrix());
            for i in 0..n {
                for j in 0..n {
                    precision[(i, j)] += a[i] * a[j] / noise_var;
                }
            }
            let slow = gauss_jordan_inverse(&precision);
            let err = fast.as_matrix().relative_frobenius_error(&slow).unwrap();
            assert!(err < 1e-8, "case {case}: {err}");
            let l = fast.cholesky().unwrap();
            assert!(l.reconstruct().relative_frobenius_error(fast.as_matrix()).unwrap() < 1e-10);
            assert!(fast.as_matrix().as_slice().iter().all(|x| x.is_finite()));
        }
    }

    #[test]
    fn cholesky_inverse_matches_gauss_jordan() {
        let mut rng = SeededRng::new(5);
        let cov = random_spd(6, &mut rng);
        let a = cov.inverse().unwrap();
        let b = gauss_jordan_inverse(cov.as_matrix());
        assert!(a.relative_frobenius_error(&b).unwrap() < 1e-10);
    }

    proptest! {
        #[test]
        fn repeated_updates_stay_spd(seed in 0u64..500, steps in 1usize..200) {
            let mut rng = SeededRng::new(seed);
            let n = 1 + (seed as usize % 6);
            let mut cov = random_spd(n, &mut rng);
            for _ in 0..steps {
                let a: Vec<f64> = (0..n).map(|_| rng.uniform_range(-1.0, 1.0)).collect();
                cov.rank_one_precision_update(&a, 0.5).unwrap();
            }
            prop_assert!(cov.cholesky().is_ok());
            for i in 0..n {
                for j in 0..n {
                    prop_assert_eq!(cov.get(i, j), cov.get(j, i));
                }
            }
        }
    }
}
