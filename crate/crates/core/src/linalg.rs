//! Dense complex linear algebra for the detectors.
//!
//! Matrices here are tiny (at most a few tens of rows), so everything is a
//! straightforward row-major `Vec<Complex64>` with no blocking.

use std::fmt;
use std::ops::{Index, IndexMut};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative tolerance on the R diagonal below which a matrix is treated as
/// rank deficient.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Tolerance on `a - a^H` accepted by [`solve_hpd`].
pub const HERMITIAN_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is rank deficient (min |r_kk| = {min:e}, max |r_kk| = {max:e})")]
    RankDeficient { min: f64, max: f64 },
    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },
    #[error("matrix is not Hermitian (max asymmetry {0:e})")]
    NotHermitian(f64),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

/// Dense complex matrix, row-major.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows >= 1 && cols >= 1, "matrix dimensions must be positive");
        Self {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    /// Builds a matrix from row slices. Panics on ragged input.
    pub fn from_rows(rows: &[Vec<Complex64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        Self::from_fn(rows.len(), cols, |i, j| rows[i][j])
    }

    pub fn diag(values: &[Complex64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, v) in values.iter().enumerate() {
            m[(i, i)] = *v;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<Complex64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn matmul(&self, other: &ComplexMatrix) -> Result<ComplexMatrix, LinalgError> {
        if self.cols != other.rows {
            return Err(LinalgError::DimensionMismatch(format!(
                "{}x{} * {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = ComplexMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other[(k, j)];
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, x: &[Complex64]) -> Result<Vec<Complex64>, LinalgError> {
        if x.len() != self.cols {
            return Err(LinalgError::DimensionMismatch(format!(
                "{}x{} * vector of length {}",
                self.rows,
                self.cols,
                x.len()
            )));
        }
        Ok((0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// `self^H * self`, the Gram matrix of the columns.
    pub fn gram(&self) -> ComplexMatrix {
        let mut g = ComplexMatrix::zeros(self.cols, self.cols);
        for i in 0..self.cols {
            for j in i..self.cols {
                let v: Complex64 = (0..self.rows)
                    .map(|r| self[(r, i)].conj() * self[(r, j)])
                    .sum();
                g[(i, j)] = v;
                g[(j, i)] = v.conj();
            }
        }
        g
    }

    pub fn sub(&self, other: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Matrix whose column `j` is column `perm[j]` of `self`.
    pub fn permute_columns(&self, perm: &[usize]) -> ComplexMatrix {
        assert_eq!(perm.len(), self.cols);
        Self::from_fn(self.rows, self.cols, |i, j| self[(i, perm[j])])
    }

    /// Stacks `self` on top of `other`.
    pub fn vstack(&self, other: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.cols, other.cols);
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Self {
            rows: self.rows + other.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn scale_column(&mut self, j: usize, factor: f64) {
        for i in 0..self.rows {
            self[(i, j)] *= factor;
        }
    }

    /// 2-norm condition number estimate from the R factor of a QR
    /// decomposition (ratio of extreme |r_kk|). Returns infinity for
    /// rank-deficient or wide matrices.
    pub fn condition_estimate(&self) -> f64 {
        if self.rows < self.cols {
            return f64::INFINITY;
        }
        match householder(self) {
            Ok((_, r)) => {
                let d: Vec<f64> = (0..r.cols()).map(|k| r[(k, k)].re).collect();
                let max = d.iter().cloned().fold(0.0, f64::max);
                let min = d.iter().cloned().fold(f64::INFINITY, f64::min);
                if min > 0.0 {
                    max / min
                } else {
                    f64::INFINITY
                }
            }
            Err(_) => f64::INFINITY,
        }
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;

    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for z in self.row(i) {
                write!(f, "{:+.4}{:+.4}i  ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

/// Thin QR decomposition by Householder reflections.
///
/// Returns `q` (rows x cols, orthonormal columns) and `r` (cols x cols, upper
/// triangular with real positive diagonal).
pub fn qr_decompose(a: &ComplexMatrix) -> Result<(ComplexMatrix, ComplexMatrix), LinalgError> {
    if a.rows() < a.cols() {
        return Err(LinalgError::DimensionMismatch(format!(
            "QR needs rows >= cols, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    let (q, r) = householder(a)?;
    let diag: Vec<f64> = (0..r.cols()).map(|k| r[(k, k)].re).collect();
    let max = diag.iter().cloned().fold(0.0, f64::max);
    let min = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(max > 0.0) || min <= RANK_TOLERANCE * max {
        return Err(LinalgError::RankDeficient { min, max });
    }
    Ok((q, r))
}

/// Householder QR without the rank check. Zero columns yield a zero diagonal.
fn householder(a: &ComplexMatrix) -> Result<(ComplexMatrix, ComplexMatrix), LinalgError> {
    let m = a.rows();
    let n = a.cols();
    let mut work = a.clone();
    let mut reflectors: Vec<Option<Vec<Complex64>>> = Vec::with_capacity(n);

    for k in 0..n {
        let norm = (k..m).map(|i| work[(i, k)].norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            reflectors.push(None);
            continue;
        }
        let x0 = work[(k, k)];
        let phase = if x0.norm() > 0.0 {
            x0 / x0.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        let alpha = -phase * norm;
        let mut v: Vec<Complex64> = (k..m).map(|i| work[(i, k)]).collect();
        v[0] -= alpha;
        let vnorm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if vnorm == 0.0 {
            reflectors.push(None);
            continue;
        }
        for z in &mut v {
            *z /= vnorm;
        }
        // work[k.., k..] -= 2 v (v^H work[k.., k..])
        for j in k..n {
            let dot: Complex64 = v
                .iter()
                .enumerate()
                .map(|(t, vi)| vi.conj() * work[(k + t, j)])
                .sum();
            for (t, vi) in v.iter().enumerate() {
                work[(k + t, j)] -= 2.0 * vi * dot;
            }
        }
        reflectors.push(Some(v));
    }

    // Accumulate Q = H_0 H_1 ... H_{n-1} applied to the first n columns of I.
    let mut q = ComplexMatrix::from_fn(m, n, |i, j| {
        if i == j {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    for k in (0..n).rev() {
        if let Some(v) = &reflectors[k] {
            for j in 0..n {
                let dot: Complex64 = v
                    .iter()
                    .enumerate()
                    .map(|(t, vi)| vi.conj() * q[(k + t, j)])
                    .sum();
                for (t, vi) in v.iter().enumerate() {
                    q[(k + t, j)] -= 2.0 * vi * dot;
                }
            }
        }
    }

    let mut r = ComplexMatrix::from_fn(n, n, |i, j| {
        if j >= i {
            work[(i, j)]
        } else {
            Complex64::new(0.0, 0.0)
        }
    });

    // Rotate phases so that diag(r) is real and non-negative.
    for k in 0..n {
        let d = r[(k, k)];
        let mag = d.norm();
        if mag == 0.0 {
            continue;
        }
        let phase = d / mag;
        for j in k..n {
            r[(k, j)] *= phase.conj();
        }
        r[(k, k)] = Complex64::new(mag, 0.0);
        for i in 0..m {
            q[(i, k)] *= phase;
        }
    }
    Ok((q, r))
}

/// Cholesky factor `L` of a Hermitian positive-definite matrix (`a = L L^H`).
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: ComplexMatrix,
}

impl Cholesky {
    pub fn new(a: &ComplexMatrix) -> Result<Self, LinalgError> {
        let n = a.rows();
        if a.cols() != n {
            return Err(LinalgError::DimensionMismatch(format!(
                "Cholesky needs a square matrix, got {}x{}",
                a.rows(),
                a.cols()
            )));
        }
        let scale = a.as_slice().iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
        let mut asym: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                asym = asym.max((a[(i, j)] - a[(j, i)].conj()).norm());
            }
        }
        if asym > HERMITIAN_TOLERANCE * scale {
            return Err(LinalgError::NotHermitian(asym));
        }

        let mut l = ComplexMatrix::zeros(n, n);
        for j in 0..n {
            let mut d = a[(j, j)].re;
            for k in 0..j {
                d -= l[(j, k)].norm_sqr();
            }
            if !(d > 0.0) {
                return Err(LinalgError::NotPositiveDefinite { pivot: j, value: d });
            }
            let ljj = d.sqrt();
            l[(j, j)] = Complex64::new(ljj, 0.0);
            for i in (j + 1)..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)].conj();
                }
                l[(i, j)] = s / ljj;
            }
        }
        Ok(Self { l })
    }

    pub fn dim(&self) -> usize {
        self.l.rows()
    }

    pub fn solve(&self, b: &[Complex64]) -> Result<Vec<Complex64>, LinalgError> {
        let n = self.dim();
        if b.len() != n {
            return Err(LinalgError::DimensionMismatch(format!(
                "rhs length {} for {n}x{n} system",
                b.len()
            )));
        }
        // forward: L z = b
        let mut z = vec![Complex64::new(0.0, 0.0); n];
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s -= self.l[(i, k)] * z[k];
            }
            z[i] = s / self.l[(i, i)].re;
        }
        // backward: L^H x = z
        let mut x = vec![Complex64::new(0.0, 0.0); n];
        for i in (0..n).rev() {
            let mut s = z[i];
            for k in (i + 1)..n {
                s -= self.l[(k, i)].conj() * x[k];
            }
            x[i] = s / self.l[(i, i)].re;
        }
        Ok(x)
    }

    /// Full inverse, column by column.
    pub fn inverse(&self) -> ComplexMatrix {
        let n = self.dim();
        let mut inv = ComplexMatrix::zeros(n, n);
        let mut e = vec![Complex64::new(0.0, 0.0); n];
        for j in 0..n {
            e.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
            e[j] = Complex64::new(1.0, 0.0);
            let col = self.solve(&e).expect("dimension checked");
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        inv
    }
}

/// Solves `a x = b` for Hermitian positive-definite `a`.
pub fn solve_hpd(a: &ComplexMatrix, b: &[Complex64]) -> Result<Vec<Complex64>, LinalgError> {
    Cholesky::new(a)?.solve(b)
}

pub fn vec_norm(x: &[Complex64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
        ComplexMatrix::from_fn(rows, cols, |_, _| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            c(re, im)
        })
    }

    fn max_abs_diff(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
        a.as_slice()
            .iter()
            .zip(b.as_slice())
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max)
    }

    #[test]
    fn qr_of_identity_is_identity() {
        let (q, r) = qr_decompose(&ComplexMatrix::identity(3)).unwrap();
        assert!(max_abs_diff(&q, &ComplexMatrix::identity(3)) < 1e-15);
        assert!(max_abs_diff(&r, &ComplexMatrix::identity(3)) < 1e-15);
    }

    #[test]
    fn qr_extracts_phase_of_scalar() {
        let a = ComplexMatrix::from_rows(&[vec![c(0.0, 3.0)]]);
        let (q, r) = qr_decompose(&a).unwrap();
        assert!((q[(0, 0)] - c(0.0, 1.0)).norm() < 1e-15);
        assert!((r[(0, 0)] - c(3.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn qr_reconstructs_random_square_and_tall() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for &(m, n) in &[(4, 4), (5, 4), (8, 4), (3, 1), (6, 2)] {
            for _ in 0..50 {
                let a = random_matrix(m, n, &mut rng);
                let (q, r) = qr_decompose(&a).unwrap();
                let qhq = q.adjoint().matmul(&q).unwrap();
                assert!(max_abs_diff(&qhq, &ComplexMatrix::identity(n)) < 1e-10);
                let rec = q.matmul(&r).unwrap();
                assert!(rec.sub(&a).frobenius_norm() / a.frobenius_norm() < 1e-10);
                for i in 0..n {
                    assert!(r[(i, i)].im == 0.0 && r[(i, i)].re > 0.0);
                    for j in 0..i {
                        assert_eq!(r[(i, j)], c(0.0, 0.0));
                    }
                }
            }
        }
    }

    #[test]
    fn qr_rejects_rank_deficient() {
        let a = ComplexMatrix::from_rows(&[
            vec![c(1.0, 0.0), c(2.0, 0.0)],
            vec![c(0.0, 1.0), c(0.0, 2.0)],
        ]);
        assert!(matches!(
            qr_decompose(&a),
            Err(LinalgError::RankDeficient { .. })
        ));
        let zero_col = ComplexMatrix::from_rows(&vec![vec![c(1.0, 0.0), c(0.0, 0.0)]; 3]);
        assert!(matches!(
            qr_decompose(&zero_col),
            Err(LinalgError::RankDeficient { .. })
        ));
    }

    #[test]
    fn qr_rejects_wide() {
        assert!(matches!(
            qr_decompose(&ComplexMatrix::zeros(1, 4)),
            Err(LinalgError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn solve_identity_and_diagonal() {
        let x = solve_hpd(&ComplexMatrix::identity(2), &[c(1.0, 0.0), c(0.0, 2.0)]).unwrap();
        assert_eq!(x, vec![c(1.0, 0.0), c(0.0, 2.0)]);
        let a = ComplexMatrix::diag(&[c(2.0, 0.0), c(4.0, 0.0)]);
        let x = solve_hpd(&a, &[c(2.0, 0.0), c(4.0, 0.0)]).unwrap();
        assert!((x[0] - c(1.0, 0.0)).norm() < 1e-15);
        assert!((x[1] - c(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn solve_random_hpd_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let m = random_matrix(4, 4, &mut rng);
            let mut a = m.matmul(&m.adjoint()).unwrap();
            for i in 0..4 {
                a[(i, i)] += 1.0;
            }
            let b = random_matrix(4, 1, &mut rng).column(0);
            let x = solve_hpd(&a, &b).unwrap();
            let ax = a.mul_vec(&x).unwrap();
            let resid: Vec<Complex64> = ax.iter().zip(&b).map(|(p, q)| p - q).collect();
            assert!(vec_norm(&resid) <= 1e-9 * vec_norm(&b));
        }
    }

    #[test]
    fn solve_rejects_indefinite_and_non_hermitian() {
        let a = ComplexMatrix::diag(&[c(1.0, 0.0), c(-1.0, 0.0)]);
        assert!(matches!(
            solve_hpd(&a, &[c(1.0, 0.0), c(1.0, 0.0)]),
            Err(LinalgError::NotPositiveDefinite { pivot: 1, .. })
        ));
        let b = ComplexMatrix::from_rows(&[
            vec![c(2.0, 0.0), c(1.0, 0.0)],
            vec![c(0.0, 0.0), c(2.0, 0.0)],
        ]);
        assert!(matches!(
            solve_hpd(&b, &[c(1.0, 0.0), c(1.0, 0.0)]),
            Err(LinalgError::NotHermitian(_))
        ));
    }

    #[test]
    fn inverse_times_matrix_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = random_matrix(3, 3, &mut rng);
        let mut a = m.gram();
        for i in 0..3 {
            a[(i, i)] += 0.5;
        }
        let inv = Cholesky::new(&a).unwrap().inverse();
        let p = a.matmul(&inv).unwrap();
        assert!(max_abs_diff(&p, &ComplexMatrix::identity(3)) < 1e-10);
    }
}
