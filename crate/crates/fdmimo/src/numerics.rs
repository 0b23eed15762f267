//! Dense complex-matrix kernels: Kronecker products, exchange matrices,
//! column-major vectorization, and the SVD/eigen/pseudoinverse decompositions
//! the estimation and precoding pipelines are built on.
//!
//! Factorizations are delegated to [`faer`]; everything else is implemented
//! directly on the column-major [`ComplexMatrix`] storage.

use faer::c64;
use faer::prelude::Solve;
use num_complex::Complex64;
use thiserror::Error;

/// Singular values below `RANK_TOLERANCE * s_max` are treated as zero rank.
/// This drives pseudoinverse truncation and signal/noise subspace splits.
pub const RANK_TOLERANCE: f64 = 1e-12;

/// Eigenvalues of a nominally PSD matrix may dip this far below zero before
/// `psd_sqrt` refuses to clamp them.
pub const PSD_CLAMP_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum NumericsError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix decomposition did not converge: {0}")]
    NonConvergence(&'static str),
    #[error("domain error: {0}")]
    Domain(String),
}

/// Dense complex matrix in column-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        Self { rows, cols, data: vec![Complex64::ZERO; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::ONE;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for c in 0..cols {
            for r in 0..rows {
                m[(r, c)] = f(r, c);
            }
        }
        m
    }

    /// Builds a matrix from row slices; rows must be equal length.
    pub fn from_rows(rows: &[Vec<Complex64>]) -> Self {
        let nr = rows.len();
        let nc = rows[0].len();
        Self::from_fn(nr, nc, |r, c| rows[r][c])
    }

    pub fn column_vector(entries: &[Complex64]) -> Self {
        Self::from_fn(entries.len(), 1, |r, _| entries[r])
    }

    pub fn diagonal(entries: &[Complex64]) -> Self {
        let mut m = Self::zeros(entries.len(), entries.len());
        for (i, &e) in entries.iter().enumerate() {
            m[(i, i)] = e;
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

    pub fn column(&self, c: usize) -> &[Complex64] {
        &self.data[c * self.rows..(c + 1) * self.rows]
    }

    pub fn column_owned(&self, c: usize) -> Vec<Complex64> {
        self.column(c).to_vec()
    }

    /// Copies columns `lo..hi` into a new matrix.
    pub fn columns(&self, lo: usize, hi: usize) -> Self {
        assert!(lo < hi && hi <= self.cols);
        let mut m = Self::zeros(self.rows, hi - lo);
        m.data.copy_from_slice(&self.data[lo * self.rows..hi * self.rows]);
        m
    }

    /// Copies the listed rows into a new matrix, in order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self::from_fn(rows.len(), self.cols, |r, c| self[(rows[r], c)])
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)])
    }

    pub fn conj(&self) -> Self {
        let mut m = self.clone();
        for z in &mut m.data {
            *z = z.conj();
        }
        m
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let mut m = self.clone();
        for z in &mut m.data {
            *z *= s;
        }
        m
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Column-major stacking of the entries into an `(rows*cols) x 1` matrix.
    pub fn vectorize(&self) -> Self {
        Self { rows: self.rows * self.cols, cols: 1, data: self.data.clone() }
    }

    pub(crate) fn to_faer(&self) -> faer::Mat<c64> {
        faer::Mat::from_fn(self.rows, self.cols, |r, c| {
            let z = self[(r, c)];
            c64::new(z.re, z.im)
        })
    }

    pub(crate) fn from_faer(m: faer::MatRef<'_, c64>) -> Self {
        Self::from_fn(m.nrows(), m.ncols(), |r, c| {
            let z = m[(r, c)];
            Complex64::new(z.re, z.im)
        })
    }
}

impl std::ops::Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;
    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &Complex64 {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[c * self.rows + r]
    }
}

impl std::ops::IndexMut<(usize, usize)> for ComplexMatrix {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Complex64 {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[c * self.rows + r]
    }
}

impl std::ops::Mul for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(
            self.cols, rhs.rows,
            "matmul dimension mismatch: {}x{} * {}x{}",
            self.rows, self.cols, rhs.rows, rhs.cols
        );
        let mut out = ComplexMatrix::zeros(self.rows, rhs.cols);
        // column-major axpy ordering
        for j in 0..rhs.cols {
            for k in 0..self.cols {
                let b = rhs[(k, j)];
                if b == Complex64::ZERO {
                    continue;
                }
                let a_col = &self.data[k * self.rows..(k + 1) * self.rows];
                let out_col = &mut out.data[j * self.rows..(j + 1) * self.rows];
                for (o, &a) in out_col.iter_mut().zip(a_col) {
                    *o += a * b;
                }
            }
        }
        out
    }
}

impl std::ops::Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "add dimension mismatch");
        let mut out = self.clone();
        for (o, r) in out.data.iter_mut().zip(&rhs.data) {
            *o += r;
        }
        out
    }
}

impl std::ops::Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "sub dimension mismatch");
        let mut out = self.clone();
        for (o, r) in out.data.iter_mut().zip(&rhs.data) {
            *o -= r;
        }
        out
    }
}

/// Kronecker product: block (i, j) of the result is `a[i,j] * b`.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let mut out = ComplexMatrix::zeros(a.rows * b.rows, a.cols * b.cols);
    for ac in 0..a.cols {
        for ar in 0..a.rows {
            let s = a[(ar, ac)];
            if s == Complex64::ZERO {
                continue;
            }
            for bc in 0..b.cols {
                for br in 0..b.rows {
                    out[(ar * b.rows + br, ac * b.cols + bc)] = s * b[(br, bc)];
                }
            }
        }
    }
    out
}

/// `p x p` exchange matrix: ones on the antidiagonal, zeros elsewhere.
pub fn exchange_matrix(p: usize) -> ComplexMatrix {
    assert!(p >= 1);
    let mut m = ComplexMatrix::zeros(p, p);
    for i in 0..p {
        m[(i, p - 1 - i)] = Complex64::ONE;
    }
    m
}

/// Full singular value decomposition `a = u * diag(s) * v^H`.
///
/// `u` is `m x m`, `v` is `n x n`, and `singular_values` holds
/// `min(m, n)` nonnegative values in descending order.
#[derive(Debug, Clone)]
pub struct SvdDecomposition {
    pub u: ComplexMatrix,
    pub singular_values: Vec<f64>,
    pub v: ComplexMatrix,
}

impl SvdDecomposition {
    /// Number of singular values above `RANK_TOLERANCE * s_max`.
    pub fn rank(&self) -> usize {
        let smax = self.singular_values.first().copied().unwrap_or(0.0);
        self.singular_values.iter().filter(|&&s| s > RANK_TOLERANCE * smax).count()
    }
}

pub fn svd(a: &ComplexMatrix) -> Result<SvdDecomposition, NumericsError> {
    let f = a.to_faer();
    let dec = f.svd().map_err(|_| NumericsError::NonConvergence("svd"))?;
    let k = a.rows().min(a.cols());
    let singular_values: Vec<f64> = (0..k).map(|i| dec.S()[i].re).collect();
    Ok(SvdDecomposition {
        u: ComplexMatrix::from_faer(dec.U()),
        singular_values,
        v: ComplexMatrix::from_faer(dec.V()),
    })
}

/// Eigendecomposition of a square complex matrix: `a * vectors = vectors * diag(values)`.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub values: Vec<Complex64>,
    pub vectors: ComplexMatrix,
}

pub fn eig(a: &ComplexMatrix) -> Result<EigenDecomposition, NumericsError> {
    if a.rows() != a.cols() {
        return Err(NumericsError::DimensionMismatch(format!(
            "eig requires a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    let f = a.to_faer();
    let dec = f.eigen().map_err(|_| NumericsError::NonConvergence("eigendecomposition"))?;
    let n = a.rows();
    let s = dec.S();
    let values = (0..n)
        .map(|i| {
            let z = s[i];
            Complex64::new(z.re, z.im)
        })
        .collect();
    Ok(EigenDecomposition { values, vectors: ComplexMatrix::from_faer(dec.U()) })
}

/// Eigenvalues of a Hermitian matrix, ascending. Input is trusted to be Hermitian;
/// only the lower triangle is read.
pub fn hermitian_eigenvalues(a: &ComplexMatrix) -> Result<Vec<f64>, NumericsError> {
    if a.rows() != a.cols() {
        return Err(NumericsError::DimensionMismatch(format!(
            "hermitian eigenvalues require a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    let f = a.to_faer();
    let dec = f
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|_| NumericsError::NonConvergence("self-adjoint eigendecomposition"))?;
    Ok((0..a.rows()).map(|i| dec.S()[i].re).collect())
}

/// Moore-Penrose pseudoinverse with singular values below
/// `RANK_TOLERANCE * s_max` truncated to zero rank.
pub fn pinv(a: &ComplexMatrix) -> Result<ComplexMatrix, NumericsError> {
    let dec = svd(a)?;
    let smax = dec.singular_values.first().copied().unwrap_or(0.0);
    let mut out = ComplexMatrix::zeros(a.cols(), a.rows());
    for (i, &s) in dec.singular_values.iter().enumerate() {
        if s <= RANK_TOLERANCE * smax || s == 0.0 {
            continue;
        }
        let inv = Complex64::new(1.0 / s, 0.0);
        // out += (1/s) v_i u_i^H
        for c in 0..a.rows() {
            let uc = dec.u[(c, i)].conj() * inv;
            for r in 0..a.cols() {
                out[(r, c)] += dec.v[(r, i)] * uc;
            }
        }
    }
    Ok(out)
}

/// Hermitian square root of a Hermitian PSD matrix.
///
/// Eigenvalues in `[-PSD_CLAMP_TOLERANCE, 0)` are clamped to zero; anything
/// further below zero is a domain error.
pub fn psd_sqrt(k: &ComplexMatrix) -> Result<ComplexMatrix, NumericsError> {
    if k.rows() != k.cols() {
        return Err(NumericsError::DimensionMismatch(format!(
            "psd_sqrt requires a square matrix, got {}x{}",
            k.rows(),
            k.cols()
        )));
    }
    let f = k.to_faer();
    let dec = f
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|_| NumericsError::NonConvergence("self-adjoint eigendecomposition"))?;
    let n = k.rows();
    let vecs = ComplexMatrix::from_faer(dec.U());
    let mut out = ComplexMatrix::zeros(n, n);
    for i in 0..n {
        let lambda = dec.S()[i].re;
        if lambda < -PSD_CLAMP_TOLERANCE {
            return Err(NumericsError::Domain(format!(
                "psd_sqrt: eigenvalue {lambda:.3e} below -{PSD_CLAMP_TOLERANCE:.0e}"
            )));
        }
        let s = lambda.max(0.0).sqrt();
        if s == 0.0 {
            continue;
        }
        // out += s q_i q_i^H
        for c in 0..n {
            let qc = vecs[(c, i)].conj() * s;
            for r in 0..n {
                out[(r, c)] += vecs[(r, i)] * qc;
            }
        }
    }
    Ok(out)
}

/// Solves `a * x = b` for square `a` by partial-pivot LU.
pub fn solve(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix, NumericsError> {
    if a.rows() != a.cols() || a.rows() != b.rows() {
        return Err(NumericsError::DimensionMismatch(format!(
            "solve: {}x{} with rhs {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    let lu = a.to_faer().partial_piv_lu();
    let x = lu.solve(b.to_faer());
    let out = ComplexMatrix::from_faer(x.as_ref());
    if !out.is_finite() {
        return Err(NumericsError::NonConvergence("lu solve produced non-finite values"));
    }
    Ok(out)
}

pub fn inverse(a: &ComplexMatrix) -> Result<ComplexMatrix, NumericsError> {
    solve(a, &ComplexMatrix::identity(a.rows()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> ComplexMatrix {
        ComplexMatrix::from_fn(rows, cols, |_, _| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        })
    }

    fn assert_close(a: &ComplexMatrix, b: &ComplexMatrix, tol: f64) {
        let diff = (a - b).frobenius_norm();
        let scale = b.frobenius_norm().max(1.0);
        assert!(diff <= tol * scale, "matrices differ: |a-b| = {diff:.3e}, scale = {scale:.3e}");
    }

    #[test]
    fn kron_identity_scalar() {
        let one = ComplexMatrix::from_fn(1, 1, |_, _| Complex64::ONE);
        let b = random_matrix(&mut ChaCha8Rng::seed_from_u64(1), 3, 2);
        assert_close(&kron(&one, &b), &b, 0.0);
    }

    #[test]
    fn kron_basis_vector() {
        let e0 = ComplexMatrix::from_rows(&[vec![Complex64::ONE], vec![Complex64::ZERO]]);
        let ones = ComplexMatrix::from_rows(&[vec![Complex64::ONE], vec![Complex64::ONE]]);
        let k = kron(&e0, &ones);
        let expect = ComplexMatrix::from_rows(&[
            vec![Complex64::ONE],
            vec![Complex64::ONE],
            vec![Complex64::ZERO],
            vec![Complex64::ZERO],
        ]);
        assert_close(&k, &expect, 0.0);
    }

    #[test]
    fn exchange_matrix_small_and_involutory() {
        let p1 = exchange_matrix(1);
        assert_eq!(p1[(0, 0)], Complex64::ONE);
        let p2 = exchange_matrix(2);
        assert_eq!(p2[(0, 1)], Complex64::ONE);
        assert_eq!(p2[(1, 0)], Complex64::ONE);
        assert_eq!(p2[(0, 0)], Complex64::ZERO);
        let p3 = exchange_matrix(3);
        assert_close(&(&p3 * &p3), &ComplexMatrix::identity(3), 0.0);
    }

    #[test]
    fn vectorize_column_major() {
        let a = ComplexMatrix::from_rows(&[
            vec![Complex64::new(1.0, 0.0), Complex64::new(2.0, 0.0)],
            vec![Complex64::new(3.0, 0.0), Complex64::new(4.0, 0.0)],
        ]);
        let v = a.vectorize();
        let got: Vec<f64> = v.as_slice().iter().map(|z| z.re).collect();
        assert_eq!(got, vec![1.0, 3.0, 2.0, 4.0]);

        let col = ComplexMatrix::column_vector(&[Complex64::ONE, Complex64::new(0.5, 0.5)]);
        assert_close(&col.vectorize(), &col, 0.0);
    }

    #[test]
    fn vec_kron_identity() {
        // kron(B^T, A) vec(X) = vec(A X B)
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..8 {
            let a = random_matrix(&mut rng, 2, 2);
            let x = random_matrix(&mut rng, 2, 2);
            let b = random_matrix(&mut rng, 2, 2);
            let lhs = &kron(&b.transpose(), &a) * &x.vectorize();
            let rhs = (&(&a * &x) * &b).vectorize();
            assert_close(&lhs, &rhs, 1e-12);
        }
    }

    #[test]
    fn svd_identity_and_reconstruction() {
        let dec = svd(&ComplexMatrix::identity(3)).unwrap();
        for s in &dec.singular_values {
            assert!((s - 1.0).abs() < 1e-12);
        }

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_matrix(&mut rng, 64, 40);
        let dec = svd(&a).unwrap();
        let s = ComplexMatrix::from_fn(64, 40, |r, c| {
            if r == c {
                Complex64::new(dec.singular_values[r], 0.0)
            } else {
                Complex64::ZERO
            }
        });
        let recon = &(&dec.u * &s) * &dec.v.adjoint();
        assert!((&recon - &a).frobenius_norm() <= 1e-10 * a.frobenius_norm());
    }

    #[test]
    fn pinv_scalar_and_penrose() {
        let two = ComplexMatrix::from_fn(1, 1, |_, _| Complex64::new(2.0, 0.0));
        let p = pinv(&two).unwrap();
        assert!((p[(0, 0)].re - 0.5).abs() < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = random_matrix(&mut rng, 5, 3);
        let p = pinv(&a).unwrap();
        let apa = &(&a * &p) * &a;
        let pap = &(&p * &a) * &p;
        assert_close(&apa, &a, 1e-9);
        assert_close(&pap, &p, 1e-9);
        let ap = &a * &p;
        let pa = &p * &a;
        assert_close(&ap.adjoint(), &ap, 1e-9);
        assert_close(&pa.adjoint(), &pa, 1e-9);
    }

    #[test]
    fn psd_sqrt_diagonal() {
        let k = ComplexMatrix::diagonal(&[Complex64::new(4.0, 0.0), Complex64::new(9.0, 0.0)]);
        let s = psd_sqrt(&k).unwrap();
        assert!((s[(0, 0)].re - 2.0).abs() < 1e-12);
        assert!((s[(1, 1)].re - 3.0).abs() < 1e-12);
    }

    #[test]
    fn psd_sqrt_rejects_indefinite() {
        let k = ComplexMatrix::diagonal(&[Complex64::new(1.0, 0.0), Complex64::new(-0.5, 0.0)]);
        assert!(matches!(psd_sqrt(&k), Err(NumericsError::Domain(_))));
    }

    #[test]
    fn eig_diagonal() {
        let d = ComplexMatrix::diagonal(&[Complex64::new(2.0, 1.0), Complex64::new(-1.0, 0.5)]);
        let dec = eig(&d).unwrap();
        let mut vals = dec.values.clone();
        vals.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap());
        assert!((vals[0] - Complex64::new(-1.0, 0.5)).norm() < 1e-12);
        assert!((vals[1] - Complex64::new(2.0, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn solve_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_matrix(&mut rng, 6, 6);
        let x = random_matrix(&mut rng, 6, 2);
        let b = &a * &x;
        let got = solve(&a, &b).unwrap();
        assert_close(&got, &x, 1e-10);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn prop_svd_reconstructs(seed in 0u64..1000, rows in 1usize..16, cols in 1usize..16) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_matrix(&mut rng, rows, cols);
            let dec = svd(&a).unwrap();
            let s = ComplexMatrix::from_fn(rows, cols, |r, c| {
                if r == c { Complex64::new(dec.singular_values[r], 0.0) } else { Complex64::ZERO }
            });
            let recon = &(&dec.u * &s) * &dec.v.adjoint();
            let err = (&recon - &a).frobenius_norm();
            prop_assert!(err <= 1e-10 * a.frobenius_norm().max(1e-30));
            // descending nonnegative
            for w in dec.singular_values.windows(2) {
                prop_assert!(w[0] >= w[1] - 1e-14);
            }
            prop_assert!(dec.singular_values.iter().all(|&s| s >= 0.0));
        }

        #[test]
        fn prop_eig_reconstructs(seed in 0u64..1000, n in 1usize..9) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_matrix(&mut rng, n, n);
            let dec = eig(&a).unwrap();
            let av = &a * &dec.vectors;
            let vd = &dec.vectors * &ComplexMatrix::diagonal(&dec.values);
            let err = (&av - &vd).frobenius_norm();
            prop_assert!(err <= 1e-9 * a.frobenius_norm().max(1e-30));
        }

        #[test]
        fn prop_kron_mixed_product(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_matrix(&mut rng, 3, 2);
            let b = random_matrix(&mut rng, 2, 4);
            let c = random_matrix(&mut rng, 2, 3);
            let d = random_matrix(&mut rng, 4, 2);
            // (A (x) B)(C (x) D) = (AC) (x) (BD)
            let lhs = &kron(&a, &b) * &kron(&c, &d);
            let rhs = kron(&(&a * &c), &(&b * &d));
            let err = (&lhs - &rhs).frobenius_norm();
            prop_assert!(err <= 1e-10 * rhs.frobenius_norm().max(1e-30));
            // associativity
            let assoc_l = kron(&kron(&a, &b), &c);
            let assoc_r = kron(&a, &kron(&b, &c));
            prop_assert!((&assoc_l - &assoc_r).frobenius_norm() <= 1e-10 * assoc_l.frobenius_norm().max(1e-30));
        }

        #[test]
        fn prop_psd_sqrt_squares_back(seed in 0u64..1000, n in 1usize..10) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = random_matrix(&mut rng, n, n);
            let k = &g * &g.adjoint();
            let s = psd_sqrt(&k).unwrap();
            let err = (&(&s * &s) - &k).frobenius_norm();
            prop_assert!(err <= 1e-9 * k.frobenius_norm().max(1e-30));
            // hermitian output
            prop_assert!((&s - &s.adjoint()).frobenius_norm() <= 1e-9 * s.frobenius_norm().max(1e-30));
        }
    }

    #[test]
    fn svd_reconstructs_at_64() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let a = random_matrix(&mut rng, 64, 64);
        let dec = svd(&a).unwrap();
        let s = ComplexMatrix::from_fn(64, 64, |r, c| {
            if r == c {
                Complex64::new(dec.singular_values[r], 0.0)
            } else {
                Complex64::ZERO
            }
        });
        let recon = &(&dec.u * &s) * &dec.v.adjoint();
        assert!((&recon - &a).frobenius_norm() <= 1e-10 * a.frobenius_norm());
    }
}
