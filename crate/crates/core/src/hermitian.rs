//! Dense complex and Hermitian matrix algebra.
//!
//! Matrices in this crate are small (transmit side `m <= 8`, receive side
//! `N <= 128`), so everything is stored densely in row-major order and the
//! Hermitian eigenproblem is solved with a cyclic complex Jacobi sweep. The
//! Jacobi method is deterministic for identical input bits and handles
//! degenerate spectra without special casing.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type Complex = Complex64;

const ZERO: Complex = Complex::new(0.0, 0.0);
const ONE: Complex = Complex::new(1.0, 0.0);

const MAX_SWEEPS: usize = 64;

/// General dense complex matrix, row-major.
#[derive(Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = ONE;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<Complex>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::dims(rows * cols, data.len()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: Complex) {
        self.data[i * self.cols + j] = value;
    }

    pub fn as_slice(&self) -> &[Complex] {
        &self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i).conj())
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn matmul(&self, rhs: &CMatrix) -> Result<CMatrix> {
        if self.cols != rhs.rows {
            return Err(Error::dims(
                format!("{} inner rows", self.cols),
                format!("{}", rhs.rows),
            ));
        }
        let mut out = CMatrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == ZERO {
                    continue;
                }
                let row = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
                for (o, b) in out_row.iter_mut().zip(row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self^H * rhs` without materialising the adjoint.
    pub fn adjoint_matmul(&self, rhs: &CMatrix) -> Result<CMatrix> {
        if self.rows != rhs.rows {
            return Err(Error::dims(
                format!("{} rows", self.rows),
                format!("{}", rhs.rows),
            ));
        }
        let mut out = CMatrix::zeros(self.cols, rhs.cols);
        for k in 0..self.rows {
            for i in 0..self.cols {
                let a = self.data[k * self.cols + i].conj();
                let row = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
                for (o, b) in out_row.iter_mut().zip(row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }
}

impl fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                let z = self.get(i, j);
                write!(f, "{:+.6}{:+.6}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

/// Square complex matrix equal to its own conjugate transpose.
///
/// Construction symmetrizes the input as `(A + A^H) / 2` and forces the
/// diagonal to be real, so the Hermitian property holds bit-for-bit.
#[derive(Clone, PartialEq)]
pub struct HermitianMatrix {
    inner: CMatrix,
}

impl fmt::Debug for HermitianMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Hermitian{:?}", self.inner)
    }
}

impl HermitianMatrix {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        if matrix.rows != matrix.cols {
            return Err(Error::dims(
                format!("square matrix, {} rows", matrix.rows),
                format!("{} columns", matrix.cols),
            ));
        }
        if matrix.rows == 0 {
            return Err(Error::InvalidInput("matrix dimension must be positive".into()));
        }
        if !matrix.is_finite() {
            return Err(Error::InvalidInput("matrix has non-finite entries".into()));
        }
        Ok(Self::symmetrized(matrix))
    }

    fn symmetrized(mut m: CMatrix) -> Self {
        let n = m.rows;
        for i in 0..n {
            let d = m.data[i * n + i].re;
            m.data[i * n + i] = Complex::new(d, 0.0);
            for j in (i + 1)..n {
                let avg = (m.data[i * n + j] + m.data[j * n + i].conj()) * 0.5;
                m.data[i * n + j] = avg;
                m.data[j * n + i] = avg.conj();
            }
        }
        Self { inner: m }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            inner: CMatrix::zeros(n, n),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            inner: CMatrix::identity(n),
        }
    }

    pub fn scaled_identity(n: usize, s: f64) -> Self {
        Self::from_real_diagonal(&vec![s; n])
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = CMatrix::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m.data[i * n + i] = Complex::new(d, 0.0);
        }
        Self { inner: m }
    }

    /// Builds `U diag(values) U^H`.
    pub fn from_spectrum(values: &[f64], vectors: &CMatrix) -> Self {
        let n = values.len();
        debug_assert_eq!(vectors.rows, n);
        debug_assert_eq!(vectors.cols, n);
        let mut m = CMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let mut acc = ZERO;
                for (k, &lam) in values.iter().enumerate() {
                    acc += vectors.get(i, k) * vectors.get(j, k).conj() * lam;
                }
                m.data[i * n + j] = acc;
            }
        }
        Self::symmetrized_upper(m)
    }

    // Mirrors the upper triangle into the lower one.
    fn symmetrized_upper(mut m: CMatrix) -> Self {
        let n = m.rows;
        for i in 0..n {
            m.data[i * n + i] = Complex::new(m.data[i * n + i].re, 0.0);
            for j in (i + 1)..n {
                m.data[j * n + i] = m.data[i * n + j].conj();
            }
        }
        Self { inner: m }
    }

    pub fn dim(&self) -> usize {
        self.inner.rows
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex {
        self.inner.get(i, j)
    }

    pub fn as_matrix(&self) -> &CMatrix {
        &self.inner
    }

    pub fn into_matrix(self) -> CMatrix {
        self.inner
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.get(i, i).re).sum()
    }

    /// Real inner product `tr(A B)`.
    pub fn inner_product(&self, other: &HermitianMatrix) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.inner
            .data
            .iter()
            .zip(&other.inner.data)
            .map(|(a, b)| a.re * b.re + a.im * b.im)
            .sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.inner.frobenius_norm()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            inner: self.inner.scaled(s),
        }
    }

    /// `self += s * other`.
    pub fn add_scaled(&mut self, s: f64, other: &HermitianMatrix) {
        debug_assert_eq!(self.dim(), other.dim());
        for (a, b) in self.inner.data.iter_mut().zip(&other.inner.data) {
            *a += b * s;
        }
    }

    pub fn shifted(&self, s: f64) -> Self {
        let mut out = self.clone();
        let n = self.dim();
        for i in 0..n {
            out.inner.data[i * n + i].re += s;
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.inner.is_finite()
    }

    /// `H A H^H` for a (rows x dim) matrix `H`.
    pub fn congruence(&self, h: &CMatrix) -> Result<HermitianMatrix> {
        if h.cols != self.dim() {
            return Err(Error::dims(
                format!("{} columns", self.dim()),
                format!("{}", h.cols),
            ));
        }
        let ha = h.matmul(&self.inner)?;
        Ok(Self::symmetrized_upper(gram_upper(&ha, h)))
    }

    /// `H^H A H` for a (dim x cols) matrix `H`.
    pub fn adjoint_congruence(&self, h: &CMatrix) -> Result<HermitianMatrix> {
        if h.rows != self.dim() {
            return Err(Error::dims(
                format!("{} rows", self.dim()),
                format!("{}", h.rows),
            ));
        }
        let ah = self.inner.matmul(h)?;
        let out = h.adjoint_matmul(&ah)?;
        Ok(Self::symmetrized(out))
    }

    pub fn eig(&self) -> Result<EigenDecomposition> {
        eig_hermitian(self)
    }

    /// Applies a real scalar function to the spectrum: `U f(diag) U^H`.
    pub fn spectral_map(&self, f: impl Fn(f64) -> f64) -> Result<HermitianMatrix> {
        let eig = self.eig()?;
        let values: Vec<f64> = eig.eigenvalues.iter().map(|&l| f(l)).collect();
        Ok(HermitianMatrix::from_spectrum(&values, &eig.vectors))
    }

    /// Largest absolute row sum.
    pub fn inf_norm(&self) -> f64 {
        let n = self.dim();
        (0..n)
            .map(|i| (0..n).map(|j| self.get(i, j).norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

// Upper triangle of `A B^H`.
fn gram_upper(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let n = a.rows;
    let k = a.cols;
    let mut out = CMatrix::zeros(n, n);
    for i in 0..n {
        let ar = &a.data[i * k..(i + 1) * k];
        for j in i..n {
            let br = &b.data[j * k..(j + 1) * k];
            let mut acc = ZERO;
            for (x, y) in ar.iter().zip(br) {
                acc += x * y.conj();
            }
            out.data[i * n + j] = acc;
        }
    }
    out
}

impl Add for &HermitianMatrix {
    type Output = HermitianMatrix;
    fn add(self, rhs: &HermitianMatrix) -> HermitianMatrix {
        let mut out = self.clone();
        out.add_scaled(1.0, rhs);
        out
    }
}

impl Sub for &HermitianMatrix {
    type Output = HermitianMatrix;
    fn sub(self, rhs: &HermitianMatrix) -> HermitianMatrix {
        let mut out = self.clone();
        out.add_scaled(-1.0, rhs);
        out
    }
}

impl Mul<f64> for &HermitianMatrix {
    type Output = HermitianMatrix;
    fn mul(self, rhs: f64) -> HermitianMatrix {
        self.scaled(rhs)
    }
}

/// Spectral decomposition `A = U diag(eigenvalues) U^H`, eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<f64>,
    /// Unitary matrix whose columns are the eigenvectors.
    pub vectors: CMatrix,
}

impl EigenDecomposition {
    pub fn reconstruct(&self) -> HermitianMatrix {
        HermitianMatrix::from_spectrum(&self.eigenvalues, &self.vectors)
    }

    pub fn min(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn max(&self) -> f64 {
        *self.eigenvalues.last().expect("non-empty spectrum")
    }
}

/// Cyclic Jacobi eigendecomposition of a Hermitian matrix.
pub fn eig_hermitian(a: &HermitianMatrix) -> Result<EigenDecomposition> {
    if !a.is_finite() {
        return Err(Error::InvalidInput("matrix has non-finite entries".into()));
    }
    let n = a.dim();
    let mut w = a.inner.data.clone();
    let mut v = CMatrix::identity(n).data;

    let scale = a.frobenius_norm();
    let target = (f64::EPSILON * scale).powi(2) * 0.25;

    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += w[p * n + q].norm_sqr();
            }
        }
        if off <= target || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let g = w[p * n + q];
                let r = g.norm();
                if r == 0.0 {
                    continue;
                }
                let app = w[p * n + p].re;
                let aqq = w[q * n + q].re;
                // Skip rotations that cannot change the diagonal in floating point.
                if r < f64::EPSILON * 1e-3 * (app.abs() + aqq.abs()) {
                    w[p * n + q] = ZERO;
                    w[q * n + p] = ZERO;
                    continue;
                }
                let phase = (g / r).conj();
                let tau = (aqq - app) / (2.0 * r);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // U = diag(1, phase) * [[c, s], [-s, c]]
                let u_pp = Complex::new(c, 0.0);
                let u_pq = Complex::new(s, 0.0);
                let u_qp = phase * (-s);
                let u_qq = phase * c;

                for k in 0..n {
                    let akp = w[k * n + p];
                    let akq = w[k * n + q];
                    w[k * n + p] = akp * u_pp + akq * u_qp;
                    w[k * n + q] = akp * u_pq + akq * u_qq;
                }
                for k in 0..n {
                    let apk = w[p * n + k];
                    let aqk = w[q * n + k];
                    w[p * n + k] = u_pp.conj() * apk + u_qp.conj() * aqk;
                    w[q * n + k] = u_pq.conj() * apk + u_qq.conj() * aqk;
                }
                w[p * n + q] = ZERO;
                w[q * n + p] = ZERO;
                w[p * n + p] = Complex::new(app - t * r, 0.0);
                w[q * n + q] = Complex::new(aqq + t * r, 0.0);

                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = vkp * u_pp + vkq * u_qp;
                    v[k * n + q] = vkp * u_pq + vkq * u_qq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| w[i * n + i].re.total_cmp(&w[j * n + j].re).then(i.cmp(&j)));
    let eigenvalues = order.iter().map(|&i| w[i * n + i].re).collect();
    let vectors = CMatrix::from_fn(n, n, |row, col| v[row * n + order[col]]);
    Ok(EigenDecomposition {
        eigenvalues,
        vectors,
    })
}

/// `exp(Y)` through the spectral decomposition.
pub fn expm_hermitian(y: &HermitianMatrix) -> Result<HermitianMatrix> {
    y.spectral_map(f64::exp)
}

/// Natural log-determinant of a positive definite matrix.
///
/// Uses a complex Cholesky factorisation; a pivot at or below
/// `1e-14 * ||A||_inf` is reported as [`Error::NotPositiveDefinite`].
pub fn logdet_psd(a: &HermitianMatrix) -> Result<f64> {
    if !a.is_finite() {
        return Err(Error::InvalidInput("matrix has non-finite entries".into()));
    }
    let n = a.dim();
    let threshold = 1e-14 * a.inf_norm();
    let mut l = vec![ZERO; n * n];
    let mut logdet = 0.0;
    for j in 0..n {
        let mut d = a.get(j, j).re;
        for k in 0..j {
            d -= l[j * n + k].norm_sqr();
        }
        if !(d > threshold) {
            return Err(Error::NotPositiveDefinite {
                pivot: d,
                threshold,
            });
        }
        logdet += d.ln();
        let ljj = d.sqrt();
        l[j * n + j] = Complex::new(ljj, 0.0);
        for i in (j + 1)..n {
            let mut s = a.get(i, j);
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k].conj();
            }
            l[i * n + j] = s / ljj;
        }
    }
    Ok(logdet)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormKind {
    Nuclear,
    Frobenius,
    Spectral,
}

pub fn norm(a: &HermitianMatrix, kind: NormKind) -> f64 {
    match kind {
        NormKind::Frobenius => a.frobenius_norm(),
        NormKind::Nuclear | NormKind::Spectral => {
            let eig = match a.eig() {
                Ok(e) => e,
                Err(_) => return f64::NAN,
            };
            let abs = eig.eigenvalues.iter().map(|l| l.abs());
            if kind == NormKind::Nuclear {
                abs.sum()
            } else {
                abs.fold(0.0, f64::max)
            }
        }
    }
}

/// Orthogonal projection onto the traceless subspace: `X - (tr X / m) I`.
pub fn tangent_project(x: &HermitianMatrix) -> HermitianMatrix {
    let m = x.dim() as f64;
    x.shifted(-x.trace() / m)
}
