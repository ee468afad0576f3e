//! Dense linear algebra: just enough for Laplacian work at desk scale.
//!
//! Everything is row-major `f64`. The symmetric eigensolver is cyclic Jacobi,
//! which is slower than tridiagonal QR but unconditionally stable and keeps
//! eigenvectors orthogonal to machine precision.

use std::fmt;
use std::ops::{Index, IndexMut};

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng;

pub const DEFAULT_POWER_TOL: f64 = 1e-10;
pub const DEFAULT_POWER_MAX_ITER: usize = 500;
pub const DEFAULT_PIVOT_TOL: f64 = 1e-10;
pub const DEFAULT_RANK_TOL: f64 = 1e-10;
pub const SYMMETRY_TOL: f64 = 1e-10;

const JACOBI_OFF_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;

#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            writeln!(f, "  {:?}", self.row(r))?;
        }
        write!(f, "]")
    }
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
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Matrix::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Builds a matrix from equally sized rows. Panics on ragged input; meant
    /// for literals in tests and examples.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.as_ref().len(), cols, "ragged rows");
            data.extend_from_slice(r.as_ref());
        }
        Matrix {
            rows: rows.len(),
            cols,
            data,
        }
    }

    pub fn column(v: &[f64]) -> Self {
        Matrix {
            rows: v.len(),
            cols: 1,
            data: v.to_vec(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn col(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t[(c, r)] = self[(r, c)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch(format!(
                "matmul {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            let out_row = &mut out.data[r * other.cols..(r + 1) * other.cols];
            for (k, &a) in self.row(r).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `selfᵀ · other` without materializing the transpose.
    pub fn t_matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows != other.rows {
            return Err(Error::DimensionMismatch(format!(
                "t_matmul {}x{}ᵀ by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.cols, other.cols);
        for k in 0..self.rows {
            let b_row = other.row(k);
            for (i, &a) in self.row(k).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in out.row_mut(i).iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self · otherᵀ`.
    pub fn matmul_t(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.cols {
            return Err(Error::DimensionMismatch(format!(
                "matmul_t {}x{} by {}x{}ᵀ",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.rows);
        for i in 0..self.rows {
            let a = self.row(i);
            for j in 0..other.rows {
                out[(i, j)] = dot(a, other.row(j));
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if self.cols != v.len() {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} matrix times vector of length {}",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        Ok((0..self.rows).map(|r| dot(self.row(r), v)).collect())
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &Matrix, f: impl Fn(f64, f64) -> f64) -> Result<Matrix> {
        if self.shape() != other.shape() {
            return Err(Error::DimensionMismatch(format!(
                "{:?} vs {:?}",
                self.shape(),
                other.shape()
            )));
        }
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn scale(&self, s: f64) -> Matrix {
        self.map(|x| x * s)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, &x| m.max(x.abs()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Largest `|m_ij - m_ji|`; infinite for non-square matrices.
    pub fn asymmetry(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in i + 1..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.asymmetry() <= tol
    }

    /// `(M + Mᵀ) / 2`.
    pub fn symmetrized(&self) -> Matrix {
        let mut out = self.clone();
        for i in 0..self.rows {
            for j in i + 1..self.cols {
                let avg = 0.5 * (self[(i, j)] + self[(j, i)]);
                out[(i, j)] = avg;
                out[(j, i)] = avg;
            }
        }
        out
    }

    /// Submatrix with the given rows and columns, in the given order.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Matrix {
        let mut out = Matrix::zeros(rows.len(), cols.len());
        for (oi, &r) in rows.iter().enumerate() {
            let src = self.row(r);
            for (oj, &c) in cols.iter().enumerate() {
                out[(oi, oj)] = src[c];
            }
        }
        out
    }

    pub fn select_rows(&self, rows: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(rows.len() * self.cols);
        for &r in rows {
            data.extend_from_slice(self.row(r));
        }
        Matrix {
            rows: rows.len(),
            cols: self.cols,
            data,
        }
    }

    fn check_symmetric(&self) -> Result<()> {
        if !self.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "expected a square matrix, got {}x{}",
                self.rows, self.cols
            )));
        }
        let asym = self.asymmetry();
        if asym > SYMMETRY_TOL * self.max_abs().max(1.0) {
            return Err(Error::NotSymmetric(asym));
        }
        Ok(())
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Flips `v` so that its largest-magnitude entry is positive. Entries within a
/// relative 1e-12 of the maximum count as tied and the lowest index wins.
pub fn canonicalize_sign(v: &mut [f64]) {
    let max = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if max == 0.0 {
        return;
    }
    let pivot = v
        .iter()
        .position(|x| x.abs() >= max * (1.0 - 1e-12))
        .expect("maximum exists");
    if v[pivot] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub value: f64,
    pub vector: Vec<f64>,
    pub iterations: usize,
}

/// Dominant eigenpair of a symmetric positive semi-definite matrix.
///
/// Converged once successive Rayleigh quotients differ by less than `tol`.
/// The returned vector is unit-norm with its largest-magnitude entry positive.
pub fn power_iteration(m: &Matrix, tol: f64, max_iter: usize, seed: u64) -> Result<EigenPair> {
    m.check_symmetric()?;
    let n = m.rows();
    if n == 0 {
        return Err(Error::DimensionMismatch("empty matrix".into()));
    }
    let mut rng = rng::seeded(seed);
    let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let nv = norm(&v);
    v.iter_mut().for_each(|x| *x /= nv);

    let mut rq = dot(&v, &m.mul_vec(&v)?);
    for it in 1..=max_iter {
        let w = m.mul_vec(&v)?;
        let nw = norm(&w);
        if nw == 0.0 {
            // v lies in the kernel; for a PSD matrix this only happens when m = 0.
            canonicalize_sign(&mut v);
            return Ok(EigenPair {
                value: 0.0,
                vector: v,
                iterations: it,
            });
        }
        v = w.into_iter().map(|x| x / nw).collect();
        let next = dot(&v, &m.mul_vec(&v)?);
        if (next - rq).abs() < tol {
            canonicalize_sign(&mut v);
            return Ok(EigenPair {
                value: next,
                vector: v,
                iterations: it,
            });
        }
        rq = next;
    }
    Err(Error::NoConvergence { iterations: max_iter })
}

/// Eigenvalues sorted descending, with eigenvectors as matching columns when
/// requested.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub values: Vec<f64>,
    pub vectors: Option<Matrix>,
}

impl Spectrum {
    pub fn max(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn min(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    /// Eigenvector for the `k`-th largest eigenvalue.
    pub fn vector(&self, k: usize) -> Option<Vec<f64>> {
        self.vectors.as_ref().map(|u| u.col(k))
    }

    /// Values in ascending order.
    pub fn ascending(&self) -> Vec<f64> {
        self.values.iter().rev().copied().collect()
    }
}

/// Full symmetric eigendecomposition by cyclic Jacobi rotations.
pub fn jacobi_eigh(m: &Matrix) -> Result<Spectrum> {
    jacobi(m, true)
}

/// Eigenvalues only (descending); skips eigenvector accumulation.
pub fn jacobi_eigvals(m: &Matrix) -> Result<Vec<f64>> {
    Ok(jacobi(m, false)?.values)
}

fn jacobi(m: &Matrix, want_vectors: bool) -> Result<Spectrum> {
    m.check_symmetric()?;
    let n = m.rows();
    let mut a = m.symmetrized();
    // Rows of `vt` are the eigenvectors; row updates stay contiguous.
    let mut vt = if want_vectors { Some(Matrix::identity(n)) } else { None };

    let scale = a.frobenius_norm();
    let threshold = JACOBI_OFF_TOL * if scale > 0.0 { scale } else { 1.0 };

    for _ in 0..JACOBI_MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|p| (p + 1..n).map(move |q| (p, q)))
            .map(|(p, q)| 2.0 * a[(p, q)] * a[(p, q)])
            .sum::<f64>()
            .sqrt();
        if off <= threshold {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                // Skip rotations that cannot change the diagonal in floating point.
                if apq.abs() < 1e-300 || (apq.abs() * 1e18 < app.abs() && apq.abs() * 1e18 < aqq.abs()) {
                    a[(p, q)] = 0.0;
                    a[(q, p)] = 0.0;
                    continue;
                }
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                rotate(&mut a, p, q, c, s);
                a[(p, p)] = app - t * apq;
                a[(q, q)] = aqq + t * apq;
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                if let Some(vt) = vt.as_mut() {
                    rotate_rows(vt, p, q, c, s);
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag = a.diag();
    order.sort_by(|&i, &j| diag[j].total_cmp(&diag[i]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| diag[i]).collect();
    let vectors = vt.map(|vt| {
        let mut u = Matrix::zeros(n, n);
        for (k, &i) in order.iter().enumerate() {
            for (r, &x) in vt.row(i).iter().enumerate() {
                u[(r, k)] = x;
            }
        }
        u
    });
    Ok(Spectrum { values, vectors })
}

/// Applies the two-sided rotation `Jᵀ A J` on rows/columns `p`, `q`, leaving
/// the (p,p), (q,q), (p,q) entries for the caller to set.
fn rotate(a: &mut Matrix, p: usize, q: usize, c: f64, s: f64) {
    let n = a.rows();
    for k in 0..n {
        if k == p || k == q {
            continue;
        }
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        let new_kp = c * akp - s * akq;
        let new_kq = s * akp + c * akq;
        a[(k, p)] = new_kp;
        a[(k, q)] = new_kq;
        a[(p, k)] = new_kp;
        a[(q, k)] = new_kq;
    }
}

fn rotate_rows(vt: &mut Matrix, p: usize, q: usize, c: f64, s: f64) {
    let cols = vt.cols();
    let (lo, hi) = vt.data_mut().split_at_mut(q * cols);
    let rp = &mut lo[p * cols..(p + 1) * cols];
    let rq = &mut hi[..cols];
    for (x, y) in rp.iter_mut().zip(rq.iter_mut()) {
        let (xp, xq) = (*x, *y);
        *x = c * xp - s * xq;
        *y = s * xp + c * xq;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Solve {
    Solved(Matrix),
    Singular,
}

impl Solve {
    pub fn solved(self) -> Option<Matrix> {
        match self {
            Solve::Solved(x) => Some(x),
            Solve::Singular => None,
        }
    }
}

/// Solves `m X = rhs` by Gaussian elimination with partial pivoting.
///
/// Reports [`Solve::Singular`] when a pivot falls below `pivot_tol` times the
/// largest diagonal magnitude.
pub fn solve_sym(m: &Matrix, rhs: &Matrix, pivot_tol: f64) -> Result<Solve> {
    m.check_symmetric()?;
    let n = m.rows();
    if rhs.rows() != n {
        return Err(Error::DimensionMismatch(format!(
            "{n}x{n} system with {} right-hand-side rows",
            rhs.rows()
        )));
    }
    let k = rhs.cols();
    let mut a = m.clone();
    let mut b = rhs.clone();
    let scale = {
        let d = m.diag().iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
        if d > 0.0 {
            d
        } else {
            m.max_abs()
        }
    };
    if n > 0 && scale == 0.0 {
        return Ok(Solve::Singular);
    }
    let tol = pivot_tol * scale;

    for col in 0..n {
        let (piv, piv_abs) =
            (col..n)
                .map(|r| (r, a[(r, col)].abs()))
                .fold((col, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if piv_abs < tol {
            return Ok(Solve::Singular);
        }
        if piv != col {
            swap_rows(&mut a, piv, col);
            swap_rows(&mut b, piv, col);
        }
        let p = a[(col, col)];
        for r in col + 1..n {
            let f = a[(r, col)] / p;
            if f == 0.0 {
                continue;
            }
            a[(r, col)] = 0.0;
            for c in col + 1..n {
                a[(r, c)] -= f * a[(col, c)];
            }
            for c in 0..k {
                b[(r, c)] -= f * b[(col, c)];
            }
        }
    }
    for col in (0..n).rev() {
        let p = a[(col, col)];
        for c in 0..k {
            let mut acc = b[(col, c)];
            for j in col + 1..n {
                acc -= a[(col, j)] * b[(j, c)];
            }
            b[(col, c)] = acc / p;
        }
    }
    Ok(Solve::Solved(b))
}

fn swap_rows(m: &mut Matrix, i: usize, j: usize) {
    if i == j {
        return;
    }
    let cols = m.cols();
    let (lo, hi) = (i.min(j), i.max(j));
    let (a, b) = m.data_mut().split_at_mut(hi * cols);
    a[lo * cols..(lo + 1) * cols].swap_with_slice(&mut b[..cols]);
}

/// Moore–Penrose inverse of a symmetric matrix via its eigendecomposition,
/// discarding eigenvalues with `|λ| < rank_tol · max|λ|`.
pub fn pseudo_inverse(m: &Matrix, rank_tol: f64) -> Result<Matrix> {
    let spec = jacobi_eigh(m)?;
    let n = m.rows();
    let lmax = spec.values.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    let u = spec.vectors.expect("vectors requested");
    let mut out = Matrix::zeros(n, n);
    if lmax == 0.0 {
        return Ok(out);
    }
    for (k, &lambda) in spec.values.iter().enumerate() {
        if lambda.abs() < rank_tol * lmax {
            continue;
        }
        let inv = 1.0 / lambda;
        for i in 0..n {
            let ui = u[(i, k)] * inv;
            if ui == 0.0 {
                continue;
            }
            for j in 0..n {
                out[(i, j)] += ui * u[(j, k)];
            }
        }
    }
    Ok(out.symmetrized())
}
