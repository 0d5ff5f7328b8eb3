//! Dense complex matrices, a Hermitian eigensolver and matrix exponentials.
//!
//! Matrices are small (at most a few hundred rows) so everything is row-major
//! `Vec` storage with straightforward loops.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex64;
#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

#[derive(Clone, Debug, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
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
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from row-major data. Panics if the length does not match.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<C64>) -> Self {
        assert_eq!(data.len(), rows * cols, "row-major data length mismatch");
        Self { rows, cols, data }
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

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| z * s).collect(),
        }
    }

    pub fn matmul(&self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.cols, rhs.rows, "matmul dimension mismatch");
        let mut out = CMatrix::zeros(self.rows, rhs.cols);
        for r in 0..self.rows {
            let out_row = &mut out.data[r * rhs.cols..(r + 1) * rhs.cols];
            for k in 0..self.cols {
                let a = self.data[r * self.cols + k];
                if a == ZERO {
                    continue;
                }
                let rhs_row = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                for (o, &b) in out_row.iter_mut().zip(rhs_row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// Matrix-vector product.
    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(self.cols, v.len(), "apply dimension mismatch");
        (0..self.rows)
            .map(|r| {
                self.data[r * self.cols..(r + 1) * self.cols]
                    .iter()
                    .zip(v)
                    .map(|(&a, &b)| a * b)
                    .sum()
            })
            .collect()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Maximum absolute column sum.
    pub fn one_norm(&self) -> f64 {
        (0..self.cols)
            .map(|c| (0..self.rows).map(|r| self[(r, c)].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Largest singular value.
    pub fn operator_norm(&self) -> Result<f64> {
        if self.data.is_empty() {
            return Ok(0.0);
        }
        let gram = self.adjoint().matmul(self);
        let eig = hermitian_eigen(&gram)?;
        Ok(eig.values.iter().fold(0.0f64, |m, &v| m.max(v)).max(0.0).sqrt())
    }

    pub fn max_abs_diff(&self, other: &CMatrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.is_square()
            && (0..self.rows)
                .all(|r| (0..self.cols).all(|c| (self[(r, c)] - self[(c, r)].conj()).norm() <= tol))
    }

    /// `‖U†U − 1‖` in operator norm.
    pub fn unitarity_defect(&self) -> Result<f64> {
        let g = self.adjoint().matmul(self) - CMatrix::identity(self.cols);
        g.operator_norm()
    }

    /// Square sub-block starting at `(offset, offset)`.
    pub fn diagonal_block(&self, offset: usize, size: usize) -> CMatrix {
        CMatrix::from_fn(size, size, |r, c| self[(offset + r, offset + c)])
    }

    /// Block-diagonal matrix from square blocks.
    pub fn block_diagonal(blocks: &[CMatrix]) -> CMatrix {
        let n: usize = blocks.iter().map(|b| b.rows).sum();
        let mut out = CMatrix::zeros(n, n);
        let mut off = 0;
        for b in blocks {
            assert!(b.is_square(), "block_diagonal needs square blocks");
            for r in 0..b.rows {
                for c in 0..b.cols {
                    out[(off + r, off + c)] = b[(r, c)];
                }
            }
            off += b.rows;
        }
        out
    }

    pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
        a.matmul(b) - b.matmul(a)
    }

    /// Nearest unitary matrix, `U (U†U)^{-1/2}`.
    pub fn polar_unitary(&self) -> Result<CMatrix> {
        let gram = self.adjoint().matmul(self);
        let eig = hermitian_eigen(&gram)?;
        let n = self.cols;
        let v = &eig.vectors;
        let mut inv_sqrt = CMatrix::zeros(n, n);
        for (a, &lam) in eig.values.iter().enumerate() {
            if !(lam > 0.0) {
                return Err(Error::invalid("matrix", "singular matrix has no polar factor"));
            }
            let s = 1.0 / lam.sqrt();
            for r in 0..n {
                let vr = v[(r, a)] * s;
                for c in 0..n {
                    inv_sqrt[(r, c)] += vr * v[(c, a)].conj();
                }
            }
        }
        Ok(self.matmul(&inv_sqrt))
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = C64;
    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        &mut self.data[r * self.cols + c]
    }
}

impl Add for CMatrix {
    type Output = CMatrix;
    fn add(mut self, rhs: CMatrix) -> CMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        for (a, b) in self.data.iter_mut().zip(rhs.data) {
            *a += b;
        }
        self
    }
}

impl Sub for CMatrix {
    type Output = CMatrix;
    fn sub(mut self, rhs: CMatrix) -> CMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        for (a, b) in self.data.iter_mut().zip(rhs.data) {
            *a -= b;
        }
        self
    }
}

impl Mul for &CMatrix {
    type Output = CMatrix;
    fn mul(self, rhs: &CMatrix) -> CMatrix {
        self.matmul(rhs)
    }
}

/// Eigen-decomposition `A = V diag(values) V†` of a Hermitian matrix.
///
/// `vectors` holds the orthonormal eigenvectors as columns; `values` is ascending.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

/// Eigenvalues and eigenvectors of a Hermitian matrix.
///
/// Householder reduction to real symmetric tridiagonal form followed by implicit
/// QL iterations. Only the lower triangle of `a` is read.
pub fn hermitian_eigen(a: &CMatrix) -> Result<HermitianEigen> {
    if !a.is_square() {
        return Err(Error::invalid("matrix", "eigen-decomposition needs a square matrix"));
    }
    let n = a.rows;
    if n == 0 {
        return Ok(HermitianEigen {
            values: Vec::new(),
            vectors: CMatrix::zeros(0, 0),
        });
    }
    let (mut d, mut e, reflectors) = tridiagonalize(a);
    let q = accumulate_reflectors(&reflectors, n);
    // zt rows are the eigenvectors of the tridiagonal matrix.
    let mut zt = vec![0.0; n * n];
    for i in 0..n {
        zt[i * n + i] = 1.0;
    }
    tridiagonal_ql(&mut d, &mut e, |i, s, c| {
        let (lo, hi) = zt.split_at_mut((i + 1) * n);
        let zi = &mut lo[i * n..];
        let zi1 = &mut hi[..n];
        for k in 0..n {
            let f = zi1[k];
            zi1[k] = s * zi[k] + c * f;
            zi[k] = c * zi[k] - s * f;
        }
    })
    .map_err(|_| Error::EigenFailure { dim: n })?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| d[x].total_cmp(&d[y]));
    let values = order.iter().map(|&i| d[i]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for r in 0..n {
        let qrow = &q.data[r * n..(r + 1) * n];
        for (col, &src) in order.iter().enumerate() {
            let zrow = &zt[src * n..(src + 1) * n];
            let mut acc = ZERO;
            for (qv, &zv) in qrow.iter().zip(zrow) {
                acc += qv * zv;
            }
            vectors.data[r * n + col] = acc;
        }
    }
    Ok(HermitianEigen { values, vectors })
}

/// Eigenvalues of a Hermitian matrix together with the projections
/// `Σ_k w[k] V[k, a]` of every eigenvector `a` onto each functional `w`.
///
/// Cheaper than [`hermitian_eigen`] when only a few linear combinations of
/// eigenvector components are needed, since the QL rotations are applied to
/// the functionals instead of a full eigenvector matrix. Eigenvalues are in
/// no particular order; projections share that order.
pub fn hermitian_eigen_projected(a: &CMatrix, functionals: &[Vec<C64>]) -> Result<(Vec<f64>, Vec<Vec<C64>>)> {
    if !a.is_square() {
        return Err(Error::invalid("matrix", "eigen-decomposition needs a square matrix"));
    }
    let n = a.rows;
    if functionals.iter().any(|w| w.len() != n) {
        return Err(Error::invalid("functionals", "length must match the matrix dimension"));
    }
    let (mut d, mut e, reflectors) = tridiagonalize(a);
    // w^T Q with Q = H(0) H(1) ... applied left to right.
    let mut proj: Vec<Vec<C64>> = functionals.to_vec();
    for x in proj.iter_mut() {
        for (i, (v, tau)) in reflectors.iter().enumerate() {
            if *tau == ZERO {
                continue;
            }
            let off = i + 1;
            let dot: C64 = x[off..].iter().zip(v).map(|(xv, vv)| xv * vv).sum();
            let s = dot * *tau;
            for (xv, vv) in x[off..].iter_mut().zip(v) {
                *xv -= s * vv.conj();
            }
        }
    }
    tridiagonal_ql(&mut d, &mut e, |i, s, c| {
        for x in proj.iter_mut() {
            let f = x[i + 1];
            x[i + 1] = x[i] * s + f * c;
            x[i] = x[i] * c - f * s;
        }
    })
    .map_err(|_| Error::EigenFailure { dim: n })?;
    Ok((d, proj))
}

type Reflector = (Vec<C64>, C64);

/// `Q = H(0) H(1) ... H(n-2)`, accumulated from the right.
fn accumulate_reflectors(reflectors: &[Reflector], n: usize) -> CMatrix {
    let mut q = CMatrix::identity(n);
    for (i, (v, tau)) in reflectors.iter().enumerate().rev() {
        if *tau == ZERO {
            continue;
        }
        let off = i + 1;
        let len = n - off;
        for c in off..n {
            let mut s = ZERO;
            for r in 0..len {
                s += v[r].conj() * q.data[(off + r) * n + c];
            }
            let s = *tau * s;
            for r in 0..len {
                q.data[(off + r) * n + c] -= v[r] * s;
            }
        }
    }
    q
}

/// Reduces Hermitian `a` to `Q T Q†` with real symmetric tridiagonal `T`.
///
/// Returns `(diagonal, subdiagonal, reflectors)` where `Q = H(0) H(1) ...` and
/// `H(i) = 1 − τ v v†` acts on indices `i+1..`. `subdiagonal[i] = T[i+1][i]`; the last entry is zero.
fn tridiagonalize(a: &CMatrix) -> (Vec<f64>, Vec<f64>, Vec<Reflector>) {
    let n = a.rows;
    let mut m = a.data.clone();
    // Hermitize from the lower triangle so the upper triangle is never trusted.
    for r in 0..n {
        m[r * n + r] = C64::new(m[r * n + r].re, 0.0);
        for c in 0..r {
            m[c * n + r] = m[r * n + c].conj();
        }
    }
    let mut e = vec![0.0; n];
    let mut reflectors: Vec<Reflector> = Vec::with_capacity(n.saturating_sub(1));
    let mut w = vec![ZERO; n];

    for i in 0..n.saturating_sub(1) {
        let alpha = m[(i + 1) * n + i];
        let xnorm_sq: f64 = (i + 2..n).map(|r| m[r * n + i].norm_sqr()).sum();
        let len = n - i - 1;
        let mut v = vec![ZERO; len];
        v[0] = ONE;
        let tau;
        if xnorm_sq == 0.0 && alpha.im == 0.0 {
            tau = ZERO;
            e[i] = alpha.re;
        } else {
            let beta = -(alpha.norm_sqr() + xnorm_sq).sqrt().copysign(alpha.re);
            tau = C64::new((beta - alpha.re) / beta, -alpha.im / beta);
            let scale = ONE / (alpha - beta);
            for (k, r) in (i + 2..n).enumerate() {
                v[k + 1] = m[r * n + i] * scale;
            }
            e[i] = beta;

            // Two-sided update of the trailing block: A ← H† A H.
            let off = i + 1;
            for r in 0..len {
                let row = &m[(off + r) * n + off..(off + r) * n + n];
                let mut acc = ZERO;
                for (a_rc, vc) in row.iter().zip(&v) {
                    acc += a_rc * vc;
                }
                w[r] = tau * acc;
            }
            let mut wv = ZERO;
            for r in 0..len {
                wv += w[r].conj() * v[r];
            }
            let alpha2 = -0.5 * tau * wv;
            for r in 0..len {
                w[r] += alpha2 * v[r];
            }
            for r in 0..len {
                let (vr, wr) = (v[r], w[r]);
                let row = &mut m[(off + r) * n + off..(off + r) * n + n];
                for c in 0..len {
                    row[c] -= vr * w[c].conj() + wr * v[c].conj();
                }
            }
        }
        reflectors.push((v, tau));
    }
    let d: Vec<f64> = (0..n).map(|i| m[i * n + i].re).collect();

    (d, e, reflectors)
}

/// Implicit QL with Wilkinson-style shifts on a symmetric tridiagonal matrix.
///
/// Each plane rotation is reported as `rotate(i, s, c)`, acting on the pair of
/// eigenvector coordinates `(i, i+1)` as `(x_i, x_{i+1}) ← (c x_i − s x_{i+1}, s x_i + c x_{i+1})`.
/// Errors with the dimension if an eigenvalue needs more than the sweep cap.
fn tridiagonal_ql(d: &mut [f64], e: &mut [f64], mut rotate: impl FnMut(usize, f64, f64)) -> core::result::Result<(), usize> {
    const MAX_SWEEPS: usize = 60;
    let n = d.len();
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > MAX_SWEEPS {
                return Err(n);
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut underflow = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                rotate(i, s, c);
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

/// Matrix exponential by scaling and squaring with a Taylor series.
pub fn expm(a: &CMatrix) -> CMatrix {
    assert!(a.is_square(), "expm needs a square matrix");
    let n = a.rows;
    let norm = a.one_norm();
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let scaled = a.scale(C64::new(0.5f64.powi(squarings), 0.0));
    let mut sum = CMatrix::identity(n);
    let mut term = CMatrix::identity(n);
    for k in 1..=30 {
        term = term.matmul(&scaled).scale(C64::new(1.0 / k as f64, 0.0));
        let tn = term.one_norm();
        sum = sum + term.clone();
        if tn <= f64::EPSILON * 1e-3 {
            break;
        }
    }
    for _ in 0..squarings {
        sum = sum.matmul(&sum);
    }
    sum
}

/// `exp(-i H t)` for a 2x2 Hermitian `H`, in closed form.
pub fn expm_hermitian_2x2(h: &CMatrix, t: f64) -> CMatrix {
    assert_eq!((h.rows, h.cols), (2, 2));
    let mean = 0.5 * (h[(0, 0)].re + h[(1, 1)].re);
    let bz = 0.5 * (h[(0, 0)].re - h[(1, 1)].re);
    let off = h[(1, 0)];
    let (bx, by) = (off.re, off.im);
    let norm = (bx * bx + by * by + bz * bz).sqrt();
    let phase = C64::from_polar(1.0, -mean * t);
    let (c, s_over) = if norm * t == 0.0 {
        (1.0, t)
    } else {
        ((norm * t).cos(), (norm * t).sin() / norm)
    };
    // exp(-i t b·σ) = cos(|b|t) − i sin(|b|t) b̂·σ; σ entries: x=[[0,1],[1,0]], y=[[0,-i],[i,0]].
    let m00 = C64::new(c, -s_over * bz);
    let m11 = C64::new(c, s_over * bz);
    let m01 = C64::new(0.0, -s_over) * C64::new(bx, -by);
    let m10 = C64::new(0.0, -s_over) * C64::new(bx, by);
    CMatrix::from_row_major(2, 2, vec![m00 * phase, m01 * phase, m10 * phase, m11 * phase])
}

/// Dense real square matrix of fixed size.
pub type RMatrix<const N: usize> = [[f64; N]; N];

pub fn rmatmul<const N: usize>(a: &RMatrix<N>, b: &RMatrix<N>) -> RMatrix<N> {
    let mut out = [[0.0; N]; N];
    for r in 0..N {
        for k in 0..N {
            let ark = a[r][k];
            for c in 0..N {
                out[r][c] += ark * b[k][c];
            }
        }
    }
    out
}

pub fn rapply<const N: usize>(a: &RMatrix<N>, v: &[f64; N]) -> [f64; N] {
    let mut out = [0.0; N];
    for r in 0..N {
        out[r] = (0..N).map(|c| a[r][c] * v[c]).sum();
    }
    out
}

/// Real matrix exponential by scaling and squaring with a Taylor series.
pub fn expm_real<const N: usize>(a: &RMatrix<N>) -> RMatrix<N> {
    let norm = (0..N)
        .map(|c| (0..N).map(|r| a[r][c].abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let s = 0.5f64.powi(squarings);
    let mut scaled = *a;
    scaled.iter_mut().flatten().for_each(|x| *x *= s);
    let mut sum = [[0.0; N]; N];
    let mut term = [[0.0; N]; N];
    for i in 0..N {
        sum[i][i] = 1.0;
        term[i][i] = 1.0;
    }
    for k in 1..=30 {
        term = rmatmul(&term, &scaled);
        let inv = 1.0 / k as f64;
        let mut tn = 0.0f64;
        for r in 0..N {
            for c in 0..N {
                term[r][c] *= inv;
                sum[r][c] += term[r][c];
                tn = tn.max(term[r][c].abs());
            }
        }
        if tn <= f64::EPSILON * 1e-3 {
            break;
        }
    }
    for _ in 0..squarings {
        sum = rmatmul(&sum, &sum);
    }
    sum
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
pub fn solve_real<const N: usize>(a: &RMatrix<N>, b: &[f64; N]) -> Result<[f64; N]> {
    let mut m = *a;
    let mut x = *b;
    for col in 0..N {
        let pivot = (col..N)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .unwrap_or(col);
        if m[pivot][col].abs() < 1e-300 {
            return Err(Error::invalid("matrix", "singular linear system"));
        }
        m.swap(col, pivot);
        x.swap(col, pivot);
        for r in col + 1..N {
            let f = m[r][col] / m[col][col];
            if f != 0.0 {
                for c in col..N {
                    m[r][c] -= f * m[col][c];
                }
                x[r] -= f * x[col];
            }
        }
    }
    for col in (0..N).rev() {
        let s: f64 = (col + 1..N).map(|c| m[col][c] * x[c]).sum();
        x[col] = (x[col] - s) / m[col][col];
    }
    Ok(x)
}
