//! Dense complex linear algebra for the small matrices used throughout the crate.
//!
//! Everything here is plain O(n³) code over row-major storage. The largest
//! square matrix in practice is the 256×256 normal-equation matrix of process
//! tomography; most work happens at dims 2, 4 and 16.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Dense square complex matrix, row-major.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    dim: usize,
    data: Vec<C64>,
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix({}x{}) [", self.dim, self.dim)?;
        for i in 0..self.dim {
            write!(f, "  ")?;
            for j in 0..self.dim {
                let z = self[(i, j)];
                write!(f, "{:>+.4}{:+.4}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl ComplexMatrix {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim > 0, "matrix dimension must be positive");
        Self {
            dim,
            data: vec![ZERO; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    /// Builds a matrix from row-major entries; `entries.len()` must be a perfect square.
    pub fn from_vec(entries: Vec<C64>) -> Result<Self> {
        let dim = (entries.len() as f64).sqrt().round() as usize;
        if dim == 0 || dim * dim != entries.len() {
            return Err(Error::invalid(format!(
                "{} entries do not form a square matrix",
                entries.len()
            )));
        }
        if entries
            .iter()
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(Error::invalid("matrix entries must be finite"));
        }
        Ok(Self { dim, data: entries })
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Self {
        let dim = rows.len();
        Self::from_fn(dim, |i, j| {
            assert_eq!(rows[i].len(), dim, "row {i} has wrong length");
            c(rows[i][j], 0.0)
        })
    }

    pub fn from_rows(rows: &[&[C64]]) -> Self {
        let dim = rows.len();
        Self::from_fn(dim, |i, j| {
            assert_eq!(rows[i].len(), dim, "row {i} has wrong length");
            rows[i][j]
        })
    }

    pub fn diag(values: &[C64]) -> Self {
        let mut m = Self::zeros(values.len());
        for (i, v) in values.iter().enumerate() {
            m[(i, i)] = *v;
        }
        m
    }

    pub fn diag_real(values: &[f64]) -> Self {
        let v: Vec<C64> = values.iter().map(|&x| c(x, 0.0)).collect();
        Self::diag(&v)
    }

    /// Outer product |u⟩⟨v|.
    pub fn outer(u: &[C64], v: &[C64]) -> Self {
        assert_eq!(u.len(), v.len());
        Self::from_fn(u.len(), |i, j| u[i] * v[j].conj())
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[C64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn column(&self, j: usize) -> Vec<C64> {
        (0..self.dim).map(|i| self[(i, j)]).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == ZERO {
                    continue;
                }
                let brow = &other.data[k * n..(k + 1) * n];
                let orow = &mut out.data[i * n..(i + 1) * n];
                for (o, b) in orow.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// Kronecker product; block (i, j) of the result is `self[i, j] * other`.
    pub fn kron(&self, other: &Self) -> Self {
        let (n, m) = (self.dim, other.dim);
        let mut out = Self::zeros(n * m);
        for i in 0..n {
            for j in 0..n {
                let a = self[(i, j)];
                for k in 0..m {
                    for l in 0..m {
                        out[(i * m + k, j * m + l)] = a * other[(k, l)];
                    }
                }
            }
        }
        out
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.dim, |i, j| self[(j, i)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.dim, |i, j| self[(j, i)])
    }

    pub fn conj(&self) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn scale_re(&self, s: f64) -> Self {
        self.scale(c(s, 0.0))
    }

    /// Accumulates `s * other` into `self`.
    pub fn add_scaled(&mut self, s: C64, other: &Self) {
        assert_eq!(self.dim, other.dim, "dimension mismatch in add_scaled");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    /// `u · self · u†`
    pub fn conjugate_by(&self, u: &Self) -> Self {
        &(u * self) * &u.adjoint()
    }

    pub fn matvec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(v.len(), self.dim);
        (0..self.dim)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dim, other.dim);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Induced 1-norm (maximum absolute column sum).
    pub fn norm_one(&self) -> f64 {
        (0..self.dim)
            .map(|j| (0..self.dim).map(|i| self[(i, j)].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn hermitian_deviation(&self) -> f64 {
        self.max_abs_diff(&self.adjoint())
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_deviation() <= tol
    }

    pub fn unitary_deviation(&self) -> f64 {
        (&self.adjoint() * self).max_abs_diff(&Self::identity(self.dim))
    }

    /// Matrix exponential by scaling and squaring.
    ///
    /// The input is halved `s` times until its 1-norm is below 0.5, the Taylor
    /// series is summed until a term's 1-norm drops below 1e-18 (capped at 60
    /// terms, never reached at that norm), then the result is squared `s` times.
    pub fn expm(&self) -> Self {
        const SCALE_TARGET: f64 = 0.5;
        const TERM_TOL: f64 = 1e-18;
        const MAX_TERMS: usize = 60;

        assert!(self.is_finite(), "expm of non-finite matrix");
        let norm = self.norm_one();
        let mut squarings = 0u32;
        if norm >= SCALE_TARGET {
            squarings = (norm / SCALE_TARGET).log2().floor() as u32 + 1;
        }
        let scaled = self.scale_re(0.5f64.powi(squarings as i32));

        let mut sum = Self::identity(self.dim);
        let mut term = Self::identity(self.dim);
        for k in 1..=MAX_TERMS {
            term = (&term * &scaled).scale_re(1.0 / k as f64);
            sum = &sum + &term;
            if term.norm_one() < TERM_TOL {
                break;
            }
        }
        for _ in 0..squarings {
            sum = &sum * &sum;
        }
        sum
    }

    /// Hermitian eigendecomposition by cyclic complex Jacobi rotations.
    ///
    /// Eigenvalues come back ascending with eigenvectors as the matching columns.
    pub fn eigh(&self) -> Result<Eigh> {
        const MAX_SWEEPS: usize = 100;
        const OFF_TOL: f64 = 1e-12;

        let scale = self.max_abs().max(1.0);
        let dev = self.hermitian_deviation();
        if dev > 1e-10 * scale {
            return Err(Error::NotHermitian { deviation: dev });
        }
        let n = self.dim;
        // symmetrize so rounding noise in the input cannot stall convergence
        let mut a = Self::from_fn(n, |i, j| 0.5 * (self[(i, j)] + self[(j, i)].conj()));
        let mut v = Self::identity(n);
        let threshold = OFF_TOL * a.frobenius().max(1.0);

        for _sweep in 0..MAX_SWEEPS {
            if off_diagonal_norm(&a) < threshold {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    jacobi_rotate(&mut a, &mut v, p, q);
                }
            }
        }
        if off_diagonal_norm(&a) >= threshold {
            return Err(Error::NotConverged { sweeps: MAX_SWEEPS });
        }

        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| a[(i, i)].re.total_cmp(&a[(j, j)].re));
        let values = order.iter().map(|&i| a[(i, i)].re).collect();
        let vectors = Self::from_fn(n, |i, j| v[(i, order[j])]);
        Ok(Eigh { values, vectors })
    }

    /// Inverse by Gauss-Jordan elimination with partial pivoting.
    pub fn inverse(&self) -> Result<Self> {
        let n = self.dim;
        let mut a = self.clone();
        let mut inv = Self::identity(n);
        let scale = self.max_abs();
        if scale == 0.0 {
            return Err(Error::Singular);
        }
        for col in 0..n {
            let pivot_row = (col..n)
                .max_by(|&i, &j| a[(i, col)].norm().total_cmp(&a[(j, col)].norm()))
                .unwrap();
            let pivot = a[(pivot_row, col)];
            if pivot.norm() <= 1e-14 * scale {
                return Err(Error::Singular);
            }
            if pivot_row != col {
                for j in 0..n {
                    a.data.swap(pivot_row * n + j, col * n + j);
                    inv.data.swap(pivot_row * n + j, col * n + j);
                }
            }
            let pinv = ONE / pivot;
            for j in 0..n {
                a[(col, j)] *= pinv;
                inv[(col, j)] *= pinv;
            }
            for i in 0..n {
                if i == col {
                    continue;
                }
                let factor = a[(i, col)];
                if factor == ZERO {
                    continue;
                }
                for j in 0..n {
                    let (ac, ic) = (a[(col, j)], inv[(col, j)]);
                    a[(i, j)] -= factor * ac;
                    inv[(i, j)] -= factor * ic;
                }
            }
        }
        Ok(inv)
    }

    /// Column-stacked vectorization: `vec[j * n + i] = self[i, j]`.
    pub fn vectorize(&self) -> Vec<C64> {
        let n = self.dim;
        let mut out = vec![ZERO; n * n];
        for i in 0..n {
            for j in 0..n {
                out[j * n + i] = self[(i, j)];
            }
        }
        out
    }

    pub fn unvectorize(v: &[C64]) -> Result<Self> {
        let n = (v.len() as f64).sqrt().round() as usize;
        if n * n != v.len() {
            return Err(Error::invalid("vector length is not a perfect square"));
        }
        Ok(Self::from_fn(n, |i, j| v[j * n + i]))
    }
}

fn off_diagonal_norm(a: &ComplexMatrix) -> f64 {
    let n = a.dim;
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[(i, j)].norm_sqr();
            }
        }
    }
    s.sqrt()
}

/// One complex Jacobi rotation annihilating a[p, q].
///
/// The phase of a[p, q] is first removed with diag(1, e^{-iφ}) so the 2×2
/// block is real symmetric, then the classical rotation is applied.
fn jacobi_rotate(a: &mut ComplexMatrix, v: &mut ComplexMatrix, p: usize, q: usize) {
    let apq = a[(p, q)];
    let mag = apq.norm();
    if mag == 0.0 {
        return;
    }
    let app = a[(p, p)].re;
    let aqq = a[(q, q)].re;
    let phase = apq / mag; // e^{iφ}
    let zeta = (aqq - app) / (2.0 * mag);
    let t = if zeta >= 0.0 {
        1.0 / (zeta + (1.0 + zeta * zeta).sqrt())
    } else {
        -1.0 / (-zeta + (1.0 + zeta * zeta).sqrt())
    };
    let cs = 1.0 / (1.0 + t * t).sqrt();
    let sn = t * cs;

    // G restricted to (p, q): [[c, s], [-s e^{-iφ}, c e^{-iφ}]]
    let gpp = c(cs, 0.0);
    let gpq = c(sn, 0.0);
    let gqp = -sn * phase.conj();
    let gqq = cs * phase.conj();

    let n = a.dim;
    // A <- A G
    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = akp * gpp + akq * gqp;
        a[(k, q)] = akp * gpq + akq * gqq;
    }
    // A <- G† A
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = gpp.conj() * apk + gqp.conj() * aqk;
        a[(q, k)] = gpq.conj() * apk + gqq.conj() * aqk;
    }
    a[(p, q)] = ZERO;
    a[(q, p)] = ZERO;
    // V <- V G
    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = vkp * gpp + vkq * gqp;
        v[(k, q)] = vkp * gpq + vkq * gqq;
    }
}

/// Result of [`ComplexMatrix::eigh`].
#[derive(Debug, Clone)]
pub struct Eigh {
    pub values: Vec<f64>,
    pub vectors: ComplexMatrix,
}

impl Eigh {
    /// V diag(values) V†
    pub fn reconstruct(&self) -> ComplexMatrix {
        self.reconstruct_with(&self.values)
    }

    pub fn reconstruct_with(&self, values: &[f64]) -> ComplexMatrix {
        let n = self.vectors.dim();
        let scaled = ComplexMatrix::from_fn(n, |i, j| self.vectors[(i, j)] * values[j]);
        &scaled * &self.vectors.adjoint()
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.dim + j]
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.matmul(rhs).expect("matrix product dimension mismatch")
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch in add");
        ComplexMatrix {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch in sub");
        ComplexMatrix {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

impl Neg for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn neg(self) -> ComplexMatrix {
        self.scale_re(-1.0)
    }
}

/// Dense rectangular complex matrix, row-major. Only used as a least-squares design matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct RectMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl RectMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn matvec(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|i| {
                self.data[i * self.cols..(i + 1) * self.cols]
                    .iter()
                    .zip(x)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }

    /// A†A as a square matrix.
    pub fn gram(&self) -> ComplexMatrix {
        let n = self.cols;
        let mut g = ComplexMatrix::zeros(n);
        for r in 0..self.rows {
            let row = &self.data[r * n..(r + 1) * n];
            for i in 0..n {
                let ai = row[i].conj();
                if ai == ZERO {
                    continue;
                }
                for j in i..n {
                    g[(i, j)] += ai * row[j];
                }
            }
        }
        for i in 0..n {
            for j in 0..i {
                g[(i, j)] = g[(j, i)].conj();
            }
        }
        g
    }

    /// A†b
    pub fn adjoint_apply(&self, b: &[C64]) -> Vec<C64> {
        assert_eq!(b.len(), self.rows);
        let mut out = vec![ZERO; self.cols];
        for (r, br) in b.iter().enumerate() {
            let row = &self.data[r * self.cols..(r + 1) * self.cols];
            for (o, a) in out.iter_mut().zip(row) {
                *o += a.conj() * br;
            }
        }
        out
    }
}

impl Index<(usize, usize)> for RectMatrix {
    type Output = C64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for RectMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Relative pivot below which the normal equations are declared rank deficient.
pub const RANK_TOL: f64 = 1e-12;

/// Least-squares solution of `A x ≈ b` through the normal equations `A†A x = A†b`.
///
/// The Hermitian system is solved by Cholesky factorization without any
/// regularization; a pivot below `RANK_TOL` times the largest diagonal entry
/// of A†A is reported as rank deficiency.
pub fn lstsq(a: &RectMatrix, b: &[C64]) -> Result<Vec<C64>> {
    if b.len() != a.rows {
        return Err(Error::DimensionMismatch {
            expected: a.rows,
            found: b.len(),
        });
    }
    if a.rows < a.cols {
        return Err(Error::invalid(format!(
            "underdetermined system: {} rows < {} columns",
            a.rows, a.cols
        )));
    }
    let gram = a.gram();
    let rhs = a.adjoint_apply(b);
    cholesky_solve(&gram, &rhs)
}

/// Solves a Hermitian positive definite system by Cholesky factorization.
pub fn cholesky_solve(h: &ComplexMatrix, rhs: &[C64]) -> Result<Vec<C64>> {
    let n = h.dim();
    assert_eq!(rhs.len(), n);
    let max_diag = (0..n).map(|i| h[(i, i)].re).fold(0.0, f64::max);
    if max_diag <= 0.0 {
        return Err(Error::RankDeficient {
            column: 0,
            pivot: max_diag,
        });
    }
    let mut l = ComplexMatrix::zeros(n);
    for j in 0..n {
        let mut d = h[(j, j)].re;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        if d <= RANK_TOL * max_diag {
            return Err(Error::RankDeficient {
                column: j,
                pivot: d,
            });
        }
        let ljj = d.sqrt();
        l[(j, j)] = c(ljj, 0.0);
        for i in (j + 1)..n {
            let mut s = h[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / ljj;
        }
    }
    // L y = rhs
    let mut y = vec![ZERO; n];
    for i in 0..n {
        let mut s = rhs[i];
        for k in 0..i {
            s -= l[(i, k)] * y[k];
        }
        y[i] = s / l[(i, i)];
    }
    // L† x = y
    let mut x = vec![ZERO; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in (i + 1)..n {
            s -= l[(k, i)].conj() * x[k];
        }
        x[i] = s / l[(i, i)];
    }
    Ok(x)
}

/// Pauli matrices and friends.
pub mod pauli {
    use super::{c, ComplexMatrix, C64, ONE, ZERO};

    pub fn id() -> ComplexMatrix {
        ComplexMatrix::identity(2)
    }

    pub fn x() -> ComplexMatrix {
        ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]])
    }

    pub fn y() -> ComplexMatrix {
        ComplexMatrix::from_rows(&[&[ZERO, c(0.0, -1.0)], &[c(0.0, 1.0), ZERO]])
    }

    pub fn z() -> ComplexMatrix {
        ComplexMatrix::from_real_rows(&[&[1.0, 0.0], &[0.0, -1.0]])
    }

    /// σ⁻ = |0⟩⟨1|, lowering |1⟩ to |0⟩.
    pub fn lowering() -> ComplexMatrix {
        ComplexMatrix::from_rows(&[&[ZERO, ONE], &[ZERO, ZERO]])
    }

    /// Index 0..4 → I, X, Y, Z.
    pub fn by_index(k: usize) -> ComplexMatrix {
        match k {
            0 => id(),
            1 => x(),
            2 => y(),
            3 => z(),
            _ => panic!("Pauli index {k} out of range"),
        }
    }

    pub fn ket0() -> Vec<C64> {
        vec![ONE, ZERO]
    }

    pub fn ket1() -> Vec<C64> {
        vec![ZERO, ONE]
    }
}

#[cfg(test)]
mod tests {
    use super::pauli::*;
    use super::*;
    use proptest::prelude::*;

    fn random_matrix(dim: usize, seed: u64) -> ComplexMatrix {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        ComplexMatrix::from_fn(dim, |_, _| {
            c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        })
    }

    fn random_hermitian(dim: usize, seed: u64) -> ComplexMatrix {
        let a = random_matrix(dim, seed);
        (&a + &a.adjoint()).scale_re(0.5)
    }

    #[test]
    fn pauli_products() {
        assert_eq!(&id() * &id(), id());
        assert!((&x() * &x()).max_abs_diff(&id()) < 1e-15);
        // σx σy = i σz
        assert!((&x() * &y()).max_abs_diff(&z().scale(I)) < 1e-15);
    }

    #[test]
    fn matmul_dimension_mismatch() {
        let err = id().matmul(&ComplexMatrix::identity(4)).unwrap_err();
        assert_eq!(
            err,
            Error::DimensionMismatch {
                expected: 2,
                found: 4
            }
        );
    }

    #[test]
    fn kron_examples() {
        assert_eq!(id().kron(&id()), ComplexMatrix::identity(4));
        assert_eq!(
            z().kron(&id()),
            ComplexMatrix::diag_real(&[1.0, 1.0, -1.0, -1.0])
        );
        let xx = x().kron(&x());
        let anti = ComplexMatrix::from_fn(4, |i, j| if i + j == 3 { ONE } else { ZERO });
        assert_eq!(xx, anti);
    }

    #[test]
    fn kron_is_associative_on_integer_entries() {
        let a = ComplexMatrix::from_real_rows(&[&[1.0, 2.0], &[-3.0, 4.0]]);
        let b = ComplexMatrix::from_rows(&[&[c(0.0, 1.0), ONE], &[c(2.0, -1.0), ZERO]]);
        let d = ComplexMatrix::from_real_rows(&[&[5.0, 0.0], &[1.0, -1.0]]);
        assert_eq!(a.kron(&b).kron(&d), a.kron(&b.kron(&d)));
    }

    #[test]
    fn adjoint_and_trace() {
        assert_eq!(ComplexMatrix::identity(4).trace(), c(4.0, 0.0));
        let iy = y().scale(I);
        assert_eq!(iy.adjoint(), iy.scale_re(-1.0));
        assert_eq!(x().kron(&z()).trace(), ZERO);
    }

    #[test]
    fn expm_of_zero_is_identity() {
        assert_eq!(ComplexMatrix::zeros(4).expm(), ComplexMatrix::identity(4));
    }

    #[test]
    fn expm_pauli_rotation() {
        // exp(-i θ σx) = cos θ I - i sin θ σx, at θ = π/2 this is -iσx
        let theta = std::f64::consts::FRAC_PI_2;
        let u = x().scale(c(0.0, -theta)).expm();
        assert!(u.max_abs_diff(&x().scale(c(0.0, -1.0))) < 1e-13);
        let theta = 0.3;
        let u = x().scale(c(0.0, -theta)).expm();
        let expected = &id().scale_re(theta.cos()) + &x().scale(c(0.0, -theta.sin()));
        assert!(u.max_abs_diff(&expected) < 1e-15);
    }

    #[test]
    fn expm_large_norm_matches_closed_form() {
        // 2x2 anti-Hermitian with large norm exercises the squaring phase
        let theta = 37.0;
        let u = y().scale(c(0.0, -theta)).expm();
        let expected = &id().scale_re(theta.cos()) + &y().scale(c(0.0, -theta.sin()));
        assert!(u.max_abs_diff(&expected) < 1e-12);
    }

    #[test]
    fn expm_commuting_sum() {
        let a = ComplexMatrix::diag(&[c(0.5, 1.0), c(-2.0, 0.25)]);
        let e = a.expm();
        assert!((e[(0, 0)] - c(0.5, 1.0).exp()).norm() < 1e-14);
        assert!((e[(1, 1)] - c(-2.0, 0.25).exp()).norm() < 1e-14);
        assert!(e[(0, 1)].norm() < 1e-16);
    }

    #[test]
    fn eigh_examples() {
        let d = ComplexMatrix::diag_real(&[3.0, 1.0]);
        let e = d.eigh().unwrap();
        assert_eq!(e.values, vec![1.0, 3.0]);
        assert!((e.vectors[(1, 0)].norm() - 1.0).abs() < 1e-15);
        assert!((e.vectors[(0, 1)].norm() - 1.0).abs() < 1e-15);

        let e = x().eigh().unwrap();
        assert!((e.values[0] + 1.0).abs() < 1e-14 && (e.values[1] - 1.0).abs() < 1e-14);

        let psi = vec![c(0.5, 0.0), c(0.0, 0.5), c(-0.5, 0.0), c(0.0, -0.5)];
        let rho = ComplexMatrix::outer(&psi, &psi);
        let e = rho.eigh().unwrap();
        for (v, want) in e.values.iter().zip([0.0, 0.0, 0.0, 1.0]) {
            assert!((v - want).abs() < 1e-12, "{:?}", e.values);
        }
    }

    #[test]
    fn eigh_rejects_non_hermitian() {
        let m = ComplexMatrix::from_real_rows(&[&[1.0, 2.0], &[0.0, 1.0]]);
        assert!(matches!(m.eigh(), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn eigh_reconstruction_random() {
        for (dim, seed) in [(2, 1), (4, 2), (16, 3), (16, 4)] {
            let h = random_hermitian(dim, seed);
            let e = h.eigh().unwrap();
            assert!(e.reconstruct().max_abs_diff(&h) < 1e-9);
            assert!(e.vectors.unitary_deviation() < 1e-10);
            assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn inverse_roundtrip_and_singular() {
        let a = random_matrix(4, 11);
        let inv = a.inverse().unwrap();
        assert!((&a * &inv).max_abs_diff(&ComplexMatrix::identity(4)) < 1e-12);
        let s = ComplexMatrix::from_real_rows(&[&[1.0, 2.0], &[2.0, 4.0]]);
        assert_eq!(s.inverse().unwrap_err(), Error::Singular);
    }

    #[test]
    fn lstsq_identity_and_consistent() {
        let a = RectMatrix::from_fn(3, 3, |i, j| if i == j { ONE } else { ZERO });
        let b = vec![c(1.0, 2.0), c(-3.0, 0.0), c(0.0, 0.5)];
        let x = lstsq(&a, &b).unwrap();
        for (u, v) in x.iter().zip(&b) {
            assert!((u - v).norm() < 1e-14);
        }

        // overdetermined but consistent
        let a = RectMatrix::from_fn(6, 3, |i, j| {
            c(((i + 1) as f64).powi(j as i32), 0.1 * (i as f64 - j as f64))
        });
        let truth = vec![c(1.0, -1.0), c(0.25, 0.0), c(-2.0, 3.0)];
        let b = a.matvec(&truth);
        let x = lstsq(&a, &b).unwrap();
        let resid: f64 = a
            .matvec(&x)
            .iter()
            .zip(&b)
            .map(|(u, v)| (u - v).norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert!(resid < 1e-10);
    }

    #[test]
    fn lstsq_matches_eigh_pseudo_inverse() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let a = RectMatrix::from_fn(32, 16, |_, _| {
            c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        let b: Vec<C64> = (0..32)
            .map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let x = lstsq(&a, &b).unwrap();

        // oracle: x = V Λ⁻¹ V† A† b from the eigendecomposition of A†A
        let eig = a.gram().eigh().unwrap();
        let inv: Vec<f64> = eig.values.iter().map(|l| 1.0 / l).collect();
        let pinv_gram = eig.reconstruct_with(&inv);
        let oracle = pinv_gram.matvec(&a.adjoint_apply(&b));
        for (u, v) in x.iter().zip(&oracle) {
            assert!((u - v).norm() < 1e-8);
        }
    }

    #[test]
    fn lstsq_reports_rank_deficiency() {
        let a = RectMatrix::from_fn(4, 2, |i, _| c(i as f64, 0.0));
        let b = vec![ONE; 4];
        assert!(matches!(lstsq(&a, &b), Err(Error::RankDeficient { .. })));
    }

    #[test]
    fn vectorize_roundtrip() {
        let a = random_matrix(4, 5);
        assert_eq!(ComplexMatrix::unvectorize(&a.vectorize()).unwrap(), a);
        assert_eq!(a.vectorize()[1], a[(1, 0)]);
    }

    proptest! {
        #[test]
        fn trace_is_cyclic(seed in 0u64..10_000) {
            let a = random_matrix(4, seed);
            let b = random_matrix(4, seed.wrapping_add(7919));
            let d = (&a * &b).trace() - (&b * &a).trace();
            prop_assert!(d.norm() < 1e-12);
        }

        #[test]
        fn expm_of_anti_hermitian_is_unitary(seed in 0u64..10_000, t in 0.0f64..1.0) {
            let h = random_hermitian(4, seed);
            // keep ‖H‖t ≤ 10
            let scale = 10.0 * t / h.norm_one().max(1e-12);
            let u = h.scale(c(0.0, -scale)).expm();
            prop_assert!(u.unitary_deviation() < 1e-12);
        }

        #[test]
        fn eigh_reconstructs(seed in 0u64..10_000, which in 0usize..3) {
            let dim = [2, 4, 16][which];
            let h = random_hermitian(dim, seed);
            let e = h.eigh().unwrap();
            prop_assert!(e.reconstruct().max_abs_diff(&h) < 1e-9);
        }
    }
}
