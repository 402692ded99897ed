//! Small dense complex linear algebra.
//!
//! Matrices here are at most a few thousand on a side (2^12 for exact
//! diagonalisation, 4^4 for qudit registers), so everything is a plain
//! row-major `Vec` with straightforward loops.

use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex;
use num_traits::{One, Zero};

use crate::num::Real;
use crate::Error;

/// Dense row-major complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<Complex<T>>,
}

impl<T: Real> CMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex::one();
        }
        m
    }

    pub fn from_fn(
        rows: usize,
        cols: usize,
        mut f: impl FnMut(usize, usize) -> Complex<T>,
    ) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_diagonal(diag: &[Complex<T>]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<Complex<T>>) -> Self {
        assert_eq!(data.len(), rows * cols, "row-major data has wrong length");
        Self { rows, cols, data }
    }

    /// Outer product `|u⟩⟨v|`.
    pub fn outer(u: &[Complex<T>], v: &[Complex<T>]) -> Self {
        Self::from_fn(u.len(), v.len(), |r, c| u[r] * v[c].conj())
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

    pub fn as_slice(&self) -> &[Complex<T>] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex<T>] {
        &mut self.data
    }

    pub fn row(&self, r: usize) -> &[Complex<T>] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<Complex<T>> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn diagonal(&self) -> Vec<Complex<T>> {
        (0..self.rows.min(self.cols))
            .map(|i| self[(i, i)])
            .collect()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    pub fn scale(&self, s: Complex<T>) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| z * s).collect(),
        }
    }

    pub fn scale_real(&self, s: T) -> Self {
        self.scale(Complex::new(s, T::zero()))
    }

    /// `self += s · other`.
    pub fn axpy(&mut self, s: Complex<T>, other: &Self) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    pub fn trace(&self) -> Complex<T> {
        self.diagonal().into_iter().sum()
    }

    pub fn frobenius_norm(&self) -> T {
        self.data.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt()
    }

    /// Largest element-wise deviation from Hermiticity.
    pub fn hermiticity_defect(&self) -> T {
        if !self.is_square() {
            return T::infinity();
        }
        let mut worst = T::zero();
        for r in 0..self.rows {
            for c in r..self.cols {
                let d = (self[(r, c)] - self[(c, r)].conj()).norm();
                if d > worst {
                    worst = d;
                }
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: T) -> bool {
        self.hermiticity_defect() <= tol
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            let out_row = &mut out.data[r * other.cols..(r + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[r * self.cols + k];
                if a.is_zero() {
                    continue;
                }
                let b_row = &other.data[k * other.cols..(k + 1) * other.cols];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[Complex<T>]) -> Vec<Complex<T>> {
        assert_eq!(self.cols, v.len(), "matvec dimension mismatch");
        (0..self.rows)
            .map(|r| self.row(r).iter().zip(v).map(|(&a, &b)| a * b).sum())
            .collect()
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &Self) -> Self {
        let (r2, c2) = (other.rows, other.cols);
        Self::from_fn(self.rows * r2, self.cols * c2, |r, c| {
            self[(r / r2, c / c2)] * other[(r % r2, c % c2)]
        })
    }

    /// `⟨u|M|u⟩` real part, for Hermitian `M`.
    pub fn expectation(&self, u: &[Complex<T>]) -> T {
        let mu = self.matvec(u);
        inner(u, &mu).re
    }
}

impl<T> Index<(usize, usize)> for CMatrix<T> {
    type Output = Complex<T>;
    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &Complex<T> {
        &self.data[r * self.cols + c]
    }
}

impl<T> IndexMut<(usize, usize)> for CMatrix<T> {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Complex<T> {
        &mut self.data[r * self.cols + c]
    }
}

impl<T: Real> Add for &CMatrix<T> {
    type Output = CMatrix<T>;
    fn add(self, rhs: Self) -> CMatrix<T> {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(&a, &b)| a + b)
                .collect(),
        }
    }
}

impl<T: Real> Sub for &CMatrix<T> {
    type Output = CMatrix<T>;
    fn sub(self, rhs: Self) -> CMatrix<T> {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(&a, &b)| a - b)
                .collect(),
        }
    }
}

impl<T: Real> Mul for &CMatrix<T> {
    type Output = CMatrix<T>;
    fn mul(self, rhs: Self) -> CMatrix<T> {
        self.matmul(rhs)
    }
}

/// `⟨u|v⟩` (antilinear in the first argument).
#[inline]
pub fn inner<T: Real>(u: &[Complex<T>], v: &[Complex<T>]) -> Complex<T> {
    debug_assert_eq!(u.len(), v.len());
    let mut acc = Complex::zero();
    for (a, b) in u.iter().zip(v) {
        acc += a.conj() * b;
    }
    acc
}

pub fn norm<T: Real>(u: &[Complex<T>]) -> T {
    u.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt()
}

/// `y += s·x`.
#[inline]
pub fn axpy<T: Real>(y: &mut [Complex<T>], s: Complex<T>, x: &[Complex<T>]) {
    for (a, &b) in y.iter_mut().zip(x) {
        *a += s * b;
    }
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct HermitianEigen<T> {
    pub values: Vec<T>,
    /// Eigenvectors stored as columns, matching `values`.
    pub vectors: CMatrix<T>,
}

impl<T: Real> HermitianEigen<T> {
    pub fn vector(&self, k: usize) -> Vec<Complex<T>> {
        self.vectors.column(k)
    }
}

/// Hermitian eigensolver: Householder reduction to a real symmetric
/// tridiagonal matrix followed by implicit QL iterations.
///
/// Only the lower triangle of `a` is trusted; Hermiticity is not checked here.
pub fn eigh<T: Real>(a: &CMatrix<T>) -> Result<HermitianEigen<T>, Error> {
    if !a.is_square() {
        return Err(Error::Dimension(format!(
            "eigh needs a square matrix, got {}x{}",
            a.rows, a.cols
        )));
    }
    let n = a.rows;
    if n == 0 {
        return Ok(HermitianEigen {
            values: vec![],
            vectors: CMatrix::zeros(0, 0),
        });
    }
    let mut work = a.clone();
    let mut q = CMatrix::<T>::identity(n);
    let zero = Complex::<T>::zero();

    for k in 0..n.saturating_sub(2) {
        let alpha = (k + 1..n)
            .map(|r| work[(r, k)].norm_sqr())
            .sum::<T>()
            .sqrt();
        if alpha <= T::min_positive_value() {
            continue;
        }
        let x0 = work[(k + 1, k)];
        let phase = if x0.norm() > T::zero() {
            x0 / x0.norm()
        } else {
            Complex::one()
        };
        let mut v: Vec<Complex<T>> = (k + 1..n).map(|r| work[(r, k)]).collect();
        v[0] += phase * alpha;
        let v_norm_sqr = T::lit(2.0) * alpha * (alpha + x0.norm());
        let tau = T::lit(2.0) / v_norm_sqr;
        let m = n - k - 1;

        // p = τ A_sub v
        let mut p = vec![zero; m];
        for (i, pi) in p.iter_mut().enumerate() {
            let mut acc = zero;
            for (j, vj) in v.iter().enumerate() {
                acc += work[(k + 1 + i, k + 1 + j)] * vj;
            }
            *pi = acc * tau;
        }
        // q = p - (τ/2)(v†p) v
        let kappa = inner(&v, &p) * (tau / T::lit(2.0));
        let w: Vec<Complex<T>> = p.iter().zip(&v).map(|(&pi, &vi)| pi - kappa * vi).collect();
        for i in 0..m {
            for j in 0..m {
                let upd = v[i] * w[j].conj() + w[i] * v[j].conj();
                work[(k + 1 + i, k + 1 + j)] -= upd;
            }
        }
        work[(k + 1, k)] = -phase * alpha;
        work[(k, k + 1)] = (-phase * alpha).conj();
        for r in k + 2..n {
            work[(r, k)] = zero;
            work[(k, r)] = zero;
        }
        // Q ← Q H
        for r in 0..n {
            let mut s = zero;
            for (j, vj) in v.iter().enumerate() {
                s += q[(r, k + 1 + j)] * vj;
            }
            let s = s * tau;
            for (j, vj) in v.iter().enumerate() {
                q[(r, k + 1 + j)] -= s * vj.conj();
            }
        }
    }

    // Hermitian tridiagonal -> real symmetric tridiagonal via diagonal phases.
    let mut d: Vec<T> = (0..n).map(|i| work[(i, i)].re).collect();
    let mut e = vec![T::zero(); n];
    let mut phases = vec![Complex::<T>::one(); n];
    for i in 0..n - 1 {
        let sub = work[(i + 1, i)];
        let mag = sub.norm();
        e[i] = mag;
        let ph = if mag > T::zero() {
            sub / mag
        } else {
            Complex::one()
        };
        phases[i + 1] = phases[i] * ph;
    }

    let mut z = vec![T::zero(); n * n];
    for i in 0..n {
        z[i * n + i] = T::one();
    }
    tridiagonal_ql(&mut d, &mut e, &mut z, n)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].partial_cmp(&d[j]).unwrap_or(std::cmp::Ordering::Equal));
    let values: Vec<T> = order.iter().map(|&i| d[i]).collect();

    // V = Q · D · Z
    let mut qd = q;
    for r in 0..n {
        for c in 0..n {
            qd[(r, c)] *= phases[c];
        }
    }
    let mut vectors = CMatrix::zeros(n, n);
    for (new_c, &old_c) in order.iter().enumerate() {
        for r in 0..n {
            let mut acc = zero;
            for k in 0..n {
                let zk = z[k * n + old_c];
                if zk != T::zero() {
                    acc += qd[(r, k)] * zk;
                }
            }
            vectors[(r, new_c)] = acc;
        }
    }
    Ok(HermitianEigen { values, vectors })
}

/// Implicit QL with Wilkinson-style shifts on a symmetric tridiagonal
/// matrix. `e[i]` couples rows `i` and `i+1`; `z` (row-major n×n) accumulates
/// the rotations.
fn tridiagonal_ql<T: Real>(d: &mut [T], e: &mut [T], z: &mut [T], n: usize) -> Result<(), Error> {
    if n == 0 {
        return Ok(());
    }
    e[n - 1] = T::zero();
    let two = T::lit(2.0);
    for l in 0..n {
        let mut iterations = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= T::epsilon() * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iterations += 1;
            if iterations > 60 {
                return Err(Error::NoConvergence(
                    "tridiagonal QL exceeded 60 iterations".into(),
                ));
            }
            let mut g = (d[l + 1] - d[l]) / (two * e[l]);
            let mut r = g.hypot(T::one());
            let signed_r = if g >= T::zero() { r.abs() } else { -r.abs() };
            g = d[m] - d[l] + e[l] / (g + signed_r);
            let (mut s, mut c, mut p) = (T::one(), T::one(), T::zero());
            let mut underflow = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == T::zero() {
                    d[i + 1] -= p;
                    e[m] = T::zero();
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + two * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                for k in 0..n {
                    let f = z[k * n + i + 1];
                    z[k * n + i + 1] = s * z[k * n + i] + c * f;
                    z[k * n + i] = c * z[k * n + i] - s * f;
                }
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = T::zero();
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    fn residual(a: &CMatrix<f64>, eig: &HermitianEigen<f64>) -> f64 {
        let n = a.rows();
        let mut worst = 0.0_f64;
        for k in 0..n {
            let v = eig.vector(k);
            let av = a.matvec(&v);
            for i in 0..n {
                worst = worst.max((av[i] - v[i] * eig.values[k]).norm());
            }
        }
        worst
    }

    #[test]
    fn diagonal_matrix_sorted() {
        let a = CMatrix::from_diagonal(&[c(3.0, 0.0), c(-1.0, 0.0), c(2.0, 0.0)]);
        let eig = eigh(&a).unwrap();
        assert_eq!(eig.values, vec![-1.0, 2.0, 3.0]);
        assert!(residual(&a, &eig) < 1e-14);
    }

    #[test]
    fn pauli_y_eigenpairs() {
        let y = CMatrix::from_row_major(
            2,
            2,
            vec![c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0)],
        );
        let eig = eigh(&y).unwrap();
        assert!((eig.values[0] + 1.0).abs() < 1e-14);
        assert!((eig.values[1] - 1.0).abs() < 1e-14);
        assert!(residual(&y, &eig) < 1e-14);
    }

    #[test]
    fn kron_dimensions_and_entries() {
        let x = CMatrix::from_row_major(
            2,
            2,
            vec![c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)],
        );
        let i2 = CMatrix::<f64>::identity(2);
        let xi = x.kron(&i2);
        assert_eq!(xi.rows(), 4);
        assert_eq!(xi[(0, 2)], c(1.0, 0.0));
        assert_eq!(xi[(0, 1)], c(0.0, 0.0));
    }

    fn hermitian_strategy(max_n: usize) -> impl Strategy<Value = CMatrix<f64>> {
        (1..=max_n).prop_flat_map(|n| {
            proptest::collection::vec(-1.0f64..1.0, 2 * n * n).prop_map(move |raw| {
                let m = CMatrix::from_fn(n, n, |r, c| {
                    Complex::new(raw[2 * (r * n + c)], raw[2 * (r * n + c) + 1])
                });
                let h = &m + &m.adjoint();
                h.scale_real(0.5)
            })
        })
    }

    proptest! {
        #[test]
        fn eigh_reconstructs_random_hermitian(a in hermitian_strategy(9)) {
            let eig = eigh(&a).unwrap();
            prop_assert!(residual(&a, &eig) < 1e-11);
            let vtv = &eig.vectors.adjoint() * &eig.vectors;
            let defect = (&vtv - &CMatrix::identity(a.rows())).frobenius_norm();
            prop_assert!(defect < 1e-11);
            prop_assert!(eig.values.windows(2).all(|w| w[0] <= w[1]));
        }
    }
}
