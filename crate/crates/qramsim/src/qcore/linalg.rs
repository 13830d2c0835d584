//! Dense complex matrices and a Jacobi Hermitian eigensolver.

use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex64;
use rayon::prelude::*;

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Row-major dense complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(d: usize) -> Self {
        Self::from_diag(&vec![ONE; d])
    }

    pub fn from_diag(diag: &[C64]) -> Self {
        let d = diag.len();
        let mut m = Self::zeros(d, d);
        for (i, &v) in diag.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn from_real_diag(diag: &[f64]) -> Self {
        Self::from_diag(&diag.iter().map(|&v| C64::new(v, 0.0)).collect::<Vec<_>>())
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Mat { rows, cols, data }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<C64>) -> Self {
        assert_eq!(data.len(), rows * cols);
        Mat { rows, cols, data }
    }

    /// `|v⟩⟨w|`.
    pub fn outer(v: &[C64], w: &[C64]) -> Self {
        Self::from_fn(v.len(), w.len(), |r, c| v[r] * w[c].conj())
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

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn row(&self, r: usize) -> &[C64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<C64> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn diag(&self) -> Vec<C64> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)])
    }

    pub fn conj(&self) -> Self {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn trace(&self) -> C64 {
        self.diag().iter().sum()
    }

    pub fn scale(&self, s: C64) -> Self {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    /// `self += s * other`.
    pub fn add_scaled(&mut self, other: &Mat, s: C64) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b * s;
        }
    }

    pub fn matmul(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let (n, k, m) = (self.rows, self.cols, other.cols);
        let mut out = vec![ZERO; n * m];
        let body = |(r, out_row): (usize, &mut [C64])| {
            let a_row = &self.data[r * k..(r + 1) * k];
            for (j, &a) in a_row.iter().enumerate() {
                if a == ZERO {
                    continue;
                }
                let b_row = &other.data[j * m..(j + 1) * m];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        };
        if n * k * m >= 1 << 21 {
            out.par_chunks_mut(m.max(1)).enumerate().for_each(body);
        } else {
            out.chunks_mut(m.max(1)).enumerate().for_each(body);
        }
        Mat {
            rows: n,
            cols: m,
            data: out,
        }
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|r| self.row(r).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `U ρ U†`.
    pub fn conjugate_by(&self, u: &Mat) -> Mat {
        u.matmul(self).matmul(&u.adjoint())
    }

    /// Tensor product with `self` on the low (least significant) index.
    pub fn tensor(&self, high: &Mat) -> Mat {
        let (r1, c1) = (self.rows, self.cols);
        Mat::from_fn(r1 * high.rows, c1 * high.cols, |r, c| {
            self[(r % r1, c % c1)] * high[(r / r1, c / c1)]
        })
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Mat) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn hermiticity_error(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut worst = 0.0f64;
        for r in 0..self.rows {
            for c in r..self.cols {
                worst = worst.max((self[(r, c)] - self[(c, r)].conj()).norm());
            }
        }
        worst
    }

    /// Hermitian part `(M + M†)/2`.
    pub fn hermitian_part(&self) -> Mat {
        Mat::from_fn(self.rows, self.cols, |r, c| {
            (self[(r, c)] + self[(c, r)].conj()) * 0.5
        })
    }

    /// Schur (elementwise) product.
    pub fn schur(&self, other: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a * b).collect(),
        }
    }

    /// Sum of absolute eigenvalues; the matrix must be Hermitian.
    pub fn trace_norm_hermitian(&self) -> f64 {
        eigvalsh(self).iter().map(|v| v.abs()).sum()
    }

    /// `‖M†M − I‖_max`.
    pub fn unitarity_error(&self) -> f64 {
        self.adjoint().matmul(self).max_abs_diff(&Mat::identity(self.cols))
    }
}

impl Index<(usize, usize)> for Mat {
    type Output = C64;
    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for Mat {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        &mut self.data[r * self.cols + c]
    }
}

impl Add for &Mat {
    type Output = Mat;
    fn add(self, rhs: &Mat) -> Mat {
        let mut out = self.clone();
        out.add_scaled(rhs, ONE);
        out
    }
}

impl Sub for &Mat {
    type Output = Mat;
    fn sub(self, rhs: &Mat) -> Mat {
        let mut out = self.clone();
        out.add_scaled(rhs, -ONE);
        out
    }
}

impl Mul for &Mat {
    type Output = Mat;
    fn mul(self, rhs: &Mat) -> Mat {
        self.matmul(rhs)
    }
}

/// Eigendecomposition of a Hermitian matrix.
#[derive(Clone, Debug)]
pub struct Eigh {
    /// Eigenvalues in descending order.
    pub values: Vec<f64>,
    /// Column `k` is the eigenvector of `values[k]`.
    pub vectors: Mat,
}

impl Eigh {
    pub fn vector(&self, k: usize) -> Vec<C64> {
        self.vectors.column(k)
    }
}

const JACOBI_TOL: f64 = 1e-10;
const MAX_SWEEPS: usize = 100;

fn off_diagonal_norm(a: &Mat) -> f64 {
    let n = a.rows;
    let mut s = 0.0;
    for r in 0..n {
        for c in 0..n {
            if r != c {
                s += a[(r, c)].norm_sqr();
            }
        }
    }
    s.sqrt()
}

fn jacobi(m: &Mat, want_vectors: bool) -> (Vec<f64>, Option<Mat>) {
    assert!(m.is_square(), "eigh needs a square matrix");
    let n = m.rows;
    let mut a = m.hermitian_part();
    let mut v = want_vectors.then(|| Mat::identity(n));
    let scale = a.frobenius_norm().max(f64::MIN_POSITIVE);
    // Relative to the input scale; the final accuracy is far below the
    // tolerance because quadratic convergence overshoots it.
    let target = JACOBI_TOL * 1e-4 * scale;

    for _ in 0..MAX_SWEEPS {
        if off_diagonal_norm(&a) <= target {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                let r = apq.norm();
                if r <= f64::MIN_POSITIVE || r < 1e-300 * scale {
                    continue;
                }
                let phase = apq / r;
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                let theta = (aqq - app) / (2.0 * r);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // U on the (p, q) block: [[c, s], [-s·conj(φ), c·conj(φ)]]
                let upp = C64::new(c, 0.0);
                let upq = C64::new(s, 0.0);
                let uqp = -phase.conj() * s;
                let uqq = phase.conj() * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = akp * upp + akq * uqp;
                    a[(k, q)] = akp * upq + akq * uqq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = upp.conj() * apk + uqp.conj() * aqk;
                    a[(q, k)] = upq.conj() * apk + uqq.conj() * aqk;
                }
                a[(p, q)] = ZERO;
                a[(q, p)] = ZERO;
                a[(p, p)] = C64::new(a[(p, p)].re, 0.0);
                a[(q, q)] = C64::new(a[(q, q)].re, 0.0);
                if let Some(v) = v.as_mut() {
                    for k in 0..n {
                        let vkp = v[(k, p)];
                        let vkq = v[(k, q)];
                        v[(k, p)] = vkp * upp + vkq * uqp;
                        v[(k, q)] = vkp * upq + vkq * uqq;
                    }
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].re.total_cmp(&a[(i, i)].re));
    let values = order.iter().map(|&i| a[(i, i)].re).collect();
    let vectors = v.map(|v| Mat::from_fn(n, n, |r, c| v[(r, order[c])]));
    (values, vectors)
}

/// Hermitian eigendecomposition (the anti-Hermitian part is ignored).
pub fn eigh(m: &Mat) -> Eigh {
    let (values, vectors) = jacobi(m, true);
    Eigh {
        values,
        vectors: vectors.expect("vectors requested"),
    }
}

/// Eigenvalues only, descending.
pub fn eigvalsh(m: &Mat) -> Vec<f64> {
    jacobi(m, false).0
}

pub fn inner(v: &[C64], w: &[C64]) -> C64 {
    v.iter().zip(w).map(|(a, b)| a.conj() * b).sum()
}

pub fn norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}
