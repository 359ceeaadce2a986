//! Small dense kernels: row-major matrices, Jacobi eigensolver, Cholesky and
//! Householder QR with column pivoting.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use crate::scalar::{Dd, Scalar};

#[derive(Clone, Debug, PartialEq)]
pub struct Mat<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Mat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![T::ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::ONE;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Mat { rows, cols, data }
    }

    /// Panics if `data.len() != rows * cols`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols, "Mat::from_vec: wrong length");
        Mat { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Self {
        Mat::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &Mat<T>) -> Mat<T> {
        assert_eq!(self.cols, other.rows, "matmul: inner dimensions");
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::ZERO {
                    continue;
                }
                let orow = other.row(k);
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, &o) in dst.iter_mut().zip(orow) {
                    *d += a * o;
                }
            }
        }
        out
    }

    /// `selfᵀ · other`.
    pub fn tmatmul(&self, other: &Mat<T>) -> Mat<T> {
        assert_eq!(self.rows, other.rows, "tmatmul: row counts");
        let mut out = Mat::zeros(self.cols, other.cols);
        for k in 0..self.rows {
            let srow = self.row(k);
            let orow = other.row(k);
            for (i, &a) in srow.iter().enumerate() {
                if a == T::ZERO {
                    continue;
                }
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, &o) in dst.iter_mut().zip(orow) {
                    *d += a * o;
                }
            }
        }
        out
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(self.cols, x.len(), "matvec: length");
        (0..self.rows)
            .map(|i| {
                let mut s = T::ZERO;
                for (&a, &b) in self.row(i).iter().zip(x) {
                    s += a * b;
                }
                s
            })
            .collect()
    }

    pub fn add(&self, other: &Mat<T>) -> Mat<T> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Mat<T>) -> Mat<T> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, s: T) -> Mat<T> {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&a| a * s).collect(),
        }
    }

    fn zip_with(&self, other: &Mat<T>, f: impl Fn(T, T) -> T) -> Mat<T> {
        assert!(self.rows == other.rows && self.cols == other.cols, "shape mismatch");
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn frob_sq(&self) -> T {
        let mut s = T::ZERO;
        for &a in &self.data {
            s += a * a;
        }
        s
    }

    pub fn frob(&self) -> T {
        self.frob_sq().sqrt()
    }

    pub fn trace(&self) -> T {
        let mut s = T::ZERO;
        for i in 0..self.rows.min(self.cols) {
            s += self[(i, i)];
        }
        s
    }

    /// `(A + Aᵀ)/2`; square matrices only.
    pub fn sym_part(&self) -> Mat<T> {
        let half = T::from_f64(0.5);
        Mat::from_fn(self.rows, self.cols, |i, j| (self[(i, j)] + self[(j, i)]) * half)
    }

    pub fn to_f64(&self) -> Mat<f64> {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|a| a.to_f64()).collect(),
        }
    }

    pub fn cast<U: Scalar>(&self) -> Mat<U> {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|a| U::from_f64(a.to_f64())).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|a| a.is_finite())
    }
}

impl Mat<f64> {
    pub fn to_dd(&self) -> Mat<Dd> {
        self.cast()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, &a| m.max(libm::fabs(a)))
    }
}

impl<T> Index<(usize, usize)> for Mat<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Mat<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut s = T::ZERO;
    for (&x, &y) in a.iter().zip(b) {
        s += x * y;
    }
    s
}

pub fn norm2<T: Scalar>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

/// Eigenpairs of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in descending order (stable with respect to the
/// original diagonal position on ties) and eigenvectors as columns. A rotation
/// is skipped only when the off-diagonal entry is negligible relative to the
/// geometric mean of the two diagonal entries, which gives high relative
/// accuracy on graded positive definite matrices.
pub fn jacobi_eig<T: Scalar>(a: &Mat<T>) -> (Vec<T>, Mat<T>) {
    let n = a.rows();
    assert_eq!(n, a.cols(), "jacobi_eig: square input");
    let mut m = a.sym_part();
    let mut v = Mat::<T>::identity(n);
    let scale = m.frob().to_f64();
    let eps = T::EPS;
    let floor = eps * eps * scale.max(f64::MIN_POSITIVE);

    for _sweep in 0..100 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                let apq_abs = apq.abs().to_f64();
                if apq_abs == 0.0 {
                    continue;
                }
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                let gm = libm::sqrt(libm::fabs(app.to_f64() * aqq.to_f64()));
                if apq_abs <= eps * gm || apq_abs <= floor {
                    m[(p, q)] = T::ZERO;
                    m[(q, p)] = T::ZERO;
                    continue;
                }
                rotated = true;
                let theta = (aqq - app) / (T::from_f64(2.0) * apq);
                let th = theta.to_f64();
                let t = if libm::fabs(th) > 1e150 {
                    T::ONE / (T::from_f64(2.0) * theta)
                } else {
                    let r = (theta * theta + T::ONE).sqrt();
                    if th >= 0.0 {
                        T::ONE / (theta + r)
                    } else {
                        -T::ONE / (r - theta)
                    }
                };
                let c = T::ONE / (t * t + T::ONE).sqrt();
                let s = t * c;
                let tau = s / (T::ONE + c);
                m[(p, p)] = app - t * apq;
                m[(q, q)] = aqq + t * apq;
                m[(p, q)] = T::ZERO;
                m[(q, p)] = T::ZERO;
                for r in 0..n {
                    if r != p && r != q {
                        let arp = m[(r, p)];
                        let arq = m[(r, q)];
                        let nrp = arp - s * (arq + tau * arp);
                        let nrq = arq + s * (arp - tau * arq);
                        m[(r, p)] = nrp;
                        m[(p, r)] = nrp;
                        m[(r, q)] = nrq;
                        m[(q, r)] = nrq;
                    }
                }
                for r in 0..n {
                    let vrp = v[(r, p)];
                    let vrq = v[(r, q)];
                    v[(r, p)] = vrp - s * (vrq + tau * vrp);
                    v[(r, q)] = vrq + s * (vrp - tau * vrq);
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    // Stable sort keeps diagonal inputs in a deterministic arrangement.
    order.sort_by(|&i, &j| {
        m[(j, j)]
            .partial_cmp(&m[(i, i)])
            .unwrap_or(core::cmp::Ordering::Equal)
    });
    let values = order.iter().map(|&i| m[(i, i)]).collect();
    let vectors = Mat::from_fn(n, n, |r, c| v[(r, order[c])]);
    (values, vectors)
}

/// Lower Cholesky factor, or `None` when the matrix is not numerically
/// positive definite.
pub fn cholesky<T: Scalar>(a: &Mat<T>) -> Option<Mat<T>> {
    let n = a.rows();
    let mut l = Mat::<T>::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > T::ZERO) || !d.is_finite() {
            return None;
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / djj;
        }
    }
    Some(l)
}

/// Solves `L X = B` for lower-triangular `L`.
pub fn solve_lower<T: Scalar>(l: &Mat<T>, b: &Mat<T>) -> Mat<T> {
    let n = l.rows();
    let mut x = b.clone();
    for c in 0..b.cols() {
        for i in 0..n {
            let mut s = x[(i, c)];
            for k in 0..i {
                s -= l[(i, k)] * x[(k, c)];
            }
            x[(i, c)] = s / l[(i, i)];
        }
    }
    x
}

/// Inverse of a symmetric positive definite matrix via Cholesky.
pub fn spd_inverse<T: Scalar>(a: &Mat<T>) -> Option<Mat<T>> {
    let l = cholesky(a)?;
    let linv = solve_lower(&l, &Mat::identity(a.rows()));
    Some(linv.tmatmul(&linv))
}

/// Householder QR with column pivoting, `A P = Q R`.
#[derive(Clone, Debug)]
pub struct PivotedQr {
    m: usize,
    n: usize,
    /// Householder vectors below the diagonal, `R` on and above.
    qr: Mat<f64>,
    beta: Vec<f64>,
    perm: Vec<usize>,
    rank: usize,
}

impl PivotedQr {
    /// Factorizes `a` and determines the numerical rank as the number of
    /// diagonal entries of `R` above `max(rtol·|R₀₀|, atol)`.
    pub fn new(a: &Mat<f64>, rtol: f64, atol: f64) -> Self {
        let (m, n) = (a.rows(), a.cols());
        let mut qr = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let steps = m.min(n);
        let mut beta = vec![0.0; steps];
        let mut norms: Vec<f64> = (0..n).map(|j| col_norm_sq(&qr, j, 0)).collect();

        for k in 0..steps {
            // Recompute norms exactly; the matrices here are small.
            for (j, nj) in norms.iter_mut().enumerate().skip(k) {
                *nj = col_norm_sq(&qr, j, k);
            }
            let mut piv = k;
            for j in k + 1..n {
                if norms[j] > norms[piv] {
                    piv = j;
                }
            }
            if piv != k {
                for i in 0..m {
                    let t = qr[(i, k)];
                    qr[(i, k)] = qr[(i, piv)];
                    qr[(i, piv)] = t;
                }
                perm.swap(k, piv);
                norms.swap(k, piv);
            }
            let alpha = libm::sqrt(col_norm_sq(&qr, k, k));
            if alpha == 0.0 {
                beta[k] = 0.0;
                continue;
            }
            let x0 = qr[(k, k)];
            let r = if x0 > 0.0 { -alpha } else { alpha };
            let v0 = x0 - r;
            // v = (1, x[k+1..]/v0), H = I - beta v vᵀ
            for i in k + 1..m {
                qr[(i, k)] /= v0;
            }
            beta[k] = -v0 / r;
            qr[(k, k)] = r;
            for j in k + 1..n {
                let mut s = qr[(k, j)];
                for i in k + 1..m {
                    s += qr[(i, k)] * qr[(i, j)];
                }
                s *= beta[k];
                qr[(k, j)] -= s;
                for i in k + 1..m {
                    let vik = qr[(i, k)];
                    qr[(i, j)] -= s * vik;
                }
            }
        }

        let r00 = if steps > 0 { libm::fabs(qr[(0, 0)]) } else { 0.0 };
        let thr = (rtol * r00).max(atol);
        let mut rank = 0;
        while rank < steps && libm::fabs(qr[(rank, rank)]) > thr {
            rank += 1;
        }
        PivotedQr { m, n, qr, beta, perm, rank }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    pub fn rows(&self) -> usize {
        self.m
    }

    pub fn cols(&self) -> usize {
        self.n
    }

    pub fn r(&self, i: usize, j: usize) -> f64 {
        self.qr[(i, j)]
    }

    /// Overwrites `x` (length `m`) with `Qᵀ x`.
    pub fn apply_qt(&self, x: &mut [f64]) {
        for k in 0..self.beta.len() {
            self.reflect(k, x);
        }
    }

    /// Overwrites `x` (length `m`) with `Q x`.
    pub fn apply_q(&self, x: &mut [f64]) {
        for k in (0..self.beta.len()).rev() {
            self.reflect(k, x);
        }
    }

    fn reflect(&self, k: usize, x: &mut [f64]) {
        if self.beta[k] == 0.0 {
            return;
        }
        let mut s = x[k];
        for i in k + 1..self.m {
            s += self.qr[(i, k)] * x[i];
        }
        s *= self.beta[k];
        x[k] -= s;
        for i in k + 1..self.m {
            x[i] -= s * self.qr[(i, k)];
        }
    }

    /// Basic least-squares solution of `min ‖A x − b‖` using the leading
    /// `rank` columns; remaining components are zero.
    pub fn solve_ls(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.m);
        let mut c = b.to_vec();
        self.apply_qt(&mut c);
        let k = self.rank;
        let mut z = vec![0.0; k];
        for i in (0..k).rev() {
            let mut s = c[i];
            for j in i + 1..k {
                s -= self.qr[(i, j)] * z[j];
            }
            z[i] = s / self.qr[(i, i)];
        }
        let mut x = vec![0.0; self.n];
        for (i, zi) in z.into_iter().enumerate() {
            x[self.perm[i]] = zi;
        }
        x
    }

    /// Solves `R₁₁ᵀ z = c` for the leading `rank × rank` block.
    pub fn solve_r11_t(&self, c: &[f64]) -> Vec<f64> {
        let k = self.rank;
        let mut z = vec![0.0; k];
        for i in 0..k {
            let mut s = c[i];
            for j in 0..i {
                s -= self.qr[(j, i)] * z[j];
            }
            z[i] = s / self.qr[(i, i)];
        }
        z
    }

    /// Solves `R₁₁ z = c` for the leading `rank × rank` block.
    pub fn solve_r11(&self, c: &[f64]) -> Vec<f64> {
        let k = self.rank;
        let mut z = vec![0.0; k];
        for i in (0..k).rev() {
            let mut s = c[i];
            for j in i + 1..k {
                s -= self.qr[(i, j)] * z[j];
            }
            z[i] = s / self.qr[(i, i)];
        }
        z
    }

    /// Columns `rank..m` of `Q`: an orthonormal basis of the orthogonal
    /// complement of the range of `A`.
    pub fn complement_basis(&self) -> Mat<f64> {
        let k = self.rank;
        let mut out = Mat::zeros(self.m, self.m - k);
        let mut e = vec![0.0; self.m];
        for c in k..self.m {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[c] = 1.0;
            self.apply_q(&mut e);
            for i in 0..self.m {
                out[(i, c - k)] = e[i];
            }
        }
        out
    }
}

fn col_norm_sq(a: &Mat<f64>, j: usize, from: usize) -> f64 {
    let mut s = 0.0;
    for i in from..a.rows() {
        s += a[(i, j)] * a[(i, j)];
    }
    s
}

/// Least squares `min ‖A x − b‖` with column equilibration, so that columns of
/// very different scale are not mistaken for rank deficiency.
pub fn lstsq_scaled(a: &Mat<f64>, b: &[f64], rtol: f64) -> Vec<f64> {
    let (m, n) = (a.rows(), a.cols());
    let scales: Vec<f64> = (0..n)
        .map(|j| {
            let s = libm::sqrt(col_norm_sq(a, j, 0));
            if s > 0.0 {
                s
            } else {
                1.0
            }
        })
        .collect();
    let scaled = Mat::from_fn(m, n, |i, j| a[(i, j)] / scales[j]);
    let qr = PivotedQr::new(&scaled, rtol, 0.0);
    let mut x = qr.solve_ls(b);
    for (xj, s) in x.iter_mut().zip(&scales) {
        *xj /= s;
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    fn approx(a: f64, b: f64, tol: f64) -> bool {
        libm::fabs(a - b) <= tol
    }

    #[test]
    fn jacobi_two_by_two() {
        let a = Mat::from_vec(2, 2, vec![0.0, 1.0, 1.0, 0.0]);
        let (vals, vecs) = jacobi_eig(&a);
        assert!(approx(vals[0], 1.0, 1e-15) && approx(vals[1], -1.0, 1e-15));
        let qtq = vecs.tmatmul(&vecs);
        assert!(qtq.sub(&Mat::identity(2)).frob() < 1e-14);
    }

    #[test]
    fn jacobi_graded_relative_accuracy() {
        // Graded PD matrix with a tiny eigenvalue; relative accuracy matters.
        let e = 1e-14;
        let a = Mat::from_vec(2, 2, vec![1.0, 1e-8, 1e-8, 2.0 * e]);
        let (vals, _) = jacobi_eig(&a);
        let det = 2.0 * e - 1e-16;
        let small = det / vals[0];
        assert!(libm::fabs(vals[1] - small) <= 1e-12 * small);
    }

    #[test]
    fn dd_jacobi_matches_f64_on_easy_input() {
        let a = Mat::from_vec(3, 3, vec![4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 1.0]);
        let (v1, _) = jacobi_eig(&a);
        let (v2, _) = jacobi_eig(&a.to_dd());
        for (x, y) in v1.iter().zip(&v2) {
            assert!(approx(*x, y.to_f64(), 1e-14));
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = Mat::from_vec(2, 2, vec![1.0, 2.0, 2.0, 1.0]);
        assert!(cholesky(&a).is_none());
        let b = Mat::from_vec(2, 2, vec![4.0, 2.0, 2.0, 3.0]);
        let l = cholesky(&b).unwrap();
        assert!(l.matmul(&l.transpose()).sub(&b).frob() < 1e-14);
    }

    #[test]
    fn qr_least_squares_and_rank() {
        // Third column is the sum of the first two.
        let a = Mat::from_vec(
            4,
            3,
            vec![1.0, 0.0, 1.0, 0.0, 1.0, 1.0, 1.0, 1.0, 2.0, 2.0, 0.0, 2.0],
        );
        let qr = PivotedQr::new(&a, 1e-12, 0.0);
        assert_eq!(qr.rank(), 2);
        let b = [1.0, 2.0, 3.0, 2.0];
        let x = qr.solve_ls(&b);
        assert!(norm2(&a.matvec(&x).iter().zip(&b).map(|(p, q)| p - q).collect::<Vec<_>>()) < 1e-12);
        let comp = qr.complement_basis();
        assert_eq!(comp.cols(), 2);
        let proj = a.transpose().matmul(&comp);
        assert!(proj.frob() < 1e-12);
    }

    #[test]
    fn scaled_lstsq_handles_disparate_columns() {
        // Unscaled, rtol = 1e-10 would drop the second column as noise.
        // Its coefficient is only resolvable to about eps·‖b‖/1e-13.
        let a = Mat::from_vec(3, 2, vec![1.0, 0.0, 0.0, 1e-13, 0.0, 1e-13]);
        let x = lstsq_scaled(&a, &[1.0, 2e-13, 2e-13], 1e-10);
        assert!(approx(x[0], 1.0, 1e-12) && approx(x[1], 2.0, 1e-2), "{x:?}");
        let plain = PivotedQr::new(&a, 1e-10, 0.0);
        assert_eq!(plain.rank(), 1);
    }
}
