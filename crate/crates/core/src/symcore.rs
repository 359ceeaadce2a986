//! Symmetric matrices, ordered spectra, PSD projection and the `svec`
//! isometry between `Sⁿ` and `R^{n(n+1)/2}`.

use alloc::vec::Vec;

use crate::dense::{jacobi_eig, Mat};
use crate::error::{Error, Result};

const SQRT2: f64 = core::f64::consts::SQRT_2;

/// Dense symmetric matrix stored in full.
#[derive(Clone, Debug, PartialEq)]
pub struct SymMatrix {
    m: Mat<f64>,
}

/// Eigenvalues in descending order with matching orthonormal eigenvectors.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    pub values: Vec<f64>,
    pub vectors: Mat<f64>,
}

impl Spectrum {
    /// `Q diag(f(λ)) Qᵀ`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> SymMatrix {
        let n = self.values.len();
        let q = &self.vectors;
        let mut out = Mat::zeros(n, n);
        for (k, &lam) in self.values.iter().enumerate() {
            let w = f(lam);
            if w == 0.0 {
                continue;
            }
            for i in 0..n {
                let a = w * q[(i, k)];
                for j in 0..n {
                    out[(i, j)] += a * q[(j, k)];
                }
            }
        }
        SymMatrix::from_mat_unchecked(out.sym_part())
    }

    pub fn reconstruct(&self) -> SymMatrix {
        self.reconstruct_with(|l| l)
    }
}

impl SymMatrix {
    /// Builds from row-major entries, symmetrizing. Rejects non-finite input
    /// and asymmetry above `1e-9` relative to the largest entry.
    pub fn new(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::InvalidDimension {
                expected: n * n,
                found: data.len(),
            });
        }
        Self::from_mat(&Mat::from_vec(n, n, data))
    }

    pub fn from_mat(m: &Mat<f64>) -> Result<Self> {
        if m.rows() != m.cols() {
            return Err(Error::InvalidDimension {
                expected: m.rows(),
                found: m.cols(),
            });
        }
        if !m.is_finite() {
            return Err(Error::InvalidMatrix);
        }
        let n = m.rows();
        let scale = m.max_abs();
        for i in 0..n {
            for j in i + 1..n {
                if libm::fabs(m[(i, j)] - m[(j, i)]) > 1e-9 * scale {
                    return Err(Error::InvalidMatrix);
                }
            }
        }
        Ok(Self::from_mat_unchecked(m.sym_part()))
    }

    /// Caller guarantees exact symmetry and finiteness.
    pub(crate) fn from_mat_unchecked(m: Mat<f64>) -> Self {
        SymMatrix { m }
    }

    pub fn zeros(n: usize) -> Self {
        SymMatrix { m: Mat::zeros(n, n) }
    }

    pub fn identity(n: usize) -> Self {
        SymMatrix { m: Mat::identity(n) }
    }

    pub fn diag(d: &[f64]) -> Self {
        let n = d.len();
        SymMatrix {
            m: Mat::from_fn(n, n, |i, j| if i == j { d[i] } else { 0.0 }),
        }
    }

    /// `e_i e_jᵀ` symmetrized, so that `⟨E, X⟩ = X_ij`.
    pub fn unit(n: usize, i: usize, j: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        if i == j {
            m[(i, i)] = 1.0;
        } else {
            m[(i, j)] = 0.5;
            m[(j, i)] = 0.5;
        }
        SymMatrix { m }
    }

    /// `v vᵀ`.
    pub fn outer(v: &[f64]) -> Self {
        let n = v.len();
        SymMatrix {
            m: Mat::from_fn(n, n, |i, j| v[i] * v[j]),
        }
    }

    pub fn n(&self) -> usize {
        self.m.rows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[(i, j)]
    }

    pub fn as_mat(&self) -> &Mat<f64> {
        &self.m
    }

    pub fn into_mat(self) -> Mat<f64> {
        self.m
    }

    /// Row-major entries.
    pub fn as_slice(&self) -> &[f64] {
        self.m.as_slice()
    }

    pub fn frobenius(&self) -> f64 {
        self.m.frob()
    }

    /// `⟨X, Y⟩ = trace(XY)`.
    pub fn inner(&self, other: &SymMatrix) -> f64 {
        assert_eq!(self.n(), other.n(), "inner: orders differ");
        crate::dense::dot(self.m.as_slice(), other.m.as_slice())
    }

    pub fn add(&self, other: &SymMatrix) -> SymMatrix {
        SymMatrix { m: self.m.add(&other.m) }
    }

    pub fn sub(&self, other: &SymMatrix) -> SymMatrix {
        SymMatrix { m: self.m.sub(&other.m) }
    }

    pub fn scale(&self, s: f64) -> SymMatrix {
        SymMatrix { m: self.m.scale(s) }
    }

    pub fn trace(&self) -> f64 {
        self.m.trace()
    }

    /// `Vᵀ X V` for an `n × r` matrix `V`.
    pub fn congruence_t(&self, v: &Mat<f64>) -> SymMatrix {
        let xv = self.m.matmul(v);
        SymMatrix { m: v.tmatmul(&xv).sym_part() }
    }

    /// `V X Vᵀ` for an `n × r` matrix `V` (self has order `r`).
    pub fn congruence(&self, v: &Mat<f64>) -> SymMatrix {
        let vx = v.matmul(&self.m);
        SymMatrix { m: vx.matmul(&v.transpose()).sym_part() }
    }
}

/// Spectral decomposition with `λ₁ ≥ … ≥ λₙ`.
pub fn eig_desc(x: &SymMatrix) -> Result<Spectrum> {
    if !x.m.is_finite() {
        return Err(Error::InvalidMatrix);
    }
    let (values, vectors) = jacobi_eig(&x.m);
    Ok(Spectrum { values, vectors })
}

/// Frobenius distance to the PSD cone, `‖min(λ, 0)‖₂`.
pub fn dist_psd(x: &SymMatrix) -> Result<f64> {
    let s = eig_desc(x)?;
    Ok(neg_part_norm(&s.values))
}

pub(crate) fn neg_part_norm(values: &[f64]) -> f64 {
    libm::sqrt(values.iter().filter(|&&l| l < 0.0).map(|l| l * l).sum())
}

/// Nearest PSD matrix in Frobenius norm.
pub fn proj_psd(x: &SymMatrix) -> Result<SymMatrix> {
    let s = eig_desc(x)?;
    Ok(s.reconstruct_with(|l| if l > 0.0 { l } else { 0.0 }))
}

pub fn svec_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Upper triangle row by row with off-diagonals scaled by `√2`.
pub fn svec(x: &SymMatrix) -> Vec<f64> {
    svec_generic(x.as_mat())
}

/// Inverse of [`svec`].
pub fn smat(n: usize, v: &[f64]) -> Result<SymMatrix> {
    if v.len() != svec_len(n) {
        return Err(Error::InvalidDimension {
            expected: svec_len(n),
            found: v.len(),
        });
    }
    if v.iter().any(|a| !a.is_finite()) {
        return Err(Error::InvalidMatrix);
    }
    Ok(SymMatrix::from_mat_unchecked(smat_generic(n, v)))
}

pub(crate) fn smat_generic<T: crate::Scalar>(n: usize, v: &[T]) -> Mat<T> {
    let inv = T::from_f64(core::f64::consts::FRAC_1_SQRT_2);
    let mut m = Mat::zeros(n, n);
    let mut k = 0;
    for i in 0..n {
        m[(i, i)] = v[k];
        k += 1;
        for j in i + 1..n {
            let a = v[k] * inv;
            m[(i, j)] = a;
            m[(j, i)] = a;
            k += 1;
        }
    }
    m
}

pub(crate) fn svec_generic<T: crate::Scalar>(x: &Mat<T>) -> Vec<T> {
    let n = x.rows();
    let s2 = T::from_f64(SQRT2);
    let mut v = Vec::with_capacity(svec_len(n));
    for i in 0..n {
        v.push(x[(i, i)]);
        for j in i + 1..n {
            v.push(s2 * x[(i, j)]);
        }
    }
    v
}
