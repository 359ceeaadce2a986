//! Spectrahedra `F(A, b) = {X ⪰ 0 : A(X) = b}`, faces, certificates and the
//! forward and backward error of a candidate point.

use alloc::vec;
use alloc::vec::Vec;

use crate::dense::{dot, jacobi_eig, norm2, Mat, PivotedQr};
use crate::error::{Error, Result};
use crate::scalar::{Dd, Scalar};
use crate::symcore::{eig_desc, neg_part_norm, proj_psd, smat, svec, svec_len, SymMatrix};

/// Relative threshold below which a pivot of the constraint matrix counts as
/// a dependent row.
pub const RANK_RTOL: f64 = 1e-9;

/// The linear map `A: Sⁿ → Rᵐ` together with the right-hand side `b`.
///
/// Construction factorizes the `svec` matrix once; every later affine
/// projection reuses that factorization.
#[derive(Clone, Debug)]
pub struct LinearMapA {
    n: usize,
    mats: Vec<SymMatrix>,
    b: Vec<f64>,
    /// `m × n(n+1)/2`, row `i` is `svec(A_i)`.
    svec_mat: Mat<f64>,
    /// Pivoted QR of the transpose of `svec_mat`.
    qr: PivotedQr,
    /// Orthonormal basis of the null space of `svec_mat`, as columns.
    null: Mat<f64>,
    consistent: bool,
    inconsistency: f64,
}

impl LinearMapA {
    pub fn new(n: usize, mats: Vec<SymMatrix>, b: Vec<f64>) -> Result<Self> {
        Self::with_floor(n, mats, b, 0.0)
    }

    /// Like [`LinearMapA::new`] but treats pivots below `atol` as zero even
    /// when every row is tiny. Used after restricting to a face, where rows
    /// that vanish exactly in theory come out as rounding noise.
    pub fn with_floor(n: usize, mats: Vec<SymMatrix>, b: Vec<f64>, atol: f64) -> Result<Self> {
        if b.len() != mats.len() {
            return Err(Error::InvalidDimension {
                expected: mats.len(),
                found: b.len(),
            });
        }
        if let Some(bad) = mats.iter().find(|a| a.n() != n) {
            return Err(Error::InvalidDimension {
                expected: n,
                found: bad.n(),
            });
        }
        if b.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidMatrix);
        }
        let m = mats.len();
        let nn = svec_len(n);
        let mut svec_mat = Mat::zeros(m, nn);
        for (i, a) in mats.iter().enumerate() {
            for (j, v) in svec(a).into_iter().enumerate() {
                svec_mat[(i, j)] = v;
            }
        }
        let qr = PivotedQr::new(&svec_mat.transpose(), RANK_RTOL, atol);
        let null = qr.complement_basis();
        let mut map = LinearMapA {
            n,
            mats,
            b,
            svec_mat,
            qr,
            null,
            consistent: true,
            inconsistency: 0.0,
        };
        let (_, incons) = map.min_norm_raw(&map.b.clone());
        let bscale = norm2(&map.b).max(1.0);
        map.inconsistency = incons;
        map.consistent = incons <= 1e-8 * bscale;
        Ok(map)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.mats.len()
    }

    pub fn mats(&self) -> &[SymMatrix] {
        &self.mats
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn rank(&self) -> usize {
        self.qr.rank()
    }

    pub fn is_surjective(&self) -> bool {
        self.rank() == self.m()
    }

    pub fn is_consistent(&self) -> bool {
        self.consistent
    }

    /// Largest pivot of the constraint matrix, a proxy for its norm.
    pub fn scale(&self) -> f64 {
        if self.m() == 0 {
            0.0
        } else {
            libm::fabs(self.qr.r(0, 0))
        }
    }

    pub fn svec_matrix(&self) -> &Mat<f64> {
        &self.svec_mat
    }

    /// Orthonormal basis (columns, in `svec` coordinates) of `ker A`.
    pub fn null_basis(&self) -> &Mat<f64> {
        &self.null
    }

    fn check_order(&self, n: usize) -> Result<()> {
        if n != self.n {
            Err(Error::InvalidDimension {
                expected: self.n,
                found: n,
            })
        } else {
            Ok(())
        }
    }

    /// `A(X)_i = ⟨A_i, X⟩`.
    pub fn apply(&self, x: &SymMatrix) -> Result<Vec<f64>> {
        self.check_order(x.n())?;
        Ok(self.mats.iter().map(|a| a.inner(x)).collect())
    }

    /// `A*(y) = Σ y_i A_i`.
    pub fn adjoint(&self, y: &[f64]) -> Result<SymMatrix> {
        if y.len() != self.m() {
            return Err(Error::InvalidDimension {
                expected: self.m(),
                found: y.len(),
            });
        }
        let mut out = Mat::zeros(self.n, self.n);
        for (a, &yi) in self.mats.iter().zip(y) {
            if yi == 0.0 {
                continue;
            }
            for (o, &v) in out.as_mut_slice().iter_mut().zip(a.as_slice()) {
                *o += yi * v;
            }
        }
        Ok(SymMatrix::from_mat_unchecked(out))
    }

    /// `A(X)` with double-double accumulation.
    pub fn apply_dd(&self, x: &Mat<Dd>) -> Vec<Dd> {
        self.mats
            .iter()
            .map(|a| {
                let mut s = Dd::ZERO;
                for (&av, &xv) in a.as_slice().iter().zip(x.as_slice()) {
                    if av != 0.0 {
                        s += xv * Dd::new(av);
                    }
                }
                s
            })
            .collect()
    }

    /// `A*(y)` with double-double accumulation.
    pub fn adjoint_dd(&self, y: &[Dd]) -> Mat<Dd> {
        let mut out = Mat::<Dd>::zeros(self.n, self.n);
        for (a, &yi) in self.mats.iter().zip(y) {
            for (o, &v) in out.as_mut_slice().iter_mut().zip(a.as_slice()) {
                if v != 0.0 {
                    *o += yi * Dd::new(v);
                }
            }
        }
        out
    }

    /// Minimum-norm `d` (in `svec` coordinates) with `M d = r` restricted to
    /// the independent rows, plus the residual of the dependent rows.
    fn min_norm_raw(&self, r: &[f64]) -> (Vec<f64>, f64) {
        let m = self.m();
        let k = self.rank();
        let perm = self.qr.perm();
        let c: Vec<f64> = (0..m).map(|i| r[perm[i]]).collect();
        let z = self.qr.solve_r11_t(&c[..k]);
        let mut incons = 0.0;
        for i in k..m {
            let mut s = 0.0;
            for (j, zj) in z.iter().enumerate() {
                s += self.qr.r(j, i) * zj;
            }
            incons += (s - c[i]) * (s - c[i]);
        }
        let mut d = vec![0.0; svec_len(self.n)];
        d[..k].copy_from_slice(&z);
        self.qr.apply_q(&mut d);
        (d, libm::sqrt(incons))
    }

    /// Minimum-norm symmetric `Δ` (as `svec`) with `A(Δ) = r`.
    pub fn min_norm_solution(&self, r: &[f64]) -> Result<Vec<f64>> {
        if r.len() != self.m() {
            return Err(Error::InvalidDimension {
                expected: self.m(),
                found: r.len(),
            });
        }
        let (d, incons) = self.min_norm_raw(r);
        if incons > 1e-8 * norm2(r).max(1.0) {
            return Err(Error::InfeasibleAffine { residual: incons });
        }
        Ok(d)
    }

    /// Distance from `X` to the affine set `{A(X) = b}`.
    pub fn affine_distance(&self, x: &SymMatrix) -> Result<f64> {
        let ax = self.apply(x)?;
        let r: Vec<f64> = self.b.iter().zip(&ax).map(|(b, a)| b - a).collect();
        self.affine_distance_of_residual(&r)
    }

    /// Norm of the minimum-norm correction for residual `b − A(X)`.
    pub fn affine_distance_of_residual(&self, r: &[f64]) -> Result<f64> {
        if !self.consistent {
            return Err(Error::InfeasibleAffine {
                residual: self.inconsistency,
            });
        }
        Ok(norm2(&self.min_norm_solution(r)?))
    }

    /// Orthogonal projection onto `{A(X) = b}`.
    pub fn project_affine(&self, x: &SymMatrix) -> Result<SymMatrix> {
        if !self.consistent {
            return Err(Error::InfeasibleAffine {
                residual: self.inconsistency,
            });
        }
        let ax = self.apply(x)?;
        let r: Vec<f64> = self.b.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let d = self.min_norm_solution(&r)?;
        Ok(x.add(&smat(self.n, &d)?))
    }

    /// Least-squares multiplier `y` minimizing `‖A*(y) − S‖_F`.
    pub fn adjoint_lstsq(&self, s: &SymMatrix) -> Result<Vec<f64>> {
        self.check_order(s.n())?;
        let mut c = svec(s);
        self.qr.apply_qt(&mut c);
        let k = self.rank();
        let z = self.qr.solve_r11(&c[..k]);
        let mut y = vec![0.0; self.m()];
        for (i, zi) in z.into_iter().enumerate() {
            y[self.qr.perm()[i]] = zi;
        }
        Ok(y)
    }

    /// Restricts the map to the face `V S^r Vᵀ`, i.e. `A(V·Vᵀ)`, and drops
    /// numerically dependent rows so the result is surjective again.
    pub fn reduce(&self, v: &Mat<f64>) -> Result<Reduction> {
        if v.rows() != self.n {
            return Err(Error::InvalidDimension {
                expected: self.n,
                found: v.rows(),
            });
        }
        let r = v.cols();
        if r == 0 {
            return Err(Error::EmptyFace);
        }
        let floor = RANK_RTOL * self.scale().max(f64::MIN_POSITIVE);
        let mats: Vec<SymMatrix> = self.mats.iter().map(|a| a.congruence_t(v)).collect();
        let full = LinearMapA::with_floor(r, mats.clone(), self.b.clone(), floor)?;
        let k = full.rank();
        let mut kept: Vec<usize> = full.qr.perm()[..k].to_vec();
        kept.sort_unstable();
        let dropped_idx: Vec<usize> = (0..self.m()).filter(|i| !kept.contains(i)).collect();

        let kept_mats: Vec<SymMatrix> = kept.iter().map(|&i| mats[i].clone()).collect();
        let kept_b: Vec<f64> = kept.iter().map(|&i| self.b[i]).collect();
        let map = LinearMapA::with_floor(r, kept_mats, kept_b, floor)?;

        let bscale = norm2(&self.b).max(1.0);
        let mut dropped = Vec::with_capacity(dropped_idx.len());
        for &j in &dropped_idx {
            let coef = map.adjoint_lstsq(&mats[j])?;
            let predicted = dot(&coef, map.b());
            let gap = libm::fabs(predicted - self.b[j]);
            if gap > 1e-8 * bscale {
                return Err(Error::InfeasibleAffine { residual: gap });
            }
            dropped.push(DroppedRow { row: j, coef });
        }
        Ok(Reduction { map, kept, dropped })
    }
}

/// Row `row` of the restricted map equals `Σ coef_k · (kept row k)`.
#[derive(Clone, Debug)]
pub struct DroppedRow {
    pub row: usize,
    pub coef: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct Reduction {
    pub map: LinearMapA,
    /// Original row indices kept, ascending.
    pub kept: Vec<usize>,
    pub dropped: Vec<DroppedRow>,
}

/// A face `V S^r Vᵀ = S⁺ⁿ ∩ W^⊥` of the PSD cone.
#[derive(Clone, Debug, PartialEq)]
pub struct FaceRep {
    v: Mat<f64>,
    w: SymMatrix,
}

impl FaceRep {
    pub fn new(v: Mat<f64>, w: SymMatrix) -> Result<Self> {
        let n = w.n();
        if v.rows() != n {
            return Err(Error::InvalidDimension {
                expected: n,
                found: v.rows(),
            });
        }
        let r = v.cols();
        if v.tmatmul(&v).sub(&Mat::identity(r)).frob() > 1e-9 {
            return Err(Error::InvalidMatrix);
        }
        let wscale = w.frobenius().max(1.0);
        if w.as_mat().matmul(&v).frob() > 1e-9 * wscale {
            return Err(Error::InvalidMatrix);
        }
        let ws = eig_desc(&w)?;
        if ws.values.last().is_some_and(|&l| l < -1e-9 * wscale) {
            return Err(Error::InvalidMatrix);
        }
        let vvt = SymMatrix::identity(r).congruence(&v);
        let full = eig_desc(&w.add(&vvt))?;
        if full.values.last().is_some_and(|&l| l <= 1e-9) {
            return Err(Error::InvalidMatrix);
        }
        Ok(FaceRep { v, w })
    }

    /// Face spanned by an orthonormal basis, with the exposing vector
    /// `I − VVᵀ`.
    pub fn from_basis(v: Mat<f64>) -> Result<Self> {
        let n = v.rows();
        let vvt = SymMatrix::identity(v.cols()).congruence(&v);
        Self::new(v, SymMatrix::identity(n).sub(&vvt))
    }

    pub fn v(&self) -> &Mat<f64> {
        &self.v
    }

    pub fn w(&self) -> &SymMatrix {
        &self.w
    }

    pub fn dim(&self) -> usize {
        self.v.cols()
    }
}

/// Ground truth attached to generated instances.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Certificate {
    pub sd_true: Option<usize>,
    pub max_rank_true: Option<usize>,
    pub solution_face: Option<FaceRep>,
    pub singleton_solution: Option<SymMatrix>,
    /// Multipliers over the original rows and the resulting exposing vectors
    /// in the coordinates of the face reached so far.
    pub exposing_chain: Option<Vec<(Vec<f64>, SymMatrix)>>,
}

impl Certificate {
    /// Checks every stated fact that can be checked against `map`.
    pub fn validate(&self, map: &LinearMapA) -> Result<()> {
        if let Some(x) = &self.singleton_solution {
            let ax = map.apply(x)?;
            let res = norm2(&ax.iter().zip(map.b()).map(|(a, b)| a - b).collect::<Vec<_>>());
            if res > 1e-10 * norm2(map.b()).max(1.0) {
                return Err(Error::CertificateMismatch("singleton is not affine feasible"));
            }
            let s = eig_desc(x)?;
            if s.values.last().is_some_and(|&l| l < -1e-12) {
                return Err(Error::CertificateMismatch("singleton is not PSD"));
            }
        }
        if let Some(chain) = &self.exposing_chain {
            let replay = crate::facialred::replay_chain(map, chain)?;
            if let Some(sd) = self.sd_true {
                if chain.len() != sd {
                    return Err(Error::CertificateMismatch("chain length differs from sd"));
                }
            }
            if let (Some(face), Some(rank)) = (&self.solution_face, self.max_rank_true) {
                if face.dim() != replay.v.cols() || rank > face.dim() {
                    return Err(Error::CertificateMismatch("face dimension disagrees with chain"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct Spectrahedron {
    pub map: LinearMapA,
    pub certificate: Option<Certificate>,
}

impl Spectrahedron {
    pub fn new(map: LinearMapA) -> Self {
        Spectrahedron {
            map,
            certificate: None,
        }
    }

    pub fn with_certificate(map: LinearMapA, certificate: Certificate) -> Self {
        Spectrahedron {
            map,
            certificate: Some(certificate),
        }
    }

    pub fn n(&self) -> usize {
        self.map.n()
    }

    pub fn m(&self) -> usize {
        self.map.m()
    }

    /// True when a certificate lets [`forward_error`] compute exact distances.
    pub fn has_oracle(&self) -> bool {
        self.certificate
            .as_ref()
            .is_some_and(|c| c.singleton_solution.is_some() || c.solution_face.is_some())
    }
}

/// `dist(X, {A(X) = b}) + dist(X, S⁺ⁿ)`.
pub fn backward_error(f: &Spectrahedron, x: &SymMatrix) -> Result<f64> {
    let aff = f.map.affine_distance(x)?;
    Ok(aff + crate::symcore::dist_psd(x)?)
}

/// Backward error of a double-double iterate whose spectrum is already known.
pub(crate) fn backward_error_dd(map: &LinearMapA, x: &Mat<Dd>, eigs: &[f64]) -> Result<f64> {
    let ax = map.apply_dd(x);
    let r: Vec<f64> = map
        .b()
        .iter()
        .zip(&ax)
        .map(|(&b, &a)| (Dd::new(b) - a).to_f64())
        .collect();
    Ok(map.affine_distance_of_residual(&r)? + neg_part_norm(eigs))
}

/// Distance from `X` to `F`.
///
/// Exact for a certified singleton. For a certified solution face the
/// in-face part is a Dykstra projection onto `{P ⪰ 0 : A(VPVᵀ) = b}`, stopped
/// once a dual bound certifies the distance to within `1e-8`.
pub fn forward_error(f: &Spectrahedron, x: &SymMatrix) -> Result<f64> {
    let cert = f.certificate.as_ref().ok_or(Error::OracleUnavailable)?;
    if x.n() != f.n() {
        return Err(Error::InvalidDimension {
            expected: f.n(),
            found: x.n(),
        });
    }
    if let Some(xs) = &cert.singleton_solution {
        return Ok(x.sub(xs).frobenius());
    }
    let face = cert.solution_face.as_ref().ok_or(Error::OracleUnavailable)?;
    face_distance(&f.map, face, x).map(|d| d.upper)
}

/// Two-sided bound on the distance to a face-parameterized spectrahedron.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FaceDistance {
    pub lower: f64,
    pub upper: f64,
    pub iterations: usize,
}

pub fn face_distance(map: &LinearMapA, face: &FaceRep, x: &SymMatrix) -> Result<FaceDistance> {
    let v = face.v();
    let q0 = x.congruence_t(v);
    let perp = x.sub(&q0.congruence(v)).frobenius();
    let floor = RANK_RTOL * map.scale().max(f64::MIN_POSITIVE);
    let fmap = LinearMapA::with_floor(
        v.cols(),
        map.mats().iter().map(|a| a.congruence_t(v)).collect(),
        map.b().to_vec(),
        floor,
    )?;
    let (lower_in, upper_in, iterations) = dykstra(&fmap, &q0)?;
    Ok(FaceDistance {
        lower: libm::sqrt(perp * perp + lower_in * lower_in),
        upper: libm::sqrt(perp * perp + upper_in * upper_in),
        iterations,
    })
}

const DYKSTRA_MAX_ITER: usize = 100_000;

/// Projects `q0` onto `{P ⪰ 0 : A(P) = b}` and returns lower and upper bounds
/// on the distance.
fn dykstra(map: &LinearMapA, q0: &SymMatrix) -> Result<(f64, f64, usize)> {
    let scale = q0.frobenius().max(1.0);
    let mut x = q0.clone();
    let mut p = SymMatrix::zeros(q0.n());
    let mut q = SymMatrix::zeros(q0.n());
    for it in 1..=DYKSTRA_MAX_ITER {
        let ya = map.project_affine(&x.add(&p))?;
        p = x.add(&p).sub(&ya);
        let xn = proj_psd(&ya.add(&q))?;
        q = ya.add(&q).sub(&xn);
        let moved = xn.sub(&x).frobenius();
        x = xn;
        if moved <= 1e-10 * scale || it % 50 == 0 {
            if let Some((lo, hi)) = certify(map, q0, &x, &p)? {
                if hi - lo <= 1e-8 {
                    return Ok((lo, hi, it));
                }
            }
        }
    }
    Err(Error::OracleUnavailable)
}

/// Primal value from the affine projection of the PSD iterate (accepted when
/// it is PSD to rounding) and dual value from the multiplier carried by the
/// affine correction.
fn certify(
    map: &LinearMapA,
    q0: &SymMatrix,
    x: &SymMatrix,
    p: &SymMatrix,
) -> Result<Option<(f64, f64)>> {
    let xa = map.project_affine(x)?;
    let lmin = eig_desc(&xa)?.values.last().copied().unwrap_or(0.0);
    if lmin < -1e-13 * xa.frobenius().max(1.0) {
        return Ok(None);
    }
    let upper = xa.sub(q0).frobenius();
    let y = map.adjoint_lstsq(&p.scale(-1.0))?;
    let ay = map.adjoint(&y)?;
    let s = proj_psd(&ay.add(q0).scale(-1.0))?;
    let g = ay.add(&s);
    let dual = -0.5 * g.inner(&g) - g.inner(q0) + dot(&y, map.b());
    let lower = libm::sqrt(2.0 * dual.max(0.0)).min(upper);
    Ok(Some((lower, upper)))
}

/// Outcome of testing a candidate exposing vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ExposingVerdict {
    pub exposing: bool,
    /// `W = 0`, which exposes the whole cone.
    pub trivial: bool,
}

/// Whether `W` is PSD and orthogonal to every feasible sample.
pub fn is_exposing(f: &Spectrahedron, w: &SymMatrix, samples: &[SymMatrix]) -> Result<ExposingVerdict> {
    for (index, s) in samples.iter().enumerate() {
        let berr = backward_error(f, s)?;
        if berr > 1e-8 {
            return Err(Error::InvalidSample { index, berr });
        }
    }
    let wn = w.frobenius();
    if wn == 0.0 {
        return Ok(ExposingVerdict {
            exposing: true,
            trivial: true,
        });
    }
    let (vals, _) = jacobi_eig(w.as_mat());
    let psd = vals.last().is_none_or(|&l| l >= -1e-9);
    let orthogonal = samples
        .iter()
        .all(|s| libm::fabs(w.inner(s)) <= 1e-8 * wn * s.frobenius().max(1.0));
    Ok(ExposingVerdict {
        exposing: psd && orthogonal,
        trivial: false,
    })
}
