//! Facial reduction: repeatedly find an exposing vector `Z = A*(y) ⪰ 0` with
//! `yᵀb = 0` and restrict the problem to the face it exposes, until the
//! restricted problem satisfies the Slater condition.
//!
//! Numerical mode takes exposing vectors from the limit of the dual central
//! path, which lies in the relative interior of the set of exposing vectors and
//! therefore has maximum rank. Certified mode replays a chain of multipliers
//! shipped with the instance.

use alloc::vec::Vec;

use crate::dense::{dot, norm2, Mat};
use crate::error::{Error, Result};
use crate::pathfollow::{dual_limit, follow, PathConfig, PathTrace};
use crate::spectra::{LinearMapA, Spectrahedron};
use crate::symcore::{eig_desc, SymMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FrMode {
    Certified,
    Numerical,
}

impl FrMode {
    pub fn as_str(self) -> &'static str {
        match self {
            FrMode::Certified => "certified",
            FrMode::Numerical => "numerical",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrConfig {
    pub path: PathConfig,
    /// Eigenvalues below `eps_rank·λ₁` count as zero.
    pub eps_rank: f64,
    /// Path depth used to decide the Slater alternative.
    pub slater_depth: usize,
    /// Path depth used to extract an exposing vector.
    pub expose_depth: usize,
    /// Tail window for rate estimates.
    pub window: usize,
}

impl Default for FrConfig {
    fn default() -> Self {
        FrConfig {
            path: PathConfig::default(),
            eps_rank: 1e-7,
            slater_depth: 25,
            expose_depth: 60,
            window: 10,
        }
    }
}

/// One iteration of facial reduction.
#[derive(Clone, Debug)]
pub struct FrStep {
    pub k: usize,
    /// Multiplier over the rows of the original map.
    pub y: Vec<f64>,
    /// Exposing vector in the coordinates of the current face.
    pub z: SymMatrix,
    pub q: usize,
    pub q1: Mat<f64>,
    pub q2: Mat<f64>,
    /// Basis of the face after this step, in original coordinates.
    pub vk: Mat<f64>,
    /// Accumulated exposing vector after this step.
    pub wk: SymMatrix,
    pub min_eig: f64,
}

#[derive(Clone, Debug)]
pub struct FrResult {
    pub d: usize,
    pub steps: Vec<FrStep>,
    pub v: Mat<f64>,
    pub w: SymMatrix,
    pub r: usize,
    pub mode: FrMode,
}

/// Failure with the steps completed before it.
#[derive(Clone, Debug)]
pub struct FrError {
    pub kind: Error,
    pub partial: Vec<FrStep>,
}

impl From<Error> for FrError {
    fn from(kind: Error) -> Self {
        FrError {
            kind,
            partial: Vec::new(),
        }
    }
}

impl core::fmt::Display for FrError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "{} ({} steps completed)", self.kind, self.partial.len())
    }
}

/// Applies one exposing multiplier to the face `V` and returns the step.
fn apply_step(
    map: &LinearMapA,
    v: &Mat<f64>,
    w: &SymMatrix,
    y: Vec<f64>,
    k: usize,
    eps_rank: f64,
) -> Result<FrStep> {
    let yb = dot(&y, map.b());
    if libm::fabs(yb) > 1e-9 * norm2(&y) * norm2(map.b()).max(1.0) {
        return Err(Error::CertificateMismatch("multiplier is not orthogonal to b"));
    }
    let z = map.adjoint(&y)?.congruence_t(v);
    let spec = eig_desc(&z)?;
    let lmax = spec.values.first().copied().unwrap_or(0.0);
    let lmin = spec.values.last().copied().unwrap_or(0.0);
    if lmax <= 1e-9 {
        return Err(Error::NoExposingVectorFound);
    }
    if lmin < -1e-9 * lmax {
        return Err(Error::CertificateMismatch("exposing vector is not PSD"));
    }
    let r = z.n();
    let q = spec.values.iter().take_while(|&&l| l > eps_rank * lmax).count();
    let q1 = Mat::from_fn(r, q, |i, j| spec.vectors[(i, j)]);
    let q2 = Mat::from_fn(r, r - q, |i, j| spec.vectors[(i, q + j)]);
    let vk = v.matmul(&q2);
    let wk = w.add(&z.congruence(v));
    Ok(FrStep {
        k,
        y,
        z,
        q,
        q1,
        q2,
        vk,
        wk,
        min_eig: lmin,
    })
}

/// Replays a certificate chain from the full cone.
#[derive(Clone, Debug)]
pub struct Replay {
    pub steps: Vec<FrStep>,
    pub v: Mat<f64>,
    pub w: SymMatrix,
}

pub fn replay_chain(map: &LinearMapA, chain: &[(Vec<f64>, SymMatrix)]) -> Result<Replay> {
    let n = map.n();
    let mut v = Mat::identity(n);
    let mut w = SymMatrix::zeros(n);
    let mut steps = Vec::with_capacity(chain.len());
    for (k, (y, zc)) in chain.iter().enumerate() {
        if y.len() != map.m() {
            return Err(Error::InvalidDimension {
                expected: map.m(),
                found: y.len(),
            });
        }
        if v.cols() == 0 {
            return Err(Error::CertificateMismatch("chain continues past the zero face"));
        }
        let step = apply_step(map, &v, &w, y.clone(), k + 1, 1e-7)?;
        if zc.n() != step.z.n() || step.z.sub(zc).frobenius() > 1e-8 * zc.frobenius().max(1.0) {
            return Err(Error::CertificateMismatch("stored exposing vector differs from replay"));
        }
        v = step.vk.clone();
        w = step.wk.clone();
        steps.push(step);
    }
    Ok(Replay { steps, v, w })
}

/// Result of deciding which alternative of the theorem of the alternative
/// holds.
#[derive(Clone, Debug)]
pub struct SlaterOutcome {
    pub holds: bool,
    pub witness: Option<SymMatrix>,
    /// Tail Q-ratio of `λ_min(X(σᵏ))`.
    pub tail_ratio: f64,
    pub trace: Option<PathTrace>,
}

/// Decides the Slater condition from a shallow path.
///
/// If no positive definite feasible point exists, the smallest eigenvalue of
/// `X(α)` vanishes like `α`, so its per-step ratio tends to `σ`; otherwise it
/// tends to 1. The decision threshold is the midpoint `(1 + σ)/2`.
pub fn slater_check(f: &Spectrahedron, cfg: &FrConfig) -> Result<SlaterOutcome> {
    let n = f.n();
    if f.m() == 0 {
        return Ok(SlaterOutcome {
            holds: true,
            witness: Some(SymMatrix::identity(n)),
            tail_ratio: 1.0,
            trace: None,
        });
    }
    let pcfg = PathConfig {
        k_max: cfg.slater_depth,
        ..cfg.path.clone()
    };
    let trace = follow(f, &SymMatrix::identity(n), &pcfg)?;
    if trace.is_truncated() || trace.len() < 8 {
        return Err(Error::Undecided);
    }
    let len = trace.len();
    let lmin = |i: usize| trace.eigs_x[i].last().copied().unwrap_or(0.0);
    let ratios: Vec<f64> = (len - 4..len - 1).map(|i| lmin(i + 1) / lmin(i)).collect();
    let tail_ratio = ratios.iter().sum::<f64>() / ratios.len() as f64;
    let holds = tail_ratio > 0.5 * (1.0 + trace.sigma);
    let witness = if holds {
        Some(dual_limit(&trace)?.x)
    } else {
        None
    };
    Ok(SlaterOutcome {
        holds,
        witness,
        tail_ratio,
        trace: Some(trace),
    })
}

/// Exposing vector extracted from the dual path.
#[derive(Clone, Debug)]
pub struct Exposing {
    pub z: SymMatrix,
    pub y: Vec<f64>,
    pub q: usize,
    pub min_eig: f64,
}

/// Maximum-rank exposing vector of `F`, taken from the extrapolated limit of
/// `Z(α)`.
pub fn exposing_vector(f: &Spectrahedron, cfg: &FrConfig) -> Result<Exposing> {
    let pcfg = PathConfig {
        k_max: cfg.expose_depth,
        ..cfg.path.clone()
    };
    let trace = follow(f, &SymMatrix::identity(f.n()), &pcfg)?;
    exposing_from_trace(&f.map, &trace, cfg)
}

/// An eigenvalue of `Z̄` counts toward the rank only if it is above
/// `eps_rank·λ₁` and its tail Q-ratio is closer to 1 than to `√σ`. Vanishing
/// dual eigenvalues decay at least like `α^{1/2}`, and near the floor some of
/// them are still above the relative threshold.
pub fn exposing_from_trace(map: &LinearMapA, trace: &PathTrace, cfg: &FrConfig) -> Result<Exposing> {
    if trace.is_truncated() && trace.len() < cfg.window + 2 {
        return Err(trace.truncated.clone().unwrap_or(Error::Undecided));
    }
    let lim = dual_limit(trace)?;
    let spec = eig_desc(&lim.z)?;
    let l1 = spec.values.first().copied().unwrap_or(0.0);
    if l1 <= 1e-9 {
        return Err(Error::NoExposingVectorFound);
    }
    let ratio = tail_min_ratios(&trace.eigs_z, tail_end(trace), cfg.window);
    let thr = 0.5 * (1.0 + libm::sqrt(trace.sigma));
    let q = spec
        .values
        .iter()
        .zip(&ratio)
        .take_while(|(&l, &r)| l > cfg.eps_rank * l1 && r > thr)
        .count();
    if q == 0 {
        return Err(Error::NoExposingVectorFound);
    }
    let (y, z) = polish(map, &spec, q)?;
    let min_eig = eig_desc(&z)?.values.last().copied().unwrap_or(0.0);
    Ok(Exposing { z, y, q, min_eig })
}

/// Alternating projections between `range(A*) ∩ b⊥` and PSD matrices of rank
/// `q`, started from the rank-`q` truncation of `spec`. Stops once the
/// trailing eigenvalues of `A*(y)` are negligible or stop shrinking.
fn polish(map: &LinearMapA, spec: &crate::symcore::Spectrum, q: usize) -> Result<(Vec<f64>, SymMatrix)> {
    let truncate = |s: &crate::symcore::Spectrum| {
        crate::symcore::Spectrum {
            values: s.values.iter().enumerate().map(|(i, &l)| if i < q { l.max(0.0) } else { 0.0 }).collect(),
            vectors: s.vectors.clone(),
        }
        .reconstruct()
    };
    let bb = dot(map.b(), map.b());
    let fit = |zq: &SymMatrix| -> Result<(Vec<f64>, SymMatrix)> {
        let mut y = map.adjoint_lstsq(zq)?;
        if bb > 0.0 {
            let c = dot(&y, map.b()) / bb;
            for (yi, bi) in y.iter_mut().zip(map.b()) {
                *yi -= c * bi;
            }
        }
        let z = map.adjoint(&y)?;
        Ok((y, z))
    };
    let tail = |s: &crate::symcore::Spectrum| {
        libm::sqrt(s.values[q..].iter().fold(0.0, |a, v| a + v * v)) / s.values[0].abs().max(f64::MIN_POSITIVE)
    };
    let (mut y, mut z) = fit(&truncate(spec))?;
    let mut s = eig_desc(&z)?;
    let mut err = tail(&s);
    for _ in 0..200 {
        if err <= 1e-14 {
            break;
        }
        let (y2, z2) = fit(&truncate(&s))?;
        let s2 = eig_desc(&z2)?;
        let e2 = tail(&s2);
        if !(e2 < 0.999 * err) {
            break;
        }
        y = y2;
        z = z2;
        s = s2;
        err = e2;
    }
    Ok((y, z))
}

/// Index one past the last point used for tail statistics; the final two
/// points are dropped when the path ends at the conditioning floor.
pub(crate) fn tail_end(trace: &PathTrace) -> usize {
    if trace.near_floor() && trace.len() > 2 {
        trace.len() - 2
    } else {
        trace.len()
    }
}

/// Per index, the minimum over the window of `λᵢ(k+1)/λᵢ(k)`.
pub(crate) fn tail_min_ratios(eigs: &[Vec<f64>], end: usize, window: usize) -> Vec<f64> {
    let n = eigs.first().map_or(0, |e| e.len());
    let start = end.saturating_sub(window + 1);
    (0..n)
        .map(|i| {
            (start..end.saturating_sub(1))
                .map(|k| eigs[k + 1][i] / eigs[k][i])
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

/// Runs facial reduction to the minimal face.
pub fn facial_reduction(
    f: &Spectrahedron,
    mode: FrMode,
    cfg: &FrConfig,
) -> core::result::Result<FrResult, FrError> {
    match mode {
        FrMode::Certified => certified(f, cfg),
        FrMode::Numerical => numerical(f, cfg),
    }
}

fn certified(f: &Spectrahedron, cfg: &FrConfig) -> core::result::Result<FrResult, FrError> {
    let chain = f
        .certificate
        .as_ref()
        .and_then(|c| c.exposing_chain.as_ref())
        .ok_or(Error::CertificateMismatch("no exposing chain"))?;
    let replay = replay_chain(&f.map, chain)?;
    let r = replay.v.cols();
    if r > 0 {
        let red = f.map.reduce(&replay.v).map_err(|kind| FrError {
            kind,
            partial: replay.steps.clone(),
        })?;
        let slater = slater_check(&Spectrahedron::new(red.map), cfg).map_err(|kind| FrError {
            kind,
            partial: replay.steps.clone(),
        })?;
        if !slater.holds {
            return Err(FrError {
                kind: Error::CertificateMismatch("chain stops before the minimal face"),
                partial: replay.steps,
            });
        }
    }
    Ok(FrResult {
        d: replay.steps.len(),
        r,
        v: replay.v,
        w: replay.w,
        steps: replay.steps,
        mode: FrMode::Certified,
    })
}

fn numerical(f: &Spectrahedron, cfg: &FrConfig) -> core::result::Result<FrResult, FrError> {
    let n = f.n();
    let mut v = Mat::identity(n);
    let mut w = SymMatrix::zeros(n);
    let mut steps: Vec<FrStep> = Vec::new();
    let mut current = f.map.clone();
    let mut rows: Vec<usize> = (0..f.m()).collect();
    let fail = |kind: Error, steps: &Vec<FrStep>| FrError {
        kind,
        partial: steps.clone(),
    };
    loop {
        if v.cols() == 0 {
            break;
        }
        let sub = Spectrahedron::new(current.clone());
        let slater = slater_check(&sub, cfg).map_err(|e| fail(e, &steps))?;
        if slater.holds {
            break;
        }
        if steps.len() >= n {
            return Err(fail(Error::FrDiverged { completed: steps.len() }, &steps));
        }
        let mut trace = slater.trace.ok_or_else(|| fail(Error::Undecided, &steps))?;
        trace.extend(&sub, &cfg.path, cfg.expose_depth);
        let exp = exposing_from_trace(&current, &trace, cfg).map_err(|e| fail(e, &steps))?;
        let mut y = alloc::vec![0.0; f.m()];
        for (i, &row) in rows.iter().enumerate() {
            y[row] = exp.y[i];
        }
        let step = apply_step(&f.map, &v, &w, y, steps.len() + 1, cfg.eps_rank)
            .map_err(|e| fail(e, &steps))?;
        if step.q != exp.q {
            // The refitted vector lost or gained rank; treat as unstable.
            return Err(fail(Error::FrDiverged { completed: steps.len() }, &steps));
        }
        v = step.vk.clone();
        w = step.wk.clone();
        steps.push(step);
        if v.cols() == 0 {
            break;
        }
        let red = f.map.reduce(&v).map_err(|e| fail(e, &steps))?;
        rows = red.kept;
        current = red.map;
    }
    let r = v.cols();
    Ok(FrResult {
        d: steps.len(),
        r,
        v,
        w,
        steps,
        mode: FrMode::Numerical,
    })
}

/// Length of the maximum-rank facial reduction chain. A spectrahedron equal
/// to `{0}` has singularity degree 1 by convention.
pub fn singularity_degree(
    f: &Spectrahedron,
    mode: FrMode,
    cfg: &FrConfig,
) -> core::result::Result<usize, FrError> {
    match facial_reduction(f, mode, cfg) {
        Ok(res) if res.r == 0 => Ok(res.d.max(1)),
        Ok(res) => Ok(res.d),
        Err(e) => Err(FrError {
            kind: Error::SdUndecided {
                completed: e.partial.len(),
            },
            partial: e.partial,
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn simplex2() -> Spectrahedron {
        Spectrahedron::new(LinearMapA::new(2, vec![SymMatrix::identity(2)], vec![1.0]).unwrap())
    }

    fn worst2() -> Spectrahedron {
        let mats = vec![SymMatrix::unit(2, 0, 0), SymMatrix::unit(2, 1, 1)];
        Spectrahedron::new(LinearMapA::new(2, mats, vec![1.0, 0.0]).unwrap())
    }

    #[test]
    fn slater_examples() {
        let cfg = FrConfig::default();
        let s = slater_check(&simplex2(), &cfg).unwrap();
        assert!(s.holds);
        let wit = s.witness.unwrap();
        assert!(wit.sub(&SymMatrix::identity(2).scale(0.5)).frobenius() < 1e-6);
        assert!(!slater_check(&worst2(), &cfg).unwrap().holds);
        let free = Spectrahedron::new(LinearMapA::new(3, vec![], vec![]).unwrap());
        assert!(slater_check(&free, &cfg).unwrap().holds);
    }

    #[test]
    fn exposing_vector_worst_two() {
        let e = exposing_vector(&worst2(), &FrConfig::default()).unwrap();
        assert_eq!(e.q, 1);
        let z = e.z.scale(1.0 / e.z.frobenius());
        assert!(z.sub(&SymMatrix::unit(2, 1, 1)).frobenius() < 1e-6);
    }

    #[test]
    fn slater_instance_has_no_exposing_vector() {
        assert_eq!(
            exposing_vector(&simplex2(), &FrConfig::default()).unwrap_err(),
            Error::NoExposingVectorFound
        );
    }

    #[test]
    fn zero_set_has_degree_one() {
        let f = Spectrahedron::new(LinearMapA::new(1, vec![SymMatrix::identity(1)], vec![0.0]).unwrap());
        assert_eq!(singularity_degree(&f, FrMode::Numerical, &FrConfig::default()).unwrap(), 1);
    }
}
