//! Primal-dual central path of the perturbed log-det problem
//!
//! ```text
//! maximize  α log det X   subject to  A(X) = b + α A(B)
//! ```
//!
//! whose optimality system is `A*(y) − Z = 0`, `A(X) − b(α) = 0`,
//! `ZX − αI = 0`. Iterates are kept in double-double so that the centering
//! residual stays meaningful when `α` is near `1e-13`; each Newton correction
//! is a Gauss-Newton least-squares step solved in `f64`.

use alloc::vec;
use alloc::vec::Vec;

use crate::dense::{cholesky, jacobi_eig, solve_lower, Mat, PivotedQr};
use crate::error::{Error, Result};
use crate::scalar::{Dd, Scalar};
use crate::spectra::{backward_error_dd, LinearMapA, Spectrahedron};
use crate::symcore::{smat_generic, SymMatrix};

#[derive(Clone, Debug, PartialEq)]
pub struct PathConfig {
    pub sigma: f64,
    pub k_max: usize,
    pub tol_p: f64,
    pub tol_d: f64,
    pub tol_c: f64,
    pub max_iter: usize,
    /// Fraction-to-boundary factor.
    pub fraction: f64,
    /// Smallest admissible `α`.
    pub floor: f64,
}

impl Default for PathConfig {
    fn default() -> Self {
        PathConfig {
            sigma: 0.6,
            k_max: 60,
            tol_p: 1e-12,
            tol_d: 1e-12,
            tol_c: 1e-8,
            max_iter: 200,
            fraction: 0.98,
            floor: 1e-13,
        }
    }
}

impl PathConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma < 1.0) {
            return Err(Error::InvalidConfig("sigma must lie in (0, 1)"));
        }
        if !(self.fraction > 0.0 && self.fraction < 1.0) {
            return Err(Error::InvalidConfig("fraction-to-boundary must lie in (0, 1)"));
        }
        if !(self.floor > 0.0) || self.max_iter == 0 {
            return Err(Error::InvalidConfig("floor and iteration budget must be positive"));
        }
        Ok(())
    }

    /// Largest `k ≤ k_max` with `σᵏ ≥ floor`.
    pub fn effective_k_max(&self) -> usize {
        let mut k = 0;
        let mut a = 1.0;
        while k < self.k_max && a * self.sigma >= self.floor {
            a *= self.sigma;
            k += 1;
        }
        k
    }

    pub fn alpha(&self, k: usize) -> f64 {
        libm::pow(self.sigma, k as f64)
    }
}

/// One accepted point `(X(α), y(α), Z(α))`.
#[derive(Clone, Debug)]
pub struct PathPoint {
    pub k: usize,
    pub alpha: f64,
    pub x: SymMatrix,
    pub y: Vec<f64>,
    pub z: SymMatrix,
    pub res_primal: f64,
    pub res_dual: f64,
    pub res_cent: f64,
    /// `|trace(ZX) − nα|`.
    pub gap_error: f64,
    pub iterations: usize,
    xdd: Mat<Dd>,
    ydd: Vec<Dd>,
    zdd: Mat<Dd>,
}

impl PathPoint {
    pub fn x_dd(&self) -> &Mat<Dd> {
        &self.xdd
    }

    pub fn y_dd(&self) -> &[Dd] {
        &self.ydd
    }

    pub fn z_dd(&self) -> &Mat<Dd> {
        &self.zdd
    }

    fn from_dd(alpha: f64, x: Mat<Dd>, y: Vec<Dd>, z: Mat<Dd>, res: &Residuals, iterations: usize) -> Self {
        PathPoint {
            k: 0,
            alpha,
            x: SymMatrix::from_mat_unchecked(x.to_f64().sym_part()),
            y: y.iter().map(|v| v.to_f64()).collect(),
            z: SymMatrix::from_mat_unchecked(z.to_f64().sym_part()),
            res_primal: res.np,
            res_dual: res.nd,
            res_cent: res.nc,
            gap_error: res.trace_gap,
            iterations,
            xdd: x,
            ydd: y,
            zdd: z,
        }
    }
}

struct Residuals {
    rp: Vec<Dd>,
    rd: Mat<Dd>,
    rc: Mat<Dd>,
    np: f64,
    nd: f64,
    nc: f64,
    trace_gap: f64,
}

impl Residuals {
    fn merit(&self) -> f64 {
        self.np + self.nd + self.nc
    }
}

fn residuals(map: &LinearMapA, b_alpha: &[Dd], alpha: f64, x: &Mat<Dd>, y: &[Dd], z: &Mat<Dd>) -> Residuals {
    let n = x.rows();
    let ax = map.apply_dd(x);
    let rp: Vec<Dd> = ax.iter().zip(b_alpha).map(|(&a, &b)| a - b).collect();
    let rd = map.adjoint_dd(y).sub(z);
    let mut rc = z.matmul(x);
    let a = Dd::new(alpha);
    for i in 0..n {
        rc[(i, i)] -= a;
    }
    Residuals {
        np: vec_norm(&rp),
        nd: rd.frob().to_f64(),
        nc: rc.frob().to_f64(),
        trace_gap: libm::fabs(rc.trace().to_f64()),
        rp,
        rd,
        rc,
    }
}

fn vec_norm(v: &[Dd]) -> f64 {
    libm::sqrt(v.iter().map(|a| a.to_f64() * a.to_f64()).sum())
}

struct Tolerances {
    primal: f64,
    dual: f64,
    cent: f64,
}

impl Tolerances {
    /// The stated tolerances, tightened so that the linear residuals are also
    /// small relative to `α`; otherwise eigenvalues of order `α` would be
    /// dominated by infeasibility.
    fn new(cfg: &PathConfig, n: usize, alpha: f64, b_alpha_norm: f64) -> Self {
        let bs = b_alpha_norm.max(1.0);
        Tolerances {
            primal: (cfg.tol_p * bs).min(cfg.tol_c * alpha * bs),
            dual: cfg.tol_d.min(cfg.tol_c * alpha),
            cent: cfg.tol_c * n as f64 * alpha,
        }
    }

    fn accepts(&self, r: &Residuals) -> bool {
        r.np <= self.primal && r.nd <= self.dual && r.nc <= self.cent && r.trace_gap <= self.cent
    }
}

fn perturbed_rhs(map: &LinearMapA, b_dir: &SymMatrix, alpha: f64) -> Vec<Dd> {
    let ab = map.apply_dd(&b_dir.as_mat().to_dd());
    map.b()
        .iter()
        .zip(&ab)
        .map(|(&b, &v)| Dd::new(b) + v * Dd::new(alpha))
        .collect()
}

/// Largest `t` with `M + tD ≻ 0`, or `None` if `M` itself is not positive
/// definite.
fn max_step(m: &Mat<Dd>, d: &Mat<Dd>) -> Option<f64> {
    let l = cholesky(m)?;
    let a = solve_lower(&l, d);
    let s = solve_lower(&l, &a.transpose());
    let (vals, _) = jacobi_eig(&s.to_f64().sym_part());
    let lmin = vals.last().copied().unwrap_or(0.0);
    Some(if lmin >= 0.0 { f64::INFINITY } else { -1.0 / lmin })
}

fn add_scaled(m: &Mat<Dd>, d: &Mat<Dd>, t: f64) -> Mat<Dd> {
    let td = Dd::new(t);
    Mat::from_fn(m.rows(), m.cols(), |i, j| m[(i, j)] + d[(i, j)] * td)
}

/// Solves the optimality system at one value of `α`.
pub fn center(
    f: &Spectrahedron,
    b_dir: &SymMatrix,
    alpha: f64,
    warm: Option<&PathPoint>,
    cfg: &PathConfig,
) -> Result<PathPoint> {
    let map = &f.map;
    if !map.is_surjective() {
        return Err(Error::NotSurjective {
            rank: map.rank(),
            m: map.m(),
        });
    }
    if b_dir.n() != map.n() {
        return Err(Error::InvalidDimension {
            expected: map.n(),
            found: b_dir.n(),
        });
    }
    if !(alpha > 0.0) {
        return Err(Error::InvalidConfig("alpha must be positive"));
    }
    let n = map.n();
    let m = map.m();
    let b_alpha = perturbed_rhs(map, b_dir, alpha);
    let b_alpha_norm = vec_norm(&b_alpha);
    let tol = Tolerances::new(cfg, n, alpha, b_alpha_norm);

    let (mut x, mut y, mut z) = match warm {
        Some(p) => (p.xdd.clone(), p.ydd.clone(), p.zdd.clone()),
        None => {
            let bn = libm::sqrt(map.b().iter().map(|v| v * v).sum());
            let tau = bn.max(1.0);
            (
                Mat::<Dd>::identity(n).scale(Dd::new(tau)),
                vec![Dd::ZERO; m],
                Mat::<Dd>::identity(n).scale(Dd::new(alpha) / Dd::new(tau)),
            )
        }
    };

    // Null-space basis of A as symmetric matrices, fixed for the whole solve.
    let null = map.null_basis();
    let t = null.cols();
    let nmats: Vec<Mat<f64>> = (0..t).map(|j| smat_generic(n, &null.col(j))).collect();

    let mut res = residuals(map, &b_alpha, alpha, &x, &y, &z);
    for iter in 0..cfg.max_iter {
        if tol.accepts(&res) {
            return Ok(PathPoint::from_dd(alpha, x, y, z, &res, iter));
        }
        let (dx, dy, dz) = direction(map, &nmats, &x, &z, &res)?;

        let tx = max_step(&x, &dx).ok_or(Error::InvalidMatrix)?;
        let tz = max_step(&z, &dz).ok_or(Error::InvalidMatrix)?;
        let mut step = 1.0f64.min(cfg.fraction * tx).min(cfg.fraction * tz);
        let phi0 = res.merit();
        let mut accepted = None;
        for _ in 0..60 {
            let xn = add_scaled(&x, &dx, step);
            let zn = add_scaled(&z, &dz, step);
            if cholesky(&xn).is_some() && cholesky(&zn).is_some() {
                let yn: Vec<Dd> = y.iter().zip(&dy).map(|(&a, &d)| a + Dd::new(d * step)).collect();
                let rn = residuals(map, &b_alpha, alpha, &xn, &yn, &zn);
                if rn.merit() <= (1.0 - 1e-4 * step) * phi0 || tol.accepts(&rn) {
                    accepted = Some((xn, yn, zn, rn));
                    break;
                }
            }
            step *= 0.5;
        }
        match accepted {
            Some((xn, yn, zn, rn)) => {
                x = xn;
                y = yn;
                z = zn;
                res = rn;
            }
            None => {
                return Err(Error::LineSearchStall {
                    alpha,
                    res_primal: res.np,
                    res_dual: res.nd,
                    res_cent: res.nc,
                })
            }
        }
    }
    if tol.accepts(&res) {
        return Ok(PathPoint::from_dd(alpha, x, y, z, &res, cfg.max_iter));
    }
    Err(Error::MaxIterations {
        alpha,
        res_primal: res.np,
        res_dual: res.nd,
        res_cent: res.nc,
    })
}

/// Gauss-Newton direction. The two linear blocks are eliminated exactly:
/// `ΔZ = A*(Δy) + r_d` and `ΔX = ΔX_p + Σ w_j N_j` with `A(ΔX_p) = −r_p`.
/// The remaining unknowns `(Δy, w)` solve the centrality block
/// `ΔZ X + Z ΔX = −r_c` in the least-squares sense.
fn direction(
    map: &LinearMapA,
    nmats: &[Mat<f64>],
    x: &Mat<Dd>,
    z: &Mat<Dd>,
    res: &Residuals,
) -> Result<(Mat<Dd>, Vec<f64>, Mat<Dd>)> {
    let n = x.rows();
    let m = map.m();
    let t = nmats.len();
    let neg_rp: Vec<f64> = res.rp.iter().map(|v| -v.to_f64()).collect();
    let dxp_svec = map.min_norm_solution(&neg_rp)?;
    let dxp = smat_generic(n, &dxp_svec);

    let rhs_dd = res
        .rc
        .add(&res.rd.matmul(x))
        .add(&z.matmul(&dxp.to_dd()))
        .scale(-Dd::ONE);
    let rhs: Vec<f64> = rhs_dd.as_slice().iter().map(|v| v.to_f64()).collect();

    let xf = x.to_f64();
    let zf = z.to_f64();
    let mut jac = Mat::<f64>::zeros(n * n, m + t);
    for (i, a) in map.mats().iter().enumerate() {
        let ax = a.as_mat().matmul(&xf);
        for (r, &v) in ax.as_slice().iter().enumerate() {
            jac[(r, i)] = v;
        }
    }
    for (j, nj) in nmats.iter().enumerate() {
        let zn = zf.matmul(nj);
        for (r, &v) in zn.as_slice().iter().enumerate() {
            jac[(r, m + j)] = v;
        }
    }
    // Column-equilibrated QR in f64, refined against the double-double
    // residual of the centrality block.
    let scales: Vec<f64> = (0..m + t)
        .map(|j| {
            let s = libm::sqrt((0..n * n).map(|r| jac[(r, j)] * jac[(r, j)]).sum());
            if s > 0.0 {
                s
            } else {
                1.0
            }
        })
        .collect();
    let scaled = Mat::from_fn(n * n, m + t, |r, j| jac[(r, j)] / scales[j]);
    let qr = PivotedQr::new(&scaled, 1e-15, 0.0);
    let solve = |b: &[f64]| -> Vec<f64> {
        let mut u = qr.solve_ls(b);
        for (v, s) in u.iter_mut().zip(&scales) {
            *v /= s;
        }
        u
    };
    let nmats_dd: Vec<Mat<Dd>> = nmats.iter().map(|nj| nj.to_dd()).collect();
    let apply = |u: &[f64]| -> Mat<Dd> {
        let uy: Vec<Dd> = u[..m].iter().map(|&v| Dd::new(v)).collect();
        let mut dxn = Mat::<Dd>::zeros(n, n);
        for (j, nj) in nmats_dd.iter().enumerate() {
            let w = Dd::new(u[m + j]);
            for (d, &v) in dxn.as_mut_slice().iter_mut().zip(nj.as_slice()) {
                *d += v * w;
            }
        }
        map.adjoint_dd(&uy).matmul(x).add(&z.matmul(&dxn))
    };
    let mut sol = solve(&rhs);
    let mut best = rhs_dd.sub(&apply(&sol)).frob().to_f64();
    for _ in 0..3 {
        let r = rhs_dd.sub(&apply(&sol));
        let rf: Vec<f64> = r.as_slice().iter().map(|v| v.to_f64()).collect();
        let corr = solve(&rf);
        let cand: Vec<f64> = sol.iter().zip(&corr).map(|(a, c)| a + c).collect();
        let err = rhs_dd.sub(&apply(&cand)).frob().to_f64();
        if !(err < 0.5 * best) {
            break;
        }
        sol = cand;
        best = err;
    }
    let dy = sol[..m].to_vec();
    let mut dx = dxp;
    for (j, nj) in nmats.iter().enumerate() {
        let w = sol[m + j];
        if w != 0.0 {
            for (d, &v) in dx.as_mut_slice().iter_mut().zip(nj.as_slice()) {
                *d += w * v;
            }
        }
    }
    let dy_dd: Vec<Dd> = dy.iter().map(|&v| Dd::new(v)).collect();
    let dz = map.adjoint_dd(&dy_dd).add(&res.rd);
    Ok((dx.to_dd(), dy, dz))
}

/// Discretized central path on the grid `α = σᵏ`.
#[derive(Clone, Debug)]
pub struct PathTrace {
    pub sigma: f64,
    pub b_dir: SymMatrix,
    pub points: Vec<PathPoint>,
    /// Descending eigenvalues of `X(σᵏ)` per stored point.
    pub eigs_x: Vec<Vec<f64>>,
    pub eigs_z: Vec<Vec<f64>>,
    /// Backward error of `X(σᵏ)` with respect to the unperturbed set.
    pub berr: Vec<f64>,
    /// Set when a centering step failed; the trace ends at the last success.
    pub truncated: Option<Error>,
    /// `k_max` was lowered to respect the conditioning floor.
    pub clamped: bool,
    pub floor: f64,
}

impl PathTrace {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn last(&self) -> Option<&PathPoint> {
        self.points.last()
    }

    pub fn is_truncated(&self) -> bool {
        self.truncated.is_some()
    }

    /// The next grid point would fall below the conditioning floor.
    pub fn near_floor(&self) -> bool {
        self.last().is_some_and(|p| p.alpha * self.sigma < self.floor)
    }

    /// Continues the path up to `k_max` (clamped to the floor).
    pub fn extend(&mut self, f: &Spectrahedron, cfg: &PathConfig, k_max: usize) {
        if self.truncated.is_some() {
            return;
        }
        let cfg = PathConfig {
            k_max,
            sigma: self.sigma,
            ..cfg.clone()
        };
        let kend = cfg.effective_k_max();
        self.clamped = kend < k_max;
        let k0 = self.last().map_or(1, |p| p.k + 1);
        for k in k0..=kend {
            let alpha = cfg.alpha(k);
            let warm = self.points.last();
            let from = warm.map_or(alpha, |p| p.alpha);
            match center_continued(f, &self.b_dir, from, alpha, warm, &cfg, 0) {
                Ok(mut p) => {
                    p.k = k;
                    let (ex, _) = jacobi_eig(&p.xdd);
                    let (ez, _) = jacobi_eig(&p.zdd);
                    let ex: Vec<f64> = ex.iter().map(|v| v.to_f64()).collect();
                    let ez: Vec<f64> = ez.iter().map(|v| v.to_f64()).collect();
                    let berr = match backward_error_dd(&f.map, &p.xdd, &ex) {
                        Ok(v) => v,
                        Err(e) => {
                            self.truncated = Some(e);
                            return;
                        }
                    };
                    self.eigs_x.push(ex);
                    self.eigs_z.push(ez);
                    self.berr.push(berr);
                    self.points.push(p);
                }
                Err(e) => {
                    self.truncated = Some(e);
                    return;
                }
            }
        }
    }
}

/// Deepest bisection of a single grid step.
const MAX_SPLIT: usize = 6;
/// Newton budget of a single attempt before the step is split.
const SPLIT_BUDGET: usize = 25;

/// Centers at `alpha` starting from the point at `from`. When the Newton
/// iteration stalls the step is split geometrically and the midpoint is
/// centered first; the central point at `alpha` is unique, so only the
/// route changes.
fn center_continued(
    f: &Spectrahedron,
    b_dir: &SymMatrix,
    from: f64,
    alpha: f64,
    warm: Option<&PathPoint>,
    cfg: &PathConfig,
    depth: usize,
) -> Result<PathPoint> {
    let last_try = depth >= MAX_SPLIT || warm.is_none();
    let budget = if last_try {
        cfg.max_iter
    } else {
        cfg.max_iter.min(SPLIT_BUDGET)
    };
    let attempt = PathConfig {
        max_iter: budget,
        ..cfg.clone()
    };
    match center(f, b_dir, alpha, warm, &attempt) {
        Ok(p) => Ok(p),
        Err(Error::MaxIterations { .. } | Error::LineSearchStall { .. }) if !last_try => {
            let mid = libm::sqrt(from * alpha);
            let pm = center_continued(f, b_dir, from, mid, warm, cfg, depth + 1)?;
            let mut p = center_continued(f, b_dir, mid, alpha, Some(&pm), cfg, depth + 1)?;
            p.iterations += pm.iterations + budget;
            Ok(p)
        }
        Err(e) => Err(e),
    }
}

/// Follows the path from `k = 1` to `cfg.k_max`, warm starting each point
/// from its predecessor.
pub fn follow(f: &Spectrahedron, b_dir: &SymMatrix, cfg: &PathConfig) -> Result<PathTrace> {
    cfg.validate()?;
    if b_dir.n() != f.n() {
        return Err(Error::InvalidDimension {
            expected: f.n(),
            found: b_dir.n(),
        });
    }
    if cholesky(b_dir.as_mat()).is_none() {
        return Err(Error::InvalidConfig("perturbation direction must be positive definite"));
    }
    if !f.map.is_surjective() {
        return Err(Error::NotSurjective {
            rank: f.map.rank(),
            m: f.map.m(),
        });
    }
    let mut trace = PathTrace {
        sigma: cfg.sigma,
        b_dir: b_dir.clone(),
        points: Vec::new(),
        eigs_x: Vec::new(),
        eigs_z: Vec::new(),
        berr: Vec::new(),
        truncated: None,
        clamped: false,
        floor: cfg.floor,
    };
    trace.extend(f, cfg, cfg.k_max);
    Ok(trace)
}

/// Extrapolated limits of the path.
#[derive(Clone, Debug)]
pub struct PathLimits {
    pub x: SymMatrix,
    pub z: SymMatrix,
    pub y: Vec<f64>,
}

const LIMIT_POINTS: usize = 6;

/// Fits `v_k ≈ L + c σᵏ` componentwise over the last six points and returns
/// the constants `L`; `Z̄` is clipped to the PSD cone.
pub fn dual_limit(trace: &PathTrace) -> Result<PathLimits> {
    let len = trace.len();
    if len < LIMIT_POINTS {
        return Err(Error::InsufficientTrace {
            needed: LIMIT_POINTS,
            found: len,
        });
    }
    let tail = &trace.points[len - LIMIT_POINTS..];
    let kl = tail[LIMIT_POINTS - 1].k as f64;
    let s: Vec<f64> = tail.iter().map(|p| libm::pow(trace.sigma, p.k as f64 - kl)).collect();
    let sm = s.iter().sum::<f64>() / LIMIT_POINTS as f64;
    let sxx: f64 = s.iter().map(|v| (v - sm) * (v - sm)).sum();
    let fit = |vals: &[f64]| -> f64 {
        let vm = vals.iter().sum::<f64>() / LIMIT_POINTS as f64;
        let sxy: f64 = s.iter().zip(vals).map(|(a, b)| (a - sm) * (b - vm)).sum();
        let c = sxy / sxx;
        vm - c * sm
    };
    let n = trace.b_dir.n();
    let mut buf = [0.0; LIMIT_POINTS];
    let mut xbar = Mat::zeros(n, n);
    let mut zbar = Mat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            for (b, p) in buf.iter_mut().zip(tail) {
                *b = p.x.get(i, j);
            }
            xbar[(i, j)] = fit(&buf);
            for (b, p) in buf.iter_mut().zip(tail) {
                *b = p.z.get(i, j);
            }
            zbar[(i, j)] = fit(&buf);
        }
    }
    let m = tail[0].y.len();
    let mut ybar = vec![0.0; m];
    for (i, yi) in ybar.iter_mut().enumerate() {
        for (b, p) in buf.iter_mut().zip(tail) {
            *b = p.y[i];
        }
        *yi = fit(&buf);
    }
    let x = SymMatrix::from_mat(&xbar.sym_part())?;
    let z = crate::symcore::proj_psd(&SymMatrix::from_mat(&zbar.sym_part())?)?;
    Ok(PathLimits { x, z, y: ybar })
}
