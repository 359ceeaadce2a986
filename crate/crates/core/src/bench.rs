//! Certified instance generators and closed-form fixtures.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dense::{jacobi_eig, Mat};
use crate::diagnose::EigenTrace;
use crate::error::{Error, Result};
use crate::facialred::replay_chain;
use crate::spectra::{Certificate, FaceRep, LinearMapA, Spectrahedron};
use crate::symcore::SymMatrix;

/// Recipe for a generated instance. Identical specs give bit-identical
/// instances.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum InstanceSpec {
    WorstCase { n: usize },
    Slater { n: usize, m: usize, seed: u64 },
    RankRSd1 { n: usize, r: usize, seed: u64 },
    DirectSum(Vec<InstanceSpec>),
}

impl InstanceSpec {
    pub fn generate(&self) -> Result<Spectrahedron> {
        match self {
            InstanceSpec::WorstCase { n } => gen_worst_case(*n),
            InstanceSpec::Slater { n, m, seed } => gen_slater(*n, *m, *seed),
            InstanceSpec::RankRSd1 { n, r, seed } => gen_rank_r_sd1(*n, *r, *seed),
            InstanceSpec::DirectSum(children) => {
                let built = children.iter().map(|c| c.generate()).collect::<Result<Vec<_>>>()?;
                gen_direct_sum(&built)
            }
        }
    }

    pub fn n(&self) -> usize {
        match self {
            InstanceSpec::WorstCase { n } | InstanceSpec::Slater { n, .. } | InstanceSpec::RankRSd1 { n, .. } => *n,
            InstanceSpec::DirectSum(c) => c.iter().map(|s| s.n()).sum(),
        }
    }

    /// Parses `kind:key=value,...` with kinds `worst_case`, `slater`,
    /// `rank_r_sd1`, or `direct_sum(spec;spec;...)`. Dashes are accepted in
    /// place of underscores.
    pub fn parse(text: &str) -> Result<Self> {
        let s = text.trim();
        let norm: String = s.chars().map(|c| if c == '-' { '_' } else { c }).collect();
        if let Some(inner) = norm.strip_prefix("direct_sum(").and_then(|r| r.strip_suffix(')')) {
            let parts = split_top_level(inner)?;
            if parts.len() < 2 {
                return Err(Error::InvalidSpec("direct_sum needs at least two children"));
            }
            let children = parts.iter().map(|p| InstanceSpec::parse(p)).collect::<Result<Vec<_>>>()?;
            return Ok(InstanceSpec::DirectSum(children));
        }
        let (kind, args) = match norm.split_once(':') {
            Some((k, a)) => (k, a),
            None => (norm.as_str(), ""),
        };
        let mut n = None;
        let mut m = None;
        let mut r = None;
        let mut seed = None;
        for kv in args.split(',').filter(|p| !p.trim().is_empty()) {
            let (k, v) = kv.split_once('=').ok_or(Error::InvalidSpec("expected key=value"))?;
            let k = k.trim();
            let v = v.trim();
            match k {
                "n" => n = Some(v.parse::<usize>().map_err(|_| Error::InvalidSpec("n must be an integer"))?),
                "m" => m = Some(v.parse::<usize>().map_err(|_| Error::InvalidSpec("m must be an integer"))?),
                "r" => r = Some(v.parse::<usize>().map_err(|_| Error::InvalidSpec("r must be an integer"))?),
                "seed" => seed = Some(v.parse::<u64>().map_err(|_| Error::InvalidSpec("seed must be an integer"))?),
                _ => return Err(Error::InvalidSpec("unknown key")),
            }
        }
        let n = n.ok_or(Error::InvalidSpec("missing n"))?;
        match kind.trim() {
            "worst_case" => Ok(InstanceSpec::WorstCase { n }),
            "slater" => Ok(InstanceSpec::Slater {
                n,
                m: m.ok_or(Error::InvalidSpec("missing m"))?,
                seed: seed.unwrap_or(0),
            }),
            "rank_r_sd1" => Ok(InstanceSpec::RankRSd1 {
                n,
                r: r.ok_or(Error::InvalidSpec("missing r"))?,
                seed: seed.unwrap_or(0),
            }),
            _ => Err(Error::InvalidSpec("unknown instance kind")),
        }
    }
}

fn split_top_level(s: &str) -> Result<Vec<&str>> {
    let mut parts = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, c) in s.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            ';' if depth == 0 => {
                parts.push(&s[start..i]);
                start = i + 1;
            }
            _ => {}
        }
        if depth < 0 {
            return Err(Error::InvalidSpec("unbalanced parentheses"));
        }
    }
    if depth != 0 {
        return Err(Error::InvalidSpec("unbalanced parentheses"));
    }
    parts.push(&s[start..]);
    Ok(parts)
}

impl fmt::Display for InstanceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InstanceSpec::WorstCase { n } => write!(f, "worst_case:n={n}"),
            InstanceSpec::Slater { n, m, seed } => write!(f, "slater:n={n},m={m},seed={seed}"),
            InstanceSpec::RankRSd1 { n, r, seed } => write!(f, "rank_r_sd1:n={n},r={r},seed={seed}"),
            InstanceSpec::DirectSum(c) => {
                write!(f, "direct_sum(")?;
                for (i, s) in c.iter().enumerate() {
                    if i > 0 {
                        write!(f, ";")?;
                    }
                    write!(f, "{s}")?;
                }
                write!(f, ")")
            }
        }
    }
}

fn chain_by_replay(map: &LinearMapA, ys: Vec<Vec<f64>>) -> Result<(Vec<(Vec<f64>, SymMatrix)>, Mat<f64>)> {
    // Replay one multiplier at a time to learn the reduced exposing vectors.
    let mut chain: Vec<(Vec<f64>, SymMatrix)> = Vec::with_capacity(ys.len());
    let mut v = Mat::identity(map.n());
    for y in ys {
        let probe = {
            let mut c = chain.clone();
            c.push((y.clone(), SymMatrix::zeros(v.cols())));
            c
        };
        // The stored Z of the probe is a placeholder; compute the real one.
        let z = map.adjoint(&y)?.congruence_t(&v);
        let mut c = probe;
        c.last_mut().expect("pushed above").1 = z;
        let replay = replay_chain(map, &c)?;
        v = replay.v;
        chain = c;
    }
    Ok((chain, v))
}

/// `{X ⪰ 0 : X₁₁ = 1, X₂₂ = 0, X_{j+1,j+1} = X_{1,j} (j = 2..n−1)}`.
///
/// The only feasible point is `e₁e₁ᵀ`. Each facial reduction step exposes one
/// more coordinate: `X₂₂ = 0` forces `X₁₂ = 0`, which forces `X₃₃ = 0`, and so
/// on, so the singularity degree is `n − 1`.
pub fn gen_worst_case(n: usize) -> Result<Spectrahedron> {
    if n < 2 {
        return Err(Error::InvalidSpec("worst_case needs n >= 2"));
    }
    let mut mats = vec![SymMatrix::unit(n, 0, 0), SymMatrix::unit(n, 1, 1)];
    for j in 2..n {
        mats.push(SymMatrix::unit(n, j, j).sub(&SymMatrix::unit(n, 0, j - 1)));
    }
    let m = mats.len();
    let mut b = vec![0.0; m];
    b[0] = 1.0;
    let map = LinearMapA::new(n, mats, b)?;
    let ys: Vec<Vec<f64>> = (1..m)
        .map(|k| {
            let mut y = vec![0.0; m];
            y[k] = 1.0;
            y
        })
        .collect();
    let (chain, _) = chain_by_replay(&map, ys)?;
    let mut e1 = vec![0.0; n];
    e1[0] = 1.0;
    let xs = SymMatrix::outer(&e1);
    let face = FaceRep::from_basis(Mat::from_vec(n, 1, e1))?;
    let cert = Certificate {
        sd_true: Some(n - 1),
        max_rank_true: Some(1),
        solution_face: Some(face),
        singleton_solution: Some(xs),
        exposing_chain: Some(chain),
    };
    Ok(Spectrahedron::with_certificate(map, cert))
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn random_symmetric(n: usize, rng: &mut ChaCha8Rng) -> SymMatrix {
    let g = Mat::from_fn(n, n, |_, _| normal(rng));
    SymMatrix::from_mat_unchecked(g.sym_part())
}

fn random_orthogonal(n: usize, rng: &mut ChaCha8Rng) -> Mat<f64> {
    let (_, q) = jacobi_eig(random_symmetric(n, rng).as_mat());
    q
}

fn random_pd(n: usize, rng: &mut ChaCha8Rng) -> SymMatrix {
    let q = random_orthogonal(n, rng);
    let d: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..2.0)).collect();
    SymMatrix::diag(&d).congruence(&q)
}

/// Random instance with a positive definite feasible point. The first
/// constraint matrix is positive definite so the feasible set is bounded.
pub fn gen_slater(n: usize, m: usize, seed: u64) -> Result<Spectrahedron> {
    if n == 0 || m == 0 || m + 1 > n * (n + 1) / 2 {
        return Err(Error::InvalidSpec("slater needs 1 <= m <= n(n+1)/2 - 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..10 {
        let x0 = random_pd(n, &mut rng);
        let mut mats = vec![random_pd(n, &mut rng)];
        for _ in 1..m {
            mats.push(random_symmetric(n, &mut rng));
        }
        let b: Vec<f64> = mats.iter().map(|a| a.inner(&x0)).collect();
        let map = LinearMapA::new(n, mats, b)?;
        if !map.is_surjective() {
            continue;
        }
        let cert = Certificate {
            sd_true: Some(0),
            max_rank_true: Some(n),
            solution_face: Some(FaceRep::new(Mat::identity(n), SymMatrix::zeros(n))?),
            singleton_solution: None,
            exposing_chain: Some(Vec::new()),
        };
        return Ok(Spectrahedron::with_certificate(map, cert));
    }
    Err(Error::GenFailed)
}

/// Random instance with singularity degree 1 and maximum rank `r`.
///
/// Constraints: `⟨W, X⟩ = 0` for a PSD `W` of rank `n − r` exposing the face
/// `V S^r Vᵀ`, a trace constraint that keeps the set bounded, and random
/// constraints satisfied by the interior point `V R̄ Vᵀ` of the face.
pub fn gen_rank_r_sd1(n: usize, r: usize, seed: u64) -> Result<Spectrahedron> {
    if r == 0 || r >= n {
        return Err(Error::InvalidSpec("rank_r_sd1 needs 1 <= r <= n - 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let extra = r.min(r * (r + 1) / 2 - 1);
    for _ in 0..10 {
        let q = random_orthogonal(n, &mut rng);
        let v = Mat::from_fn(n, r, |i, j| q[(i, j)]);
        let u = Mat::from_fn(n, n - r, |i, j| q[(i, r + j)]);
        let wd: Vec<f64> = (0..n - r).map(|_| rng.random_range(0.5..2.0)).collect();
        let w = SymMatrix::diag(&wd).congruence(&u);
        let rbar = random_pd(r, &mut rng);
        let xbar = rbar.congruence(&v);
        let mut mats = vec![w.clone(), SymMatrix::identity(n)];
        for _ in 0..extra {
            mats.push(random_symmetric(n, &mut rng));
        }
        let b: Vec<f64> = mats.iter().map(|a| a.inner(&xbar)).collect();
        let mut b = b;
        b[0] = 0.0;
        let map = LinearMapA::new(n, mats, b)?;
        if !map.is_surjective() {
            continue;
        }
        let mut y = vec![0.0; map.m()];
        y[0] = 1.0;
        let (chain, vfin) = chain_by_replay(&map, vec![y])?;
        if vfin.cols() != r {
            continue;
        }
        let cert = Certificate {
            sd_true: Some(1),
            max_rank_true: Some(r),
            solution_face: Some(FaceRep::new(v, w)?),
            singleton_solution: None,
            exposing_chain: Some(chain),
        };
        return Ok(Spectrahedron::with_certificate(map, cert));
    }
    Err(Error::GenFailed)
}

/// Block-diagonal composition. Off-diagonal blocks are unconstrained and are
/// controlled only through positive semidefiniteness. The exposing chain is
/// the blockwise concatenation of the children's chains and its length is
/// established by replay on the composite.
pub fn gen_direct_sum(children: &[Spectrahedron]) -> Result<Spectrahedron> {
    if children.len() < 2 {
        return Err(Error::InvalidSpec("direct_sum needs at least two children"));
    }
    let mut certs = Vec::with_capacity(children.len());
    for c in children {
        let cert = c.certificate.as_ref().ok_or(Error::InvalidSpec("uncertified child"))?;
        let ok = cert.exposing_chain.is_some() && cert.solution_face.is_some() && cert.max_rank_true.is_some();
        if !ok {
            return Err(Error::InvalidSpec("child certificate lacks chain, face or rank"));
        }
        certs.push(cert);
    }
    let n: usize = children.iter().map(|c| c.n()).sum();
    let m: usize = children.iter().map(|c| c.m()).sum();
    let mut mats = Vec::with_capacity(m);
    let mut b = Vec::with_capacity(m);
    let mut offsets = Vec::with_capacity(children.len());
    let mut row_offsets = Vec::with_capacity(children.len());
    let (mut off, mut roff) = (0, 0);
    for c in children {
        offsets.push(off);
        row_offsets.push(roff);
        for a in c.map.mats() {
            mats.push(embed(a, n, off));
        }
        b.extend_from_slice(c.map.b());
        off += c.n();
        roff += c.m();
    }
    let map = LinearMapA::new(n, mats, b)?;

    let len = certs.iter().map(|c| c.exposing_chain.as_ref().map_or(0, |ch| ch.len())).max().unwrap_or(0);
    let ys: Vec<Vec<f64>> = (0..len)
        .map(|k| {
            let mut y = vec![0.0; m];
            for (ci, cert) in certs.iter().enumerate() {
                if let Some((yc, _)) = cert.exposing_chain.as_ref().and_then(|ch| ch.get(k)) {
                    y[row_offsets[ci]..row_offsets[ci] + yc.len()].copy_from_slice(yc);
                }
            }
            y
        })
        .collect();
    let (chain, vfin) = chain_by_replay(&map, ys)?;

    let r_face: usize = certs.iter().map(|c| c.solution_face.as_ref().map_or(0, |f| f.dim())).sum();
    if vfin.cols() != r_face {
        return Err(Error::CertificateMismatch("composite chain misses the block face"));
    }
    let mut vbig = Mat::zeros(n, r_face);
    let mut wbig = Mat::zeros(n, n);
    let mut col = 0;
    for (ci, cert) in certs.iter().enumerate() {
        let face = cert.solution_face.as_ref().expect("checked above");
        let o = offsets[ci];
        for i in 0..face.v().rows() {
            for j in 0..face.dim() {
                vbig[(o + i, col + j)] = face.v()[(i, j)];
            }
            for j in 0..face.v().rows() {
                wbig[(o + i, o + j)] = face.w().get(i, j);
            }
        }
        col += face.dim();
    }
    let cert = Certificate {
        sd_true: Some(chain.len()),
        max_rank_true: Some(certs.iter().map(|c| c.max_rank_true.unwrap_or(0)).sum()),
        solution_face: Some(FaceRep::new(vbig, SymMatrix::from_mat_unchecked(wbig))?),
        singleton_solution: None,
        exposing_chain: Some(chain),
    };
    Ok(Spectrahedron::with_certificate(map, cert))
}

fn embed(a: &SymMatrix, n: usize, off: usize) -> SymMatrix {
    let k = a.n();
    let mut out = Mat::zeros(n, n);
    for i in 0..k {
        for j in 0..k {
            out[(off + i, off + j)] = a.get(i, j);
        }
    }
    SymMatrix::from_mat_unchecked(out)
}

/// Eigenvalue curves of
///
/// ```text
/// S(α) = [[3, √α, 0], [√α, α/(3 − α²), 0], [0, 0, α³]]
/// ```
///
/// whose two vanishing diagonal entries decay at different rates (`α` and
/// `α³`) while both vanishing eigenvalues are `Θ(α³)`.
#[derive(Clone, Debug)]
pub struct CexampleFixture {
    pub trace: EigenTrace,
    /// Diagonal entries `(S₁₁, S₂₂, S₃₃)` per grid point.
    pub diag: Vec<[f64; 3]>,
}

pub fn cexample_trace(alphas: &[f64]) -> Result<CexampleFixture> {
    if alphas.len() < 2 {
        return Err(Error::InvalidSeries);
    }
    if alphas.iter().any(|&a| !(a > 0.0) || !a.is_finite()) || alphas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidSeries);
    }
    let root3 = libm::sqrt(3.0);
    if alphas[0] >= root3 {
        return Err(Error::OutOfDomain);
    }
    let mut eigs = Vec::with_capacity(alphas.len());
    let mut diag = Vec::with_capacity(alphas.len());
    for &a in alphas {
        let d2 = a / (3.0 - a * a);
        let tr = 3.0 + d2;
        // det = 3α/(3−α²) − α = α³/(3−α²), formed without cancellation.
        let det = a * a * a / (3.0 - a * a);
        let big = 0.5 * (tr + libm::sqrt(tr * tr - 4.0 * det));
        let small = det / big;
        let a3 = a * a * a;
        let mut e = [big, small, a3];
        e.sort_by(|x, y| y.partial_cmp(x).unwrap_or(core::cmp::Ordering::Equal));
        eigs.push(e.to_vec());
        diag.push([3.0, d2, a3]);
    }
    let sigma = alphas[1] / alphas[0];
    Ok(CexampleFixture {
        trace: EigenTrace {
            sigma,
            alphas: alphas.to_vec(),
            eigs,
            near_floor: false,
        },
        diag,
    })
}

/// Small certified instances covering every generator.
pub fn bundled() -> Vec<InstanceSpec> {
    let mut v: Vec<InstanceSpec> = (2..=6).map(|n| InstanceSpec::WorstCase { n }).collect();
    v.extend([
        InstanceSpec::Slater { n: 2, m: 1, seed: 0 },
        InstanceSpec::Slater { n: 4, m: 3, seed: 1 },
        InstanceSpec::Slater { n: 5, m: 6, seed: 2 },
        InstanceSpec::RankRSd1 { n: 3, r: 1, seed: 0 },
        InstanceSpec::RankRSd1 { n: 6, r: 2, seed: 3 },
        InstanceSpec::RankRSd1 { n: 8, r: 3, seed: 5 },
        InstanceSpec::DirectSum(vec![InstanceSpec::WorstCase { n: 3 }, InstanceSpec::WorstCase { n: 3 }]),
        InstanceSpec::DirectSum(vec![InstanceSpec::WorstCase { n: 2 }, InstanceSpec::Slater { n: 3, m: 2, seed: 0 }]),
        InstanceSpec::DirectSum(vec![InstanceSpec::WorstCase { n: 4 }, InstanceSpec::RankRSd1 { n: 4, r: 2, seed: 7 }]),
    ]);
    v
}

/// Twenty seeded certified instances with `n ≤ 12`, mixing all generators.
pub fn soundness_suite() -> Vec<InstanceSpec> {
    let mut v = Vec::with_capacity(20);
    for n in 2..=7 {
        v.push(InstanceSpec::WorstCase { n });
    }
    for (i, (n, m)) in [(3, 2), (5, 4), (8, 10), (12, 20)].into_iter().enumerate() {
        v.push(InstanceSpec::Slater { n, m, seed: 100 + i as u64 });
    }
    for (i, (n, r)) in [(4, 1), (6, 3), (9, 4), (12, 5), (12, 9)].into_iter().enumerate() {
        v.push(InstanceSpec::RankRSd1 { n, r, seed: 200 + i as u64 });
    }
    v.extend([
        InstanceSpec::DirectSum(vec![InstanceSpec::WorstCase { n: 3 }, InstanceSpec::Slater { n: 2, m: 1, seed: 300 }]),
        InstanceSpec::DirectSum(vec![InstanceSpec::WorstCase { n: 4 }, InstanceSpec::WorstCase { n: 3 }]),
        InstanceSpec::DirectSum(vec![InstanceSpec::RankRSd1 { n: 5, r: 2, seed: 301 }, InstanceSpec::WorstCase { n: 5 }]),
        InstanceSpec::DirectSum(vec![
            InstanceSpec::Slater { n: 3, m: 2, seed: 302 },
            InstanceSpec::RankRSd1 { n: 4, r: 1, seed: 303 },
            InstanceSpec::WorstCase { n: 2 },
        ]),
        InstanceSpec::DirectSum(vec![InstanceSpec::WorstCase { n: 6 }, InstanceSpec::RankRSd1 { n: 6, r: 4, seed: 304 }]),
    ]);
    v
}

/// Human-readable one-line summary of a certificate.
pub fn summary(f: &Spectrahedron) -> String {
    let (sd, r) = f
        .certificate
        .as_ref()
        .map_or((None, None), |c| (c.sd_true, c.max_rank_true));
    let show = |v: Option<usize>| v.map_or_else(|| String::from("?"), |x| format!("{x}"));
    format!("n={} m={} sd_true={} r_true={}", f.n(), f.m(), show(sd), show(r))
}
