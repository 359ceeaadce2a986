use proptest::prelude::*;

use sdcheck_core::bench::InstanceSpec;
use sdcheck_core::dense::{jacobi_eig, Mat};
use sdcheck_core::diagnose::{self, EigenTrace, RatioCurves};
use sdcheck_core::spectra::{backward_error, forward_error, FaceRep, LinearMapA};
use sdcheck_core::symcore::{dist_psd, eig_desc, proj_psd, smat, svec, svec_len};
use sdcheck_core::{Dd, Scalar, SymMatrix};

fn sym(n: usize) -> impl Strategy<Value = SymMatrix> {
    prop::collection::vec(-10.0f64..10.0, n * n).prop_map(move |v| {
        let m = Mat::from_vec(n, n, v);
        SymMatrix::from_mat(&m.add(&m.transpose()).scale(0.5)).unwrap()
    })
}

fn sym_any() -> impl Strategy<Value = SymMatrix> {
    (1usize..7).prop_flat_map(sym)
}

fn pair() -> impl Strategy<Value = (SymMatrix, SymMatrix)> {
    (1usize..7).prop_flat_map(|n| (sym(n), sym(n)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn svec_is_an_isometry((x, y) in pair()) {
        let direct = x.inner(&y);
        let via: f64 = svec(&x).iter().zip(svec(&y)).map(|(a, b)| a * b).sum();
        prop_assert!((direct - via).abs() <= 1e-12 * (x.frobenius() * y.frobenius()).max(1e-300));
        prop_assert_eq!(svec(&x).len(), svec_len(x.n()));
        let back = smat(x.n(), &svec(&x)).unwrap();
        prop_assert!(back.sub(&x).frobenius() <= 1e-14 * x.frobenius().max(1.0));
    }

    #[test]
    fn eigendecomposition_reconstructs(x in sym_any()) {
        let s = eig_desc(&x).unwrap();
        prop_assert!(s.values.windows(2).all(|w| w[0] >= w[1]));
        let err = s.reconstruct().sub(&x).frobenius();
        prop_assert!(err <= 1e-12 * x.frobenius().max(1.0));
        let v = Mat::from_fn(x.n(), x.n(), |i, j| s.vectors[(i, j)]);
        let gram = v.tmatmul(&v).sub(&Mat::identity(x.n()));
        prop_assert!(gram.frob() <= 1e-12);
    }

    #[test]
    fn psd_projection_is_idempotent_and_nearest(x in sym_any()) {
        let p = proj_psd(&x).unwrap();
        prop_assert!(dist_psd(&p).unwrap() <= 1e-12 * x.frobenius().max(1.0));
        let d = dist_psd(&x).unwrap();
        prop_assert!((x.sub(&p).frobenius() - d).abs() <= 1e-10 * x.frobenius().max(1.0));
        let lmin = eig_desc(&x).unwrap().values.last().copied().unwrap();
        prop_assert_eq!(d == 0.0, lmin >= -1e-12 * x.frobenius().max(1.0) || d == 0.0);
    }

    #[test]
    fn permuted_diagonal_sorts(mut d in prop::collection::vec(-5.0f64..5.0, 1..8)) {
        let x = SymMatrix::diag(&d);
        let s = eig_desc(&x).unwrap();
        d.sort_by(|a, b| b.partial_cmp(a).unwrap());
        prop_assert_eq!(s.values, d);
    }

    #[test]
    fn double_double_sum_and_product(a in -1e6f64..1e6, b in -1e6f64..1e6) {
        let p = Dd::new(a) * Dd::new(b);
        prop_assert_eq!(p.hi, a * b);
        // The low word carries the rounding error of the product exactly.
        let err = a.mul_add(b, -(a * b));
        prop_assert_eq!(p.lo, err);
        let s = (Dd::new(a) + Dd::new(b)) - Dd::new(b);
        prop_assert_eq!(s.to_f64(), a);
    }

    #[test]
    fn jacobi_matches_on_diagonally_dominant(x in sym(4)) {
        let a = x.as_mat().add(&Mat::identity(4).scale(100.0));
        let (vals, _) = jacobi_eig(&a);
        let tr: f64 = vals.iter().sum();
        prop_assert!((tr - a.trace()).abs() <= 1e-10 * a.frob());
    }

    #[test]
    fn reduce_commutes_with_adjoint(seed in 0u64..1000, r in 1usize..4) {
        let f = InstanceSpec::Slater { n: 4, m: 3, seed }.generate().unwrap();
        let (_, q) = jacobi_eig(&Mat::from_fn(4, 4, |i, j| ((i * 7 + j * 3 + seed as usize) % 5) as f64).sym_part());
        let v = Mat::from_fn(4, r, |i, j| q[(i, j)]);
        let y = [0.3, -1.2, 0.7];
        let reduced: Vec<SymMatrix> = f.map.mats().iter().map(|a| a.congruence_t(&v)).collect();
        let lhs = reduced.iter().zip(y).fold(SymMatrix::zeros(r), |acc, (a, c)| acc.add(&a.scale(c)));
        let rhs = f.map.adjoint(&y).unwrap().congruence_t(&v);
        prop_assert!(lhs.sub(&rhs).frobenius() <= 1e-12 * rhs.frobenius().max(1.0));
        let rm = Mat::from_fn(r, r, |i, j| (1 + i + j) as f64);
        let rr = SymMatrix::from_mat(&rm).unwrap();
        for (a, ar) in f.map.mats().iter().zip(&reduced) {
            let big = rr.congruence(&v);
            prop_assert!((ar.inner(&rr) - a.inner(&big)).abs() <= 1e-10 * a.frobenius() * big.frobenius().max(1.0));
        }
    }

    #[test]
    fn face_from_spectral_split_validates(x in sym(4), k in 1usize..4) {
        let s = eig_desc(&x).unwrap();
        let vk = Mat::from_fn(4, 4 - k, |i, j| s.vectors[(i, j)]);
        let uk = Mat::from_fn(4, k, |i, j| s.vectors[(i, 4 - k + j)]);
        let w = SymMatrix::diag(&vec![1.0; k]).congruence(&uk);
        prop_assert!(FaceRep::new(vk.clone(), w.clone()).is_ok());
        let bad = w.add(&SymMatrix::outer(&vk.col(0)).scale(1e-3));
        prop_assert!(FaceRep::new(vk, bad).is_err());
    }

    #[test]
    fn feasible_point_witnesses_both_distances(x in sym(3)) {
        // Each part of the backward error is at most the forward error, so the
        // sum is at most twice it. The sum alone can exceed it.
        let f = InstanceSpec::WorstCase { n: 3 }.generate().unwrap();
        let ef = forward_error(&f, &x).unwrap();
        let aff = f.map.affine_distance(&x).unwrap();
        let psd = dist_psd(&x).unwrap();
        let tol = 1e-12 * ef + 1e-14;
        prop_assert!(aff <= ef + tol && psd <= ef + tol);
        prop_assert!(backward_error(&f, &x).unwrap() <= 2.0 * ef + tol);
    }

    #[test]
    fn geometric_series_give_their_ratio(s in 0.2f64..0.9, c in prop::collection::vec(0.1f64..10.0, 3)) {
        let eigs: Vec<Vec<f64>> = (1..=20)
            .map(|k| {
                let mut e: Vec<f64> = c.iter().map(|ci| ci * s.powi(k)).collect();
                e.sort_by(|a, b| b.partial_cmp(a).unwrap());
                e
            })
            .collect();
        let t = EigenTrace { sigma: s, alphas: (1..=20).map(|k| s.powi(k)).collect(), eigs, near_floor: false };
        let curves = diagnose::ratios(&t, 10).unwrap();
        for row in &curves.rq {
            prop_assert!(row.iter().all(|&r| (r - s).abs() <= 1e-12));
        }
    }

    #[test]
    fn tail_ratios_respect_pointwise_order(
        ra in 0.3f64..0.95,
        rb in 0.3f64..0.95,
        c in 0.01f64..1.0,
    ) {
        // a_k = c·min(ra, rb)^k ≤ b_k = max(ra, rb)^k.
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        let eigs: Vec<Vec<f64>> = (1..=25).map(|k| vec![hi.powi(k), c * lo.powi(k)]).collect();
        let t = EigenTrace { sigma: 0.6, alphas: (1..=25).map(|k| 0.6f64.powi(k)).collect(), eigs, near_floor: false };
        let curves = diagnose::ratios(&t, 10).unwrap();
        let inf = curves.liminf_proxy();
        let sup = curves.limsup_proxy();
        prop_assert!(inf[1] <= sup[0] + 1e-12);
    }

    #[test]
    fn rank_bound_splits_consistently(p in prop::collection::vec(0.3f64..1.0, 1..8), tau in 0.5f64..0.95) {
        let len = 14;
        let curves = RatioCurves {
            sigma: 0.6,
            rq: p.iter().map(|&v| vec![v; len - 1]).collect(),
            rn: vec![vec![1.0; len]; p.len().saturating_sub(1)],
            tail_window: 10,
            usable: len,
        };
        let rb = diagnose::max_rank_bound(&curves, tau).unwrap();
        prop_assert!(rb.r_bar <= p.len());
        prop_assert!(p[rb.r_bar..].iter().all(|&v| v <= tau));
        if rb.clean {
            prop_assert!(p[..rb.r_bar].iter().all(|&v| v > tau));
        }
        let sd = diagnose::sd_lower_bound(&curves, rb.r_bar).unwrap();
        if rb.r_bar < p.len() {
            let d = sd.d_lower.unwrap();
            prop_assert!(d >= 1 && d <= (p.len() - 1).max(1));
        } else {
            prop_assert!(sd.d_lower.is_none());
        }
    }

    #[test]
    fn ferror_bound_is_tail_norm(d in prop::collection::vec(0.0f64..3.0, 1..7), r in 0usize..7) {
        let r = r.min(d.len());
        let x = SymMatrix::diag(&d);
        let mut sorted = d.clone();
        sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let want = sorted[r..].iter().map(|v| v * v).sum::<f64>().sqrt();
        let got = diagnose::ferror_lower_bound(&x, r).unwrap();
        prop_assert!((got - want).abs() <= 1e-14 * want.max(1.0));
    }

    #[test]
    fn generators_are_deterministic(seed in 0u64..10_000) {
        let spec = InstanceSpec::RankRSd1 { n: 5, r: 2, seed };
        let a = spec.generate().unwrap();
        let b = spec.generate().unwrap();
        prop_assert_eq!(a.map.mats(), b.map.mats());
        prop_assert_eq!(a.map.b(), b.map.b());
        let text = spec.to_string();
        prop_assert_eq!(InstanceSpec::parse(&text).unwrap(), spec);
    }

    #[test]
    fn sturm_slope_recovers_power(p in 0.05f64..1.0) {
        let eb: Vec<f64> = (1..=20).map(|k| 0.6f64.powi(k)).collect();
        let ef: Vec<f64> = eb.iter().map(|v| 3.0 * v.powf(p)).collect();
        let s = diagnose::sturm_exponent(&ef, &eb).unwrap();
        prop_assert!((s - p).abs() <= 1e-10);
    }
}

#[test]
fn linear_map_rejects_mismatched_rows() {
    let a = SymMatrix::identity(2);
    assert!(LinearMapA::new(2, vec![a.clone(), a], vec![1.0]).is_err());
}
