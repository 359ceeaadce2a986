use sdcheck_core::bench::{cexample_trace, gen_direct_sum, gen_rank_r_sd1, gen_slater, gen_worst_case, InstanceSpec};
use sdcheck_core::diagnose::{self, count_rates, max_rank_bound, ratios, EigenTrace, DEFAULT_TAU};
use sdcheck_core::experiment::{run_protocol, ProtocolConfig};
use sdcheck_core::facialred::{
    exposing_vector, facial_reduction, singularity_degree, slater_check, FrConfig, FrMode,
};
use sdcheck_core::pathfollow::{follow, PathConfig};
use sdcheck_core::spectra::{forward_error, LinearMapA, Spectrahedron};
use sdcheck_core::symcore::eig_desc;
use sdcheck_core::SymMatrix;

fn protocol(f: &Spectrahedron, every_point: bool) -> sdcheck_core::experiment::ProtocolRun {
    let cfg = ProtocolConfig {
        oracle_every_point: every_point,
        ..ProtocolConfig::default()
    };
    run_protocol(f, &SymMatrix::identity(f.n()), &cfg).unwrap()
}

#[test]
fn worst_case_two_is_a_single_point() {
    let f = gen_worst_case(2).unwrap();
    let cert = f.certificate.as_ref().unwrap();
    assert_eq!(cert.sd_true, Some(1));
    assert_eq!(cert.singleton_solution.as_ref().unwrap(), &SymMatrix::diag(&[1.0, 0.0]));
    assert!(!slater_check(&f, &FrConfig::default()).unwrap().holds);
}

#[test]
fn worst_case_three_reduces_one_coordinate_per_step() {
    let f = gen_worst_case(3).unwrap();
    let cfg = FrConfig::default();
    let e = exposing_vector(&f, &cfg).unwrap();
    assert_eq!(e.q, 1);
    let z = e.z.scale(1.0 / e.z.frobenius());
    assert!(z.sub(&SymMatrix::unit(3, 1, 1)).frobenius() <= 1e-6, "{z:?}");
    for mode in [FrMode::Certified, FrMode::Numerical] {
        let res = facial_reduction(&f, mode, &cfg).unwrap();
        assert_eq!((res.d, res.r), (2, 1), "{}", mode.as_str());
        assert!((res.v[(0, 0)].abs() - 1.0).abs() <= 1e-8);
    }
}

#[test]
fn worst_case_degree_is_n_minus_one() {
    let cfg = FrConfig::default();
    for n in 2..=6 {
        let f = gen_worst_case(n).unwrap();
        assert_eq!(singularity_degree(&f, FrMode::Certified, &cfg).unwrap(), n - 1);
        assert_eq!(singularity_degree(&f, FrMode::Numerical, &cfg).unwrap(), n - 1);
    }
}

#[test]
fn slater_examples() {
    let cfg = FrConfig::default();
    for seed in 0..5 {
        let f = gen_slater(2, 1, seed).unwrap();
        assert!(slater_check(&f, &cfg).unwrap().holds);
        assert_eq!(singularity_degree(&f, FrMode::Numerical, &cfg).unwrap(), 0);
    }
    let free = Spectrahedron::new(LinearMapA::new(3, vec![], vec![]).unwrap());
    assert!(slater_check(&free, &cfg).unwrap().holds);

    let f = gen_slater(4, 3, 1).unwrap();
    let run = protocol(&f, false);
    assert_eq!(run.report.r_bar, 4);
    assert!(run.report.liminf_proxy.iter().all(|&p| (p - 1.0).abs() < 1e-3));
    assert_eq!(run.row.eps_lower, 0.0);
    assert!(run.row.eps_lower.is_sign_positive());
    assert_eq!(run.row.d_lower, None);
    let res = facial_reduction(&f, FrMode::Numerical, &cfg).unwrap();
    assert_eq!(res.d, 0);
    assert_eq!(res.v.cols(), 4);
}

#[test]
fn rank_one_sd1_exposes_the_complement() {
    let f = gen_rank_r_sd1(3, 1, 0).unwrap();
    let face = f.certificate.as_ref().unwrap().solution_face.clone().unwrap();
    let e = exposing_vector(&f, &FrConfig::default()).unwrap();
    assert_eq!(e.q, 2);
    // Range of Z is orthogonal to V.
    let zv = e.z.as_mat().matmul(face.v()).frob();
    assert!(zv <= 1e-8 * e.z.frobenius(), "‖ZV‖ = {zv:e}");
}

#[test]
fn sd1_instance_bounds_and_oracle() {
    let f = gen_rank_r_sd1(6, 2, 3).unwrap();
    let run = protocol(&f, true);
    assert_eq!(run.report.r_bar, 2);
    assert_eq!(run.report.d_lower, Some(1));
    assert_eq!(run.report.n_lambda, 1);
    for (ef, lower) in run.ef.iter().zip(&run.eps_lower_series) {
        assert!(*lower <= ef.unwrap(), "ε̲ = {lower:e} > ε^f = {:e}", ef.unwrap());
    }
}

#[test]
fn direct_sum_examples() {
    let a = gen_direct_sum(&[gen_worst_case(3).unwrap(), gen_slater(2, 1, 4).unwrap()]).unwrap();
    assert_eq!(a.certificate.as_ref().unwrap().max_rank_true, Some(3));
    let b = gen_direct_sum(&[gen_worst_case(3).unwrap(), gen_worst_case(3).unwrap()]).unwrap();
    assert_eq!(b.certificate.as_ref().unwrap().sd_true, Some(2));
    assert_eq!(facial_reduction(&b, FrMode::Certified, &FrConfig::default()).unwrap().d, 2);

    // worst_case(2) ⊕ slater(3, 2): ranks 1 + 3.
    let c = gen_direct_sum(&[gen_worst_case(2).unwrap(), gen_slater(3, 2, 0).unwrap()]).unwrap();
    let run = protocol(&c, false);
    assert_eq!(run.report.r_bar, 4);
    assert_eq!(run.report.d_lower, Some(1));
    assert!(gen_direct_sum(&[gen_worst_case(3).unwrap()]).is_err());
    let bare = Spectrahedron::new(gen_worst_case(2).unwrap().map);
    assert!(gen_direct_sum(&[bare, gen_worst_case(2).unwrap()]).is_err());
}

#[test]
fn worst_case_five_bounds() {
    let f = gen_worst_case(5).unwrap();
    let run = protocol(&f, true);
    let ef = run.row.ef_oracle.unwrap();
    assert!((1e-2..=1e-1).contains(&run.row.eps_lower), "ε̲ = {}", run.row.eps_lower);
    assert!(run.row.eps_lower <= ef);
    assert_eq!(run.report.r_bar, 1);
    assert_eq!(run.report.d_lower, Some(4));
    assert_eq!(run.report.n_lambda, 4);
    let s = run.sturm.unwrap();
    assert!((0.8 / 16.0..=1.0).contains(&s), "slope {s}");
    // The last point is a numerically solved problem far from the answer.
    assert!(run.row.berr_final <= 1e-11);
    assert!(ef >= 1e-2);
}

#[test]
fn worst_case_five_at_the_default_threshold_is_clean() {
    let f = gen_worst_case(5).unwrap();
    let trace = follow(&f, &SymMatrix::identity(5), &PathConfig::default()).unwrap();
    let curves = ratios(&EigenTrace::from_path(&trace), 10).unwrap();
    let rb = max_rank_bound(&curves, DEFAULT_TAU).unwrap();
    assert!(rb.clean);
    assert_eq!(rb.r_bar, 1);
    // The second row settles on the fourth rung σ^{1/8}.
    assert!((rb.proxy[1] - 0.6f64.powf(0.125)).abs() < 1e-3);
}

#[test]
fn cexample_eigenvalues_share_one_rate() {
    let s: f64 = 0.6;
    let alphas: Vec<f64> = (1..=40).map(|k| s.powi(k)).collect();
    let fx = cexample_trace(&alphas).unwrap();
    let curves = ratios(&fx.trace, 10).unwrap();
    let proxy = curves.liminf_proxy();
    let sup = curves.limsup_proxy();
    for i in 1..3 {
        assert!((proxy[i] - s.powi(3)).abs() < 1e-3 && (sup[i] - s.powi(3)).abs() < 1e-3);
    }
    let rb = max_rank_bound(&curves, DEFAULT_TAU).unwrap();
    assert_eq!(rb.r_bar, 1);
    assert_eq!(count_rates(&curves, 1).unwrap().n_lambda, 1);
}

#[test]
fn oracle_dominates_the_lower_bound_on_a_face_instance() {
    let f = InstanceSpec::parse("rank_r_sd1:n=5,r=2,seed=11").unwrap().generate().unwrap();
    let trace = follow(&f, &SymMatrix::identity(5), &PathConfig::default()).unwrap();
    for (p, e) in trace.points.iter().zip(&trace.eigs_x).step_by(5) {
        let lower = diagnose::ferror_lower_bound_values(e, 2).unwrap();
        assert!(lower <= forward_error(&f, &p.x).unwrap() * (1.0 + 1e-9));
    }
    let ev = eig_desc(&trace.last().unwrap().x).unwrap().values;
    assert!(ev[2] < 1e-11);
}
