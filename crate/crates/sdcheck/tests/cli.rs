use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use sdcheck::artifacts::{FrFile, ReportFile};
use sdcheck::instance::InstanceFile;

fn sdcheck(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sdcheck"))
        .current_dir(dir)
        .env_remove("SDCHECK_OUT")
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn report(dir: &Path) -> ReportFile {
    serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

#[test]
fn gen_writes_certified_instances_deterministically() {
    let t = tempfile::tempdir().unwrap();
    let o = sdcheck(t.path(), &["gen", "worst-case", "--n", "5", "--out", "a.json"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("sd_true=4"));
    sdcheck(t.path(), &["gen", "worst-case", "--n", "5", "--out", "b.json"]);
    let a = fs::read(t.path().join("a.json")).unwrap();
    assert_eq!(a, fs::read(t.path().join("b.json")).unwrap());
    let file = InstanceFile::read(&t.path().join("a.json")).unwrap();
    assert_eq!(file.certificate.as_ref().unwrap().sd_true, Some(4));
    assert_eq!((file.n, file.m, file.mats[0].len()), (5, 5, 25));

    let o = sdcheck(t.path(), &["gen", "slater", "--n", "4", "--m", "3", "--seed", "1"]);
    assert_eq!(code(&o), 0);
    let f = InstanceFile::read(&t.path().join("sdcheck-out/slater_n=4_m=3_seed=1.json")).unwrap();
    assert_eq!(f.certificate.unwrap().sd_true, Some(0));

    let o = sdcheck(
        t.path(),
        &["gen", "direct-sum", "--child", "worst_case:n=3", "--child", "slater:n=2,m=1", "--seed", "4", "--out", "ds.json"],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let f = InstanceFile::read(&t.path().join("ds.json")).unwrap();
    assert_eq!(f.spec.as_deref(), Some("direct_sum(worst_case:n=3;slater:n=2,m=1,seed=4)"));
    assert_eq!(f.certificate.unwrap().max_rank_true, Some(3));
}

#[test]
fn invalid_specs_exit_with_code_two() {
    let t = tempfile::tempdir().unwrap();
    for args in [
        &["gen", "worst-case", "--n", "1"][..],
        &["gen", "slater", "--n", "3"],
        &["gen", "pentagon", "--n", "3"],
        &["run", "--instance", "worst_case:n=1"],
        &["run", "--instance", "worst_case:n=3", "--tau", "0.99"],
        &["fr", "--instance", "rank_r_sd1:n=3,r=3"],
        &["run"],
    ] {
        assert_eq!(code(&sdcheck(t.path(), args)), 2, "{args:?}");
    }
}

#[test]
fn run_artifacts_are_reproducible_and_match_the_schema() {
    let t = tempfile::tempdir().unwrap();
    for d in ["r1", "r2"] {
        let o = sdcheck(t.path(), &["run", "--instance", "worst_case:n=3", "--out-dir", d, "--tau", "0.9"]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["report.json", "trace.csv", "curves.csv"] {
        let a = fs::read(t.path().join("r1").join(f)).unwrap();
        assert_eq!(a, fs::read(t.path().join("r2").join(f)).unwrap(), "{f}");
    }
    let rep = report(&t.path().join("r1"));
    assert_eq!(rep.status, "ok");
    let d = rep.diagnostics.unwrap();
    assert_eq!((d.r_bar, d.d_lower, d.n_lambda, d.tau), (1, Some(2), 2, 0.9));
    let row = rep.row.unwrap();
    assert_eq!((row.r_true, row.sd_true), (Some(1), Some(2)));
    assert!(row.ef_oracle.unwrap() > row.eps_lower);

    let text = fs::read_to_string(t.path().join("r1/report.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    for key in ["r_bar", "eps_lower", "d_lower", "N_lambda", "tau", "ladder", "liminf_proxy", "verdicts"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    // Row keys follow the table's column order in the file itself.
    let row_text = &text[text.find("\"row\"").unwrap()..];
    let pos: Vec<usize> = ["berr_final", "r_true", "r_bar", "ef_oracle", "eps_lower", "sd_true", "d_lower", "N_lambda"]
        .iter()
        .map(|k| row_text.find(&format!("\"{k}\"")).unwrap())
        .collect();
    assert!(pos.windows(2).all(|w| w[0] < w[1]), "{pos:?}");

    let trace = fs::read_to_string(t.path().join("r1/trace.csv")).unwrap();
    let mut lines = trace.lines();
    assert_eq!(lines.next().unwrap(), "k,alpha,i,lambda_X,lambda_Z,res_primal,res_dual,res_cent,berr");
    let rows: Vec<Vec<String>> = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    assert_eq!(rows.len(), 3 * 58);
    assert_eq!((rows[0][0].as_str(), rows[0][2].as_str(), rows[2][2].as_str(), rows[3][0].as_str()), ("1", "1", "3", "2"));
    let curves = fs::read_to_string(t.path().join("r1/curves.csv")).unwrap();
    assert!(curves.starts_with("i,k,RQ,RN\r\n"));
    // The last row has neither a successor point nor a lower neighbour.
    assert!(curves.trim_end().ends_with(",,"));
}

#[test]
fn slater_run_reports_full_rank_and_null_bound() {
    let t = tempfile::tempdir().unwrap();
    let o = sdcheck(t.path(), &["run", "--instance", "slater:n=4,m=3,seed=1", "--out-dir", "s"]);
    assert_eq!(code(&o), 0);
    let text = fs::read_to_string(t.path().join("s/report.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["r_bar"], 4);
    assert_eq!(v["eps_lower"].as_f64(), Some(0.0));
    assert!(v["d_lower"].is_null());
}

#[test]
fn truncated_run_exits_three_with_parseable_artifacts() {
    let t = tempfile::tempdir().unwrap();
    let o = sdcheck(t.path(), &["run", "--instance", "worst_case:n=5", "--max-iter", "1", "--out-dir", "x"]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    let rep = report(&t.path().join("x"));
    assert_eq!(rep.status, "truncated");
    assert!(rep.error.is_some());
    for f in ["trace.csv", "curves.csv"] {
        let text = fs::read_to_string(t.path().join("x").join(f)).unwrap();
        let mut r = csv::Reader::from_reader(text.as_bytes());
        assert!(r.headers().unwrap().len() >= 4);
        for rec in r.records() {
            rec.unwrap();
        }
    }
}

#[test]
fn instance_files_run_like_generated_specs() {
    let t = tempfile::tempdir().unwrap();
    sdcheck(t.path(), &["gen", "rank-r-sd1", "--n", "6", "--r", "2", "--seed", "3", "--out", "i.json"]);
    let a = sdcheck(t.path(), &["run", "--instance", "i.json", "--out-dir", "from_file"]);
    let b = sdcheck(t.path(), &["run", "--instance", "rank_r_sd1:n=6,r=2,seed=3", "--out-dir", "from_spec"]);
    assert_eq!((code(&a), code(&b)), (0, 0));
    let (ra, rb) = (report(&t.path().join("from_file")), report(&t.path().join("from_spec")));
    assert_eq!(ra.row, rb.row);
    assert_eq!(ra.instance, "from_file:i.json");
    let row = ra.row.unwrap();
    assert_eq!((row.r_bar, row.d_lower, row.n_lambda), (2, Some(1), 1));
}

#[test]
fn out_dir_comes_from_the_environment_and_jobs_split_directories() {
    let t = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_sdcheck"))
        .current_dir(t.path())
        .env("SDCHECK_OUT", "envdir")
        .args(["run", "--instance", "worst_case:n=2", "--instance", "worst_case:n=3", "--jobs", "2"])
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let out = String::from_utf8_lossy(&o.stdout);
    let first = out.lines().next().unwrap();
    assert!(first.starts_with("worst_case:n=2:"), "{out}");
    for d in ["worst_case_n=2", "worst_case_n=3"] {
        assert_eq!(report(&t.path().join("envdir").join(d)).status, "ok");
    }
}

#[test]
fn unwritable_output_exits_four() {
    let t = tempfile::tempdir().unwrap();
    fs::write(t.path().join("blocker"), "file").unwrap();
    let o = sdcheck(t.path(), &["run", "--instance", "worst_case:n=2", "--out-dir", "blocker/sub"]);
    assert_eq!(code(&o), 4);
    let o = sdcheck(t.path(), &["run", "--instance", "missing.json"]);
    assert_eq!(code(&o), 4);
}

#[test]
fn facial_reduction_chains() {
    let t = tempfile::tempdir().unwrap();
    let cases = [
        ("worst_case:n=3", 3, "numerical", 2, 1),
        ("slater:n=3,m=2,seed=0", 3, "numerical", 0, 3),
        ("worst_case:n=5", 5, "certified", 4, 1),
    ];
    for (spec, n, mode, d, r) in cases {
        let o = sdcheck(t.path(), &["fr", "--instance", spec, "--mode", mode, "--out", "fr.json"]);
        assert_eq!(code(&o), 0, "{spec}: {}", String::from_utf8_lossy(&o.stderr));
        let f: FrFile = serde_json::from_str(&fs::read_to_string(t.path().join("fr.json")).unwrap()).unwrap();
        assert_eq!((f.d, f.r, f.mode.as_str()), (d, r, mode), "{spec}");
        assert_eq!(f.steps.len(), d);
        if let Some(s) = f.steps.first() {
            assert_eq!(s.z.len(), n);
            assert_eq!(s.y.len(), if spec.starts_with("worst") { n } else { 2 });
        }
    }
}

#[test]
fn table_aggregates_runs_and_skips_missing_reports() {
    let t = tempfile::tempdir().unwrap();
    sdcheck(t.path(), &["run", "--instance", "worst_case:n=3", "--out-dir", "a"]);
    sdcheck(t.path(), &["run", "--instance", "slater:n=3,m=2", "--out-dir", "b"]);
    fs::create_dir(t.path().join("empty")).unwrap();
    let o = sdcheck(t.path(), &["table", "a", "empty", "b", "--out", "t.csv"]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stderr).contains("skipped"));
    let text = String::from_utf8_lossy(&o.stdout);
    assert_eq!(text.lines().count(), 3, "{text}");
    assert!(text.lines().next().unwrap().contains("N_λ"));
    let csv = fs::read_to_string(t.path().join("t.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "run,berr_final,r_true,r_bar,ef_oracle,eps_lower,sd_true,d_lower,N_lambda");
    assert!(lines[1].starts_with("a,") && lines[2].starts_with("b,"));
    assert!(lines[2].ends_with(",0,,0"), "{}", lines[2]);

    assert_eq!(code(&sdcheck(t.path(), &["table", "empty"])), 2);
    assert_eq!(code(&sdcheck(t.path(), &["table"])), 2);
}
