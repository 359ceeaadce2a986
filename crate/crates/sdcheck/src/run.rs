//! The four commands behind the binary, usable as a library.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use sdcheck_core::bench::summary;
use sdcheck_core::diagnose::ratios;
use sdcheck_core::experiment::{analyse, ProtocolConfig};
use sdcheck_core::facialred::{facial_reduction, FrConfig, FrMode};
use sdcheck_core::pathfollow::{follow, PathConfig};
use sdcheck_core::spectra::Spectrahedron;
use sdcheck_core::{Error, SymMatrix};

use crate::artifacts::{curves_csv, header_only, CURVES_HEADER, TRACE_HEADER, table_csv, table_text, trace_csv, DiagnosticsFile, FrFile, ReportFile, RowFile};
use crate::error::{CliError, Result};
use crate::instance::{write_text, InstanceFile, Source};

/// Direction `B` of the path perturbation `b + α𝒜(B)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BDir {
    Identity,
    /// JSON list of rows.
    File(PathBuf),
}

impl BDir {
    fn load(&self, n: usize) -> Result<SymMatrix> {
        match self {
            BDir::Identity => Ok(SymMatrix::identity(n)),
            BDir::File(p) => {
                let text = fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
                let rows: Vec<Vec<f64>> =
                    serde_json::from_str(&text).map_err(|e| CliError::Invalid(format!("{}: {e}", p.display())))?;
                if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                    return Err(CliError::Invalid(format!("{}: B must be {n}×{n}", p.display())));
                }
                Ok(SymMatrix::new(n, rows.concat())?)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub sources: Vec<Source>,
    pub sigma: f64,
    pub k_max: usize,
    pub tau: f64,
    pub tail_window: usize,
    pub b: BDir,
    pub out_dir: PathBuf,
    /// Overrides generator seeds when set.
    pub seed: Option<u64>,
    pub oracle_every_point: bool,
    pub max_iter: usize,
    pub jobs: usize,
}

impl RunConfig {
    pub fn new(sources: Vec<Source>, out_dir: PathBuf) -> Self {
        let path = PathConfig::default();
        let proto = ProtocolConfig::default();
        RunConfig {
            sources,
            sigma: path.sigma,
            k_max: path.k_max,
            tau: proto.tau,
            tail_window: proto.tail_window,
            b: BDir::Identity,
            out_dir,
            seed: None,
            oracle_every_point: false,
            max_iter: path.max_iter,
            jobs: 1,
        }
    }

    fn protocol(&self) -> ProtocolConfig {
        ProtocolConfig {
            tau: self.tau,
            tail_window: self.tail_window,
            path: PathConfig {
                sigma: self.sigma,
                k_max: self.k_max,
                max_iter: self.max_iter,
                ..PathConfig::default()
            },
            oracle_every_point: self.oracle_every_point,
        }
    }

    fn source(&self, i: usize) -> Source {
        let s = self.sources[i].clone();
        match self.seed {
            Some(seed) => s.with_seed(seed),
            None => s,
        }
    }

    /// One instance writes into `out_dir`, several into one subdirectory
    /// each.
    fn dir_for(&self, src: &Source) -> PathBuf {
        if self.sources.len() == 1 {
            self.out_dir.clone()
        } else {
            self.out_dir.join(src.slug())
        }
    }
}

/// Writes the instance file and returns its path and a one-line summary.
pub fn cmd_gen(src: &Source, out: &Path) -> Result<(PathBuf, String)> {
    let f = src.load()?;
    let label = match src {
        Source::Spec(s) => Some(s.to_string()),
        Source::File(_) => None,
    };
    InstanceFile::from_spectrahedron(&f, label).write(out)?;
    Ok((out.to_path_buf(), format!("{src}: {}", summary(&f))))
}

/// Outcome of one `run`.
#[derive(Clone, Debug, PartialEq)]
pub struct RunOutcome {
    pub source: String,
    pub dir: PathBuf,
    pub truncated: bool,
    pub report: ReportFile,
}

impl RunOutcome {
    pub fn exit_code(&self) -> u8 {
        if self.truncated { 3 } else { 0 }
    }
}

fn run_one(cfg: &RunConfig, src: &Source) -> Result<RunOutcome> {
    let proto = cfg.protocol();
    proto.validate()?;
    let f = src.load()?;
    let b_dir = cfg.b.load(f.n())?;
    let dir = cfg.dir_for(src);
    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    let mut report = ReportFile {
        instance: src.to_string(),
        status: "ok".into(),
        error: None,
        sigma: cfg.sigma,
        k_max: proto.path.effective_k_max(),
        k_last: None,
        clamped: proto.path.effective_k_max() < cfg.k_max,
        diagnostics: None,
        sturm_exponent: None,
        row: None,
    };
    let trace = match follow(&f, &b_dir, &proto.path) {
        Ok(t) => t,
        Err(e) => {
            write_text(&dir.join("trace.csv"), &header_only(&TRACE_HEADER))?;
            return finish_partial(&dir, report, e);
        }
    };
    if trace.clamped {
        eprintln!("warning: {src}: k_max lowered to {} to keep σᵏ above the floor", report.k_max);
    }
    report.k_last = trace.last().map(|p| p.k);
    write_text(&dir.join("trace.csv"), &trace_csv(&trace))?;
    let truncation = trace.truncated.clone();
    if let Some(e) = &truncation {
        report.status = "truncated".into();
        report.error = Some(e.to_string());
    }
    let ks: Vec<usize> = trace.points.iter().map(|p| p.k).collect();
    let run = match analyse(&f, trace, &proto) {
        Ok(r) => r,
        Err(e) => return finish_partial(&dir, report, e),
    };
    let curves = ratios(&run.eigen, proto.tail_window)?;
    write_text(&dir.join("curves.csv"), &curves_csv(&curves, &ks))?;
    report.diagnostics = Some(DiagnosticsFile::from(&run.report));
    report.sturm_exponent = run.sturm;
    report.row = Some(RowFile::from(&run.row));
    write_text(&dir.join("report.json"), &crate::json::to_string(&report))?;
    Ok(RunOutcome {
        source: src.to_string(),
        dir,
        truncated: truncation.is_some(),
        report,
    })
}

/// Writes what exists after a solver failure and flags the report.
fn finish_partial(dir: &Path, mut report: ReportFile, e: Error) -> Result<RunOutcome> {
    let err = CliError::from(e);
    if err.exit_code() != 3 {
        return Err(err);
    }
    report.status = "truncated".into();
    report.error = Some(err.to_string());
    write_text(&dir.join("curves.csv"), &header_only(&CURVES_HEADER))?;
    write_text(&dir.join("report.json"), &crate::json::to_string(&report))?;
    Ok(RunOutcome {
        source: report.instance.clone(),
        dir: dir.to_path_buf(),
        truncated: true,
        report,
    })
}

/// Runs every source, `cfg.jobs` at a time. Results keep the input order.
pub fn cmd_run(cfg: &RunConfig) -> Vec<Result<RunOutcome>> {
    let count = cfg.sources.len();
    let slots: Vec<Mutex<Option<Result<RunOutcome>>>> = (0..count).map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = cfg.jobs.clamp(1, count.max(1));
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= count {
                    break;
                }
                let res = run_one(cfg, &cfg.source(i));
                *slots[i].lock().expect("no worker panics while holding the slot") = Some(res);
            });
        }
    });
    slots
        .into_iter()
        .map(|m| m.into_inner().expect("slot lock").expect("every slot is filled"))
        .collect()
}

/// Runs facial reduction and writes `fr.json`; on failure the completed
/// steps are written before the error is returned.
pub fn cmd_fr(src: &Source, mode: FrMode, out: &Path) -> Result<FrFile> {
    let f: Spectrahedron = src.load()?;
    match facial_reduction(&f, mode, &FrConfig::default()) {
        Ok(res) => {
            let file = FrFile::new(f.n(), mode, &res.steps, None);
            write_text(out, &crate::json::to_string(&file))?;
            Ok(file)
        }
        Err(e) => {
            let err = CliError::from(e.kind.clone());
            let file = FrFile::new(f.n(), mode, &e.partial, Some(err.to_string()));
            write_text(out, &crate::json::to_string(&file))?;
            Err(err)
        }
    }
}

/// Collects `report.json` rows from run directories. Directories without a
/// usable report are skipped with a warning; none at all is an error.
pub fn cmd_table(dirs: &[PathBuf]) -> Result<(Vec<(String, RowFile)>, Vec<String>)> {
    if dirs.is_empty() {
        return Err(CliError::Invalid("no run directories given".into()));
    }
    let mut rows = Vec::new();
    let mut warnings = Vec::new();
    for d in dirs {
        let path = d.join("report.json");
        let parsed = fs::read_to_string(&path)
            .map_err(|e| e.to_string())
            .and_then(|t| serde_json::from_str::<ReportFile>(&t).map_err(|e| e.to_string()));
        match parsed {
            Ok(ReportFile { row: Some(row), instance, .. }) => {
                let name = d.file_name().map_or(instance, |s| s.to_string_lossy().into_owned());
                rows.push((name, row));
            }
            Ok(_) => warnings.push(format!("{}: run has no table row, skipped", path.display())),
            Err(e) => warnings.push(format!("{}: {e}, skipped", path.display())),
        }
    }
    if rows.is_empty() {
        return Err(CliError::Invalid("no run directory holds a usable report.json".into()));
    }
    Ok((rows, warnings))
}

/// Table files: canonical CSV on disk, aligned text for the terminal.
pub fn write_table(rows: &[(String, RowFile)], out: &Path) -> Result<String> {
    write_text(out, &table_csv(rows))?;
    Ok(table_text(rows))
}
