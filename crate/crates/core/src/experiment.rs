//! End-to-end protocol: follow the path, read the bounds, compare with the
//! certificate when there is one.

use alloc::vec::Vec;

use crate::diagnose::{self, DiagnosticsReport, EigenTrace, DEFAULT_TAU, TAIL_WINDOW};
use crate::error::{Error, Result};
use crate::pathfollow::{follow, PathConfig, PathTrace};
use crate::spectra::{forward_error, Spectrahedron};
use crate::symcore::SymMatrix;

#[derive(Clone, Debug, PartialEq)]
pub struct ProtocolConfig {
    pub tau: f64,
    pub tail_window: usize,
    /// Grid parameters (`sigma`, `k_max`) live here.
    pub path: PathConfig,
    /// Evaluate the forward-error oracle at every point, not only the last.
    pub oracle_every_point: bool,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            tau: DEFAULT_TAU,
            tail_window: TAIL_WINDOW,
            path: PathConfig::default(),
            oracle_every_point: false,
        }
    }
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<()> {
        self.path.validate()?;
        if !(self.tau > 0.0 && self.tau <= diagnose::TAU_MAX) {
            return Err(Error::InvalidConfig("tau must lie in (0, 0.95]"));
        }
        if self.tail_window == 0 || self.path.k_max < self.tail_window + 2 {
            return Err(Error::InvalidConfig("k_max must be at least tail_window + 2"));
        }
        Ok(())
    }
}

/// One row in the column order `ε^b, r, r̄, ε^f, ε̲, sd, d̲, N_λ`.
#[derive(Clone, Debug, PartialEq)]
pub struct TableRow {
    pub berr_final: f64,
    pub r_true: Option<usize>,
    pub r_bar: usize,
    pub ef_oracle: Option<f64>,
    pub eps_lower: f64,
    pub sd_true: Option<usize>,
    pub d_lower: Option<usize>,
    pub n_lambda: usize,
}

#[derive(Clone, Debug)]
pub struct ProtocolRun {
    pub trace: PathTrace,
    pub eigen: EigenTrace,
    pub report: DiagnosticsReport,
    pub row: TableRow,
    /// Oracle forward error per stored point (`None` where not evaluated).
    pub ef: Vec<Option<f64>>,
    /// `ε̲` per stored point at the final `r̄`.
    pub eps_lower_series: Vec<f64>,
    /// Fitted exponent of `ε^f ∼ (ε^b)^s` when the oracle ran on every point.
    pub sturm: Option<f64>,
}

impl ProtocolRun {
    pub fn truncated(&self) -> bool {
        self.trace.is_truncated()
    }
}

/// Runs the protocol. A truncated path still yields a run as long as enough
/// points survived for the tail statistics; check [`ProtocolRun::truncated`].
pub fn run_protocol(f: &Spectrahedron, b_dir: &SymMatrix, cfg: &ProtocolConfig) -> Result<ProtocolRun> {
    cfg.validate()?;
    let trace = follow(f, b_dir, &cfg.path)?;
    analyse(f, trace, cfg)
}

/// Protocol analysis of an existing trace.
pub fn analyse(f: &Spectrahedron, trace: PathTrace, cfg: &ProtocolConfig) -> Result<ProtocolRun> {
    let eigen = EigenTrace::from_path(&trace);
    let report = match diagnose::diagnose(&eigen, cfg.tau, cfg.tail_window) {
        Ok(r) => r,
        Err(Error::InsufficientTrace { .. }) if trace.truncated.is_some() => {
            return Err(trace.truncated.clone().unwrap_or(Error::InvalidSeries));
        }
        Err(e) => return Err(e),
    };
    let eps_lower_series = eigen
        .eigs
        .iter()
        .map(|e| diagnose::ferror_lower_bound_values(e, report.r_bar))
        .collect::<Result<Vec<_>>>()?;
    let has_oracle = f.has_oracle();
    let len = trace.len();
    let mut ef: Vec<Option<f64>> = Vec::with_capacity(len);
    for (k, p) in trace.points.iter().enumerate() {
        let want = has_oracle && (cfg.oracle_every_point || k + 1 == len);
        ef.push(if want { Some(forward_error(f, &p.x)?) } else { None });
    }
    let sturm = if cfg.oracle_every_point && has_oracle {
        let efs: Vec<f64> = ef.iter().map(|v| v.unwrap_or(0.0)).collect();
        let end = eigen.usable();
        diagnose::sturm_exponent(&efs[..end], &trace.berr[..end]).ok()
    } else {
        None
    };
    let cert = f.certificate.as_ref();
    let row = TableRow {
        berr_final: trace.berr.last().copied().unwrap_or(f64::NAN),
        r_true: cert.and_then(|c| c.max_rank_true),
        r_bar: report.r_bar,
        ef_oracle: ef.last().copied().flatten(),
        eps_lower: report.eps_lower,
        sd_true: cert.and_then(|c| c.sd_true),
        d_lower: report.d_lower,
        n_lambda: report.n_lambda,
    };
    Ok(ProtocolRun {
        trace,
        eigen,
        report,
        row,
        ef,
        eps_lower_series,
        sturm,
    })
}
