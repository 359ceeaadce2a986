//! Run artifacts: trace and curve CSVs, the report, facial reduction chains
//! and the aggregated table.

use serde::{Deserialize, Serialize};

use sdcheck_core::diagnose::{DiagnosticsReport, RatioCurves};
use sdcheck_core::experiment::TableRow;
use sdcheck_core::facialred::{FrMode, FrStep};
use sdcheck_core::pathfollow::PathTrace;

use crate::instance::sym_rows;
use crate::json::fmt_f64;

fn csv_text(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
    w.write_record(header).expect("writing to memory");
    for r in rows {
        w.write_record(&r).expect("writing to memory");
    }
    String::from_utf8(w.into_inner().expect("flush to memory")).expect("CSV of UTF-8 fields")
}

/// CSV with the header line only, for runs that stopped before any data.
pub fn header_only(header: &[&str]) -> String {
    csv_text(header, Vec::<Vec<String>>::new())
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

pub const TRACE_HEADER: [&str; 9] =
    ["k", "alpha", "i", "lambda_X", "lambda_Z", "res_primal", "res_dual", "res_cent", "berr"];
pub const CURVES_HEADER: [&str; 4] = ["i", "k", "RQ", "RN"];

/// `k,alpha,i,lambda_X,lambda_Z,res_primal,res_dual,res_cent,berr`, one row
/// per point and eigenvalue index (1-based, descending order).
pub fn trace_csv(trace: &PathTrace) -> String {
    let rows = trace.points.iter().enumerate().flat_map(|(j, p)| {
        let (ex, ez) = (&trace.eigs_x[j], &trace.eigs_z[j]);
        (0..ex.len()).map(move |i| {
            vec![
                p.k.to_string(),
                fmt_f64(p.alpha),
                (i + 1).to_string(),
                fmt_f64(ex[i]),
                fmt_f64(ez[i]),
                fmt_f64(p.res_primal),
                fmt_f64(p.res_dual),
                fmt_f64(p.res_cent),
                fmt_f64(trace.berr[j]),
            ]
        })
    });
    csv_text(&TRACE_HEADER, rows)
}

/// `i,k,RQ,RN` over every stored point. `RQ` at `k` is `λᵢ(σᵏ⁺¹)/λᵢ(σᵏ)`;
/// `RN` at `k` is `λᵢ/λᵢ₊₁`. Undefined entries are left empty.
pub fn curves_csv(curves: &RatioCurves, ks: &[usize]) -> String {
    let n = curves.n();
    let mut rows = Vec::new();
    for i in 0..n {
        for (j, &k) in ks.iter().enumerate() {
            let rq = curves.rq.get(i).and_then(|r| r.get(j)).copied();
            let rn = curves.rn.get(i).and_then(|r| r.get(j)).copied();
            rows.push(vec![(i + 1).to_string(), k.to_string(), opt(rq.map(fmt_f64)), opt(rn.map(fmt_f64))]);
        }
    }
    csv_text(&CURVES_HEADER, rows)
}

/// Table row in the column order `ε^b, r, r̄, ε^f, ε̲, sd, d̲, N_λ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RowFile {
    pub berr_final: Option<f64>,
    pub r_true: Option<usize>,
    pub r_bar: usize,
    pub ef_oracle: Option<f64>,
    pub eps_lower: f64,
    pub sd_true: Option<usize>,
    pub d_lower: Option<usize>,
    #[serde(rename = "N_lambda")]
    pub n_lambda: usize,
}

impl From<&TableRow> for RowFile {
    fn from(r: &TableRow) -> Self {
        RowFile {
            berr_final: Some(r.berr_final).filter(|v| v.is_finite()),
            r_true: r.r_true,
            r_bar: r.r_bar,
            ef_oracle: r.ef_oracle,
            eps_lower: r.eps_lower,
            sd_true: r.sd_true,
            d_lower: r.d_lower,
            n_lambda: r.n_lambda,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateSlope {
    pub i: usize,
    pub slope: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerdictsFile {
    pub split_clean: bool,
    pub sd_saturated: bool,
    pub conjecture_candidate: bool,
    pub rq_sanity: bool,
    pub rate_slopes: Vec<RateSlope>,
    pub slope_min: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsFile {
    pub r_bar: usize,
    pub eps_lower: f64,
    pub d_lower: Option<usize>,
    #[serde(rename = "N_lambda")]
    pub n_lambda: usize,
    pub tau: f64,
    pub ladder: Vec<f64>,
    pub liminf_proxy: Vec<f64>,
    pub verdicts: VerdictsFile,
}

impl From<&DiagnosticsReport> for DiagnosticsFile {
    fn from(r: &DiagnosticsReport) -> Self {
        let v = &r.verdicts;
        DiagnosticsFile {
            r_bar: r.r_bar,
            eps_lower: r.eps_lower,
            d_lower: r.d_lower,
            n_lambda: r.n_lambda,
            tau: r.tau,
            ladder: r.ladder.clone(),
            liminf_proxy: r.liminf_proxy.clone(),
            verdicts: VerdictsFile {
                split_clean: v.split_clean,
                sd_saturated: v.sd_saturated,
                conjecture_candidate: v.conjecture_candidate,
                rq_sanity: v.rq_sanity,
                // Rows are reported 1-based like everywhere else in the files.
                rate_slopes: v.rate_slopes.iter().map(|&(i, slope)| RateSlope { i: i + 1, slope }).collect(),
                slope_min: v.slope_min,
            },
        }
    }
}

/// `report.json`. Diagnostics and the row are absent when the path stopped
/// too early to compute them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub instance: String,
    /// `ok` or `truncated`.
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub sigma: f64,
    pub k_max: usize,
    /// Last grid index reached.
    pub k_last: Option<usize>,
    /// `k_max` was lowered to respect the conditioning floor.
    pub clamped: bool,
    #[serde(flatten, default, skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<DiagnosticsFile>,
    #[serde(default)]
    pub sturm_exponent: Option<f64>,
    #[serde(default)]
    pub row: Option<RowFile>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrStepFile {
    pub q: usize,
    pub y: Vec<f64>,
    #[serde(rename = "Z")]
    pub z: Vec<Vec<f64>>,
}

/// Facial reduction chain; `d` and `r` describe the completed steps when
/// `error` is present.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrFile {
    pub d: usize,
    pub r: usize,
    pub mode: String,
    pub steps: Vec<FrStepFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl FrFile {
    pub fn new(n: usize, mode: FrMode, steps: &[FrStep], error: Option<String>) -> Self {
        FrFile {
            d: steps.len(),
            r: steps.last().map_or(n, |s| s.vk.cols()),
            mode: mode.as_str().into(),
            steps: steps
                .iter()
                .map(|s| FrStepFile {
                    q: s.q,
                    y: s.y.clone(),
                    z: sym_rows(&s.z),
                })
                .collect(),
            error,
        }
    }
}

pub const TABLE_HEADER: [&str; 9] = [
    "run", "berr_final", "r_true", "r_bar", "ef_oracle", "eps_lower", "sd_true", "d_lower", "N_lambda",
];
const TABLE_LABELS: [&str; 9] = ["run", "ε^b", "r", "r̄", "ε^f", "ε̲", "sd", "d̲", "N_λ"];

/// Canonical CSV of the table; missing values are empty fields.
pub fn table_csv(rows: &[(String, RowFile)]) -> String {
    let fields = rows.iter().map(|(name, r)| {
        vec![
            name.clone(),
            opt(r.berr_final.map(fmt_f64)),
            opt(r.r_true),
            r.r_bar.to_string(),
            opt(r.ef_oracle.map(fmt_f64)),
            fmt_f64(r.eps_lower),
            opt(r.sd_true),
            opt(r.d_lower),
            r.n_lambda.to_string(),
        ]
    });
    csv_text(&TABLE_HEADER, fields)
}

/// Column-aligned text rendering; missing values print as `-`.
pub fn table_text(rows: &[(String, RowFile)]) -> String {
    let short = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.2e}"));
    let dash = |v: Option<usize>| v.map_or_else(|| "-".to_string(), |x| x.to_string());
    let mut cells: Vec<Vec<String>> = vec![TABLE_LABELS.iter().map(|s| s.to_string()).collect()];
    for (name, r) in rows {
        cells.push(vec![
            name.clone(),
            short(r.berr_final),
            dash(r.r_true),
            r.r_bar.to_string(),
            short(r.ef_oracle),
            short(Some(r.eps_lower)),
            dash(r.sd_true),
            dash(r.d_lower),
            r.n_lambda.to_string(),
        ]);
    }
    let width = |j: usize| cells.iter().map(|r| r[j].chars().count()).max().unwrap_or(0);
    let widths: Vec<usize> = (0..TABLE_LABELS.len()).map(width).collect();
    let mut out = String::new();
    for row in &cells {
        let line: Vec<String> = row
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(j, (c, &w))| {
                let pad = " ".repeat(w - c.chars().count());
                if j == 0 { format!("{c}{pad}") } else { format!("{pad}{c}") }
            })
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row() -> RowFile {
        RowFile {
            berr_final: Some(2.5e-13),
            r_true: None,
            r_bar: 1,
            ef_oracle: None,
            eps_lower: 0.0105,
            sd_true: Some(4),
            d_lower: Some(4),
            n_lambda: 4,
        }
    }

    #[test]
    fn table_csv_leaves_missing_values_empty() {
        let csv = table_csv(&[("a,b".into(), row())]);
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), TABLE_HEADER.join(","));
        assert_eq!(
            lines.next().unwrap(),
            "\"a,b\",2.4999999999999999e-13,,1,,1.0500000000000001e-2,4,4,4"
        );
    }

    #[test]
    fn table_text_aligns_columns() {
        let text = table_text(&[("wc5".into(), row()), ("slater".into(), row())]);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].starts_with("run "));
        let ends: Vec<usize> = lines.iter().map(|l| l.chars().count()).collect();
        assert!(ends.iter().all(|&e| e == ends[0]), "{text}");
    }

    #[test]
    fn report_without_diagnostics_parses() {
        let rep = ReportFile {
            instance: "worst_case:n=3".into(),
            status: "truncated".into(),
            error: Some("stopped".into()),
            sigma: 0.6,
            k_max: 60,
            k_last: None,
            clamped: false,
            diagnostics: None,
            sturm_exponent: None,
            row: None,
        };
        let text = crate::json::to_string(&rep);
        let back: ReportFile = serde_json::from_str(&text).unwrap();
        assert_eq!(back, rep);
    }
}
