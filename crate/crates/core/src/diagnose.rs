//! Ratio curves along the central path and the bounds read off them.
//!
//! `RQ(i,k) = λᵢ(σᵏ⁺¹)/λᵢ(σᵏ)` tends to 1 for eigenvalues that survive in
//! the limit and stays at or below `σ^{2^{-(d-1)}}` for vanishing ones, where
//! `d` is the singularity degree. `RN(i,k) = λᵢ/λᵢ₊₁` diverges exactly where
//! two neighbouring eigenvalues vanish at different rates.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::pathfollow::PathTrace;
use crate::symcore::{eig_desc, SymMatrix};

/// Default tail window for the liminf proxy.
pub const TAIL_WINDOW: usize = 10;
/// Default rank threshold. Must sit above the deepest ladder value in play.
pub const DEFAULT_TAU: f64 = 0.95;
/// Largest admissible rank threshold.
pub const TAU_MAX: f64 = 0.95;
/// Tolerance when comparing a proxy against a ladder value.
pub const LADDER_SLACK: f64 = 1e-3;
/// `RN` divergence threshold in units of `|ln σ|` per grid step.
pub const SLOPE_FACTOR: f64 = 0.05;
/// `RQ` tail values above this are flagged as suspicious.
pub const RQ_SANITY: f64 = 1.1;
/// Points dropped from the tail when the trace reached the conditioning floor.
pub const FLOOR_DROP: usize = 2;

/// Descending eigenvalue curves on a geometric grid, decoupled from the
/// solver so closed-form fixtures can be analysed the same way.
#[derive(Clone, Debug, PartialEq)]
pub struct EigenTrace {
    pub sigma: f64,
    pub alphas: Vec<f64>,
    pub eigs: Vec<Vec<f64>>,
    pub near_floor: bool,
}

impl EigenTrace {
    pub fn from_path(trace: &PathTrace) -> Self {
        Self {
            sigma: trace.sigma,
            alphas: trace.points.iter().map(|p| p.alpha).collect(),
            eigs: trace.eigs_x.clone(),
            near_floor: trace.near_floor(),
        }
    }

    pub fn len(&self) -> usize {
        self.eigs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigs.is_empty()
    }

    pub fn n(&self) -> usize {
        self.eigs.first().map_or(0, |e| e.len())
    }

    /// Number of leading points that enter tail statistics.
    pub fn usable(&self) -> usize {
        if self.near_floor && self.len() > FLOOR_DROP {
            self.len() - FLOOR_DROP
        } else {
            self.len()
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RatioCurves {
    pub sigma: f64,
    /// `rq[i][k]`, one column per consecutive pair of stored points.
    pub rq: Vec<Vec<f64>>,
    /// `rn[i][k]` for `i = 0..n-1`, one column per stored point.
    pub rn: Vec<Vec<f64>>,
    pub tail_window: usize,
    /// Number of leading points used by tail statistics.
    pub usable: usize,
}

impl RatioCurves {
    pub fn n(&self) -> usize {
        self.rq.len()
    }

    fn rq_tail(&self) -> core::ops::Range<usize> {
        let end = self.usable - 1;
        end.saturating_sub(self.tail_window)..end
    }

    fn point_tail(&self) -> core::ops::Range<usize> {
        self.usable.saturating_sub(self.tail_window)..self.usable
    }

    /// Minimum of each `RQ` row over the tail window.
    pub fn liminf_proxy(&self) -> Vec<f64> {
        let r = self.rq_tail();
        self.rq
            .iter()
            .map(|row| row[r.clone()].iter().copied().fold(f64::INFINITY, f64::min))
            .collect()
    }

    /// Maximum of each `RQ` row over the tail window.
    pub fn limsup_proxy(&self) -> Vec<f64> {
        let r = self.rq_tail();
        self.rq
            .iter()
            .map(|row| row[r.clone()].iter().copied().fold(f64::NEG_INFINITY, f64::max))
            .collect()
    }

    /// Least-squares slope of `ln RN(i,k)` against `k` on the tail window.
    pub fn rn_log_slope(&self, i: usize) -> f64 {
        let r = self.point_tail();
        let xs: Vec<f64> = r.clone().map(|k| k as f64).collect();
        let ys: Vec<f64> = r.map(|k| libm::log(self.rn[i][k])).collect();
        ls_slope(&xs, &ys)
    }
}

pub fn ratios(trace: &EigenTrace, window: usize) -> Result<RatioCurves> {
    if window == 0 {
        return Err(Error::InvalidConfig("tail window must be positive"));
    }
    let usable = trace.usable();
    if usable < window + 2 {
        return Err(Error::InsufficientTrace {
            needed: window + 2,
            found: usable,
        });
    }
    let n = trace.n();
    for e in &trace.eigs {
        if e.len() != n {
            return Err(Error::InvalidDimension { expected: n, found: e.len() });
        }
        if e.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(Error::InvalidSeries);
        }
    }
    let len = trace.len();
    let rq = (0..n)
        .map(|i| (0..len - 1).map(|k| trace.eigs[k + 1][i] / trace.eigs[k][i]).collect())
        .collect();
    let rn = (0..n.saturating_sub(1))
        .map(|i| (0..len).map(|k| trace.eigs[k][i] / trace.eigs[k][i + 1]).collect())
        .collect();
    Ok(RatioCurves {
        sigma: trace.sigma,
        rq,
        rn,
        tail_window: window,
        usable,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct RankBound {
    pub r_bar: usize,
    /// Every row up to `r_bar` is above the threshold.
    pub clean: bool,
    pub proxy: Vec<f64>,
    pub tau: f64,
}

/// Upper bound on the maximum rank of the feasible set.
pub fn max_rank_bound(curves: &RatioCurves, tau: f64) -> Result<RankBound> {
    if !(tau > 0.0 && tau <= TAU_MAX) {
        return Err(Error::InvalidConfig("tau must lie in (0, 0.95]"));
    }
    let proxy = curves.liminf_proxy();
    let r_bar = proxy.iter().rposition(|&p| p > tau).map_or(0, |i| i + 1);
    let clean = proxy[..r_bar].iter().all(|&p| p > tau);
    Ok(RankBound { r_bar, clean, proxy, tau })
}

/// `σ^{2^{-(d-1)}}` for `d = 1..=d_max`.
pub fn threshold_ladder(sigma: f64, d_max: usize) -> Vec<f64> {
    (1..=d_max).map(|d| libm::pow(sigma, libm::exp2(-((d - 1) as f64)))).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct SdBound {
    /// `None` when the rank bound is already `n` (nothing vanishes).
    pub d_lower: Option<usize>,
    pub saturated: bool,
    pub ladder: Vec<f64>,
}

/// Lower bound on the singularity degree: the first ladder rung that
/// separates the vanishing rows from the surviving ones.
pub fn sd_lower_bound(curves: &RatioCurves, r_bar: usize) -> Result<SdBound> {
    let n = curves.n();
    if r_bar > n {
        return Err(Error::InvalidDimension { expected: n, found: r_bar });
    }
    let d_max = n.saturating_sub(1).max(1);
    let ladder = threshold_ladder(curves.sigma, d_max);
    if r_bar == n {
        return Ok(SdBound { d_lower: None, saturated: false, ladder });
    }
    let proxy = curves.liminf_proxy();
    let hit = ladder.iter().position(|&t| {
        proxy
            .iter()
            .enumerate()
            .all(|(i, &p)| (p <= t + LADDER_SLACK) == (i + 1 > r_bar))
    });
    Ok(match hit {
        Some(i) => SdBound { d_lower: Some(i + 1), saturated: false, ladder },
        None => SdBound { d_lower: Some(d_max), saturated: true, ladder },
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct RateCount {
    pub n_lambda: usize,
    /// `(i, slope)` for each adjacent pair among the vanishing rows.
    pub slopes: Vec<(usize, f64)>,
    pub slope_min: f64,
}

/// Number of distinct vanishing rates among the rows past `r_bar`.
pub fn count_rates(curves: &RatioCurves, r_bar: usize) -> Result<RateCount> {
    let n = curves.n();
    if r_bar > n {
        return Err(Error::InvalidDimension { expected: n, found: r_bar });
    }
    let slope_min = SLOPE_FACTOR * libm::fabs(libm::log(curves.sigma));
    if r_bar == n {
        return Ok(RateCount { n_lambda: 0, slopes: Vec::new(), slope_min });
    }
    // Zero-based rows r_bar..n-1 vanish; RN row i compares i and i+1.
    let slopes: Vec<(usize, f64)> = (r_bar..n - 1).map(|i| (i, curves.rn_log_slope(i))).collect();
    let boundaries = slopes.iter().filter(|(_, s)| *s > slope_min).count();
    Ok(RateCount { n_lambda: boundaries + 1, slopes, slope_min })
}

/// `‖(λ_{r̄+1}, …, λₙ)‖₂` of a feasible-ish point.
pub fn ferror_lower_bound(x: &SymMatrix, r_bar: usize) -> Result<f64> {
    let s = eig_desc(x)?;
    ferror_lower_bound_values(&s.values, r_bar)
}

/// As [`ferror_lower_bound`] from precomputed descending eigenvalues.
pub fn ferror_lower_bound_values(eigs: &[f64], r_bar: usize) -> Result<f64> {
    if r_bar > eigs.len() {
        return Err(Error::InvalidDimension { expected: eigs.len(), found: r_bar });
    }
    Ok(libm::sqrt(eigs[r_bar..].iter().fold(0.0, |s, v| s + v * v)))
}

/// Slope of `ln ef` against `ln eb` over the last [`TAIL_WINDOW`] entries.
pub fn sturm_exponent(ef: &[f64], eb: &[f64]) -> Result<f64> {
    sturm_exponent_window(ef, eb, TAIL_WINDOW)
}

pub fn sturm_exponent_window(ef: &[f64], eb: &[f64], window: usize) -> Result<f64> {
    if ef.len() != eb.len() || ef.len() < 10 || window < 2 {
        return Err(Error::InvalidSeries);
    }
    if ef.iter().chain(eb).any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidSeries);
    }
    let start = ef.len().saturating_sub(window);
    let xs: Vec<f64> = eb[start..].iter().map(|&v| libm::log(v)).collect();
    let ys: Vec<f64> = ef[start..].iter().map(|&v| libm::log(v)).collect();
    let s = ls_slope(&xs, &ys);
    if s.is_finite() {
        Ok(s)
    } else {
        Err(Error::InvalidSeries)
    }
}

fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

#[derive(Clone, Debug, PartialEq)]
pub struct Verdicts {
    pub split_clean: bool,
    pub sd_saturated: bool,
    /// The rate count is below the singularity-degree bound.
    pub conjecture_candidate: bool,
    pub rate_slopes: Vec<(usize, f64)>,
    pub slope_min: f64,
    /// Every tail `RQ` entry is at most [`RQ_SANITY`].
    pub rq_sanity: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiagnosticsReport {
    pub r_bar: usize,
    pub eps_lower: f64,
    pub d_lower: Option<usize>,
    pub n_lambda: usize,
    pub tau: f64,
    pub ladder: Vec<f64>,
    pub liminf_proxy: Vec<f64>,
    pub verdicts: Verdicts,
}

/// All bounds at once. `ε̲` is taken at the last stored point.
pub fn diagnose(trace: &EigenTrace, tau: f64, window: usize) -> Result<DiagnosticsReport> {
    let curves = ratios(trace, window)?;
    let rank = max_rank_bound(&curves, tau)?;
    let sd = sd_lower_bound(&curves, rank.r_bar)?;
    let rates = count_rates(&curves, rank.r_bar)?;
    let last = trace.eigs.last().ok_or(Error::InvalidSeries)?;
    let eps_lower = ferror_lower_bound_values(last, rank.r_bar)?;
    let rq_sanity = curves.limsup_proxy().iter().all(|&v| v <= RQ_SANITY);
    Ok(DiagnosticsReport {
        r_bar: rank.r_bar,
        eps_lower,
        d_lower: sd.d_lower,
        n_lambda: rates.n_lambda,
        tau,
        ladder: sd.ladder,
        liminf_proxy: rank.proxy,
        verdicts: Verdicts {
            split_clean: rank.clean,
            sd_saturated: sd.saturated,
            conjecture_candidate: sd.d_lower.is_some_and(|d| rates.n_lambda < d),
            rate_slopes: rates.slopes,
            slope_min: rates.slope_min,
            rq_sanity,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn synthetic(sigma: f64, len: usize, f: impl Fn(usize, usize) -> f64, n: usize) -> EigenTrace {
        EigenTrace {
            sigma,
            alphas: (1..=len).map(|k| libm::pow(sigma, k as f64)).collect(),
            eigs: (1..=len).map(|k| (0..n).map(|i| f(i, k)).collect()).collect(),
            near_floor: false,
        }
    }

    fn curves_with_proxy(sigma: f64, proxy: &[f64]) -> RatioCurves {
        let len = 14;
        RatioCurves {
            sigma,
            rq: proxy.iter().map(|&p| vec![p; len - 1]).collect(),
            rn: vec![vec![1.0; len]; proxy.len() - 1],
            tail_window: 10,
            usable: len,
        }
    }

    #[test]
    fn geometric_decay_gives_constant_ratio() {
        let t = synthetic(0.6, 20, |i, k| (i + 1) as f64 * libm::pow(0.6, k as f64), 3);
        let c = ratios(&t, 10).unwrap();
        for row in &c.rq {
            assert!(row.iter().all(|&r| (r - 0.6).abs() < 1e-14));
        }
        let t = synthetic(0.6, 20, |i, _| 3.0 - i as f64, 3);
        let c = ratios(&t, 10).unwrap();
        assert!(c.rq.iter().flatten().all(|&r| r == 1.0));
        assert!(c.rn[0].iter().all(|&r| r == 1.5));
    }

    #[test]
    fn worst_case_two_by_two_closed_form() {
        let s: f64 = 0.6;
        let t = synthetic(s, 40, |i, k| if i == 0 { 1.0 + libm::pow(s, k as f64) } else { libm::pow(s, k as f64) }, 2);
        let c = ratios(&t, 10).unwrap();
        assert!((c.liminf_proxy()[0] - 1.0).abs() < 1e-6);
        assert!(c.rq[1].iter().all(|&r| (r - 0.6).abs() < 1e-12));
        assert!(c.rn[0].windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn short_trace_is_rejected() {
        let t = synthetic(0.6, 11, |_, _| 1.0, 2);
        assert_eq!(
            ratios(&t, 10).unwrap_err(),
            Error::InsufficientTrace { needed: 12, found: 11 }
        );
        let mut t = synthetic(0.6, 13, |_, _| 1.0, 2);
        assert!(ratios(&t, 10).is_ok());
        t.near_floor = true;
        assert!(ratios(&t, 10).is_err());
    }

    #[test]
    fn rank_bound_examples() {
        let c = curves_with_proxy(0.6, &[1.0, 0.99, 0.6]);
        let r = max_rank_bound(&c, 0.9).unwrap();
        assert_eq!(r.r_bar, 2);
        assert!(r.clean);
        let c = curves_with_proxy(0.6, &[1.0, 0.5, 0.99, 0.6]);
        let r = max_rank_bound(&c, 0.9).unwrap();
        assert_eq!(r.r_bar, 3);
        assert!(!r.clean);
        let c = curves_with_proxy(0.6, &[0.6, 0.6]);
        assert_eq!(max_rank_bound(&c, 0.9).unwrap().r_bar, 0);
        assert!(max_rank_bound(&c, 0.99).is_err());
        assert!(max_rank_bound(&c, 0.0).is_err());
    }

    #[test]
    fn ferror_examples() {
        let x = SymMatrix::diag(&[1.0, 0.1, 0.01]);
        let v = ferror_lower_bound(&x, 1).unwrap();
        assert!((v - libm::sqrt(0.1 * 0.1 + 0.01 * 0.01)).abs() < 1e-15);
        assert!((v - 0.100499).abs() < 1e-6);
        assert_eq!(ferror_lower_bound(&x, 3).unwrap(), 0.0);
    }

    #[test]
    fn sd_bound_examples() {
        let c = curves_with_proxy(0.6, &[1.0, 1.0, 0.6]);
        let b = sd_lower_bound(&c, 2).unwrap();
        assert_eq!(b.d_lower, Some(1));
        assert!(!b.saturated);
        // 0.78 clears the third rung only, but n = 3 caps the search at 2.
        let c = curves_with_proxy(0.6, &[1.0, 1.0, 0.78]);
        let b = sd_lower_bound(&c, 2).unwrap();
        assert_eq!(b.d_lower, Some(2));
        assert!(b.saturated);
        let c = curves_with_proxy(0.6, &[1.0, 1.0, 1.0, 0.78]);
        assert_eq!(sd_lower_bound(&c, 3).unwrap().d_lower, Some(3));
        let c = curves_with_proxy(0.6, &[1.0, 1.0]);
        assert_eq!(sd_lower_bound(&c, 2).unwrap().d_lower, None);
    }

    #[test]
    fn ladder_values() {
        let l = threshold_ladder(0.6, 4);
        let want = [0.6, 0.7745966692414834, 0.8801117367933934, 0.9381427059852853];
        for (a, b) in l.iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn rate_groups_from_separated_decays() {
        let s: f64 = 0.6;
        // Rates 1, α^{1/2}, α^{1/2}, α: two boundaries among the vanishing rows.
        let t = synthetic(
            s,
            30,
            |i, k| {
                let a = libm::pow(s, k as f64);
                [1.0, libm::sqrt(a), 0.5 * libm::sqrt(a), a][i]
            },
            4,
        );
        let c = ratios(&t, 10).unwrap();
        let rc = count_rates(&c, 1).unwrap();
        assert_eq!(rc.n_lambda, 2);
        assert_eq!(count_rates(&c, 4).unwrap().n_lambda, 0);
    }

    #[test]
    fn sturm_examples() {
        let eb: Vec<f64> = (1..=20).map(|k| libm::pow(0.6, k as f64)).collect();
        assert!((sturm_exponent(&eb, &eb).unwrap() - 1.0).abs() < 1e-12);
        let ef: Vec<f64> = eb.iter().map(|v| libm::sqrt(*v)).collect();
        assert!((sturm_exponent(&ef, &eb).unwrap() - 0.5).abs() < 1e-12);
        let mut bad = ef.clone();
        bad[3] = 0.0;
        assert_eq!(sturm_exponent(&bad, &eb).unwrap_err(), Error::InvalidSeries);
        assert!(sturm_exponent(&ef[..5], &eb[..5]).is_err());
    }
}
