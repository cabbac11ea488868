//! Post-hoc checks on recorded traces: descent margins, rate fits, and
//! error-bound radii.
//!
//! All margin checks share the same slack rule: a step is a violation only
//! when its margin falls below `-(MARGIN_TOL + subproblem_tol)`, so inexact
//! inner solves do not produce spurious failures.

use serde::{Deserialize, Serialize};

use crate::desing::{desingularizer_eval, Desingularizer};
use crate::error::{Error, Result};
use crate::metric::{distance, Vector};
use crate::trace::{SlopeSource, Trace};

/// Base slack for margin checks; `TraceMeta::subproblem_tol` is added on top.
pub const MARGIN_TOL: f64 = 1e-9;

/// Ratio sequences whose trailing-quartile variance falls below this are
/// treated as converged and averaged into `ratio_limit`.
pub const RATIO_STABLE_VARIANCE: f64 = 1e-6;

/// Minimum number of positive-gap samples a rate window must contain.
pub const RATE_FIT_MIN_SAMPLES: usize = 8;

pub fn margin_tolerance(t: &Trace) -> f64 {
    MARGIN_TOL + t.meta.subproblem_tol
}

/// Constants for the descent conditions, bundled for configs and reports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DescentParams {
    pub delta: f64,
    pub alpha: f64,
    pub beta: f64,
    pub mu: f64,
}

impl DescentParams {
    /// Constants an exact proximal step with weight `alpha` is guaranteed to
    /// satisfy: beta = 1/(2 alpha), hence alpha*beta = 1/2 and delta = alpha*beta^2.
    pub fn for_prox(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0) {
            return Err(Error::invalid("prox weight must be positive"));
        }
        let beta = 1.0 / (2.0 * alpha);
        Ok(DescentParams { delta: alpha * beta * beta, alpha, beta, mu: 2.0 * alpha })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.alpha > 0.0 && self.beta > 0.0) {
            return Err(Error::invalid("delta, alpha, beta must be positive"));
        }
        if !(self.mu >= 0.0) {
            return Err(Error::invalid("mu must be nonnegative"));
        }
        Ok(())
    }
}

/// Outcome of one per-step condition check. Steps are indexed by their target
/// iterate, so step k covers the move from iterate k-1 to iterate k.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConditionReport {
    pub condition_id: String,
    /// Smallest margin over all checked steps; 0 when nothing was checked.
    pub worst_margin: f64,
    pub violating_steps: Vec<usize>,
    pub steps_checked: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub note: Option<String>,
}

impl ConditionReport {
    pub fn passed(&self) -> bool {
        self.violating_steps.is_empty()
    }

    pub(crate) fn from_margins(
        condition_id: &str,
        margins: &[(usize, f64)],
        steps_checked: usize,
        tol: f64,
        note: Option<String>,
    ) -> ConditionReport {
        let worst_margin = margins.iter().map(|&(_, m)| m).fold(f64::INFINITY, f64::min);
        let worst_margin = if margins.is_empty() { 0.0 } else { worst_margin };
        let mut violating_steps: Vec<usize> =
            margins.iter().filter(|&&(_, m)| m < -tol).map(|&(k, _)| k).collect();
        violating_steps.dedup();
        ConditionReport {
            condition_id: condition_id.to_string(),
            worst_margin,
            violating_steps,
            steps_checked,
            note,
        }
    }
}

/// Margin per step: f(x_{k-1}) - f(x_k) - delta * slope(x_k)^2.
pub fn check_basic_descent(t: &Trace, delta: f64) -> Result<ConditionReport> {
    t.validate()?;
    if !(delta > 0.0) {
        return Err(Error::invalid("delta must be positive"));
    }
    let slopes =
        t.slopes.as_ref().ok_or_else(|| Error::invalid("basic descent check needs slopes"))?;
    let margins: Vec<(usize, f64)> = (1..t.len())
        .map(|k| (k, t.values[k - 1] - t.values[k] - delta * slopes[k] * slopes[k]))
        .collect();
    Ok(ConditionReport::from_margins("basic_descent", &margins, t.len() - 1, margin_tolerance(t), None))
}

/// Two margins per step: the drop against alpha * d_k^2, and d_k against
/// beta * slope(x_k). A step violates if either falls below -tol.
pub fn check_slope_descent(t: &Trace, alpha: f64, beta: f64) -> Result<ConditionReport> {
    t.validate()?;
    if !(alpha > 0.0 && beta > 0.0) {
        return Err(Error::invalid("alpha and beta must be positive"));
    }
    let slopes =
        t.slopes.as_ref().ok_or_else(|| Error::invalid("slope descent check needs slopes"))?;
    let mut margins = Vec::with_capacity(2 * t.len());
    for k in 1..t.len() {
        let d = t.step_dists[k - 1];
        margins.push((k, t.values[k - 1] - t.values[k] - alpha * d * d));
        margins.push((k, d - beta * slopes[k]));
    }
    Ok(ConditionReport::from_margins("slope_descent", &margins, t.len() - 1, margin_tolerance(t), None))
}

/// Margin per step: (gap_{k-1} - gap_k) - delta / phi'(gap_k)^2. The check
/// stops at the first zero gap; the truncation is noted in the report.
pub fn check_key_inequality(t: &Trace, d: &Desingularizer, delta: f64) -> Result<ConditionReport> {
    t.validate()?;
    if !(delta >= 0.0) {
        return Err(Error::invalid("delta must be nonnegative"));
    }
    let gaps = t.gaps.as_ref().ok_or_else(|| Error::invalid("key inequality check needs gaps"))?;
    let mut margins = Vec::new();
    let mut note = None;
    for k in 1..t.len() {
        if gaps[k - 1] <= 0.0 || gaps[k] <= 0.0 {
            note = Some(format!("range truncated at step {k}: zero gap"));
            break;
        }
        let (_, dphi) = desingularizer_eval(d, gaps[k])?;
        margins.push((k, gaps[k - 1] - gaps[k] - delta / (dphi * dphi)));
    }
    let checked = margins.len();
    Ok(ConditionReport::from_margins("key_inequality", &margins, checked, margin_tolerance(t), note))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValueConvergenceReport {
    pub monotone: bool,
    /// k * gap_k per iterate; heads toward 0 when values converge faster than 1/k.
    pub k_tau_trend: Vec<f64>,
    /// Sup of k * gap_k over the last quartile of iterations.
    pub k_tau_sup_tail: f64,
    /// Same sup over the first quartile, as the comparison baseline.
    pub k_tau_sup_head: f64,
    /// Echo of the caller's moderate-growth flag for the report consumer.
    pub moderate_growth: bool,
}

pub fn value_convergence_report(t: &Trace, moderate_growth: bool) -> Result<ValueConvergenceReport> {
    t.validate()?;
    let gaps = t.gaps.as_ref().ok_or_else(|| Error::invalid("value convergence report needs gaps"))?;
    let tol = margin_tolerance(t);
    let monotone = t.values.windows(2).all(|w| w[1] <= w[0] + tol);
    let k_tau_trend: Vec<f64> = gaps.iter().enumerate().map(|(k, &g)| k as f64 * g).collect();
    let n = k_tau_trend.len();
    let sup = |s: &[f64]| s.iter().copied().fold(0.0f64, f64::max);
    let head_end = (n / 4).max(1).min(n);
    let tail_start = (3 * n / 4).min(n - 1);
    Ok(ValueConvergenceReport {
        monotone,
        k_tau_sup_tail: sup(&k_tau_trend[tail_start..]),
        k_tau_sup_head: sup(&k_tau_trend[..head_end.max(2).min(n)]),
        k_tau_trend,
        moderate_growth,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RateFit {
    /// Least-squares slope of log gap_k against log k over the window.
    pub loglog_slope: f64,
    /// Mean of the trailing gap ratios, when their variance is below
    /// `RATIO_STABLE_VARIANCE`.
    pub ratio_limit: Option<f64>,
    pub window: (usize, usize),
    pub samples: usize,
}

fn least_squares_slope(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::InsufficientData("need at least two points for a slope fit".into()));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData("slope fit needs at least two distinct abscissae".into()));
    }
    Ok(sxy / sxx)
}

/// Fit the empirical rate of the gap sequence over `window` (half-open).
///
/// The window may run past termination: once a gap hits zero, the zero marks
/// the end of the fitted range (and contributes one final ratio of 0). At
/// least `RATE_FIT_MIN_SAMPLES` positive gaps must precede it.
pub fn rate_fit(t: &Trace, window: (usize, usize)) -> Result<RateFit> {
    t.validate()?;
    let gaps = t.gaps.as_ref().ok_or_else(|| Error::invalid("rate fit needs gaps"))?;
    let (lo, hi) = (window.0, window.1.min(t.len()));
    if lo >= hi {
        return Err(Error::invalid("empty rate window"));
    }
    let mut ks: Vec<usize> = Vec::new();
    for k in lo..hi {
        if gaps[k] > 0.0 {
            if ks.len() + lo < k {
                return Err(Error::invalid("gap vanishes and then reappears inside the window"));
            }
            ks.push(k);
        }
    }
    if ks.len() < RATE_FIT_MIN_SAMPLES {
        return Err(Error::InsufficientData(format!(
            "rate window holds {} positive-gap samples, need {RATE_FIT_MIN_SAMPLES}",
            ks.len()
        )));
    }
    let points: Vec<(f64, f64)> = ks
        .iter()
        .filter(|&&k| k >= 1)
        .map(|&k| ((k as f64).ln(), gaps[k].ln()))
        .collect();
    let loglog_slope = least_squares_slope(&points)?;

    let mut ratios = Vec::new();
    for &k in &ks {
        if k + 1 < hi {
            ratios.push(gaps[k + 1] / gaps[k]);
        }
    }
    let m = ratios.len();
    let q = (m / 4).max(3).min(m);
    let tail = &ratios[m - q..];
    let mean = tail.iter().sum::<f64>() / q as f64;
    let var = tail.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / q as f64;
    let ratio_limit = (var < RATIO_STABLE_VARIANCE).then_some(mean);
    Ok(RateFit { loglog_slope, ratio_limit, window: (lo, hi), samples: ks.len() })
}

/// Per-iterate radii bounding the distance to the limit point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorBoundSeries {
    /// lambda_k for k >= 1 in the step-free form
    /// (beta/alpha) phi(gap_k) + sqrt(gap_{k-1}/alpha).
    pub lambdas: Vec<f64>,
    /// Variant using the recorded step: (beta/alpha) phi(gap_k) + d_k.
    /// Tighter, but guaranteed to dominate only once the gap is small.
    pub step_form: Vec<f64>,
    /// Whether lambda_k >= d(x_k, x*) held at every k. None when the trace
    /// carries no iterates or no minimizer was supplied.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub dominated: Option<bool>,
}

pub fn error_bound_radii(
    t: &Trace,
    d: &Desingularizer,
    alpha: f64,
    beta: f64,
    minimizer: Option<&Vector>,
) -> Result<ErrorBoundSeries> {
    t.validate()?;
    if !(alpha > 0.0 && beta > 0.0) {
        return Err(Error::invalid("alpha and beta must be positive"));
    }
    let gaps = t.gaps.as_ref().ok_or_else(|| Error::invalid("error-bound radii need gaps"))?;
    let mut lambdas = Vec::with_capacity(t.len() - 1);
    let mut step_form = Vec::with_capacity(t.len() - 1);
    for k in 1..t.len() {
        let base = beta / alpha * d.phi(gaps[k])?;
        lambdas.push(base + (gaps[k - 1] / alpha).sqrt());
        step_form.push(base + t.step_dists[k - 1]);
    }
    let dominated = match minimizer {
        Some(xs) if t.iterates.len() == t.len() => {
            let tol = margin_tolerance(t);
            let mut holds = true;
            for k in 1..t.len() {
                if distance(&t.iterates[k], xs)? > lambdas[k - 1] + tol {
                    holds = false;
                    break;
                }
            }
            Some(holds)
        }
        _ => None,
    };
    Ok(ErrorBoundSeries { lambdas, step_form, dominated })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CriticalityReport {
    pub final_slope: f64,
    pub slope_trend: Vec<f64>,
    /// Which series backed the report; envelope slopes win when present.
    pub source: SlopeSource,
}

pub fn criticality_report(t: &Trace) -> Result<CriticalityReport> {
    t.validate()?;
    let (series, source) = if let Some(env) = &t.envelope_slopes {
        (env, SlopeSource::EnvelopeSampled)
    } else if let Some(s) = &t.slopes {
        (s, t.meta.slope_source)
    } else {
        return Err(Error::invalid("criticality report needs a slope series"));
    };
    Ok(CriticalityReport {
        final_slope: *series.last().expect("validated trace is nonempty"),
        slope_trend: series.clone(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::desing::Desingularizer;
    use crate::trace::TraceMeta;
    use proptest::prelude::*;

    /// Proximal steps on f = x^2 with weight 1 halve the iterate, so from
    /// x0 = 1: x_k = 2^-k, gap_k = 4^-k, d_k = 2^-k, slope(x_k) = 2^(1-k).
    fn square_trace(n: usize) -> Trace {
        let xs: Vec<f64> = (0..n).map(|k| 0.5f64.powi(k as i32)).collect();
        Trace {
            iterates: xs.iter().map(|&x| Vector::scalar(x)).collect(),
            values: xs.iter().map(|&x| x * x).collect(),
            gaps: Some(xs.iter().map(|&x| x * x).collect()),
            step_dists: xs.windows(2).map(|w| w[0] - w[1]).collect(),
            slopes: Some(xs.iter().map(|&x| 2.0 * x).collect()),
            envelope_values: None,
            envelope_slopes: None,
            meta: TraceMeta { slope_source: SlopeSource::GradientNorm, ..TraceMeta::default() },
        }
    }

    /// Proximal steps on f = |x| with weight 1 shrink toward 0 by 1/2:
    /// iterates 2, 1.5, 1, 0.5, 0.
    fn abs_trace() -> Trace {
        let xs = [2.0, 1.5, 1.0, 0.5, 0.0];
        Trace {
            iterates: xs.iter().map(|&x| Vector::scalar(x)).collect(),
            values: xs.to_vec(),
            gaps: Some(xs.to_vec()),
            step_dists: vec![0.5; 4],
            slopes: Some(vec![1.0, 1.0, 1.0, 1.0, 0.0]),
            envelope_values: None,
            envelope_slopes: None,
            meta: TraceMeta { slope_source: SlopeSource::GradientNorm, ..TraceMeta::default() },
        }
    }

    fn constant_trace() -> Trace {
        Trace {
            iterates: vec![Vector::scalar(0.0); 3],
            values: vec![0.0; 3],
            gaps: Some(vec![0.0; 3]),
            step_dists: vec![0.0; 2],
            slopes: Some(vec![0.0; 3]),
            envelope_values: None,
            envelope_slopes: None,
            meta: TraceMeta::default(),
        }
    }

    #[test]
    fn prox_params_wire_alpha_to_the_other_constants() {
        let p = DescentParams::for_prox(1.0).unwrap();
        assert_eq!((p.delta, p.alpha, p.beta, p.mu), (0.25, 1.0, 0.5, 2.0));
        assert!(DescentParams::for_prox(0.0).is_err());
        assert!(DescentParams { delta: 0.0, ..p }.validate().is_err());
    }

    #[test]
    fn basic_descent_holds_on_square_trace() {
        // Margin at step k: 3*4^-k - 0.25 * (2^(1-k))^2 = 2*4^-k, exactly dyadic.
        let t = square_trace(12);
        let r = check_basic_descent(&t, 0.25).unwrap();
        assert!(r.passed());
        assert_eq!(r.steps_checked, 11);
        assert_eq!(r.worst_margin, 2.0 * 0.25f64.powi(11));
    }

    #[test]
    fn basic_descent_flags_every_step_for_oversized_delta() {
        let t = square_trace(8);
        let r = check_basic_descent(&t, 10.0).unwrap();
        assert_eq!(r.violating_steps, (1..8).collect::<Vec<_>>());
        assert!(r.worst_margin < 0.0);
    }

    #[test]
    fn basic_descent_on_constant_trace_has_zero_margins() {
        let r = check_basic_descent(&constant_trace(), 0.25).unwrap();
        assert!(r.passed());
        assert_eq!(r.worst_margin, 0.0);
    }

    #[test]
    fn basic_descent_reports_an_uphill_step() {
        let mut t = square_trace(5);
        t.values[3] = t.values[2] + 1.0;
        t.gaps = None;
        let r = check_basic_descent(&t, 0.25).unwrap();
        assert!(r.violating_steps.contains(&3));
    }

    #[test]
    fn basic_descent_requires_slopes() {
        let mut t = square_trace(5);
        t.slopes = None;
        assert!(matches!(check_basic_descent(&t, 0.25), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn slope_descent_is_tight_on_square_trace() {
        // d_k = 2^-k equals beta * slope(x_k) = 0.5 * 2^(1-k) exactly.
        let t = square_trace(10);
        let r = check_slope_descent(&t, 1.0, 0.5).unwrap();
        assert!(r.passed());
        assert_eq!(r.worst_margin, 0.0);
        assert_eq!(r.steps_checked, 9);
    }

    #[test]
    fn slope_descent_holds_on_abs_trace() {
        let r = check_slope_descent(&abs_trace(), 1.0, 0.5).unwrap();
        assert!(r.passed());
        assert_eq!(r.worst_margin, 0.0);
    }

    #[test]
    fn slope_descent_flags_oversized_beta_once_per_step() {
        let t = square_trace(6);
        let r = check_slope_descent(&t, 1.0, 0.6).unwrap();
        assert_eq!(r.violating_steps, (1..6).collect::<Vec<_>>());
    }

    #[test]
    fn key_inequality_holds_on_square_trace() {
        // phi'(tau) = 0.5 tau^-1/2, so delta/phi'^2 = tau_k and the margin is
        // (tau_{k-1} - tau_k) - tau_k = 2*4^-k.
        let t = square_trace(12);
        let d = Desingularizer::power_form(1.0, 0.5).unwrap();
        let r = check_key_inequality(&t, &d, 0.25).unwrap();
        assert!(r.passed());
        assert_eq!(r.worst_margin, 2.0 * 0.25f64.powi(11));
        assert!(r.note.is_none());

        let r = check_key_inequality(&t, &d, 0.0).unwrap();
        assert!(r.passed());

        let r = check_key_inequality(&t, &d, 10.0).unwrap();
        assert!(!r.passed());
    }

    #[test]
    fn key_inequality_truncates_at_zero_gap() {
        let t = abs_trace();
        let d = Desingularizer::power_form(1.0, 0.0).unwrap();
        let r = check_key_inequality(&t, &d, 0.25).unwrap();
        assert_eq!(r.steps_checked, 3);
        assert!(r.note.as_deref().unwrap().contains("truncated"));
        assert!(r.passed());
        assert_eq!(r.worst_margin, 0.25);
    }

    #[test]
    fn value_convergence_tail_collapses_on_square_trace() {
        let r = value_convergence_report(&square_trace(40), true).unwrap();
        assert!(r.monotone);
        assert_eq!(r.k_tau_trend[0], 0.0);
        assert_eq!(r.k_tau_trend[1], 0.25);
        assert!(r.k_tau_sup_tail <= 1e-6 * r.k_tau_sup_head);
        assert!(r.moderate_growth);
    }

    #[test]
    fn value_convergence_detects_nonmonotone_values() {
        let mut t = square_trace(8);
        t.values[4] = t.values[3] + 0.5;
        let r = value_convergence_report(&t, false).unwrap();
        assert!(!r.monotone);
    }

    #[test]
    fn rate_fit_recovers_the_square_trace_ratio() {
        let t = square_trace(40);
        let r = rate_fit(&t, (0, 40)).unwrap();
        assert_eq!(r.ratio_limit, Some(0.25));
        assert_eq!(r.samples, 40);
    }

    #[test]
    fn rate_fit_recovers_polynomial_decay_exactly() {
        let n = 200;
        let gaps: Vec<f64> = (0..n).map(|k| ((k + 1) as f64).powi(-2)).collect();
        let t = Trace {
            iterates: Vec::new(),
            values: gaps.clone(),
            gaps: Some(gaps),
            step_dists: vec![0.0; n - 1],
            slopes: None,
            envelope_values: None,
            envelope_slopes: None,
            meta: TraceMeta::default(),
        };
        let r = rate_fit(&t, (10, 200)).unwrap();
        // log gap_k = -2 log(k+1) differs from -2 log k by a vanishing offset.
        assert!((r.loglog_slope + 2.0).abs() < 0.05, "slope {}", r.loglog_slope);
        // Trailing ratios (k/(k+1))^2 sit just below 1 with tiny variance.
        let lim = r.ratio_limit.unwrap();
        assert!(lim > 0.98 && lim < 1.0);
    }

    #[test]
    fn rate_fit_reports_vanishing_ratios_past_termination() {
        // gap_k = 10^(-2^k) underflows to exactly 0 at k = 9; the final
        // recorded ratio is the 0 into the terminal entry.
        let gaps: Vec<f64> = (0..12).map(|k| 10f64.powi(-(1i32 << k))).collect();
        assert_eq!(gaps[9], 0.0);
        let n = gaps.len();
        let t = Trace {
            iterates: Vec::new(),
            values: gaps.clone(),
            gaps: Some(gaps),
            step_dists: vec![0.0; n - 1],
            slopes: None,
            envelope_values: None,
            envelope_slopes: None,
            meta: TraceMeta::default(),
        };
        let r = rate_fit(&t, (0, n)).unwrap();
        assert_eq!(r.samples, 9);
        let lim = r.ratio_limit.expect("superlinear tail is stable");
        assert!(lim < 1e-6, "ratio limit {lim}");
    }

    #[test]
    fn rate_fit_rejects_short_windows() {
        let t = square_trace(6);
        assert!(matches!(rate_fit(&t, (0, 6)), Err(Error::InsufficientData(_))));
        assert!(rate_fit(&square_trace(20), (5, 5)).is_err());
    }

    proptest! {
        // Synthetic decay c * k^-p: the log-log fit recovers -p.
        #[test]
        fn rate_fit_recovers_power_laws(p in 1usize..=3, c in 0.1f64..10.0) {
            let n = 200;
            let gaps: Vec<f64> = (0..n).map(|k| c * ((k + 1) as f64).powi(-(p as i32))).collect();
            let t = Trace {
                iterates: Vec::new(),
                values: gaps.clone(),
                gaps: Some(gaps),
                step_dists: vec![0.0; n - 1],
                slopes: None,
                envelope_values: None,
                envelope_slopes: None,
                meta: TraceMeta::default(),
            };
            let r = rate_fit(&t, (20, 200)).unwrap();
            prop_assert!((r.loglog_slope + p as f64).abs() < 0.05);
        }
    }

    #[test]
    fn error_bound_radii_match_the_halving_closed_form() {
        // lambda_k = 0.5 * 2^-k + 2^-(k-1) = 2.5 * 2^-k; the step variant
        // swaps the sqrt term for d_k = 2^-k, giving 1.5 * 2^-k.
        let t = square_trace(12);
        let d = Desingularizer::power_form(1.0, 0.5).unwrap();
        let eb = error_bound_radii(&t, &d, 1.0, 0.5, Some(&Vector::scalar(0.0))).unwrap();
        for (i, (&l, &s)) in eb.lambdas.iter().zip(&eb.step_form).enumerate() {
            let k = (i + 1) as i32;
            assert_eq!(l, 2.5 * 0.5f64.powi(k));
            assert_eq!(s, 1.5 * 0.5f64.powi(k));
        }
        assert_eq!(eb.dominated, Some(true));
        assert!(eb.lambdas.windows(2).all(|w| w[1] <= w[0]));
        assert!(eb.step_form.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn error_bound_radii_dominate_the_abs_trace() {
        let t = abs_trace();
        let d = Desingularizer::power_form(1.0, 0.0).unwrap();
        let eb = error_bound_radii(&t, &d, 1.0, 0.5, Some(&Vector::scalar(0.0))).unwrap();
        assert_eq!(eb.dominated, Some(true));
        // The step variant is the published radius but only kicks in once the
        // gap is below ~1: at k=1 it reads 1.25 against a true error of 1.5.
        assert_eq!(eb.step_form[0], 0.5 * 1.5 + 0.5);
        assert!(eb.step_form[0] < distance(&t.iterates[1], &Vector::scalar(0.0)).unwrap());
        assert!(eb.lambdas[0] >= 1.5);
    }

    #[test]
    fn error_bound_radii_collapse_at_a_minimizer() {
        let mut t = constant_trace();
        t.step_dists = vec![0.0, 0.0];
        let d = Desingularizer::power_form(1.0, 0.5).unwrap();
        let eb = error_bound_radii(&t, &d, 1.0, 0.5, None).unwrap();
        assert_eq!(eb.step_form, vec![0.0, 0.0]);
        assert_eq!(eb.lambdas, vec![0.0, 0.0]);
        assert_eq!(eb.dominated, None);
    }

    #[test]
    fn criticality_report_prefers_envelope_slopes() {
        let mut t = square_trace(6);
        let r = criticality_report(&t).unwrap();
        assert_eq!(r.source, SlopeSource::GradientNorm);
        assert_eq!(r.final_slope, 2.0 * 0.5f64.powi(5));

        t.envelope_slopes = Some(vec![0.5; 6]);
        let r = criticality_report(&t).unwrap();
        assert_eq!(r.source, SlopeSource::EnvelopeSampled);
        assert_eq!(r.final_slope, 0.5);

        t.envelope_slopes = None;
        t.slopes = None;
        assert!(criticality_report(&t).is_err());
    }

    prop_compose! {
        // Traces built to satisfy slope descent with alpha=1, beta=0.5 by
        // construction: slopes are sampled below d_k / beta and drops above
        // alpha * d_k^2.
        fn compliant_trace()(
            steps in proptest::collection::vec((1e-3f64..1.0, 0.0f64..1.0, 0.0f64..0.5), 2..20),
        ) -> Trace {
            let mut values = vec![10.0];
            let mut slopes = vec![1.0];
            let mut dists = Vec::new();
            for &(d, u, extra) in &steps {
                let drop = d * d + extra;
                values.push(values.last().unwrap() - drop);
                slopes.push(u * d / 0.5);
                dists.push(d);
            }
            Trace {
                iterates: Vec::new(),
                values,
                gaps: None,
                step_dists: dists,
                slopes: Some(slopes),
                envelope_values: None,
                envelope_slopes: None,
                meta: TraceMeta::default(),
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        // Slope descent with (alpha, beta) implies basic descent with
        // delta = alpha * beta^2.
        #[test]
        fn slope_descent_implies_basic_descent(t in compliant_trace()) {
            let sd = check_slope_descent(&t, 1.0, 0.5).unwrap();
            prop_assert!(sd.passed());
            let bd = check_basic_descent(&t, 1.0 * 0.5 * 0.5).unwrap();
            prop_assert!(bd.passed(), "worst basic margin {}", bd.worst_margin);
        }
    }
}
