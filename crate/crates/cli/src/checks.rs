//! Turns configured checks into report rows against a finished run.
//!
//! A check that cannot be computed (missing facet, missing series, no modulus
//! in scope) fails with the error in its details rather than aborting the
//! other checks.

use serde_json::{json, Value};

use slopebench_core::desing::Desingularizer;
use slopebench_core::diag::{
    check_basic_descent, check_key_inequality, check_slope_descent, criticality_report,
    margin_tolerance, rate_fit, value_convergence_report,
};
use slopebench_core::kl::{classify_rate, fit_kl_exponent, KlFit};
use slopebench_core::metric::distance;
use slopebench_core::mm::{
    check_envelope_descent, check_majorization, fixed_point_slope_check, MmProblem,
};
use slopebench_core::slope::samples_from_trace;
use slopebench_core::solvers::FEAS_TOL;
use slopebench_core::{BoundingBox, Error, Result, Trace, Vector};

use crate::config::{CheckSpec, ExperimentConfig};
use crate::problems::ProblemDef;
use crate::report::{ReportRow, ERROR_MARGIN};
use crate::runner::BuiltProblem;

pub struct CheckContext<'a> {
    pub cfg: &'a ExperimentConfig,
    pub def: &'a ProblemDef,
    pub built: &'a BuiltProblem,
    pub trace: &'a Trace,
}

pub fn execute_checks(ctx: &CheckContext) -> Vec<ReportRow> {
    ctx.cfg.checks.iter().map(|spec| run_check(spec, ctx)).collect()
}

pub fn run_check(spec: &CheckSpec, ctx: &CheckContext) -> ReportRow {
    match dispatch(spec, ctx) {
        Ok(row) => row,
        Err(e) => ReportRow::from_error(spec.id(), &e),
    }
}

fn to_details<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

/// The proximal modulus in scope, if any; explicit parameters win.
fn alpha_for(ctx: &CheckContext, explicit: Option<f64>) -> Result<f64> {
    explicit.or(ctx.built.alpha).ok_or_else(|| {
        Error::invalid("no proximal modulus in scope; pass the parameter explicitly")
    })
}

fn fit_kl(ctx: &CheckContext, window: (f64, f64), per_segment: usize) -> Result<KlFit> {
    let samples = samples_from_trace(&ctx.built.mm.objective, ctx.trace, per_segment)?;
    fit_kl_exponent(&samples, window)
}

fn require_iterates(ctx: &CheckContext) -> Result<()> {
    if ctx.trace.iterates.len() != ctx.trace.len() {
        return Err(Error::invalid("trace carries no iterate coordinates"));
    }
    Ok(())
}

fn dispatch(spec: &CheckSpec, ctx: &CheckContext) -> Result<ReportRow> {
    match spec {
        CheckSpec::KlFit { gap_window, expected_theta, theta_tol, per_segment } => {
            let fit = fit_kl(ctx, *gap_window, *per_segment)?;
            let regime = classify_rate(fit.theta_hat)?;
            let mut details = json!({
                "fit": fit,
                "regime": regime,
                "gap_window": [gap_window.0, gap_window.1],
            });
            let margin = match expected_theta {
                Some(te) => {
                    details["expected_theta"] = json!(te);
                    theta_tol - (fit.theta_hat - te).abs()
                }
                None => 0.0,
            };
            Ok(ReportRow::from_margin("kl_fit", margin, 0.0, details))
        }

        CheckSpec::RateFit { window, expected_loglog, loglog_tol, expected_ratio, ratio_tol } => {
            let rf = rate_fit(ctx.trace, *window)?;
            let mut details = json!({ "fit": rf });
            let mut margins: Vec<f64> = Vec::new();
            if let Some(e) = expected_loglog {
                details["expected_loglog"] = json!(e);
                margins.push(loglog_tol - (rf.loglog_slope - e).abs());
            }
            if let Some(e) = expected_ratio {
                details["expected_ratio"] = json!(e);
                match rf.ratio_limit {
                    Some(r) => margins.push(ratio_tol - (r - e).abs()),
                    None => {
                        details["error"] = json!("gap ratios did not stabilize");
                        return Ok(ReportRow::from_outcome(
                            "rate_fit",
                            false,
                            ERROR_MARGIN,
                            details,
                        ));
                    }
                }
            }
            let margin = if margins.is_empty() {
                0.0
            } else {
                margins.into_iter().fold(f64::INFINITY, f64::min)
            };
            Ok(ReportRow::from_margin("rate_fit", margin, 0.0, details))
        }

        CheckSpec::BasicDescent { delta } => {
            let delta = match delta {
                Some(d) => *d,
                None => 1.0 / (4.0 * alpha_for(ctx, None)?),
            };
            let rep = check_basic_descent(ctx.trace, delta)?;
            Ok(ReportRow::from_outcome(
                "basic_descent",
                rep.passed(),
                rep.worst_margin,
                json!({"delta": delta, "report": rep}),
            ))
        }

        CheckSpec::SlopeDescent { alpha, beta } => {
            let a = alpha_for(ctx, *alpha)?;
            let b = beta.unwrap_or(1.0 / (2.0 * a));
            let rep = check_slope_descent(ctx.trace, a, b)?;
            Ok(ReportRow::from_outcome(
                "slope_descent",
                rep.passed(),
                rep.worst_margin,
                json!({"alpha": a, "beta": b, "report": rep}),
            ))
        }

        CheckSpec::KeyInequality { delta, gap_window, per_segment } => {
            let fit = fit_kl(ctx, *gap_window, *per_segment)?;
            let d = Desingularizer::power_form(fit.kappa_hat, fit.theta_hat)?;
            let delta = match delta {
                Some(d) => *d,
                None => 1.0 / (4.0 * alpha_for(ctx, None)?),
            };
            let rep = check_key_inequality(ctx.trace, &d, delta)?;
            Ok(ReportRow::from_outcome(
                "key_inequality",
                rep.passed(),
                rep.worst_margin,
                json!({"delta": delta, "fit": fit, "report": rep}),
            ))
        }

        CheckSpec::ValueConvergence { moderate_growth, tail_fraction } => {
            let rep = value_convergence_report(ctx.trace, *moderate_growth)?;
            let tail_margin = tail_fraction * rep.k_tau_sup_head - rep.k_tau_sup_tail;
            let margin = if rep.monotone { tail_margin } else { tail_margin.min(-1.0) };
            Ok(ReportRow::from_margin(
                "value_convergence",
                margin,
                0.0,
                json!({"tail_fraction": tail_fraction, "report": rep}),
            ))
        }

        CheckSpec::ErrorBound { alpha, beta, minimizer, gap_window, per_segment } => {
            require_iterates(ctx)?;
            let a = alpha_for(ctx, *alpha)?;
            let b = beta.unwrap_or(1.0 / (2.0 * a));
            let fit = fit_kl(ctx, *gap_window, *per_segment)?;
            let d = Desingularizer::power_form(fit.kappa_hat, fit.theta_hat)?;
            let minimizer: Option<Vector> = minimizer
                .clone()
                .or_else(|| ctx.def.minimizer().map(|s| s.to_vec()))
                .map(Vector::new);
            let series = error_bound_series(ctx, &d, a, b, minimizer.as_ref())?;
            let margin = match &minimizer {
                Some(xs) => {
                    let mut worst = f64::INFINITY;
                    for k in 1..ctx.trace.len() {
                        let dist = distance(&ctx.trace.iterates[k], xs)?;
                        worst = worst.min(series.lambdas[k - 1] - dist);
                    }
                    if worst.is_finite() {
                        worst
                    } else {
                        0.0
                    }
                }
                None => 0.0,
            };
            Ok(ReportRow::from_margin(
                "error_bound",
                margin,
                margin_tolerance(ctx.trace),
                json!({"alpha": a, "beta": b, "fit": fit, "series": series}),
            ))
        }

        CheckSpec::Criticality { slope_tol } => {
            let rep = criticality_report(ctx.trace)?;
            Ok(ReportRow::from_margin(
                "criticality",
                slope_tol - rep.final_slope,
                0.0,
                json!({"slope_tol": slope_tol, "report": rep}),
            ))
        }

        CheckSpec::Feasibility {} => {
            require_iterates(ctx)?;
            let nlp = ctx
                .built
                .nlp
                .as_ref()
                .ok_or_else(|| Error::invalid("feasibility needs a constrained problem"))?;
            let mut worst = f64::INFINITY;
            let mut violations = Vec::new();
            for (k, x) in ctx.trace.iterates.iter().enumerate() {
                let margin = FEAS_TOL - nlp.feasibility_margin(x);
                if margin < 0.0 {
                    violations.push(k);
                }
                worst = worst.min(margin);
            }
            let worst = if worst.is_finite() { worst } else { 0.0 };
            Ok(ReportRow::from_margin(
                "feasibility",
                worst,
                0.0,
                json!({"feas_tol": FEAS_TOL, "violations": violations}),
            ))
        }

        CheckSpec::EnvelopeDescent { beta } => {
            let rep =
                check_envelope_descent(ctx.trace, ctx.built.mm.mu, *beta, ctx.built.mm.gamma_total())?;
            let mut worst = rep.descent.worst_margin;
            let mut passed = rep.descent.passed();
            if let Some(nc) = &rep.near_critical {
                worst = worst.min(nc.worst_margin);
                passed &= nc.passed();
            }
            Ok(ReportRow::from_outcome("envelope_descent", passed, worst, to_details(&rep)))
        }

        CheckSpec::Majorization { mu, pairs, sample_box } => {
            let rebuilt: Option<MmProblem> = match mu {
                Some(m) => Some(MmProblem::prox_linear(ctx.def.composite_problem(*m)?)?),
                None => None,
            };
            let mm = rebuilt.as_ref().unwrap_or(&ctx.built.mm);
            let sample_region = BoundingBox::cube(ctx.built.dim, sample_box.0, sample_box.1)?;
            let rep = check_majorization(mm, &sample_region, *pairs, ctx.cfg.seed)?;
            Ok(ReportRow::from_outcome(
                "majorization",
                rep.passed(),
                rep.worst_margin,
                json!({"mu": mm.mu, "pairs": pairs, "seed": ctx.cfg.seed, "report": rep}),
            ))
        }

        CheckSpec::FixedPoint { step_tol, slope_tol } => {
            require_iterates(ctx)?;
            let step_tol = step_tol.unwrap_or(ctx.cfg.stop.step_tol);
            let x = ctx.trace.iterates.last().expect("validated trace is nonempty");
            let slope = fixed_point_slope_check(&ctx.built.mm, x, step_tol)?;
            Ok(ReportRow::from_margin(
                "fixed_point",
                slope_tol - slope,
                0.0,
                json!({"slope": slope, "step_tol": step_tol, "slope_tol": slope_tol}),
            ))
        }
    }
}

/// Wrapper keeping the diag call in one place so the two callers agree.
fn error_bound_series(
    ctx: &CheckContext,
    d: &Desingularizer,
    alpha: f64,
    beta: f64,
    minimizer: Option<&Vector>,
) -> Result<slopebench_core::diag::ErrorBoundSeries> {
    slopebench_core::diag::error_bound_radii(ctx.trace, d, alpha, beta, minimizer)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SolverParams;
    use crate::problems::Registry;
    use crate::runner::build_problem;
    use slopebench_core::mm::{run_mm, StopRule};

    fn p2_context() -> (ExperimentConfig, Registry) {
        let cfg: ExperimentConfig = serde_json::from_value(serde_json::json!({
            "problem_id": "power_p2",
            "solver_id": "prox_point",
            "x0": [1.0],
            "stop": {"step_tol": 1e-9, "max_iter": 100},
        }))
        .unwrap();
        (cfg, Registry::builtin())
    }

    #[test]
    fn default_parameters_come_from_the_solver_modulus() {
        let (cfg, reg) = p2_context();
        let def = reg.problem("power_p2").unwrap();
        let built = build_problem(def, "prox_point", &SolverParams::default()).unwrap();
        let x0 = Vector::scalar(1.0);
        let stop = StopRule::new(1e-9, 100).unwrap();
        let trace = run_mm(&built.mm, &x0, &stop, 1e-12).unwrap();
        let ctx = CheckContext { cfg: &cfg, def, built: &built, trace: &trace };

        let row = run_check(&CheckSpec::BasicDescent { delta: None }, &ctx);
        assert!(row.passed(), "{:?}", row);
        assert_eq!(row.details["delta"], 0.25);

        let row = run_check(&CheckSpec::SlopeDescent { alpha: None, beta: None }, &ctx);
        assert!(row.passed());
        assert_eq!(row.details["beta"], 0.5);
    }

    #[test]
    fn missing_facets_fail_the_row_not_the_run() {
        let (cfg, reg) = p2_context();
        let def = reg.problem("power_p2").unwrap();
        let built = build_problem(def, "prox_point", &SolverParams::default()).unwrap();
        let x0 = Vector::scalar(1.0);
        let stop = StopRule::new(1e-9, 50).unwrap();
        let trace = run_mm(&built.mm, &x0, &stop, 1e-12).unwrap();
        let ctx = CheckContext { cfg: &cfg, def, built: &built, trace: &trace };

        let row = run_check(&CheckSpec::Feasibility {}, &ctx);
        assert!(!row.passed());
        assert_eq!(row.worst_margin, ERROR_MARGIN);
        assert!(row.details["error"].as_str().unwrap().contains("constrained"));

        // mu override needs the composite facet.
        let row = run_check(
            &CheckSpec::Majorization { mu: Some(1.0), pairs: 10, sample_box: (-2.0, 2.0) },
            &ctx,
        );
        assert!(!row.passed());
        assert_eq!(row.worst_margin, ERROR_MARGIN);
    }
}
