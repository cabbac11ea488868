//! Builds the solver for a config, runs it, executes checks, and writes the
//! trace/report pair. Nothing is written until the run and every check have
//! completed, so a config error never leaves partial outputs behind.

use std::fs;
use std::path::{Path, PathBuf};

use slopebench_core::mm::{run_mm_with, MmProblem, RunOptions, SlopeBudget, StopRule};
use slopebench_core::solvers::NlpProblem;
use slopebench_core::{Error, Result, Trace, Vector};

use crate::checks::{execute_checks, CheckContext};
use crate::config::{ExperimentConfig, SolverParams};
use crate::problems::{ProblemDef, Registry};
use crate::report::{emit_report, ReportFormat, ReportRow};

/// Overrides the config's output directory when set.
pub const OUTPUT_DIR_ENV: &str = "SLOPEBENCH_OUT";

pub struct BuiltProblem {
    pub mm: MmProblem,
    /// Present for moving-balls runs; feeds the feasibility check.
    pub nlp: Option<NlpProblem>,
    /// Proximal-point modulus, when that solver is in play.
    pub alpha: Option<f64>,
    /// Prox-linear modulus actually used.
    pub mu: Option<f64>,
    pub dim: usize,
}

pub fn build_problem(
    def: &ProblemDef,
    solver_id: &str,
    params: &SolverParams,
) -> Result<BuiltProblem> {
    match solver_id {
        "prox_point" => {
            let alpha = params.alpha.unwrap_or(1.0);
            let mm = MmProblem::proximal_point(def.objective()?, alpha)?;
            Ok(BuiltProblem { mm, nlp: None, alpha: Some(alpha), mu: None, dim: def.dim() })
        }
        "prox_linear" => {
            let mu = params
                .mu
                .or(def.default_mu())
                .ok_or_else(|| Error::invalid("prox_linear needs a modulus mu"))?;
            let mut mm = MmProblem::prox_linear(def.composite_problem(mu)?)?;
            if let Some(inf) = def.known_inf() {
                mm = mm.with_known_inf(inf);
            }
            Ok(BuiltProblem { mm, nlp: None, alpha: None, mu: Some(mu), dim: def.dim() })
        }
        "moving_balls" => {
            let nlp = def.nlp_problem()?;
            let mm = MmProblem::moving_balls(def.nlp_problem()?)?;
            Ok(BuiltProblem { mm, nlp: Some(nlp), alpha: None, mu: None, dim: def.dim() })
        }
        other => Err(Error::invalid(format!("unknown solver '{other}'"))),
    }
}

/// Validate, solve, and run every requested check. Pure with respect to the
/// filesystem; pair with [`write_outputs`] to persist.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    registry: &Registry,
) -> Result<(Trace, Vec<ReportRow>)> {
    cfg.validate(registry)?;
    let def = registry.problem(&cfg.problem_id)?;
    let built = build_problem(def, &cfg.solver_id, &cfg.solver_params)?;
    let x0 = Vector::new(cfg.x0.clone().unwrap_or_else(|| def.default_x0().to_vec()));
    let stop = StopRule::new(cfg.stop.step_tol, cfg.stop.max_iter)?;
    let opts = RunOptions {
        record_envelope_slopes: cfg.record_envelope_slopes,
        slope_budget: SlopeBudget::default(),
    };
    let trace = run_mm_with(&built.mm, &x0, &stop, cfg.subproblem_tol, &opts)?;
    let rows = execute_checks(&CheckContext { cfg, def, built: &built, trace: &trace });
    Ok((trace, rows))
}

pub fn resolve_output_dir(cfg: &ExperimentConfig) -> Result<PathBuf> {
    if let Some(dir) = std::env::var_os(OUTPUT_DIR_ENV) {
        return Ok(PathBuf::from(dir));
    }
    cfg.output_dir.clone().ok_or_else(|| {
        Error::invalid(format!("no output directory: set output_dir or {OUTPUT_DIR_ENV}"))
    })
}

/// Write `trace.csv` and `report.json` under the resolved output directory.
pub fn write_outputs(
    cfg: &ExperimentConfig,
    trace: &Trace,
    rows: &[ReportRow],
) -> Result<(PathBuf, PathBuf)> {
    let dir = resolve_output_dir(cfg)?;
    fs::create_dir_all(&dir)?;
    let trace_path = dir.join("trace.csv");
    trace.write_csv(&trace_path)?;
    let report_path = dir.join("report.json");
    let report = if rows.is_empty() {
        "[]\n".to_string()
    } else {
        emit_report(rows, ReportFormat::Json)?
    };
    fs::write(&report_path, report)?;
    Ok((trace_path, report_path))
}

/// Re-run the config and compare the stored CSV byte-for-byte against the
/// regenerated trace. Runs are deterministic, so any drift means the file and
/// the config no longer describe the same experiment.
pub fn check_against(
    trace_path: &Path,
    cfg: &ExperimentConfig,
    registry: &Registry,
) -> Result<(bool, Vec<ReportRow>)> {
    let stored = fs::read_to_string(trace_path)?;
    let (trace, rows) = run_experiment(cfg, registry)?;
    Ok((stored == trace.to_csv(), rows))
}
