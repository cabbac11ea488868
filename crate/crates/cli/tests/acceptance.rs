//! End-to-end acceptance gate. Each numbered criterion prints one pass/fail
//! line; the test fails if any criterion does.

use std::time::{Duration, Instant};

use serde_json::{json, Value};

use slopebench_cli::config::ExperimentConfig;
use slopebench_cli::problems::{Registry, TWO_BALL_OPT};
use slopebench_cli::report::{emit_report, ReportFormat, ReportRow};
use slopebench_cli::runner::run_experiment;

use slopebench_core::approx::approximator_gamma_fit;
use slopebench_core::metric::dykstra_project;
use slopebench_core::mm::MmProblem;
use slopebench_core::solvers::{moving_balls_model, FEAS_TOL};
use slopebench_core::{Ball, BoundingBox, Trace, Vector};

struct Gate {
    failures: Vec<String>,
}

impl Gate {
    fn new() -> Self {
        Gate { failures: Vec::new() }
    }

    fn criterion(&mut self, n: usize, desc: &str, ok: bool, detail: String) {
        if ok {
            println!("criterion {n:02} pass - {desc}");
        } else {
            println!("criterion {n:02} FAIL - {desc}: {detail}");
            self.failures.push(format!("criterion {n:02}: {detail}"));
        }
    }

    fn finish(self) {
        assert!(self.failures.is_empty(), "failed criteria:\n{}", self.failures.join("\n"));
    }
}

fn run(v: Value) -> (Trace, Vec<ReportRow>) {
    let cfg: ExperimentConfig = serde_json::from_value(v).expect("valid config");
    run_experiment(&cfg, &Registry::builtin()).expect("run succeeds")
}

fn timed_run(v: Value) -> (Trace, Vec<ReportRow>, Duration) {
    let t0 = Instant::now();
    let (trace, rows) = run(v);
    (trace, rows, t0.elapsed())
}

fn row<'a>(rows: &'a [ReportRow], id: &str) -> &'a ReportRow {
    rows.iter().find(|r| r.check_id == id).unwrap_or_else(|| panic!("no row '{id}'"))
}

fn rows_of<'a>(rows: &'a [ReportRow], id: &str) -> Vec<&'a ReportRow> {
    rows.iter().filter(|r| r.check_id == id).collect()
}

fn df(v: &Value, path: &[&str]) -> f64 {
    let mut cur = v;
    for p in path {
        cur = &cur[*p];
    }
    cur.as_f64().unwrap_or(f64::NAN)
}

fn with_tol(mut v: Value, tol: f64) -> Value {
    v["subproblem_tol"] = json!(tol);
    v
}

fn power_cfg(problem: &str, theta: f64, per_segment: usize, fixed_point: bool) -> Value {
    let mut checks = vec![
        json!({"id": "kl_fit", "expected_theta": theta, "per_segment": per_segment}),
        json!({"id": "slope_descent"}),
        json!({"id": "basic_descent"}),
        json!({"id": "envelope_descent"}),
    ];
    if fixed_point {
        // Only for runs that actually reach the step tolerance; the short
        // sublinear run exhausts its budget far from the minimizer.
        checks.push(json!({"id": "fixed_point", "slope_tol": 1e-4}));
    }
    json!({
        "problem_id": problem,
        "solver_id": "prox_point",
        "x0": [1.0],
        "stop": {"step_tol": 1e-9, "max_iter": 60},
        "subproblem_tol": 1e-12,
        "record_envelope_slopes": true,
        "checks": checks,
    })
}

fn p2_cfg() -> Value {
    json!({
        "problem_id": "power_p2",
        "solver_id": "prox_point",
        "x0": [1.0],
        "stop": {"step_tol": 1e-9, "max_iter": 100},
        "subproblem_tol": 1e-12,
        "record_envelope_slopes": true,
        "checks": [
            {"id": "kl_fit", "expected_theta": 0.5},
            {"id": "rate_fit", "window": [1, 25], "expected_ratio": 0.25, "ratio_tol": 1e-6},
            {"id": "slope_descent"},
            {"id": "basic_descent"},
            {"id": "key_inequality"},
            {"id": "error_bound"},
            {"id": "envelope_descent"},
            {"id": "criticality", "slope_tol": 1e-4},
            {"id": "fixed_point", "slope_tol": 1e-4},
        ],
    })
}

fn p4_long_cfg() -> Value {
    json!({
        "problem_id": "power_p4",
        "solver_id": "prox_point",
        "x0": [1.0],
        "stop": {"step_tol": 1e-12, "max_iter": 10_000},
        "subproblem_tol": 1e-12,
        "checks": [
            {"id": "rate_fit", "window": [100, 10_000], "expected_loglog": -2.0, "loglog_tol": 0.2},
            {"id": "value_convergence"},
            {"id": "key_inequality"},
            {"id": "slope_descent"},
            {"id": "basic_descent"},
            {"id": "fixed_point", "step_tol": 1e-6, "slope_tol": 1e-4},
        ],
    })
}

fn p1_finite_cfg() -> Value {
    json!({
        "problem_id": "power_p1",
        "solver_id": "prox_point",
        "x0": [2.0],
        "stop": {"step_tol": 1e-12, "max_iter": 50},
        "subproblem_tol": 1e-12,
        "checks": [
            {"id": "slope_descent"},
            {"id": "basic_descent"},
        ],
    })
}

fn sharp_cfg() -> Value {
    json!({
        "problem_id": "composite_sharp",
        "solver_id": "prox_linear",
        "solver_params": {"mu": 20.0},
        "x0": [2.0],
        "stop": {"step_tol": 1e-10, "max_iter": 200},
        "subproblem_tol": 1e-16,
        "seed": 11,
        "record_envelope_slopes": true,
        "checks": [
            {"id": "majorization", "pairs": 2000},
            {"id": "majorization", "mu": 1.0, "pairs": 2000},
            {"id": "envelope_descent"},
            {"id": "fixed_point", "slope_tol": 1e-4},
        ],
    })
}

fn disk_cfg() -> Value {
    json!({
        "problem_id": "unit_disk_linear",
        "solver_id": "moving_balls",
        "stop": {"step_tol": 1e-9, "max_iter": 100},
        "subproblem_tol": 1e-16,
        "seed": 3,
        "record_envelope_slopes": true,
        "checks": [
            {"id": "feasibility"},
            {"id": "envelope_descent"},
            {"id": "criticality", "slope_tol": 1e-4},
            {"id": "fixed_point", "slope_tol": 1e-4},
        ],
    })
}

fn two_ball_cfg() -> Value {
    json!({
        "problem_id": "two_ball_linear",
        "solver_id": "moving_balls",
        "stop": {"step_tol": 1e-9, "max_iter": 400},
        "subproblem_tol": 1e-16,
        "seed": 5,
        "record_envelope_slopes": true,
        "checks": [
            {"id": "feasibility"},
            {"id": "envelope_descent"},
            {"id": "fixed_point", "slope_tol": 1e-4},
        ],
    })
}

#[test]
fn acceptance() {
    let mut gate = Gate::new();

    // Shared runs, executed once and reused across criteria.
    let (t_p1, r_p1, d_p1) = timed_run(power_cfg("power_p1", 0.0, 40, true));
    let (t_p15, r_p15, d_p15) = timed_run(power_cfg("power_p1.5", 1.0 / 3.0, 40, true));
    let (t_p2, r_p2, d_p2) = timed_run(p2_cfg());
    let (t_p4s, r_p4s, d_p4s) = timed_run(power_cfg("power_p4", 0.75, 8, false));
    let (t_p4l, r_p4l) = run(p4_long_cfg());
    let (t_p1f, r_p1f) = run(p1_finite_cfg());
    let (t_sharp, r_sharp) = run(sharp_cfg());
    let (t_disk, r_disk) = run(disk_cfg());
    let (t_two, r_two) = run(two_ball_cfg());

    // 1. KL exponent recovery at alpha = 1 from x0 = 1, each under a second.
    {
        let mut ok = true;
        let mut detail = String::new();
        for (name, rows, dur, expect) in [
            ("p1", &r_p1, d_p1, 0.0),
            ("p1.5", &r_p15, d_p15, 1.0 / 3.0),
            ("p2", &r_p2, d_p2, 0.5),
            ("p4", &r_p4s, d_p4s, 0.75),
        ] {
            let r = row(rows, "kl_fit");
            let theta = df(&r.details, &["fit", "theta"]);
            if !r.passed() || (theta - expect).abs() > 0.05 {
                ok = false;
                detail.push_str(&format!("{name}: theta {theta} vs {expect}; "));
            }
            if dur > Duration::from_secs(1) {
                ok = false;
                detail.push_str(&format!("{name}: took {dur:?}; "));
            }
        }
        gate.criterion(1, "KL exponent recovery for p in {1, 1.5, 2, 4} under 1 s each", ok, detail);
    }

    // 2. Rate regimes: linear ratio, sublinear log-log slope, superlinear
    //    ratios, finite termination.
    {
        let mut ok = true;
        let mut detail = String::new();

        let r = row(&r_p2, "rate_fit");
        let ratio = df(&r.details, &["fit", "ratio_limit"]);
        if !r.passed() || (ratio - 0.25).abs() > 1e-6 {
            ok = false;
            detail.push_str(&format!("p2 ratio {ratio}; "));
        }

        let r = row(&r_p4l, "rate_fit");
        let slope = df(&r.details, &["fit", "loglog_slope"]);
        if !r.passed() || (slope + 2.0).abs() > 0.2 {
            ok = false;
            detail.push_str(&format!("p4 loglog {slope}; "));
        }

        let gaps = t_p15.gaps.as_ref().unwrap();
        let ratios: Vec<f64> = gaps
            .windows(2)
            .filter(|w| w[0] > 0.0)
            .map(|w| w[1] / w[0])
            .collect();
        let last = ratios.last().copied().unwrap_or(1.0);
        let first = ratios.first().copied().unwrap_or(1.0);
        if !(last < 1e-3 && last < first / 100.0) {
            ok = false;
            detail.push_str(&format!("p1.5 ratios {first} -> {last}; "));
        }

        let want = [2.0, 1.5, 1.0, 0.5, 0.0];
        let got: Vec<f64> = t_p1f.iterates.iter().map(|x| x[0]).collect();
        if got != want {
            ok = false;
            detail.push_str(&format!("p1 from 2: {got:?}; "));
        }
        let got: Vec<f64> = t_p1.iterates.iter().map(|x| x[0]).collect();
        if got != [1.0, 0.5, 0.0] {
            ok = false;
            detail.push_str(&format!("p1 from 1: {got:?}; "));
        }

        // Linear regime is exact in binary arithmetic: gap_k = 4^-k.
        for (k, g) in t_p2.gaps.as_ref().unwrap().iter().enumerate() {
            if *g != 0.25f64.powi(k as i32) {
                ok = false;
                detail.push_str(&format!("p2 gap at {k}: {g}; "));
                break;
            }
        }
        gate.criterion(2, "four rate regimes behave as classified", ok, detail);
    }

    // 3. Gap decays faster than 1/k on the sublinear run.
    {
        let r = row(&r_p4l, "value_convergence");
        let head = df(&r.details, &["report", "k_tau_sup_head"]);
        let tail = df(&r.details, &["report", "k_tau_sup_tail"]);
        let ok = r.passed() && tail < 0.1 * head;
        gate.criterion(
            3,
            "tail sup of k*gap under 10% of head sup over 10^4 iterations",
            ok,
            format!("head {head}, tail {tail}"),
        );
    }

    // 4. Slope-descent conditions hold on every proximal-point trace.
    {
        let mut ok = true;
        let mut detail = String::new();
        for (name, rows) in [
            ("p1", &r_p1),
            ("p1.5", &r_p15),
            ("p2", &r_p2),
            ("p4s", &r_p4s),
            ("p4l", &r_p4l),
            ("p1_finite", &r_p1f),
        ] {
            for id in ["slope_descent", "basic_descent"] {
                let r = row(rows, id);
                if !r.passed() || r.worst_margin < -1e-8 {
                    ok = false;
                    detail.push_str(&format!("{name}/{id} margin {}; ", r.worst_margin));
                }
            }
        }
        gate.criterion(4, "slope and basic descent margins >= -1e-8 on prox traces", ok, detail);
    }

    // 5. Error-bound radii dominate the distance to x* = 0 and match the
    //    closed form 2.5 * 2^-k.
    {
        let r = row(&r_p2, "error_bound");
        let lambdas: Vec<f64> = r.details["series"]["lambdas"]
            .as_array()
            .unwrap()
            .iter()
            .map(|v| v.as_f64().unwrap())
            .collect();
        let mut ok = r.passed()
            && r.details["series"]["dominated"] == json!(true)
            && !lambdas.is_empty();
        let mut worst = 0.0_f64;
        for (i, l) in lambdas.iter().enumerate() {
            let k = (i + 1) as i32;
            let err = (l - 2.5 * 0.5_f64.powi(k)).abs();
            worst = worst.max(err);
            if err > 1e-9 {
                ok = false;
            }
        }
        gate.criterion(
            5,
            "lambda_k = 2.5 * 2^-k within 1e-9 and dominates d(x_k, 0)",
            ok,
            format!("worst lambda error {worst:.3e}, margin {}", r.worst_margin),
        );
    }

    // 6. Approximator constants for the three model families.
    {
        let cube = BoundingBox::cube(2, -2.0, 2.0).unwrap();
        let d2 = |x: &Vector, y: &Vector| x.sub(y).norm_sq();
        let g_d2 = approximator_gamma_fit(d2, &cube, 10_000, 42).unwrap().gamma_hat;

        let thresh = |x: &Vector, y: &Vector| (x.sub(y).norm() - 1.0).max(0.0);
        let g_th = approximator_gamma_fit(thresh, &cube, 10_000, 43).unwrap().gamma_hat;

        let reg = Registry::builtin();
        let nlp = reg.problem("unit_disk_linear").unwrap().nlp_problem().unwrap();
        let mm = MmProblem::moving_balls(nlp).unwrap();
        let h = |x: &Vector, y: &Vector| mm.model_value(x, y);
        let g_mb = approximator_gamma_fit(h, &cube, 10_000, 44).unwrap().gamma_hat;

        let ok = g_d2 <= 1.0 + 1e-9 && g_th <= 1.0 + 1e-9 && g_mb <= 1.5 + 1e-9;
        gate.criterion(
            6,
            "fitted gammas: d^2 <= 1, threshold(rho=1) <= 1, ball model <= 3L/2",
            ok,
            format!("d2 {g_d2}, threshold {g_th}, model {g_mb}"),
        );
    }

    // 7. Prox-linear on the sharp composite: analytic first step, fast
    //    convergence, majorization clean at mu=20 and violated at mu=1.
    {
        let mut ok = true;
        let mut detail = String::new();
        let first = t_sharp.iterates[1][0];
        if (first - 1.8).abs() > 1e-8 {
            ok = false;
            detail.push_str(&format!("first step {first}; "));
        }
        let final_value = *t_sharp.values.last().unwrap();
        if !(final_value < 1e-8 && t_sharp.len() <= 201) {
            ok = false;
            detail.push_str(&format!("final f {final_value} in {} iterates; ", t_sharp.len()));
        }
        let maj = rows_of(&r_sharp, "majorization");
        if !(maj.len() == 2 && maj[0].passed() && !maj[1].passed() && maj[1].worst_margin < 0.0) {
            ok = false;
            detail.push_str(&format!(
                "majorization rows: mu20 {:?} mu1 {:?}; ",
                maj.first().map(|r| r.passed()),
                maj.get(1).map(|r| (r.passed(), r.worst_margin)),
            ));
        }
        gate.criterion(7, "prox-linear: step to 1.8, convergence, mu floor exposed", ok, detail);
    }

    // 8. Moving balls on the disk: analytic iterates, feasibility, exact
    //    ball model.
    {
        let mut ok = true;
        let mut detail = String::new();
        let hits = [(-0.5, 1usize), (-1.0, 2usize)];
        for (want, k) in hits {
            let x = &t_disk.iterates[k];
            let err = (x[0] - want).abs().max(x[1].abs());
            if err > 1e-8 {
                ok = false;
                detail.push_str(&format!("iterate {k} off by {err:.2e}; "));
            }
        }
        let r = row(&r_disk, "feasibility");
        if !r.passed() {
            ok = false;
            detail.push_str(&format!("feasibility margin {}; ", r.worst_margin));
        }
        let reg = Registry::builtin();
        let nlp = reg.problem("unit_disk_linear").unwrap().nlp_problem().unwrap();
        for x in [vec![0.5, 0.0], vec![-0.5, 0.0], vec![-1.0, 0.0], vec![0.6, 0.8]] {
            let (_, balls) = moving_balls_model(&nlp, &Vector::new(x.clone())).unwrap();
            let c = &balls[0].center;
            let dev = c.norm().max((balls[0].radius - 1.0).abs());
            if dev > 1e-12 {
                ok = false;
                detail.push_str(&format!("model ball at {x:?} deviates {dev:.2e}; "));
            }
        }
        gate.criterion(8, "moving balls: exact iterates, feasible, model ball = disk", ok, detail);
    }

    // 9. Envelope descent reports on every MM run, with a stable fitted beta
    //    under tolerance halving.
    {
        let mut ok = true;
        let mut detail = String::new();
        let runs: [(&str, &Vec<ReportRow>, Value, f64); 7] = [
            ("p1", &r_p1, power_cfg("power_p1", 0.0, 40, true), 1e-12),
            ("p1.5", &r_p15, power_cfg("power_p1.5", 1.0 / 3.0, 40, true), 1e-12),
            ("p2", &r_p2, p2_cfg(), 1e-12),
            ("p4s", &r_p4s, power_cfg("power_p4", 0.75, 8, false), 1e-12),
            ("sharp", &r_sharp, sharp_cfg(), 1e-16),
            ("disk", &r_disk, disk_cfg(), 1e-16),
            ("two_ball", &r_two, two_ball_cfg(), 1e-16),
        ];
        for (name, rows, cfg, tol) in runs {
            let r = row(rows, "envelope_descent");
            let beta = df(&r.details, &["beta_fitted"]);
            if !r.passed() || r.worst_margin < -(1e-8 + tol) || !beta.is_finite() {
                ok = false;
                detail.push_str(&format!(
                    "{name}: margin {} beta {beta}; ",
                    r.worst_margin
                ));
                continue;
            }
            let (_, rows_half) = run(with_tol(cfg, tol / 2.0));
            let beta_half = df(&row(&rows_half, "envelope_descent").details, &["beta_fitted"]);
            let rel = (beta - beta_half).abs() / beta.abs().max(1e-9);
            if rel >= 0.05 {
                ok = false;
                detail.push_str(&format!("{name}: beta {beta} vs {beta_half}; "));
            }
        }
        gate.criterion(9, "envelope descent holds and fitted beta is stable", ok, detail);
    }

    // 10. Small certified slope at every final iterate.
    {
        let mut ok = true;
        let mut detail = String::new();
        for (name, rows) in [
            ("p1", &r_p1),
            ("p1.5", &r_p15),
            ("p2", &r_p2),
            ("p4l", &r_p4l),
            ("sharp", &r_sharp),
            ("disk", &r_disk),
            ("two_ball", &r_two),
        ] {
            let r = row(rows, "fixed_point");
            let slope = df(&r.details, &["slope"]);
            if !r.passed() || !(slope <= 1e-4) {
                ok = false;
                detail.push_str(&format!("{name}: slope {slope}; "));
            }
        }
        gate.criterion(10, "fixed-point slope check <= 1e-4 at final iterates", ok, detail);
    }

    // 11. Dykstra projection onto the two-ball lens.
    {
        let balls = vec![
            Ball { center: Vector::new(vec![0.0, 0.0]), radius: 1.0 },
            Ball { center: Vector::new(vec![1.5, 0.0]), radius: 1.0 },
        ];
        let p = dykstra_project(&balls, &Vector::new(vec![0.75, 2.0]), 1e-12).unwrap();
        let err = (p[0] - TWO_BALL_OPT[0]).abs().max((p[1] + TWO_BALL_OPT[1]).abs());
        gate.criterion(
            11,
            "projection of (0.75, 2) onto the lens hits the upper corner to 1e-6",
            err <= 1e-6,
            format!("got ({}, {}), err {err:.2e}", p[0], p[1]),
        );
    }

    // 12. Byte-identical reruns.
    {
        let mut ok = true;
        let mut detail = String::new();
        for (name, cfg) in [("p2", p2_cfg()), ("two_ball", two_ball_cfg())] {
            let (ta, ra) = run(cfg.clone());
            let (tb, rb) = run(cfg);
            let csv_same = ta.to_csv() == tb.to_csv();
            let rep_same = emit_report(&ra, ReportFormat::Json).unwrap()
                == emit_report(&rb, ReportFormat::Json).unwrap();
            if !(csv_same && rep_same) {
                ok = false;
                detail.push_str(&format!("{name}: csv {csv_same} report {rep_same}; "));
            }
        }
        gate.criterion(12, "identical configs produce byte-identical trace and report", ok, detail);
    }

    // Sanity on the long and short sublinear runs: both exhaust their budget
    // rather than reaching the step tolerance.
    assert!(t_p4s.meta.budget_exhausted && t_p4s.len() == 60);
    assert!(t_p4l.meta.budget_exhausted && t_p4l.len() == 10_000);

    // No stray failures: every row across all runs passes except the one
    // deliberately under-floored majorization probe on the sharp composite.
    for (name, rows) in [
        ("p1", &r_p1),
        ("p1.5", &r_p15),
        ("p2", &r_p2),
        ("p4s", &r_p4s),
        ("p4l", &r_p4l),
        ("p1_finite", &r_p1f),
        ("sharp", &r_sharp),
        ("disk", &r_disk),
        ("two_ball", &r_two),
    ] {
        let failed: Vec<&str> =
            rows.iter().filter(|r| !r.passed()).map(|r| r.check_id.as_str()).collect();
        if name == "sharp" {
            assert_eq!(failed, ["majorization"], "unexpected failures on {name}");
        } else {
            assert!(failed.is_empty(), "unexpected failures on {name}: {failed:?}");
        }
    }

    // Feasibility margins on the two-ball run back criterion 8's counterpart
    // for the second constrained problem; keep them visible on failure.
    assert!(row(&r_two, "feasibility").passed(), "two-ball feasibility");
    let last = t_two.iterates.last().unwrap();
    let corner_err =
        (last[0] - TWO_BALL_OPT[0]).abs().max((last[1] - TWO_BALL_OPT[1]).abs());
    assert!(corner_err < 1e-4, "two-ball limit off by {corner_err}");
    assert!(FEAS_TOL >= 1e-8);

    gate.finish();
}
