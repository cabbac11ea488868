//! Built-in benchmark problems and the registry the CLI dispatches on.
//!
//! A problem definition carries up to three facets: a plain objective for
//! proximal-point runs, a composite factory (parameterized by the proximal
//! modulus) for prox-linear runs, and a smooth NLP for moving-balls runs.
//! A solver is compatible with a problem exactly when the matching facet is
//! present.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::Serialize;

use slopebench_core::solvers::{
    power_prox, CompositeProblem, InnerMap, NlpProblem, OuterKind, SmoothFn,
};
use slopebench_core::{Error, Objective, Result, Vector};

type ObjectiveFactory = Arc<dyn Fn() -> Objective + Send + Sync>;
type CompositeFactory = Arc<dyn Fn(f64) -> Result<CompositeProblem> + Send + Sync>;
type NlpFactory = Arc<dyn Fn() -> Result<NlpProblem> + Send + Sync>;

#[derive(Clone)]
pub struct ProblemDef {
    id: String,
    summary: String,
    dim: usize,
    default_x0: Vec<f64>,
    minimizer: Option<Vec<f64>>,
    known_inf: Option<f64>,
    default_mu: Option<f64>,
    objective: Option<ObjectiveFactory>,
    composite: Option<CompositeFactory>,
    nlp: Option<NlpFactory>,
}

impl ProblemDef {
    pub fn unconstrained(
        id: &str,
        summary: &str,
        default_x0: Vec<f64>,
        factory: impl Fn() -> Objective + Send + Sync + 'static,
    ) -> Self {
        let dim = default_x0.len();
        ProblemDef {
            id: id.into(),
            summary: summary.into(),
            dim,
            default_x0,
            minimizer: None,
            known_inf: None,
            default_mu: None,
            objective: Some(Arc::new(factory)),
            composite: None,
            nlp: None,
        }
    }

    pub fn composite(
        id: &str,
        summary: &str,
        default_x0: Vec<f64>,
        default_mu: f64,
        factory: impl Fn(f64) -> Result<CompositeProblem> + Send + Sync + 'static,
    ) -> Self {
        let dim = default_x0.len();
        ProblemDef {
            id: id.into(),
            summary: summary.into(),
            dim,
            default_x0,
            minimizer: None,
            known_inf: None,
            default_mu: Some(default_mu),
            objective: None,
            composite: Some(Arc::new(factory)),
            nlp: None,
        }
    }

    pub fn constrained(
        id: &str,
        summary: &str,
        default_x0: Vec<f64>,
        factory: impl Fn() -> Result<NlpProblem> + Send + Sync + 'static,
    ) -> Self {
        let dim = default_x0.len();
        ProblemDef {
            id: id.into(),
            summary: summary.into(),
            dim,
            default_x0,
            minimizer: None,
            known_inf: None,
            default_mu: None,
            objective: None,
            composite: None,
            nlp: Some(Arc::new(factory)),
        }
    }

    pub fn with_minimizer(mut self, xs: Vec<f64>) -> Self {
        assert_eq!(xs.len(), self.dim, "minimizer dimension mismatch");
        self.minimizer = Some(xs);
        self
    }

    pub fn with_known_inf(mut self, inf: f64) -> Self {
        self.known_inf = Some(inf);
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn summary(&self) -> &str {
        &self.summary
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn default_x0(&self) -> &[f64] {
        &self.default_x0
    }

    pub fn minimizer(&self) -> Option<&[f64]> {
        self.minimizer.as_deref()
    }

    pub fn default_mu(&self) -> Option<f64> {
        self.default_mu
    }

    pub fn known_inf(&self) -> Option<f64> {
        self.known_inf
    }

    pub fn supports(&self, solver_id: &str) -> bool {
        match solver_id {
            "prox_point" => self.objective.is_some(),
            "prox_linear" => self.composite.is_some(),
            "moving_balls" => self.nlp.is_some(),
            _ => false,
        }
    }

    pub fn objective(&self) -> Result<Objective> {
        match &self.objective {
            Some(f) => Ok(f()),
            None => Err(Error::invalid(format!(
                "problem '{}' has no unconstrained objective facet",
                self.id
            ))),
        }
    }

    pub fn composite_problem(&self, mu: f64) -> Result<CompositeProblem> {
        match &self.composite {
            Some(f) => f(mu),
            None => Err(Error::invalid(format!("problem '{}' has no composite facet", self.id))),
        }
    }

    pub fn nlp_problem(&self) -> Result<NlpProblem> {
        match &self.nlp {
            Some(f) => f(),
            None => {
                Err(Error::invalid(format!("problem '{}' has no constrained facet", self.id)))
            }
        }
    }
}

fn power_value(p: f64, x: f64) -> f64 {
    // Exact in the common cases so dyadic iterate sequences stay exact.
    if p == 1.0 {
        x.abs()
    } else if p == 2.0 {
        x * x
    } else if p == 4.0 {
        let s = x * x;
        s * s
    } else {
        x.abs().powf(p)
    }
}

fn power_grad(p: f64, x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    if p == 2.0 {
        2.0 * x
    } else if p == 4.0 {
        4.0 * x * x * x
    } else {
        p * x.abs().powf(p - 1.0) * x.signum()
    }
}

/// f(x) = |x|^p on the line, with an exact proximal oracle. The gradient is
/// attached only for p > 1, and a global curvature constant only for p = 2;
/// other exponents have no uniform one.
fn power_objective(p: f64) -> Objective {
    let mut o = Objective::new(1, move |x: &Vector| power_value(p, x[0]))
        .with_prox(move |v: &Vector, w: f64| {
            let y = power_prox(p, w, v[0]).expect("positive weight and p >= 1");
            Vector::scalar(y)
        })
        .with_known_inf(0.0);
    if p > 1.0 {
        o = o.with_gradient(move |x: &Vector| Vector::scalar(power_grad(p, x[0])));
    }
    if p == 2.0 {
        o = o.with_lipschitz_grad(2.0);
    }
    o
}

fn power_problem(id: &str, p: f64) -> ProblemDef {
    let summary = format!("min |x|^p on the line, p = {p}, exact prox oracle");
    ProblemDef::unconstrained(id, &summary, vec![1.0], move || power_objective(p))
        .with_minimizer(vec![0.0])
}

fn composite_sharp() -> ProblemDef {
    ProblemDef::composite(
        "composite_sharp",
        "min |x^2 - 1| as abs composed with x -> x^2 - 1",
        vec![2.0],
        20.0,
        |mu| {
            let inner = InnerMap::new(
                1,
                1,
                |x: &Vector| vec![x[0] * x[0] - 1.0],
                |x: &Vector| vec![Vector::scalar(2.0 * x[0])],
            );
            CompositeProblem::new(OuterKind::Abs, inner, 2.0, mu)
        },
    )
    .with_minimizer(vec![1.0])
    .with_known_inf(0.0)
}

fn unit_disk_linear() -> ProblemDef {
    ProblemDef::constrained(
        "unit_disk_linear",
        "min y1 over the unit disk; quadratic constraint, exact ball model",
        vec![0.5, 0.0],
        || {
            let objective = SmoothFn::new(
                2,
                |y: &Vector| y[0],
                |_: &Vector| Vector::new(vec![1.0, 0.0]),
                1.0,
            )?;
            let disk = SmoothFn::new(
                2,
                |y: &Vector| y.norm_sq() - 1.0,
                |y: &Vector| y.scale(2.0),
                2.0,
            )?;
            Ok(NlpProblem::new(objective, vec![disk])?.with_known_inf(-1.0))
        },
    )
    .with_minimizer(vec![-1.0, 0.0])
}

/// Lowest point of the lens of two unit disks centered at 0 and (1.5, 0).
pub const TWO_BALL_OPT: [f64; 2] = [0.75, -0.6614378277661477];

fn two_ball_linear() -> ProblemDef {
    ProblemDef::constrained(
        "two_ball_linear",
        "min y2 over the lens of two unit disks centered at (0,0) and (1.5,0)",
        vec![0.75, 0.5],
        || {
            let objective = SmoothFn::new(
                2,
                |y: &Vector| y[1],
                |_: &Vector| Vector::new(vec![0.0, 1.0]),
                1.0,
            )?;
            let near = SmoothFn::new(
                2,
                |y: &Vector| y.norm_sq() - 1.0,
                |y: &Vector| y.scale(2.0),
                2.0,
            )?;
            let far = SmoothFn::new(
                2,
                |y: &Vector| {
                    let dx = y[0] - 1.5;
                    dx * dx + y[1] * y[1] - 1.0
                },
                |y: &Vector| Vector::new(vec![2.0 * (y[0] - 1.5), 2.0 * y[1]]),
                2.0,
            )?;
            Ok(NlpProblem::new(objective, vec![near, far])?.with_known_inf(TWO_BALL_OPT[1]))
        },
    )
    .with_minimizer(TWO_BALL_OPT.to_vec())
}

pub const SOLVER_IDS: [(&str, &str); 3] = [
    ("moving_balls", "feasible MM with per-constraint ball models (needs a constrained facet)"),
    ("prox_linear", "MM for outer-composed maps via linearization (needs a composite facet)"),
    ("prox_point", "proximal point iteration (needs an unconstrained objective facet)"),
];

/// Check ids accepted in config files, sorted.
pub const CHECK_IDS: [&str; 12] = [
    "basic_descent",
    "criticality",
    "envelope_descent",
    "error_bound",
    "feasibility",
    "fixed_point",
    "key_inequality",
    "kl_fit",
    "majorization",
    "rate_fit",
    "slope_descent",
    "value_convergence",
];

pub struct Registry {
    problems: BTreeMap<String, ProblemDef>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ListEntry {
    pub id: String,
    pub summary: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Listing {
    pub problems: Vec<ListEntry>,
    pub solvers: Vec<ListEntry>,
    pub checks: Vec<String>,
}

impl Registry {
    pub fn builtin() -> Self {
        let mut r = Registry { problems: BTreeMap::new() };
        for def in [
            power_problem("power_p1", 1.0),
            power_problem("power_p1.5", 1.5),
            power_problem("power_p2", 2.0),
            power_problem("power_p4", 4.0),
            composite_sharp(),
            unit_disk_linear(),
            two_ball_linear(),
        ] {
            r.register_problem(def).expect("built-in ids are distinct");
        }
        r
    }

    pub fn register_problem(&mut self, def: ProblemDef) -> Result<()> {
        if def.id.is_empty() {
            return Err(Error::invalid("problem id must be nonempty"));
        }
        if self.problems.contains_key(&def.id) {
            return Err(Error::invalid(format!("problem id '{}' already registered", def.id)));
        }
        self.problems.insert(def.id.clone(), def);
        Ok(())
    }

    pub fn problem(&self, id: &str) -> Result<&ProblemDef> {
        self.problems.get(id).ok_or_else(|| {
            let known: Vec<&str> = self.problems.keys().map(String::as_str).collect();
            Error::invalid(format!("unknown problem '{id}'; known: {}", known.join(", ")))
        })
    }

    pub fn solver_known(&self, id: &str) -> Result<()> {
        if SOLVER_IDS.iter().any(|(s, _)| *s == id) {
            Ok(())
        } else {
            let known: Vec<&str> = SOLVER_IDS.iter().map(|(s, _)| *s).collect();
            Err(Error::invalid(format!("unknown solver '{id}'; known: {}", known.join(", "))))
        }
    }

    /// Sorted catalog of problems, solvers, and checks.
    pub fn listing(&self) -> Listing {
        Listing {
            problems: self
                .problems
                .values()
                .map(|d| ListEntry { id: d.id.clone(), summary: d.summary.clone() })
                .collect(),
            solvers: SOLVER_IDS
                .iter()
                .map(|(id, summary)| ListEntry { id: (*id).into(), summary: (*summary).into() })
                .collect(),
            checks: CHECK_IDS.iter().map(|s| (*s).into()).collect(),
        }
    }
}
