//! Moving-balls steps for smooth objectives under smooth inequality
//! constraints: minimize a quadratic objective model over the intersection of
//! per-constraint balls cut out by quadratic upper bounds.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::metric::{Ball, Region, Vector};
use crate::solvers::pg::{pg_solve, SplitModel};

/// Feasibility slack: constraint values up to this count as satisfied.
pub const FEAS_TOL: f64 = 1e-8;

/// Smooth scalar function with gradient oracle and curvature modulus.
#[derive(Clone)]
pub struct SmoothFn {
    dim: usize,
    value: Arc<dyn Fn(&Vector) -> f64 + Send + Sync>,
    grad: Arc<dyn Fn(&Vector) -> Vector + Send + Sync>,
    /// Gradient Lipschitz modulus (any upper bound works).
    pub modulus: f64,
}

impl SmoothFn {
    pub fn new(
        dim: usize,
        value: impl Fn(&Vector) -> f64 + Send + Sync + 'static,
        grad: impl Fn(&Vector) -> Vector + Send + Sync + 'static,
        modulus: f64,
    ) -> Result<Self> {
        if !(modulus > 0.0 && modulus.is_finite()) {
            return Err(Error::invalid(format!("curvature modulus {modulus} must be positive")));
        }
        Ok(SmoothFn { dim, value: Arc::new(value), grad: Arc::new(grad), modulus })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn value(&self, x: &Vector) -> f64 {
        (self.value)(x)
    }

    pub fn gradient(&self, x: &Vector) -> Vector {
        (self.grad)(x)
    }
}

/// min f(x) subject to f_i(x) <= 0 for each constraint.
#[derive(Clone)]
pub struct NlpProblem {
    pub objective: SmoothFn,
    pub constraints: Vec<SmoothFn>,
    pub known_inf: Option<f64>,
}

impl NlpProblem {
    pub fn new(objective: SmoothFn, constraints: Vec<SmoothFn>) -> Result<Self> {
        let dim = objective.dim();
        if constraints.iter().any(|c| c.dim() != dim) {
            return Err(Error::invalid("constraints must share the objective's dimension"));
        }
        Ok(NlpProblem { objective, constraints, known_inf: None })
    }

    pub fn with_known_inf(mut self, inf: f64) -> Self {
        self.known_inf = Some(inf);
        self
    }

    pub fn dim(&self) -> usize {
        self.objective.dim()
    }

    /// max_i f_i(x); nonpositive means feasible. No constraints: -inf.
    pub fn feasibility_margin(&self, x: &Vector) -> f64 {
        self.constraints.iter().map(|c| c.value(x)).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Quadratic model of a smooth function anchored at a point:
/// value + <gradient, y - anchor> + (modulus/2) |y - anchor|^2.
#[derive(Clone, Debug)]
pub struct QuadModel {
    pub base: f64,
    pub gradient: Vector,
    pub anchor: Vector,
    pub modulus: f64,
}

impl QuadModel {
    pub fn value(&self, y: &Vector) -> f64 {
        let d = y.sub(&self.anchor);
        self.base + self.gradient.dot(&d) + 0.5 * self.modulus * d.norm_sq()
    }

    pub fn gradient_at(&self, y: &Vector) -> Vector {
        self.gradient.axpy(self.modulus, &y.sub(&self.anchor))
    }
}

/// The step's model at a feasible x: the objective's quadratic model plus one
/// ball per constraint.
///
/// The ball for constraint i is the sublevel set of i's quadratic upper
/// bound: center x - grad_i/L_i, squared radius |grad_i|²/L_i² - 2 f_i(x)/L_i
/// (clamped at zero). Feasible x lies in every ball, so the intersection is
/// nonempty, and any point of it satisfies the true constraints.
pub fn moving_balls_model(p: &NlpProblem, x: &Vector) -> Result<(QuadModel, Vec<Ball>)> {
    if x.dim() != p.dim() {
        return Err(Error::DimensionMismatch { expected: p.dim(), actual: x.dim() });
    }
    let margin = p.feasibility_margin(x);
    if margin > FEAS_TOL {
        return Err(Error::Precondition(format!(
            "moving-balls base point violates a constraint by {margin:.3e}"
        )));
    }
    let model = QuadModel {
        base: p.objective.value(x),
        gradient: p.objective.gradient(x),
        anchor: x.clone(),
        modulus: p.objective.modulus,
    };
    let balls = p
        .constraints
        .iter()
        .map(|c| {
            let g = c.gradient(x);
            let li = c.modulus;
            let center = x.axpy(-1.0 / li, &g);
            let radius_sq = g.norm_sq() / (li * li) - 2.0 * c.value(x) / li;
            Ball::new(center, radius_sq.max(0.0).sqrt())
        })
        .collect();
    Ok((model, balls))
}

/// One moving-balls step from feasible x, to model-value gap tol. The result
/// is feasible for the true constraints up to `FEAS_TOL`.
pub fn moving_balls_step(p: &NlpProblem, x: &Vector, tol: f64) -> Result<Vector> {
    let (model, balls) = moving_balls_model(p, x)?;
    let value_model = model.clone();
    let grad_model = model.clone();
    let split = SplitModel::new(
        p.dim(),
        move |y: &Vector| value_model.value(y),
        move |y: &Vector| grad_model.gradient_at(y),
        model.modulus,
        model.modulus,
    )
    .with_region(Region::Balls(balls));
    let y = pg_solve(&split, x, tol).map_err(|e| match e {
        Error::ConvergenceFailure { context, .. } if context.contains("dykstra") => {
            Error::InfeasibleModel(
                "ball-intersection projection stalled; the model region may be empty".into(),
            )
        }
        other => other,
    })?;
    let out_margin = p.feasibility_margin(&y);
    if out_margin > FEAS_TOL {
        return Err(Error::Contract(format!(
            "moving-balls step left the feasible set by {out_margin:.3e}"
        )));
    }
    Ok(y)
}
