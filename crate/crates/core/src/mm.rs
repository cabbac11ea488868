//! Majorization-minimization: modeling functions over approximating regions,
//! the envelope F(x) = inf over D(x) of h_x, its iteration map, a sequence
//! runner, and the descent/majorization checks that certify a run.
//!
//! Strong convexity (mu > 0) is load-bearing throughout: without it the model
//! argmin can be empty (h_x(y) = (1 + |x - y|) e^y on the line decreases
//! forever), so no constructor here admits mu = 0 and the iteration map stays
//! single-valued.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::diag::{margin_tolerance, ConditionReport, MARGIN_TOL};
use crate::error::{Error, Result};
use crate::metric::{distance, interpolate, Ball, BoundingBox, Region, Vector};
use crate::objective::Objective;
use crate::slope::{
    descent_directions, extrapolate_ratios, slope_estimate, DEFAULT_SLOPE_RADII,
};
use crate::solvers::moving_balls::{moving_balls_model, NlpProblem};
use crate::solvers::pg::{pg_solve, SplitModel};
use crate::solvers::prox_linear::CompositeProblem;
use crate::trace::{SlopeSource, Trace, TraceMeta};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Largest value deficit below a declared infimum that still reads as zero
/// gap. Matches the feasibility slack granted to constrained iterates.
pub const GAP_SLACK: f64 = 1e-8;

/// Shape of the region D(x) a mapping assigns to an anchor point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionDescriptor {
    WholeSpace,
    BallIntersection(Vec<Ball>),
    /// The ball of this radius centered at the anchor itself.
    FixedRadiusBall { rho: f64 },
}

impl RegionDescriptor {
    pub fn resolve(&self, anchor: &Vector) -> Region {
        match self {
            RegionDescriptor::WholeSpace => Region::WholeSpace,
            RegionDescriptor::BallIntersection(balls) => Region::Balls(balls.clone()),
            RegionDescriptor::FixedRadiusBall { rho } => {
                Region::ball(Ball::new(anchor.clone(), *rho))
            }
        }
    }

    pub fn is_whole_space(&self) -> bool {
        matches!(self, RegionDescriptor::WholeSpace)
    }
}

pub type ModelFn = Arc<dyn Fn(&Vector, &Vector) -> f64 + Send + Sync>;
pub type MappingFn = Arc<dyn Fn(&Vector) -> Result<RegionDescriptor> + Send + Sync>;
pub type StepFn = Arc<dyn Fn(&Vector) -> Vector + Send + Sync>;
pub type SubproblemBuilder = Arc<dyn Fn(&Vector) -> Result<SplitModel> + Send + Sync>;

/// How the model argmin over D(x) is computed: a closed form, or a split
/// model (with its region attached) handed to the inner solver.
#[derive(Clone)]
pub enum Subproblem {
    Exact(StepFn),
    Split(SubproblemBuilder),
}

/// An objective f together with a model h(x, y) that majorizes f on D(x),
/// touches it at y = x, and is mu-strongly convex in y there.
#[derive(Clone)]
pub struct MmProblem {
    pub objective: Objective,
    model: ModelFn,
    mapping: MappingFn,
    subproblem: Subproblem,
    pub mu: f64,
    /// Approximator constant of the model, when known in closed form.
    pub gamma_h: Option<f64>,
    /// Approximator constant of the mapping's distance function; zero for
    /// whole-space mappings, fitted numerically otherwise.
    pub gamma_d: Option<f64>,
}

impl MmProblem {
    pub fn new(
        objective: Objective,
        model: impl Fn(&Vector, &Vector) -> f64 + Send + Sync + 'static,
        mapping: impl Fn(&Vector) -> Result<RegionDescriptor> + Send + Sync + 'static,
        subproblem: Subproblem,
        mu: f64,
    ) -> Result<Self> {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::invalid(format!("strong convexity {mu} must be positive")));
        }
        Ok(MmProblem {
            objective,
            model: Arc::new(model),
            mapping: Arc::new(mapping),
            subproblem,
            mu,
            gamma_h: None,
            gamma_d: None,
        })
    }

    pub fn with_gamma_h(mut self, gamma: f64) -> Self {
        self.gamma_h = Some(gamma);
        self
    }

    pub fn with_gamma_d(mut self, gamma: f64) -> Self {
        self.gamma_d = Some(gamma);
        self
    }

    pub fn with_known_inf(mut self, inf: f64) -> Self {
        self.objective = self.objective.with_known_inf(inf);
        self
    }

    /// Combined approximator constant of model plus mapping, when both parts
    /// are known.
    pub fn gamma_total(&self) -> Option<f64> {
        match (self.gamma_h, self.gamma_d) {
            (Some(h), Some(d)) => Some(h + d),
            _ => None,
        }
    }

    pub fn model_value(&self, x: &Vector, y: &Vector) -> f64 {
        (self.model)(x, y)
    }

    pub fn descriptor_at(&self, x: &Vector) -> Result<RegionDescriptor> {
        (self.mapping)(x)
    }

    pub fn region_at(&self, x: &Vector) -> Result<Region> {
        Ok(self.descriptor_at(x)?.resolve(x))
    }

    /// Proximal-point model h(x, y) = f(y) + alpha |y - x|^2 over the whole
    /// space. Needs a prox oracle, or a gradient plus modulus for the inner
    /// solver fallback (which assumes f convex).
    pub fn proximal_point(objective: Objective, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::invalid(format!("prox weight {alpha} must be positive")));
        }
        let f = objective.clone();
        let model = move |x: &Vector, y: &Vector| f.value(y) + alpha * y.sub(x).norm_sq();
        let subproblem = if objective.has_prox() {
            let o = objective.clone();
            Subproblem::Exact(Arc::new(move |x: &Vector| {
                o.prox(x, alpha).expect("prox oracle checked at construction")
            }))
        } else if objective.has_gradient() && objective.lipschitz_grad().is_some() {
            let o = objective.clone();
            let l = objective.lipschitz_grad().expect("modulus checked above");
            Subproblem::Split(Arc::new(move |x: &Vector| {
                let (ov, og) = (o.clone(), o.clone());
                let (av, ag) = (x.clone(), x.clone());
                Ok(SplitModel::new(
                    ov.dim(),
                    move |y: &Vector| ov.value(y) + alpha * y.sub(&av).norm_sq(),
                    move |y: &Vector| {
                        og.gradient(y)
                            .expect("gradient checked at construction")
                            .axpy(2.0 * alpha, &y.sub(&ag))
                    },
                    l + 2.0 * alpha,
                    2.0 * alpha,
                ))
            }))
        } else {
            return Err(Error::Unsupported(
                "proximal-point model needs a prox oracle or gradient with modulus".into(),
            ));
        };
        let mut p = MmProblem::new(
            objective,
            model,
            |_: &Vector| Ok(RegionDescriptor::WholeSpace),
            subproblem,
            2.0 * alpha,
        )?;
        // |h(x,y) - h(z,y)| = alpha |d(x,y)^2 - d(z,y)^2|, and the squared
        // distance is a 1-approximator.
        p.gamma_h = Some(alpha);
        p.gamma_d = Some(0.0);
        Ok(p)
    }

    /// Prox-linear model for q(G(x)): outer kept exactly on the linearized
    /// inner map, plus (mu/2) |y - x|^2, over the whole space.
    ///
    /// Sub-floor moduli (mu <= 2 L_q M) are accepted so that majorization
    /// checks can exhibit the failure; the subproblem stays strongly convex
    /// regardless.
    pub fn prox_linear(p: CompositeProblem) -> Result<Self> {
        let (pv, pm, ps) = (p.clone(), p.clone(), p.clone());
        let objective = Objective::new(p.dim(), move |x: &Vector| pv.value(x));
        let gamma_h = 1.5 * p.lipschitz_outer() * p.second_deriv_bound + 0.5 * p.mu;
        let mut out = MmProblem::new(
            objective,
            move |x: &Vector, y: &Vector| pm.model_value(x, y),
            |_: &Vector| Ok(RegionDescriptor::WholeSpace),
            Subproblem::Split(Arc::new(move |x: &Vector| ps.subproblem(x))),
            p.mu,
        )?;
        out.gamma_h = Some(gamma_h);
        out.gamma_d = Some(0.0);
        Ok(out)
    }

    /// Moving-balls model: the objective's quadratic upper model over the
    /// intersection of per-constraint balls. mu equals the objective modulus.
    pub fn moving_balls(p: NlpProblem) -> Result<Self> {
        let dim = p.dim();
        let l = p.objective.modulus;
        let known_inf = p.known_inf;
        let fo = p.objective.clone();
        let fg = p.objective.clone();
        let fm = p.objective.clone();
        let mut objective = Objective::new(dim, move |x: &Vector| fo.value(x))
            .with_gradient(move |x: &Vector| fg.gradient(x))
            .with_lipschitz_grad(l);
        if let Some(v) = known_inf {
            objective = objective.with_known_inf(v);
        }
        let model = move |x: &Vector, y: &Vector| {
            let d = y.sub(x);
            fm.value(x) + fm.gradient(x).dot(&d) + 0.5 * l * d.norm_sq()
        };
        let pmap = p.clone();
        let mapping = move |x: &Vector| {
            moving_balls_model(&pmap, x).map(|(_, balls)| RegionDescriptor::BallIntersection(balls))
        };
        let psub = p.clone();
        let build = move |x: &Vector| -> Result<SplitModel> {
            let (quad, balls) = moving_balls_model(&psub, x)?;
            let (qv, qg) = (quad.clone(), quad.clone());
            Ok(SplitModel::new(
                dim,
                move |y: &Vector| qv.value(y),
                move |y: &Vector| qg.gradient_at(y),
                quad.modulus,
                quad.modulus,
            )
            .with_region(Region::Balls(balls)))
        };
        let mut out =
            MmProblem::new(objective, model, mapping, Subproblem::Split(Arc::new(build)), l)?;
        out.gamma_h = Some(1.5 * l);
        Ok(out)
    }
}

/// Envelope data at one anchor: F(x), the model argmin p(x), and the
/// tolerance the subproblem was solved to.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnvelopeValue {
    pub value: f64,
    pub argmin: Vector,
    pub subproblem_tol: f64,
}

/// F(x) = inf over D(x) of h_x, solved to value gap tol. By quadratic growth
/// the argmin is within sqrt(2 tol / mu) of the true minimizer.
pub fn envelope(p: &MmProblem, x: &Vector, tol: f64) -> Result<EnvelopeValue> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::invalid(format!("tolerance {tol} must be positive")));
    }
    if x.dim() != p.objective.dim() {
        return Err(Error::DimensionMismatch { expected: p.objective.dim(), actual: x.dim() });
    }
    let argmin = match &p.subproblem {
        Subproblem::Exact(step) => step(x),
        Subproblem::Split(build) => pg_solve(&build(x)?, x, tol)?,
    };
    Ok(EnvelopeValue { value: p.model_value(x, &argmin), argmin, subproblem_tol: tol })
}

/// The iteration map p(x): the model argmin over D(x).
pub fn mm_step(p: &MmProblem, x: &Vector, tol: f64) -> Result<Vector> {
    envelope(p, x, tol).map(|e| e.argmin)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StopRule {
    pub step_tol: f64,
    pub max_iter: usize,
}

impl StopRule {
    pub fn new(step_tol: f64, max_iter: usize) -> Result<Self> {
        let s = StopRule { step_tol, max_iter };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step_tol > 0.0 && self.step_tol.is_finite()) {
            return Err(Error::invalid(format!("step tolerance {} must be positive", self.step_tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::invalid("iteration budget must be at least 1"));
        }
        Ok(())
    }
}

/// Sampling budget for envelope slope estimation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeBudget {
    pub directions: usize,
    pub radii: Vec<f64>,
}

impl Default for SlopeBudget {
    fn default() -> Self {
        SlopeBudget { directions: 16, radii: vec![1e-2, 1e-3] }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Estimate |grad F| at every iterate; each estimate costs
    /// directions x radii subproblem solves.
    pub record_envelope_slopes: bool,
    pub slope_budget: SlopeBudget,
}

/// Run the MM iteration from x0 until the step is shorter than
/// stop.step_tol; a small step certifies a small envelope slope. Hitting
/// max_iter flags the trace instead of failing.
pub fn run_mm(p: &MmProblem, x0: &Vector, stop: &StopRule, tol: f64) -> Result<Trace> {
    run_mm_with(p, x0, stop, tol, &RunOptions::default())
}

pub fn run_mm_with(
    p: &MmProblem,
    x0: &Vector,
    stop: &StopRule,
    tol: f64,
    opts: &RunOptions,
) -> Result<Trace> {
    stop.validate()?;
    let obj = &p.objective;
    if x0.dim() != obj.dim() {
        return Err(Error::DimensionMismatch { expected: obj.dim(), actual: x0.dim() });
    }
    let mut meta = TraceMeta { subproblem_tol: tol, ..TraceMeta::default() };
    let mut iterates = vec![x0.clone()];
    let mut values = vec![obj.value(x0)];
    let mut slopes = Vec::new();
    let mut step_dists = Vec::new();
    let mut envelope_values = Vec::new();
    let mut envelope_slopes = if opts.record_envelope_slopes { Some(Vec::new()) } else { None };
    let (s0, source) = iterate_slope(obj, x0)?;
    slopes.push(s0);
    meta.slope_source = source;
    loop {
        let x = iterates.last().expect("nonempty by construction").clone();
        let env = envelope(p, &x, tol)?;
        envelope_values.push(env.value);
        if let Some(es) = envelope_slopes.as_mut() {
            es.push(estimate_envelope_slope(p, &x, tol, &opts.slope_budget)?);
        }
        let d = distance(&x, &env.argmin)?;
        if d < stop.step_tol {
            break;
        }
        if iterates.len() >= stop.max_iter {
            meta.budget_exhausted = true;
            break;
        }
        step_dists.push(d);
        values.push(obj.value(&env.argmin));
        slopes.push(iterate_slope(obj, &env.argmin)?.0);
        iterates.push(env.argmin);
    }
    // Iterates of constrained subproblems are feasible only up to the inner
    // projection tolerance, so values may undershoot a declared infimum by a
    // sliver; clamp that sliver, let anything larger fail validation.
    let gaps = obj.known_inf().map(|inf| {
        values
            .iter()
            .map(|v| {
                let g = v - inf;
                if (-GAP_SLACK..0.0).contains(&g) {
                    0.0
                } else {
                    g
                }
            })
            .collect()
    });
    let trace = Trace {
        iterates,
        values,
        gaps,
        step_dists,
        slopes: Some(slopes),
        envelope_values: Some(envelope_values),
        envelope_slopes,
        meta,
    };
    trace.validate()?;
    Ok(trace)
}

fn iterate_slope(obj: &Objective, x: &Vector) -> Result<(f64, SlopeSource)> {
    if obj.has_gradient() {
        Ok((obj.gradient(x)?.norm(), SlopeSource::GradientNorm))
    } else {
        let dirs = (2 * obj.dim()).max(8);
        Ok((slope_estimate(obj, x, &DEFAULT_SLOPE_RADII, dirs)?, SlopeSource::Sampled))
    }
}

/// Sampled slope of the envelope at x: best descent ratio of F over sampled
/// directions, extrapolated to radius zero. Samples whose region is
/// undefined (e.g. infeasible anchors) are skipped.
pub fn estimate_envelope_slope(
    p: &MmProblem,
    x: &Vector,
    tol: f64,
    budget: &SlopeBudget,
) -> Result<f64> {
    if budget.radii.is_empty()
        || budget.radii.iter().any(|&r| !(r > 0.0))
        || budget.radii.windows(2).any(|w| w[1] >= w[0])
    {
        return Err(Error::invalid("slope budget radii must be positive and strictly decreasing"));
    }
    let dirs = descent_directions(x.dim(), budget.directions.max(2 * x.dim()));
    let f0 = envelope(p, x, tol)?.value;
    let mut ratios = Vec::with_capacity(budget.radii.len());
    for &r in &budget.radii {
        let mut best = f64::NEG_INFINITY;
        for u in &dirs {
            let y = x.axpy(r, u);
            if let Ok(env) = envelope(p, &y, tol) {
                best = best.max((f0 - env.value) / r);
            }
        }
        if best == f64::NEG_INFINITY {
            return Err(Error::InsufficientData(format!(
                "no envelope sample admissible at radius {r}"
            )));
        }
        ratios.push(best);
    }
    Ok(extrapolate_ratios(&budget.radii, &ratios))
}

/// Envelope descent and near-criticality along a run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnvelopeDescentReport {
    pub descent: ConditionReport,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub near_critical: Option<ConditionReport>,
    /// Minimal beta consistent with the trace (needs recorded envelope slopes).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub beta_fitted: Option<f64>,
    /// The existence-grade bound 2 gamma (gamma + 1), for comparison only.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub beta_gamma_bound: Option<f64>,
}

/// Check F(x_{k-1}) - F(x_k) >= (mu/2) d(x_k, x_{k+1})^2 along the trace, and
/// |grad F|(x_k) <= beta d(x_k, x_{k+1}) when envelope slopes were recorded.
/// Without a supplied beta the minimal feasible one is fitted and used.
pub fn check_envelope_descent(
    t: &Trace,
    mu: f64,
    beta: Option<f64>,
    gamma: Option<f64>,
) -> Result<EnvelopeDescentReport> {
    t.validate()?;
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::invalid(format!("modulus {mu} must be positive")));
    }
    let env = t
        .envelope_values
        .as_ref()
        .ok_or_else(|| Error::invalid("envelope descent check needs envelope values"))?;
    let n = t.len();
    if n < 3 {
        return Err(Error::InsufficientData(format!(
            "envelope descent needs at least 3 iterates, got {n}"
        )));
    }
    let tol = margin_tolerance(t);
    let margins: Vec<(usize, f64)> = (1..n - 1)
        .map(|k| {
            let d_next = t.step_dists[k];
            (k, env[k - 1] - env[k] - 0.5 * mu * d_next * d_next)
        })
        .collect();
    let descent = ConditionReport::from_margins("envelope_descent", &margins, n - 2, tol, None);
    let mut near_critical = None;
    let mut beta_fitted = None;
    if let Some(es) = t.envelope_slopes.as_ref() {
        let fitted = (0..n - 1).map(|k| es[k] / t.step_dists[k]).fold(0.0_f64, f64::max);
        beta_fitted = Some(fitted);
        let b = beta.unwrap_or(fitted);
        let margins: Vec<(usize, f64)> =
            (0..n - 1).map(|k| (k, b * t.step_dists[k] - es[k])).collect();
        near_critical = Some(ConditionReport::from_margins("near_critical", &margins, n - 1, tol, None));
    }
    Ok(EnvelopeDescentReport {
        descent,
        near_critical,
        beta_fitted,
        beta_gamma_bound: gamma.map(|g| 2.0 * g * (g + 1.0)),
    })
}

/// Sample anchor/point pairs from the box, project the points into D(x), and
/// check the three model axioms: domination h(x,y) >= f(y) on D(x), equality
/// at y = x, and mu-strong convexity via the midpoint inequality
/// g((a+b)/2) <= g(a)/2 + g(b)/2 - (mu/8) d(a,b)^2.
///
/// Anchors whose region is undefined are skipped; violating sample indices
/// are reported as steps.
pub fn check_majorization(
    p: &MmProblem,
    region: &BoundingBox,
    pairs: usize,
    seed: u64,
) -> Result<ConditionReport> {
    if pairs == 0 {
        return Err(Error::invalid("need at least one sampled pair"));
    }
    if region.dim() != p.objective.dim() {
        return Err(Error::DimensionMismatch { expected: p.objective.dim(), actual: region.dim() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut margins = Vec::with_capacity(3 * pairs);
    let mut checked = 0;
    for i in 0..pairs {
        let x = region.sample(&mut rng);
        let a_raw = region.sample(&mut rng);
        let b_raw = region.sample(&mut rng);
        let reg = match p.region_at(&x) {
            Ok(r) => r,
            Err(_) => continue,
        };
        let a = reg.project(&a_raw, 1e-10)?;
        let b = reg.project(&b_raw, 1e-10)?;
        let fx = p.objective.value(&x);
        margins.push((i, p.model_value(&x, &a) - p.objective.value(&a)));
        margins.push((i, -(p.model_value(&x, &x) - fx).abs()));
        let mid = interpolate(&a, &b, 0.5)?;
        let dab = distance(&a, &b)?;
        let midpoint = 0.5 * p.model_value(&x, &a) + 0.5 * p.model_value(&x, &b)
            - p.model_value(&x, &mid)
            - 0.125 * p.mu * dab * dab;
        margins.push((i, midpoint));
        checked += 1;
    }
    if checked == 0 {
        return Err(Error::InsufficientData(
            "no sampled anchor admitted a region; shrink the sampling box".into(),
        ));
    }
    Ok(ConditionReport::from_margins("majorization", &margins, checked, MARGIN_TOL, None))
}

/// Slope of the objective at a fixed point of the iteration map. For
/// whole-space mappings this is the plain (gradient or sampled) slope of f;
/// for constrained mappings the envelope slope, which respects feasibility.
///
/// Precondition: d(x, p(x)) <= tol, with the step solved tightly enough that
/// the argmin error is below tol/2.
pub fn fixed_point_slope_check(p: &MmProblem, x: &Vector, tol: f64) -> Result<f64> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::invalid(format!("tolerance {tol} must be positive")));
    }
    let inner = (0.125 * p.mu * tol * tol).min(1e-10);
    let step = mm_step(p, x, inner)?;
    let d = distance(x, &step)?;
    if d > tol {
        return Err(Error::Precondition(format!(
            "not a fixed point: step length {d:.3e} exceeds {tol:.3e}"
        )));
    }
    if p.descriptor_at(x)?.is_whole_space() {
        if p.objective.has_gradient() {
            Ok(p.objective.gradient(x)?.norm())
        } else {
            let dirs = (2 * x.dim()).max(8);
            slope_estimate(&p.objective, x, &DEFAULT_SLOPE_RADII, dirs)
        }
    } else {
        estimate_envelope_slope(p, x, inner.max(1e-14), &SlopeBudget::default())
    }
}
