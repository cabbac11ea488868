//! Inner solver: fixed-step proximal/projected gradient on strongly convex
//! split models. Every outer method in this crate funnels its subproblems here.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::metric::{Region, Vector};
use crate::solvers::prox::OuterKind;

pub const PG_MAX_ITERS: usize = 10_000;

/// Tolerance for the internal region projections; well below every stopping
/// tolerance the outer methods request.
const PROJECTION_TOL: f64 = 1e-12;

pub type PointFn = Arc<dyn Fn(&Vector) -> f64 + Send + Sync>;
pub type VectorFn = Arc<dyn Fn(&Vector) -> Vector + Send + Sync>;

/// A catalog outer composed with an affine map: y -> weight * q(A y + c).
///
/// The proximal map is exact only when A has pairwise orthogonal rows of
/// equal norm (A Aᵀ = a² I); the constructor enforces that, so holding a
/// `ProxPart` is proof the formula below applies.
#[derive(Clone)]
pub struct ProxPart {
    outer: OuterKind,
    weight: f64,
    rows: Vec<Vector>,
    offset: Vec<f64>,
    row_norm_sq: f64,
}

impl ProxPart {
    pub fn new(outer: OuterKind, weight: f64, rows: Vec<Vector>, offset: Vec<f64>) -> Result<Self> {
        if !(weight >= 0.0 && weight.is_finite()) {
            return Err(Error::invalid(format!("outer weight {weight} must be nonnegative")));
        }
        let m = rows.len();
        if m == 0 {
            return Err(Error::invalid("affine outer needs at least one row"));
        }
        if offset.len() != m {
            return Err(Error::DimensionMismatch { expected: m, actual: offset.len() });
        }
        let n = rows[0].dim();
        if rows.iter().any(|r| r.dim() != n) {
            return Err(Error::invalid("affine rows must share one dimension"));
        }
        if outer == OuterKind::Abs && m != 1 {
            return Err(Error::invalid("abs composes with a single affine row"));
        }
        let row_norm_sq = rows[0].norm_sq();
        let tol = 1e-9 * (1.0 + row_norm_sq);
        for i in 0..m {
            for j in i..m {
                let want = if i == j { row_norm_sq } else { 0.0 };
                let got = rows[i].dot(&rows[j]);
                if (got - want).abs() > tol {
                    return Err(Error::invalid(
                        "affine rows must be pairwise orthogonal with equal norms",
                    ));
                }
            }
        }
        Ok(ProxPart { outer, weight, rows, offset, row_norm_sq })
    }

    /// weight * q on the raw coordinates (A = I, c = 0).
    pub fn identity(outer: OuterKind, weight: f64, dim: usize) -> Result<Self> {
        let rows = (0..dim)
            .map(|i| {
                let mut e = vec![0.0; dim];
                e[i] = 1.0;
                Vector::new(e)
            })
            .collect();
        ProxPart::new(outer, weight, rows, vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.rows[0].dim()
    }

    pub fn outer(&self) -> OuterKind {
        self.outer
    }

    fn apply(&self, y: &Vector) -> Vec<f64> {
        self.rows.iter().zip(&self.offset).map(|(row, c)| row.dot(y) + c).collect()
    }

    pub fn value(&self, y: &Vector) -> f64 {
        self.weight * self.outer.value(&self.apply(y))
    }

    /// prox_{t * value}(v). With u0 = A v + c and a² the common row norm, the
    /// composition reduces to one catalog prox at parameter a² t w:
    /// v + (1/a²) Aᵀ (prox_{a² t w q}(u0) - u0). A zero map leaves v fixed.
    pub fn prox(&self, v: &Vector, t: f64) -> Vector {
        if self.row_norm_sq == 0.0 || self.weight == 0.0 || t == 0.0 {
            return v.clone();
        }
        let u0 = self.apply(v);
        let shifted = self.outer.prox(&u0, self.row_norm_sq * t * self.weight);
        let mut y = v.clone();
        for (row, (s, u)) in self.rows.iter().zip(shifted.iter().zip(&u0)) {
            y = y.axpy((s - u) / self.row_norm_sq, row);
        }
        y
    }
}

/// Strongly convex model split as smooth + (at most one) nonsmooth part,
/// the latter either a `ProxPart` or a ball region.
#[derive(Clone)]
pub struct SplitModel {
    dim: usize,
    smooth_value: PointFn,
    smooth_grad: VectorFn,
    /// Gradient Lipschitz modulus of the smooth part.
    pub smooth_modulus: f64,
    pub prox_part: Option<ProxPart>,
    pub region: Region,
    /// Strong convexity modulus of the whole model over the region.
    pub mu: f64,
}

impl SplitModel {
    pub fn new(
        dim: usize,
        value: impl Fn(&Vector) -> f64 + Send + Sync + 'static,
        grad: impl Fn(&Vector) -> Vector + Send + Sync + 'static,
        modulus: f64,
        mu: f64,
    ) -> Self {
        SplitModel {
            dim,
            smooth_value: Arc::new(value),
            smooth_grad: Arc::new(grad),
            smooth_modulus: modulus,
            prox_part: None,
            region: Region::WholeSpace,
            mu,
        }
    }

    pub fn with_prox_part(mut self, part: ProxPart) -> Self {
        self.prox_part = Some(part);
        self
    }

    pub fn with_region(mut self, region: Region) -> Self {
        self.region = region;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Model value excluding the region indicator.
    pub fn value(&self, y: &Vector) -> f64 {
        let smooth = (self.smooth_value)(y);
        match &self.prox_part {
            Some(p) => smooth + p.value(y),
            None => smooth,
        }
    }

    pub fn smooth_gradient(&self, y: &Vector) -> Vector {
        (self.smooth_grad)(y)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.smooth_modulus > 0.0 && self.smooth_modulus.is_finite()) {
            return Err(Error::invalid(format!(
                "smooth modulus {} must be positive",
                self.smooth_modulus
            )));
        }
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::invalid(format!("strong convexity {} must be positive", self.mu)));
        }
        if let Some(p) = &self.prox_part {
            if p.dim() != self.dim {
                return Err(Error::DimensionMismatch { expected: self.dim, actual: p.dim() });
            }
            if self.region.is_constrained() {
                return Err(Error::invalid("split models take one nonsmooth part, not both"));
            }
        }
        Ok(())
    }
}

/// Minimize a split model over its region, starting from y0 (projected in if
/// necessary), down to a model-value gap of at most tol.
///
/// Fixed step 1/L. Stopping: with gradient mapping G = L (y - y_next), the
/// optimality system gives dist(0, ∂model(y_next)) <= 2|G|, and mu-strong
/// convexity turns that into value gap <= 2|G|²/mu; we stop at
/// 4|G|²/mu <= tol, keeping a factor-two margin.
pub fn pg_solve(model: &SplitModel, y0: &Vector, tol: f64) -> Result<Vector> {
    pg_run(model, y0, tol).map(|(y, _)| y)
}

/// As `pg_solve`, also returning the model values along the inner iterates
/// (the first entry is the projected start).
pub(crate) fn pg_run(model: &SplitModel, y0: &Vector, tol: f64) -> Result<(Vector, Vec<f64>)> {
    model.validate()?;
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::invalid(format!("tolerance {tol} must be positive")));
    }
    if y0.dim() != model.dim {
        return Err(Error::DimensionMismatch { expected: model.dim, actual: y0.dim() });
    }
    let step = 1.0 / model.smooth_modulus;
    let mut y = model.region.project(y0, PROJECTION_TOL)?;
    let mut values = vec![model.value(&y)];
    let mut residual = f64::INFINITY;
    for _ in 0..PG_MAX_ITERS {
        let cand = y.axpy(-step, &model.smooth_gradient(&y));
        let next = match &model.prox_part {
            Some(p) => p.prox(&cand, step),
            None => model.region.project(&cand, PROJECTION_TOL)?,
        };
        let mapping_sq = y.sub(&next).norm_sq() * model.smooth_modulus * model.smooth_modulus;
        values.push(model.value(&next));
        y = next;
        residual = 4.0 * mapping_sq / model.mu;
        if residual <= tol {
            return Ok((y, values));
        }
    }
    Err(Error::ConvergenceFailure {
        context: "pg_solve".into(),
        iterations: PG_MAX_ITERS,
        residual,
        best: y.into_vec(),
    })
}
