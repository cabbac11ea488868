//! Proximal-point steps and the closed catalog of outer convex functions.
//!
//! The catalog is deliberately small: abs, l1, l2, and coordinate max all have
//! exact proximal maps, which is what keeps the inner-solver tolerance
//! contract honest. Arbitrary user outers are out of scope.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::Vector;
use crate::objective::Objective;
use crate::solvers::pg::{pg_solve, SplitModel};

/// Catalog of supported outer convex functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OuterKind {
    /// |u| on scalars.
    Abs,
    /// Sum of coordinate absolute values.
    L1,
    /// Euclidean norm.
    L2,
    /// Largest coordinate (not the largest magnitude).
    MaxCoord,
}

impl OuterKind {
    pub fn from_id(id: &str) -> Result<Self> {
        match id {
            "abs" => Ok(OuterKind::Abs),
            "l1" => Ok(OuterKind::L1),
            "l2" => Ok(OuterKind::L2),
            "max_coord" => Ok(OuterKind::MaxCoord),
            other => Err(Error::invalid(format!("unknown outer function {other:?}"))),
        }
    }

    pub fn id(&self) -> &'static str {
        match self {
            OuterKind::Abs => "abs",
            OuterKind::L1 => "l1",
            OuterKind::L2 => "l2",
            OuterKind::MaxCoord => "max_coord",
        }
    }

    pub fn value(&self, u: &[f64]) -> f64 {
        match self {
            OuterKind::Abs => {
                debug_assert_eq!(u.len(), 1);
                u[0].abs()
            }
            OuterKind::L1 => u.iter().map(|c| c.abs()).sum(),
            OuterKind::L2 => u.iter().map(|c| c * c).sum::<f64>().sqrt(),
            OuterKind::MaxCoord => u.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }

    /// Global Lipschitz modulus in the Euclidean norm for m-dimensional input.
    pub fn lipschitz(&self, m: usize) -> f64 {
        match self {
            OuterKind::Abs | OuterKind::L2 | OuterKind::MaxCoord => 1.0,
            OuterKind::L1 => (m as f64).sqrt(),
        }
    }

    /// prox_{t q}(v) = argmin_u q(u) + |u - v|^2 / (2t), exact per entry.
    pub fn prox(&self, v: &[f64], t: f64) -> Vec<f64> {
        debug_assert!(t >= 0.0);
        if t == 0.0 {
            return v.to_vec();
        }
        match self {
            OuterKind::Abs | OuterKind::L1 => v.iter().map(|&c| soft_threshold(c, t)).collect(),
            OuterKind::L2 => {
                let norm = v.iter().map(|c| c * c).sum::<f64>().sqrt();
                if norm <= t {
                    vec![0.0; v.len()]
                } else {
                    let s = 1.0 - t / norm;
                    v.iter().map(|&c| s * c).collect()
                }
            }
            OuterKind::MaxCoord => {
                // Moreau: prox of the max is v - t * (projection of v/t onto
                // the unit simplex), the simplex being the max's conjugate domain.
                let w: Vec<f64> = v.iter().map(|&c| c / t).collect();
                let z = project_simplex(&w);
                v.iter().zip(&z).map(|(&c, &zi)| c - t * zi).collect()
            }
        }
    }
}

pub fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Euclidean projection onto the unit simplex {z >= 0, sum z = 1}.
fn project_simplex(w: &[f64]) -> Vec<f64> {
    let mut sorted = w.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).expect("finite coordinates"));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (j, &wj) in sorted.iter().enumerate() {
        cumulative += wj;
        let candidate = (1.0 - cumulative) / (j + 1) as f64;
        if wj + candidate > 0.0 {
            theta = candidate;
        }
    }
    w.iter().map(|&wi| (wi + theta).max(0.0)).collect()
}

/// Proximal map of the outer catalog, as a standalone entry point.
pub fn prox_catalog(q_id: &str, v: &Vector, t: f64) -> Result<Vector> {
    if !(t > 0.0) {
        return Err(Error::invalid(format!("prox parameter {t} must be positive")));
    }
    let kind = OuterKind::from_id(q_id)?;
    if kind == OuterKind::Abs && v.dim() != 1 {
        return Err(Error::invalid("abs is a scalar outer; use l1 for vectors"));
    }
    Ok(Vector::new(kind.prox(v.as_slice(), t)))
}

/// Regularization weight of a proximal step; the quadratic-penalty modulus of
/// the induced model is 2*alpha.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProxParams {
    pub alpha: f64,
}

impl ProxParams {
    pub fn new(alpha: f64) -> Result<Self> {
        let p = ProxParams { alpha };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::invalid(format!("prox weight {} must be positive", self.alpha)));
        }
        Ok(())
    }
}

/// One proximal step: argmin_y f(y) + alpha * |y - x|^2, to value gap tol.
///
/// Dispatch: an exact prox oracle wins; otherwise a gradient oracle plus
/// modulus runs the inner solver on the penalized model. The smooth fallback
/// assumes a convex objective, so the model is 2*alpha strongly convex.
pub fn prox_point_step(obj: &Objective, x: &Vector, params: &ProxParams, tol: f64) -> Result<Vector> {
    params.validate()?;
    if x.dim() != obj.dim() {
        return Err(Error::DimensionMismatch { expected: obj.dim(), actual: x.dim() });
    }
    if obj.has_prox() {
        return obj.prox(x, params.alpha);
    }
    if obj.has_gradient() {
        let l = obj
            .lipschitz_grad()
            .ok_or_else(|| Error::invalid("smooth prox fallback needs a gradient modulus"))?;
        let alpha = params.alpha;
        let anchor = x.clone();
        let (fo, go) = (obj.clone(), obj.clone());
        let model = SplitModel::new(
            obj.dim(),
            move |y: &Vector| fo.value(y) + alpha * y.dist(&anchor).powi(2),
            {
                let anchor = x.clone();
                move |y: &Vector| {
                    go.gradient(y).expect("gradient checked above").axpy(2.0 * alpha, &y.sub(&anchor))
                }
            },
            l + 2.0 * alpha,
            2.0 * alpha,
        );
        return pg_solve(&model, x, tol);
    }
    Err(Error::Unsupported("proximal step needs a prox oracle or a gradient".into()))
}

/// Exact scalar prox of the power |y|^p, p >= 1:
/// argmin_y |y|^p + alpha * (y - x)^2.
///
/// p in {1, 2} close in closed form; other powers bisect the strictly
/// increasing derivative p*t^(p-1) + 2*alpha*(t - |x|) on t in [0, |x|].
pub fn power_prox(p: f64, alpha: f64, x: f64) -> Result<f64> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::invalid(format!("power {p} must be >= 1")));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::invalid(format!("prox weight {alpha} must be positive")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if p == 1.0 {
        return Ok(soft_threshold(x, 1.0 / (2.0 * alpha)));
    }
    if p == 2.0 {
        return Ok(alpha * x / (1.0 + alpha));
    }
    let target = x.abs();
    let g = |t: f64| p * t.powf(p - 1.0) + 2.0 * alpha * (t - target);
    let (mut lo, mut hi) = (0.0_f64, target);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(x.signum() * 0.5 * (lo + hi))
}
