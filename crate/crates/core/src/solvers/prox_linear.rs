//! Prox-linear steps for convex-composite objectives q(G(x)): linearize the
//! inner map, keep the outer exactly, add a proximal quadratic.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::metric::Vector;
use crate::solvers::pg::{pg_solve, ProxPart, SplitModel};
use crate::solvers::prox::OuterKind;

type MapFn = Arc<dyn Fn(&Vector) -> Vec<f64> + Send + Sync>;
type JacobianFn = Arc<dyn Fn(&Vector) -> Vec<Vector> + Send + Sync>;

/// Smooth inner map G: R^n -> R^m with a Jacobian oracle (rows of DG).
#[derive(Clone)]
pub struct InnerMap {
    n: usize,
    m: usize,
    value: MapFn,
    jacobian: JacobianFn,
}

impl InnerMap {
    pub fn new(
        n: usize,
        m: usize,
        value: impl Fn(&Vector) -> Vec<f64> + Send + Sync + 'static,
        jacobian: impl Fn(&Vector) -> Vec<Vector> + Send + Sync + 'static,
    ) -> Self {
        InnerMap { n, m, value: Arc::new(value), jacobian: Arc::new(jacobian) }
    }

    pub fn domain_dim(&self) -> usize {
        self.n
    }

    pub fn range_dim(&self) -> usize {
        self.m
    }

    pub fn value(&self, x: &Vector) -> Vec<f64> {
        let v = (self.value)(x);
        debug_assert_eq!(v.len(), self.m);
        v
    }

    pub fn jacobian(&self, x: &Vector) -> Vec<Vector> {
        let rows = (self.jacobian)(x);
        debug_assert_eq!(rows.len(), self.m);
        rows
    }
}

/// Composite objective q(G(x)) with the data the prox-linear model needs:
/// a second-derivative bound M on G and the proximal modulus mu.
///
/// The constructor only checks signs. Whether mu clears the majorization
/// floor 2 L_q M is a property of the *step*, checked there; keeping
/// sub-floor problems constructible lets diagnostics exhibit the failure.
#[derive(Clone)]
pub struct CompositeProblem {
    pub outer: OuterKind,
    pub inner: InnerMap,
    pub second_deriv_bound: f64,
    pub mu: f64,
}

impl CompositeProblem {
    pub fn new(outer: OuterKind, inner: InnerMap, second_deriv_bound: f64, mu: f64) -> Result<Self> {
        if !(second_deriv_bound >= 0.0 && second_deriv_bound.is_finite()) {
            return Err(Error::invalid(format!(
                "second derivative bound {second_deriv_bound} must be nonnegative"
            )));
        }
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::invalid(format!("proximal modulus {mu} must be positive")));
        }
        if outer == OuterKind::Abs && inner.range_dim() != 1 {
            return Err(Error::invalid("abs composes with a one-dimensional inner map"));
        }
        Ok(CompositeProblem { outer, inner, second_deriv_bound, mu })
    }

    pub fn dim(&self) -> usize {
        self.inner.domain_dim()
    }

    pub fn lipschitz_outer(&self) -> f64 {
        self.outer.lipschitz(self.inner.range_dim())
    }

    pub fn mu_floor(&self) -> f64 {
        prox_linear_mu_floor(self.lipschitz_outer(), self.second_deriv_bound)
    }

    pub fn value(&self, x: &Vector) -> f64 {
        self.outer.value(&self.inner.value(x))
    }

    /// H(x, y) = G(x) + DG(x)(y - x).
    pub fn linearization(&self, x: &Vector, y: &Vector) -> Vec<f64> {
        let base = self.inner.value(x);
        let rows = self.inner.jacobian(x);
        let d = y.sub(x);
        base.iter().zip(&rows).map(|(b, row)| b + row.dot(&d)).collect()
    }

    /// h(x, y) = q(H(x, y)) + (mu/2) |y - x|^2.
    pub fn model_value(&self, x: &Vector, y: &Vector) -> f64 {
        self.outer.value(&self.linearization(x, y)) + 0.5 * self.mu * y.sub(x).norm_sq()
    }

    /// The step's inner problem as a split model anchored at x. Exactness of
    /// the nonsmooth prox needs DG(x) DG(x)ᵀ = a² I, which always holds for
    /// m = 1; otherwise the row check may reject the anchor.
    pub fn subproblem(&self, x: &Vector) -> Result<SplitModel> {
        if x.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), actual: x.dim() });
        }
        let rows = self.inner.jacobian(x);
        let base = self.inner.value(x);
        let offset: Vec<f64> = base.iter().zip(&rows).map(|(b, row)| b - row.dot(x)).collect();
        let part = ProxPart::new(self.outer, 1.0, rows, offset)?;
        let mu = self.mu;
        let anchor = x.clone();
        let anchor_g = x.clone();
        Ok(SplitModel::new(
            self.dim(),
            move |y: &Vector| 0.5 * mu * y.sub(&anchor).norm_sq(),
            move |y: &Vector| y.sub(&anchor_g).scale(mu),
            mu,
            mu,
        )
        .with_prox_part(part))
    }
}

/// Smallest proximal modulus that keeps the prox-linear model a majorant:
/// anything above 2 * L_q * M works.
pub fn prox_linear_mu_floor(l_q: f64, m_bound: f64) -> f64 {
    2.0 * l_q * m_bound
}

/// One prox-linear step from x: argmin_y h(x, y), to value gap tol.
pub fn prox_linear_step(p: &CompositeProblem, x: &Vector, tol: f64) -> Result<Vector> {
    let floor = p.mu_floor();
    if p.mu <= floor {
        return Err(Error::Precondition(format!(
            "proximal modulus {} must exceed the majorization floor {floor}",
            p.mu
        )));
    }
    pg_solve(&p.subproblem(x)?, x, tol)
}
