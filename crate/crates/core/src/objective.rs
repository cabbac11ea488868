//! Objective functions exposed through evaluation oracles.
//!
//! An `Objective` always knows how to evaluate itself; gradients, an exact
//! proximal map, a known infimum, and a gradient Lipschitz modulus are
//! optional extras that unlock cheaper or sharper code paths downstream.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::metric::Vector;

pub type ValueFn = Arc<dyn Fn(&Vector) -> f64 + Send + Sync>;
pub type GradientFn = Arc<dyn Fn(&Vector) -> Vector + Send + Sync>;
/// (anchor, weight) -> argmin_y f(y) + weight * |y - anchor|^2
pub type ProxFn = Arc<dyn Fn(&Vector, f64) -> Vector + Send + Sync>;

#[derive(Clone)]
pub struct Objective {
    dim: usize,
    value: ValueFn,
    gradient: Option<GradientFn>,
    prox: Option<ProxFn>,
    known_inf: Option<f64>,
    lipschitz_grad: Option<f64>,
}

impl Objective {
    pub fn new(dim: usize, value: impl Fn(&Vector) -> f64 + Send + Sync + 'static) -> Self {
        Objective {
            dim,
            value: Arc::new(value),
            gradient: None,
            prox: None,
            known_inf: None,
            lipschitz_grad: None,
        }
    }

    pub fn with_gradient(mut self, g: impl Fn(&Vector) -> Vector + Send + Sync + 'static) -> Self {
        self.gradient = Some(Arc::new(g));
        self
    }

    /// Attach an exact proximal map: (anchor, weight) -> argmin f + weight*d^2.
    pub fn with_prox(mut self, p: impl Fn(&Vector, f64) -> Vector + Send + Sync + 'static) -> Self {
        self.prox = Some(Arc::new(p));
        self
    }

    pub fn with_known_inf(mut self, inf: f64) -> Self {
        self.known_inf = Some(inf);
        self
    }

    pub fn with_lipschitz_grad(mut self, l: f64) -> Self {
        self.lipschitz_grad = Some(l);
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn value(&self, x: &Vector) -> f64 {
        debug_assert_eq!(x.dim(), self.dim);
        (self.value)(x)
    }

    pub fn has_gradient(&self) -> bool {
        self.gradient.is_some()
    }

    pub fn gradient(&self, x: &Vector) -> Result<Vector> {
        debug_assert_eq!(x.dim(), self.dim);
        match &self.gradient {
            Some(g) => Ok(g(x)),
            None => Err(Error::Unsupported("objective has no gradient oracle".into())),
        }
    }

    pub fn has_prox(&self) -> bool {
        self.prox.is_some()
    }

    pub fn prox(&self, anchor: &Vector, weight: f64) -> Result<Vector> {
        debug_assert_eq!(anchor.dim(), self.dim);
        match &self.prox {
            Some(p) => Ok(p(anchor, weight)),
            None => Err(Error::Unsupported("objective has no proximal oracle".into())),
        }
    }

    pub fn known_inf(&self) -> Option<f64> {
        self.known_inf
    }

    pub fn lipschitz_grad(&self) -> Option<f64> {
        self.lipschitz_grad
    }

    /// f(x) - inf f, when the infimum is known.
    pub fn gap(&self, x: &Vector) -> Option<f64> {
        self.known_inf.map(|inf| self.value(x) - inf)
    }
}

impl std::fmt::Debug for Objective {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Objective")
            .field("dim", &self.dim)
            .field("gradient", &self.gradient.is_some())
            .field("prox", &self.prox.is_some())
            .field("known_inf", &self.known_inf)
            .field("lipschitz_grad", &self.lipschitz_grad)
            .finish()
    }
}
