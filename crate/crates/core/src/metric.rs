//! Points, balls, and projections in Euclidean space.
//!
//! Everything downstream works on a metric space; here that space is R^n with
//! the usual distance. `Vector` is a thin wrapper over `Vec<f64>` so points
//! serialize as plain JSON arrays.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point in R^n. Entries are expected to be finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn new(coords: Vec<f64>) -> Self {
        debug_assert!(coords.iter().all(|c| c.is_finite()), "non-finite coordinate");
        Vector(coords)
    }

    pub fn scalar(x: f64) -> Self {
        Vector::new(vec![x])
    }

    pub fn zeros(dim: usize) -> Self {
        Vector(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn dot(&self, other: &Vector) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn add(&self, other: &Vector) -> Vector {
        debug_assert_eq!(self.dim(), other.dim());
        Vector(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &Vector) -> Vector {
        debug_assert_eq!(self.dim(), other.dim());
        Vector(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn scale(&self, s: f64) -> Vector {
        Vector(self.0.iter().map(|a| a * s).collect())
    }

    /// self + s * other
    pub fn axpy(&self, s: f64, other: &Vector) -> Vector {
        debug_assert_eq!(self.dim(), other.dim());
        Vector(self.0.iter().zip(&other.0).map(|(a, b)| a + s * b).collect())
    }

    pub(crate) fn dist(&self, other: &Vector) -> f64 {
        self.sub(other).norm()
    }
}

impl From<Vec<f64>> for Vector {
    fn from(v: Vec<f64>) -> Self {
        Vector::new(v)
    }
}

impl Default for Vector {
    fn default() -> Self {
        Vector(Vec::new())
    }
}

impl std::ops::Index<usize> for Vector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Closed Euclidean ball.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Vector,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Vector, radius: f64) -> Self {
        Ball { center, radius }
    }

    pub fn contains(&self, y: &Vector, tol: f64) -> bool {
        y.dist(&self.center) <= self.radius + tol
    }
}

/// Axis-aligned box used as a sampling region by the diagnostic fitters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundingBox {
    pub lo: Vector,
    pub hi: Vector,
}

impl BoundingBox {
    pub fn new(lo: Vector, hi: Vector) -> Result<Self> {
        if lo.dim() != hi.dim() {
            return Err(Error::DimensionMismatch { expected: lo.dim(), actual: hi.dim() });
        }
        if lo.as_slice().iter().zip(hi.as_slice()).any(|(a, b)| a > b) {
            return Err(Error::invalid("bounding box with lo > hi"));
        }
        Ok(BoundingBox { lo, hi })
    }

    /// Cube [lo, hi]^dim.
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        BoundingBox::new(Vector::new(vec![lo; dim]), Vector::new(vec![hi; dim]))
    }

    pub fn dim(&self) -> usize {
        self.lo.dim()
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> Vector {
        let coords = self
            .lo
            .as_slice()
            .iter()
            .zip(self.hi.as_slice())
            .map(|(&a, &b)| if a == b { a } else { rng.gen_range(a..=b) })
            .collect();
        Vector::new(coords)
    }
}

fn check_dims(x: &Vector, y: &Vector) -> Result<()> {
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch { expected: x.dim(), actual: y.dim() });
    }
    Ok(())
}

/// Euclidean distance between two points of equal dimension.
pub fn distance(x: &Vector, y: &Vector) -> Result<f64> {
    check_dims(x, y)?;
    Ok(x.dist(y))
}

/// Point (1-t)x + ty on the segment joining x and y; t must lie in [0, 1].
pub fn interpolate(x: &Vector, y: &Vector, t: f64) -> Result<Vector> {
    check_dims(x, y)?;
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::invalid(format!("interpolation parameter {t} outside [0, 1]")));
    }
    Ok(x.scale(1.0 - t).add(&y.scale(t)))
}

/// Nearest point of a closed ball. Radial formula; exact for feasible y.
pub fn project_ball(b: &Ball, y: &Vector) -> Result<Vector> {
    check_dims(&b.center, y)?;
    if b.radius < 0.0 {
        return Err(Error::invalid(format!("negative ball radius {}", b.radius)));
    }
    let offset = y.sub(&b.center);
    let d = offset.norm();
    if d <= b.radius {
        return Ok(y.clone());
    }
    Ok(b.center.add(&offset.scale(b.radius / d)))
}

pub const DYKSTRA_DEFAULT_TOL: f64 = 1e-10;
pub const DYKSTRA_MAX_SWEEPS: usize = 10_000;

/// Nearest point of an intersection of closed balls, by Dykstra's alternating
/// projection scheme with one correction vector per ball.
///
/// Plain alternating projections find *a* feasible point; the corrections are
/// what make the limit the actual nearest point. An empty ball list is treated
/// as the whole space. Budget exhaustion returns a convergence failure
/// carrying the best iterate.
pub fn dykstra_project(balls: &[Ball], y: &Vector, tol: f64) -> Result<Vector> {
    if tol <= 0.0 {
        return Err(Error::invalid(format!("nonpositive tolerance {tol}")));
    }
    for b in balls {
        check_dims(&b.center, y)?;
        if b.radius < 0.0 {
            return Err(Error::invalid(format!("negative ball radius {}", b.radius)));
        }
    }
    if balls.is_empty() || balls.iter().all(|b| b.contains(y, 0.0)) {
        return Ok(y.clone());
    }

    let mut x = y.clone();
    let mut corrections = vec![Vector::zeros(y.dim()); balls.len()];
    // Displacement threshold below the requested tolerance: Dykstra converges
    // linearly here, so the distance to the limit is a modest multiple of the
    // last sweep's movement.
    let stop = tol * 1e-2;
    for _ in 0..DYKSTRA_MAX_SWEEPS {
        let before = x.clone();
        for (b, p) in balls.iter().zip(corrections.iter_mut()) {
            let z = x.add(p);
            let projected = project_ball(b, &z)?;
            *p = z.sub(&projected);
            x = projected;
        }
        if x.dist(&before) <= stop {
            return Ok(x);
        }
    }
    let residual = balls.iter().map(|b| (x.dist(&b.center) - b.radius).max(0.0)).fold(0.0, f64::max);
    Err(Error::ConvergenceFailure {
        context: "dykstra_project".into(),
        iterations: DYKSTRA_MAX_SWEEPS,
        residual,
        best: x.into_vec(),
    })
}

/// Constraint set a subproblem is minimized over: the whole space or an
/// intersection of closed balls. An empty ball list means unconstrained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    WholeSpace,
    Balls(Vec<Ball>),
}

impl Region {
    pub fn ball(b: Ball) -> Region {
        Region::Balls(vec![b])
    }

    /// True when the region actually constrains anything.
    pub fn is_constrained(&self) -> bool {
        matches!(self, Region::Balls(balls) if !balls.is_empty())
    }

    pub fn contains(&self, y: &Vector, tol: f64) -> bool {
        match self {
            Region::WholeSpace => true,
            Region::Balls(balls) => balls.iter().all(|b| b.contains(y, tol)),
        }
    }

    /// Nearest point of the region: exact for a single ball, Dykstra for a
    /// proper intersection.
    pub fn project(&self, y: &Vector, tol: f64) -> Result<Vector> {
        match self {
            Region::WholeSpace => Ok(y.clone()),
            Region::Balls(balls) if balls.len() == 1 => project_ball(&balls[0], y),
            Region::Balls(balls) => dykstra_project(balls, y, tol),
        }
    }
}
