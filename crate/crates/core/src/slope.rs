//! Slope oracles and estimators.
//!
//! The slope of f at x is the largest local descent rate per unit distance,
//! sup over nearby y of (f(x) - f(y))+ / d(x, y) in the small-radius limit.
//! For differentiable f it equals the gradient norm, which `slope_exact_smooth`
//! reads off the oracle. `slope_estimate` works from values alone: it takes
//! the best descent ratio over a fixed direction set at shrinking radii and
//! extrapolates the radius to zero. Directions are deterministic (signed
//! coordinates plus a Kronecker low-discrepancy set) so repeated runs agree
//! bit for bit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::{interpolate, Vector};
use crate::objective::Objective;
use crate::trace::Trace;

/// Radii used by callers that have no better scale information.
pub const DEFAULT_SLOPE_RADII: [f64; 3] = [1e-2, 1e-3, 1e-4];

/// Gradient-norm slope for objectives with a gradient oracle.
pub fn slope_exact_smooth(obj: &Objective, x: &Vector) -> Result<f64> {
    Ok(obj.gradient(x)?.norm())
}

fn kronecker_alphas(dim: usize) -> Vec<f64> {
    // Unique positive root of x^(dim+1) = x + 1; the classic generalization of
    // the golden ratio used for additive low-discrepancy sequences.
    let mut g = 2.0_f64;
    for _ in 0..64 {
        g = (1.0 + g).powf(1.0 / (dim as f64 + 1.0));
    }
    (1..=dim).map(|i| (1.0 / g.powi(i as i32)).fract()).collect()
}

/// Deterministic unit directions: the 2*dim signed coordinate directions
/// followed by normalized Kronecker-sequence points, at least `count` total.
pub fn descent_directions(dim: usize, count: usize) -> Vec<Vector> {
    assert!(dim > 0, "zero-dimensional direction set");
    let mut dirs = Vec::with_capacity(count.max(2 * dim));
    for i in 0..dim {
        for sign in [1.0, -1.0] {
            let mut coords = vec![0.0; dim];
            coords[i] = sign;
            dirs.push(Vector::new(coords));
        }
    }
    let alphas = kronecker_alphas(dim);
    let mut n = 1u64;
    while dirs.len() < count {
        let coords: Vec<f64> =
            alphas.iter().map(|&a| 2.0 * (0.5 + n as f64 * a).fract() - 1.0).collect();
        let v = Vector::new(coords);
        let norm = v.norm();
        if norm > 1e-9 {
            dirs.push(v.scale(1.0 / norm));
        }
        n += 1;
    }
    dirs
}

fn best_descent_ratio(f: impl Fn(&Vector) -> f64, x: &Vector, fx: f64, r: f64, dirs: &[Vector]) -> f64 {
    let mut best = 0.0_f64;
    for u in dirs {
        let y = x.axpy(r, u);
        let ratio = (fx - f(&y)) / r;
        best = best.max(ratio);
    }
    best
}

/// Extrapolate the descent ratio to radius zero. Ratios of smooth objectives
/// behave like slope - c*r, so a two-point linear extrapolation on the two
/// smallest radii removes the first-order error.
pub(crate) fn extrapolate_ratios(radii: &[f64], ratios: &[f64]) -> f64 {
    let n = radii.len();
    if n == 1 {
        return ratios[0].max(0.0);
    }
    let (r1, q1) = (radii[n - 2], ratios[n - 2]);
    let (r2, q2) = (radii[n - 1], ratios[n - 1]);
    ((r1 * q2 - r2 * q1) / (r1 - r2)).max(0.0)
}

fn validate_radii(radii: &[f64]) -> Result<()> {
    if radii.is_empty() {
        return Err(Error::invalid("empty radius list"));
    }
    if radii.iter().any(|&r| !(r > 0.0)) {
        return Err(Error::invalid("radii must be positive"));
    }
    if radii.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::invalid("radii must be strictly decreasing"));
    }
    Ok(())
}

/// Sampled slope of the objective at x. Returns 0 at sampled local minimizers.
pub fn slope_estimate(
    obj: &Objective,
    x: &Vector,
    radii: &[f64],
    directions_per_radius: usize,
) -> Result<f64> {
    validate_radii(radii)?;
    if directions_per_radius < 2 * obj.dim() {
        return Err(Error::invalid(format!(
            "need at least {} directions for dimension {}",
            2 * obj.dim(),
            obj.dim()
        )));
    }
    let dirs = descent_directions(obj.dim(), directions_per_radius);
    let fx = obj.value(x);
    let ratios: Vec<f64> =
        radii.iter().map(|&r| best_descent_ratio(|y| obj.value(y), x, fx, r, &dirs)).collect();
    Ok(extrapolate_ratios(radii, &ratios))
}

/// Estimate of the limiting slope at x: the smallest sampled slope over points
/// near x whose values are near f(x), x itself included. Upper-bounds the true
/// liminf up to sampling resolution.
pub fn limiting_slope_estimate(
    obj: &Objective,
    x: &Vector,
    neighborhood_radius: f64,
    samples: usize,
) -> Result<f64> {
    if !(neighborhood_radius > 0.0) {
        return Err(Error::invalid("neighborhood radius must be positive"));
    }
    let dirs = descent_directions(obj.dim(), (2 * obj.dim()).max(8));
    let inner = [neighborhood_radius * 1e-1, neighborhood_radius * 1e-2];
    let fx = obj.value(x);
    let mut best = slope_estimate(obj, x, &inner, dirs.len())?;
    for i in 0..samples {
        let shrink = 0.5_f64.powi((i / dirs.len()).min(6) as i32);
        let y = x.axpy(neighborhood_radius * shrink, &dirs[i % dirs.len()]);
        if (obj.value(&y) - fx).abs() > neighborhood_radius {
            continue;
        }
        best = best.min(slope_estimate(obj, &y, &inner, dirs.len())?);
    }
    Ok(best)
}

/// A point paired with its objective value, gap, and slope. The CSV and JSON
/// forms carry the three numeric columns (gap, slope, value) only.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SlopeSample {
    #[serde(skip)]
    pub point: Vector,
    pub gap: f64,
    pub slope: f64,
    pub value: f64,
}

pub const SAMPLE_CSV_HEADER: &str = "gap,slope,value";

pub fn samples_to_csv(samples: &[SlopeSample]) -> String {
    let mut out = String::from(SAMPLE_CSV_HEADER);
    out.push('\n');
    for s in samples {
        out.push_str(&format!("{},{},{}\n", s.gap, s.slope, s.value));
    }
    out
}

pub fn samples_from_csv(text: &str) -> Result<Vec<SlopeSample>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim_end() == SAMPLE_CSV_HEADER => {}
        other => {
            return Err(Error::invalid(format!(
                "bad sample header {:?}, expected {:?}",
                other.unwrap_or(""),
                SAMPLE_CSV_HEADER
            )))
        }
    }
    let mut samples = Vec::new();
    for (row, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(Error::invalid(format!("sample row {row}: expected 3 columns")));
        }
        let mut nums = [0.0; 3];
        for (i, f) in fields.iter().enumerate() {
            nums[i] = f
                .trim()
                .parse()
                .map_err(|_| Error::invalid(format!("sample row {row}: bad number {f:?}")))?;
        }
        samples.push(SlopeSample { point: Vector::default(), gap: nums[0], slope: nums[1], value: nums[2] });
    }
    Ok(samples)
}

/// Turn a trace into slope samples: every iterate, plus `per_segment` points
/// placed geometrically along each step (parameters 1 - 2^-j), which spreads
/// sample gaps across scales even when the iterates themselves jump past the
/// window of interest. Slopes come from the gradient oracle when present and
/// from descent-ratio sampling scaled to the local step otherwise.
pub fn samples_from_trace(obj: &Objective, trace: &Trace, per_segment: usize) -> Result<Vec<SlopeSample>> {
    trace.validate()?;
    if trace.iterates.is_empty() {
        return Err(Error::invalid("trace has no iterate coordinates"));
    }
    let inf = obj
        .known_inf()
        .ok_or_else(|| Error::Unsupported("objective has no known infimum to form gaps".into()))?;

    let mut samples = Vec::new();
    let mut push = |point: Vector, scale_hint: Option<f64>| -> Result<()> {
        let value = obj.value(&point);
        let gap = (value - inf).max(0.0);
        let slope = if obj.has_gradient() {
            slope_exact_smooth(obj, &point)?
        } else {
            match scale_hint {
                Some(s) if s > 0.0 => slope_estimate(obj, &point, &[s / 2.0, s / 20.0], 2 * obj.dim())?,
                _ => slope_estimate(obj, &point, &DEFAULT_SLOPE_RADII, 2 * obj.dim())?,
            }
        };
        samples.push(SlopeSample { point, gap, slope, value });
        Ok(())
    };

    for k in 0..trace.iterates.len() {
        let step = trace.step_dists.get(k).copied().filter(|&d| d > 0.0);
        push(trace.iterates[k].clone(), step)?;
        if k + 1 < trace.iterates.len() {
            let (a, b) = (&trace.iterates[k], &trace.iterates[k + 1]);
            let d = a.sub(b).norm();
            if d == 0.0 {
                continue;
            }
            for j in 1..=per_segment {
                let t = 1.0 - 0.5_f64.powi(j as i32);
                let y = interpolate(a, b, t)?;
                let remaining = y.sub(b).norm();
                if remaining == 0.0 {
                    break;
                }
                push(y, Some(remaining))?;
            }
        }
    }
    Ok(samples)
}
