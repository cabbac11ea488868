//! Approximator fitting: the smallest sampled constant gamma for which
//! |h(x,y) - h(z,y)| <= gamma * d(x,z) * (d(x,y) + d(z,y)) holds over a box,
//! plus the closure check for weighted sums and the reduction that treats a
//! region mapping through its distance function.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::{distance, BoundingBox, Vector};
use crate::mm::RegionDescriptor;

pub const MIN_TRIPLES: usize = 1_000;

/// Sampled approximator constant. The defining ratio is tight at
/// `worst_triple` by construction (within 1e-12 on re-evaluation).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ApproximatorFit {
    pub gamma_hat: f64,
    pub worst_triple: (Vector, Vector, Vector),
    pub triples_checked: usize,
}

fn fit_from_ratios(
    mut next: impl FnMut() -> Result<Option<(f64, (Vector, Vector, Vector))>>,
    triples: usize,
) -> Result<ApproximatorFit> {
    if triples < MIN_TRIPLES {
        return Err(Error::invalid(format!(
            "need at least {MIN_TRIPLES} triples for a stable fit, got {triples}"
        )));
    }
    let mut best: Option<(f64, (Vector, Vector, Vector))> = None;
    let mut checked = 0;
    for _ in 0..triples {
        let Some((ratio, triple)) = next()? else { continue };
        checked += 1;
        if best.as_ref().map_or(true, |(g, _)| ratio > *g) {
            best = Some((ratio, triple));
        }
    }
    match best {
        Some((gamma_hat, worst_triple)) => {
            Ok(ApproximatorFit { gamma_hat, worst_triple, triples_checked: checked })
        }
        None => Err(Error::invalid("degenerate sampling: no triple had x distinct from z")),
    }
}

/// Fit gamma for a bivariate h by sampling `triples` triples (x, y, z) from
/// the box with a seeded generator. Triples with x = z are excluded.
pub fn approximator_gamma_fit(
    h: impl Fn(&Vector, &Vector) -> f64,
    region: &BoundingBox,
    triples: usize,
    seed: u64,
) -> Result<ApproximatorFit> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    fit_from_ratios(
        || {
            let x = region.sample(&mut rng);
            let y = region.sample(&mut rng);
            let z = region.sample(&mut rng);
            let dxz = distance(&x, &z)?;
            if dxz == 0.0 {
                return Ok(None);
            }
            let denom = dxz * (distance(&x, &y)? + distance(&z, &y)?);
            let ratio = (h(&x, &y) - h(&z, &y)).abs() / denom;
            Ok(Some((ratio, (x, y, z))))
        },
        triples,
    )
}

/// Weighted sums of approximators are approximators: true iff the combined
/// fit's gamma is at most sum(|w_i| gamma_i) + 1e-9. All fits must come from
/// the same sampling region (and, for tightness, the same triples).
pub fn check_sum_scalar_closure(
    fits: &[ApproximatorFit],
    weights: &[f64],
    combined: &ApproximatorFit,
) -> bool {
    assert_eq!(fits.len(), weights.len(), "one weight per fit");
    let bound: f64 = fits.iter().zip(weights).map(|(f, w)| w.abs() * f.gamma_hat).sum();
    combined.gamma_hat <= bound + 1e-9
}

/// Fit gamma for the mapping's distance function g(x, y) = dist_{D(x)}(y),
/// with each y drawn from D(z) (so g(z, y) = 0 and the pair difference is
/// the distance itself). Anchors the mapping rejects are skipped.
pub fn mapping_approximator_check(
    mapping: impl Fn(&Vector) -> Result<RegionDescriptor>,
    region: &BoundingBox,
    triples: usize,
    seed: u64,
) -> Result<ApproximatorFit> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let project = |desc: &RegionDescriptor, anchor: &Vector, y: &Vector| {
        desc.resolve(anchor).project(y, 1e-10).map_err(|e| match e {
            Error::ConvergenceFailure { .. } => Error::Contract(
                "projection into a mapped region diverged; the region may be empty".into(),
            ),
            other => other,
        })
    };
    fit_from_ratios(
        || {
            let x = region.sample(&mut rng);
            let z = region.sample(&mut rng);
            let y_raw = region.sample(&mut rng);
            let (dx, dz) = match (mapping(&x), mapping(&z)) {
                (Ok(a), Ok(b)) => (a, b),
                _ => return Ok(None),
            };
            let dxz = distance(&x, &z)?;
            if dxz == 0.0 {
                return Ok(None);
            }
            let y = project(&dz, &z, &y_raw)?;
            let nearest = project(&dx, &x, &y)?;
            let dist_in_x = distance(&y, &nearest)?;
            let denom = dxz * (distance(&x, &y)? + distance(&z, &y)?);
            Ok(Some((dist_in_x / denom, (x, y, z))))
        },
        triples,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mm::MmProblem;
    use crate::solvers::moving_balls::{NlpProblem, SmoothFn};

    fn squared_distance(x: &Vector, y: &Vector) -> f64 {
        y.sub(x).norm_sq()
    }

    fn threshold(x: &Vector, y: &Vector) -> f64 {
        (y.sub(x).norm() - 1.0).max(0.0)
    }

    fn disk_mm() -> MmProblem {
        let f = SmoothFn::new(2, |y: &Vector| y[0], |_: &Vector| Vector::new(vec![1.0, 0.0]), 1.0)
            .unwrap();
        let c = SmoothFn::new(2, |y: &Vector| y.norm_sq() - 1.0, |y: &Vector| y.scale(2.0), 2.0)
            .unwrap();
        MmProblem::moving_balls(NlpProblem::new(f, vec![c]).unwrap()).unwrap()
    }

    fn assert_tight_at_worst(
        h: impl Fn(&Vector, &Vector) -> f64,
        fit: &ApproximatorFit,
    ) {
        let (x, y, z) = &fit.worst_triple;
        let num = (h(x, y) - h(z, y)).abs();
        let denom = distance(x, z).unwrap() * (distance(x, y).unwrap() + distance(z, y).unwrap());
        assert!((num - fit.gamma_hat * denom).abs() <= 1e-12 * (1.0 + num));
    }

    #[test]
    fn squared_distance_is_a_unit_approximator() {
        let cube = BoundingBox::cube(2, -2.0, 2.0).unwrap();
        let fit = approximator_gamma_fit(squared_distance, &cube, 4000, 3).unwrap();
        assert!(fit.gamma_hat <= 1.0 + 1e-9, "gamma {}", fit.gamma_hat);
        assert!(fit.gamma_hat > 0.9, "gamma {}", fit.gamma_hat);
        assert_eq!(fit.triples_checked, 4000);
        assert_tight_at_worst(squared_distance, &fit);
    }

    #[test]
    fn threshold_distance_is_a_unit_approximator() {
        let cube = BoundingBox::cube(2, -2.0, 2.0).unwrap();
        let fit = approximator_gamma_fit(threshold, &cube, 4000, 3).unwrap();
        assert!(fit.gamma_hat <= 1.0 + 1e-9, "gamma {}", fit.gamma_hat);
        assert!(fit.gamma_hat > 0.2);
        assert_tight_at_worst(threshold, &fit);
    }

    #[test]
    fn moving_balls_model_fits_under_three_halves_modulus() {
        let p = disk_mm();
        let cube = BoundingBox::cube(2, -2.0, 2.0).unwrap();
        let h = |x: &Vector, y: &Vector| p.model_value(x, y);
        let fit = approximator_gamma_fit(h, &cube, 4000, 3).unwrap();
        // Objective modulus is 1, so the closed-form bound is 3/2.
        assert!(fit.gamma_hat <= 1.5 + 1e-9, "gamma {}", fit.gamma_hat);
        assert!(fit.gamma_hat > 0.3);
        assert_tight_at_worst(h, &fit);
    }

    #[test]
    fn sum_and_scalar_closure() {
        let p = disk_mm();
        let cube = BoundingBox::cube(2, -2.0, 2.0).unwrap();
        let model = |x: &Vector, y: &Vector| p.model_value(x, y);
        let f1 = approximator_gamma_fit(squared_distance, &cube, 2000, 9).unwrap();
        let f2 = approximator_gamma_fit(model, &cube, 2000, 9).unwrap();
        let combined_fn =
            |x: &Vector, y: &Vector| squared_distance(x, y) + 0.5 * p.model_value(x, y);
        let combined = approximator_gamma_fit(combined_fn, &cube, 2000, 9).unwrap();
        assert!(check_sum_scalar_closure(
            &[f1.clone(), f2.clone()],
            &[1.0, 0.5],
            &combined
        ));
        // Zero weight: the other term's gamma alone must cover the sum.
        let alone = approximator_gamma_fit(squared_distance, &cube, 2000, 9).unwrap();
        assert!(check_sum_scalar_closure(&[f1.clone(), f2.clone()], &[1.0, 0.0], &alone));
        // Identity case.
        assert!(check_sum_scalar_closure(&[f1.clone()], &[1.0], &f1));
        // A mismatched combined fit must be rejected.
        let inflated = approximator_gamma_fit(
            |x: &Vector, y: &Vector| 10.0 * squared_distance(x, y),
            &cube,
            2000,
            9,
        )
        .unwrap();
        assert!(!check_sum_scalar_closure(&[f1], &[1.0], &inflated));
    }

    #[test]
    fn whole_space_mapping_has_zero_gamma() {
        let cube = BoundingBox::cube(2, -2.0, 2.0).unwrap();
        let fit =
            mapping_approximator_check(|_| Ok(RegionDescriptor::WholeSpace), &cube, 1500, 21)
                .unwrap();
        assert_eq!(fit.gamma_hat, 0.0);
        assert_eq!(fit.triples_checked, 1500);
    }

    #[test]
    fn unit_ball_mapping_is_a_unit_approximator() {
        let cube = BoundingBox::cube(2, -2.0, 2.0).unwrap();
        let fit = mapping_approximator_check(
            |_| Ok(RegionDescriptor::FixedRadiusBall { rho: 1.0 }),
            &cube,
            3000,
            21,
        )
        .unwrap();
        assert!(fit.gamma_hat <= 1.0 + 1e-9, "gamma {}", fit.gamma_hat);
        assert!(fit.gamma_hat > 0.05);
    }

    #[test]
    fn moving_balls_mapping_fits_finitely() {
        let p = disk_mm();
        let cube = BoundingBox::cube(2, -1.5, 1.5).unwrap();
        let fit =
            mapping_approximator_check(|x| p.descriptor_at(x), &cube, 3000, 21).unwrap();
        assert!(fit.gamma_hat.is_finite());
        assert!(fit.gamma_hat > 0.0);
        // Infeasible anchors are skipped, feasible ones still dominate.
        assert!(fit.triples_checked < 3000);
        assert!(fit.triples_checked > 100);
    }

    #[test]
    fn doubling_triples_is_stable() {
        let cube = BoundingBox::cube(2, -2.0, 2.0).unwrap();
        let p = disk_mm();
        let model = |x: &Vector, y: &Vector| p.model_value(x, y);
        let check = |h: &dyn Fn(&Vector, &Vector) -> f64| {
            let a = approximator_gamma_fit(h, &cube, 2000, 5).unwrap().gamma_hat;
            let b = approximator_gamma_fit(h, &cube, 4000, 5).unwrap().gamma_hat;
            assert!((b - a).abs() <= 0.05 * a, "unstable fit: {a} vs {b}");
        };
        check(&squared_distance);
        check(&threshold);
        check(&model);
    }

    #[test]
    fn degenerate_and_undersized_sampling_fail() {
        let point = BoundingBox::cube(2, 1.0, 1.0).unwrap();
        assert!(approximator_gamma_fit(squared_distance, &point, 1500, 1).is_err());
        let cube = BoundingBox::cube(2, -2.0, 2.0).unwrap();
        assert!(approximator_gamma_fit(squared_distance, &cube, 999, 1).is_err());
        assert!(mapping_approximator_check(
            |_| Ok(RegionDescriptor::WholeSpace),
            &cube,
            10,
            1
        )
        .is_err());
    }
}
