//! Kurdyka-Lojasiewicz certificates, exponent fitting, and rate regimes.
//!
//! The inequality under test is phi'(gap) * slope >= 1 on a window of small
//! positive gaps. With the power form phi = kappa * tau^(1-theta) this turns
//! log slope into an affine function of log gap with slope theta, so fitting
//! theta is least squares in log-log coordinates; kappa then scales the
//! certificate until it is tight on the worst fitted sample.

use serde::{Deserialize, Serialize};

use crate::desing::Desingularizer;
use crate::error::{Error, Result};
use crate::slope::SlopeSample;

/// Fitted power-form certificate. `max_violation` is measured with the fitted
/// parameters over the fitted samples and is zero by construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KlFit {
    #[serde(rename = "theta")]
    pub theta_hat: f64,
    #[serde(rename = "kappa")]
    pub kappa_hat: f64,
    pub max_violation: f64,
    #[serde(rename = "n")]
    pub sample_count: usize,
}

fn validate_window(window: (f64, f64)) -> Result<()> {
    let (lo, hi) = window;
    if !(lo > 0.0) || !(hi > lo) {
        return Err(Error::invalid(format!("bad gap window ({lo}, {hi})")));
    }
    Ok(())
}

/// Worst shortfall of phi'(gap) * slope against 1 over samples whose gaps fall
/// strictly inside the window; zero when the certificate holds everywhere
/// (vacuously so if nothing lands in the window).
pub fn kl_certificate_check(
    samples: &[SlopeSample],
    d: &Desingularizer,
    window: (f64, f64),
) -> Result<f64> {
    validate_window(window)?;
    let mut worst = 0.0_f64;
    for s in samples.iter().filter(|s| s.gap > window.0 && s.gap < window.1) {
        let product = d.phi_prime(s.gap)? * s.slope;
        worst = worst.max(1.0 - product);
    }
    Ok(worst)
}

/// Fit a power-form desingularizer to (gap, slope) samples inside the window.
/// Needs at least eight samples with distinct gaps and positive slopes.
pub fn fit_kl_exponent(samples: &[SlopeSample], window: (f64, f64)) -> Result<KlFit> {
    validate_window(window)?;
    let usable: Vec<&SlopeSample> = samples
        .iter()
        .filter(|s| s.gap > window.0 && s.gap < window.1 && s.slope > 0.0)
        .collect();
    let mut gaps: Vec<f64> = usable.iter().map(|s| s.gap).collect();
    gaps.sort_by(|a, b| a.partial_cmp(b).unwrap());
    gaps.dedup();
    if gaps.len() < 8 {
        return Err(Error::InsufficientData(format!(
            "need 8 samples with distinct gaps in the window, found {}",
            gaps.len()
        )));
    }

    let n = usable.len() as f64;
    let xs: Vec<f64> = usable.iter().map(|s| s.gap.ln()).collect();
    let ys: Vec<f64> = usable.iter().map(|s| s.slope.ln()).collect();
    let xbar = xs.iter().sum::<f64>() / n;
    let ybar = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - xbar) * (x - xbar)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xbar) * (y - ybar)).sum();
    let raw_theta = sxy / sxx;
    let theta = raw_theta.clamp(0.0, 1.0 - 1e-9);
    let intercept = ybar - theta * xbar;

    // Certificate boundary for exact power data, then rescaled so the worst
    // fitted sample is exactly tight.
    let mut kappa = 1.0 / ((1.0 - theta) * intercept.exp());
    let product = |kappa: f64, s: &SlopeSample| kappa * (1.0 - theta) * s.gap.powf(-theta) * s.slope;
    let min_product = usable.iter().map(|s| product(kappa, s)).fold(f64::INFINITY, f64::min);
    kappa /= min_product;
    let max_violation = usable
        .iter()
        .map(|s| (1.0 - product(kappa, s)).max(0.0))
        .fold(0.0, f64::max);

    Ok(KlFit { theta_hat: theta, kappa_hat: kappa, max_violation, sample_count: usable.len() })
}

/// Convergence regime implied by a power-form exponent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "regime", rename_all = "snake_case")]
pub enum RateRegime {
    /// theta = 0: descent sequences stop after finitely many steps.
    Finite,
    /// 0 < theta < 1/2.
    Superlinear,
    /// theta = 1/2: geometric gap decay.
    Linear,
    /// 1/2 < theta < 1: gap decays like k^(-gap_exponent), iterate distance
    /// like k^(-iterate_exponent).
    Sublinear { gap_exponent: f64, iterate_exponent: f64 },
}

pub fn classify_rate(theta: f64) -> Result<RateRegime> {
    if !(0.0..1.0).contains(&theta) {
        return Err(Error::Domain(format!("theta must lie in [0, 1), got {theta}")));
    }
    Ok(if theta == 0.0 {
        RateRegime::Finite
    } else if theta < 0.5 {
        RateRegime::Superlinear
    } else if theta == 0.5 {
        RateRegime::Linear
    } else {
        RateRegime::Sublinear {
            gap_exponent: 1.0 / (2.0 * theta - 1.0),
            iterate_exponent: (1.0 - theta) / (2.0 * theta - 1.0),
        }
    })
}
