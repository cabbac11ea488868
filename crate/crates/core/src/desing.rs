//! Desingularizing functions.
//!
//! A desingularizer reparametrizes objective gaps: phi maps R+ to R+ with
//! phi(0) = 0 and a continuous, strictly positive derivative on the open
//! half-line. The workhorse is the power form phi(tau) = kappa * tau^(1-theta)
//! with theta in [0, 1); tabulated forms cover everything else via linear
//! interpolation on a grid of (tau, phi, phi') rows.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabulatedRow {
    pub tau: f64,
    pub phi: f64,
    pub phi_prime: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Desingularizer {
    PowerForm { kappa: f64, theta: f64 },
    Tabulated { grid: Vec<TabulatedRow> },
}

/// tau * phi'(tau) must fall below this for growth to count as moderate.
pub const MODERATE_GROWTH_THRESHOLD: f64 = 1e-6;

impl Desingularizer {
    pub fn power_form(kappa: f64, theta: f64) -> Result<Self> {
        if !(kappa > 0.0) {
            return Err(Error::invalid(format!("kappa must be positive, got {kappa}")));
        }
        if !(0.0..1.0).contains(&theta) {
            return Err(Error::invalid(format!("theta must lie in [0, 1), got {theta}")));
        }
        Ok(Desingularizer::PowerForm { kappa, theta })
    }

    /// Grid rows must have strictly increasing positive tau, nonnegative phi,
    /// and strictly positive phi'.
    pub fn tabulated(grid: Vec<TabulatedRow>) -> Result<Self> {
        if grid.is_empty() {
            return Err(Error::invalid("empty desingularizer grid"));
        }
        for w in grid.windows(2) {
            if w[1].tau <= w[0].tau {
                return Err(Error::invalid("grid taus must be strictly increasing"));
            }
        }
        for row in &grid {
            if !(row.tau > 0.0) || row.phi < 0.0 || !(row.phi_prime > 0.0) {
                return Err(Error::invalid(format!(
                    "bad grid row (tau {}, phi {}, phi' {})",
                    row.tau, row.phi, row.phi_prime
                )));
            }
        }
        Ok(Desingularizer::Tabulated { grid })
    }

    pub fn phi(&self, tau: f64) -> Result<f64> {
        if tau < 0.0 {
            return Err(Error::Domain(format!("phi undefined for negative tau {tau}")));
        }
        match self {
            Desingularizer::PowerForm { kappa, theta } => Ok(kappa * tau.powf(1.0 - theta)),
            Desingularizer::Tabulated { grid } => {
                let first = &grid[0];
                let last = grid.last().unwrap();
                if tau <= first.tau {
                    // Pin phi(0) = 0 and interpolate up to the first row.
                    return Ok(first.phi * tau / first.tau);
                }
                if tau >= last.tau {
                    // Extend with the end slope.
                    return Ok(last.phi + last.phi_prime * (tau - last.tau));
                }
                let i = grid.partition_point(|r| r.tau < tau);
                let (a, b) = (&grid[i - 1], &grid[i]);
                let t = (tau - a.tau) / (b.tau - a.tau);
                Ok(a.phi + t * (b.phi - a.phi))
            }
        }
    }

    pub fn phi_prime(&self, tau: f64) -> Result<f64> {
        if tau < 0.0 {
            return Err(Error::Domain(format!("phi' undefined for negative tau {tau}")));
        }
        match self {
            Desingularizer::PowerForm { kappa, theta } => {
                if tau == 0.0 {
                    if *theta > 0.0 {
                        return Err(Error::Domain("phi' diverges at tau = 0 for theta > 0".into()));
                    }
                    return Ok(*kappa);
                }
                Ok(kappa * (1.0 - theta) * tau.powf(-theta))
            }
            Desingularizer::Tabulated { grid } => {
                let first = &grid[0];
                let last = grid.last().unwrap();
                if tau <= first.tau {
                    return Ok(first.phi_prime);
                }
                if tau >= last.tau {
                    return Ok(last.phi_prime);
                }
                let i = grid.partition_point(|r| r.tau < tau);
                let (a, b) = (&grid[i - 1], &grid[i]);
                let t = (tau - a.tau) / (b.tau - a.tau);
                Ok(a.phi_prime + t * (b.phi_prime - a.phi_prime))
            }
        }
    }

    /// phi' nonincreasing; always true for the power form.
    pub fn concave(&self) -> bool {
        match self {
            Desingularizer::PowerForm { .. } => true,
            Desingularizer::Tabulated { grid } => {
                grid.windows(2).all(|w| w[1].phi_prime <= w[0].phi_prime + 1e-12)
            }
        }
    }
}

/// Both phi and phi' at tau. Fails where phi' is undefined (tau = 0 with a
/// genuinely singular derivative), even though phi itself would be fine there.
pub fn desingularizer_eval(d: &Desingularizer, tau: f64) -> Result<(f64, f64)> {
    Ok((d.phi(tau)?, d.phi_prime(tau)?))
}

/// Growth is moderate when tau * phi'(tau) decays to zero as tau shrinks.
/// Exact for the power form: theta < 1 always qualifies. Tabulated forms are
/// checked empirically on the supplied grid: the product must be nonincreasing
/// as tau decreases and must end below the threshold. Nonpositive grid entries
/// are ignored.
pub fn check_moderate_growth(d: &Desingularizer, grid: &[f64]) -> bool {
    match d {
        Desingularizer::PowerForm { theta, .. } => *theta < 1.0,
        Desingularizer::Tabulated { .. } => {
            let mut taus: Vec<f64> = grid.iter().copied().filter(|&t| t > 0.0).collect();
            taus.sort_by(|a, b| b.partial_cmp(a).unwrap());
            taus.dedup();
            if taus.is_empty() {
                return false;
            }
            let mut prev = f64::INFINITY;
            let mut last = f64::INFINITY;
            for tau in taus {
                let s = match d.phi_prime(tau) {
                    Ok(p) => tau * p,
                    Err(_) => return false,
                };
                if s > prev + 1e-12 * prev.max(1.0) {
                    return false;
                }
                prev = s;
                last = s;
            }
            last < MODERATE_GROWTH_THRESHOLD
        }
    }
}
