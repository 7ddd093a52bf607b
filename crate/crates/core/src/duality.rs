//! Power-scaling map between power minimization (PM) and max-min SINR
//! balancing (SB).
//!
//! If `x_PM` minimizes `‖x‖²` subject to `A x ⪰ b` with optimal power
//! `p_PM`, then for any budget `p` the balancing problem is solved by
//! `x_SB = √(p/p_PM) · x_PM` with balance level `μ = √(p/p_PM)`; conversely
//! `x_PM = x_SB / μ` and `p_PM = p / μ²`.

use nalgebra::DVector;

use crate::ci_model::CiSystem;
use crate::error::{Error, Result};

/// Default interval width at which [`bisection_sb`] stops.
pub const DEFAULT_TOL_MU: f64 = 1e-4;
const MAX_DOUBLINGS: usize = 60;

#[derive(Debug, Clone, PartialEq)]
pub struct SbResult {
    pub x: DVector<f64>,
    /// Balance level achieved by `x`.
    pub mu: f64,
    /// `‖x‖²`.
    pub power_used: f64,
    /// Budget `p`.
    pub budget: f64,
}

/// Balance level of a transmit vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Balance {
    /// `min_i (a_iᵀx)/b_i` over inequality rows (over equality rows when a
    /// slot has no inequality rows at all).
    pub mu: f64,
    /// `max |a_iᵀx − μ b_i|` over equality rows; 0 when there are none.
    pub equality_deviation: f64,
}

impl Balance {
    /// Equality rows agree with `μ` within `tol·(1+|μ|)`.
    pub fn consistent(&self, tol: f64) -> bool {
        self.equality_deviation <= tol * (1.0 + self.mu.abs())
    }
}

pub fn evaluate_balance(system: &CiSystem, x: &DVector<f64>) -> Result<Balance> {
    if let Some(i) = system.b.iter().position(|&b| b == 0.0) {
        return Err(Error::param(format!("row {i} has a zero threshold")));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::param("transmit vector is not finite"));
    }
    let ax = &system.a * x;
    let ratio = |i: usize| ax[i] / system.b[i];
    let ineq_min = (0..system.rows())
        .filter(|&i| !system.eq_mask[i])
        .map(ratio)
        .fold(f64::INFINITY, f64::min);
    let mu = if ineq_min.is_finite() {
        ineq_min
    } else {
        (0..system.rows()).map(ratio).fold(f64::INFINITY, f64::min)
    };
    let equality_deviation = (0..system.rows())
        .filter(|&i| system.eq_mask[i])
        .map(|i| (ax[i] - mu * system.b[i]).abs())
        .fold(0.0, f64::max);
    Ok(Balance {
        mu,
        equality_deviation,
    })
}

/// PM solution → SB solution for budget `p`.
pub fn pm_to_sb(x_pm: &DVector<f64>, p_pm: f64, budget: f64) -> Result<SbResult> {
    if !(budget > 0.0 && budget.is_finite()) {
        return Err(Error::param(format!("budget must be positive, got {budget}")));
    }
    if !(p_pm > 0.0 && p_pm.is_finite()) {
        return Err(Error::param(format!(
            "PM power {p_pm} cannot be scaled to a positive budget"
        )));
    }
    let scale = (budget / p_pm).sqrt();
    let x = x_pm * scale;
    Ok(SbResult {
        power_used: x.norm_squared(),
        x,
        mu: scale,
        budget,
    })
}

/// SB solution → PM solution and its power.
pub fn sb_to_pm(x_sb: &DVector<f64>, mu: f64, budget: f64) -> Result<(DVector<f64>, f64)> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::param(format!("balance level must be positive, got {mu}")));
    }
    Ok((x_sb / mu, budget / (mu * mu)))
}

/// Outcome of the bisection reference for SB.
#[derive(Debug, Clone, PartialEq)]
pub struct BisectionOutcome {
    pub result: SbResult,
    /// Final bracket on the threshold scale α.
    pub bracket: (f64, f64),
    /// PM solves performed.
    pub pm_solves: usize,
}

impl BisectionOutcome {
    pub fn alpha(&self) -> f64 {
        0.5 * (self.bracket.0 + self.bracket.1)
    }
}

/// SB by bisection on the threshold scale α: find α with
/// `p_PM(α b) = p`, then spend exactly `p` with the last PM solution.
///
/// `pm_solver` must return an (accurate) PM optimizer and its power for the
/// system it is given.
pub fn bisection_sb<F>(system: &CiSystem, budget: f64, mut pm_solver: F, tol_mu: f64) -> Result<BisectionOutcome>
where
    F: FnMut(&CiSystem) -> Result<(DVector<f64>, f64)>,
{
    if !(budget > 0.0 && budget.is_finite()) {
        return Err(Error::param(format!("budget must be positive, got {budget}")));
    }
    if !(tol_mu > 0.0) {
        return Err(Error::param("tol_mu must be positive"));
    }
    if system.b.iter().all(|&b| b == 0.0) {
        return Err(Error::Bisection("zero thresholds: balance level is unbounded".into()));
    }
    let mut solves = 0usize;
    let mut power_at = |alpha: f64, solves: &mut usize| -> Result<(DVector<f64>, f64)> {
        *solves += 1;
        pm_solver(&system.with_scaled_thresholds(alpha))
    };

    let (_, p_unit) = power_at(1.0, &mut solves)?;
    let mut lo = 0.0_f64;
    let mut hi = if p_unit > 0.0 {
        2.0 * (budget / p_unit).sqrt()
    } else {
        1.0
    };
    let mut doublings = 0;
    loop {
        let (_, p_hi) = power_at(hi, &mut solves)?;
        if p_hi >= budget {
            break;
        }
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings > MAX_DOUBLINGS {
            return Err(Error::Bisection(format!(
                "no bracket after {MAX_DOUBLINGS} doublings"
            )));
        }
    }
    while hi - lo >= tol_mu {
        let mid = 0.5 * (lo + hi);
        let (_, p_mid) = power_at(mid, &mut solves)?;
        if p_mid > budget {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let alpha = 0.5 * (lo + hi);
    let (x_alpha, p_alpha) = power_at(alpha, &mut solves)?;
    if !(p_alpha > 0.0) {
        return Err(Error::Bisection("PM power vanished at the final scale".into()));
    }
    let x = x_alpha * (budget / p_alpha).sqrt();
    let mu = evaluate_balance(system, &x)?.mu;
    Ok(BisectionOutcome {
        result: SbResult {
            power_used: x.norm_squared(),
            x,
            mu,
            budget,
        },
        bracket: (lo, hi),
        pm_solves: solves,
    })
}
