//! Reference solver for the PM-SLP quadratic program, via its Lagrangian dual.
//!
//! For `min ‖x‖²  s.t.  a_iᵀx ≥ b_i (inequality rows), a_iᵀx = b_i (equality rows)`
//! the dual is
//!
//! ```text
//! max_λ  bᵀλ − ¼ λᵀ A Aᵀ λ     s.t.  λ_i ≥ 0 on inequality rows
//! ```
//!
//! with primal recovery `x = ½ Aᵀ λ`. The dual is solved by projected
//! gradient ascent with step `1/L`, `L = ½‖A‖²`; every few sweeps the
//! support of λ is handed to a finite active-set refinement that solves
//! the reduced equality system exactly. A result is only returned once
//! [`kkt_check`] certifies it.

use nalgebra::{DMatrix, DVector};

use crate::ci_model::CiSystem;
use crate::error::{Error, Result};
use crate::linalg::{norm_inf, spectral_norm};

/// Optimality certificate for a primal/dual pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktReport {
    /// `‖2x − Aᵀλ‖∞`.
    pub stationarity: f64,
    /// Largest violation of `A x ⪰ b` (equality rows: `|a_iᵀx − b_i|`).
    pub primal_infeas: f64,
    /// Most negative multiplier on an inequality row (0 when none is negative).
    pub dual_infeas: f64,
    /// `max |λ_i · (a_iᵀx − b_i)|` over inequality rows.
    pub complementarity: f64,
}

impl KktReport {
    pub fn max_residual(&self) -> f64 {
        self.stationarity
            .max(self.primal_infeas)
            .max(-self.dual_infeas)
            .max(self.complementarity)
    }

    pub fn certifies(&self, tol: f64) -> bool {
        self.max_residual() < tol
    }
}

pub fn kkt_check(system: &CiSystem, x: &DVector<f64>, lambda: &DVector<f64>) -> KktReport {
    let stationarity = norm_inf(&(x * 2.0 - system.a.tr_mul(lambda)));
    let r = system.evaluate_constraints(x);
    let mut primal_infeas = 0.0_f64;
    let mut dual_infeas = 0.0_f64;
    let mut complementarity = 0.0_f64;
    for i in 0..system.rows() {
        if system.eq_mask[i] {
            primal_infeas = primal_infeas.max(r[i].abs());
        } else {
            // slack c_i = max(r_i, 0); λ_i must vanish unless the row is tight
            primal_infeas = primal_infeas.max((-r[i]).max(0.0));
            dual_infeas = dual_infeas.min(lambda[i]);
            complementarity = complementarity.max((lambda[i] * r[i]).abs());
        }
    }
    KktReport {
        stationarity,
        primal_infeas,
        dual_infeas,
        complementarity,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleConfig {
    pub tol: f64,
    pub max_iters: usize,
    /// Nesterov momentum with adaptive restart in the gradient phase.
    pub accelerated: bool,
    /// Gradient sweeps between active-set refinement attempts.
    pub refine_every: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iters: 200_000,
            accelerated: false,
            refine_every: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    pub x: DVector<f64>,
    pub lambda: DVector<f64>,
    pub kkt: KktReport,
    /// Gradient sweeps performed.
    pub iterations: usize,
    /// Dual objective `bᵀλ − ¼λᵀAAᵀλ` at the returned multiplier.
    pub dual_objective: f64,
}

impl OracleSolution {
    pub fn objective(&self) -> f64 {
        self.x.norm_squared()
    }
}

struct Dual<'a> {
    system: &'a CiSystem,
    gram: DMatrix<f64>,
}

impl<'a> Dual<'a> {
    fn new(system: &'a CiSystem) -> Self {
        Self {
            system,
            gram: &system.a * system.a.transpose(),
        }
    }

    /// `b − ½ G λ` (ascent direction).
    fn ascent(&self, lambda: &DVector<f64>) -> DVector<f64> {
        &self.system.b - (&self.gram * lambda) * 0.5
    }

    fn value(&self, lambda: &DVector<f64>) -> f64 {
        self.system.b.dot(lambda) - 0.25 * lambda.dot(&(&self.gram * lambda))
    }

    fn project(&self, lambda: &mut DVector<f64>) {
        for (l, &eq) in lambda.iter_mut().zip(&self.system.eq_mask) {
            if !eq && *l < 0.0 {
                *l = 0.0;
            }
        }
    }

    fn primal(&self, lambda: &DVector<f64>) -> DVector<f64> {
        self.system.a.tr_mul(lambda) * 0.5
    }

    /// Solves `½ G_FF z_F = b_F` for the free set `F`.
    fn solve_free(&self, free: &[usize]) -> Option<DVector<f64>> {
        let n = self.system.rows();
        let mut z = DVector::zeros(n);
        if free.is_empty() {
            return Some(z);
        }
        let sub = DMatrix::from_fn(free.len(), free.len(), |i, j| 0.5 * self.gram[(free[i], free[j])]);
        let rhs = DVector::from_fn(free.len(), |i, _| self.system.b[free[i]]);
        let sol = sub.cholesky()?.solve(&rhs);
        for (k, &i) in free.iter().enumerate() {
            z[i] = sol[k];
        }
        Some(z)
    }

    /// Finite active-set method (Lawson–Hanson style) on the box-constrained
    /// dual, started from a feasible `λ`. Returns `None` when a reduced
    /// system is singular or the step budget runs out.
    fn refine(&self, start: &DVector<f64>, add_tol: f64) -> Option<DVector<f64>> {
        let n = self.system.rows();
        let eq = &self.system.eq_mask;
        let mut lambda = start.clone();
        let mut free: Vec<bool> = (0..n).map(|i| eq[i] || lambda[i] > 0.0).collect();
        for i in 0..n {
            if !free[i] {
                lambda[i] = 0.0;
            }
        }
        for _ in 0..(10 * n + 10) {
            // inner loop: move toward the reduced solution while keeping λ_I ≥ 0
            for _ in 0..(n + 1) {
                let idx: Vec<usize> = (0..n).filter(|&i| free[i]).collect();
                let z = self.solve_free(&idx)?;
                let mut alpha = 1.0_f64;
                let mut blocking = false;
                for &i in &idx {
                    if !eq[i] && z[i] <= 0.0 {
                        let a = lambda[i] / (lambda[i] - z[i]);
                        if a < alpha {
                            alpha = a;
                        }
                        blocking = true;
                    }
                }
                if !blocking {
                    lambda = z;
                    break;
                }
                lambda += (z - &lambda) * alpha;
                for &i in &idx {
                    if !eq[i] && lambda[i] <= 0.0 {
                        lambda[i] = 0.0;
                        free[i] = false;
                    }
                }
            }
            let w = self.ascent(&lambda);
            let mut best = None;
            let mut best_w = add_tol;
            for i in 0..n {
                if !free[i] && w[i] > best_w {
                    best_w = w[i];
                    best = Some(i);
                }
            }
            match best {
                Some(i) => free[i] = true,
                None => return Some(lambda),
            }
        }
        None
    }
}

/// Solves the PM problem to a certified KKT residual below `tol`.
pub fn solve_pm_dual(system: &CiSystem, tol: f64, max_iters: usize) -> Result<OracleSolution> {
    solve_pm_dual_with(
        system,
        &OracleConfig {
            tol,
            max_iters,
            ..OracleConfig::default()
        },
    )
}

fn rank_deficient(gram: &DMatrix<f64>) -> bool {
    let eig = gram.clone().symmetric_eigenvalues();
    eig.min() <= 1e-12 * eig.max().max(f64::MIN_POSITIVE)
}

pub fn solve_pm_dual_with(system: &CiSystem, cfg: &OracleConfig) -> Result<OracleSolution> {
    if !(cfg.tol >= 1e-12) {
        return Err(Error::param(format!("oracle tolerance {} is below 1e-12", cfg.tol)));
    }
    let n = system.rows();
    let dual = Dual::new(system);
    if system.eq_mask.iter().all(|&e| e) && rank_deficient(&dual.gram) {
        return Err(Error::Singular(
            "equality-only system with rank-deficient constraint matrix".into(),
        ));
    }
    let norm = spectral_norm(&system.a, 1e-10);
    let lip = 0.5 * norm * norm;
    if lip == 0.0 {
        return Err(Error::Singular("constraint matrix is zero".into()));
    }
    let mut step = 1.0 / lip;
    let mut lambda = DVector::zeros(n);
    let mut momentum_prev = lambda.clone();
    let mut theta = 1.0_f64;
    let certify = |lambda: &DVector<f64>, iterations: usize| -> Option<OracleSolution> {
        let x = dual.primal(lambda);
        let kkt = kkt_check(system, &x, lambda);
        kkt.certifies(cfg.tol).then(|| OracleSolution {
            x,
            lambda: lambda.clone(),
            kkt,
            iterations,
            dual_objective: dual.value(lambda),
        })
    };
    if let Some(sol) = certify(&lambda, 0) {
        return Ok(sol);
    }
    let add_tol = 0.1 * cfg.tol;
    let refine_every = cfg.refine_every.max(1);
    for it in 1..=cfg.max_iters {
        let base = if cfg.accelerated {
            let next_theta = 0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt());
            let y = &lambda + (&lambda - &momentum_prev) * ((theta - 1.0) / next_theta);
            theta = next_theta;
            y
        } else {
            lambda.clone()
        };
        let current = dual.value(&lambda);
        let mut candidate;
        loop {
            candidate = &base + dual.ascent(&base) * step;
            dual.project(&mut candidate);
            // safeguard: never accept a decrease of the dual objective
            if cfg.accelerated || dual.value(&candidate) >= current - 1e-15 * current.abs().max(1.0) || step < 1e-30 {
                break;
            }
            step *= 0.5;
        }
        if cfg.accelerated && dual.value(&candidate) < current {
            // adaptive restart
            theta = 1.0;
            candidate = &lambda + dual.ascent(&lambda) * step;
            dual.project(&mut candidate);
        }
        momentum_prev = std::mem::replace(&mut lambda, candidate);
        if let Some(sol) = certify(&lambda, it) {
            return Ok(sol);
        }
        if it % refine_every == 0 {
            if let Some(refined) = dual.refine(&lambda, add_tol) {
                if let Some(sol) = certify(&refined, it) {
                    return Ok(sol);
                }
            }
        }
    }
    let x = dual.primal(&lambda);
    let residual = kkt_check(system, &x, &lambda).max_residual();
    Err(Error::NotCertified {
        iterations: cfg.max_iters,
        residual,
        x: x.iter().copied().collect(),
        lambda: lambda.iter().copied().collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ci_model::{build_ci_system, ComplexChannel};
    use crate::constellation::ConstellationSpec;
    use num_complex::Complex64;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn e1() -> CiSystem {
        let spec = ConstellationSpec::psk(4).unwrap();
        let h = ComplexChannel::from_rows(&[vec![Complex64::new(1.0, 0.0)]]).unwrap();
        build_ci_system(&h, &[spec.point(0)], &spec, &[1.0], &[1.0]).unwrap()
    }

    #[test]
    fn e1_certificate() {
        let sol = solve_pm_dual(&e1(), 1e-10, 10_000).unwrap();
        assert!((sol.x[0] - FRAC_1_SQRT_2).abs() < 1e-9);
        assert!((sol.x[1] - FRAC_1_SQRT_2).abs() < 1e-9);
        assert!((sol.lambda[0] - 1.0).abs() < 1e-9);
        assert!((sol.lambda[1] - 1.0).abs() < 1e-9);
        assert!(sol.kkt.max_residual() < 1e-8);
    }

    #[test]
    fn zero_thresholds() {
        let sol = solve_pm_dual(&e1().with_scaled_thresholds(0.0), 1e-10, 100).unwrap();
        assert_eq!(sol.x, DVector::zeros(2));
        assert_eq!(sol.lambda, DVector::zeros(2));
    }

    #[test]
    fn kkt_of_zero_point() {
        let sys = e1();
        let rep = kkt_check(&sys, &DVector::zeros(2), &DVector::zeros(2));
        assert_eq!(rep.primal_infeas, 1.0);
        assert_eq!(rep.stationarity, 0.0);
    }

    #[test]
    fn perturbation_shows_in_stationarity() {
        let sys = e1();
        let sol = solve_pm_dual(&sys, 1e-10, 1000).unwrap();
        let mut x = sol.x.clone();
        x[0] += 1e-3;
        let rep = kkt_check(&sys, &x, &sol.lambda);
        assert!((rep.stationarity - 2e-3).abs() < 1e-9);
    }

    #[test]
    fn rejects_tiny_tolerance() {
        assert!(solve_pm_dual(&e1(), 1e-13, 10).is_err());
    }

    #[test]
    fn rank_deficient_equality_only() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 2.0, 2.0]);
        let sys = CiSystem::from_parts(
            a,
            DVector::from_element(2, 1.0),
            vec![true, true],
            vec![1.0],
            vec![1.0],
            "16qam",
        )
        .unwrap();
        assert!(matches!(solve_pm_dual(&sys, 1e-8, 100), Err(Error::Singular(_))));
    }

    #[test]
    fn exhausted_budget_is_an_error() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.999, 0.05]);
        let sys = CiSystem::from_parts(
            a,
            DVector::from_vec(vec![1.0, 2.0]),
            vec![false, false],
            vec![1.0],
            vec![1.0],
            "qpsk",
        )
        .unwrap();
        let cfg = OracleConfig {
            tol: 1e-12,
            max_iters: 2,
            refine_every: 1000,
            accelerated: false,
        };
        match solve_pm_dual_with(&sys, &cfg) {
            Err(Error::NotCertified { x, lambda, .. }) => {
                assert_eq!(x.len(), 2);
                assert_eq!(lambda.len(), 2);
            }
            other => panic!("expected NotCertified, got {other:?}"),
        }
    }
}
