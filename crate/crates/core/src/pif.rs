//! Parallel inverse-free proximal Jacobian ADMM for power-minimization SLP.
//!
//! Solves `min ‖x‖²  s.t.  A x − b = c,  c ∈ 𝒞` where `𝒞` keeps `c_j ≥ 0` on
//! inequality rows and `c_j = 0` on equality rows. One iteration is
//!
//! ```text
//! c⁺   = Π_𝒞(A x − b − λ/ρ)
//! x_i⁺ = (τ x_i + ρ A_iᵀ(−A x + b + c⁺ + λ/ρ)) / (2 + τ)     for every block i
//! λ⁺   = λ + βρ(−A x⁺ + b + c⁺)
//! ```
//!
//! The x-blocks all read the same previous iterate, so the residual
//! `−A x + b + c⁺ + λ/ρ` is formed once and every block only needs its own
//! columns of `A`. With the proximal matrix `P_i = τI − ρA_iᵀA_i` the block
//! system matrix collapses to `(2 + τ)I`, which is why no inversion appears.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::ci_model::{BlockPartition, CiSystem, PartitionStrategy};
use crate::constellation::{ConstellationSpec, ModulationKind};
use crate::error::{Error, Result};
use crate::linalg::{norm_inf, spectral_norm};

/// Relative accuracy of the power iteration behind `‖A‖`.
pub const SPECTRAL_NORM_TOL: f64 = 1e-8;
/// `‖x‖` above `DIVERGENCE_FACTOR · (1 + ‖b‖)` aborts the solve.
pub const DIVERGENCE_FACTOR: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    /// Power minimization under SINR thresholds.
    Pm,
    /// Max-min SINR balancing under a power budget.
    Sb,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pm" => Ok(Mode::Pm),
            "sb" => Ok(Mode::Sb),
            other => Err(Error::param(format!("unknown mode '{other}'"))),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Pm => "pm",
            Mode::Sb => "sb",
        })
    }
}

/// Proximal weight rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Tau {
    /// `τ = factor · ρ · ‖A‖₂²`, resolved per system.
    SpectralScaled(f64),
    Fixed(f64),
}

impl Tau {
    pub fn resolve(&self, a: &DMatrix<f64>, rho: f64) -> f64 {
        match *self {
            Tau::SpectralScaled(f) => {
                let n = spectral_norm(a, SPECTRAL_NORM_TOL);
                f * rho * n * n
            }
            Tau::Fixed(t) => t,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PjAdmmConfig {
    pub rho: f64,
    pub beta: f64,
    pub tau: Tau,
    pub partition: PartitionStrategy,
    pub max_iters: usize,
    /// Stop once `‖xᵗ − xᵗ⁻¹‖ < delta_tol` (ignored when `fixed_iters` is set).
    pub delta_tol: f64,
    /// Run exactly this many iterations.
    pub fixed_iters: Option<usize>,
    /// Evaluate the x-blocks on the rayon pool.
    pub parallel_blocks: bool,
}

impl PjAdmmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(Error::param(format!("rho must be positive, got {}", self.rho)));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::param(format!("beta must be positive, got {}", self.beta)));
        }
        let tau_ok = match self.tau {
            Tau::SpectralScaled(f) => f >= 0.0 && f.is_finite(),
            Tau::Fixed(t) => t >= 0.0 && t.is_finite(),
        };
        if !tau_ok {
            return Err(Error::param(format!("tau must be nonnegative, got {:?}", self.tau)));
        }
        if !(self.delta_tol >= 0.0) {
            return Err(Error::param("delta_tol must be nonnegative"));
        }
        if self.fixed_iters.is_none() && self.max_iters == 0 {
            return Err(Error::param("max_iters must be at least 1"));
        }
        Ok(())
    }
}

impl Default for PjAdmmConfig {
    fn default() -> Self {
        Self {
            rho: 0.06,
            beta: 1.0,
            tau: Tau::SpectralScaled(0.8),
            partition: PartitionStrategy::Contiguous(1),
            max_iters: 1000,
            delta_tol: 1e-6,
            fixed_iters: None,
            parallel_blocks: false,
        }
    }
}

/// Where a default parameter set came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamSource {
    /// Values used in the published experiments for this configuration.
    Published,
    /// Scaled from the 12×16 setting; not a published value.
    Extrapolated,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DefaultConfig {
    pub config: PjAdmmConfig,
    pub rho_source: ParamSource,
}

/// Experiment-protocol parameters for a `K × N_t` scenario.
///
/// Under-loaded systems run a fixed number of iterations (40 for PSK, 150
/// for QAM); fully-loaded ones stop on the iteration decrease `Δ`.
pub fn default_config(
    users: usize,
    antennas: usize,
    modulation: &ConstellationSpec,
    mode: Mode,
) -> DefaultConfig {
    let qam = modulation.kind() == ModulationKind::SquareQam;
    let tabulated = match (users, antennas) {
        (8, 8) => Some(0.3),
        (12, 12) => Some(0.4),
        (12, 16) => Some(0.06),
        (24, 32) => Some(0.03),
        (48, 64) => Some(0.015),
        _ => None,
    };
    let qam_pm_full = qam && mode == Mode::Pm && matches!((users, antennas), (8, 8) | (12, 12));
    let (rho, rho_source) = if qam_pm_full {
        (0.8, ParamSource::Published)
    } else if let Some(r) = tabulated {
        (r, ParamSource::Published)
    } else {
        (
            0.06 * (12.0 * 16.0) / (users.max(1) * antennas.max(1)) as f64,
            ParamSource::Extrapolated,
        )
    };

    let fully_loaded = users >= antennas;
    let (fixed_iters, delta_tol, max_iters) = if !fully_loaded {
        (Some(if qam { 150 } else { 40 }), 0.0, if qam { 150 } else { 40 })
    } else {
        match (qam, mode, users) {
            (false, Mode::Sb, _) => (None, 1e-2, 100),
            (false, Mode::Pm, _) => (None, 1e-6, 4000),
            (true, Mode::Pm, 8) => (None, 1e-7, 4000),
            (true, Mode::Pm, _) => (None, 1e-6, 4000),
            (true, Mode::Sb, 8) => (None, 1e-4, 300),
            (true, Mode::Sb, _) => (None, 1e-3, 300),
        }
    };
    DefaultConfig {
        config: PjAdmmConfig {
            rho,
            beta: 1.0,
            tau: Tau::SpectralScaled(0.8),
            partition: PartitionStrategy::Contiguous(1),
            max_iters,
            delta_tol,
            fixed_iters,
            parallel_blocks: false,
        },
        rho_source,
    }
}

/// Slack projection rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlackRule {
    /// Every row is an inequality; the mask is not consulted.
    Psk,
    /// Rows flagged in the equality mask keep `c_j = 0`.
    Masked,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub x: DVector<f64>,
    pub c: DVector<f64>,
    pub lambda: DVector<f64>,
    pub iter: usize,
    pub delta: f64,
    /// Cached `A x` for the current `x`.
    ax: DVector<f64>,
}

impl SolverState {
    pub fn zeros(system: &CiSystem) -> Self {
        Self {
            x: DVector::zeros(system.cols()),
            c: DVector::zeros(system.rows()),
            lambda: DVector::zeros(system.rows()),
            iter: 0,
            delta: f64::INFINITY,
            ax: DVector::zeros(system.rows()),
        }
    }

    /// State at an arbitrary point, e.g. for testing single updates.
    pub fn at(system: &CiSystem, x: DVector<f64>, c: DVector<f64>, lambda: DVector<f64>) -> Result<Self> {
        if x.len() != system.cols() || c.len() != system.rows() || lambda.len() != system.rows() {
            return Err(Error::dim("state does not match system dimensions"));
        }
        let ax = &system.a * &x;
        Ok(Self {
            x,
            c,
            lambda,
            iter: 0,
            delta: f64::INFINITY,
            ax,
        })
    }

    pub fn ax(&self) -> &DVector<f64> {
        &self.ax
    }

    fn refresh_ax(&mut self, system: &CiSystem) -> u64 {
        self.ax = mat_vec(&system.a, &self.x);
        2 * (system.rows() * system.cols()) as u64
    }

    /// `max{‖2x − Aᵀλ‖∞, ‖A x − b − c‖∞}`.
    pub fn kkt_residual(&self, system: &CiSystem) -> f64 {
        let stat = norm_inf(&(&self.x * 2.0 - system.a.tr_mul(&self.lambda)));
        let prim = norm_inf(&(&self.ax - &system.b - &self.c));
        stat.max(prim)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverReport {
    /// Δ-mode: `Δ < delta_tol` was reached. Fixed-iteration mode: the
    /// prescribed number of iterations completed.
    pub converged: bool,
    pub iters: usize,
    pub final_delta: f64,
    /// `‖x‖²`.
    pub objective: f64,
    pub max_infeasibility: f64,
    pub flop_estimate: u64,
    pub flops_per_iteration: u64,
    pub rho: f64,
    pub tau: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    pub objective: f64,
    pub delta: f64,
    pub max_infeas: f64,
    pub kkt_residual: f64,
}

impl TraceRow {
    pub const CSV_HEADER: &'static str = "iter,objective,delta,maxInfeas,kktResidual";

    pub fn to_csv(&self) -> String {
        format!(
            "{},{:.12e},{:.12e},{:.12e},{:.12e}",
            self.iter, self.objective, self.delta, self.max_infeas, self.kkt_residual
        )
    }
}

#[derive(Debug, Clone)]
pub struct PifSolution {
    pub state: SolverState,
    pub report: SolverReport,
    pub trace: Vec<TraceRow>,
}

fn mat_vec(a: &DMatrix<f64>, x: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(a.nrows());
    for (j, &xj) in x.iter().enumerate() {
        if xj != 0.0 {
            out.axpy(xj, &a.column(j), 1.0);
        }
    }
    out
}

fn project_slack(
    ax: &DVector<f64>,
    system: &CiSystem,
    lambda: &DVector<f64>,
    rho: f64,
    rule: SlackRule,
) -> (DVector<f64>, u64) {
    let rows = system.rows();
    let c = match rule {
        SlackRule::Psk => DVector::from_fn(rows, |j, _| (ax[j] - system.b[j] - lambda[j] / rho).max(0.0)),
        SlackRule::Masked => DVector::from_fn(rows, |j, _| {
            if system.eq_mask[j] {
                0.0
            } else {
                (ax[j] - system.b[j] - lambda[j] / rho).max(0.0)
            }
        }),
    };
    (c, 4 * rows as u64)
}

/// Slack update `c⁺ = Π_𝒞(A x − b − λ/ρ)` using the equality mask.
pub fn update_c(state: &SolverState, system: &CiSystem, rho: f64) -> DVector<f64> {
    project_slack(&state.ax, system, &state.lambda, rho, SlackRule::Masked).0
}

/// Shared residual `−A x + b + c + λ/ρ`.
fn shared_residual(state: &SolverState, system: &CiSystem, c: &DVector<f64>, rho: f64) -> (DVector<f64>, u64) {
    let r = DVector::from_fn(system.rows(), |j, _| {
        -state.ax[j] + system.b[j] + c[j] + state.lambda[j] / rho
    });
    (r, 4 * system.rows() as u64)
}

fn block_update(
    a: &DMatrix<f64>,
    x: &DVector<f64>,
    residual: &DVector<f64>,
    cols: &[usize],
    rho: f64,
    tau: f64,
) -> Vec<f64> {
    cols.iter()
        .map(|&j| (tau * x[j] + rho * a.column(j).dot(residual)) / (2.0 + tau))
        .collect()
}

fn x_update_inner(
    state: &SolverState,
    system: &CiSystem,
    partition: &BlockPartition,
    c: &DVector<f64>,
    rho: f64,
    tau: f64,
    parallel: bool,
) -> (DVector<f64>, u64) {
    let (residual, mut flops) = shared_residual(state, system, c, rho);
    let blocks = partition.blocks();
    let updated: Vec<Vec<f64>> = if parallel {
        blocks
            .par_iter()
            .map(|cols| block_update(&system.a, &state.x, &residual, cols, rho, tau))
            .collect()
    } else {
        blocks
            .iter()
            .map(|cols| block_update(&system.a, &state.x, &residual, cols, rho, tau))
            .collect()
    };
    let mut x = DVector::zeros(system.cols());
    for (cols, vals) in blocks.iter().zip(updated) {
        for (&j, v) in cols.iter().zip(vals) {
            x[j] = v;
        }
    }
    flops += (system.cols() * (2 * system.rows() + 4)) as u64;
    (x, flops)
}

/// Inverse-free Jacobian block update of `x` given the freshly updated `c`.
///
/// Every block reads the same `state.x`; the result does not depend on the
/// partition or on whether blocks run in parallel.
pub fn update_x_blocks(
    state: &SolverState,
    system: &CiSystem,
    partition: &BlockPartition,
    c: &DVector<f64>,
    rho: f64,
    tau: f64,
    parallel: bool,
) -> DVector<f64> {
    x_update_inner(state, system, partition, c, rho, tau, parallel).0
}

/// The same block update evaluated the long way: build
/// `P_i = τI − ρA_iᵀA_i` explicitly and solve
/// `(2I + ρA_iᵀA_i + P_i) x_i = P_i x_i + ρA_iᵀ(−Σ_{j≠i} A_j x_j + b + c + λ/ρ)`
/// with an LU factorization. Used to cross-check the inverse-free algebra.
pub fn update_x_blocks_explicit(
    state: &SolverState,
    system: &CiSystem,
    partition: &BlockPartition,
    c: &DVector<f64>,
    rho: f64,
    tau: f64,
) -> Result<DVector<f64>> {
    let mut x = DVector::zeros(system.cols());
    let full_ax = &system.a * &state.x;
    for i in 0..partition.len() {
        let ai = partition.block_matrix(&system.a, i);
        let xi = partition.block_vector(&state.x, i);
        let n = xi.len();
        let gram = ai.tr_mul(&ai);
        let p = DMatrix::identity(n, n) * tau - &gram * rho;
        let others = &full_ax - &ai * &xi;
        let rhs_vec = -others + &system.b + c + &state.lambda / rho;
        let rhs = &p * &xi + ai.tr_mul(&rhs_vec) * rho;
        let m = DMatrix::identity(n, n) * 2.0 + &gram * rho + &p;
        let sol = m
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Singular(format!("block {i} system matrix")))?;
        for (k, &col) in partition.blocks()[i].iter().enumerate() {
            x[col] = sol[k];
        }
    }
    Ok(x)
}

/// Multiplier update `λ⁺ = λ + βρ(−A x⁺ + b + c⁺)`, where `ax_new = A x⁺`.
/// No sign projection is applied.
pub fn update_lambda(
    lambda: &DVector<f64>,
    ax_new: &DVector<f64>,
    system: &CiSystem,
    c: &DVector<f64>,
    rho: f64,
    beta: f64,
) -> DVector<f64> {
    let step = beta * rho;
    DVector::from_fn(system.rows(), |j, _| {
        lambda[j] + step * (-ax_new[j] + system.b[j] + c[j])
    })
}

/// Resolved per-solve constants.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub partition: BlockPartition,
    pub rho: f64,
    pub beta: f64,
    pub tau: f64,
}

impl Prepared {
    pub fn new(system: &CiSystem, config: &PjAdmmConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            partition: system.partition(config.partition)?,
            rho: config.rho,
            beta: config.beta,
            tau: config.tau.resolve(&system.a, config.rho),
        })
    }
}

/// One full (c, x, λ) iteration in place; returns the flops spent.
pub fn iterate(
    state: &mut SolverState,
    system: &CiSystem,
    prep: &Prepared,
    rule: SlackRule,
    parallel: bool,
) -> Result<u64> {
    let (c, f_c) = project_slack(&state.ax, system, &state.lambda, prep.rho, rule);
    let (x, f_x) = x_update_inner(state, system, &prep.partition, &c, prep.rho, prep.tau, parallel);
    let iteration = state.iter + 1;
    let bound = DIVERGENCE_FACTOR * (1.0 + system.b.norm());
    let xnorm = x.norm();
    if !xnorm.is_finite() {
        return Err(Error::Diverged {
            iteration,
            reason: "non-finite iterate".into(),
        });
    }
    if xnorm > bound {
        return Err(Error::Diverged {
            iteration,
            reason: format!("‖x‖ = {xnorm:.3e} exceeds {bound:.3e}"),
        });
    }
    let delta = (&x - &state.x).norm();
    let f_delta = 3 * system.cols() as u64;
    state.x = x;
    let f_ax = state.refresh_ax(system);
    state.lambda = update_lambda(&state.lambda, &state.ax, system, &c, prep.rho, prep.beta);
    let f_l = 4 * system.rows() as u64;
    state.c = c;
    state.delta = delta;
    state.iter = iteration;
    Ok(f_c + f_x + f_delta + f_ax + f_l)
}

/// Runs PIF-SLP from `x⁰ = c⁰ = λ⁰ = 0`.
pub fn solve_pm(system: &CiSystem, config: &PjAdmmConfig) -> Result<(DVector<f64>, SolverReport)> {
    let sol = solve_pm_with(system, config, SlackRule::Masked, false)?;
    Ok((sol.state.x, sol.report))
}

/// Full-control entry point: choose the slack rule and optionally record a
/// per-iteration trace.
pub fn solve_pm_with(
    system: &CiSystem,
    config: &PjAdmmConfig,
    rule: SlackRule,
    trace: bool,
) -> Result<PifSolution> {
    let prep = Prepared::new(system, config)?;
    let mut state = SolverState::zeros(system);
    let mut rows = Vec::new();
    let mut flops = 0u64;
    let mut per_iter = 0u64;
    let limit = config.fixed_iters.unwrap_or(config.max_iters);
    let mut converged = config.fixed_iters.is_some() && limit == 0;
    while state.iter < limit {
        per_iter = iterate(&mut state, system, &prep, rule, config.parallel_blocks)?;
        flops += per_iter;
        if trace {
            rows.push(TraceRow {
                iter: state.iter,
                objective: state.x.norm_squared(),
                delta: state.delta,
                max_infeas: system.max_infeasibility(&state.x),
                kkt_residual: state.kkt_residual(system),
            });
        }
        if config.fixed_iters.is_none() && state.delta < config.delta_tol {
            converged = true;
            break;
        }
    }
    if config.fixed_iters.is_some() {
        converged = true;
    }
    let report = SolverReport {
        converged,
        iters: state.iter,
        final_delta: state.delta,
        objective: state.x.norm_squared(),
        max_infeasibility: system.max_infeasibility(&state.x),
        flop_estimate: flops,
        flops_per_iteration: per_iter,
        rho: prep.rho,
        tau: prep.tau,
    };
    Ok(PifSolution {
        state,
        report,
        trace: rows,
    })
}

/// Per-iteration flop count predicted by the complexity analysis:
/// `2K + (2K + 1)·2N_t + 2K` (independent of the block count N).
pub fn predicted_flops_per_iteration(users: usize, antennas: usize) -> f64 {
    let k2 = 2.0 * users as f64;
    k2 + (k2 + 1.0) * 2.0 * antennas as f64 + k2
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ci_model::{build_ci_system, ComplexChannel};
    use num_complex::Complex64;
    use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

    fn e1() -> CiSystem {
        let spec = ConstellationSpec::psk(4).unwrap();
        let h = ComplexChannel::from_rows(&[vec![Complex64::new(1.0, 0.0)]]).unwrap();
        build_ci_system(&h, &[spec.point(0)], &spec, &[1.0], &[1.0]).unwrap()
    }

    fn masked_system(mask: Vec<bool>) -> CiSystem {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.5]);
        CiSystem::from_parts(a, DVector::from_element(2, 1.0), mask, vec![1.0], vec![1.0], "test").unwrap()
    }

    #[test]
    fn slack_update_examples() {
        let sys = masked_system(vec![false, true]);
        let state = SolverState::at(
            &sys,
            DVector::from_vec(vec![1.0, 1.0]),
            DVector::zeros(2),
            DVector::zeros(2),
        )
        .unwrap();
        // (Ax)_0 = 2 on an inequality row; (Ax)_1 = 0.5 on an equality row
        let c = update_c(&state, &sys, 1.0);
        assert_eq!(c[0], 1.0);
        assert_eq!(c[1], 0.0);

        let sys = masked_system(vec![false, false]);
        let state = SolverState::at(
            &sys,
            DVector::from_vec(vec![0.25, 0.0]),
            DVector::zeros(2),
            DVector::zeros(2),
        )
        .unwrap();
        // (Ax)_0 = 0.5 < b_0 clamps to zero
        assert_eq!(update_c(&state, &sys, 1.0)[0], 0.0);
    }

    #[test]
    fn first_iteration_by_hand() {
        let sys = e1();
        let cfg = PjAdmmConfig {
            rho: 1.0,
            tau: Tau::Fixed(1.6),
            fixed_iters: Some(1),
            ..PjAdmmConfig::default()
        };
        let prep = Prepared::new(&sys, &cfg).unwrap();
        let mut st = SolverState::zeros(&sys);
        iterate(&mut st, &sys, &prep, SlackRule::Masked, false).unwrap();
        let x1 = SQRT_2 / 3.6;
        assert_eq!(st.c, DVector::zeros(2));
        assert!((st.x[0] - x1).abs() < 1e-15 && (st.x[1] - x1).abs() < 1e-15);
        let l1 = 1.0 - SQRT_2 * x1;
        assert!((st.lambda[0] - l1).abs() < 1e-15);
        assert!((l1 - 0.4444).abs() < 1e-3);
    }

    #[test]
    fn spectral_tau_matches_hand_value() {
        let sys = e1();
        let t = Tau::SpectralScaled(0.8).resolve(&sys.a, 1.0);
        assert!((t - 1.6).abs() < 1e-7);
    }

    #[test]
    fn lambda_update_examples() {
        let sys = e1();
        let lam = DVector::from_vec(vec![0.3, -0.2]);
        let c = DVector::zeros(2);
        // residual zero: A x = b
        let ax = sys.b.clone();
        assert_eq!(update_lambda(&lam, &ax, &sys, &c, 1.0, 1.0), lam);
        let ax = DVector::from_vec(vec![0.5, 2.0]);
        let got = update_lambda(&lam, &ax, &sys, &c, 1.0, 1.0);
        assert_eq!(got, DVector::from_vec(vec![0.8, -1.2]));
    }

    #[test]
    fn zero_tau_single_block_is_well_defined() {
        let sys = e1();
        let st = SolverState::at(
            &sys,
            DVector::from_vec(vec![0.2, 0.1]),
            DVector::zeros(2),
            DVector::from_vec(vec![0.5, 0.5]),
        )
        .unwrap();
        let part = sys.partition(PartitionStrategy::Contiguous(1)).unwrap();
        let c = update_c(&st, &sys, 1.0);
        let x = update_x_blocks(&st, &sys, &part, &c, 1.0, 0.0, false);
        let r = -&sys.a * &st.x + &sys.b + &c + &st.lambda;
        let want = sys.a.tr_mul(&r) / 2.0;
        assert!((x - want).amax() < 1e-15);
    }

    #[test]
    fn kkt_point_is_fixed() {
        let sys = e1();
        let x = DVector::from_vec(vec![FRAC_1_SQRT_2, FRAC_1_SQRT_2]);
        // 2x = Aᵀλ with A = √2 I gives λ = 1; Ax = b so c = 0
        let lam = DVector::from_vec(vec![1.0, 1.0]);
        let st = SolverState::at(&sys, x.clone(), DVector::zeros(2), lam.clone()).unwrap();
        let part = sys.partition(PartitionStrategy::PerScalar).unwrap();
        let c = update_c(&st, &sys, 1.0);
        assert!(c.amax() < 1e-15);
        let xn = update_x_blocks(&st, &sys, &part, &c, 1.0, 1.6, false);
        assert!((&xn - &x).amax() < 1e-15);
        let ln = update_lambda(&lam, &(&sys.a * &xn), &sys, &c, 1.0, 1.0);
        assert!((ln - lam).amax() < 1e-15);
    }

    #[test]
    fn e1_converges_to_analytic_optimum() {
        let sys = e1();
        let cfg = PjAdmmConfig {
            rho: 1.0,
            delta_tol: 1e-12,
            max_iters: 10_000,
            ..PjAdmmConfig::default()
        };
        let (x, rep) = solve_pm(&sys, &cfg).unwrap();
        assert!(rep.converged);
        assert!((rep.objective - 1.0).abs() < 1e-4);
        assert!((x[0] - FRAC_1_SQRT_2).abs() < 1e-4);
    }

    #[test]
    fn zero_thresholds_give_zero() {
        let sys = e1().with_scaled_thresholds(0.0);
        let (x, rep) = solve_pm(&sys, &PjAdmmConfig::default()).unwrap();
        assert_eq!(x, DVector::zeros(2));
        assert_eq!(rep.objective, 0.0);
    }

    #[test]
    fn divergence_is_reported() {
        let sys = e1();
        let cfg = PjAdmmConfig {
            rho: 1e3,
            tau: Tau::Fixed(0.0),
            max_iters: 500,
            ..PjAdmmConfig::default()
        };
        match solve_pm(&sys, &cfg) {
            Err(Error::Diverged { iteration, .. }) => assert!(iteration >= 1),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn config_validation() {
        let bad = PjAdmmConfig {
            rho: 0.0,
            ..PjAdmmConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = PjAdmmConfig {
            tau: Tau::Fixed(-1.0),
            ..PjAdmmConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn default_config_table() {
        let qpsk = ConstellationSpec::psk(4).unwrap();
        let qam = ConstellationSpec::qam(16).unwrap();
        let d = default_config(12, 16, &qpsk, Mode::Sb);
        assert_eq!(d.config.rho, 0.06);
        assert_eq!(d.config.beta, 1.0);
        assert_eq!(d.config.tau, Tau::SpectralScaled(0.8));
        assert_eq!(d.config.fixed_iters, Some(40));
        assert_eq!(d.rho_source, ParamSource::Published);

        let d = default_config(8, 8, &qam, Mode::Pm);
        assert_eq!(d.config.rho, 0.8);
        assert_eq!(d.config.delta_tol, 1e-7);
        assert_eq!(d.config.max_iters, 4000);

        let d = default_config(12, 16, &qam, Mode::Pm);
        assert_eq!(d.config.fixed_iters, Some(150));

        let d = default_config(4, 8, &qpsk, Mode::Pm);
        assert_eq!(d.rho_source, ParamSource::Extrapolated);
        assert!((d.config.rho - 0.36).abs() < 1e-12);

        let d = default_config(8, 8, &qpsk, Mode::Sb);
        assert_eq!((d.config.delta_tol, d.config.max_iters), (1e-2, 100));
        let d = default_config(12, 12, &qam, Mode::Sb);
        assert_eq!((d.config.rho, d.config.delta_tol, d.config.max_iters), (0.4, 1e-3, 300));
    }
}
