//! Monte-Carlo experiments: PM power sweeps, SB BER sweeps and a
//! zero-forcing baseline.
//!
//! A realization is one channel draw carrying a frame of `N_s` symbol
//! slots. Channel, symbols and standardized noise come from the
//! realization's own stream and are shared by all sweep points, so
//! neighbouring points differ only in thresholds or noise level.

pub mod convergence;
pub mod rng;
pub mod scenario;
pub mod zf;

use std::time::Instant;

use nalgebra::DVector;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::ci_model::{build_ci_system, CiSystem, ComplexChannel, FEASIBILITY_TOL};
use crate::constellation::{ConstellationSpec, SymbolFrame};
use crate::duality::{evaluate_balance, pm_to_sb};
use crate::error::{Error, Result};
use crate::oracle::solve_pm_dual_with;
use crate::pif::{solve_pm, Mode, PjAdmmConfig};

pub use convergence::{convergence_csv, run_convergence, ConvergenceRow};
pub use rng::{complex_gaussian, gen_channel, realization_stream, SimRng};
pub use scenario::{Precoder, Scenario, SolverKind};
pub use zf::{zf_baseline, ZfPrecoder};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    /// Worker threads for realizations.
    pub jobs: usize,
    /// Record wall-clock time per sweep point.
    pub timing: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            jobs: 1,
            timing: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    /// γ (PM) or SNR (SB) in dB.
    pub sweep_value: f64,
    pub avg_power: f64,
    pub ber: f64,
    pub avg_mu: f64,
    pub avg_iters: f64,
    pub max_infeas: f64,
    pub avg_max_infeas: f64,
    /// Fraction of slots within `FEASIBILITY_TOL·(1+‖b‖∞)`.
    pub feasible_rate: f64,
    pub bit_errors: u64,
    pub bits: u64,
    pub wall_millis: Option<u128>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub scenario_id: String,
    pub points: Vec<SweepPoint>,
}

impl RunResult {
    pub const CSV_HEADER: &'static str =
        "scenarioId,sweepValue,avgPower,BER,avgMu,avgIters,maxInfeas,wallMillis";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for p in &self.points {
            out.push_str(&format!(
                "{},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{}\n",
                self.scenario_id,
                p.sweep_value,
                p.avg_power,
                p.ber,
                p.avg_mu,
                p.avg_iters,
                p.max_infeas,
                p.wall_millis.map(|m| m.to_string()).unwrap_or_default()
            ));
        }
        out
    }
}

/// One realization's draws.
#[derive(Debug, Clone)]
pub struct Realization {
    pub channel: ComplexChannel,
    pub frame: SymbolFrame,
    /// Standardized `CN(0, 1)` noise, slot-major.
    pub noise: Vec<Complex64>,
}

impl Realization {
    pub fn draw(scenario: &Scenario, index: usize) -> Result<Self> {
        let mut rng = realization_stream(scenario.seed, index as u64);
        let channel = gen_channel(scenario.users, scenario.antennas, &mut rng)?;
        let frame = SymbolFrame::draw(&scenario.modulation, scenario.users, scenario.slots, &mut rng);
        let noise = (0..scenario.users * scenario.slots)
            .map(|_| complex_gaussian(&mut rng, 1.0))
            .collect();
        Ok(Self {
            channel,
            frame,
            noise,
        })
    }

    pub fn slot_noise(&self, slot: usize) -> &[Complex64] {
        let k = self.frame.users();
        &self.noise[slot * k..(slot + 1) * k]
    }
}

/// Stacked real vector `[Re x̃; Im x̃]` → complex transmit vector.
pub fn to_complex(x: &DVector<f64>) -> Vec<Complex64> {
    let n = x.len() / 2;
    (0..n).map(|i| Complex64::new(x[i], x[i + n])).collect()
}

/// dB → linear; `-inf` maps to 0.
pub fn db_to_linear(db: f64) -> f64 {
    if db == f64::NEG_INFINITY {
        0.0
    } else {
        10f64.powf(db / 10.0)
    }
}

/// Solution of one PM instance.
#[derive(Debug, Clone)]
pub struct PmSolve {
    pub x: DVector<f64>,
    pub iters: usize,
}

pub fn solve_pm_instance(system: &CiSystem, scenario: &Scenario, cfg: &PjAdmmConfig) -> Result<PmSolve> {
    match scenario.solver {
        SolverKind::Pif => {
            let (x, report) = solve_pm(system, cfg)?;
            Ok(PmSolve {
                x,
                iters: report.iters,
            })
        }
        SolverKind::Oracle => {
            let sol = solve_pm_dual_with(system, &scenario.oracle_config())?;
            Ok(PmSolve {
                x: sol.x,
                iters: sol.iterations,
            })
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct SlotRecord {
    power: f64,
    mu: f64,
    iters: usize,
    max_infeas: f64,
    feasible: bool,
    bit_errors: u64,
    bits: u64,
}

/// Detects each user's received sample after dividing by its known
/// amplitude scale; returns bit errors.
fn count_errors(
    spec: &ConstellationSpec,
    sent: &[usize],
    received: &[Complex64],
    scale: impl Fn(usize) -> f64,
) -> u64 {
    sent.iter()
        .zip(received)
        .enumerate()
        .map(|(k, (&s, &y))| {
            let g = scale(k);
            let y = if g > 0.0 { y / g } else { y };
            spec.bit_errors(s, spec.detect(y)) as u64
        })
        .sum()
}

fn transmit(channel: &ComplexChannel, x: &[Complex64], noise: &[Complex64], sigma: f64) -> Vec<Complex64> {
    channel
        .receive(x)
        .into_iter()
        .zip(noise)
        .map(|(y, z)| y + z * sigma)
        .collect()
}

/// CI system of one slot at linear sweep level `level` (γ for PM with
/// unit noise, SNR for SB with unit weights).
pub fn slot_system(scenario: &Scenario, real: &Realization, slot: usize, level: f64) -> Result<CiSystem> {
    let spec = &scenario.modulation;
    let k = scenario.users;
    if slot >= real.frame.slots() {
        return Err(Error::param(format!("slot {slot} out of range")));
    }
    let symbols = real.frame.symbols(spec, slot);
    match scenario.mode {
        Mode::Pm if level > 0.0 => build_ci_system(&real.channel, &symbols, spec, &vec![level; k], &vec![1.0; k]),
        Mode::Pm => Ok(
            build_ci_system(&real.channel, &symbols, spec, &vec![1.0; k], &vec![1.0; k])?.with_scaled_thresholds(0.0),
        ),
        Mode::Sb => {
            let sigma = (scenario.budget / level).sqrt();
            build_ci_system(&real.channel, &symbols, spec, &vec![1.0; k], &vec![sigma; k])
        }
    }
}

fn pm_slot(
    scenario: &Scenario,
    cfg: &PjAdmmConfig,
    real: &Realization,
    slot: usize,
    gamma: f64,
) -> Result<SlotRecord> {
    let spec = &scenario.modulation;
    let k = scenario.users;
    let system = slot_system(scenario, real, slot, gamma)?;
    let sol = solve_pm_instance(&system, scenario, cfg)?;
    let max_infeas = system.max_infeasibility(&sol.x);
    let b_inf = system.b.amax();
    let mu = if b_inf > 0.0 {
        evaluate_balance(&system, &sol.x)?.mu
    } else {
        f64::NAN
    };
    let y = transmit(&real.channel, &to_complex(&sol.x), real.slot_noise(slot), 1.0);
    let thr = gamma.sqrt();
    Ok(SlotRecord {
        power: sol.x.norm_squared(),
        mu,
        iters: sol.iters,
        max_infeas,
        feasible: max_infeas <= FEASIBILITY_TOL * (1.0 + b_inf),
        bit_errors: count_errors(spec, real.frame.slot(slot), &y, |_| thr),
        bits: (k as u64) * spec.bits_per_symbol() as u64,
    })
}

fn sb_slot(
    scenario: &Scenario,
    cfg: &PjAdmmConfig,
    real: &Realization,
    slot: usize,
    snr: f64,
) -> Result<SlotRecord> {
    let spec = &scenario.modulation;
    let k = scenario.users;
    let p = scenario.budget;
    let sigma = (p / snr).sqrt();
    let symbols = real.frame.symbols(spec, slot);
    let noise = real.slot_noise(slot);
    let bits = (k as u64) * spec.bits_per_symbol() as u64;
    match scenario.precoder {
        Precoder::Slp => {
            let system = slot_system(scenario, real, slot, snr)?;
            let sol = solve_pm_instance(&system, scenario, cfg)?;
            let max_infeas = system.max_infeasibility(&sol.x);
            let sb = pm_to_sb(&sol.x, sol.x.norm_squared(), p)?;
            let y = transmit(&real.channel, &to_complex(&sb.x), noise, sigma);
            let gain = sb.mu * sigma;
            Ok(SlotRecord {
                power: sb.power_used,
                mu: sb.mu,
                iters: sol.iters,
                max_infeas,
                feasible: max_infeas <= FEASIBILITY_TOL * (1.0 + system.b.amax()),
                bit_errors: count_errors(spec, real.frame.slot(slot), &y, |_| gain),
                bits,
            })
        }
        Precoder::ZeroForcing => {
            let zf = zf_baseline(&real.channel, &symbols, p)?;
            let y = transmit(&real.channel, &zf.x, noise, sigma);
            Ok(SlotRecord {
                power: zf.x.iter().map(|v| v.norm_sqr()).sum(),
                mu: zf.scale / sigma,
                iters: 0,
                max_infeas: 0.0,
                feasible: true,
                bit_errors: count_errors(spec, real.frame.slot(slot), &y, |_| zf.scale),
                bits,
            })
        }
    }
}

fn run_sweep(scenario: &Scenario, opts: RunOptions, mode: Mode) -> Result<RunResult> {
    scenario.validate()?;
    if scenario.mode != mode {
        return Err(Error::param(format!(
            "scenario '{}' is a {} scenario",
            scenario.id, scenario.mode
        )));
    }
    let cfg = scenario.solver_config()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs.max(1))
        .build()
        .map_err(|e| Error::param(format!("cannot build thread pool: {e}")))?;

    let mut points = Vec::with_capacity(scenario.sweep.len());
    for &value in &scenario.sweep {
        let start = Instant::now();
        let level = db_to_linear(value);
        let per_real: Vec<Result<Vec<SlotRecord>>> = pool.install(|| {
            (0..scenario.channels)
                .into_par_iter()
                .map(|c| {
                    let real = Realization::draw(scenario, c)?;
                    (0..scenario.slots)
                        .map(|s| match mode {
                            Mode::Pm => pm_slot(scenario, &cfg, &real, s, level),
                            Mode::Sb => sb_slot(scenario, &cfg, &real, s, level),
                        })
                        .collect::<Result<Vec<_>>>()
                        .map_err(|e| e.context(format!("realization {c}")))
                })
                .collect()
        });

        let n = (scenario.channels * scenario.slots) as f64;
        let mut acc = SweepPoint {
            sweep_value: value,
            avg_power: 0.0,
            ber: 0.0,
            avg_mu: 0.0,
            avg_iters: 0.0,
            max_infeas: 0.0,
            avg_max_infeas: 0.0,
            feasible_rate: 0.0,
            bit_errors: 0,
            bits: 0,
            wall_millis: None,
        };
        for records in per_real {
            let records = records.map_err(|e| {
                e.context(format!("scenario '{}' at sweep value {value} dB", scenario.id))
            })?;
            for r in records {
                acc.avg_power += r.power;
                acc.avg_mu += r.mu;
                acc.avg_iters += r.iters as f64;
                acc.max_infeas = acc.max_infeas.max(r.max_infeas);
                acc.avg_max_infeas += r.max_infeas;
                acc.feasible_rate += if r.feasible { 1.0 } else { 0.0 };
                acc.bit_errors += r.bit_errors;
                acc.bits += r.bits;
            }
        }
        acc.avg_power /= n;
        acc.avg_mu /= n;
        acc.avg_iters /= n;
        acc.avg_max_infeas /= n;
        acc.feasible_rate /= n;
        acc.ber = acc.bit_errors as f64 / acc.bits as f64;
        if opts.timing {
            acc.wall_millis = Some(start.elapsed().as_millis());
        }
        points.push(acc);
    }
    Ok(RunResult {
        scenario_id: scenario.id.clone(),
        points,
    })
}

/// Average transmit power versus SINR threshold with unit noise
/// (`σ_k = 1`, `γ_k = γ`).
pub fn run_pm_sweep(scenario: &Scenario, opts: RunOptions) -> Result<RunResult> {
    run_sweep(scenario, opts, Mode::Pm)
}

/// BER versus SNR `= p/σ²` with unit weights: solve PM with `b = σ`,
/// scale to the budget, transmit and detect.
pub fn run_sb_sweep(scenario: &Scenario, opts: RunOptions) -> Result<RunResult> {
    run_sweep(scenario, opts, Mode::Sb)
}
