//! Average power and BER versus iteration count.

use rayon::prelude::*;

use super::{count_errors, db_to_linear, slot_system, to_complex, transmit, Realization, RunOptions, Scenario};
use crate::error::{Error, Result};
use crate::pif::{iterate, Mode, Prepared, SlackRule, SolverState};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub iter: usize,
    /// PM: `‖xᵗ‖²`; SB: power after scaling to the budget.
    pub avg_power: f64,
    pub ber: f64,
    pub avg_delta: f64,
    pub max_infeas: f64,
}

impl ConvergenceRow {
    pub const CSV_HEADER: &'static str = "iter,avgPower,BER,avgDelta,maxInfeas";

    pub fn to_csv(&self) -> String {
        format!(
            "{},{:.12e},{:.12e},{:.12e},{:.12e}",
            self.iter, self.avg_power, self.ber, self.avg_delta, self.max_infeas
        )
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct IterStats {
    power: f64,
    errors: u64,
    bits: u64,
    delta: f64,
    max_infeas: f64,
}

/// Runs the ADMM solver for a fixed number of iterations on every slot at
/// the scenario's first sweep value and reports per-iteration averages.
///
/// The iteration count is the configured fixed count, or `max_iters` in Δ
/// mode (no early stop, so all slots contribute to every row).
pub fn run_convergence(scenario: &Scenario, opts: RunOptions) -> Result<Vec<ConvergenceRow>> {
    scenario.validate()?;
    let cfg = scenario.solver_config()?;
    let iters = cfg.fixed_iters.unwrap_or(cfg.max_iters);
    let value = scenario.sweep[0];
    let level = db_to_linear(value);
    let spec = &scenario.modulation;
    let k = scenario.users;
    let bits = (k as u64) * spec.bits_per_symbol() as u64;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs.max(1))
        .build()
        .map_err(|e| Error::param(format!("cannot build thread pool: {e}")))?;

    let per_real: Vec<Result<Vec<IterStats>>> = pool.install(|| {
        (0..scenario.channels)
            .into_par_iter()
            .map(|c| -> Result<Vec<IterStats>> {
                let real = Realization::draw(scenario, c)?;
                let mut stats = vec![IterStats::default(); iters];
                for slot in 0..scenario.slots {
                    let (gamma, sigma) = match scenario.mode {
                        Mode::Pm => (level, 1.0),
                        Mode::Sb => (1.0, (scenario.budget / level).sqrt()),
                    };
                    let system = slot_system(scenario, &real, slot, level)?;
                    let prep = Prepared::new(&system, &cfg)?;
                    let mut state = SolverState::zeros(&system);
                    for st in stats.iter_mut() {
                        iterate(&mut state, &system, &prep, SlackRule::Masked, cfg.parallel_blocks)
                            .map_err(|e| e.context(format!("realization {c}, slot {slot}")))?;
                        let p = state.x.norm_squared();
                        let (x, gain, power) = match scenario.mode {
                            Mode::Pm => (to_complex(&state.x), gamma.sqrt(), p),
                            Mode::Sb if p > 0.0 => {
                                let s = (scenario.budget / p).sqrt();
                                (to_complex(&(&state.x * s)), s * sigma, scenario.budget)
                            }
                            Mode::Sb => (to_complex(&state.x), 0.0, 0.0),
                        };
                        let y = transmit(&real.channel, &x, real.slot_noise(slot), sigma);
                        st.power += power;
                        st.errors += count_errors(spec, real.frame.slot(slot), &y, |_| gain);
                        st.bits += bits;
                        st.delta += state.delta;
                        st.max_infeas = st.max_infeas.max(system.max_infeasibility(&state.x));
                    }
                }
                Ok(stats)
            })
            .collect()
    });

    let n = (scenario.channels * scenario.slots) as f64;
    let mut total = vec![IterStats::default(); iters];
    for stats in per_real {
        let stats = stats.map_err(|e| e.context(format!("scenario '{}'", scenario.id)))?;
        for (t, s) in total.iter_mut().zip(stats) {
            t.power += s.power;
            t.errors += s.errors;
            t.bits += s.bits;
            t.delta += s.delta;
            t.max_infeas = t.max_infeas.max(s.max_infeas);
        }
    }
    Ok(total
        .into_iter()
        .enumerate()
        .map(|(i, t)| ConvergenceRow {
            iter: i + 1,
            avg_power: t.power / n,
            ber: t.errors as f64 / t.bits as f64,
            avg_delta: t.delta / n,
            max_infeas: t.max_infeas,
        })
        .collect())
}

pub fn convergence_csv(rows: &[ConvergenceRow]) -> String {
    let mut out = String::from(ConvergenceRow::CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.to_csv());
        out.push('\n');
    }
    out
}
