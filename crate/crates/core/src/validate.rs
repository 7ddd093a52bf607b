//! Self-contained invariant suite.
//!
//! Every check builds its own small instances from fixed seeds, so the
//! suite is deterministic and runs in a few seconds.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;

use crate::ci_model::{build_ci_system, CiSystem, ComplexChannel, PartitionStrategy};
use crate::constellation::{ConstellationSpec, Dof, SymbolFrame};
use crate::duality::{bisection_sb, evaluate_balance, pm_to_sb, sb_to_pm, DEFAULT_TOL_MU};
use crate::error::Result;
use crate::oracle::{solve_pm_dual, solve_pm_dual_with, OracleConfig};
use crate::pif::{
    iterate, solve_pm, solve_pm_with, update_c, update_x_blocks, update_x_blocks_explicit,
    PjAdmmConfig, Prepared, SlackRule, SolverState,
};
use crate::sim::{
    gen_channel, realization_stream, run_pm_sweep, run_sb_sweep, to_complex, zf_baseline,
    RunOptions, Scenario, SimRng,
};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl std::fmt::Display for Check {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}: {}", self.name, self.detail)
    }
}

type Outcome = Result<(bool, String)>;

const SUITE: &[(&str, fn() -> Outcome)] = &[
    ("constellation.points", constellation_points),
    ("constellation.gray", constellation_gray),
    ("constellation.qam_dof", constellation_qam_dof),
    ("ci_model.psk_rows_match_complex_form", psk_rows_match_complex_form),
    ("ci_model.phase_invariance", phase_invariance),
    ("ci_model.antenna_blocks_orthogonal", antenna_blocks_orthogonal),
    ("ci_model.fixture_round_trip", fixture_round_trip),
    ("pif.e1_optimum", pif_e1_optimum),
    ("pif.converges_to_oracle", pif_converges_to_oracle),
    ("pif.inverse_free_matches_explicit", inverse_free_matches_explicit),
    ("pif.partition_and_parallel_identical", partition_and_parallel_identical),
    ("pif.psk_and_masked_paths_identical", psk_and_masked_paths_identical),
    ("pif.threshold_scale_covariance", pif_scale_covariance),
    ("pif.qam_equality_rows", pif_qam_equality_rows),
    ("oracle.kkt_certificates", oracle_certificates),
    ("oracle.scaling_laws", oracle_scaling_laws),
    ("duality.scaling_round_trip", duality_round_trip),
    ("duality.bisection_matches_closed_form", bisection_matches_closed_form),
    ("sim.channel_statistics", channel_statistics),
    ("sim.zero_forcing", zero_forcing),
    ("sim.deterministic_across_jobs", deterministic_across_jobs),
    ("sim.pm_power_scales_with_gamma", pm_power_scales_with_gamma),
    ("sim.noiseless_detection", noiseless_detection),
];

/// Runs every check; errors count as failures.
pub fn run_invariant_suite() -> Vec<Check> {
    SUITE
        .iter()
        .map(|&(name, f)| match f() {
            Ok((passed, detail)) => Check {
                name,
                passed,
                detail,
            },
            Err(e) => Check {
                name,
                passed: false,
                detail: format!("error: {e}"),
            },
        })
        .collect()
}

fn random_system(spec: &ConstellationSpec, users: usize, antennas: usize, rng: &mut SimRng) -> Result<CiSystem> {
    let h = gen_channel(users, antennas, rng)?;
    let frame = SymbolFrame::draw(spec, users, 1, rng);
    build_ci_system(&h, &frame.symbols(spec, 0), spec, &vec![10.0; users], &vec![1.0; users])
}

fn qpsk() -> ConstellationSpec {
    ConstellationSpec::psk(4).expect("qpsk")
}

fn qam16() -> ConstellationSpec {
    ConstellationSpec::qam(16).expect("16qam")
}

fn tight_pif() -> PjAdmmConfig {
    PjAdmmConfig {
        rho: 0.3,
        fixed_iters: None,
        delta_tol: 1e-10,
        max_iters: 200_000,
        ..PjAdmmConfig::default()
    }
}

fn constellation_points() -> Outcome {
    let q = qpsk();
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let ok_q = (q.point(0) - Complex64::new(s, s)).norm() < 1e-15;
    let m = qam16();
    let energy: f64 = m.points().iter().map(|p| p.norm_sqr()).sum::<f64>() / 16.0;
    let ok_m = (energy - 1.0).abs() < 1e-12 && (m.max_amp() - 3.0 / 10f64.sqrt()).abs() < 1e-15;
    Ok((ok_q && ok_m, format!("16QAM mean energy {energy:.15}")))
}

fn constellation_gray() -> Outcome {
    let mut worst = 0;
    for spec in [ConstellationSpec::psk(8)?, qam16()] {
        let pts = spec.points();
        let dmin = (0..pts.len())
            .flat_map(|i| (0..pts.len()).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| (pts[i] - pts[j]).norm())
            .fold(f64::INFINITY, f64::min);
        for i in 0..pts.len() {
            for j in 0..pts.len() {
                if i != j && (pts[i] - pts[j]).norm() < dmin * (1.0 + 1e-9) {
                    worst = worst.max(spec.bit_errors(i, j));
                }
            }
        }
    }
    Ok((worst == 1, format!("max Hamming distance between neighbours {worst}")))
}

fn constellation_qam_dof() -> Outcome {
    let m = qam16();
    let mut inner = 0;
    for &p in m.points() {
        if m.ci_dof(p)? == (Dof::Equality, Dof::Equality) {
            inner += 1;
        }
    }
    Ok((inner == 4, format!("{inner} fully-pinned points")))
}

fn psk_rows_match_complex_form() -> Outcome {
    let mut rng = realization_stream(11, 0);
    let spec = ConstellationSpec::psk(8)?;
    let mut worst = 0.0_f64;
    let cot = 1.0 / (std::f64::consts::PI / 8.0).tan();
    for _ in 0..10 {
        let h = gen_channel(3, 4, &mut rng)?;
        let frame = SymbolFrame::draw(&spec, 3, 1, &mut rng);
        let s = frame.symbols(&spec, 0);
        let sys = build_ci_system(&h, &s, &spec, &[1.0; 3], &[1.0; 3])?;
        let x = DVector::from_fn(8, |_, _| rng.random_range(-1.0..1.0));
        let ax = &sys.a * &x;
        let y = h.receive(&to_complex(&x));
        for k in 0..3 {
            let r = y[k] / s[k];
            worst = worst
                .max((ax[2 * k] - (r.re - r.im * cot)).abs())
                .max((ax[2 * k + 1] - (r.re + r.im * cot)).abs());
        }
    }
    Ok((worst < 1e-12, format!("max deviation {worst:.2e}")))
}

fn phase_invariance() -> Outcome {
    let mut rng = realization_stream(12, 0);
    let spec = qpsk();
    let h = gen_channel(3, 5, &mut rng)?;
    let frame = SymbolFrame::draw(&spec, 3, 1, &mut rng);
    let s = frame.symbols(&spec, 0);
    let base = build_ci_system(&h, &s, &spec, &[1.0; 3], &[1.0; 3])?;
    let phase = Complex64::from_polar(1.0, 0.7);
    let rotated = ComplexChannel::new(h.matrix().map(|v| v * phase))?;
    let rot = build_ci_system(&rotated, &s, &spec, &[1.0; 3], &[1.0; 3])?;
    let p0 = solve_pm_dual(&base, 1e-10, 200_000)?.objective();
    let p1 = solve_pm_dual(&rot, 1e-10, 200_000)?.objective();
    let rel = (p0 - p1).abs() / p0;
    Ok((rel < 1e-8, format!("relative power change {rel:.2e}")))
}

fn antenna_blocks_orthogonal() -> Outcome {
    let mut rng = realization_stream(13, 0);
    let sys = random_system(&qpsk(), 4, 6, &mut rng)?;
    let part = sys.partition(PartitionStrategy::PerAntenna)?;
    let mut worst = 0.0_f64;
    for i in 0..part.len() {
        let ai = part.block_matrix(&sys.a, i);
        let g = ai.tr_mul(&ai);
        worst = worst.max(g[(0, 1)].abs()).max((g[(0, 0)] - g[(1, 1)]).abs());
    }
    Ok((worst < 1e-12, format!("max off-diagonal / diagonal mismatch {worst:.2e}")))
}

fn fixture_round_trip() -> Outcome {
    let mut rng = realization_stream(14, 0);
    let sys = random_system(&qam16(), 3, 4, &mut rng)?;
    let back = CiSystem::from_text(&sys.to_text())?;
    let same = back.a == sys.a && back.b == sys.b && back.eq_mask == sys.eq_mask;
    Ok((same, "text fixture reproduces A, b and the equality mask".into()))
}

fn pif_e1_optimum() -> Outcome {
    let spec = qpsk();
    let h = ComplexChannel::from_rows(&[vec![Complex64::new(1.0, 0.0)]])?;
    let sys = build_ci_system(&h, &[spec.point(0)], &spec, &[1.0], &[1.0])?;
    let cfg = PjAdmmConfig {
        rho: 1.0,
        delta_tol: 1e-12,
        max_iters: 100_000,
        ..PjAdmmConfig::default()
    };
    let (_, report) = solve_pm(&sys, &cfg)?;
    let err = (report.objective - 1.0).abs();
    Ok((err < 1e-4, format!("objective {:.9} after {} iterations", report.objective, report.iters)))
}

fn pif_converges_to_oracle() -> Outcome {
    let mut rng = realization_stream(15, 0);
    let mut worst = 0.0_f64;
    for spec in [qpsk(), qam16()] {
        for _ in 0..3 {
            let sys = random_system(&spec, 4, 8, &mut rng)?;
            let p_star = solve_pm_dual(&sys, 1e-10, 200_000)?.objective();
            let (x, _) = solve_pm(&sys, &tight_pif())?;
            let gap = (x.norm_squared() - p_star).abs() / p_star;
            let infeas = sys.max_infeasibility(&x) / (1.0 + sys.b.amax());
            worst = worst.max(gap).max(infeas);
        }
    }
    Ok((worst < 1e-4, format!("worst relative gap / infeasibility {worst:.2e}")))
}

fn inverse_free_matches_explicit() -> Outcome {
    let mut rng = realization_stream(16, 0);
    let mut worst = 0.0_f64;
    for strategy in [
        PartitionStrategy::PerScalar,
        PartitionStrategy::PerAntenna,
        PartitionStrategy::Contiguous(3),
    ] {
        let sys = random_system(&qam16(), 3, 6, &mut rng)?;
        let cfg = PjAdmmConfig {
            partition: strategy,
            ..PjAdmmConfig::default()
        };
        let prep = Prepared::new(&sys, &cfg)?;
        let mut state = SolverState::zeros(&sys);
        for _ in 0..5 {
            let c = update_c(&state, &sys, prep.rho);
            let fast = update_x_blocks(&state, &sys, &prep.partition, &c, prep.rho, prep.tau, false);
            let slow = update_x_blocks_explicit(&state, &sys, &prep.partition, &c, prep.rho, prep.tau)?;
            worst = worst.max((fast - slow).amax());
            iterate(&mut state, &sys, &prep, SlackRule::Masked, false)?;
        }
    }
    Ok((worst < 1e-10, format!("max difference {worst:.2e}")))
}

fn partition_and_parallel_identical() -> Outcome {
    let mut rng = realization_stream(17, 0);
    let sys = random_system(&qam16(), 4, 8, &mut rng)?;
    let base = PjAdmmConfig {
        fixed_iters: Some(60),
        ..PjAdmmConfig::default()
    };
    let (x0, _) = solve_pm(&sys, &base)?;
    let mut identical = true;
    for (partition, parallel) in [
        (PartitionStrategy::PerScalar, true),
        (PartitionStrategy::PerAntenna, false),
        (PartitionStrategy::PerAntenna, true),
        (PartitionStrategy::Contiguous(4), true),
    ] {
        let cfg = PjAdmmConfig {
            partition,
            parallel_blocks: parallel,
            ..base.clone()
        };
        identical &= solve_pm(&sys, &cfg)?.0 == x0;
    }
    Ok((identical, "iterates bit-identical across partitions and thread use".into()))
}

fn psk_and_masked_paths_identical() -> Outcome {
    let mut rng = realization_stream(18, 0);
    let mut identical = true;
    let cfg = PjAdmmConfig {
        fixed_iters: Some(40),
        ..PjAdmmConfig::default()
    };
    for _ in 0..5 {
        let sys = random_system(&qpsk(), 4, 8, &mut rng)?;
        let a = solve_pm_with(&sys, &cfg, SlackRule::Psk, false)?;
        let b = solve_pm_with(&sys, &cfg, SlackRule::Masked, false)?;
        identical &= a.state.x == b.state.x && a.state.lambda == b.state.lambda;
    }
    Ok((identical, "QPSK through both slack rules".into()))
}

fn pif_scale_covariance() -> Outcome {
    let mut rng = realization_stream(19, 0);
    let sys = random_system(&qam16(), 4, 8, &mut rng)?;
    let cfg = PjAdmmConfig {
        fixed_iters: Some(80),
        ..PjAdmmConfig::default()
    };
    let (x1, _) = solve_pm(&sys, &cfg)?;
    let (x2, _) = solve_pm(&sys.with_scaled_thresholds(4.0), &cfg)?;
    let dev = (x2 - &x1 * 4.0).amax() / (1.0 + x1.amax());
    Ok((dev < 1e-9, format!("max deviation {dev:.2e}")))
}

fn pif_qam_equality_rows() -> Outcome {
    let mut rng = realization_stream(20, 0);
    let mut worst = 0.0_f64;
    let mut slots = 0;
    while slots < 3 {
        let sys = random_system(&qam16(), 4, 8, &mut rng)?;
        if !sys.has_equality_rows() {
            continue;
        }
        slots += 1;
        let (x, _) = solve_pm(&sys, &tight_pif())?;
        let ax = &sys.a * &x;
        for i in (0..sys.rows()).filter(|&i| sys.eq_mask[i]) {
            worst = worst.max((ax[i] - sys.b[i]).abs());
        }
    }
    Ok((worst < 1e-3, format!("max equality-row deviation {worst:.2e}")))
}

fn oracle_certificates() -> Outcome {
    let mut rng = realization_stream(21, 0);
    let mut worst = 0.0_f64;
    for spec in [qpsk(), qam16()] {
        for _ in 0..5 {
            let sys = random_system(&spec, 4, 8, &mut rng)?;
            worst = worst.max(solve_pm_dual(&sys, 1e-9, 200_000)?.kkt.max_residual());
        }
    }
    Ok((worst < 1e-8, format!("worst KKT residual {worst:.2e}")))
}

fn oracle_scaling_laws() -> Outcome {
    let mut rng = realization_stream(22, 0);
    let cfg = OracleConfig {
        tol: 1e-11,
        ..OracleConfig::default()
    };
    let mut worst = 0.0_f64;
    for _ in 0..3 {
        let sys = random_system(&qam16(), 4, 8, &mut rng)?;
        let base = solve_pm_dual_with(&sys, &cfg)?;
        for alpha in [0.5, 2.0, 10.0] {
            let scaled = solve_pm_dual_with(&sys.with_scaled_thresholds(alpha), &cfg)?;
            let dx = (&scaled.x - &base.x * alpha).norm() / (1.0 + base.x.norm());
            let dp = (scaled.objective() - alpha * alpha * base.objective()).abs() / (1.0 + base.objective());
            worst = worst.max(dx / alpha.max(1.0)).max(dp / (alpha * alpha).max(1.0));
        }
    }
    Ok((worst < 1e-6, format!("worst normalized deviation {worst:.2e}")))
}

fn duality_round_trip() -> Outcome {
    let mut rng = realization_stream(23, 0);
    let sys = random_system(&qpsk(), 4, 8, &mut rng)?;
    let pm = solve_pm_dual(&sys, 1e-10, 200_000)?;
    let p_pm = pm.objective();
    let sb = pm_to_sb(&pm.x, p_pm, 1.0)?;
    let (x_back, p_back) = sb_to_pm(&sb.x, sb.mu, 1.0)?;
    let bal = evaluate_balance(&sys, &sb.x)?;
    let err = (x_back - &pm.x)
        .amax()
        .max((p_back - p_pm).abs())
        .max((sb.mu - (1.0 / p_pm).sqrt()).abs())
        .max((bal.mu - sb.mu).abs() / sb.mu);
    Ok((err < 1e-7, format!("max error {err:.2e}")))
}

fn bisection_matches_closed_form() -> Outcome {
    let mut rng = realization_stream(24, 0);
    let mut worst = 0.0_f64;
    for spec in [qpsk(), qam16()] {
        for _ in 0..2 {
            let sys = random_system(&spec, 4, 8, &mut rng)?;
            let p_pm = solve_pm_dual(&sys, 1e-10, 200_000)?.objective();
            let out = bisection_sb(
                &sys,
                1.0,
                |s| {
                    let sol = solve_pm_dual(s, 1e-10, 200_000)?;
                    let p = sol.objective();
                    Ok((sol.x, p))
                },
                DEFAULT_TOL_MU,
            )?;
            worst = worst.max((out.alpha() - (1.0 / p_pm).sqrt()).abs());
        }
    }
    Ok((worst < 1e-3, format!("worst |α_bisection − √(1/p_PM)| {worst:.2e}")))
}

fn channel_statistics() -> Outcome {
    let mut rng = realization_stream(25, 0);
    let h = gen_channel(100, 500, &mut rng)?;
    let n = (100 * 500) as f64;
    let mean_pow: f64 = h.matrix().iter().map(|v| v.norm_sqr()).sum::<f64>() / n;
    let re_var: f64 = h.matrix().iter().map(|v| v.re * v.re).sum::<f64>() / n;
    let ok = (mean_pow - 1.0).abs() < 0.02 && (re_var - 0.5).abs() < 0.02;
    Ok((ok, format!("E|h|² = {mean_pow:.4}, var Re h = {re_var:.4}")))
}

fn zero_forcing() -> Outcome {
    let mut rng = realization_stream(26, 0);
    let h = gen_channel(4, 8, &mut rng)?;
    let spec = qam16();
    let s = SymbolFrame::draw(&spec, 4, 1, &mut rng).symbols(&spec, 0);
    let zf = zf_baseline(&h, &s, 1.0)?;
    let p: f64 = zf.x.iter().map(|v| v.norm_sqr()).sum();
    let y = h.receive(&zf.x);
    let err = (0..4).map(|k| (y[k] / zf.scale - s[k]).norm()).fold(0.0, f64::max);
    Ok((err < 1e-10 && (p - 1.0).abs() < 1e-12, format!("receive error {err:.2e}, power {p:.15}")))
}

const SMALL_PM: &str = "id=v\nK=3\nNt=6\nmodulation=16qam\nmode=pm\nsweep=4,10\nchannels=6\nslots=3\nseed=5\n";
const SMALL_SB: &str = "id=v\nK=3\nNt=6\nmodulation=qpsk\nmode=sb\nsweep=0,8\nchannels=6\nslots=3\nseed=5\n";

fn deterministic_across_jobs() -> Outcome {
    let mut same = true;
    for text in [SMALL_PM, SMALL_SB] {
        let s = Scenario::parse(text)?;
        let run = |jobs| -> Result<String> {
            let opts = RunOptions { jobs, timing: false };
            Ok(match s.mode {
                crate::pif::Mode::Pm => run_pm_sweep(&s, opts)?,
                crate::pif::Mode::Sb => run_sb_sweep(&s, opts)?,
            }
            .to_csv())
        };
        same &= run(1)? == run(4)?;
    }
    Ok((same, "CSV identical for 1 and 4 jobs".into()))
}

fn pm_power_scales_with_gamma() -> Outcome {
    let s = Scenario::parse_with(
        SMALL_PM,
        &[
            ("solver".into(), "oracle".into()),
            ("sweep".into(), "4,10".into()),
        ],
    )?;
    let r = run_pm_sweep(&s, RunOptions::default())?;
    let ratio = r.points[1].avg_power / r.points[0].avg_power;
    let expected = 10f64.powf(0.6);
    let rel = (ratio / expected - 1.0).abs();
    Ok((rel < 1e-6, format!("power ratio {ratio:.6} for +6 dB")))
}

fn noiseless_detection() -> Outcome {
    let s = Scenario::parse_with(SMALL_SB, &[("sweep".into(), "150".into())])?;
    let r = run_sb_sweep(&s, RunOptions::default())?;
    let p = &r.points[0];
    Ok((p.bit_errors == 0, format!("{} bit errors in {} bits", p.bit_errors, p.bits)))
}
