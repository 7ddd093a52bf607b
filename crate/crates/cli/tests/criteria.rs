//! Acceptance criteria. Each test prints one `PASS`/`FAIL` line.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use cislp::ci_model::{build_ci_system, CiSystem, PartitionStrategy};
use cislp::constellation::{ConstellationSpec, SymbolFrame};
use cislp::duality::{bisection_sb, DEFAULT_TOL_MU};
use cislp::oracle::{solve_pm_dual, solve_pm_dual_with, OracleConfig};
use cislp::pif::{
    iterate, predicted_flops_per_iteration, solve_pm, solve_pm_with, update_c, update_x_blocks,
    update_x_blocks_explicit, PjAdmmConfig, Prepared, SlackRule, SolverState, Tau,
};
use cislp::sim::{gen_channel, realization_stream, run_sb_sweep, RunOptions, Scenario};

fn report(id: u32, name: &str, passed: bool, detail: String) {
    let tag = if passed { "PASS" } else { "FAIL" };
    println!("{tag} criterion {id} ({name}): {detail}");
    assert!(passed, "criterion {id} failed: {detail}");
}

fn qpsk() -> ConstellationSpec {
    ConstellationSpec::psk(4).unwrap()
}

fn qam16() -> ConstellationSpec {
    ConstellationSpec::qam(16).unwrap()
}

/// Random slot with `γ_k = gamma`, `σ_k = sigma`.
fn slot(spec: &ConstellationSpec, users: usize, antennas: usize, gamma: f64, sigma: f64, seed: u64, index: u64) -> CiSystem {
    let mut rng = realization_stream(seed, index);
    let h = gen_channel(users, antennas, &mut rng).unwrap();
    let s = SymbolFrame::draw(spec, users, 1, &mut rng).symbols(spec, 0);
    build_ci_system(&h, &s, spec, &vec![gamma; users], &vec![sigma; users]).unwrap()
}

fn db(x: f64) -> f64 {
    10f64.powf(x / 10.0)
}

#[test]
fn criterion_01_oracle_certificates() {
    let start = Instant::now();
    let mut worst = 0.0_f64;
    let mut failures = 0;
    for (spec, k, n, seed) in [(qpsk(), 4, 8, 101), (qpsk(), 8, 8, 102), (qam16(), 4, 8, 103)] {
        for i in 0..100 {
            let sys = slot(&spec, k, n, db(10.0), 1.0, seed, i);
            match solve_pm_dual(&sys, 1e-9, 200_000) {
                Ok(sol) => worst = worst.max(sol.kkt.max_residual()),
                Err(_) => failures += 1,
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        1,
        "oracle KKT certificates",
        failures == 0 && worst < 1e-8 && secs < 30.0,
        format!("300 instances, worst KKT residual {worst:.2e}, {failures} uncertified, {secs:.1} s"),
    );
}

struct GapStats {
    within: usize,
    total: usize,
    worst_gap: f64,
    worst_infeas: f64,
}

fn published_protocol_gaps(spec: &ConstellationSpec, iters: usize, gamma: f64, sigma: f64, seed: u64) -> GapStats {
    let cfg = PjAdmmConfig {
        rho: 0.06,
        beta: 1.0,
        tau: Tau::SpectralScaled(0.8),
        fixed_iters: Some(iters),
        ..PjAdmmConfig::default()
    };
    let mut s = GapStats {
        within: 0,
        total: 100,
        worst_gap: 0.0,
        worst_infeas: 0.0,
    };
    for i in 0..100 {
        let sys = slot(spec, 12, 16, gamma, sigma, seed, i);
        let p_star = solve_pm_dual(&sys, 1e-9, 500_000).unwrap().objective();
        let (x, report) = solve_pm(&sys, &cfg).unwrap();
        let gap = (report.objective - p_star).abs() / p_star;
        if gap <= 1e-2 {
            s.within += 1;
        }
        s.worst_gap = s.worst_gap.max(gap);
        s.worst_infeas = s.worst_infeas.max(sys.max_infeasibility(&x) / (1.0 + sys.b.amax()));
    }
    s
}

#[test]
fn criterion_02_pif_optimality_at_published_iterations() {
    let start = Instant::now();
    // QPSK at the SB operating point of 16 dB (b = σ), 16QAM at γ = 18 dB with unit noise.
    let q = published_protocol_gaps(&qpsk(), 40, 1.0, (1.0 / db(16.0)).sqrt(), 201);
    let m = published_protocol_gaps(&qam16(), 150, db(18.0), 1.0, 202);
    let secs = start.elapsed().as_secs_f64();
    let ok = |s: &GapStats| s.within * 100 >= 95 * s.total && s.worst_infeas <= 1e-3;
    let passed = ok(&q) && ok(&m) && secs < 120.0;
    report(
        2,
        "ADMM optimality at published iteration counts",
        passed,
        format!(
            "QPSK T=40: {}/100 within 1e-2 (worst gap {:.2e}, worst infeas/(1+|b|) {:.2e}); \
             16QAM T=150: {}/100 within 1e-2 (worst gap {:.2e}, worst infeas/(1+|b|) {:.2e}); {secs:.1} s",
            q.within, q.worst_gap, q.worst_infeas, m.within, m.worst_gap, m.worst_infeas
        ),
    );
}

#[test]
fn criterion_03_bisection_matches_closed_form() {
    let start = Instant::now();
    let mut worst = 0.0_f64;
    for i in 0..50 {
        let spec = if i % 2 == 0 { qpsk() } else { qam16() };
        let sys = slot(&spec, 4, 8, db(10.0), 1.0, 301, i);
        let p_pm = solve_pm_dual(&sys, 1e-10, 500_000).unwrap().objective();
        let out = bisection_sb(
            &sys,
            1.0,
            |s| {
                let sol = solve_pm_dual(s, 1e-10, 500_000)?;
                let p = sol.objective();
                Ok((sol.x, p))
            },
            DEFAULT_TOL_MU,
        )
        .unwrap();
        worst = worst.max((out.alpha() - (1.0 / p_pm).sqrt()).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        3,
        "bisection versus closed-form balance level",
        worst <= 1e-3 && secs < 120.0,
        format!("50 instances, worst |mu_bisection - sqrt(1/p_PM)| {worst:.2e}, {secs:.1} s"),
    );
}

#[test]
fn criterion_04_scaling_laws() {
    let cfg = OracleConfig {
        tol: 1e-11,
        ..OracleConfig::default()
    };
    let mut worst_x = 0.0_f64;
    let mut worst_p = 0.0_f64;
    for i in 0..20 {
        let spec = if i % 2 == 0 { qpsk() } else { qam16() };
        let sys = slot(&spec, 4, 8, db(10.0), 1.0, 401, i);
        let base = solve_pm_dual_with(&sys, &cfg).unwrap();
        let (x0, p0) = (base.x.clone(), base.objective());
        for alpha in [0.5, 2.0, 10.0] {
            let s = solve_pm_dual_with(&sys.with_scaled_thresholds(alpha), &cfg).unwrap();
            worst_x = worst_x.max((&s.x - &x0 * alpha).norm() / (1.0 + x0.norm()));
            worst_p = worst_p.max((s.objective() - alpha * alpha * p0).abs() / (1.0 + p0));
        }
    }
    report(
        4,
        "threshold scaling laws",
        worst_x <= 1e-6 && worst_p <= 1e-6,
        format!("60 pairs, worst x deviation {worst_x:.2e}, worst power deviation {worst_p:.2e}"),
    );
}

#[test]
fn criterion_05_qam_equality_rows() {
    let cfg = PjAdmmConfig {
        rho: 0.06,
        fixed_iters: None,
        delta_tol: 1e-7,
        max_iters: 100_000,
        ..PjAdmmConfig::default()
    };
    let mut worst = 0.0_f64;
    let mut slots = 0;
    let mut index = 0;
    let mut unconverged = 0;
    while slots < 100 {
        let sys = slot(&qam16(), 12, 16, db(18.0), 1.0, 501, index);
        index += 1;
        if !sys.has_equality_rows() {
            continue;
        }
        slots += 1;
        let (x, report) = solve_pm(&sys, &cfg).unwrap();
        if !report.converged {
            unconverged += 1;
        }
        let ax = &sys.a * &x;
        for r in (0..sys.rows()).filter(|&r| sys.eq_mask[r]) {
            worst = worst.max((ax[r] - sys.b[r]).abs());
        }
    }
    report(
        5,
        "QAM equality rows at convergence",
        worst <= 1e-3 && unconverged == 0,
        format!("100 slots, worst |a_i x - b_i| {worst:.2e}, {unconverged} not converged"),
    );
}

#[test]
fn criterion_06_psk_and_qam_paths_identical() {
    let cfg = PjAdmmConfig {
        rho: 0.06,
        fixed_iters: Some(40),
        ..PjAdmmConfig::default()
    };
    let mut identical = 0;
    for i in 0..20 {
        let sys = slot(&qpsk(), 12, 16, 1.0, 0.2, 601, i);
        assert!(!sys.has_equality_rows());
        let psk = solve_pm_with(&sys, &cfg, SlackRule::Psk, true).unwrap();
        let qam = solve_pm_with(&sys, &cfg, SlackRule::Masked, true).unwrap();
        if psk.state.x == qam.state.x && psk.state.c == qam.state.c && psk.state.lambda == qam.state.lambda && psk.trace == qam.trace {
            identical += 1;
        }
    }
    report(
        6,
        "PSK and QAM code paths",
        identical == 20,
        format!("{identical}/20 instances bit-identical"),
    );
}

#[test]
fn criterion_07_inverse_free_equals_explicit() {
    let mut worst = 0.0_f64;
    for strategy in [
        PartitionStrategy::PerScalar,
        PartitionStrategy::PerAntenna,
        PartitionStrategy::Contiguous(4),
    ] {
        for i in 0..10 {
            let spec = if i % 2 == 0 { qpsk() } else { qam16() };
            let sys = slot(&spec, 4, 8, db(10.0), 1.0, 701, i);
            let cfg = PjAdmmConfig {
                partition: strategy,
                ..PjAdmmConfig::default()
            };
            let prep = Prepared::new(&sys, &cfg).unwrap();
            let mut state = SolverState::zeros(&sys);
            for _ in 0..10 {
                let c = update_c(&state, &sys, prep.rho);
                let fast = update_x_blocks(&state, &sys, &prep.partition, &c, prep.rho, prep.tau, false);
                let slow = update_x_blocks_explicit(&state, &sys, &prep.partition, &c, prep.rho, prep.tau).unwrap();
                worst = worst.max((fast - slow).amax());
                iterate(&mut state, &sys, &prep, SlackRule::Masked, false).unwrap();
            }
        }
    }
    report(
        7,
        "inverse-free versus explicit block update",
        worst <= 1e-10,
        format!("3 partitions x 10 instances x 10 iterations, max difference {worst:.2e}"),
    );
}

fn scenario_path(name: &str) -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn fmt_list(v: &[f64]) -> String {
    let items: Vec<String> = v.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", items.join(", "))
}

fn nonincreasing(bers: &[f64]) -> bool {
    bers.windows(2).all(|w| w[1] <= w[0])
}

#[test]
fn criterion_08_ber_trends() {
    let opts = RunOptions { jobs: 4, timing: false };
    let start = Instant::now();
    let q = Scenario::load(&scenario_path("qpsk_12x16_sb.txt"), &[]).unwrap();
    let qb: Vec<f64> = run_sb_sweep(&q, opts).unwrap().points.iter().map(|p| p.ber).collect();
    let q_secs = start.elapsed().as_secs_f64();
    let start = Instant::now();
    let m = Scenario::load(&scenario_path("qam16_12x16_sb.txt"), &[]).unwrap();
    let mb: Vec<f64> = run_sb_sweep(&m, opts).unwrap().points.iter().map(|p| p.ber).collect();
    let m_secs = start.elapsed().as_secs_f64();
    let passed = nonincreasing(&qb) && qb[qb.len() - 1] < 1e-2 && nonincreasing(&mb) && q_secs < 300.0 && m_secs < 300.0;
    report(
        8,
        "BER versus SNR trends",
        passed,
        format!("QPSK {} ({q_secs:.1} s); 16QAM {} ({m_secs:.1} s)", fmt_list(&qb), fmt_list(&mb)),
    );
}

fn cli_csv(verb: &str, scenario: &Path, jobs: usize, out: &Path) -> Vec<u8> {
    let status = Command::new(env!("CARGO_BIN_EXE_cislp"))
        .arg(verb)
        .arg("--scenario")
        .arg(scenario)
        .arg("--jobs")
        .arg(jobs.to_string())
        .arg("--out")
        .arg(out)
        .status()
        .unwrap();
    assert!(status.success());
    std::fs::read(out).unwrap()
}

#[test]
fn criterion_09_determinism_across_jobs() {
    let dir = tempfile::tempdir().unwrap();
    let pm = dir.path().join("pm.txt");
    std::fs::write(
        &pm,
        "id = det-pm\nK = 6\nNt = 8\nmodulation = 16qam\nmode = pm\nsweep = 0, 10\nchannels = 16\nslots = 5\nseed = 9001\n",
    )
    .unwrap();
    let sb = dir.path().join("sb.txt");
    std::fs::write(
        &sb,
        "id = det-sb\nK = 6\nNt = 8\nmodulation = qpsk\nmode = sb\nsweep = 0, 6, 12\nchannels = 16\nslots = 5\nseed = 9002\n",
    )
    .unwrap();
    let mut same = true;
    for (verb, path) in [("pm-sweep", &pm), ("sb-sweep", &sb)] {
        let a = cli_csv(verb, path, 1, &dir.path().join("a.csv"));
        let a2 = cli_csv(verb, path, 1, &dir.path().join("a2.csv"));
        let b = cli_csv(verb, path, 8, &dir.path().join("b.csv"));
        same &= a == b && a == a2 && !a.is_empty();
    }
    report(
        9,
        "byte-identical CSVs for --jobs 1 and --jobs 8",
        same,
        "pm-sweep and sb-sweep".to_string(),
    );
}

#[test]
fn criterion_10_flop_count_linearity() {
    let mut pairs = Vec::new();
    for (k, n) in [(8, 8), (12, 16), (24, 32)] {
        let sys = slot(&qpsk(), k, n, db(10.0), 1.0, 1001, 0);
        let cfg = PjAdmmConfig {
            fixed_iters: Some(5),
            ..PjAdmmConfig::default()
        };
        let (_, rep) = solve_pm(&sys, &cfg).unwrap();
        pairs.push((rep.flops_per_iteration as f64, predicted_flops_per_iteration(k, n)));
    }
    let c = pairs.iter().map(|(m, p)| m * p).sum::<f64>() / pairs.iter().map(|(_, p)| p * p).sum::<f64>();
    let worst = pairs.iter().map(|(m, p)| (m / (c * p) - 1.0).abs()).fold(0.0, f64::max);
    report(
        10,
        "per-iteration flops linear in K*Nt",
        worst <= 0.2,
        format!(
            "measured {:?}, fitted slope {c:.3} x predicted, worst relative misfit {worst:.3}",
            pairs.iter().map(|(m, _)| *m as u64).collect::<Vec<_>>()
        ),
    );
}
