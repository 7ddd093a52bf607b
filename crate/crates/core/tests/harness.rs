use cislp::sim::{complex_gaussian, realization_stream, run_pm_sweep, run_sb_sweep, RunOptions, Scenario};

const PM_QPSK: &str = "\
id = pinned
K = 4
Nt = 8
modulation = qpsk
mode = pm
sweep = 10
channels = 5
slots = 4
seed = 20240601
solver = oracle
";

#[test]
fn oracle_power_regression() {
    let s = Scenario::parse(PM_QPSK).unwrap();
    let r = run_pm_sweep(&s, RunOptions::default()).unwrap();
    let p = r.points[0].avg_power;
    println!("pinned average power {p:.12e}");
    assert!((p - PINNED_POWER).abs() <= 1e-7 * PINNED_POWER, "{p}");
    assert_eq!(r.points[0].feasible_rate, 1.0);
}

const PINNED_POWER: f64 = 10.020103402003128;

#[test]
fn six_db_quadruples_the_power() {
    let s = Scenario::parse_with(PM_QPSK, &[("sweep".into(), "4, 10, 16".into())]).unwrap();
    let r = run_pm_sweep(&s, RunOptions::default()).unwrap();
    for w in r.points.windows(2) {
        let ratio = w[1].avg_power / w[0].avg_power;
        assert!((ratio / 10f64.powf(0.6) - 1.0).abs() < 0.01, "{ratio}");
    }
}

#[test]
fn injected_noise_has_configured_variance() {
    let mut rng = realization_stream(77, 3);
    let sigma2 = 0.37;
    let n = 200_000;
    let var: f64 = (0..n).map(|_| complex_gaussian(&mut rng, sigma2).norm_sqr()).sum::<f64>() / n as f64;
    assert!((var / sigma2 - 1.0).abs() < 0.02, "{var}");
}

#[test]
fn slp_beats_zero_forcing_at_12_db() {
    let base = "\
K = 4
Nt = 8
modulation = qpsk
mode = sb
sweep = 12
channels = 60
slots = 20
seed = 4242
";
    let slp = run_sb_sweep(&Scenario::parse(base).unwrap(), RunOptions { jobs: 4, timing: false }).unwrap();
    let zf = run_sb_sweep(
        &Scenario::parse_with(base, &[("precoder".into(), "zf".into())]).unwrap(),
        RunOptions { jobs: 4, timing: false },
    )
    .unwrap();
    let (a, b) = (&slp.points[0], &zf.points[0]);
    let n = a.bits as f64;
    let se = ((a.ber * (1.0 - a.ber) + b.ber * (1.0 - b.ber)) / n).sqrt().max(1.0 / n);
    println!("SLP BER {:.3e}, ZF BER {:.3e}", a.ber, b.ber);
    assert!((a.ber - b.ber) / se <= 1.645);
}

#[test]
fn ber_is_a_probability_and_power_nonnegative() {
    let s = Scenario::parse("K=3\nNt=4\nmodulation=16qam\nmode=sb\nsweep=-10,0,10\nchannels=3\nslots=3\n").unwrap();
    for p in run_sb_sweep(&s, RunOptions::default()).unwrap().points {
        assert!((0.0..=1.0).contains(&p.ber));
        assert!(p.avg_power >= 0.0);
    }
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let s = Scenario::parse("K=3\nNt=5\nmodulation=16qam\nmode=sb\nsweep=5,15\nchannels=9\nslots=3\nseed=9\n").unwrap();
    let one = run_sb_sweep(&s, RunOptions { jobs: 1, timing: false }).unwrap().to_csv();
    let many = run_sb_sweep(&s, RunOptions { jobs: 7, timing: false }).unwrap().to_csv();
    assert_eq!(one, many);
}
