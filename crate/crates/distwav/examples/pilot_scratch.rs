// Scratch pilot for calibrating acceptance configs (temporary).

use distwav::config::{Mode, ProtocolConfig, SweepAxis};
use distwav::harness::{calibrate_tau, run_sweep};
use distwav::signal::SignalSpec;
use distwav::theory;
use distwav::wavelet::WaveletFamily;

fn main() {
    let t0 = std::time::Instant::now();

    // --- A1 pilot: case (i) rate, Haar s = 0.75 ---
    let base = ProtocolConfig {
        mode: Mode::NonAdaptiveI,
        n: 1 << 12,
        m: 16,
        budget: 4096.0,
        s: Some(0.75),
        radius: Some(1.0),
        sigma: 1.0,
        ..ProtocolConfig::default()
    };
    let spec = SignalSpec::worst_case(0.75, 1.0, 16);
    let values: Vec<f64> = (12..=18).map(|e| (1u64 << e) as f64).collect();
    let report = run_sweep(&base, &spec, SweepAxis::N, &values, 200, 4242).unwrap();
    for c in &report.cells {
        println!(
            "A1 n={} risk={:.5e} se={:.1e} maxpay={}",
            c.n, c.mean_risk_l2, c.se_risk_l2, c.max_machine_payload_bits
        );
    }
    println!(
        "A1 slope: {:?} elapsed={:?}",
        report.slope_l2.map(|f| (f.slope, f.half_width)),
        t0.elapsed()
    );

    // --- A2 pilot: grouped vs shared at the same tight budget ---
    let t1 = std::time::Instant::now();
    let shared = ProtocolConfig {
        mode: Mode::NonAdaptiveI,
        n: 1 << 16,
        m: 64,
        budget: 8.0 * 16.0,
        s: Some(0.75),
        radius: Some(1.0),
        ..ProtocolConfig::default()
    };
    let grouped = ProtocolConfig {
        mode: Mode::NonAdaptiveII,
        ..shared.clone()
    };
    let spec2 = SignalSpec::worst_case(0.75, 1.0, 16);
    let reps = 200;
    let r_shared = run_sweep(&shared, &spec2, SweepAxis::B, &[128.0], reps, 7).unwrap();
    let r_grouped = run_sweep(&grouped, &spec2, SweepAxis::B, &[128.0], reps, 8).unwrap();
    println!(
        "A2 shared={:.5e} grouped={:.5e} factor={:.2} elapsed={:?}",
        r_shared.cells[0].mean_risk_l2,
        r_grouped.cells[0].mean_risk_l2,
        r_shared.cells[0].mean_risk_l2 / r_grouped.cells[0].mean_risk_l2,
        t1.elapsed()
    );

    // --- A5 pilot: adaptive vs oracle at db4 ---
    let t2 = std::time::Instant::now();
    let adaptive = ProtocolConfig {
        mode: Mode::Adaptive,
        family: WaveletFamily::Daubechies(4),
        n: 1 << 16,
        m: 64,
        budget: 1024.0,
        s: None,
        radius: None,
        s_min: Some(0.5),
        s_max: Some(1.6),
        sigma: 1.0,
        ..ProtocolConfig::default()
    };
    let taus = [1.5, 2.0, 2.5, 3.0, 4.0, 6.0, 8.0, 12.0];
    let cal = calibrate_tau(&adaptive, &taus, 100, 0.95, 99).unwrap();
    println!("A5 calibration rates: {:?}", cal.zero_rates);
    println!("A5 chosen tau: {:?} elapsed={:?}", cal.chosen, t2.elapsed());
    let tau = cal.chosen.unwrap_or(4.0);

    for s in [0.75, 1.5] {
        let t3 = std::time::Instant::now();
        let cfg = ProtocolConfig {
            tau,
            ..adaptive.clone()
        };
        let spec = SignalSpec {
            j_truth: 8,
            ..SignalSpec::worst_case(s, 1.0, 8)
        };
        let rep_a = run_sweep(&cfg, &spec, SweepAxis::B, &[1024.0], 100, 1000).unwrap();
        let oracle = ProtocolConfig {
            mode: Mode::NonAdaptiveI,
            s: Some(s),
            radius: Some(1.0),
            ..cfg.clone()
        };
        let rep_o = run_sweep(&oracle, &spec, SweepAxis::B, &[1024.0], 100, 2000).unwrap();
        let (jstar, _) =
            theory::optimal_level(cfg.n, cfg.m, cfg.budget, 0.5, s, 1.0, distwav::signal::Norm::L2)
                .unwrap();
        let within: usize = rep_a.cells[0]
            .replicates
            .iter()
            .filter(|r| {
                let j = r.jhat.unwrap() as i64;
                (j - jstar as i64).abs() <= 1
            })
            .count();
        println!(
            "A5 s={s}: adaptive={:.5e} oracle={:.5e} factor={:.2} mean_jhat={:.2} jstar={} within1={}/{} elapsed={:?}",
            rep_a.cells[0].mean_risk_l2,
            rep_o.cells[0].mean_risk_l2,
            rep_a.cells[0].mean_risk_l2 / rep_o.cells[0].mean_risk_l2,
            rep_a.cells[0].mean_jhat.unwrap(),
            jstar,
            within,
            rep_a.cells[0].replicates.len(),
            t3.elapsed()
        );
    }
}
