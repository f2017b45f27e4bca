//! One distributed estimation run, end to end.
//!
//! Sixteen machines each hold a shard of noisy regression samples, estimate
//! wavelet coefficients locally, quantize them, and ship them to the center,
//! which averages and reconstructs. The run prints the realized risks and
//! the exact bit usage per machine.

use distwav::config::{Mode, ProtocolConfig};
use distwav::harness::risk_pair;
use distwav::protocol::run_protocol;
use distwav::signal::{make_signal, SignalSpec};

fn main() {
    let cfg = ProtocolConfig {
        mode: Mode::NonAdaptiveI,
        n: 1 << 14,
        m: 16,
        budget: 2048.0,
        s: Some(0.75),
        radius: Some(1.0),
        sigma: 1.0,
        seed: 11,
        ..ProtocolConfig::default()
    };
    let basis = cfg.build_basis().unwrap();
    let truth = make_signal(&SignalSpec::worst_case(0.75, 1.0, 14)).unwrap();

    let out = run_protocol(&cfg, &basis, &truth, cfg.seed).unwrap();
    let (l2, linf) = risk_pair(&out.estimate.selected, &truth, &basis);

    println!(
        "n = {}, m = {}, B = {} bits/machine, {} coefficients scheduled",
        cfg.n, cfg.m, cfg.budget, out.schedule.max_v
    );
    println!("L2 risk  = {l2:.6e}");
    println!("sup risk = {linf:.6e}");
    println!();
    println!("{:>8} {:>10} {:>10} {:>9}", "machine", "payload", "framing", "messages");
    for (i, ml) in out.estimate.ledger.machines.iter().enumerate() {
        println!(
            "{:>8} {:>10} {:>10} {:>9}",
            i, ml.payload_bits, ml.framing_bits, ml.messages
        );
    }
    let stats = out.stats();
    println!(
        "max machine payload {} bits <= budget {} (overruns: {})",
        stats.max_machine_payload_bits, cfg.budget, stats.overruns
    );

    // the decode error of every aggregated coefficient obeys the codec bound
    let bound = (cfg.n as f64).powf(-cfg.d);
    let worst = out
        .estimate
        .decode_error
        .flat()
        .iter()
        .fold(0.0f64, |a, &w| a.max(w.abs()));
    println!("worst per-coefficient decode error {worst:.3e} <= {bound:.3e}");
}
