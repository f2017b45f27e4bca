//! Finite-bit transmission of reals: encode, decode, and account for bits.
//!
//! Shows the truncation error bound `|x - y| <= n^-D` and the exact payload
//! accounting `1 + max(1, integer bits) + ceil(D log2 n)`, plus the
//! self-delimiting framing that lets messages travel concatenated.

use distwav::bitcodec::{
    expected_length_audit, parse_stream, trans_approx_decode, trans_approx_encode, BitBuf,
    BudgetLedger,
};

fn main() {
    let n = 1u64 << 16;
    let d = 0.5;
    let bound = (n as f64).powf(-d);
    println!("sample size n = {n}, precision D = {d}, error bound n^-D = {bound:.6}");
    println!();

    let values = [0.0, 2.6875, -3.0, 0.1, -0.015625, 123.456, 1e-9];
    println!("{:>12} {:>12} {:>12} {:>8} {:>8}", "x", "decoded", "error", "payload", "framing");
    for &x in &values {
        let msg = trans_approx_encode(x, n, d).unwrap();
        let y = trans_approx_decode(&msg).unwrap();
        println!(
            "{:>12} {:>12} {:>12.3e} {:>8} {:>8}",
            x,
            y,
            (x - y).abs(),
            msg.payload_bits(),
            msg.framing_bits()
        );
        assert!((x - y).abs() <= bound);
        assert!(y.abs() <= x.abs(), "truncation shrinks toward zero");
    }

    // concatenated messages re-parse one by one thanks to the gamma prefix
    let mut stream = BitBuf::new();
    let mut ledger = BudgetLedger::new(1);
    for &x in &values {
        let msg = trans_approx_encode(x, n, d).unwrap();
        stream.extend(msg.bits());
        ledger.record(0, &msg);
    }
    let f = distwav::bitcodec::frac_bits(n, d).unwrap();
    let parsed = parse_stream(&stream, f).unwrap();
    println!();
    println!(
        "concatenated {} messages into {} bits; re-parsed {} messages",
        values.len(),
        stream.len(),
        parsed.len()
    );

    let audit = expected_length_audit(&ledger, n, d);
    println!(
        "mean payload {:.2} bits/message against bound {:.2} (violated: {})",
        audit.mean_payload_bits, audit.bound, audit.violated
    );
}
