//! Finite-bit transmission of real numbers.
//!
//! A value is sent as its sign, the bits of its integer part, and exactly
//! `F = ceil(D log2 n)` fractional bits, truncated toward zero. The receiver
//! reconstructs `y = (2 sign - 1) * sum b_k 2^k`, so `0 <= |x - y| <= n^-D`.
//!
//! Wire format (bit-exact, MSB first):
//!
//! ```text
//! [elias-gamma(int_bits + 1)] [sign] [int_bits integer bits] [F fractional bits]
//! ```
//!
//! The integer part always occupies at least one bit slot, so the payload of
//! a message is exactly `1 + max(1, intlen(x)) + F` bits. The gamma prefix is
//! framing overhead and is accounted separately: budget checks can run under
//! paper accounting (payload only) or wire accounting (payload + framing).
//! `F` is known to both sides from `(n, D)` and is not transmitted.

use crate::error::{Error, Result};

/// Growable MSB-first bit buffer.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BitBuf {
    bytes: Vec<u8>,
    bit_len: usize,
}

impl BitBuf {
    pub fn new() -> Self {
        BitBuf::default()
    }

    pub fn from_bytes(bytes: Vec<u8>, bit_len: usize) -> Result<Self> {
        if bit_len > bytes.len() * 8 || bytes.len() * 8 - bit_len >= 8 {
            return Err(Error::MalformedFraming(format!(
                "bit length {bit_len} inconsistent with {} bytes",
                bytes.len()
            )));
        }
        Ok(BitBuf { bytes, bit_len })
    }

    pub fn push(&mut self, bit: bool) {
        let byte = self.bit_len / 8;
        if byte == self.bytes.len() {
            self.bytes.push(0);
        }
        if bit {
            self.bytes[byte] |= 1 << (7 - self.bit_len % 8);
        }
        self.bit_len += 1;
    }

    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.bit_len);
        self.bytes[i / 8] >> (7 - i % 8) & 1 == 1
    }

    pub fn len(&self) -> usize {
        self.bit_len
    }

    pub fn is_empty(&self) -> bool {
        self.bit_len == 0
    }

    pub fn bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn extend(&mut self, other: &BitBuf) {
        for i in 0..other.bit_len {
            self.push(other.get(i));
        }
    }
}

/// Sequential bit reader over a [`BitBuf`].
pub struct BitReader<'a> {
    buf: &'a BitBuf,
    pos: usize,
}

impl<'a> BitReader<'a> {
    pub fn new(buf: &'a BitBuf) -> Self {
        BitReader { buf, pos: 0 }
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub fn read(&mut self) -> Result<bool> {
        if self.pos >= self.buf.len() {
            return Err(Error::MalformedFraming("unexpected end of stream".into()));
        }
        let b = self.buf.get(self.pos);
        self.pos += 1;
        Ok(b)
    }

    /// Elias-gamma decode; values are capped to keep corrupt streams from
    /// requesting absurd bit counts.
    pub fn read_gamma(&mut self) -> Result<u64> {
        let mut zeros = 0u32;
        while !self.read()? {
            zeros += 1;
            if zeros > 12 {
                return Err(Error::MalformedFraming("gamma prefix too long".into()));
            }
        }
        let mut value = 1u64;
        for _ in 0..zeros {
            value = value << 1 | self.read()? as u64;
        }
        Ok(value)
    }
}

/// Elias-gamma encode `value >= 1` onto `buf`.
pub fn write_gamma(buf: &mut BitBuf, value: u64) {
    assert!(value >= 1);
    let n = 63 - value.leading_zeros();
    for _ in 0..n {
        buf.push(false);
    }
    for i in (0..=n).rev() {
        buf.push(value >> i & 1 == 1);
    }
}

/// Number of fractional bits kept for sample size `n` and precision `D`.
///
/// The ceiling (rather than floor) makes the reconstruction error bound
/// `n^-D` hold for every `n`, not just when `D log2 n` is an integer.
pub fn frac_bits(n: u64, d: f64) -> Result<u32> {
    if n < 2 {
        return Err(Error::ConfigInvalid(format!("sample size {n} < 2")));
    }
    if !(d > 0.0) {
        return Err(Error::ConfigInvalid(format!("precision D = {d} must be > 0")));
    }
    let f = (d * (n as f64).log2()).ceil();
    if !(f <= 900.0) {
        return Err(Error::ConfigInvalid(format!(
            "D log2 n = {f} exceeds the supported precision range"
        )));
    }
    Ok(f as u32)
}

/// One encoded coefficient.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitMessage {
    bits: BitBuf,
    payload_bits: u64,
    framing_bits: u64,
    frac_bits: u32,
}

impl BitMessage {
    pub fn bits(&self) -> &BitBuf {
        &self.bits
    }

    /// Paper-accounting length: sign + integer slots + fractional bits.
    pub fn payload_bits(&self) -> u64 {
        self.payload_bits
    }

    /// Self-delimiting overhead (the gamma prefix).
    pub fn framing_bits(&self) -> u64 {
        self.framing_bits
    }

    pub fn total_bits(&self) -> u64 {
        self.payload_bits + self.framing_bits
    }

    pub fn frac_bits(&self) -> u32 {
        self.frac_bits
    }
}

/// Encode a finite real to a self-delimiting message.
pub fn trans_approx_encode(x: f64, n: u64, d: f64) -> Result<BitMessage> {
    let f = frac_bits(n, d)?;
    encode_with_frac_bits(x, f)
}

pub(crate) fn encode_with_frac_bits(x: f64, f: u32) -> Result<BitMessage> {
    if !x.is_finite() {
        return Err(Error::NonFinite(x));
    }
    // exact decomposition |x| = mant * 2^exp
    let bits = x.abs().to_bits();
    let raw_exp = (bits >> 52 & 0x7ff) as i64;
    let raw_frac = bits & 0x000f_ffff_ffff_ffff;
    let (mant, exp) = if raw_exp == 0 {
        (raw_frac, -1074i64) // subnormal
    } else {
        (raw_frac | 1 << 52, raw_exp - 1075)
    };

    // q = floor(|x| * 2^F); bit p of q is bit (p - shift) of mant
    let shift = exp + f as i64;
    let mant_len = if mant == 0 { 0 } else { 64 - mant.leading_zeros() as i64 };
    let q_len = (mant_len + shift).max(0);
    let q_bit = |p: i64| -> bool {
        let src = p - shift;
        (0..64).contains(&src) && mant >> src & 1 == 1
    };

    let int_bits_sig = (q_len - f as i64).max(0);
    let int_slots = int_bits_sig.max(1) as u64;
    let sign_bit = x >= 0.0; // sign() is 0 on (-inf, 0) and 1 on [0, inf)

    let mut buf = BitBuf::new();
    write_gamma(&mut buf, int_slots + 1);
    let framing_bits = buf.len() as u64;
    buf.push(sign_bit);
    for p in (f as i64..f as i64 + int_slots as i64).rev() {
        buf.push(q_bit(p));
    }
    for p in (0..f as i64).rev() {
        buf.push(q_bit(p));
    }

    Ok(BitMessage {
        payload_bits: buf.len() as u64 - framing_bits,
        framing_bits,
        bits: buf,
        frac_bits: f,
    })
}

/// Decode a message produced by [`trans_approx_encode`].
pub fn trans_approx_decode(msg: &BitMessage) -> Result<f64> {
    let mut reader = BitReader::new(&msg.bits);
    let (value, _) = read_message_value(&mut reader, msg.frac_bits)?;
    if reader.remaining() != 0 {
        return Err(Error::MalformedFraming("trailing bits in message".into()));
    }
    Ok(value)
}

/// Read one framed value off a stream; returns the value and its bit cost
/// split as `(payload, framing)`.
pub fn read_message_value(reader: &mut BitReader, f: u32) -> Result<(f64, (u64, u64))> {
    let gamma = reader.read_gamma()?;
    if gamma < 2 {
        return Err(Error::MalformedFraming(format!(
            "integer slot count {gamma} out of range"
        )));
    }
    let int_slots = gamma - 1;
    let framing = 2 * (63 - gamma.leading_zeros() as u64) + 1;
    let sign = reader.read()?;

    let mut int_part = 0.0f64;
    for _ in 0..int_slots {
        int_part = int_part * 2.0 + reader.read()? as u64 as f64;
    }
    let mut frac_part = 0.0f64;
    for _ in 0..f {
        frac_part = frac_part * 2.0 + reader.read()? as u64 as f64;
    }
    // 2^-F is exactly representable for F <= 900; the sum is exact whenever
    // the encoded value had at most 53 significant bits, which the encoder
    // guarantees.
    let magnitude = int_part + frac_part * 2f64.powi(-(f as i32));
    let value = if sign { magnitude } else { -magnitude };
    Ok((value, (1 + int_slots + f as u64, framing)))
}

/// Parse a concatenation of framed messages back into individual messages.
pub fn parse_stream(buf: &BitBuf, f: u32) -> Result<Vec<(f64, BitMessage)>> {
    let mut reader = BitReader::new(buf);
    let mut out = Vec::new();
    while reader.remaining() > 0 {
        let start = reader.pos;
        let (value, (payload, framing)) = read_message_value(&mut reader, f)?;
        let mut bits = BitBuf::new();
        for i in start..reader.pos {
            bits.push(buf.get(i));
        }
        out.push((
            value,
            BitMessage {
                bits,
                payload_bits: payload,
                framing_bits: framing,
                frac_bits: f,
            },
        ));
    }
    Ok(out)
}

/// Per-machine bit accounting.
#[derive(Debug, Clone, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MachineLedger {
    pub payload_bits: u64,
    pub framing_bits: u64,
    pub messages: u64,
}

/// Cumulative bit accounting across machines. Single writer per machine
/// during the local phase; merged afterwards.
#[derive(Debug, Clone, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BudgetLedger {
    pub machines: Vec<MachineLedger>,
}

impl BudgetLedger {
    pub fn new(m: usize) -> Self {
        BudgetLedger {
            machines: vec![MachineLedger::default(); m],
        }
    }

    pub fn record(&mut self, machine: usize, msg: &BitMessage) {
        let slot = &mut self.machines[machine];
        slot.payload_bits += msg.payload_bits();
        slot.framing_bits += msg.framing_bits();
        slot.messages += 1;
    }

    pub fn total_payload(&self) -> u64 {
        self.machines.iter().map(|m| m.payload_bits).sum()
    }

    pub fn total_framing(&self) -> u64 {
        self.machines.iter().map(|m| m.framing_bits).sum()
    }

    pub fn total_messages(&self) -> u64 {
        self.machines.iter().map(|m| m.messages).sum()
    }

    pub fn max_machine_payload(&self) -> u64 {
        self.machines.iter().map(|m| m.payload_bits).max().unwrap_or(0)
    }
}

/// Outcome of the expected-length audit.
#[derive(Debug, Clone, serde::Serialize)]
pub struct LengthAudit {
    pub messages: u64,
    pub mean_payload_bits: f64,
    pub mean_wire_bits: f64,
    pub bound: f64,
    pub slack: f64,
    pub violated: bool,
}

/// Check the mean per-message payload against `D log2 n` plus a slack that
/// covers the framing prefix and the integer slot.
pub fn expected_length_audit(ledger: &BudgetLedger, n: u64, d: f64) -> LengthAudit {
    let log2n = (n as f64).log2();
    let slack = 2.0 + 2.0 * (1.0 + log2n).log2();
    let bound = d * log2n + slack;
    let messages = ledger.total_messages();
    let mean_payload = if messages == 0 {
        0.0
    } else {
        ledger.total_payload() as f64 / messages as f64
    };
    let mean_wire = if messages == 0 {
        0.0
    } else {
        (ledger.total_payload() + ledger.total_framing()) as f64 / messages as f64
    };
    LengthAudit {
        messages,
        mean_payload_bits: mean_payload,
        mean_wire_bits: mean_wire,
        bound,
        slack,
        violated: messages > 0 && mean_payload > bound,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn roundtrip(x: f64, n: u64, d: f64) -> (f64, BitMessage) {
        let msg = trans_approx_encode(x, n, d).unwrap();
        let y = trans_approx_decode(&msg).unwrap();
        (y, msg)
    }

    #[test]
    fn zero_encodes_minimally() {
        let (y, msg) = roundtrip(0.0, 16, 0.5);
        assert_eq!(y, 0.0);
        let f = frac_bits(16, 0.5).unwrap(); // 2
        assert_eq!(f, 2);
        assert_eq!(msg.payload_bits(), 2 + f as u64);
        // gamma(2) = 010, sign = 1, one zero integer slot, F zero fractional bits
        let want: Vec<bool> = vec![false, true, false, true, false, false, false];
        let got: Vec<bool> = (0..msg.bits().len()).map(|i| msg.bits().get(i)).collect();
        assert_eq!(got, want);
    }

    #[test]
    fn worked_positive_example() {
        // 2.6875 = 10.1011b; keeping two fractional digits gives 10.10b = 2.5
        let (y, msg) = roundtrip(2.6875, 16, 0.5);
        assert_eq!(y, 2.5);
        assert!((2.6875f64 - y).abs() <= (16f64).powf(-0.5));
        assert_eq!(msg.payload_bits(), 1 + 2 + 2);
    }

    #[test]
    fn worked_negative_example() {
        // -3 with one fractional digit: sign 0, integer bits 11, fraction 0
        let (y, msg) = roundtrip(-3.0, 4, 0.5);
        assert_eq!(y, -3.0);
        assert_eq!(msg.payload_bits(), 4);
        assert_eq!(msg.framing_bits(), 3); // gamma(3) = 011
        let want = vec![false, true, true, false, true, true, false];
        let got: Vec<bool> = (0..msg.bits().len()).map(|i| msg.bits().get(i)).collect();
        assert_eq!(got, want);
    }

    #[test]
    fn dyadic_values_roundtrip_exactly() {
        let n = 1 << 20;
        let f = frac_bits(n, 0.5).unwrap(); // 10
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(5);
        for _ in 0..2000 {
            let p: i64 = rng.gen_range(-(1i64 << 30)..(1i64 << 30));
            let x = p as f64 / 2f64.powi(f as i32);
            let (y, _) = roundtrip(x, n, 0.5);
            assert_eq!(y, x, "dyadic {x} must round-trip");
        }
    }

    #[test]
    fn approximation_bound_and_truncation_direction() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(42);
        let n = 1 << 12;
        let d = 0.5;
        let bound = (n as f64).powf(-d);
        for _ in 0..100_000 {
            let mag = 2f64.powf(rng.gen_range(-30.0..30.0));
            let x = if rng.gen::<bool>() { mag } else { -mag };
            let msg = trans_approx_encode(x, n, d).unwrap();
            let y = trans_approx_decode(&msg).unwrap();
            let err = (x - y).abs();
            assert!(err <= bound, "err {err} > bound {bound} for x = {x}");
            assert!(y.abs() <= x.abs(), "truncation must shrink: {x} -> {y}");
            assert_eq!(y.signum() * y.abs(), y);

            // exact payload accounting
            let f = frac_bits(n, d).unwrap() as u64;
            let int_bits = {
                let trunc = x.abs().trunc();
                if trunc < 1.0 {
                    0
                } else {
                    64 - (trunc as u64).leading_zeros() as u64
                }
            };
            assert_eq!(msg.payload_bits(), 1 + int_bits.max(1) + f);
        }
    }

    #[test]
    fn extreme_magnitudes_stay_finite() {
        for &x in &[f64::MAX, f64::MIN_POSITIVE, -f64::MAX, 1e-300, 1e300] {
            let (y, _) = roundtrip(x, 4, 0.5);
            assert!(y.is_finite());
            assert!(y.abs() <= x.abs());
        }
        assert!(trans_approx_encode(f64::NAN, 4, 0.5).is_err());
        assert!(trans_approx_encode(f64::INFINITY, 4, 0.5).is_err());
    }

    #[test]
    fn stream_concatenation_reparses() {
        let n = 1 << 10;
        let d = 0.5;
        let f = frac_bits(n, d).unwrap();
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(9);
        let values: Vec<f64> = (0..10_000).map(|_| rng.gen_range(-4.0..4.0)).collect();
        let mut buf = BitBuf::new();
        let mut encoded = Vec::new();
        for &x in &values {
            let msg = trans_approx_encode(x, n, d).unwrap();
            buf.extend(msg.bits());
            encoded.push(msg);
        }
        let parsed = parse_stream(&buf, f).unwrap();
        assert_eq!(parsed.len(), values.len());
        for ((value, msg), orig) in parsed.iter().zip(encoded.iter()) {
            assert_eq!(msg, orig);
            assert_eq!(*value, trans_approx_decode(orig).unwrap());
        }
    }

    #[test]
    fn malformed_streams_are_rejected() {
        let msg = trans_approx_encode(1.25, 16, 0.5).unwrap();
        // drop the last bit
        let mut cut = BitBuf::new();
        for i in 0..msg.bits().len() - 1 {
            cut.push(msg.bits().get(i));
        }
        assert!(parse_stream(&cut, msg.frac_bits()).is_err());

        // a run of zeros never terminates a gamma prefix
        let mut zeros = BitBuf::new();
        for _ in 0..40 {
            zeros.push(false);
        }
        assert!(parse_stream(&zeros, 4).is_err());
    }

    #[test]
    fn audit_flags_only_real_violations() {
        let n = 1u64 << 20;
        let d = 0.5;
        let mut ledger = BudgetLedger::new(1);
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(3);
        for _ in 0..500 {
            let x: f64 = rng.gen_range(-1.9..1.9);
            ledger.record(0, &trans_approx_encode(x, n, d).unwrap());
        }
        let audit = expected_length_audit(&ledger, n, d);
        assert!(!audit.violated, "bounded inputs must pass: {audit:?}");
        // |x| < 2 needs at most sign + one integer slot + F payload bits
        let f = frac_bits(n, d).unwrap() as f64;
        assert!(audit.mean_payload_bits <= 2.0 + f);

        let empty = BudgetLedger::new(1);
        let audit = expected_length_audit(&empty, n, d);
        assert_eq!(audit.messages, 0);
        assert!(!audit.violated);
    }
}
