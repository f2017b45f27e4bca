//! Run transcripts: every bit each machine sent, in wire format, plus the
//! config needed to rebuild the schedule. Replaying a transcript through
//! aggregation reproduces the estimator bit for bit, which is the ground for
//! the audit subcommand and the only-transmitted-data property.
//!
//! Layout (little-endian):
//!
//! ```text
//! magic "DWTRANS1"
//! digest_len u16, config digest (hex)
//! toml_len   u32, full config TOML
//! n u64, m u64, B f64, D f64, mode_len u16, mode string
//! per machine: id u64, messages u64, payload_bits u64, framing_bits u64,
//!              bit_len u64, byte_len u32, bytes
//! ```

use std::io::{Read, Write};
use std::path::Path;

use crate::bitcodec::{parse_stream, BitBuf, BudgetLedger};
use crate::config::{Mode, RunConfig};
use crate::error::{Error, Result};
use crate::protocol::{aggregate, reselect, RunOutcome};
use crate::wavelet::CoeffField;

const MAGIC: &[u8; 8] = b"DWTRANS1";

/// One machine's serialized messages.
#[derive(Debug, Clone, PartialEq)]
pub struct MachineBlob {
    pub machine_id: u64,
    pub messages: u64,
    pub payload_bits: u64,
    pub framing_bits: u64,
    pub bits: BitBuf,
}

/// Parsed transcript.
#[derive(Debug, Clone)]
pub struct Transcript {
    pub config: RunConfig,
    pub digest: String,
    pub machines: Vec<MachineBlob>,
}

fn write_u16<W: Write>(w: &mut W, v: u16) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}
fn write_u32<W: Write>(w: &mut W, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}
fn write_u64<W: Write>(w: &mut W, v: u64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}
fn write_f64<W: Write>(w: &mut W, v: f64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf)
        .map_err(|_| Error::MalformedFraming("transcript truncated".into()))
}
fn read_u16<R: Read>(r: &mut R) -> Result<u16> {
    let mut b = [0u8; 2];
    read_exact(r, &mut b)?;
    Ok(u16::from_le_bytes(b))
}
fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}
fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b)?;
    Ok(u64::from_le_bytes(b))
}
fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b)?;
    Ok(f64::from_le_bytes(b))
}

/// Serialize a finished run.
pub fn write_transcript<W: Write>(out: &mut W, config: &RunConfig, run: &RunOutcome) -> Result<()> {
    out.write_all(MAGIC)?;
    let digest = config.digest();
    write_u16(out, digest.len() as u16)?;
    out.write_all(digest.as_bytes())?;
    let toml = config.to_toml();
    write_u32(out, toml.len() as u32)?;
    out.write_all(toml.as_bytes())?;
    let p = &config.protocol;
    write_u64(out, p.n)?;
    write_u64(out, p.m)?;
    write_f64(out, p.budget)?;
    write_f64(out, p.d)?;
    let mode = p.mode.to_string();
    write_u16(out, mode.len() as u16)?;
    out.write_all(mode.as_bytes())?;

    for (i, local) in run.locals.iter().enumerate() {
        let mut bits = BitBuf::new();
        let (mut payload, mut framing, mut count) = (0u64, 0u64, 0u64);
        if let Some(local) = local {
            for msg in &local.messages {
                bits.extend(msg.bits());
                payload += msg.payload_bits();
                framing += msg.framing_bits();
                count += 1;
            }
        }
        write_u64(out, i as u64)?;
        write_u64(out, count)?;
        write_u64(out, payload)?;
        write_u64(out, framing)?;
        write_u64(out, bits.len() as u64)?;
        write_u32(out, bits.bytes().len() as u32)?;
        out.write_all(bits.bytes())?;
    }
    Ok(())
}

pub fn save_transcript(path: &Path, config: &RunConfig, run: &RunOutcome) -> Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_transcript(&mut file, config, run)
}

/// Parse a transcript; framing errors surface as [`Error::MalformedFraming`].
pub fn read_transcript<R: Read>(input: &mut R) -> Result<Transcript> {
    let mut magic = [0u8; 8];
    read_exact(input, &mut magic)?;
    if &magic != MAGIC {
        return Err(Error::MalformedFraming("bad transcript magic".into()));
    }
    let digest_len = read_u16(input)? as usize;
    let mut digest = vec![0u8; digest_len];
    read_exact(input, &mut digest)?;
    let digest = String::from_utf8(digest)
        .map_err(|_| Error::MalformedFraming("digest not utf-8".into()))?;
    let toml_len = read_u32(input)? as usize;
    let mut toml = vec![0u8; toml_len];
    read_exact(input, &mut toml)?;
    let toml =
        String::from_utf8(toml).map_err(|_| Error::MalformedFraming("config not utf-8".into()))?;
    let config = RunConfig::from_toml(&toml)?;
    let n = read_u64(input)?;
    let m = read_u64(input)?;
    let budget = read_f64(input)?;
    let d = read_f64(input)?;
    let mode_len = read_u16(input)? as usize;
    let mut mode = vec![0u8; mode_len];
    read_exact(input, &mut mode)?;
    if n != config.protocol.n
        || m != config.protocol.m
        || budget != config.protocol.budget
        || d != config.protocol.d
    {
        return Err(Error::MalformedFraming(
            "header fields disagree with embedded config".into(),
        ));
    }
    if config.digest() != digest {
        return Err(Error::MalformedFraming("config digest mismatch".into()));
    }

    let mut machines = Vec::with_capacity(m as usize);
    for expect in 0..m {
        let id = read_u64(input)?;
        if id != expect {
            return Err(Error::MalformedFraming(format!(
                "machine record {expect} has id {id}"
            )));
        }
        let messages = read_u64(input)?;
        let payload_bits = read_u64(input)?;
        let framing_bits = read_u64(input)?;
        let bit_len = read_u64(input)? as usize;
        let byte_len = read_u32(input)? as usize;
        let mut bytes = vec![0u8; byte_len];
        read_exact(input, &mut bytes)?;
        machines.push(MachineBlob {
            machine_id: id,
            messages,
            payload_bits,
            framing_bits,
            bits: BitBuf::from_bytes(bytes, bit_len)?,
        });
    }
    Ok(Transcript {
        config,
        digest,
        machines,
    })
}

pub fn load_transcript(path: &Path) -> Result<Transcript> {
    let mut file = std::io::BufReader::new(std::fs::File::open(path)?);
    read_transcript(&mut file)
}

/// What replaying a transcript through the central machine yields.
#[derive(Debug, Clone)]
pub struct Replay {
    pub field: CoeffField,
    pub jhat: Option<u32>,
    pub selected: CoeffField,
    /// Ledger recomputed from the raw bits.
    pub ledger: BudgetLedger,
}

/// Decode every machine's stream and rerun aggregation and selection.
pub fn replay(transcript: &Transcript) -> Result<Replay> {
    let cfg = &transcript.config.protocol;
    cfg.validate()?;
    let basis = cfg.build_basis()?;
    let schedule = crate::schedule::build_schedule(cfg)?;
    let f = crate::bitcodec::frac_bits(cfg.n, cfg.d)?;

    let mut ledger = BudgetLedger::new(cfg.m as usize);
    let mut decoded: Vec<Option<Vec<f64>>> = vec![None; cfg.m as usize];
    for (i, blob) in transcript.machines.iter().enumerate() {
        let parsed = parse_stream(&blob.bits, f)?;
        let expected = schedule.machine_load(i as u64);
        if parsed.len() as u64 != expected {
            return Err(Error::MalformedFraming(format!(
                "machine {i} carries {} messages, schedule expects {expected}",
                parsed.len()
            )));
        }
        let mut values = Vec::with_capacity(parsed.len());
        for (value, msg) in parsed {
            ledger.record(i, &msg);
            values.push(value);
        }
        if expected > 0 {
            decoded[i] = Some(values);
        }
    }
    let field = aggregate(&schedule, &decoded)?;
    let (jhat, selected) = if cfg.mode == Mode::Adaptive {
        let j = reselect(cfg, &basis, &schedule, &field, cfg.tau);
        (Some(j), field.truncated_below(j))
    } else {
        (None, field.clone())
    };
    Ok(Replay {
        field,
        jhat,
        selected,
        ledger,
    })
}

/// Outcome of verifying a transcript's accounting against its own bits.
#[derive(Debug, Clone, serde::Serialize)]
pub struct AuditReport {
    pub machines: usize,
    pub messages: u64,
    pub payload_bits: u64,
    pub framing_bits: u64,
    pub counts_match_header: bool,
    pub mean_payload_per_message: f64,
    pub length_bound: f64,
    pub length_bound_ok: bool,
}

/// Replay and verify: framing parses, recomputed bit counts equal the stored
/// ones, and the mean payload respects the expected-length bound.
pub fn audit(transcript: &Transcript) -> Result<AuditReport> {
    let replayed = replay(transcript)?;
    let cfg = &transcript.config.protocol;
    let mut counts_ok = true;
    for (i, blob) in transcript.machines.iter().enumerate() {
        let got = &replayed.ledger.machines[i];
        if got.messages != blob.messages
            || got.payload_bits != blob.payload_bits
            || got.framing_bits != blob.framing_bits
        {
            counts_ok = false;
        }
    }
    let audit = crate::bitcodec::expected_length_audit(&replayed.ledger, cfg.n, cfg.d);
    Ok(AuditReport {
        machines: transcript.machines.len(),
        messages: replayed.ledger.total_messages(),
        payload_bits: replayed.ledger.total_payload(),
        framing_bits: replayed.ledger.total_framing(),
        counts_match_header: counts_ok,
        mean_payload_per_message: audit.mean_payload_bits,
        length_bound: audit.bound,
        length_bound_ok: !audit.violated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{Mode, ProtocolConfig};
    use crate::protocol::run_protocol;
    use crate::signal::{make_signal, SignalSpec};

    fn run_and_config(mode: Mode) -> (RunConfig, RunOutcome) {
        // budgets picked so every mode's schedule is feasible at n = 2^10
        let budget = if mode == Mode::NonAdaptiveII { 60.0 } else { 200.0 };
        let protocol = ProtocolConfig {
            mode,
            n: 1 << 10,
            m: 8,
            budget,
            s: if mode == Mode::Adaptive { None } else { Some(0.75) },
            radius: if mode == Mode::Adaptive { None } else { Some(1.0) },
            s_min: (mode == Mode::Adaptive).then_some(0.5),
            s_max: (mode == Mode::Adaptive).then_some(0.9),
            sigma: 1.0,
            seed: 21,
            ..ProtocolConfig::default()
        };
        let basis = protocol.build_basis().unwrap();
        let truth = make_signal(&SignalSpec::worst_case(0.75, 1.0, 10)).unwrap();
        let out = run_protocol(&protocol, &basis, &truth, 21).unwrap();
        let config = RunConfig {
            protocol,
            signal: None,
            sweep: None,
            calibrate: None,
            theory: None,
        };
        (config, out)
    }

    #[test]
    fn roundtrip_preserves_machine_blobs() {
        let (config, out) = run_and_config(Mode::NonAdaptiveI);
        let mut buf = Vec::new();
        write_transcript(&mut buf, &config, &out).unwrap();
        let t = read_transcript(&mut buf.as_slice()).unwrap();
        assert_eq!(t.machines.len(), 8);
        assert_eq!(t.digest, config.digest());
        for (blob, ledger) in t.machines.iter().zip(out.estimate.ledger.machines.iter()) {
            assert_eq!(blob.payload_bits, ledger.payload_bits);
            assert_eq!(blob.framing_bits, ledger.framing_bits);
            assert_eq!(blob.messages, ledger.messages);
        }
    }

    #[test]
    fn replay_reproduces_the_estimator_bitwise() {
        for mode in [Mode::NonAdaptiveI, Mode::NonAdaptiveII, Mode::Adaptive] {
            let (config, out) = run_and_config(mode);
            let mut buf = Vec::new();
            write_transcript(&mut buf, &config, &out).unwrap();
            let t = read_transcript(&mut buf.as_slice()).unwrap();
            let replayed = replay(&t).unwrap();
            assert_eq!(replayed.jhat, out.estimate.jhat, "{mode}");
            assert_eq!(
                replayed.selected.flat(),
                out.estimate.selected.flat(),
                "selected estimator must replay bitwise in mode {mode}"
            );
        }
    }

    #[test]
    fn audit_passes_on_fresh_transcript() {
        let (config, out) = run_and_config(Mode::NonAdaptiveII);
        let mut buf = Vec::new();
        write_transcript(&mut buf, &config, &out).unwrap();
        let t = read_transcript(&mut buf.as_slice()).unwrap();
        let report = audit(&t).unwrap();
        assert!(report.counts_match_header);
        assert!(report.length_bound_ok);
        assert_eq!(report.payload_bits, out.estimate.ledger.total_payload());
    }

    #[test]
    fn truncation_and_corruption_are_detected() {
        let (config, out) = run_and_config(Mode::NonAdaptiveI);
        let mut buf = Vec::new();
        write_transcript(&mut buf, &config, &out).unwrap();

        let cut = &buf[..buf.len() - 3];
        assert!(matches!(
            read_transcript(&mut &cut[..]),
            Err(Error::MalformedFraming(_))
        ));

        // flip a config byte: digest check must catch it
        let mut bad = buf.clone();
        let pos = MAGIC.len() + 2 + 16 + 4 + 40; // somewhere inside the TOML
        bad[pos] ^= 0x01;
        assert!(read_transcript(&mut bad.as_slice()).is_err());
    }
}
