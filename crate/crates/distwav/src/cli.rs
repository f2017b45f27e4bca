//! Command-line front end.
//!
//! Subcommands wrap the library flows one-to-one: `run` executes a single
//! protocol run and writes a transcript plus a report, `sweep` runs the
//! Monte Carlo harness, `theory` exports reference curves, `calibrate-tau`
//! runs the Lepski threshold pilot, and `audit` replays a transcript and
//! verifies its bit accounting.
//!
//! Exit codes: 0 success, 2 invalid config, 3 infeasible schedule or
//! corrupt transcript, 4 I/O failure.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::harness;
use crate::protocol::run_protocol;
use crate::signal;
use crate::theory;
use crate::transcript;

#[derive(Parser)]
#[command(name = "distwav", version, about = "Distributed wavelet regression under bit budgets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct CommonArgs {
    /// TOML config file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (created if missing).
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Master seed override; defaults to the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Report format.
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Subcommand)]
enum Command {
    /// One protocol run: transcript + report.
    Run {
        #[command(flatten)]
        common: CommonArgs,
        /// Also dump the generated samples as TSV.
        #[arg(long)]
        dump_samples: bool,
    },
    /// Monte Carlo sweep over n, m, B, or s.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Reference-curve export for a parameter grid.
    Theory {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Lepski threshold pilot on the zero signal.
    CalibrateTau {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Replay a transcript and verify its bit accounting.
    Audit {
        /// Transcript file written by `run`.
        #[arg(long)]
        transcript: PathBuf,
    },
}

/// Entry point for the binary.
pub fn run_main() -> i32 {
    let cli = Cli::parse();
    dispatch(cli)
}

/// Testable entry point.
pub fn run_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => dispatch(cli),
        Err(e) => {
            eprint!("{e}");
            2
        }
    }
}

fn dispatch(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::Run {
            common,
            dump_samples,
        } => setup(&common).and_then(|cfg| cmd_run(&cfg, &common, dump_samples)),
        Command::Sweep { common } => setup(&common).and_then(|cfg| cmd_sweep(&cfg, &common)),
        Command::Theory { common } => setup(&common).and_then(|cfg| cmd_theory(&cfg, &common)),
        Command::CalibrateTau { common } => {
            setup(&common).and_then(|cfg| cmd_calibrate(&cfg, &common))
        }
        Command::Audit { transcript } => cmd_audit(&transcript),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn setup(common: &CommonArgs) -> Result<RunConfig> {
    if let Some(t) = common.threads {
        // a pool may already exist on repeated in-process calls; keep it
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    let mut cfg = RunConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.protocol.seed = seed;
    }
    std::fs::create_dir_all(&common.out)?;
    Ok(cfg)
}

/// Flat single-run report.
#[derive(Debug, Serialize)]
struct RunReport {
    digest: String,
    config: crate::config::ProtocolConfig,
    signal: signal::SignalSpec,
    signal_sup_norm: f64,
    risk_l2: f64,
    risk_linf: f64,
    jhat: Option<u32>,
    total_payload_bits: u64,
    total_framing_bits: u64,
    max_machine_payload_bits: u64,
    messages: u64,
    discarded_machines: u64,
    overrun_machines: usize,
    length_audit: crate::bitcodec::LengthAudit,
}

fn cmd_run(cfg: &RunConfig, common: &CommonArgs, dump_samples: bool) -> Result<()> {
    cfg.protocol.validate()?;
    let basis = cfg.protocol.build_basis()?;
    let spec = cfg.signal_spec(&basis)?;
    let truth = signal::make_signal(&spec)?;
    let seed = cfg.protocol.seed;
    let out = run_protocol(&cfg.protocol, &basis, &truth, seed)?;

    let (risk_l2, risk_linf) = harness::risk_pair(&out.estimate.selected, &truth, &basis);
    let stats = out.stats();

    let report = RunReport {
        digest: cfg.digest(),
        config: cfg.protocol.clone(),
        signal: spec.clone(),
        signal_sup_norm: signal::sup_norm(&basis, &truth),
        risk_l2,
        risk_linf,
        jhat: stats.jhat,
        total_payload_bits: stats.total_payload_bits,
        total_framing_bits: stats.total_framing_bits,
        max_machine_payload_bits: stats.max_machine_payload_bits,
        messages: stats.messages,
        discarded_machines: stats.discarded_machines,
        overrun_machines: stats.overruns,
        length_audit: crate::bitcodec::expected_length_audit(
            &out.estimate.ledger,
            cfg.protocol.n,
            cfg.protocol.d,
        ),
    };

    transcript::save_transcript(&common.out.join("transcript.bin"), cfg, &out)?;
    match common.format {
        Format::Json => write_text(
            &common.out.join("run_report.json"),
            &serde_json::to_string_pretty(&report).expect("report serializes"),
        )?,
        Format::Csv => {
            let header = "mode,n,m,B,D,seed,risk_l2,risk_linf,jhat,total_payload_bits,max_machine_payload_bits";
            let row = format!(
                "{},{},{},{},{},{},{:e},{:e},{},{},{}",
                report.config.mode,
                report.config.n,
                report.config.m,
                report.config.budget,
                report.config.d,
                report.config.seed,
                report.risk_l2,
                report.risk_linf,
                report.jhat.map_or(String::new(), |j| j.to_string()),
                report.total_payload_bits,
                report.max_machine_payload_bits,
            );
            write_text(
                &common.out.join("run_report.csv"),
                &format!("{header}\n{row}\n"),
            )?;
        }
    }
    if dump_samples {
        let data = signal::generate_data(
            &truth,
            &basis,
            cfg.protocol.n,
            cfg.protocol.m,
            cfg.protocol.sigma,
            seed,
        )?;
        let mut file =
            std::io::BufWriter::new(std::fs::File::create(common.out.join("samples.tsv"))?);
        signal::write_samples_tsv(&mut file, &data)?;
    }

    println!(
        "run {}: mode={} n={} m={} B={} risk_l2={:.6e} risk_linf={:.6e}{}",
        report.digest,
        report.config.mode,
        report.config.n,
        report.config.m,
        report.config.budget,
        report.risk_l2,
        report.risk_linf,
        report.jhat.map_or(String::new(), |j| format!(" jhat={j}")),
    );
    println!(
        "bits: payload={} framing={} max_machine={} messages={} overruns={}",
        report.total_payload_bits,
        report.total_framing_bits,
        report.max_machine_payload_bits,
        report.messages,
        report.overrun_machines,
    );
    Ok(())
}

fn cmd_sweep(cfg: &RunConfig, common: &CommonArgs) -> Result<()> {
    let sweep = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| Error::ConfigInvalid("sweep subcommand needs a [sweep] section".into()))?;
    let basis = cfg.protocol.build_basis()?;
    let spec = cfg.signal_spec(&basis)?;
    let report = harness::run_sweep(
        &cfg.protocol,
        &spec,
        sweep.axis,
        &sweep.values,
        sweep.replicates,
        cfg.protocol.seed,
    )?;
    match common.format {
        Format::Json => write_text(
            &common.out.join("sweep_report.json"),
            &serde_json::to_string_pretty(&report).expect("report serializes"),
        )?,
        Format::Csv => write_text(
            &common.out.join("sweep_report.csv"),
            &harness::sweep_csv(&report),
        )?,
    }
    for cell in &report.cells {
        match &cell.error {
            Some(e) => println!("cell value={}: failed: {e}", cell.value),
            None => println!(
                "cell value={}: mean_risk_l2={:.6e} (se {:.1e}) max_payload={}{}",
                cell.value,
                cell.mean_risk_l2,
                cell.se_risk_l2,
                cell.max_machine_payload_bits,
                cell.mean_jhat
                    .map_or(String::new(), |j| format!(" mean_jhat={j:.2}")),
            ),
        }
    }
    if let Some(fit) = &report.slope_l2 {
        println!(
            "fitted log2-log2 slope: {:.4} +- {:.4}",
            fit.slope, fit.half_width
        );
    }
    Ok(())
}

fn cmd_theory(cfg: &RunConfig, common: &CommonArgs) -> Result<()> {
    let rows = cfg
        .theory
        .as_ref()
        .map(|t| t.rows.clone())
        .unwrap_or_default();
    let mut csv = String::from(theory::CURVE_CSV_HEADER);
    csv.push('\n');
    let mut computed = Vec::new();
    for row in &rows {
        let curve = theory::curve_row(row);
        csv.push_str(&theory::curve_csv_line(&curve));
        csv.push('\n');
        computed.push(curve);
    }
    write_text(&common.out.join("reference_curves.csv"), &csv)?;
    if common.format == Format::Json {
        write_text(
            &common.out.join("reference_curves.json"),
            &serde_json::to_string_pretty(&computed).expect("curves serialize"),
        )?;
    }
    println!("{} reference rows written", computed.len());
    Ok(())
}

fn cmd_calibrate(cfg: &RunConfig, common: &CommonArgs) -> Result<()> {
    let cal = cfg
        .calibrate
        .as_ref()
        .ok_or_else(|| Error::ConfigInvalid("calibrate-tau needs a [calibrate] section".into()))?;
    let report = harness::calibrate_tau(
        &cfg.protocol,
        &cal.taus,
        cal.replicates,
        cal.target,
        cfg.protocol.seed,
    )?;
    write_text(
        &common.out.join("calibration.json"),
        &serde_json::to_string_pretty(&report).expect("report serializes"),
    )?;
    for (tau, rate) in report.taus.iter().zip(report.zero_rates.iter()) {
        println!("tau={tau}: P(jhat = 0) = {rate:.3}");
    }
    match report.chosen {
        Some(t) => println!("smallest tau reaching {:.0}%: {t}", report.target * 100.0),
        None => println!("no candidate tau reaches the target rate"),
    }
    Ok(())
}

fn cmd_audit(path: &Path) -> Result<()> {
    let t = transcript::load_transcript(path)?;
    let report = transcript::audit(&t)?;
    if !report.counts_match_header {
        println!("FAIL: recomputed bit counts disagree with the transcript header");
        return Err(Error::MalformedFraming(
            "bit accounting mismatch on replay".into(),
        ));
    }
    println!(
        "OK: {} machines, {} messages, payload={} framing={} mean_payload/msg={:.2} (bound {:.2})",
        report.machines,
        report.messages,
        report.payload_bits,
        report.framing_bits,
        report.mean_payload_per_message,
        report.length_bound,
    );
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text)?;
    Ok(())
}
