//! End-to-end protocol execution: local estimation, quantized transmission,
//! central aggregation, and (for the adaptive mode) Lepski selection.

use rayon::prelude::*;
use serde::Serialize;

use crate::bitcodec::{self, BitMessage, BudgetLedger};
use crate::config::{Mode, ProtocolConfig};
use crate::error::{Error, Result};
use crate::lepski;
use crate::schedule::{build_schedule, Schedule};
use crate::signal::{self, Norm, RegressionSample};
use crate::wavelet::{CoeffField, WaveletBasis};

/// What one machine produces: per scheduled coefficient, the raw local
/// estimate, its encoded message, and the value the center will decode.
#[derive(Debug, Clone)]
pub struct LocalResult {
    pub v_lo: u64,
    pub v_hi: u64,
    pub empirical: Vec<f64>,
    pub messages: Vec<BitMessage>,
    pub decoded: Vec<f64>,
}

/// Run the local phase of one machine over its scheduled slice.
pub fn run_local(
    sample: &RegressionSample,
    v_range: (u64, u64),
    basis: &WaveletBasis,
    n: u64,
    d: f64,
) -> Result<LocalResult> {
    let (v_lo, v_hi) = v_range;
    let empirical = signal::empirical_coefficients_range(sample, basis, v_lo, v_hi);
    let mut messages = Vec::with_capacity(empirical.len());
    let mut decoded = Vec::with_capacity(empirical.len());
    for &value in &empirical {
        let msg = bitcodec::trans_approx_encode(value, n, d)?;
        decoded.push(bitcodec::trans_approx_decode(&msg)?);
        messages.push(msg);
    }
    Ok(LocalResult {
        v_lo,
        v_hi,
        empirical,
        messages,
        decoded,
    })
}

/// Average decoded values over each block's machines.
///
/// `decoded_per_machine[i]` must cover machine `i`'s scheduled range, in `v`
/// order. Missing machines make the block's coefficients unrecoverable.
pub fn aggregate(
    schedule: &Schedule,
    decoded_per_machine: &[Option<Vec<f64>>],
) -> Result<CoeffField> {
    let mut field = CoeffField::zeros(schedule.max_level);
    for block in &schedule.blocks {
        let count = block.machine_count();
        for v in block.v_lo..=block.v_hi {
            let mut sum = 0.0;
            for i in block.machines.0..block.machines.1 {
                let values = decoded_per_machine[i as usize].as_ref().ok_or({
                    let (j, k) = crate::wavelet::level_shift_of(v);
                    Error::MissingMessage { j, k }
                })?;
                let offset = (v - block.v_lo) as usize;
                let got = values.get(offset).ok_or({
                    let (j, k) = crate::wavelet::level_shift_of(v);
                    Error::MissingMessage { j, k }
                })?;
                sum += got;
            }
            field.set_v(v, sum / count as f64);
        }
    }
    Ok(field)
}

/// The central machine's output.
#[derive(Debug, Clone)]
pub struct AggregatedEstimate {
    /// All aggregated coefficients, untruncated.
    pub field: CoeffField,
    /// Selected level (adaptive mode only).
    pub jhat: Option<u32>,
    /// Final estimator: `field` truncated below `jhat` when adaptive.
    pub selected: CoeffField,
    pub ledger: BudgetLedger,
    /// Machines whose realized paper-accounting payload exceeded B.
    pub overrun_machines: Vec<u64>,
    /// Mean decode error per coefficient (`decoded - empirical`).
    pub decode_error: CoeffField,
    /// Mean sampling error per coefficient (`empirical - truth`).
    pub sampling_error: CoeffField,
}

/// Summary counters for reports.
#[derive(Debug, Clone, Serialize)]
pub struct RunStats {
    pub total_payload_bits: u64,
    pub total_framing_bits: u64,
    pub max_machine_payload_bits: u64,
    pub messages: u64,
    pub discarded_machines: u64,
    pub jhat: Option<u32>,
    pub overruns: usize,
}

/// Outcome of one full protocol run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub schedule: Schedule,
    pub estimate: AggregatedEstimate,
    /// Per-machine local results (messages included), for transcripts.
    pub locals: Vec<Option<LocalResult>>,
}

impl RunOutcome {
    pub fn stats(&self) -> RunStats {
        RunStats {
            total_payload_bits: self.estimate.ledger.total_payload(),
            total_framing_bits: self.estimate.ledger.total_framing(),
            max_machine_payload_bits: self.estimate.ledger.max_machine_payload(),
            messages: self.estimate.ledger.total_messages(),
            discarded_machines: self.schedule.discarded_machines,
            jhat: self.estimate.jhat,
            overruns: self.estimate.overrun_machines.len(),
        }
    }
}

/// Synthesized values of a single level's component on a midpoint grid.
fn level_values(
    basis: &WaveletBasis,
    field: &CoeffField,
    level: u32,
    grid_size: usize,
) -> Vec<f64> {
    let mut single = CoeffField::zeros(level);
    for k in 0..(1u64 << level) {
        single.set(level, k, field.get(level, k));
    }
    (0..grid_size)
        .map(|i| basis.eval_field(&single, (i as f64 + 0.5) / grid_size as f64))
        .collect()
}

/// Execute the full pipeline on freshly generated data.
///
/// Deterministic in `(cfg, truth, seed)`; machine-level work runs in
/// parallel but aggregation order is fixed.
pub fn run_protocol(
    cfg: &ProtocolConfig,
    basis: &WaveletBasis,
    truth: &CoeffField,
    seed: u64,
) -> Result<RunOutcome> {
    let schedule = build_schedule(cfg)?;
    if schedule.max_level > basis.max_eval_level() {
        return Err(Error::LevelTooDeep {
            j: schedule.max_level,
            depth: basis.refinement_depth(),
        });
    }
    let data = signal::generate_data(truth, basis, cfg.n, cfg.m, cfg.sigma, seed)?;

    let locals: Vec<Option<LocalResult>> = data
        .par_iter()
        .zip(schedule.per_machine.par_iter())
        .map(|(sample, assignment)| {
            assignment
                .map(|range| run_local(sample, range, basis, cfg.n, cfg.d))
                .transpose()
        })
        .collect::<Result<_>>()?;

    let mut ledger = BudgetLedger::new(cfg.m as usize);
    let mut overrun_machines = Vec::new();
    for (i, local) in locals.iter().enumerate() {
        if let Some(local) = local {
            for msg in &local.messages {
                ledger.record(i, msg);
            }
            if ledger.machines[i].payload_bits as f64 > cfg.budget {
                overrun_machines.push(i as u64);
            }
        }
    }

    let decoded: Vec<Option<Vec<f64>>> = locals
        .iter()
        .map(|l| l.as_ref().map(|l| l.decoded.clone()))
        .collect();
    let field = aggregate(&schedule, &decoded)?;

    // per-coefficient diagnostics, averaged over the owning block
    let mut decode_error = CoeffField::zeros(schedule.max_level);
    let mut sampling_error = CoeffField::zeros(schedule.max_level);
    for block in &schedule.blocks {
        let count = block.machine_count() as f64;
        for v in block.v_lo..=block.v_hi {
            let (j, k) = crate::wavelet::level_shift_of(v);
            let mut w = 0.0;
            let mut z = 0.0;
            for i in block.machines.0..block.machines.1 {
                let local = locals[i as usize].as_ref().expect("aggregated block");
                let off = (v - block.v_lo) as usize;
                w += local.decoded[off] - local.empirical[off];
                z += local.empirical[off] - truth.get(j, k);
            }
            decode_error.set_v(v, w / count);
            sampling_error.set_v(v, z / count);
        }
    }

    let (jhat, selected) = match cfg.mode {
        Mode::Adaptive => {
            let layout = schedule.adaptive.as_ref().expect("adaptive layout");
            let jhat = match cfg.norm {
                Norm::L2 => {
                    let energies: Vec<f64> = (0..layout.j_max)
                        .map(|r| field.level_energy(r))
                        .collect();
                    lepski::select_l2(&energies, &layout.n_ladder, cfg.tau)
                }
                Norm::Linf => {
                    let shift = (layout.j_max + 3).min(22);
                    let grid = 1usize << shift;
                    let values: Vec<Vec<f64>> = (0..layout.j_max)
                        .map(|r| level_values(basis, &field, r, grid))
                        .collect();
                    lepski::select_linf(&values, &layout.n_ladder, cfg.tau)
                }
            };
            (Some(jhat), field.truncated_below(jhat))
        }
        _ => (None, field.clone()),
    };

    Ok(RunOutcome {
        schedule,
        estimate: AggregatedEstimate {
            field,
            jhat,
            selected,
            ledger,
            overrun_machines,
            decode_error,
            sampling_error,
        },
        locals,
    })
}

/// Re-run only the selection stage on an already aggregated field, under a
/// different threshold constant. Used by tau calibration.
pub fn reselect(
    cfg: &ProtocolConfig,
    basis: &WaveletBasis,
    schedule: &Schedule,
    field: &CoeffField,
    tau: f64,
) -> u32 {
    let layout = schedule.adaptive.as_ref().expect("adaptive layout");
    match cfg.norm {
        Norm::L2 => {
            let energies: Vec<f64> = (0..layout.j_max).map(|r| field.level_energy(r)).collect();
            lepski::select_l2(&energies, &layout.n_ladder, tau)
        }
        Norm::Linf => {
            let shift = (layout.j_max + 3).min(22);
            let grid = 1usize << shift;
            let values: Vec<Vec<f64>> = (0..layout.j_max)
                .map(|r| level_values(basis, field, r, grid))
                .collect();
            lepski::select_linf(&values, &layout.n_ladder, tau)
        }
    }
}
