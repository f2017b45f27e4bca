//! Deterministic machine-to-coefficient assignments.
//!
//! Coefficients are ordered by `v = 2^j + k`. Every mode assigns each machine
//! a contiguous `v`-interval:
//!
//! * shared: all machines carry `v <= n^{1/(1+2s)} /\ B/log2(n)`;
//! * grouped: `eta` groups, group `g` carrying the `g`-th allowance-sized
//!   block of coefficients (optionally capped for the sup-norm method);
//! * adaptive: the first `floor(m/2)` machines (set `I`) carry all levels
//!   below `j_{B,n} = floor(log2 floor(B/log2 n))`; the rest split into
//!   `eta~ = j_max - j_{B,n}` level groups, and the group for level
//!   `j_{B,n}+t` splits again into `2^t` shift blocks of `2^{j_{B,n}}`
//!   coefficients each.
//!
//! Group sizes use floor division and surplus machines are discarded; the
//! discard count is reported.

use serde::Serialize;

use crate::config::{Mode, ProtocolConfig};
use crate::error::{Error, Result};

/// One aggregation unit: the machines in `machines` all transmit every
/// coefficient in `v_lo..=v_hi`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Block {
    pub v_lo: u64,
    pub v_hi: u64,
    /// Half-open machine range, 0-based.
    pub machines: (u64, u64),
}

impl Block {
    pub fn machine_count(&self) -> u64 {
        self.machines.1 - self.machines.0
    }

    pub fn coeff_count(&self) -> u64 {
        self.v_hi - self.v_lo + 1
    }
}

/// The adaptive machine partition and its effective-sample-size ladder.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdaptiveLayout {
    pub j_bn: u32,
    pub j_max: u32,
    pub eta_tilde: u32,
    /// `floor(m/2)`: machines carrying all levels below `j_bn`.
    pub i_size: u64,
    /// `floor(ceil(m/2) / eta~)`: machines per level group.
    pub group_size: u64,
    /// `floor(2^-t group_size)` for `t = 0..eta~`.
    pub subgroup_sizes: Vec<u64>,
    /// Effective sample size `n_j` backing each level `j = 0..=j_max`.
    pub n_ladder: Vec<u64>,
}

impl AdaptiveLayout {
    pub fn new(n: u64, m: u64, budget: f64, s_min: f64) -> Result<Self> {
        let log2n = (n as f64).log2();
        let allowance = (budget / log2n).floor();
        if allowance < 1.0 {
            return Err(Error::InfeasibleSchedule(format!(
                "budget {budget} transmits no coefficient at n = {n}"
            )));
        }
        let allowance = allowance as u64;
        let j_bn = 63 - allowance.leading_zeros();
        let j_max_a = ((n as f64 * budget).log2() / (2.0 + 2.0 * s_min)).ceil() as i64;
        let j_max_b = (log2n / (1.0 + 2.0 * s_min)).ceil() as i64;
        let j_max = j_max_a.min(j_max_b).max(0) as u32;
        if j_max > 30 {
            return Err(Error::InfeasibleSchedule(format!(
                "top level {j_max} is out of the simulable range"
            )));
        }
        let eta_tilde = j_max.saturating_sub(j_bn);
        let i_size = m / 2;
        if i_size < 1 {
            return Err(Error::InfeasibleSchedule("adaptive mode needs m >= 2".into()));
        }
        let half_up = m - i_size; // ceil(m/2)
        let group_size = if eta_tilde > 0 {
            half_up / eta_tilde as u64
        } else {
            0
        };
        let mut subgroup_sizes = Vec::new();
        for t in 0..eta_tilde {
            let size = group_size >> t;
            if size < 1 {
                return Err(Error::InfeasibleSchedule(format!(
                    "level group {t} would split into empty subgroups; \
                     need m >= 2 * eta~ * 2^(eta~ - 1) = {}",
                    2 * eta_tilde as u64 * (1u64 << (eta_tilde - 1))
                )));
            }
            subgroup_sizes.push(size);
        }
        let shard = n / m;
        let mut n_ladder = Vec::with_capacity(j_max as usize + 1);
        for j in 0..=j_max {
            let machines = if j < j_bn {
                i_size
            } else if eta_tilde == 0 {
                1
            } else {
                let t = j - j_bn;
                if (t as usize) < subgroup_sizes.len() {
                    subgroup_sizes[t as usize]
                } else {
                    // one level past the last group: extend the halving
                    // pattern, clamped to a single machine
                    (group_size >> t).max(1)
                }
            };
            n_ladder.push(machines * shard);
        }
        Ok(AdaptiveLayout {
            j_bn,
            j_max,
            eta_tilde,
            i_size,
            group_size,
            subgroup_sizes,
            n_ladder,
        })
    }
}

/// Full assignment for one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Schedule {
    pub mode: Mode,
    pub blocks: Vec<Block>,
    /// Inclusive `v` interval per machine; `None` for idle machines.
    pub per_machine: Vec<Option<(u64, u64)>>,
    /// Machines left without work by floor-sized grouping.
    pub discarded_machines: u64,
    /// Highest scheduled flat index.
    pub max_v: u64,
    /// Deepest scheduled level.
    pub max_level: u32,
    /// Group count for the grouped modes.
    pub eta: Option<u64>,
    pub adaptive: Option<AdaptiveLayout>,
}

impl Schedule {
    fn from_blocks(
        mode: Mode,
        m: u64,
        blocks: Vec<Block>,
        eta: Option<u64>,
        adaptive: Option<AdaptiveLayout>,
    ) -> Schedule {
        let mut per_machine = vec![None; m as usize];
        for b in &blocks {
            for i in b.machines.0..b.machines.1 {
                per_machine[i as usize] = Some((b.v_lo, b.v_hi));
            }
        }
        let discarded = per_machine.iter().filter(|a| a.is_none()).count() as u64;
        let max_v = blocks.iter().map(|b| b.v_hi).max().unwrap_or(0);
        let max_level = if max_v == 0 {
            0
        } else {
            crate::wavelet::level_shift_of(max_v).0
        };
        Schedule {
            mode,
            blocks,
            per_machine,
            discarded_machines: discarded,
            max_v,
            max_level,
            eta,
            adaptive,
        }
    }

    /// Number of coefficients machine `i` must transmit.
    pub fn machine_load(&self, i: u64) -> u64 {
        match self.per_machine[i as usize] {
            Some((lo, hi)) => hi - lo + 1,
            None => 0,
        }
    }
}

/// Build the deterministic schedule for a validated config.
pub fn build_schedule(cfg: &ProtocolConfig) -> Result<Schedule> {
    cfg.validate()?;
    let n = cfg.n;
    let m = cfg.m;
    let log2n = cfg.log2n();
    match cfg.mode {
        Mode::NonAdaptiveI => {
            let s = cfg.s_required()?;
            let cut = (n as f64)
                .powf(1.0 / (1.0 + 2.0 * s))
                .min(cfg.budget / log2n)
                .floor();
            if cut < 1.0 {
                return Err(Error::InfeasibleSchedule(format!(
                    "budget {} transmits no coefficient at n = {n}",
                    cfg.budget
                )));
            }
            let max_v = cut as u64;
            let blocks = vec![Block {
                v_lo: 1,
                v_hi: max_v,
                machines: (0, m),
            }];
            Ok(Schedule::from_blocks(cfg.mode, m, blocks, None, None))
        }
        Mode::NonAdaptiveII => {
            let s = cfg.s_required()?;
            let l = cfg.radius_required()?;
            let allowance = cfg.coeff_allowance();
            debug_assert!(allowance >= 1);
            let eta_f = (l * l * n as f64).powf(1.0 / (2.0 + 2.0 * s))
                * (log2n / cfg.budget).powf((1.0 + 2.0 * s) / (2.0 + 2.0 * s));
            let eta = (eta_f.floor() as u64).min(m);
            if eta < 1 {
                return Err(Error::InfeasibleSchedule(format!(
                    "group count formula gives eta = 0 at B = {}; the shared \
                     schedule already covers this budget",
                    cfg.budget
                )));
            }
            let group = m / eta;
            let blocks = (0..eta)
                .map(|g| Block {
                    v_lo: g * allowance + 1,
                    v_hi: (g + 1) * allowance,
                    machines: (g * group, (g + 1) * group),
                })
                .collect();
            Ok(Schedule::from_blocks(cfg.mode, m, blocks, Some(eta), None))
        }
        Mode::LinftyCombined => {
            let s = cfg.s_required()?;
            let allowance = cfg.coeff_allowance();
            debug_assert!(allowance >= 1);
            let cap = (n as f64 / log2n).powf(1.0 / (1.0 + 2.0 * s)).floor() as u64;
            let eta_f = (n as f64 * log2n.powf(2.0 * s) / cfg.budget.powf(1.0 + 2.0 * s))
                .powf(1.0 / (2.0 + 2.0 * s));
            let eta = (eta_f.floor() as u64).min(m).max(1);
            let group = m / eta;
            let mut blocks = Vec::new();
            for g in 0..eta {
                let lo = (g * allowance).min(cap) + 1;
                let hi = ((g + 1) * allowance).min(cap);
                if lo > hi {
                    break; // later groups fall entirely past the cap and idle
                }
                blocks.push(Block {
                    v_lo: lo,
                    v_hi: hi,
                    machines: (g * group, (g + 1) * group),
                });
            }
            if blocks.is_empty() {
                return Err(Error::InfeasibleSchedule(
                    "resolution cap leaves no coefficient to transmit".into(),
                ));
            }
            Ok(Schedule::from_blocks(cfg.mode, m, blocks, Some(eta), None))
        }
        Mode::Adaptive => {
            let layout = AdaptiveLayout::new(n, m, cfg.budget, cfg.s_min_required()?)?;
            let mut blocks = Vec::new();
            if layout.j_bn > 0 {
                blocks.push(Block {
                    v_lo: 1,
                    v_hi: (1u64 << layout.j_bn) - 1,
                    machines: (0, layout.i_size),
                });
            }
            let width = 1u64 << layout.j_bn;
            for t in 0..layout.eta_tilde {
                let j = layout.j_bn + t;
                let sub = layout.subgroup_sizes[t as usize];
                let level_base = layout.i_size + t as u64 * layout.group_size;
                for block_idx in 0..(1u64 << t) {
                    let start = level_base + block_idx * sub;
                    blocks.push(Block {
                        v_lo: (1u64 << j) + block_idx * width,
                        v_hi: (1u64 << j) + (block_idx + 1) * width - 1,
                        machines: (start, start + sub),
                    });
                }
            }
            Ok(Schedule::from_blocks(cfg.mode, m, blocks, None, Some(layout)))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ProtocolConfig;
    use crate::wavelet::WaveletFamily;

    fn base(mode: Mode) -> ProtocolConfig {
        ProtocolConfig {
            mode,
            ..ProtocolConfig::default()
        }
    }

    #[test]
    fn shared_schedule_takes_the_min_cut() {
        // large budget: every machine carries floor(n^{1/(1+2s)}) coefficients
        let cfg = ProtocolConfig {
            n: 1 << 12,
            m: 8,
            budget: 1e6,
            s: Some(0.75),
            ..base(Mode::NonAdaptiveI)
        };
        let sched = build_schedule(&cfg).unwrap();
        let want = (4096f64).powf(1.0 / 2.5).floor() as u64; // 27
        assert_eq!(sched.max_v, want);
        assert_eq!(sched.blocks.len(), 1);
        assert_eq!(sched.blocks[0].machines, (0, 8));
        for i in 0..8 {
            assert_eq!(sched.machine_load(i), want);
        }

        // small budget: the bit constraint binds instead
        let cfg = ProtocolConfig {
            budget: 36.0, // B / log2 n = 3
            ..cfg
        };
        let sched = build_schedule(&cfg).unwrap();
        assert_eq!(sched.max_v, 3);
    }

    #[test]
    fn grouped_schedule_matches_the_printed_formula() {
        // independent evaluation: eta = floor((L^2 n)^{1/(2+2s)} (log2n/B)^{(1+2s)/(2+2s)}) /\ m
        let cfg = ProtocolConfig {
            n: 1 << 20,
            m: 64,
            budget: 40.0,
            s: Some(1.0),
            radius: Some(1.0),
            family: WaveletFamily::Daubechies(4),
            ..base(Mode::NonAdaptiveII)
        };
        let sched = build_schedule(&cfg).unwrap();
        let eta_oracle = ((1048576f64).powf(0.25) * (20f64 / 40.0).powf(0.75)).floor() as u64;
        assert_eq!(eta_oracle, 19);
        assert_eq!(sched.eta, Some(19));
        assert_eq!(sched.blocks.len(), 19);
        // groups of floor(64/19) = 3 machines, 7 discarded
        assert_eq!(sched.discarded_machines, 64 - 19 * 3);
        for (g, b) in sched.blocks.iter().enumerate() {
            let g = g as u64;
            assert_eq!(b.machines, (g * 3, (g + 1) * 3));
            assert_eq!((b.v_lo, b.v_hi), (2 * g + 1, 2 * g + 2));
        }
        assert_eq!(sched.max_v, 38);
    }

    #[test]
    fn grouped_blocks_partition_a_prefix() {
        let cfg = ProtocolConfig {
            n: 1 << 16,
            m: 64,
            budget: 128.0,
            s: Some(0.75),
            ..base(Mode::NonAdaptiveII)
        };
        let sched = build_schedule(&cfg).unwrap();
        let mut owned = vec![0u32; sched.max_v as usize + 1];
        for b in &sched.blocks {
            for v in b.v_lo..=b.v_hi {
                owned[v as usize] += 1;
            }
        }
        assert!(owned[1..].iter().all(|&c| c == 1), "each v owned exactly once");
    }

    #[test]
    fn linfty_ranges_are_capped() {
        let cfg = ProtocolConfig {
            n: 1 << 16,
            m: 32,
            budget: 256.0,
            s: Some(0.75),
            ..base(Mode::LinftyCombined)
        };
        let sched = build_schedule(&cfg).unwrap();
        let cap = (65536f64 / 16.0).powf(1.0 / 2.5).floor() as u64;
        assert!(sched.max_v <= cap);
        let eta = sched.eta.unwrap();
        assert!(eta >= 1);
        // per-machine load never exceeds the allowance
        for i in 0..32 {
            assert!(sched.machine_load(i) <= cfg.coeff_allowance());
        }
    }

    #[test]
    fn adaptive_layout_partitions_levels_and_shifts() {
        let cfg = ProtocolConfig {
            n: 1 << 16,
            m: 64,
            budget: 1024.0,
            family: WaveletFamily::Daubechies(4),
            s: None,
            radius: None,
            s_min: Some(0.5),
            s_max: Some(1.6),
            ..base(Mode::Adaptive)
        };
        let sched = build_schedule(&cfg).unwrap();
        let layout = sched.adaptive.as_ref().unwrap();
        // allowance = 64 -> j_bn = 6; j_max = min(ceil(26/3), ceil(16/2)) = 8
        assert_eq!(layout.j_bn, 6);
        assert_eq!(layout.j_max, 8);
        assert_eq!(layout.eta_tilde, 2);
        assert_eq!(layout.i_size, 32);
        assert_eq!(layout.group_size, 16);
        assert_eq!(layout.subgroup_sizes, vec![16, 8]);
        // ladder: n/m = 1024
        assert_eq!(layout.n_ladder[..6], [32 * 1024; 6]);
        assert_eq!(layout.n_ladder[6], 16 * 1024);
        assert_eq!(layout.n_ladder[7], 8 * 1024);
        assert_eq!(layout.n_ladder[8], 4 * 1024);

        // blocks: levels 0..5 to I, level 6 in one shift block, level 7 in two
        assert_eq!(sched.blocks[0], Block { v_lo: 1, v_hi: 63, machines: (0, 32) });
        assert_eq!(
            sched.blocks[1],
            Block { v_lo: 64, v_hi: 127, machines: (32, 48) }
        );
        assert_eq!(
            sched.blocks[2],
            Block { v_lo: 128, v_hi: 191, machines: (48, 56) }
        );
        assert_eq!(
            sched.blocks[3],
            Block { v_lo: 192, v_hi: 255, machines: (56, 64) }
        );
        assert_eq!(sched.max_level, 7);
        // every machine transmits at most the allowance
        for i in 0..64 {
            assert!(sched.machine_load(i) <= 64);
        }
    }

    #[test]
    fn adaptive_infeasible_when_subgroups_empty() {
        // m = 2 eta~: one machine per level group cannot split into 2^t subgroups
        let cfg = ProtocolConfig {
            n: 1 << 16,
            m: 4,
            budget: 1024.0,
            family: WaveletFamily::Daubechies(4),
            s: None,
            radius: None,
            s_min: Some(0.5),
            s_max: Some(1.6),
            ..base(Mode::Adaptive)
        };
        match build_schedule(&cfg) {
            Err(Error::InfeasibleSchedule(msg)) => {
                assert!(msg.contains("2 * eta~"), "{msg}");
            }
            other => panic!("expected infeasible, got {other:?}"),
        }
    }

    #[test]
    fn grouped_mode_rejects_oversized_budget() {
        // eta floors to zero once B > (L^2 n)^{1/(1+2s)} log2 n
        let cfg = ProtocolConfig {
            n: 1 << 10,
            m: 8,
            budget: 1e5,
            s: Some(0.5),
            ..base(Mode::NonAdaptiveII)
        };
        assert!(matches!(
            build_schedule(&cfg),
            Err(Error::InfeasibleSchedule(_))
        ));
    }
}
