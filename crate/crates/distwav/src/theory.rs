//! Reference quantities for the harness: the budget-driven rate parameter
//! `delta_n`, regime classification with lower-bound rate curves, the oracle
//! resolution level `j*`, and the feasibility boundary `s_min` for the
//! adaptive range.
//!
//! Rate expressions drop unspecified constants (set to 1); they calibrate
//! slopes, never absolute risk levels.

use serde::Serialize;

use crate::config::SeqExpr;
use crate::error::Result;
use crate::schedule::AdaptiveLayout;
use crate::signal::Norm;

/// `delta_n` is the fixed point of
/// `delta = min( m / (n log2 n), m / (n sum_i min(log2(n) delta^{1/(1+2s)} B_i, 1)) )`.
///
/// The left side grows and the right side falls in `delta`, so the root is
/// unique; bisection runs in log-space to give relative (not absolute)
/// precision, which small fixed points in the single-machine regime need.
pub fn solve_delta_n(n: u64, m: u64, budgets: &[f64], s: f64) -> f64 {
    assert!(n >= 4 && m >= 1 && s > 0.0);
    assert_eq!(budgets.len(), m as usize);
    assert!(budgets.iter().all(|&b| b > 0.0));
    let rhs = |delta: f64| rhs_value(n, m, budgets, s, delta);

    let mut lo = -80.0f64; // log2 delta
    let mut hi = 0.0f64;
    // g(delta) = rhs(delta) - delta is strictly decreasing with g(2^-80) > 0
    for _ in 0..220 {
        let mid = 0.5 * (lo + hi);
        let delta = mid.exp2();
        if rhs(delta) - delta > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let delta = (0.5 * (lo + hi)).exp2();
    debug_assert!(
        (rhs(delta) - delta).abs() <= 1e-12 * delta,
        "fixed point residual too large at delta = {delta}"
    );
    delta
}

fn rhs_value(n: u64, m: u64, budgets: &[f64], s: f64, delta: f64) -> f64 {
    let log2n = (n as f64).log2();
    let first = m as f64 / (n as f64 * log2n);
    let pow = delta.powf(1.0 / (1.0 + 2.0 * s));
    let sum: f64 = budgets
        .iter()
        .map(|&b| (log2n * pow * b).min(1.0))
        .sum();
    let second = m as f64 / (n as f64 * sum);
    first.min(second)
}

/// Which branch of the fixed-point equation is active at the solution.
pub fn active_branch(n: u64, m: u64, budgets: &[f64], s: f64, delta: f64) -> Regime {
    let log2n = (n as f64).log2();
    let first = m as f64 / (n as f64 * log2n);
    if (delta - first).abs() <= 1e-9 * first {
        return Regime::SingleMachine;
    }
    let pow = delta.powf(1.0 / (1.0 + 2.0 * s));
    let all_clipped = budgets.iter().all(|&b| log2n * pow * b >= 1.0 - 1e-12);
    if all_clipped {
        Regime::HighBudget
    } else {
        Regime::Intermediate
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    HighBudget,
    Intermediate,
    SingleMachine,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Regime::HighBudget => "high-budget",
            Regime::Intermediate => "intermediate",
            Regime::SingleMachine => "single-machine",
        };
        write!(f, "{s}")
    }
}

/// Regime label, boundaries, and lower-bound rate curves for equal budgets.
#[derive(Debug, Clone, Serialize)]
pub struct RegimeReport {
    pub regime: Regime,
    pub delta_n: f64,
    /// L2 lower-bound rate for the labelled regime.
    pub lb_rate_l2: f64,
    /// Sup-norm lower-bound rate for the analogous sup-norm regime.
    pub lb_rate_linf: f64,
    /// Budget above which the full L2 rate is attainable.
    pub threshold_high_l2: f64,
    /// Budget above which the full sup-norm rate is attainable.
    pub threshold_high_linf: f64,
    /// Budget below which a single machine does as well as all of them.
    pub threshold_single: f64,
    /// Whether `log2 n <= m <= n^{2s/(1+2s)} / log2^2 n` holds at this n
    /// (reported, not enforced).
    pub m_assumption_ok: bool,
}

/// Classify the budget regime for equal per-machine budgets.
///
/// Boundaries follow the closed-side convention of the defining
/// inequalities: the single-machine test is strict (`B < threshold`), the
/// high-budget test is inclusive (`B >= threshold`). When the two thresholds
/// cross (tiny `m`), the single-machine label wins and the intermediate
/// regime is empty.
pub fn classify_regime(n: u64, m: u64, budget: f64, s: f64, radius: f64) -> RegimeReport {
    let nf = n as f64;
    let log2n = nf.log2();
    let exp = 1.0 / (1.0 + 2.0 * s);
    let threshold_single = (nf * log2n / (m as f64).powf(2.0 + 2.0 * s)).powf(exp);
    let threshold_high_l2 = nf.powf(exp) / log2n;
    let threshold_high_linf = (nf / log2n.powf(3.0 + 4.0 * s)).powf(exp);

    let regime = if budget < threshold_single {
        Regime::SingleMachine
    } else if budget >= threshold_high_l2 {
        Regime::HighBudget
    } else {
        Regime::Intermediate
    };

    let l_factor = radius.powf(2.0 / (1.0 + 2.0 * s));
    let base_l2 = nf.powf(-2.0 * s / (1.0 + 2.0 * s));
    let lb_rate_l2 = match regime {
        Regime::HighBudget => l_factor * base_l2,
        Regime::Intermediate => {
            l_factor
                * (nf.powf(exp) / (budget * log2n)).powf(2.0 * s / (2.0 + 2.0 * s))
                * base_l2
        }
        Regime::SingleMachine => {
            l_factor * (nf * log2n / m as f64).powf(-2.0 * s / (1.0 + 2.0 * s))
        }
    };

    let linf_regime = if budget < threshold_single {
        Regime::SingleMachine
    } else if budget >= threshold_high_linf {
        Regime::HighBudget
    } else {
        Regime::Intermediate
    };
    let base_linf = (nf / log2n).powf(-s / (1.0 + 2.0 * s));
    let lb_rate_linf = match linf_regime {
        Regime::HighBudget => base_linf,
        Regime::Intermediate => {
            (nf.powf(exp) / (budget * log2n.powf((3.0 + 4.0 * s) / (1.0 + 2.0 * s))))
                .powf(s / (2.0 + 2.0 * s))
                * base_linf
        }
        Regime::SingleMachine => (nf * log2n / m as f64).powf(-s / (1.0 + 2.0 * s)),
    };

    let delta_n = solve_delta_n(n, m, &vec![budget; m as usize], s);
    let m_assumption_ok =
        (m as f64) >= log2n && (m as f64) <= nf.powf(2.0 * s / (1.0 + 2.0 * s)) / (log2n * log2n);

    RegimeReport {
        regime,
        delta_n,
        lb_rate_l2,
        lb_rate_linf,
        threshold_high_l2,
        threshold_high_linf,
        threshold_single,
        m_assumption_ok,
    }
}

/// Oracle resolution level: the smallest `j` in the adaptive ladder at which
/// the worst-case squared bias drops below the level's noise term.
///
/// Uses the exact ladder of the adaptive machine partition (`s_min` fixes the
/// ladder; `s` and `radius` describe the signal class). Returns `(j*, n_{j*})`.
pub fn optimal_level(
    n: u64,
    m: u64,
    budget: f64,
    s_min: f64,
    s: f64,
    radius: f64,
    norm: Norm,
) -> Result<(u32, u64)> {
    let layout = AdaptiveLayout::new(n, m, budget, s_min)?;
    Ok(optimal_level_for_ladder(&layout, s, radius, norm))
}

/// Same, against a prebuilt ladder.
pub fn optimal_level_for_ladder(
    layout: &AdaptiveLayout,
    s: f64,
    radius: f64,
    norm: Norm,
) -> (u32, u64) {
    let j_max = layout.j_max;
    for j in 0..=j_max {
        let n_j = layout.n_ladder[j as usize] as f64;
        let ok = match norm {
            Norm::L2 => {
                let bias_sq = radius * radius * 2f64.powf(-2.0 * j as f64 * s);
                bias_sq <= (1u64 << j) as f64 / n_j
            }
            Norm::Linf => {
                let bias = radius * 2f64.powf(-(j as f64) * s);
                bias <= (j as f64 * (1u64 << j) as f64 / n_j).sqrt()
            }
        };
        if ok {
            return (j, layout.n_ladder[j as usize]);
        }
    }
    (j_max, layout.n_ladder[j_max as usize])
}

/// Asymptotic feasibility boundary of the adaptive range for sequence
/// families `m(n)`, `B(n)` of the form `c n^a (log2 n)^b`.
///
/// Finds `inf { s > 0 : (n (log2 n)^2 / m^{2+2s})^{1/(1+2s)} <= B }` in the
/// large-`n` limit by lexicographic comparison of the `n`- and `log`-
/// exponents. Returns 0 when every positive `s` qualifies and `+inf` when
/// none below 50 does.
pub fn s_min_feasible(m: &SeqExpr, budget: &SeqExpr) -> f64 {
    let holds = |s: f64| -> bool {
        let (am, bm, cm) = m.as_family();
        let (ab, bb, cb) = budget.as_family();
        let q = 1.0 + 2.0 * s;
        let lhs_n = (1.0 - (2.0 + 2.0 * s) * am) / q;
        let lhs_log = (2.0 - (2.0 + 2.0 * s) * bm) / q;
        let lhs_c = cm.powf(-(2.0 + 2.0 * s) / q);
        let eps = 1e-12;
        if (lhs_n - ab).abs() > eps {
            return lhs_n < ab;
        }
        if (lhs_log - bb).abs() > eps {
            return lhs_log < bb;
        }
        lhs_c <= cb * (1.0 + 1e-12)
    };

    if !holds(50.0) {
        return f64::INFINITY;
    }
    if holds(1e-9) {
        return 0.0;
    }
    let mut lo = 1e-9; // fails
    let mut hi = 50.0; // holds
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if holds(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// One row of the reference-curve export.
#[derive(Debug, Clone, Serialize)]
pub struct CurveRow {
    pub n: u64,
    pub m: f64,
    pub budget: f64,
    pub s: f64,
    pub regime: Regime,
    pub delta_n: f64,
    pub lb_rate_l2: f64,
    pub lb_rate_linf: f64,
    pub j_star: Option<u32>,
    pub s_min: f64,
}

/// Evaluate the reference quantities for one grid row.
pub fn curve_row(row: &crate::config::TheoryRow) -> CurveRow {
    let m_val = row.m.eval(row.n).round().max(1.0);
    let b_val = row.budget.eval(row.n);
    let report = classify_regime(row.n, m_val as u64, b_val, row.s, row.radius);
    let j_star = optimal_level(
        row.n,
        m_val as u64,
        b_val,
        row.s,
        row.s,
        row.radius,
        Norm::L2,
    )
    .ok()
    .map(|(j, _)| j);
    CurveRow {
        n: row.n,
        m: m_val,
        budget: b_val,
        s: row.s,
        regime: report.regime,
        delta_n: report.delta_n,
        lb_rate_l2: report.lb_rate_l2,
        lb_rate_linf: report.lb_rate_linf,
        j_star,
        s_min: s_min_feasible(&row.m, &row.budget),
    }
}

pub const CURVE_CSV_HEADER: &str =
    "n,m,B,s,regime,delta_n,lb_rate_l2,lb_rate_linf,j_star,s_min";

pub fn curve_csv_line(row: &CurveRow) -> String {
    format!(
        "{},{},{},{},{},{:e},{:e},{:e},{},{}",
        row.n,
        row.m,
        row.budget,
        row.s,
        row.regime,
        row.delta_n,
        row.lb_rate_l2,
        row.lb_rate_linf,
        row.j_star.map_or(String::from(""), |j| j.to_string()),
        row.s_min,
    )
}
