//! Modified Lepski level selection in the central machine.
//!
//! Candidate estimators `f~(j)` sum the aggregated coefficients over levels
//! `< j`. The selected level is the smallest `j` whose estimator stays close
//! to every finer one:
//!
//! * L2 rule: `||f~(j) - f~(l)||_2^2 <= tau 2^l / n_l` for all `l > j`, with
//!   the squared distance computed exactly in the coefficient domain;
//! * sup-norm rule: `||f~(j) - f~(l)||_inf <= tau sqrt(l 2^l / n_l)`, with the
//!   sup taken over a dyadic midpoint grid.
//!
//! The top candidate `j_max` has an empty condition set and is always
//! admissible, so selection never fails.

/// Smallest admissible level under the L2 stopping rule.
///
/// `level_energies[r]` is `sum_k fhat_{rk}^2` for level `r` (length `j_max`);
/// `n_ladder[l]` is the effective sample size behind level `l`
/// (length `j_max + 1`).
pub fn select_l2(level_energies: &[f64], n_ladder: &[u64], tau: f64) -> u32 {
    assert!(tau > 0.0);
    let j_max = n_ladder.len() - 1;
    assert!(level_energies.len() >= j_max);
    // prefix[i] = sum of level energies below i
    let mut prefix = vec![0.0; j_max + 1];
    for i in 0..j_max {
        prefix[i + 1] = prefix[i] + level_energies[i];
    }
    'candidates: for j in 0..j_max {
        for l in (j + 1)..=j_max {
            let dist_sq = prefix[l] - prefix[j];
            let threshold = tau * (1u64 << l) as f64 / n_ladder[l] as f64;
            if dist_sq > threshold {
                continue 'candidates;
            }
        }
        return j as u32;
    }
    j_max as u32
}

/// Smallest admissible level under the sup-norm stopping rule.
///
/// `level_values[r]` holds the synthesized level-`r` component on a common
/// evaluation grid.
pub fn select_linf(level_values: &[Vec<f64>], n_ladder: &[u64], tau: f64) -> u32 {
    assert!(tau > 0.0);
    let j_max = n_ladder.len() - 1;
    assert!(level_values.len() >= j_max);
    let grid = level_values.first().map_or(0, |v| v.len());
    'candidates: for j in 0..j_max {
        let mut cum = vec![0.0f64; grid];
        for l in (j + 1)..=j_max {
            for (c, v) in cum.iter_mut().zip(level_values[l - 1].iter()) {
                *c += v;
            }
            let dist = cum.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
            let threshold =
                tau * (l as f64 * (1u64 << l) as f64 / n_ladder[l] as f64).sqrt();
            if dist > threshold {
                continue 'candidates;
            }
        }
        return j as u32;
    }
    j_max as u32
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn identical_estimates_select_zero() {
        let energies = vec![0.0; 6];
        let ladder = vec![1000u64; 7];
        assert_eq!(select_l2(&energies, &ladder, 2.0), 0);
        let values = vec![vec![0.0; 64]; 6];
        assert_eq!(select_linf(&values, &ladder, 2.0), 0);
    }

    #[test]
    fn huge_tau_selects_zero() {
        let energies = vec![5.0, 3.0, 2.0, 1.0];
        let ladder = vec![100u64; 5];
        assert_eq!(select_l2(&energies, &ladder, 1e12), 0);
    }

    #[test]
    fn single_big_level_forces_selection_past_it() {
        // only level 3 carries energy, larger than every threshold:
        // candidates 0..=3 fail at some l >= 4, candidate 4 sees nothing
        let mut energies = vec![0.0; 8];
        energies[3] = 1e6;
        let ladder = vec![10u64; 9];
        assert_eq!(select_l2(&energies, &ladder, 2.0), 4);
    }

    #[test]
    fn linf_single_level_perturbation() {
        // level 4 component exceeds the threshold only at l = 5
        let grid = 128;
        let j_max = 6;
        let mut values = vec![vec![0.0; grid]; j_max];
        let ladder = vec![1000u64; j_max + 1];
        let threshold_at_5 = 2.0 * (5.0 * 32.0 / 1000.0f64).sqrt();
        values[4][17] = threshold_at_5 * 3.0;
        assert_eq!(select_linf(&values, &ladder, 2.0), 5);
    }

    #[test]
    fn enlarging_tau_never_increases_selection() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(31);
        for _ in 0..200 {
            let j_max = rng.gen_range(2..9usize);
            let energies: Vec<f64> = (0..j_max)
                .map(|_| rng.gen_range(0.0..1.0f64).powi(3))
                .collect();
            let ladder: Vec<u64> = (0..=j_max)
                .map(|l| 1u64 << (14 - l.min(12)))
                .collect();
            let mut taus: Vec<f64> = (0..4).map(|_| rng.gen_range(1.01..50.0)).collect();
            taus.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let picks: Vec<u32> = taus
                .iter()
                .map(|&t| select_l2(&energies, &ladder, t))
                .collect();
            for w in picks.windows(2) {
                assert!(w[0] >= w[1], "tau up, jhat must not increase: {picks:?}");
            }
        }
    }
}
