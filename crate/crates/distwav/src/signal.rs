//! Ground-truth signals and the distributed regression data they generate.
//!
//! A signal is a coefficient field inside a prescribed Besov ball. Data for
//! machine `i` are `n/m` pairs `(T, X)` with `T ~ U(0,1)` and
//! `X = f0(T) + sigma * eps`, drawn from that machine's own ChaCha stream so
//! that parallel and serial generation agree bit for bit.

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::io::Write;

use crate::error::{Error, Result};
use crate::rng;
use crate::wavelet::{besov_holder_norm, besov_sobolev_norm, CoeffField, WaveletBasis};

/// Which norm a Besov radius constraint refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    #[default]
    L2,
    Linf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignalKind {
    /// `f_{jk} = c 2^{-j(s+1/2)}` with `c` scaled so the Besov norm equals `L`.
    WorstCase,
    /// Worst-case magnitudes with independent random signs.
    RandomSign,
    Zero,
    /// Explicit flat coefficient vector in `v = 2^j + k` order.
    Custom(Vec<f64>),
}

/// Recipe for a ground-truth signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalSpec {
    pub kind: SignalKind,
    pub s: f64,
    /// Besov ball radius.
    pub radius: f64,
    /// Truncation level of the realized coefficient field.
    pub j_truth: u32,
    pub seed: u64,
    /// Norm convention the radius applies to.
    pub norm: Norm,
}

impl SignalSpec {
    pub fn worst_case(s: f64, radius: f64, j_truth: u32) -> Self {
        SignalSpec {
            kind: SignalKind::WorstCase,
            s,
            radius,
            j_truth,
            seed: 0,
            norm: Norm::L2,
        }
    }

    pub fn zero(j_truth: u32) -> Self {
        SignalSpec {
            kind: SignalKind::Zero,
            s: 1.0,
            radius: 1.0,
            j_truth,
            seed: 0,
            norm: Norm::L2,
        }
    }
}

/// Default truncation level: deep for Haar (exact arithmetic), limited by the
/// refinement grid for Daubechies.
pub fn default_j_truth(basis: &WaveletBasis) -> u32 {
    match basis.family() {
        crate::wavelet::WaveletFamily::Haar => 16,
        crate::wavelet::WaveletFamily::Daubechies(_) => basis.refinement_depth() - 4,
    }
}

/// Construct the coefficient field a spec describes.
pub fn make_signal(spec: &SignalSpec) -> Result<CoeffField> {
    if spec.j_truth > 24 {
        return Err(Error::ConfigInvalid(format!(
            "truncation level {} too deep",
            spec.j_truth
        )));
    }
    let field = match &spec.kind {
        SignalKind::Zero => CoeffField::zeros(spec.j_truth),
        SignalKind::WorstCase | SignalKind::RandomSign => {
            if !(spec.s > 0.0) || !(spec.radius > 0.0) {
                return Err(Error::ConfigInvalid(format!(
                    "worst-case signal needs s > 0 and L > 0, got s={} L={}",
                    spec.s, spec.radius
                )));
            }
            // every full level contributes the same amount to either Besov
            // norm, so the scale factor is the radius itself
            let mut f = CoeffField::zeros(spec.j_truth);
            let mut rng = rng::signal_rng(spec.seed);
            for j in 0..=spec.j_truth {
                let mag = spec.radius * 2f64.powf(-(j as f64) * (spec.s + 0.5));
                for k in 0..(1u64 << j) {
                    let sign = match spec.kind {
                        SignalKind::RandomSign => {
                            if rng.gen::<bool>() {
                                1.0
                            } else {
                                -1.0
                            }
                        }
                        _ => 1.0,
                    };
                    f.set(j, k, sign * mag);
                }
            }
            f
        }
        SignalKind::Custom(coeffs) => CoeffField::from_flat(spec.j_truth, coeffs.clone())?,
    };
    let norm = match spec.norm {
        Norm::L2 => besov_sobolev_norm(&field, spec.s),
        Norm::Linf => besov_holder_norm(&field, spec.s),
    };
    if norm > spec.radius * (1.0 + 1e-9) {
        return Err(Error::NormViolation {
            norm,
            radius: spec.radius,
        });
    }
    Ok(field)
}

/// One machine's shard of the regression data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionSample {
    pub machine_id: u64,
    pub designs: Vec<f64>,
    pub responses: Vec<f64>,
}

/// Standard normal via Box-Muller; consumes two uniforms per draw.
fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>(); // (0, 1]
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Generate the full distributed sample: `m` shards of `n/m` observations.
pub fn generate_data(
    field: &CoeffField,
    basis: &WaveletBasis,
    n: u64,
    m: u64,
    sigma: f64,
    seed: u64,
) -> Result<Vec<RegressionSample>> {
    if m == 0 || n % m != 0 {
        return Err(Error::ConfigInvalid(format!(
            "machine count {m} must divide sample size {n}"
        )));
    }
    if sigma < 0.0 {
        return Err(Error::ConfigInvalid(format!("sigma = {sigma} < 0")));
    }
    let shard = (n / m) as usize;
    Ok((0..m)
        .map(|i| {
            let mut rng = rng::machine_rng(seed, i);
            let mut designs = Vec::with_capacity(shard);
            let mut responses = Vec::with_capacity(shard);
            for _ in 0..shard {
                let t: f64 = rng.gen();
                let eps = standard_normal(&mut rng);
                designs.push(t);
                responses.push(basis.eval_field(field, t) + sigma * eps);
            }
            RegressionSample {
                machine_id: i,
                designs,
                responses,
            }
        })
        .collect())
}

/// Local unbiased estimator of one wavelet coefficient:
/// the shard mean of `X * psi_{jk}(T)`.
pub fn empirical_coefficient(
    sample: &RegressionSample,
    basis: &WaveletBasis,
    j: u32,
    k: u64,
) -> f64 {
    debug_assert!(!sample.designs.is_empty());
    let mut acc = 0.0;
    for (&t, &x) in sample.designs.iter().zip(sample.responses.iter()) {
        acc += x * basis.eval_psi_unchecked(j, k, t);
    }
    acc / sample.designs.len() as f64
}

/// All empirical coefficients for the contiguous index range
/// `v_lo..=v_hi` in one pass over the shard.
pub fn empirical_coefficients_range(
    sample: &RegressionSample,
    basis: &WaveletBasis,
    v_lo: u64,
    v_hi: u64,
) -> Vec<f64> {
    debug_assert!(v_lo >= 1 && v_lo <= v_hi);
    let (j_lo, _) = crate::wavelet::level_shift_of(v_lo);
    let (j_hi, _) = crate::wavelet::level_shift_of(v_hi);
    let support = basis_support(basis);
    let mut acc = vec![0.0f64; (v_hi - v_lo + 1) as usize];
    for (&t, &x) in sample.designs.iter().zip(sample.responses.iter()) {
        for j in j_lo..=j_hi {
            let pow = (1u64 << j) as f64;
            let y = pow * t;
            let scale = pow.sqrt() * x;
            let lo = (y - support).floor() as i64 + 1;
            let hi = y.floor() as i64;
            let modulus = 1i64 << j;
            for kp in lo..=hi {
                let k = kp.rem_euclid(modulus) as u64;
                let v = (1u64 << j) + k;
                if v >= v_lo && v <= v_hi {
                    acc[(v - v_lo) as usize] += scale * basis_mother(basis, y - kp as f64);
                }
            }
        }
    }
    let inv = 1.0 / sample.designs.len() as f64;
    for a in acc.iter_mut() {
        *a *= inv;
    }
    acc
}

fn basis_support(basis: &WaveletBasis) -> f64 {
    match basis.family() {
        crate::wavelet::WaveletFamily::Haar => 1.0,
        crate::wavelet::WaveletFamily::Daubechies(n) => (2 * n - 1) as f64,
    }
}

fn basis_mother(basis: &WaveletBasis, x: f64) -> f64 {
    basis.mother(x)
}

/// Sup norm of the synthesized signal on a dyadic grid (exact for Haar).
pub fn sup_norm(basis: &WaveletBasis, field: &CoeffField) -> f64 {
    let g = 1usize << (field.max_level() + 3).min(20);
    (0..g)
        .map(|i| basis.eval_field(field, (i as f64 + 0.5) / g as f64).abs())
        .fold(0.0, f64::max)
}

/// Dump samples as columnar text: header plus one record per observation,
/// 17 significant digits.
pub fn write_samples_tsv<W: Write>(out: &mut W, samples: &[RegressionSample]) -> Result<()> {
    writeln!(out, "machine_id\tl\tT\tX")?;
    for s in samples {
        for (l, (&t, &x)) in s.designs.iter().zip(s.responses.iter()).enumerate() {
            writeln!(out, "{}\t{}\t{:.16e}\t{:.16e}", s.machine_id, l + 1, t, x)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wavelet::level_shift_of;

    #[test]
    fn zero_spec_gives_zero_field() {
        let f = make_signal(&SignalSpec::zero(5)).unwrap();
        assert!(f.flat().iter().all(|&c| c == 0.0));
    }

    #[test]
    fn worst_case_norm_equals_radius() {
        // s=1, L=1: every level contributes exactly 1, so c = 1
        let spec = SignalSpec::worst_case(1.0, 1.0, 8);
        let f = make_signal(&spec).unwrap();
        assert!((f.get(0, 0) - 1.0).abs() < 1e-15);
        assert!((f.get(3, 5) - 2f64.powf(-4.5)).abs() < 1e-15);
        assert!((besov_sobolev_norm(&f, 1.0) - 1.0).abs() < 1e-12);

        let spec = SignalSpec {
            norm: Norm::Linf,
            ..SignalSpec::worst_case(0.6, 2.5, 6)
        };
        let f = make_signal(&spec).unwrap();
        assert!((besov_holder_norm(&f, 0.6) - 2.5).abs() < 1e-12);
    }

    #[test]
    fn random_sign_preserves_norms() {
        let base = SignalSpec::worst_case(0.75, 1.0, 7);
        let flipped = SignalSpec {
            kind: SignalKind::RandomSign,
            seed: 11,
            ..base.clone()
        };
        let a = make_signal(&base).unwrap();
        let b = make_signal(&flipped).unwrap();
        assert!((besov_sobolev_norm(&a, 0.75) - besov_sobolev_norm(&b, 0.75)).abs() < 1e-12);
        assert!((besov_holder_norm(&a, 0.75) - besov_holder_norm(&b, 0.75)).abs() < 1e-12);
        assert!(b.flat().iter().any(|&c| c < 0.0), "some signs must flip");
    }

    #[test]
    fn custom_field_outside_ball_is_rejected() {
        let spec = SignalSpec {
            kind: SignalKind::Custom(vec![9.0, 0.0, 0.0]),
            s: 1.0,
            radius: 1.0,
            j_truth: 1,
            seed: 0,
            norm: Norm::L2,
        };
        assert!(matches!(
            make_signal(&spec),
            Err(Error::NormViolation { .. })
        ));
    }

    #[test]
    fn noiseless_zero_signal_yields_zero_responses() {
        let basis = WaveletBasis::haar();
        let f = CoeffField::zeros(4);
        let data = generate_data(&f, &basis, 64, 4, 0.0, 3).unwrap();
        assert_eq!(data.len(), 4);
        for s in &data {
            assert_eq!(s.designs.len(), 16);
            assert!(s.responses.iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn noiseless_haar_signal_matches_sign_of_half() {
        let basis = WaveletBasis::haar();
        let mut f = CoeffField::zeros(0);
        f.set(0, 0, 1.0);
        let data = generate_data(&f, &basis, 200, 2, 0.0, 3).unwrap();
        for s in &data {
            for (&t, &x) in s.designs.iter().zip(s.responses.iter()) {
                assert_eq!(x, if t < 0.5 { 1.0 } else { -1.0 });
            }
        }
    }

    #[test]
    fn generation_is_deterministic_and_partitioned() {
        let basis = WaveletBasis::haar();
        let f = make_signal(&SignalSpec::worst_case(1.0, 1.0, 6)).unwrap();
        let a = generate_data(&f, &basis, 256, 8, 1.0, 17).unwrap();
        let b = generate_data(&f, &basis, 256, 8, 1.0, 17).unwrap();
        assert_eq!(a, b);
        let total: usize = a.iter().map(|s| s.designs.len()).sum();
        assert_eq!(total, 256);

        // machine streams are independent of m: machine 0 draws the same
        // prefix whether there are 8 or 4 machines
        let c = generate_data(&f, &basis, 128, 4, 1.0, 17).unwrap();
        assert_eq!(a[0].designs[..32], c[0].designs[..32]);
        assert!(generate_data(&f, &basis, 100, 3, 1.0, 17).is_err());
    }

    #[test]
    fn mean_response_approximates_integral() {
        let basis = WaveletBasis::haar();
        let f = make_signal(&SignalSpec::worst_case(1.0, 1.0, 8)).unwrap();
        let data = generate_data(&f, &basis, 100_000, 1, 1.0, 5).unwrap();
        let mean: f64 =
            data[0].responses.iter().sum::<f64>() / data[0].responses.len() as f64;
        // integral of the expansion on a fine grid
        let g = 1 << 12;
        let integral: f64 = (0..g)
            .map(|i| basis.eval_field(&f, (i as f64 + 0.5) / g as f64))
            .sum::<f64>()
            / g as f64;
        let tol = 3e-2 * (1.0 + sup_norm(&basis, &f));
        assert!(
            (mean - integral).abs() < tol,
            "mean {mean} vs integral {integral}"
        );
    }

    #[test]
    fn empirical_coefficient_hand_example() {
        let basis = WaveletBasis::haar();
        let sample = RegressionSample {
            machine_id: 0,
            designs: vec![0.25],
            responses: vec![2.0],
        };
        assert_eq!(empirical_coefficient(&sample, &basis, 0, 0), 2.0);

        let zero = RegressionSample {
            machine_id: 0,
            designs: vec![0.1, 0.7],
            responses: vec![0.0, 0.0],
        };
        assert_eq!(empirical_coefficient(&zero, &basis, 1, 0), 0.0);
    }

    #[test]
    fn empirical_coefficient_recovers_own_coefficient() {
        // f0 = psi_{21}, sigma = 0: estimate converges to 1
        let basis = WaveletBasis::haar();
        let mut f = CoeffField::zeros(2);
        f.set(2, 1, 1.0);
        let data = generate_data(&f, &basis, 100_000, 1, 0.0, 7).unwrap();
        let est = empirical_coefficient(&data[0], &basis, 2, 1);
        assert!((est - 1.0).abs() < 5.0 / (100_000f64).sqrt(), "est {est}");
    }

    #[test]
    fn unbiasedness_over_replications() {
        let basis = WaveletBasis::haar();
        let f = make_signal(&SignalSpec::worst_case(1.0, 1.0, 6)).unwrap();
        let truth = f.get(1, 0);
        let reps = 10_000;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for r in 0..reps {
            let data = generate_data(&f, &basis, 100, 1, 1.0, 1000 + r).unwrap();
            let est = empirical_coefficient(&data[0], &basis, 1, 0);
            sum += est;
            sumsq += est * est;
        }
        let mean = sum / reps as f64;
        let var = (sumsq / reps as f64 - mean * mean).max(0.0);
        let se = (var / reps as f64).sqrt();
        assert!(
            (mean - truth).abs() < 4.0 * se,
            "mean {mean} truth {truth} se {se}"
        );
    }

    #[test]
    fn batch_matches_single_coefficient_path() {
        let basis = WaveletBasis::daubechies(4).unwrap();
        let f = make_signal(&SignalSpec {
            seed: 2,
            kind: SignalKind::RandomSign,
            ..SignalSpec::worst_case(1.0, 1.0, 6)
        })
        .unwrap();
        let data = generate_data(&f, &basis, 2048, 4, 1.0, 23).unwrap();
        let (v_lo, v_hi) = (1u64, 40u64);
        for s in &data {
            let batch = empirical_coefficients_range(s, &basis, v_lo, v_hi);
            for v in v_lo..=v_hi {
                let (j, k) = level_shift_of(v);
                let single = empirical_coefficient(s, &basis, j, k);
                let b = batch[(v - v_lo) as usize];
                assert!(
                    (single - b).abs() < 1e-12,
                    "v={v}: batch {b} vs single {single}"
                );
            }
        }
    }

    #[test]
    fn tsv_dump_has_header_and_rows() {
        let basis = WaveletBasis::haar();
        let f = CoeffField::zeros(2);
        let data = generate_data(&f, &basis, 8, 2, 1.0, 1).unwrap();
        let mut buf = Vec::new();
        write_samples_tsv(&mut buf, &data).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "machine_id\tl\tT\tX");
        assert_eq!(lines.len(), 1 + 8);
    }
}
