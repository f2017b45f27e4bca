//! Orthonormal wavelet systems on the unit interval.
//!
//! Two families are supported: Haar (exact step arithmetic) and periodized
//! Daubechies with N vanishing moments, N = 2..=10. Daubechies mother values
//! come from the cascade refinement run once to a dyadic depth R; evaluation
//! between grid points is linear interpolation. Basis functions are indexed
//! `(j, k)` with `0 <= k < 2^j`; the flat enumeration `v = 2^j + k` orders
//! coefficients coarse-to-fine.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Refinement (lowpass) filters for Daubechies families, `sum h = sqrt(2)`,
/// extremal-phase convention, support `[0, 2N-1]`. Index = N - 2.
const DAUBECHIES_H: [&[f64]; 9] = [
    // db2
    &[
        0.48296291314453414,
        0.83651630373780791,
        0.22414386804201338,
        -0.12940952255126038,
    ],
    // db3
    &[
        0.33267055295008262,
        0.80689150931109258,
        0.45987750211849157,
        -0.13501102001025459,
        -0.085441273882026662,
        0.035226291885709537,
    ],
    // db4
    &[
        0.23037781330889650,
        0.71484657055291565,
        0.63088076792985891,
        -0.027983769416859854,
        -0.18703481171909308,
        0.030841381835560764,
        0.032883011666885200,
        -0.010597401785069032,
    ],
    // db5
    &[
        0.16010239797419291,
        0.60382926979718967,
        0.72430852843777293,
        0.13842814590132073,
        -0.24229488706638203,
        -0.032244869584638375,
        0.077571493840045714,
        -0.0062414902127982743,
        -0.012580751999081999,
        0.0033357252854737713,
    ],
    // db6
    &[
        0.11154074335010946,
        0.49462389039845309,
        0.75113390802109535,
        0.31525035170919763,
        -0.22626469396543982,
        -0.12976686756726194,
        0.097501605587323049,
        0.027522865530305729,
        -0.031582039317486030,
        0.00055384220116149614,
        0.0047772575109455106,
        -0.0010773010853084796,
    ],
    // db7
    &[
        0.077852054085009179,
        0.39653931948191731,
        0.72913209084623512,
        0.46978228740519312,
        -0.14390600392856498,
        -0.22403618499387498,
        0.071309219266830265,
        0.080612609151083072,
        -0.038029936935014414,
        -0.016574541630666881,
        0.012550998556099841,
        0.00042957797292136652,
        -0.0018016407040474909,
        0.00035371379997452025,
    ],
    // db8
    &[
        0.054415842243104010,
        0.31287159091429997,
        0.67563073629728981,
        0.58535468365420671,
        -0.015829105256349306,
        -0.28401554296154693,
        0.00047248457391328277,
        0.12874742662047846,
        -0.017369301001807546,
        -0.044088253930794752,
        0.013981027917398282,
        0.0087460940474057767,
        -0.0048703529934515743,
        -0.00039174037337694705,
        0.00067544940645056937,
        -0.00011747678412476953,
    ],
    // db9
    &[
        0.038077947363878347,
        0.24383467461259035,
        0.60482312369011111,
        0.65728807805130054,
        0.13319738582500758,
        -0.29327378327917491,
        -0.096840783222976461,
        0.14854074933810638,
        0.030725681479333379,
        -0.067632829061329974,
        0.00025094711483145196,
        0.022361662123679097,
        -0.0047232047577513973,
        -0.0042815036824634298,
        0.0018476468830562265,
        0.00023038576352319597,
        -0.00025196318894271014,
        0.000039347320316271599,
    ],
    // db10
    &[
        0.026670057900555554,
        0.18817680007769149,
        0.52720118893172559,
        0.68845903945360357,
        0.28117234366057746,
        -0.24984642432731538,
        -0.19594627437737704,
        0.12736934033579326,
        0.093057364603572351,
        -0.071394147166397087,
        -0.029457536821875813,
        0.033212674059341002,
        0.0036065535669561697,
        -0.010733175483330575,
        0.0013953517470529012,
        0.0019924052951850561,
        -0.00068585669495971163,
        -0.00011646685512928545,
        0.000093588670320069591,
        -0.000013264202894521245,
    ],
];

/// Holder regularity of the mother wavelet per family; adaptation ranges must
/// stay below this. Haar caps at 1; Daubechies values are the known exponents.
const DAUBECHIES_S_MAX: [f64; 9] = [
    0.5500, 1.0878, 1.6179, 1.9690, 2.1891, 2.4604, 2.7608, 3.0736, 3.3611,
];

/// Wavelet family selector. Serializes as `"haar"` or `"dbN"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WaveletFamily {
    Haar,
    /// Daubechies with N vanishing moments (2N filter taps), N in 2..=10.
    Daubechies(u32),
}

impl WaveletFamily {
    pub fn vanishing_moments(self) -> u32 {
        match self {
            WaveletFamily::Haar => 1,
            WaveletFamily::Daubechies(n) => n,
        }
    }
}

impl std::str::FromStr for WaveletFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("haar") || s.eq_ignore_ascii_case("db1") {
            return Ok(WaveletFamily::Haar);
        }
        if let Some(num) = s.strip_prefix("db") {
            if let Ok(n) = num.parse::<u32>() {
                if (2..=10).contains(&n) {
                    return Ok(WaveletFamily::Daubechies(n));
                }
            }
        }
        Err(Error::ConfigInvalid(format!(
            "unknown wavelet family {s:?} (expected haar or db2..db10)"
        )))
    }
}

impl Serialize for WaveletFamily {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        ser.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for WaveletFamily {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(de)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl std::fmt::Display for WaveletFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            WaveletFamily::Haar => write!(f, "haar"),
            WaveletFamily::Daubechies(n) => write!(f, "db{n}"),
        }
    }
}

/// Evaluable orthonormal wavelet system on `[0,1]`.
///
/// Immutable after construction; sharing across threads is safe.
pub struct WaveletBasis {
    family: WaveletFamily,
    refinement_depth: u32,
    /// Mother values on `i / 2^R`, `i = 0..=support_len * 2^R`. Empty for Haar.
    psi_grid: Vec<f64>,
    /// Integer support length of the mother: 1 for Haar, 2N-1 otherwise.
    support_len: u32,
    s_max: f64,
}

impl WaveletBasis {
    /// Default refinement depth for the Daubechies cascade.
    pub const DEFAULT_DEPTH: u32 = 12;

    pub fn new(family: WaveletFamily, refinement_depth: u32) -> Result<Self> {
        match family {
            WaveletFamily::Haar => Ok(WaveletBasis {
                family,
                refinement_depth,
                psi_grid: Vec::new(),
                support_len: 1,
                s_max: 1.0,
            }),
            WaveletFamily::Daubechies(n) => {
                if !(2..=10).contains(&n) {
                    return Err(Error::ConfigInvalid(format!(
                        "Daubechies vanishing moments must be in 2..=10, got {n}"
                    )));
                }
                if !(4..=24).contains(&refinement_depth) {
                    return Err(Error::ConfigInvalid(format!(
                        "refinement depth must be in 4..=24, got {refinement_depth}"
                    )));
                }
                let h = DAUBECHIES_H[(n - 2) as usize];
                let psi_grid = cascade_psi(h, refinement_depth)?;
                Ok(WaveletBasis {
                    family,
                    refinement_depth,
                    psi_grid,
                    support_len: 2 * n - 1,
                    s_max: DAUBECHIES_S_MAX[(n - 2) as usize],
                })
            }
        }
    }

    pub fn haar() -> Self {
        WaveletBasis::new(WaveletFamily::Haar, Self::DEFAULT_DEPTH).expect("haar is infallible")
    }

    pub fn daubechies(n: u32) -> Result<Self> {
        WaveletBasis::new(WaveletFamily::Daubechies(n), Self::DEFAULT_DEPTH)
    }

    pub fn family(&self) -> WaveletFamily {
        self.family
    }

    pub fn refinement_depth(&self) -> u32 {
        self.refinement_depth
    }

    /// Smoothness limit of the family; signals must satisfy `s < s_max`.
    pub fn s_max(&self) -> f64 {
        self.s_max
    }

    /// Deepest level at which evaluation is resolved by the dyadic grid.
    pub fn max_eval_level(&self) -> u32 {
        match self.family {
            WaveletFamily::Haar => 40,
            WaveletFamily::Daubechies(_) => self.refinement_depth - 2,
        }
    }

    /// Mother wavelet at `x` (no periodization, no level scaling).
    pub(crate) fn mother(&self, x: f64) -> f64 {
        match self.family {
            WaveletFamily::Haar => {
                if (0.0..0.5).contains(&x) {
                    1.0
                } else if (0.5..1.0).contains(&x) {
                    -1.0
                } else {
                    0.0
                }
            }
            WaveletFamily::Daubechies(_) => {
                if x <= 0.0 || x >= self.support_len as f64 {
                    return 0.0;
                }
                let pos = x * (1u64 << self.refinement_depth) as f64;
                let i = pos.floor() as usize;
                let frac = pos - i as f64;
                if i + 1 >= self.psi_grid.len() {
                    return 0.0;
                }
                self.psi_grid[i] * (1.0 - frac) + self.psi_grid[i + 1] * frac
            }
        }
    }

    /// Periodized basis function `psi_{jk}(t) = 2^{j/2} sum_l psi(2^j t - k + 2^j l)`.
    pub fn eval_psi(&self, j: u32, k: u64, t: f64) -> Result<f64> {
        if k >= (1u64 << j) {
            return Err(Error::ConfigInvalid(format!(
                "shift k={k} out of range at level j={j}"
            )));
        }
        if j > self.max_eval_level() {
            return Err(Error::LevelTooDeep {
                j,
                depth: self.refinement_depth,
            });
        }
        Ok(self.eval_psi_unchecked(j, k, t))
    }

    /// Hot-path evaluation; callers must have validated `j` and `k`.
    pub(crate) fn eval_psi_unchecked(&self, j: u32, k: u64, t: f64) -> f64 {
        let pow = (1u64 << j) as f64;
        let y = pow * t;
        let s = self.support_len as f64;
        // unwrapped shifts k' with psi(y - k') possibly nonzero and
        // k' == k (mod 2^j); k' ranges over (y - s, y]
        let lo = (y - s).floor() as i64 + 1;
        let hi = y.floor() as i64;
        let modulus = 1i64 << j;
        let mut acc = 0.0;
        let mut kp = lo;
        while kp <= hi {
            if kp.rem_euclid(modulus) as u64 == k {
                acc += self.mother(y - kp as f64);
            }
            kp += 1;
        }
        pow.sqrt() * acc
    }

    /// Pointwise value of the truncated expansion `sum f_{jk} psi_{jk}(t)`.
    pub fn eval_field(&self, field: &CoeffField, t: f64) -> f64 {
        let s = self.support_len as f64;
        let mut acc = 0.0;
        for j in 0..=field.max_level() {
            let pow = (1u64 << j) as f64;
            let y = pow * t;
            let lo = (y - s).floor() as i64 + 1;
            let hi = y.floor() as i64;
            let modulus = 1i64 << j;
            let mut level_acc = 0.0;
            for kp in lo..=hi {
                let k = kp.rem_euclid(modulus) as u64;
                let c = field.get(j, k);
                if c != 0.0 {
                    level_acc += c * self.mother(y - kp as f64);
                }
            }
            acc += pow.sqrt() * level_acc;
        }
        acc
    }

    /// Values of the expansion on the uniform midpoint grid of `grid_size` points.
    pub fn synthesize(&self, field: &CoeffField, grid_size: usize) -> Result<Vec<f64>> {
        if !grid_size.is_power_of_two() || (grid_size as u64) < (1u64 << (field.max_level() + 1)) {
            return Err(Error::ConfigInvalid(format!(
                "grid size {grid_size} must be a power of two >= 2^{}",
                field.max_level() + 1
            )));
        }
        if field.max_level() > self.max_eval_level() {
            return Err(Error::LevelTooDeep {
                j: field.max_level(),
                depth: self.refinement_depth,
            });
        }
        let g = grid_size as f64;
        Ok((0..grid_size)
            .map(|i| self.eval_field(field, (i as f64 + 0.5) / g))
            .collect())
    }
}

/// Triangular array of wavelet coefficients truncated at `max_level`.
///
/// Storage is flat in the `v = 2^j + k` order, so slot `v - 1` holds `f_{jk}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoeffField {
    max_level: u32,
    coeffs: Vec<f64>,
}

/// Decompose the flat index `v >= 1` into `(j, k)`.
pub fn level_shift_of(v: u64) -> (u32, u64) {
    debug_assert!(v >= 1);
    let j = 63 - v.leading_zeros();
    (j, v - (1u64 << j))
}

/// Flat index of `(j, k)`.
pub fn v_of(j: u32, k: u64) -> u64 {
    (1u64 << j) + k
}

impl CoeffField {
    pub fn zeros(max_level: u32) -> Self {
        assert!(max_level <= 40, "max level {max_level} unreasonably deep");
        CoeffField {
            max_level,
            coeffs: vec![0.0; (1usize << (max_level + 1)) - 1],
        }
    }

    /// Build from a flat vector in `v` order; length must be `2^{J+1} - 1`.
    pub fn from_flat(max_level: u32, coeffs: Vec<f64>) -> Result<Self> {
        let want = (1usize << (max_level + 1)) - 1;
        if coeffs.len() != want {
            return Err(Error::ConfigInvalid(format!(
                "coefficient vector has {} entries, expected {want}",
                coeffs.len()
            )));
        }
        Ok(CoeffField { max_level, coeffs })
    }

    pub fn max_level(&self) -> u32 {
        self.max_level
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    fn index(j: u32, k: u64) -> usize {
        ((1u64 << j) - 1 + k) as usize
    }

    pub fn get(&self, j: u32, k: u64) -> f64 {
        if j > self.max_level {
            return 0.0;
        }
        self.coeffs[Self::index(j, k)]
    }

    pub fn set(&mut self, j: u32, k: u64, value: f64) {
        assert!(j <= self.max_level && k < (1u64 << j));
        self.coeffs[Self::index(j, k)] = value;
    }

    pub fn get_v(&self, v: u64) -> f64 {
        self.coeffs[(v - 1) as usize]
    }

    pub fn set_v(&mut self, v: u64, value: f64) {
        self.coeffs[(v - 1) as usize] = value;
    }

    pub fn flat(&self) -> &[f64] {
        &self.coeffs
    }

    /// `sum_k f_{jk}^2` for one level.
    pub fn level_energy(&self, j: u32) -> f64 {
        if j > self.max_level {
            return 0.0;
        }
        let start = ((1u64 << j) - 1) as usize;
        let end = ((1u64 << (j + 1)) - 1) as usize;
        self.coeffs[start..end].iter().map(|c| c * c).sum()
    }

    /// Squared L2 norm of the represented function (Parseval).
    pub fn squared_l2(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum()
    }

    /// Zero all levels at or above `j`; the truncation keeps levels `< j`.
    pub fn truncated_below(&self, j: u32) -> CoeffField {
        let mut out = CoeffField::zeros(self.max_level);
        for lvl in 0..j.min(self.max_level + 1) {
            let start = ((1u64 << lvl) - 1) as usize;
            let end = ((1u64 << (lvl + 1)) - 1) as usize;
            out.coeffs[start..end].copy_from_slice(&self.coeffs[start..end]);
        }
        out
    }
}

/// Exact piecewise values of a Haar expansion on the `2^{J+1}` dyadic pieces.
///
/// Inverse transform by level doubling: cost `O(2^J)` total instead of
/// `O(2^J * J)` pointwise evaluation. Only valid for the Haar family.
pub fn haar_piece_values(field: &CoeffField) -> Vec<f64> {
    let levels = field.max_level() + 1;
    let mut approx = vec![0.0f64]; // no scaling component: mother-only system
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    for j in 0..levels {
        let mut next = vec![0.0; 1 << (j + 1)];
        for k in 0..(1usize << j) {
            let a = approx[k];
            let d = field.get(j, k as u64);
            next[2 * k] = (a + d) * inv_sqrt2;
            next[2 * k + 1] = (a - d) * inv_sqrt2;
        }
        approx = next;
    }
    let scale = 2f64.powf(levels as f64 / 2.0);
    approx.iter_mut().for_each(|v| *v *= scale);
    approx
}

/// Sobolev-type Besov norm: `sup_j (2^{2js} sum_k f_{jk}^2)^{1/2}`.
pub fn besov_sobolev_norm(field: &CoeffField, s: f64) -> f64 {
    assert!(s > 0.0, "smoothness must be positive");
    let mut sup: f64 = 0.0;
    for j in 0..=field.max_level() {
        let term = 2f64.powf(2.0 * j as f64 * s) * field.level_energy(j);
        sup = sup.max(term);
    }
    sup.sqrt()
}

/// Holder-type Besov norm: `sup_{jk} 2^{j(s+1/2)} |f_{jk}|`.
pub fn besov_holder_norm(field: &CoeffField, s: f64) -> f64 {
    assert!(s > 0.0, "smoothness must be positive");
    let mut sup: f64 = 0.0;
    for j in 0..=field.max_level() {
        let scale = 2f64.powf(j as f64 * (s + 0.5));
        for k in 0..(1u64 << j) {
            sup = sup.max(scale * field.get(j, k).abs());
        }
    }
    sup
}

/// Run the cascade to depth `r` and return mother values on `i / 2^r`.
fn cascade_psi(h: &[f64], r: u32) -> Result<Vec<f64>> {
    let taps = h.len();
    let support = taps - 1; // phi and psi live on [0, 2N-1]
    let sqrt2 = std::f64::consts::SQRT_2;

    // phi at the integers: dominant (eigenvalue 1) eigenvector of the
    // refinement matrix on interior points, normalized to sum 1.
    let dim = support - 1;
    let mut v = vec![1.0 / dim as f64; dim];
    for _ in 0..256 {
        let mut next = vec![0.0; dim];
        for (x, slot) in next.iter_mut().enumerate() {
            let xi = x + 1;
            for (y, vy) in v.iter().enumerate() {
                let yi = y + 1;
                let idx = 2 * xi as i64 - yi as i64;
                if (0..taps as i64).contains(&idx) {
                    *slot += sqrt2 * h[idx as usize] * vy;
                }
            }
        }
        let sum: f64 = next.iter().sum();
        if sum.abs() < 1e-300 {
            return Err(Error::ConfigInvalid(
                "cascade eigenvector iteration degenerated".into(),
            ));
        }
        for x in next.iter_mut() {
            *x /= sum;
        }
        v = next;
    }

    // refine level by level: phi_r on i / 2^r, i = 0..=support * 2^r
    let mut phi = vec![0.0; support + 1];
    phi[1..support].copy_from_slice(&v);
    for level in 1..=r {
        let step = 1usize << (level - 1); // 2^{level-1} in units of the previous grid
        let prev = phi;
        let mut cur = vec![0.0; support * (1 << level) + 1];
        for (m, slot) in cur.iter_mut().enumerate() {
            if m % 2 == 0 {
                *slot = prev[m / 2];
            } else {
                // phi(m/2^level) = sqrt(2) sum_k h_k phi((m - k 2^{level-1}) / 2^{level-1})
                let mut acc = 0.0;
                for (k, &hk) in h.iter().enumerate() {
                    let p = m as i64 - (k * step) as i64;
                    if p >= 0 && (p as usize) < prev.len() {
                        acc += hk * prev[p as usize];
                    }
                }
                *slot = sqrt2 * acc;
            }
        }
        phi = cur;
    }

    // psi(m / 2^r) = sqrt(2) sum_k g_k phi((2m - k 2^r) / 2^r)
    let g: Vec<f64> = (0..taps)
        .map(|k| {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            sign * h[taps - 1 - k]
        })
        .collect();
    let n_pts = support * (1usize << r) + 1;
    let scale = 1i64 << r;
    let mut psi = vec![0.0; n_pts];
    for (m, slot) in psi.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (k, &gk) in g.iter().enumerate() {
            let p = 2 * m as i64 - k as i64 * scale;
            if p >= 0 && (p as usize) < phi.len() {
                acc += gk * phi[p as usize];
            }
        }
        *slot = sqrt2 * acc;
    }
    Ok(psi)
}
