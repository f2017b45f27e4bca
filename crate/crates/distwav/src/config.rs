//! Run configuration: the paper-level parameters `(n, m, B, D, s, L, tau, ...)`
//! plus signal, sweep, calibration, and theory-grid sections. Configs load
//! from flat TOML files with keys named after the quantities they set.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{Norm, SignalKind, SignalSpec};
use crate::wavelet::{WaveletBasis, WaveletFamily};

/// Which distributed estimation protocol to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    /// Every machine transmits the same leading coefficient block.
    #[serde(rename = "nonadaptive-i")]
    NonAdaptiveI,
    /// Machines split into groups, each owning a block of coefficients.
    #[serde(rename = "nonadaptive-ii")]
    NonAdaptiveII,
    /// Grouped sup-norm method; group count adapts to the budget.
    #[serde(rename = "linfty-combined")]
    LinftyCombined,
    /// Level-partitioned machines plus Lepski selection in the center.
    #[serde(rename = "adaptive")]
    Adaptive,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Mode::NonAdaptiveI => "nonadaptive-i",
            Mode::NonAdaptiveII => "nonadaptive-ii",
            Mode::LinftyCombined => "linfty-combined",
            Mode::Adaptive => "adaptive",
        };
        write!(f, "{s}")
    }
}

fn default_d() -> f64 {
    0.5
}
fn default_tau() -> f64 {
    4.0
}
fn default_sigma() -> f64 {
    1.0
}
fn default_depth() -> u32 {
    WaveletBasis::DEFAULT_DEPTH
}

/// Everything one protocol run needs; fully determines the outcome together
/// with the seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub mode: Mode,
    #[serde(default)]
    pub norm: Norm,
    pub family: WaveletFamily,
    pub n: u64,
    pub m: u64,
    /// Per-machine budget in bits.
    #[serde(rename = "B")]
    pub budget: f64,
    /// Fractional precision exponent; `F = ceil(D log2 n)` bits are kept.
    #[serde(rename = "D", default = "default_d")]
    pub d: f64,
    /// Assumed smoothness (non-adaptive modes).
    #[serde(default)]
    pub s: Option<f64>,
    /// Besov radius (non-adaptive modes).
    #[serde(rename = "L", default)]
    pub radius: Option<f64>,
    /// Adaptation range (adaptive mode).
    #[serde(default)]
    pub s_min: Option<f64>,
    #[serde(default)]
    pub s_max: Option<f64>,
    /// Lepski threshold constant.
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    pub seed: u64,
    #[serde(default = "default_depth")]
    pub refinement_depth: u32,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            mode: Mode::NonAdaptiveI,
            norm: Norm::L2,
            family: WaveletFamily::Haar,
            n: 1024,
            m: 4,
            budget: 64.0,
            d: 0.5,
            s: Some(0.75),
            radius: Some(1.0),
            s_min: None,
            s_max: None,
            tau: 4.0,
            sigma: 1.0,
            seed: 0,
            refinement_depth: WaveletBasis::DEFAULT_DEPTH,
        }
    }
}

impl ProtocolConfig {
    pub fn log2n(&self) -> f64 {
        (self.n as f64).log2()
    }

    /// `floor(B / log2 n)`: the per-machine coefficient allowance.
    pub fn coeff_allowance(&self) -> u64 {
        let w = self.budget / self.log2n();
        if w < 0.0 {
            0
        } else {
            w.floor() as u64
        }
    }

    pub fn s_required(&self) -> Result<f64> {
        self.s
            .ok_or_else(|| Error::ConfigInvalid("mode requires the smoothness s".into()))
    }

    pub fn radius_required(&self) -> Result<f64> {
        self.radius
            .ok_or_else(|| Error::ConfigInvalid("mode requires the radius L".into()))
    }

    pub fn s_min_required(&self) -> Result<f64> {
        self.s_min
            .ok_or_else(|| Error::ConfigInvalid("adaptive mode requires s_min".into()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 4 {
            return Err(Error::ConfigInvalid(format!("n = {} < 4", self.n)));
        }
        if self.m == 0 || self.m > self.n {
            return Err(Error::ConfigInvalid(format!(
                "m = {} out of range 1..=n",
                self.m
            )));
        }
        if self.n % self.m != 0 {
            return Err(Error::ConfigInvalid(format!(
                "m = {} does not divide n = {}; shards must be equal",
                self.m, self.n
            )));
        }
        if !(self.budget > 0.0) {
            return Err(Error::ConfigInvalid(format!("B = {} must be > 0", self.budget)));
        }
        crate::bitcodec::frac_bits(self.n, self.d)?;
        if self.sigma < 0.0 {
            return Err(Error::ConfigInvalid(format!("sigma = {} < 0", self.sigma)));
        }
        if !(self.tau > 1.0) {
            return Err(Error::ConfigInvalid(format!("tau = {} must be > 1", self.tau)));
        }
        let basis_smax = match self.family {
            WaveletFamily::Haar => 1.0,
            WaveletFamily::Daubechies(n) => {
                if !(2..=10).contains(&n) {
                    return Err(Error::ConfigInvalid(format!("unsupported family db{n}")));
                }
                WaveletBasis::new(self.family, 4)?.s_max()
            }
        };
        match self.mode {
            Mode::NonAdaptiveI | Mode::NonAdaptiveII | Mode::LinftyCombined => {
                let s = self.s_required()?;
                let l = self.radius_required()?;
                if !(s > 0.0) || !(l > 0.0) {
                    return Err(Error::ConfigInvalid(format!(
                        "need s > 0 and L > 0, got s={s} L={l}"
                    )));
                }
                if s >= basis_smax {
                    return Err(Error::ConfigInvalid(format!(
                        "s = {s} exceeds the family regularity {basis_smax}; pick more vanishing moments"
                    )));
                }
                if self.mode != Mode::NonAdaptiveI && self.budget < self.log2n() {
                    return Err(Error::ConfigInvalid(format!(
                        "grouped modes need B >= log2 n (= {})",
                        self.log2n()
                    )));
                }
            }
            Mode::Adaptive => {
                let s_min = self.s_min_required()?;
                let s_max = self
                    .s_max
                    .ok_or_else(|| Error::ConfigInvalid("adaptive mode requires s_max".into()))?;
                if !(s_min > 0.0) || s_min >= s_max {
                    return Err(Error::ConfigInvalid(format!(
                        "need 0 < s_min < s_max, got [{s_min}, {s_max})"
                    )));
                }
                if s_max > basis_smax {
                    return Err(Error::ConfigInvalid(format!(
                        "s_max = {s_max} exceeds the family regularity {basis_smax}"
                    )));
                }
                if self.budget < self.log2n() {
                    return Err(Error::ConfigInvalid(format!(
                        "adaptive mode needs B >= log2 n (= {})",
                        self.log2n()
                    )));
                }
                if self.m < 2 {
                    return Err(Error::ConfigInvalid("adaptive mode needs m >= 2".into()));
                }
            }
        }
        Ok(())
    }

    pub fn build_basis(&self) -> Result<WaveletBasis> {
        WaveletBasis::new(self.family, self.refinement_depth)
    }
}

/// TOML-facing signal section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalSection {
    pub kind: String,
    #[serde(default)]
    pub s: Option<f64>,
    #[serde(rename = "L", default)]
    pub radius: Option<f64>,
    #[serde(default)]
    pub j_truth: Option<u32>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub coeffs: Option<Vec<f64>>,
}

impl SignalSection {
    /// Resolve against the protocol section, filling defaults.
    pub fn to_spec(&self, protocol: &ProtocolConfig, basis: &WaveletBasis) -> Result<SignalSpec> {
        let kind = match self.kind.as_str() {
            "worst-case" => SignalKind::WorstCase,
            "random-sign" => SignalKind::RandomSign,
            "zero" => SignalKind::Zero,
            "custom" => SignalKind::Custom(self.coeffs.clone().ok_or_else(|| {
                Error::ConfigInvalid("custom signal needs a coeffs array".into())
            })?),
            other => {
                return Err(Error::ConfigInvalid(format!("unknown signal kind {other:?}")))
            }
        };
        let s = self
            .s
            .or(protocol.s)
            .ok_or_else(|| Error::ConfigInvalid("signal smoothness s unspecified".into()))?;
        let radius = self
            .radius
            .or(protocol.radius)
            .ok_or_else(|| Error::ConfigInvalid("signal radius L unspecified".into()))?;
        Ok(SignalSpec {
            kind,
            s,
            radius,
            j_truth: self
                .j_truth
                .unwrap_or_else(|| crate::signal::default_j_truth(basis)),
            seed: self.seed,
            norm: protocol.norm,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    N,
    M,
    B,
    S,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSection {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub replicates: u32,
}

fn default_target() -> f64 {
    0.95
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrateSection {
    pub taus: Vec<f64>,
    pub replicates: u32,
    #[serde(default = "default_target")]
    pub target: f64,
}

/// `coeff * n^{n_pow} * (log2 n)^{log2_pow}`, or a plain constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SeqExpr {
    Const(f64),
    Family {
        #[serde(default)]
        n_pow: f64,
        #[serde(default)]
        log2_pow: f64,
        #[serde(default = "one")]
        coeff: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl SeqExpr {
    pub fn eval(&self, n: u64) -> f64 {
        match *self {
            SeqExpr::Const(c) => c,
            SeqExpr::Family {
                n_pow,
                log2_pow,
                coeff,
            } => coeff * (n as f64).powf(n_pow) * (n as f64).log2().powf(log2_pow),
        }
    }

    pub fn as_family(&self) -> (f64, f64, f64) {
        match *self {
            SeqExpr::Const(c) => (0.0, 0.0, c),
            SeqExpr::Family {
                n_pow,
                log2_pow,
                coeff,
            } => (n_pow, log2_pow, coeff),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryRow {
    pub n: u64,
    pub m: SeqExpr,
    #[serde(rename = "B")]
    pub budget: SeqExpr,
    pub s: f64,
    #[serde(rename = "L", default = "one")]
    pub radius: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TheorySection {
    #[serde(default)]
    pub rows: Vec<TheoryRow>,
}

/// A full config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub protocol: ProtocolConfig,
    #[serde(default)]
    pub signal: Option<SignalSection>,
    #[serde(default)]
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub calibrate: Option<CalibrateSection>,
    #[serde(default)]
    pub theory: Option<TheorySection>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| Error::ConfigInvalid(e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Hex digest identifying the config (first 8 bytes of SHA-256 of the
    /// canonical TOML form).
    pub fn digest(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut hasher = Sha256::new();
        hasher.update(self.to_toml().as_bytes());
        let out = hasher.finalize();
        out[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Resolve the signal section (default: worst-case at the protocol's s, L).
    pub fn signal_spec(&self, basis: &WaveletBasis) -> Result<SignalSpec> {
        match &self.signal {
            Some(section) => section.to_spec(&self.protocol, basis),
            None => {
                let s = self.protocol.s.ok_or_else(|| {
                    Error::ConfigInvalid(
                        "no [signal] section and no protocol smoothness to default to".into(),
                    )
                })?;
                let radius = self.protocol.radius_required()?;
                Ok(SignalSpec {
                    kind: SignalKind::WorstCase,
                    s,
                    radius,
                    j_truth: crate::signal::default_j_truth(basis),
                    seed: self.protocol.seed,
                    norm: self.protocol.norm,
                })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
[protocol]
mode = "nonadaptive-ii"
family = "haar"
n = 65536
m = 64
B = 128.0
s = 0.75
L = 1.0
seed = 17

[signal]
kind = "worst-case"

[sweep]
axis = "n"
values = [4096, 8192]
replicates = 10
"#;

    #[test]
    fn parses_and_validates_sample() {
        let cfg = RunConfig::from_toml(SAMPLE).unwrap();
        cfg.protocol.validate().unwrap();
        assert_eq!(cfg.protocol.mode, Mode::NonAdaptiveII);
        assert_eq!(cfg.protocol.coeff_allowance(), 8);
        assert_eq!(cfg.protocol.d, 0.5);
        assert_eq!(cfg.protocol.tau, 4.0);
        assert_eq!(cfg.sweep.as_ref().unwrap().values.len(), 2);
        let basis = cfg.protocol.build_basis().unwrap();
        let spec = cfg.signal_spec(&basis).unwrap();
        assert_eq!(spec.s, 0.75);
        assert_eq!(spec.j_truth, 16);
    }

    #[test]
    fn divisibility_and_budget_rules() {
        let mut p = ProtocolConfig {
            n: 100,
            m: 3,
            ..ProtocolConfig::default()
        };
        assert!(p.validate().is_err());
        p.m = 4;
        p.validate().unwrap();

        let p = ProtocolConfig {
            mode: Mode::NonAdaptiveII,
            n: 1024,
            m: 4,
            budget: 5.0, // below log2 n = 10
            ..ProtocolConfig::default()
        };
        assert!(p.validate().is_err());
    }

    #[test]
    fn adaptive_needs_range() {
        let p = ProtocolConfig {
            mode: Mode::Adaptive,
            family: WaveletFamily::Daubechies(4),
            n: 65536,
            m: 64,
            budget: 1024.0,
            s: None,
            radius: None,
            s_min: Some(0.5),
            s_max: Some(1.6),
            ..ProtocolConfig::default()
        };
        p.validate().unwrap();
        let bad = ProtocolConfig {
            s_max: Some(0.3),
            ..p
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn family_names_roundtrip() {
        for text in ["haar", "db2", "db4", "db10"] {
            let toml = format!(
                "[protocol]\nmode = \"nonadaptive-i\"\nfamily = \"{text}\"\nn = 64\nm = 2\nB = 40.0\ns = 0.5\nL = 1.0\nseed = 1\n"
            );
            let cfg = RunConfig::from_toml(&toml).unwrap();
            assert_eq!(cfg.protocol.family.to_string(), text);
        }
    }

    #[test]
    fn seq_expr_forms() {
        let toml = r#"
[protocol]
mode = "nonadaptive-i"
family = "haar"
n = 64
m = 2
B = 40.0
s = 0.5
L = 1.0
seed = 1

[theory]
[[theory.rows]]
n = 1048576
m = { n_pow = 0.5 }
B = { log2_pow = 1.0 }
s = 1.0
"#;
        let cfg = RunConfig::from_toml(toml).unwrap();
        let row = &cfg.theory.unwrap().rows[0];
        assert!((row.m.eval(1 << 20) - 1024.0).abs() < 1e-9);
        assert!((row.budget.eval(1 << 20) - 20.0).abs() < 1e-9);
    }

    #[test]
    fn digest_is_stable() {
        let a = RunConfig::from_toml(SAMPLE).unwrap();
        let b = RunConfig::from_toml(SAMPLE).unwrap();
        assert_eq!(a.digest(), b.digest());
        let mut c = a.clone();
        c.protocol.seed = 18;
        assert_ne!(a.digest(), c.digest());
    }
}
