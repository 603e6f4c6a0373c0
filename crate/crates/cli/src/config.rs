//! TOML run configuration.
//!
//! ```toml
//! n_max = 3
//!
//! [coefficients]
//! p = { cos = [0.05] }
//! q = { sin = [0.03] }
//!
//! [numerics]
//! min_steps = 2048
//!
//! [tolerances]
//! default = 1e-5
//! per_identity = { norming_constants = 1e-6 }
//!
//! [trace]
//! what = "rho"
//! from = 1.0
//! to = 500.0
//! points = 1000
//!
//! [winding]
//! n = 1
//! translations = 128
//! ```
//!
//! Every table is optional; unknown keys are rejected.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use mckean::verify::Tolerances;
use mckean::{CoefficientPair, Numerics, C64};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub coefficients: CoefficientPair,
    #[serde(default = "default_n_max")]
    pub n_max: i64,
    #[serde(default)]
    pub numerics: Numerics,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub trace: TraceConfig,
    #[serde(default)]
    pub winding: WindingConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_n_max() -> i64 {
    3
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            coefficients: CoefficientPair::zero(),
            n_max: default_n_max(),
            numerics: Numerics::default(),
            tolerances: Tolerances::default(),
            trace: TraceConfig::default(),
            winding: WindingConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum TraceKind {
    Rho,
    Bdet,
    Lyapunov,
    Potential,
}

/// Sampling of a trace: `points` values on the segment `from -> to` of the
/// spectral parameter (energy for `lyapunov`), or the potential at `energy`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceConfig {
    #[serde(default = "default_kind")]
    pub what: TraceKind,
    #[serde(default = "default_from")]
    pub from: Scalar,
    #[serde(default = "default_to")]
    pub to: Scalar,
    #[serde(default = "default_points")]
    pub points: usize,
    #[serde(default = "default_energy")]
    pub energy: Scalar,
}

fn default_kind() -> TraceKind {
    TraceKind::Rho
}
fn default_from() -> Scalar {
    Scalar::Real(1.0)
}
fn default_to() -> Scalar {
    Scalar::Real(500.0)
}
fn default_points() -> usize {
    1000
}
fn default_energy() -> Scalar {
    Scalar::Real(9.0)
}

impl Default for TraceConfig {
    fn default() -> Self {
        Self {
            what: default_kind(),
            from: default_from(),
            to: default_to(),
            points: default_points(),
            energy: default_energy(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindingConfig {
    #[serde(default = "default_winding_n")]
    pub n: i64,
    #[serde(default = "default_translations")]
    pub translations: usize,
}

fn default_winding_n() -> i64 {
    1
}
fn default_translations() -> usize {
    128
}

impl Default for WindingConfig {
    fn default() -> Self {
        Self {
            n: default_winding_n(),
            translations: default_translations(),
        }
    }
}

/// Default destinations; `--out` overrides. Absent means standard output.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub report: Option<PathBuf>,
    pub trace: Option<PathBuf>,
}

/// A bare number or `[re, im]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Real(f64),
    Complex([f64; 2]),
}

impl Scalar {
    pub fn value(self) -> C64 {
        match self {
            Scalar::Real(re) => C64::new(re, 0.0),
            Scalar::Complex([re, im]) => C64::new(re, im),
        }
    }
}

impl std::str::FromStr for Scalar {
    type Err = String;

    /// `"re"` or `"re,im"`.
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let parse = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("bad number {t:?}: {e}"));
        match s.split_once(',') {
            None => Ok(Scalar::Real(parse(s)?)),
            Some((re, im)) => Ok(Scalar::Complex([parse(re)?, parse(im)?])),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn validate(&self) -> Result<()> {
        self.coefficients.validate(mckean::coefficients::DEFAULT_MAX_MODES)?;
        self.numerics.validate()?;
        anyhow::ensure!(self.n_max >= 1, "n_max must be >= 1");
        anyhow::ensure!(self.trace.points >= 2, "trace.points must be >= 2");
        anyhow::ensure!(self.tolerances.default > 0.0, "tolerances.default must be positive");
        for (k, v) in &self.tolerances.per_identity {
            anyhow::ensure!(
                mckean::verify::IDENTITIES.contains(&k.as_str()),
                "unknown identity {k:?} in tolerances"
            );
            anyhow::ensure!(*v > 0.0, "tolerance for {k} must be positive");
        }
        Ok(())
    }
}
