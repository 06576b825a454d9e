//! Experiment configuration (TOML). Unknown keys are rejected.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use symapprox::antisymmetric::DEFAULT_TAU;
use symapprox::lattice::Node;
use symapprox::{DomainSpec, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
pub enum Kind {
    #[serde(rename = "sym")]
    Sym,
    #[serde(rename = "antisym-c1")]
    AntisymC1,
    #[serde(rename = "antisym-c2")]
    AntisymC2,
}

impl Kind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Kind::Sym => "sym",
            Kind::AntisymC1 => "antisym-c1",
            Kind::AntisymC2 => "antisym-c2",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetConfig {
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    pub model: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Kind,
    pub d: usize,
    pub n: usize,
    pub delta: Option<f64>,
    pub epsilon: Option<f64>,
    /// Spacings for `sweep`, strictly decreasing.
    pub deltas: Option<Vec<f64>>,
    #[serde(default = "default_lo")]
    pub lo: f64,
    #[serde(default = "default_hi")]
    pub hi: f64,
    pub smooth_width: Option<f64>,
    #[serde(default)]
    pub node: Node,
    #[serde(default = "default_tau")]
    pub tau: f64,
    pub target: TargetConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_perms")]
    pub n_perms: usize,
    /// Minimum pairwise gap for the factorisation check (d = 1 antisym).
    #[serde(default = "default_gap")]
    pub cauchy_gap: f64,
    /// Wedge enumeration cap.
    pub cap: Option<u64>,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_lo() -> f64 {
    0.0
}

fn default_hi() -> f64 {
    1.0
}

fn default_tau() -> f64 {
    DEFAULT_TAU
}

fn default_samples() -> usize {
    10_000
}

fn default_perms() -> usize {
    3
}

fn default_gap() -> f64 {
    0.05
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Configuration(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Configuration(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks the invariants that do not need the target.
    pub fn validate(&self) -> Result<()> {
        self.domain()?;
        if self.delta.is_some() == self.epsilon.is_some() && self.deltas.is_none() {
            return Err(Error::Configuration(
                "set exactly one of `delta` and `epsilon`".into(),
            ));
        }
        if self.delta.is_some() && self.epsilon.is_some() {
            return Err(Error::Configuration(
                "`delta` and `epsilon` are mutually exclusive".into(),
            ));
        }
        if let Some(delta) = self.delta {
            if delta.is_nan() || delta <= 0.0 {
                return Err(Error::Configuration(format!(
                    "delta = {delta} must be positive"
                )));
            }
        }
        if self.samples == 0 {
            return Err(Error::Configuration("samples must be at least 1".into()));
        }
        if self.smooth_width.is_some() && self.kind == Kind::AntisymC1 {
            return Err(Error::Configuration(
                "smooth_width is not available for antisym-c1".into(),
            ));
        }
        Ok(())
    }

    pub fn domain(&self) -> Result<DomainSpec> {
        DomainSpec::new(self.d, self.n, self.lo, self.hi)
            .map_err(|e| Error::Configuration(e.to_string()))
    }
}
