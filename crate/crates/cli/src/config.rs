//! TOML run configuration. Every field is optional; command-line flags win
//! over file values, and built-in defaults fill whatever is left.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use gfet_prva::circuit::CircuitChain;
use gfet_prva::device::SyntheticGfetParams;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub svg: Option<bool>,
    pub characterize: CharacterizeSection,
    pub simulate: SimulateSection,
    pub wavelet: WaveletSection,
    pub mcbench: McbenchSection,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CharacterizeSection {
    pub input: Option<PathBuf>,
    pub synthetic: Option<bool>,
    pub params: Option<SyntheticGfetParams>,
    pub biases: Option<Vec<f64>>,
    pub resample_points: Option<usize>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSection {
    pub preset: Option<String>,
    pub chain: Option<CircuitChain>,
    pub library: Option<PathBuf>,
    pub params: Option<SyntheticGfetParams>,
    pub n: Option<usize>,
    pub bins: Option<usize>,
    pub ccdf: Option<bool>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WaveletSection {
    pub histogram: Option<PathBuf>,
    pub lognormal: Option<bool>,
    pub k: Option<Vec<KBudget>>,
    pub bins: Option<usize>,
    pub levels: Option<usize>,
    pub samples: Option<usize>,
    pub mu: Option<f64>,
    pub sigma: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McbenchSection {
    pub samplers: Option<Vec<String>>,
    pub n_grid: Option<Vec<usize>>,
    pub repeats: Option<usize>,
    pub hw_source: Option<HwSource>,
    pub mu: Option<f64>,
    pub sigma: Option<f64>,
    pub check: Option<bool>,
}

/// Coefficient budget for a wavelet reconstruction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "KBudgetRepr", into = "KBudgetRepr")]
pub enum KBudget {
    Count(usize),
    Full,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum KBudgetRepr {
    Count(usize),
    Word(String),
}

impl TryFrom<KBudgetRepr> for KBudget {
    type Error = String;

    fn try_from(r: KBudgetRepr) -> Result<Self, String> {
        match r {
            KBudgetRepr::Count(k) => Ok(KBudget::Count(k)),
            KBudgetRepr::Word(w) => w.parse(),
        }
    }
}

impl From<KBudget> for KBudgetRepr {
    fn from(k: KBudget) -> Self {
        match k {
            KBudget::Count(k) => KBudgetRepr::Count(k),
            KBudget::Full => KBudgetRepr::Word("full".into()),
        }
    }
}

impl FromStr for KBudget {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("full") {
            return Ok(KBudget::Full);
        }
        match s.parse::<usize>() {
            Ok(k) if k > 0 => Ok(KBudget::Count(k)),
            _ => Err(format!("coefficient budget must be a positive integer or \"full\", got {s:?}")),
        }
    }
}

impl fmt::Display for KBudget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KBudget::Count(k) => write!(f, "{k}"),
            KBudget::Full => f.write_str("full"),
        }
    }
}

impl KBudget {
    pub fn resolve(self, total: usize) -> usize {
        match self {
            KBudget::Count(k) => k,
            KBudget::Full => total,
        }
    }
}

/// Contents of the hardware buffer sampler.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HwSource {
    /// Ideal lognormal draws.
    #[default]
    Ideal,
    /// Circuit simulation output mapped onto the target lognormal.
    Circuit,
}

impl FromStr for HwSource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "ideal" => Ok(HwSource::Ideal),
            "circuit" => Ok(HwSource::Circuit),
            _ => Err(format!("hardware source must be \"ideal\" or \"circuit\", got {s:?}")),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::ConfigFile {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let mut cfg: ExperimentConfig = toml::from_str(&text).map_err(|e| CliError::ConfigFile {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        // file paths inside a config are relative to the config itself
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [
            &mut cfg.out,
            &mut cfg.characterize.input,
            &mut cfg.simulate.library,
            &mut cfg.wavelet.histogram,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }
}
