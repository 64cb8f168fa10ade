//! Cascaded GFET + load-resistor circuit driven by uniform gate noise.
//!
//! Each stage evaluates its transfer curve at the incoming gate voltage and
//! converts the drain current to the next gate voltage through its load
//! resistor (`v_out = i_ds * R`). The last stage's voltage is the sample.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::distr::{Distribution, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::device::{CharacteristicLibrary, SweepBranch, TransferCurve};
use crate::error::{Error, Result};
use crate::rng;
use crate::stats;

/// One GFET and its load resistor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageConfig {
    pub v_ds_bias: f64,
    #[serde(default)]
    pub branch: SweepBranch,
    pub resistance_ohms: f64,
}

impl StageConfig {
    pub fn new(v_ds_bias: f64, resistance_ohms: f64) -> Self {
        StageConfig { v_ds_bias, branch: SweepBranch::Forward, resistance_ohms }
    }

    fn resolve<'a>(&self, library: &'a CharacteristicLibrary) -> Result<&'a TransferCurve> {
        if !(self.resistance_ohms.is_finite() && self.resistance_ohms > 0.0) {
            return Err(Error::config(format!("load resistance must be > 0, got {}", self.resistance_ohms)));
        }
        library.get(self.v_ds_bias, self.branch).ok_or_else(|| {
            Error::config(format!("no transfer curve for v_ds={} V, branch {}", self.v_ds_bias, self.branch))
        })
    }
}

/// Uniform gate source followed by an ordered list of stages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitChain {
    pub source_lo: f64,
    pub source_hi: f64,
    pub stages: Vec<StageConfig>,
}

impl CircuitChain {
    pub fn validate(&self, library: &CharacteristicLibrary) -> Result<()> {
        self.resolve(library).map(|_| ())
    }

    fn resolve<'a>(&self, library: &'a CharacteristicLibrary) -> Result<Vec<(&'a TransferCurve, f64)>> {
        if !(self.source_lo.is_finite() && self.source_hi.is_finite() && self.source_lo < self.source_hi) {
            return Err(Error::config(format!(
                "source range must satisfy lo < hi, got [{}, {}]",
                self.source_lo, self.source_hi
            )));
        }
        if self.stages.is_empty() {
            return Err(Error::config("circuit chain has no stages"));
        }
        self.stages.iter().map(|s| Ok((s.resolve(library)?, s.resistance_ohms))).collect()
    }

    pub fn describe(&self) -> String {
        let mut out = format!("uniform[{}, {}] V ({})", self.source_lo, self.source_hi, rng::GENERATOR_NAME);
        for s in &self.stages {
            out.push_str(&format!(" -> GFET(v_ds={} V, {}) -> R={} ohm", s.v_ds_bias, s.branch, s.resistance_ohms));
        }
        out
    }
}

/// Named circuit configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// 0.8 V then 1.0 V biased GFETs, 2.2 kOhm then 1 kOhm loads.
    PaperRun1,
    /// 1.0 V then 0.8 V biased GFETs, 1.2 kOhm then 1 kOhm loads.
    PaperRun2,
}

impl Preset {
    pub const ALL: [Preset; 2] = [Preset::PaperRun1, Preset::PaperRun2];

    pub fn name(self) -> &'static str {
        match self {
            Preset::PaperRun1 => "paper-run-1",
            Preset::PaperRun2 => "paper-run-2",
        }
    }

    pub fn chain(self) -> CircuitChain {
        let stages = match self {
            Preset::PaperRun1 => vec![StageConfig::new(0.8, 2200.0), StageConfig::new(1.0, 1000.0)],
            Preset::PaperRun2 => vec![StageConfig::new(1.0, 1200.0), StageConfig::new(0.8, 1000.0)],
        };
        CircuitChain { source_lo: -8.0, source_hi: 8.0, stages }
    }

    /// Drain-source biases the preset needs in its library.
    pub fn biases(self) -> Vec<f64> {
        self.chain().stages.iter().map(|s| s.v_ds_bias).collect()
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::config(format!("unknown preset {s:?} (known: paper-run-1, paper-run-2)")))
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleUnit {
    Volt,
    Ampere,
    Dimensionless,
}

impl SampleUnit {
    pub fn symbol(self) -> &'static str {
        match self {
            SampleUnit::Volt => "V",
            SampleUnit::Ampere => "A",
            SampleUnit::Dimensionless => "1",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "V" => Some(SampleUnit::Volt),
            "A" => Some(SampleUnit::Ampere),
            "1" => Some(SampleUnit::Dimensionless),
            _ => None,
        }
    }
}

/// A stream of generated samples with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    values: Vec<f64>,
    pub unit: SampleUnit,
    pub seed: u64,
    pub description: String,
}

impl SampleBatch {
    pub fn new(values: Vec<f64>, unit: SampleUnit, seed: u64, description: impl Into<String>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::validation("sample batch is empty"));
        }
        if let Some(idx) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::validation(format!("sample #{idx} is not finite ({})", values[idx])));
        }
        Ok(SampleBatch { values, unit, seed, description: description.into() })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// One value per line after a `# metadata` comment block and a `value`
    /// header row.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# metadata")?;
        writeln!(out, "# seed: {}", self.seed)?;
        writeln!(out, "# chain: {}", self.description)?;
        writeln!(out, "# unit: {}", self.unit.symbol())?;
        writeln!(out, "# count: {}", self.values.len())?;
        writeln!(out, "value")?;
        for v in &self.values {
            writeln!(out, "{v}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(source: R) -> Result<Self> {
        let mut seed = 0;
        let mut description = String::new();
        let mut unit = SampleUnit::Dimensionless;
        let mut values = Vec::new();
        let mut saw_header = false;
        for (idx, line) in source.lines().enumerate() {
            let line = line?;
            let lineno = idx as u64 + 1;
            let trimmed = line.trim();
            if let Some(meta) = trimmed.strip_prefix('#') {
                if let Some((key, value)) = meta.split_once(':') {
                    let value = value.trim();
                    match key.trim() {
                        "seed" => {
                            seed = value.parse().map_err(|_| Error::Parse {
                                line: lineno,
                                message: format!("bad seed {value:?}"),
                            })?
                        }
                        "chain" => description = value.to_string(),
                        "unit" => unit = SampleUnit::parse(value).unwrap_or(SampleUnit::Dimensionless),
                        _ => {}
                    }
                }
                continue;
            }
            if trimmed.is_empty() {
                continue;
            }
            if !saw_header {
                if trimmed != "value" {
                    return Err(Error::Parse { line: lineno, message: format!("expected header `value`, found {trimmed:?}") });
                }
                saw_header = true;
                continue;
            }
            let v = trimmed.parse::<f64>().map_err(|_| Error::Parse {
                line: lineno,
                message: format!("not a number: {trimmed:?}"),
            })?;
            values.push(v);
        }
        SampleBatch::new(values, unit, seed, description)
    }
}

/// Drives one stage: returns the drain current and the voltage across the
/// load resistor.
pub fn stage_transform(stage: &StageConfig, library: &CharacteristicLibrary, v_in: f64) -> Result<(f64, f64)> {
    let curve = stage.resolve(library)?;
    let i_ds = curve.current_at(v_in);
    Ok((i_ds, i_ds * stage.resistance_ohms))
}

fn propagate(stages: &[(&TransferCurve, f64)], v_in: f64) -> f64 {
    stages.iter().fold(v_in, |v, (curve, r)| curve.current_at(v) * r)
}

/// Uniform gate voltages drawn for `simulate_chain`, before any stage.
pub fn draw_source(chain: &CircuitChain, n: usize, seed: u64) -> Result<Vec<f64>> {
    let dist = Uniform::new_inclusive(chain.source_lo, chain.source_hi).map_err(|e| Error::config(e.to_string()))?;
    let mut rng = rng::seeded(seed);
    Ok((0..n).map(|_| dist.sample(&mut rng)).collect())
}

/// Pushes `n` seeded uniform gate voltages through every stage in order.
///
/// The source draws are sequential; stage evaluation is parallel and
/// element-wise, so the batch does not depend on the worker count.
pub fn simulate_chain(chain: &CircuitChain, library: &CharacteristicLibrary, n: usize, seed: u64) -> Result<SampleBatch> {
    if n == 0 {
        return Err(Error::config("sample count must be >= 1"));
    }
    let stages = chain.resolve(library)?;
    let mut values = draw_source(chain, n, seed)?;
    values.par_iter_mut().with_min_len(4096).for_each(|v| *v = propagate(&stages, *v));
    SampleBatch::new(values, SampleUnit::Volt, seed, chain.describe())
}

/// Mid-rank survival transform `y_i = 1 - (rank(x_i) - 0.5) / n`.
///
/// Output keeps the input order; ties share their average rank.
pub fn ccdf_transform(batch: &SampleBatch) -> Result<SampleBatch> {
    let n = batch.len();
    if n < 2 {
        return Err(Error::validation("CCDF transform needs at least 2 samples"));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| batch.values[a].total_cmp(&batch.values[b]));
    let sorted: Vec<f64> = order.iter().map(|&i| batch.values[i]).collect();
    let levels = stats::empirical_cdf(&sorted)?.mid_ranks();
    let mut out = vec![0.0; n];
    for (&orig, &f) in order.iter().zip(&levels) {
        out[orig] = 1.0 - f;
    }
    SampleBatch::new(out, SampleUnit::Dimensionless, batch.seed, format!("{} | ccdf(mid-rank)", batch.description))
}

/// Mean and population standard deviation of `ln x`.
pub fn fit_lognormal(values: &[f64]) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::validation("cannot fit an empty sample"));
    }
    if let Some(bad) = values.iter().find(|v| v.is_nan() || **v <= 0.0) {
        return Err(Error::domain(format!("lognormal fit needs positive samples, found {bad}")));
    }
    let n = values.len() as f64;
    let mu = values.iter().map(|v| v.ln()).sum::<f64>() / n;
    let var = values.iter().map(|v| (v.ln() - mu).powi(2)).sum::<f64>() / n;
    Ok((mu, var.sqrt()))
}
