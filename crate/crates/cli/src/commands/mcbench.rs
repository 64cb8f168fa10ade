use std::sync::Arc;

use gfet_prva::circuit::{simulate_chain, Preset};
use gfet_prva::device::SyntheticGfetParams;
use gfet_prva::mc::{
    check_invariants, map_to_lognormal, sweep, write_sweep_csv, SamplerSpec, SweepRow, TargetDensity,
    DEFAULT_MU, DEFAULT_REPEATS, DEFAULT_SIGMA,
};
use gfet_prva::rng::derive_seed;
use serde::Serialize;

use super::core_write;
use super::simulate::chain_library;
use crate::config::{HwSource, McbenchSection};
use crate::error::{CliError, CliResult};
use crate::manifest::ArtifactDir;
use crate::svg::{Plot, Series};
use crate::Globals;

pub const DEFAULT_SAMPLERS: [&str; 3] = ["uniform:0:3", "lognormal", "hwbuffer"];
pub const DEFAULT_N_GRID: [usize; 5] = [100, 1_000, 10_000, 100_000, 1_000_000];

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Samplers, comma separated: uniform:LO:HI, lognormal[:MU:SIGMA], hwbuffer
    #[arg(long, value_delimiter = ',')]
    samplers: Option<Vec<String>>,
    /// Sample counts, comma separated
    #[arg(long, value_delimiter = ',')]
    n_grid: Option<Vec<usize>>,
    /// Repeats per (sampler, n)
    #[arg(long)]
    repeats: Option<usize>,
    /// Hardware buffer contents: ideal or circuit
    #[arg(long)]
    hw_source: Option<HwSource>,
    /// Target lognormal mu
    #[arg(long)]
    mu: Option<f64>,
    /// Target lognormal sigma
    #[arg(long)]
    sigma: Option<f64>,
    /// Run the integration invariant suite instead of a sweep
    #[arg(long)]
    check: bool,
}

#[derive(Debug, Serialize)]
struct Settings {
    samplers: Vec<String>,
    n_grid: Vec<usize>,
    repeats: usize,
    hw_source: HwSource,
    mu: f64,
    sigma: f64,
    check: bool,
}

fn settings(section: McbenchSection, args: Args) -> CliResult<Settings> {
    let s = Settings {
        samplers: args
            .samplers
            .or(section.samplers)
            .unwrap_or_else(|| DEFAULT_SAMPLERS.iter().map(|s| s.to_string()).collect()),
        n_grid: args.n_grid.or(section.n_grid).unwrap_or_else(|| DEFAULT_N_GRID.to_vec()),
        repeats: args.repeats.or(section.repeats).unwrap_or(DEFAULT_REPEATS),
        hw_source: args.hw_source.or(section.hw_source).unwrap_or_default(),
        mu: args.mu.or(section.mu).unwrap_or(DEFAULT_MU),
        sigma: args.sigma.or(section.sigma).unwrap_or(DEFAULT_SIGMA),
        check: args.check || section.check.unwrap_or(false),
    };
    if s.samplers.is_empty() || s.n_grid.is_empty() {
        return Err(CliError::Usage("mcbench needs at least one sampler and one n".into()));
    }
    if s.repeats < 2 {
        return Err(CliError::Usage(format!("repeats must be at least 2, got {}", s.repeats)));
    }
    if let Some(n) = s.n_grid.iter().find(|&&n| n < 2) {
        return Err(CliError::Usage(format!("every n must be at least 2, got {n}")));
    }
    Ok(s)
}

fn number(field: &str, text: &str) -> CliResult<f64> {
    text.parse().map_err(|_| CliError::Usage(format!("sampler {field}: {text:?} is not a number")))
}

fn parse_sampler(text: &str, s: &Settings, seed: u64) -> CliResult<SamplerSpec> {
    let parts: Vec<&str> = text.split(':').map(str::trim).collect();
    let spec = match parts.as_slice() {
        ["uniform", lo, hi] => SamplerSpec::uniform(number("lo", lo)?, number("hi", hi)?, seed),
        ["lognormal"] => SamplerSpec::lognormal(s.mu, s.sigma, seed),
        ["lognormal", mu, sigma] => SamplerSpec::lognormal(number("mu", mu)?, number("sigma", sigma)?, seed),
        ["hwbuffer"] => match s.hw_source {
            HwSource::Ideal => SamplerSpec::ideal_hardware(s.mu, s.sigma, seed),
            HwSource::Circuit => SamplerSpec::buffer(circuit_buffer(s, seed)?, seed),
        },
        _ => {
            return Err(CliError::Usage(format!(
                "unknown sampler {text:?}; expected uniform:LO:HI, lognormal[:MU:SIGMA] or hwbuffer"
            )))
        }
    };
    spec.validate()?;
    Ok(spec)
}

/// Circuit output of the second preset chain, rescaled in log space onto the
/// target lognormal; one buffer slot per sample of the largest run.
fn circuit_buffer(s: &Settings, seed: u64) -> CliResult<Arc<[f64]>> {
    let chain = Preset::PaperRun2.chain();
    let library = chain_library(&chain, None, &SyntheticGfetParams::default())?;
    let len = s.n_grid.iter().copied().max().unwrap_or(2);
    let batch = simulate_chain(&chain, &library, len, derive_seed(seed, u64::MAX))?;
    Ok(map_to_lognormal(batch.values(), s.mu, s.sigma)?.into())
}

pub fn run(globals: &Globals, section: McbenchSection, args: Args) -> CliResult<()> {
    let s = settings(section, args)?;
    if s.check {
        return run_check(globals, &s);
    }
    let density = TargetDensity::normalized(s.mu, s.sigma)?;
    let specs = s
        .samplers
        .iter()
        .enumerate()
        .map(|(i, text)| parse_sampler(text, &s, derive_seed(globals.seed, i as u64)))
        .collect::<CliResult<Vec<_>>>()?;
    let rows = sweep(&specs, &density, &s.n_grid, s.repeats)?;

    let mut out = ArtifactDir::create(&globals.out)?;
    out.write("sweep.csv", core_write(|w| write_sweep_csv(&rows, w)))?;
    if globals.svg {
        out.write_text("error.svg", &sweep_plot(&rows, &specs, "Integration error", "mean E = |1 - A|", |r| (r.mean_error, r.error_ci90)).render())?;
        out.write_text("time.svg", &sweep_plot(&rows, &specs, "Run time", "mean time (s)", |r| (r.mean_time_s, r.time_ci90)).render())?;
    }
    out.finish("mcbench", globals.seed, &s)?;

    println!("{:<32} {:>9} {:>12} {:>11} {:>12}", "sampler", "n", "mean E", "E ci90", "mean time s");
    for r in &rows {
        println!(
            "{:<32} {:>9} {:>12.4e} {:>11.3e} {:>12.4e}",
            r.sampler, r.n, r.mean_error, r.error_ci90, r.mean_time_s
        );
    }
    Ok(())
}

fn sweep_plot(
    rows: &[SweepRow],
    specs: &[SamplerSpec],
    title: &str,
    y_label: &str,
    pick: impl Fn(&SweepRow) -> (f64, f64),
) -> Plot {
    let mut plot = Plot::new(title, "samples n", y_label).log_log();
    for spec in specs {
        let label = spec.label();
        let mine: Vec<&SweepRow> = rows.iter().filter(|r| r.sampler == label).collect();
        let points = mine.iter().map(|r| (r.n as f64, pick(r).0)).collect();
        let errors = mine.iter().map(|r| pick(r).1).collect();
        plot = plot.with_series(Series::new(label, points).with_errors(errors));
    }
    plot
}

fn run_check(globals: &Globals, s: &Settings) -> CliResult<()> {
    let checks = check_invariants(globals.seed, s.repeats)?;
    let mut text = String::from("invariant,passed,detail\n");
    for c in &checks {
        text.push_str(&format!("{},{},\"{}\"\n", c.name, c.passed, c.detail.replace('"', "\"\"")));
        println!("[{}] {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    let mut out = ArtifactDir::create(&globals.out)?;
    out.write_text("invariants.csv", &text)?;
    out.finish("mcbench --check", globals.seed, s)?;
    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Assertion(format!("invariant checks failed: {}", failed.join(", "))))
    }
}
