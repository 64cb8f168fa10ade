use std::path::PathBuf;

use gfet_prva::circuit::{ccdf_transform, fit_lognormal, simulate_chain, CircuitChain, Preset, SampleBatch};
use gfet_prva::device::{default_gate_grid, synthetic_library, CharacteristicLibrary, SyntheticGfetParams};
use gfet_prva::mc::{lognormal_pdf, TargetDensity};
use gfet_prva::stats::{build_histogram, chi_square_uniformity, mean_and_sample_variance, sample_skewness, Histogram};
use serde::Serialize;

use super::{core_write, load_library, min_max};
use crate::config::SimulateSection;
use crate::error::{CliError, CliResult};
use crate::manifest::ArtifactDir;
use crate::svg::{Plot, Series};
use crate::Globals;

pub const DEFAULT_N: usize = 100_000;
pub const DEFAULT_BINS: usize = 64;

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Named chain: paper-run-1 or paper-run-2
    #[arg(long)]
    preset: Option<String>,
    /// Number of samples
    #[arg(long)]
    n: Option<usize>,
    /// Histogram bins
    #[arg(long)]
    bins: Option<usize>,
    /// Characterization CSV; the synthetic model is used when absent
    #[arg(long)]
    library: Option<PathBuf>,
    /// Also emit the CCDF-transformed batch and its lognormal fit
    #[arg(long)]
    ccdf: bool,
}

#[derive(Debug, Serialize)]
struct Settings {
    chain_name: String,
    chain: CircuitChain,
    library: Option<PathBuf>,
    synthetic: Option<SyntheticGfetParams>,
    n: usize,
    bins: usize,
    ccdf: bool,
}

fn settings(section: SimulateSection, args: Args) -> CliResult<Settings> {
    let (chain_name, chain) = match (args.preset, section.chain, section.preset) {
        (Some(p), _, _) => preset(&p)?,
        (None, Some(chain), _) => ("custom".to_string(), chain),
        (None, None, Some(p)) => preset(&p)?,
        (None, None, None) => preset(Preset::PaperRun1.name())?,
    };
    let library = args.library.or(section.library);
    Ok(Settings {
        chain_name,
        chain,
        synthetic: library.is_none().then(|| section.params.unwrap_or_default()),
        library,
        n: args.n.or(section.n).unwrap_or(DEFAULT_N),
        bins: args.bins.or(section.bins).unwrap_or(DEFAULT_BINS),
        ccdf: args.ccdf || section.ccdf.unwrap_or(false),
    })
}

fn preset(name: &str) -> CliResult<(String, CircuitChain)> {
    let p: Preset = name.parse()?;
    Ok((p.name().to_string(), p.chain()))
}

/// Library for `chain`: loaded from disk, or synthesized at the chain's biases.
pub fn chain_library(
    chain: &CircuitChain,
    path: Option<&PathBuf>,
    params: &SyntheticGfetParams,
) -> CliResult<CharacteristicLibrary> {
    let library = match path {
        Some(p) => load_library(p)?,
        None => {
            let mut biases: Vec<f64> = chain.stages.iter().map(|s| s.v_ds_bias).collect();
            biases.sort_by(f64::total_cmp);
            biases.dedup();
            synthetic_library(params, &biases, &default_gate_grid())?
        }
    };
    chain.validate(&library)?;
    Ok(library)
}

#[derive(Debug, Serialize)]
struct BatchStats {
    count: usize,
    min: f64,
    max: f64,
    mean: f64,
    std_dev: f64,
    skewness: f64,
    chi_square: Option<f64>,
    chi_square_p: Option<f64>,
}

fn batch_stats(values: &[f64], hist: &Histogram) -> BatchStats {
    let (min, max) = min_max(values);
    let (mean, var) = mean_and_sample_variance(values);
    let chi = chi_square_uniformity(hist).ok();
    BatchStats {
        count: values.len(),
        min,
        max,
        mean,
        std_dev: var.sqrt(),
        skewness: sample_skewness(values),
        chi_square: chi.map(|c| c.0),
        chi_square_p: chi.map(|c| c.1),
    }
}

#[derive(Debug, Serialize)]
struct LognormalFit {
    mu: f64,
    sigma: f64,
}

#[derive(Debug, Serialize)]
struct Summary {
    chain: String,
    description: String,
    seed: u64,
    unit: String,
    output: BatchStats,
    ccdf: Option<BatchStats>,
    lognormal_fit: Option<LognormalFit>,
}

fn histogram_of(values: &[f64], bins: usize) -> CliResult<Histogram> {
    let (lo, hi) = min_max(values);
    let (lo, hi) = if lo < hi { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
    Ok(build_histogram(values, bins, lo, hi)?)
}

pub fn run(globals: &Globals, section: SimulateSection, args: Args) -> CliResult<()> {
    let s = settings(section, args)?;
    let params = s.synthetic.unwrap_or_default();
    let library = chain_library(&s.chain, s.library.as_ref(), &params)?;
    let batch = simulate_chain(&s.chain, &library, s.n, globals.seed)?;
    let hist = histogram_of(batch.values(), s.bins)?;
    let ccdf = if s.ccdf {
        let y = ccdf_transform(&batch)?;
        let hist = build_histogram(y.values(), s.bins, 0.0, 1.0)?;
        let fit = fit_lognormal(y.values())?;
        Some((y, hist, fit))
    } else {
        None
    };
    let summary = Summary {
        chain: s.chain_name.clone(),
        description: batch.description.clone(),
        seed: globals.seed,
        unit: batch.unit.symbol().to_string(),
        output: batch_stats(batch.values(), &hist),
        ccdf: ccdf.as_ref().map(|(y, h, _)| batch_stats(y.values(), h)),
        lognormal_fit: ccdf.as_ref().map(|(_, _, (mu, sigma))| LognormalFit { mu: *mu, sigma: *sigma }),
    };

    let mut out = ArtifactDir::create(&globals.out)?;
    out.write("samples.csv", core_write(|w| batch.write_csv(w)))?;
    out.write("histogram.csv", core_write(|w| hist.write_csv(w)))?;
    if let Some((y, h, _)) = &ccdf {
        out.write("ccdf_samples.csv", core_write(|w| y.write_csv(w)))?;
        out.write("ccdf_histogram.csv", core_write(|w| h.write_csv(w)))?;
    }
    out.write_json("summary.json", &summary)?;
    if globals.svg {
        let title = format!("{} output, n = {}", s.chain_name, s.n);
        out.write_text("histogram.svg", &histogram_plot(&title, &batch, &hist, None)?.render())?;
        if let Some((y, h, fit)) = &ccdf {
            let title = format!("{} CCDF transform", s.chain_name);
            out.write_text("ccdf_histogram.svg", &histogram_plot(&title, y, h, Some(*fit))?.render())?;
        }
    }
    out.finish("simulate", globals.seed, &s)?;

    println!("{}: {} samples, seed {}", s.chain_name, batch.len(), globals.seed);
    println!("  {}", batch.description);
    let o = &summary.output;
    println!("  range [{:.6}, {:.6}] {}, mean {:.6}, skewness {:.4}", o.min, o.max, summary.unit, o.mean, o.skewness);
    if let Some(p) = o.chi_square_p {
        println!("  chi-square uniformity p = {p:.4e}");
    }
    if let Some(fit) = &summary.lognormal_fit {
        println!("  CCDF lognormal fit: mu = {:.6}, sigma = {:.6}", fit.mu, fit.sigma);
    }
    Ok(())
}

fn histogram_plot(title: &str, batch: &SampleBatch, hist: &Histogram, fit: Option<(f64, f64)>) -> CliResult<Plot> {
    let unit = batch.unit.symbol();
    let mut plot = Plot::new(title, format!("value ({unit})"), "count").with_bars(
        "samples",
        hist.edges().to_vec(),
        hist.counts().iter().map(|&c| c as f64).collect(),
    );
    if let Some((mu, sigma)) = fit {
        // reference lognormal with the fitted parameters, scaled to counts
        let density = TargetDensity::normalized(mu, sigma).map_err(CliError::from)?;
        let width = hist.edges()[1] - hist.edges()[0];
        let scale = hist.total() as f64 * width;
        let points = hist
            .bin_centers()
            .into_iter()
            .filter(|x| *x > 0.0)
            .map(|x| Ok((x, scale * lognormal_pdf(&density, x)?)))
            .collect::<gfet_prva::Result<Vec<_>>>()?;
        plot = plot.with_series(Series::new(format!("lognormal({mu:.3}, {sigma:.3})"), points));
    }
    Ok(plot)
}
