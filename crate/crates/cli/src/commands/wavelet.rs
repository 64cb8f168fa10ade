use std::fs::File;
use std::path::PathBuf;

use gfet_prva::mc::{draw_samples, SamplerSpec, DEFAULT_MU, DEFAULT_SIGMA};
use gfet_prva::stats::{build_histogram, normalize, Histogram};
use gfet_prva::wavelet::{coiflet2_filter, default_levels, dwt, reconstruct_distribution};
use serde::Serialize;

use super::core_write;
use crate::config::{KBudget, WaveletSection};
use crate::error::{CliError, CliResult};
use crate::manifest::ArtifactDir;
use crate::svg::{Plot, Series};
use crate::Globals;

pub const DEFAULT_BINS: usize = 64;
pub const DEFAULT_SAMPLES: usize = 1_000_000;

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Histogram CSV (bin_lo,bin_hi,count) with a power-of-two bin count
    #[arg(long)]
    histogram: Option<PathBuf>,
    /// Use a seeded lognormal sample histogram instead
    #[arg(long)]
    lognormal: bool,
    /// Coefficient budgets, comma separated; "full" keeps everything
    #[arg(long, value_delimiter = ',')]
    k: Option<Vec<KBudget>>,
    /// Bins of the generated histogram
    #[arg(long)]
    bins: Option<usize>,
    /// Samples behind the generated histogram
    #[arg(long)]
    samples: Option<usize>,
    /// Decomposition depth
    #[arg(long)]
    levels: Option<usize>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "snake_case")]
enum Source {
    Histogram(PathBuf),
    Lognormal { mu: f64, sigma: f64, samples: usize, bins: usize },
}

#[derive(Debug, Serialize)]
struct Settings {
    source: Source,
    filter: String,
    k: Vec<KBudget>,
    levels: Option<usize>,
}

fn settings(section: WaveletSection, args: Args) -> CliResult<Settings> {
    let lognormal = args.lognormal || section.lognormal.unwrap_or(false);
    let path = args.histogram.or(if lognormal { None } else { section.histogram });
    let source = match (path, lognormal) {
        (Some(_), true) => return Err(CliError::Usage("give either --histogram or --lognormal, not both".into())),
        (Some(p), false) => Source::Histogram(p),
        (None, true) => Source::Lognormal {
            mu: args.mu.or(section.mu).unwrap_or(DEFAULT_MU),
            sigma: args.sigma.or(section.sigma).unwrap_or(DEFAULT_SIGMA),
            samples: args.samples.or(section.samples).unwrap_or(DEFAULT_SAMPLES),
            bins: args.bins.or(section.bins).unwrap_or(DEFAULT_BINS),
        },
        (None, false) => return Err(CliError::Usage("wavelet needs --histogram <csv> or --lognormal".into())),
    };
    let k = args.k.or(section.k).unwrap_or_else(|| {
        vec![KBudget::Count(8), KBudget::Count(16), KBudget::Count(32), KBudget::Full]
    });
    if k.is_empty() {
        return Err(CliError::Usage("empty coefficient budget list".into()));
    }
    Ok(Settings { source, filter: coiflet2_filter().name().to_string(), k, levels: args.levels.or(section.levels) })
}

fn load_histogram(source: &Source, seed: u64) -> CliResult<Histogram> {
    match source {
        Source::Histogram(path) => {
            let file = File::open(path).map_err(|e| CliError::io(format!("opening {}", path.display()), e))?;
            Histogram::read_csv(file).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
        }
        Source::Lognormal { mu, sigma, samples, bins } => {
            let values = draw_samples(&SamplerSpec::lognormal(*mu, *sigma, seed), *samples)?;
            // +-4 sigma in log space; the rare outliers land in the end bins
            let (lo, hi) = ((mu - 4.0 * sigma).exp(), (mu + 4.0 * sigma).exp());
            Ok(build_histogram(&values, *bins, lo, hi)?)
        }
    }
}

#[derive(Debug, Serialize)]
struct KlRow {
    k: String,
    coefficients: usize,
    kl: f64,
}

pub fn run(globals: &Globals, section: WaveletSection, args: Args) -> CliResult<()> {
    let s = settings(section, args)?;
    let hist = load_histogram(&s.source, globals.seed)?;
    let m = hist.bins();
    if !m.is_power_of_two() || m < 2 {
        return Err(CliError::Usage(format!("histogram has {m} bins; the transform needs a power of two")));
    }
    let levels = s.levels.unwrap_or_else(|| default_levels(m));
    let filter = coiflet2_filter();
    let original = normalize(&hist)?;
    let coeffs = dwt(original.probabilities(), &filter, levels)?;

    let mut rows = Vec::new();
    let mut recs = Vec::new();
    for budget in &s.k {
        let k = budget.resolve(m);
        let (rec, kl) = reconstruct_distribution(&hist, k, &filter, levels)?;
        rows.push(KlRow { k: budget.to_string(), coefficients: k, kl });
        recs.push((*budget, rec));
    }

    let mut out = ArtifactDir::create(&globals.out)?;
    out.write("histogram.csv", core_write(|w| hist.write_csv(w)))?;
    out.write("coefficients.csv", core_write(|w| coeffs.write_csv(w)))?;
    for (budget, rec) in &recs {
        let mut text = String::from("bin_lo,bin_hi,original,reconstructed\n");
        for (i, w) in hist.edges().windows(2).enumerate() {
            text.push_str(&format!("{},{},{},{}\n", w[0], w[1], original.probabilities()[i], rec.probabilities()[i]));
        }
        out.write_text(&format!("reconstruction_k{budget}.csv"), &text)?;
    }
    let mut summary = String::from("k,coefficients,kl\n");
    for r in &rows {
        summary.push_str(&format!("{},{},{:e}\n", r.k, r.coefficients, r.kl));
    }
    out.write_text("kl_summary.csv", &summary)?;
    if globals.svg {
        let centers = hist.bin_centers();
        let mut plot = Plot::new(format!("{} reconstruction, {m} bins", filter.name()), "value", "probability")
            .with_bars("original", hist.edges().to_vec(), original.probabilities().to_vec());
        for (budget, rec) in &recs {
            let points = centers.iter().copied().zip(rec.probabilities().iter().copied()).collect();
            plot = plot.with_series(Series::new(format!("k = {budget}"), points));
        }
        out.write_text("reconstruction.svg", &plot.render())?;
    }
    out.finish("wavelet", globals.seed, &s)?;

    println!("{} bins, {} levels, {} filter", m, levels, filter.name());
    for r in &rows {
        println!("  k = {:>5} ({:>5} coefficients): KL = {:.6e}", r.k, r.coefficients, r.kl);
    }
    Ok(())
}
