//! Sorted-sample trapezoid integration of a lognormal density, with
//! interchangeable sample sources and a timing harness.
//!
//! One run generates `N` samples, sorts them, and accumulates trapezoids
//! between consecutive samples. The error is `|1 - A|` against the
//! normalized density. Sample sources are a bounded uniform range, a software
//! lognormal generator, and a "hardware" ring buffer that is filled before
//! the timer starts and read sequentially, so each sample costs one memory
//! access.

use std::io::Write;
use std::sync::Arc;
use std::time::Instant;

use rand::distr::{Distribution, Uniform};
use rand_chacha::ChaCha8Rng;
use rand_distr::LogNormal;
use rayon::prelude::*;
use statrs::function::gamma::gamma_ur;

use crate::circuit;
use crate::error::{Error, Result};
use crate::rng;
use crate::stats;

/// Log-space mean of the integration target.
pub const DEFAULT_MU: f64 = 0.0;
/// Log-space standard deviation of the integration target.
pub const DEFAULT_SIGMA: f64 = 0.25;
/// Repeats per sweep point.
pub const DEFAULT_REPEATS: usize = 1000;

/// `f(x) = (z / x) exp(-(ln x - mu)^2 / (2 sigma^2))` for `x > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetDensity {
    pub mu: f64,
    pub sigma: f64,
    pub z: f64,
}

impl TargetDensity {
    /// Unit-mass density, `z = 1 / (sigma sqrt(2 pi))`.
    pub fn normalized(mu: f64, sigma: f64) -> Result<Self> {
        Self::with_z(mu, sigma, 1.0 / (sigma * (2.0 * std::f64::consts::PI).sqrt()))
    }

    pub fn with_z(mu: f64, sigma: f64, z: f64) -> Result<Self> {
        if !mu.is_finite() {
            return Err(Error::validation(format!("mu must be finite, got {mu}")));
        }
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::validation(format!("sigma must be > 0, got {sigma}")));
        }
        if !(z.is_finite() && z > 0.0) {
            return Err(Error::validation(format!("z must be > 0, got {z}")));
        }
        Ok(TargetDensity { mu, sigma, z })
    }

    /// Density value; callers guarantee `x > 0`.
    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        let d = x.ln() - self.mu;
        (self.z / x) * (-(d * d) / (2.0 * self.sigma * self.sigma)).exp()
    }
}

impl Default for TargetDensity {
    fn default() -> Self {
        TargetDensity::normalized(DEFAULT_MU, DEFAULT_SIGMA).expect("default density is valid")
    }
}

pub fn lognormal_pdf(density: &TargetDensity, x: f64) -> Result<f64> {
    if x.is_nan() || x <= 0.0 {
        return Err(Error::domain(format!("lognormal density undefined at x = {x}")));
    }
    Ok(density.value(x))
}

/// Where a hardware buffer gets its contents.
#[derive(Debug, Clone, PartialEq)]
pub enum BufferSource {
    /// Fixed contents, e.g. a circuit simulation output; reading starts at
    /// `seed % len` and wraps.
    Samples(Arc<[f64]>),
    /// An ideal lognormal source refilled from the seed before every run.
    IdealLognormal { mu: f64, sigma: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum SamplerKind {
    UniformRange { lo: f64, hi: f64 },
    SoftwareLognormal { mu: f64, sigma: f64 },
    HardwareBuffer(BufferSource),
}

/// A seeded sample source.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplerSpec {
    pub kind: SamplerKind,
    pub seed: u64,
}

impl SamplerSpec {
    pub fn uniform(lo: f64, hi: f64, seed: u64) -> Self {
        SamplerSpec { kind: SamplerKind::UniformRange { lo, hi }, seed }
    }

    pub fn lognormal(mu: f64, sigma: f64, seed: u64) -> Self {
        SamplerSpec { kind: SamplerKind::SoftwareLognormal { mu, sigma }, seed }
    }

    pub fn ideal_hardware(mu: f64, sigma: f64, seed: u64) -> Self {
        SamplerSpec { kind: SamplerKind::HardwareBuffer(BufferSource::IdealLognormal { mu, sigma }), seed }
    }

    pub fn buffer(samples: impl Into<Arc<[f64]>>, seed: u64) -> Self {
        SamplerSpec { kind: SamplerKind::HardwareBuffer(BufferSource::Samples(samples.into())), seed }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        SamplerSpec { kind: self.kind.clone(), seed }
    }

    pub fn validate(&self) -> Result<()> {
        match &self.kind {
            SamplerKind::UniformRange { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    return Err(Error::config(format!("uniform range needs lo < hi, got [{lo}, {hi}]")));
                }
            }
            SamplerKind::SoftwareLognormal { mu, sigma }
            | SamplerKind::HardwareBuffer(BufferSource::IdealLognormal { mu, sigma }) => {
                if !(mu.is_finite() && sigma.is_finite() && *sigma > 0.0) {
                    return Err(Error::config(format!("lognormal sampler needs sigma > 0, got ({mu}, {sigma})")));
                }
            }
            SamplerKind::HardwareBuffer(BufferSource::Samples(buf)) => {
                if buf.is_empty() {
                    return Err(Error::config("hardware buffer is empty"));
                }
                if buf.iter().any(|v| !v.is_finite()) {
                    return Err(Error::config("hardware buffer holds non-finite samples"));
                }
            }
        }
        Ok(())
    }

    /// Short label used in sweep output; never contains a comma.
    pub fn label(&self) -> String {
        match &self.kind {
            SamplerKind::UniformRange { lo, hi } => format!("uniform[{lo};{hi}]"),
            SamplerKind::SoftwareLognormal { mu, sigma } => format!("lognormal(mu={mu};sigma={sigma})"),
            SamplerKind::HardwareBuffer(BufferSource::IdealLognormal { mu, sigma }) => {
                format!("hwbuffer-ideal(mu={mu};sigma={sigma})")
            }
            SamplerKind::HardwareBuffer(BufferSource::Samples(buf)) => format!("hwbuffer-samples(len={})", buf.len()),
        }
    }

    /// Everything that happens before the timer starts: generator seeding,
    /// and filling the hardware buffer.
    pub fn prepare(&self, n: usize) -> Result<PreparedSampler> {
        self.validate()?;
        Ok(match &self.kind {
            SamplerKind::UniformRange { lo, hi } => PreparedSampler::Uniform {
                dist: Uniform::new(*lo, *hi).map_err(|e| Error::config(e.to_string()))?,
                rng: rng::seeded(self.seed),
            },
            SamplerKind::SoftwareLognormal { mu, sigma } => PreparedSampler::Lognormal {
                dist: LogNormal::new(*mu, *sigma).map_err(|e| Error::config(e.to_string()))?,
                rng: rng::seeded(self.seed),
            },
            SamplerKind::HardwareBuffer(BufferSource::IdealLognormal { mu, sigma }) => {
                let dist = LogNormal::new(*mu, *sigma).map_err(|e| Error::config(e.to_string()))?;
                let mut rng = rng::seeded_stream(self.seed, 1);
                let buffer: Arc<[f64]> = (0..n.max(1)).map(|_| dist.sample(&mut rng)).collect();
                PreparedSampler::Buffer { buffer, offset: 0 }
            }
            SamplerKind::HardwareBuffer(BufferSource::Samples(buf)) => {
                PreparedSampler::Buffer { buffer: Arc::clone(buf), offset: (self.seed % buf.len() as u64) as usize }
            }
        })
    }
}

/// A sampler ready to emit values.
pub enum PreparedSampler {
    Uniform { dist: Uniform<f64>, rng: ChaCha8Rng },
    Lognormal { dist: LogNormal<f64>, rng: ChaCha8Rng },
    Buffer { buffer: Arc<[f64]>, offset: usize },
}

impl PreparedSampler {
    pub fn draw(&mut self, n: usize) -> Vec<f64> {
        match self {
            PreparedSampler::Uniform { dist, rng } => (0..n).map(|_| dist.sample(rng)).collect(),
            PreparedSampler::Lognormal { dist, rng } => (0..n).map(|_| dist.sample(rng)).collect(),
            PreparedSampler::Buffer { buffer, offset } => {
                let mut out = Vec::with_capacity(n);
                while out.len() < n {
                    let take = (n - out.len()).min(buffer.len() - *offset);
                    out.extend_from_slice(&buffer[*offset..*offset + take]);
                    *offset = (*offset + take) % buffer.len();
                }
                out
            }
        }
    }
}

/// `n` samples from `spec`; deterministic in `(spec, n)`.
pub fn draw_samples(spec: &SamplerSpec, n: usize) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::validation(format!("need at least 2 samples, got {n}")));
    }
    Ok(spec.prepare(n)?.draw(n))
}

/// Trapezoid sum over already sorted abscissae, consecutive pairs in
/// ascending order: `A += (x_i - x_{i-1}) * (f(x_i) + f(x_{i-1})) / 2`.
pub fn trapezoid_sum_sorted(sorted: &[f64], f: impl Fn(f64) -> f64) -> f64 {
    let mut area = 0.0;
    let mut prev_x = sorted[0];
    let mut prev_f = f(prev_x);
    for &x in &sorted[1..] {
        let fx = f(x);
        let base = x - prev_x;
        let height = (fx + prev_f) / 2.0;
        area += base * height;
        prev_x = x;
        prev_f = fx;
    }
    area
}

/// Sorts `samples` in place and integrates `f` over them; returns
/// `(area, |1 - area|)`.
pub fn integrate_sorted_in_place(samples: &mut [f64], f: impl Fn(f64) -> f64) -> Result<(f64, f64)> {
    if samples.len() < 2 {
        return Err(Error::validation(format!("need at least 2 samples, got {}", samples.len())));
    }
    if let Some(bad) = samples.iter().find(|x| !x.is_finite() || **x <= 0.0) {
        return Err(Error::domain(format!("samples must be finite and > 0, found {bad}")));
    }
    samples.sort_unstable_by(f64::total_cmp);
    let area = trapezoid_sum_sorted(samples, f);
    Ok((area, (1.0 - area).abs()))
}

/// Integrates an arbitrary integrand over a copy of `samples`.
pub fn integrate_mc_with(samples: &[f64], f: impl Fn(f64) -> f64) -> Result<(f64, f64)> {
    let mut sorted = samples.to_vec();
    integrate_sorted_in_place(&mut sorted, f)
}

/// Integrates the target density over the sorted samples.
pub fn integrate_mc(samples: &[f64], density: &TargetDensity) -> Result<(f64, f64)> {
    integrate_mc_with(samples, |x| density.value(x))
}

/// One timed execution.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub n: usize,
    pub area: f64,
    pub error_e: f64,
    pub elapsed_s: f64,
    pub sampler: String,
}

/// Prepares the sampler, then times generation, sorting and accumulation.
pub fn run_once(spec: &SamplerSpec, density: &TargetDensity, n: usize) -> Result<RunResult> {
    if n < 2 {
        return Err(Error::validation(format!("need at least 2 samples, got {n}")));
    }
    let mut sampler = spec.prepare(n)?;
    let start = Instant::now();
    let mut samples = sampler.draw(n);
    let (area, error_e) = integrate_sorted_in_place(&mut samples, |x| density.value(x))?;
    let elapsed_s = start.elapsed().as_secs_f64();
    Ok(RunResult { n, area, error_e, elapsed_s, sampler: spec.label() })
}

/// Aggregate of repeated runs at one `(sampler, n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub sampler: String,
    pub n: usize,
    pub repeats: usize,
    pub mean_error: f64,
    pub error_ci90: f64,
    pub mean_time_s: f64,
    pub time_ci90: f64,
}

pub const SWEEP_HEADER: &str = "sampler,n,repeats,mean_error,error_ci90,mean_time_s,time_ci90";

impl SweepRow {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.sampler, self.n, self.repeats, self.mean_error, self.error_ci90, self.mean_time_s, self.time_ci90
        )
    }
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut out: W) -> Result<()> {
    writeln!(out, "{SWEEP_HEADER}")?;
    for row in rows {
        writeln!(out, "{}", row.csv_line())?;
    }
    Ok(())
}

/// Runs once per seed, in parallel, and aggregates in seed order.
pub fn run_with_seeds(spec: &SamplerSpec, density: &TargetDensity, n: usize, seeds: &[u64]) -> Result<SweepRow> {
    if seeds.len() < 2 {
        return Err(Error::validation("an experiment needs at least 2 repeats"));
    }
    let runs = seeds
        .par_iter()
        .map(|&s| run_once(&spec.with_seed(s), density, n))
        .collect::<Result<Vec<_>>>()?;
    let errors: Vec<f64> = runs.iter().map(|r| r.error_e).collect();
    let times: Vec<f64> = runs.iter().map(|r| r.elapsed_s).collect();
    let (mean_error, error_ci90) = stats::confidence_interval_90(&errors)?;
    let (mean_time_s, time_ci90) = stats::confidence_interval_90(&times)?;
    Ok(SweepRow { sampler: spec.label(), n, repeats: seeds.len(), mean_error, error_ci90, mean_time_s, time_ci90 })
}

/// `repeats` runs with seeds derived from `spec.seed`.
pub fn run_experiment(spec: &SamplerSpec, density: &TargetDensity, n: usize, repeats: usize) -> Result<SweepRow> {
    let seeds: Vec<u64> = (0..repeats as u64).map(|r| rng::derive_seed(spec.seed, r)).collect();
    run_with_seeds(spec, density, n, &seeds)
}

/// Every sampler at every `n`, sampler-major.
pub fn sweep(specs: &[SamplerSpec], density: &TargetDensity, n_grid: &[usize], repeats: usize) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::with_capacity(specs.len() * n_grid.len());
    for spec in specs {
        for &n in n_grid {
            rows.push(run_experiment(spec, density, n, repeats)?);
        }
    }
    Ok(rows)
}

/// Mean wall-clock seconds per sample spent in the draw step alone.
pub fn draw_cost_per_sample(spec: &SamplerSpec, n: usize, repeats: usize) -> Result<f64> {
    if n == 0 || repeats == 0 {
        return Err(Error::validation("draw cost needs n >= 1 and repeats >= 1"));
    }
    let mut total = 0.0;
    for r in 0..repeats as u64 {
        let mut sampler = spec.with_seed(rng::derive_seed(spec.seed, r)).prepare(n)?;
        let start = Instant::now();
        let samples = sampler.draw(n);
        total += start.elapsed().as_secs_f64();
        std::hint::black_box(samples);
    }
    Ok(total / (repeats * n) as f64)
}

/// Probability mass of the target outside `[lo, hi]`:
/// `1 - [Phi((ln hi - mu)/sigma) - Phi((ln lo - mu)/sigma)]`.
///
/// `hi` may be `+inf`. Both tails are summed directly for accuracy far out.
pub fn tail_mass_outside(density: &TargetDensity, lo: f64, hi: f64) -> Result<f64> {
    if !(lo > 0.0 && lo < hi && lo.is_finite()) || hi.is_nan() {
        return Err(Error::domain(format!("tail mass needs 0 < lo < hi, got ({lo}, {hi})")));
    }
    let a = (lo.ln() - density.mu) / density.sigma;
    let b = (hi.ln() - density.mu) / density.sigma;
    // Phi(a) + (1 - Phi(b))
    Ok(normal_sf(-a) + normal_sf(b))
}

/// Standard normal survival function `1 - Phi(z)`, via the regularized
/// upper incomplete gamma `Q(1/2, z^2/2)`, which keeps full relative
/// precision deep in the tail.
pub fn normal_sf(z: f64) -> f64 {
    if z == f64::INFINITY {
        return 0.0;
    }
    if z == f64::NEG_INFINITY {
        return 1.0;
    }
    let half_tail = if z == 0.0 { 0.5 } else { 0.5 * gamma_ur(0.5, 0.5 * z * z) };
    if z >= 0.0 {
        half_tail
    } else {
        1.0 - half_tail
    }
}

/// Rescales positive samples in log space to the target `(mu, sigma)`:
/// `exp(mu + sigma (ln x - mu_hat) / sigma_hat)` with the fitted values.
pub fn map_to_lognormal(values: &[f64], mu: f64, sigma: f64) -> Result<Vec<f64>> {
    let (mu_hat, sigma_hat) = circuit::fit_lognormal(values)?;
    if sigma_hat == 0.0 {
        return Err(Error::domain("cannot rescale a sample with zero log-spread"));
    }
    Ok(values.iter().map(|v| (mu + sigma * (v.ln() - mu_hat) / sigma_hat).exp()).collect())
}

/// First grid point from which `challenger` stays strictly below
/// `reference` through the end of the grid, i.e. where the challenger
/// overtakes for good. `None` if it is not below at the last point.
pub fn overtaking_point(n_grid: &[usize], reference: &[f64], challenger: &[f64]) -> Option<usize> {
    let below: Vec<bool> = reference.iter().zip(challenger).map(|(r, c)| c < r).collect();
    if !below.last().copied().unwrap_or(false) {
        return None;
    }
    let first = below.iter().rposition(|b| !b).map_or(0, |i| i + 1);
    Some(n_grid[first])
}

/// Outcome of one `--check` invariant.
#[derive(Debug, Clone, PartialEq)]
pub struct InvariantCheck {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Runs the integration invariants; `repeats` (at least 100 is used) drives
/// the statistical comparison.
pub fn check_invariants(seed: u64, repeats: usize) -> Result<Vec<InvariantCheck>> {
    let density = TargetDensity::default();
    let mut checks = Vec::new();

    let samples = draw_samples(&SamplerSpec::lognormal(DEFAULT_MU, DEFAULT_SIGMA, seed), 10_000)?;
    let (area, _) = integrate_mc(&samples, &density)?;
    let mut reversed = samples.clone();
    reversed.reverse();
    let (area_rev, _) = integrate_mc(&reversed, &density)?;
    checks.push(InvariantCheck {
        name: "permutation-invariance",
        passed: area == area_rev,
        detail: format!("A = {area:e}, reversed A = {area_rev:e}"),
    });

    let mut dup = samples.clone();
    dup.extend_from_slice(&samples[..100]);
    let (area_dup, _) = integrate_mc(&dup, &density)?;
    checks.push(InvariantCheck {
        name: "non-negative-and-duplicate-stable",
        passed: area >= 0.0 && area_dup == area,
        detail: format!("A = {area:e}, with duplicates A = {area_dup:e}"),
    });

    let grid = crate::device::linear_grid(0.1, 5.0, 1025);
    let (area_grid, _) = integrate_mc(&grid, &density)?;
    let h = grid[1] - grid[0];
    let classic = h * (0.5 * density.value(grid[0])
        + grid[1..grid.len() - 1].iter().map(|&x| density.value(x)).sum::<f64>()
        + 0.5 * density.value(grid[grid.len() - 1]));
    checks.push(InvariantCheck {
        name: "grid-trapezoid-equivalence",
        passed: (area_grid - classic).abs() <= 1e-12,
        detail: format!("A = {area_grid:e}, composite trapezoid = {classic:e}"),
    });

    let repeats = repeats.max(100);
    let n = 1_000_000;
    let log = run_experiment(&SamplerSpec::lognormal(DEFAULT_MU, DEFAULT_SIGMA, seed), &density, n, repeats)?;
    let uni = run_experiment(&SamplerSpec::uniform(0.0, 3.0, seed), &density, n, repeats)?;
    checks.push(InvariantCheck {
        name: "matched-distribution-beats-bounded-uniform",
        passed: log.mean_error < uni.mean_error,
        detail: format!(
            "n = {n}, {repeats} repeats: lognormal E = {:e}, uniform[0;3] E = {:e}",
            log.mean_error, uni.mean_error
        ),
    });

    let hw = draw_cost_per_sample(&SamplerSpec::ideal_hardware(DEFAULT_MU, DEFAULT_SIGMA, seed), n, 5)?;
    let sw = draw_cost_per_sample(&SamplerSpec::lognormal(DEFAULT_MU, DEFAULT_SIGMA, seed), n, 5)?;
    checks.push(InvariantCheck {
        name: "hardware-buffer-draw-cheaper",
        passed: hw < sw,
        detail: format!("per-sample draw: buffer {hw:e} s, software lognormal {sw:e} s, ratio {:.2}", sw / hw),
    });

    Ok(checks)
}
