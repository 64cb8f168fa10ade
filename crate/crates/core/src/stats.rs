//! Histograms, empirical CDFs, divergences and goodness-of-fit statistics.

use std::io::Write;

use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

/// Probability floor applied to `q` inside [`kl_divergence`].
pub const KL_FLOOR: f64 = 1e-12;

/// Two-sided 90 % normal quantile.
pub const Z_90: f64 = 1.645;

const NORMALIZATION_TOL: f64 = 1e-12;

/// Equal-width histogram.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    edges: Vec<f64>,
    counts: Vec<u64>,
    total: u64,
}

impl Histogram {
    /// Wraps precomputed edges and counts, e.g. read back from a CSV file.
    pub fn from_parts(edges: Vec<f64>, counts: Vec<u64>) -> Result<Self> {
        if counts.is_empty() || edges.len() != counts.len() + 1 {
            return Err(Error::validation(format!(
                "histogram needs m >= 1 bins and m + 1 edges, got {} counts and {} edges",
                counts.len(),
                edges.len()
            )));
        }
        if edges.iter().any(|e| !e.is_finite()) || edges.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::validation("histogram edges must be finite and strictly increasing"));
        }
        let total = counts.iter().sum();
        Ok(Histogram { edges, counts, total })
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn bin_centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    /// `bin_lo,bin_hi,count` rows with a header line.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "bin_lo,bin_hi,count")?;
        for (w, c) in self.edges.windows(2).zip(&self.counts) {
            writeln!(out, "{},{},{}", w[0], w[1], c)?;
        }
        Ok(())
    }

    /// Reads the `bin_lo,bin_hi,count` format; bins must be contiguous.
    pub fn read_csv<R: std::io::Read>(source: R) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(source);
        let headers = reader.headers().map_err(|e| Error::Parse { line: 1, message: e.to_string() })?;
        if headers.iter().collect::<Vec<_>>() != ["bin_lo", "bin_hi", "count"] {
            return Err(Error::Parse { line: 1, message: "expected header `bin_lo,bin_hi,count`".into() });
        }
        let mut edges = Vec::new();
        let mut counts = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| Error::Parse {
                line: e.position().map_or(0, |p| p.line()),
                message: e.to_string(),
            })?;
            let line = record.position().map_or(0, |p| p.line());
            let bad = |what: &str| Error::Parse { line, message: format!("bad {what}") };
            let lo: f64 = record[0].parse().map_err(|_| bad("bin_lo"))?;
            let hi: f64 = record[1].parse().map_err(|_| bad("bin_hi"))?;
            let count: u64 = record[2].parse().map_err(|_| bad("count"))?;
            match edges.last() {
                None => edges.push(lo),
                Some(&prev) if prev != lo => {
                    return Err(Error::Parse { line, message: format!("bin starts at {lo}, previous ended at {prev}") })
                }
                Some(_) => {}
            }
            edges.push(hi);
            counts.push(count);
        }
        Histogram::from_parts(edges, counts)
    }
}

/// Bins `values` into `m` equal-width bins over `[lo, hi]`.
///
/// Bins are half-open `[e_k, e_{k+1})` except the last, which also takes
/// `hi`. Values outside the range land in the nearest edge bin.
pub fn build_histogram(values: &[f64], m: usize, lo: f64, hi: f64) -> Result<Histogram> {
    if values.is_empty() {
        return Err(Error::validation("cannot build a histogram of no values"));
    }
    if m == 0 {
        return Err(Error::validation("histogram needs at least one bin"));
    }
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::validation(format!("histogram range must satisfy lo < hi, got [{lo}, {hi}]")));
    }
    let width = (hi - lo) / m as f64;
    let edges: Vec<f64> = (0..=m).map(|k| if k == m { hi } else { lo + k as f64 * width }).collect();
    let mut counts = vec![0u64; m];
    for &v in values {
        counts[bin_index(&edges, width, v)] += 1;
    }
    let total = values.len() as u64;
    Ok(Histogram { edges, counts, total })
}

fn bin_index(edges: &[f64], width: f64, v: f64) -> usize {
    let m = edges.len() - 1;
    if v.is_nan() || v < edges[0] {
        return 0;
    }
    if v >= edges[m] {
        return m - 1;
    }
    let mut idx = (((v - edges[0]) / width) as usize).min(m - 1);
    // the division may round across an edge; settle against the stored edges
    while idx + 1 < m && v >= edges[idx + 1] {
        idx += 1;
    }
    while idx > 0 && v < edges[idx] {
        idx -= 1;
    }
    idx
}

/// Probability vector over a fixed set of bins.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDistribution {
    probabilities: Vec<f64>,
    support: Option<Vec<f64>>,
}

impl DiscreteDistribution {
    pub fn new(probabilities: Vec<f64>, support: Option<Vec<f64>>) -> Result<Self> {
        if probabilities.is_empty() {
            return Err(Error::validation("distribution has no bins"));
        }
        if probabilities.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::validation("probabilities must be finite and non-negative"));
        }
        let sum: f64 = probabilities.iter().sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::validation(format!("probabilities sum to {sum}, expected 1")));
        }
        if let Some(edges) = &support {
            if edges.len() != probabilities.len() + 1 {
                return Err(Error::validation("support labels must be bin edges (m + 1 values)"));
            }
        }
        Ok(DiscreteDistribution { probabilities, support })
    }

    /// Scales non-negative weights to unit mass.
    pub fn from_weights(weights: &[f64], support: Option<Vec<f64>>) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::validation("weights must be finite and non-negative"));
        }
        let sum: f64 = weights.iter().sum();
        if sum <= 0.0 {
            return Err(Error::validation("weights have zero total mass"));
        }
        DiscreteDistribution::new(weights.iter().map(|w| w / sum).collect(), support)
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn support(&self) -> Option<&[f64]> {
        self.support.as_deref()
    }

    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }
}

/// Bin frequencies `counts / total`, labelled with the histogram edges.
pub fn normalize(hist: &Histogram) -> Result<DiscreteDistribution> {
    if hist.total == 0 {
        return Err(Error::validation("cannot normalize an empty histogram"));
    }
    let total = hist.total as f64;
    let probabilities = hist.counts.iter().map(|&c| c as f64 / total).collect();
    DiscreteDistribution::new(probabilities, Some(hist.edges.clone()))
}

/// `Σ p ln(p / q)` in nats.
///
/// Bins with `p = 0` contribute nothing. Where `p > 0` and `q` falls below
/// [`KL_FLOOR`], `q` is raised to the floor and the whole `q` vector is then
/// renormalized, which keeps the result finite. When no bin needs the floor
/// (in particular when `p = q`) `q` is left untouched.
pub fn kl_divergence(p: &DiscreteDistribution, q: &DiscreteDistribution) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::validation(format!("length mismatch: p has {} bins, q has {}", p.len(), q.len())));
    }
    let floored: Vec<f64> = p
        .probabilities
        .iter()
        .zip(&q.probabilities)
        .map(|(&pi, &qi)| if pi > 0.0 && qi < KL_FLOOR { KL_FLOOR } else { qi })
        .collect();
    let mass: f64 = floored.iter().sum();
    Ok(p
        .probabilities
        .iter()
        .zip(&floored)
        .filter(|(pi, _)| **pi > 0.0)
        .map(|(&pi, &qi)| pi * (pi / (qi / mass)).ln())
        .sum())
}

/// Pearson chi-square test of `hist` against equal expected counts.
///
/// Returns `(statistic, p_value)` with `m - 1` degrees of freedom.
pub fn chi_square_uniformity(hist: &Histogram) -> Result<(f64, f64)> {
    let m = hist.bins();
    if m < 2 {
        return Err(Error::validation("chi-square test needs at least 2 bins"));
    }
    let expected = hist.total as f64 / m as f64;
    if expected < 5.0 {
        return Err(Error::validation(format!("expected count per bin is {expected:.3}, need at least 5")));
    }
    let statistic: f64 = hist
        .counts
        .iter()
        .map(|&c| {
            let d = c as f64 - expected;
            d * d / expected
        })
        .sum();
    let dist = ChiSquared::new((m - 1) as f64).map_err(|e| Error::validation(e.to_string()))?;
    let p_value = if statistic == 0.0 { 1.0 } else { dist.sf(statistic) };
    Ok((statistic, p_value))
}

/// Step-function empirical CDF.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCdf {
    sorted: Vec<f64>,
}

impl EmpiricalCdf {
    /// `F(x) = #{x_i <= x} / n`.
    pub fn eval(&self, x: f64) -> f64 {
        self.sorted.partition_point(|&v| v <= x) as f64 / self.sorted.len() as f64
    }

    pub fn sorted_values(&self) -> &[f64] {
        &self.sorted
    }

    /// Mid-rank CDF levels `(r - 0.5) / n` of the sorted values, with tied
    /// values sharing their average rank.
    pub fn mid_ranks(&self) -> Vec<f64> {
        let n = self.sorted.len() as f64;
        let mut out = Vec::with_capacity(self.sorted.len());
        let mut start = 0;
        while start < self.sorted.len() {
            let v = self.sorted[start];
            let end = start + self.sorted[start..].iter().take_while(|&&x| x == v).count();
            // ranks start+1 ..= end
            let rank = 0.5 * ((start + 1) + end) as f64;
            out.extend(std::iter::repeat_n((rank - 0.5) / n, end - start));
            start = end;
        }
        out
    }
}

pub fn empirical_cdf(values: &[f64]) -> Result<EmpiricalCdf> {
    if values.is_empty() {
        return Err(Error::validation("empirical CDF of no values"));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::validation("empirical CDF input contains NaN"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(EmpiricalCdf { sorted })
}

/// Mean and 90 % normal-approximation half-width `1.645 s / sqrt(n)`.
pub fn confidence_interval_90(values: &[f64]) -> Result<(f64, f64)> {
    if values.len() < 2 {
        return Err(Error::validation("confidence interval needs at least 2 values"));
    }
    let (mean, var) = mean_and_sample_variance(values);
    Ok((mean, Z_90 * var.sqrt() / (values.len() as f64).sqrt()))
}

/// Two-pass mean and unbiased variance.
pub fn mean_and_sample_variance(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, ss / (n - 1.0))
}

/// Population skewness `m3 / m2^(3/2)`; zero for a degenerate sample.
pub fn sample_skewness(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let (m2, m3) = values.iter().fold((0.0, 0.0), |(m2, m3), v| {
        let d = v - mean;
        (m2 + d * d, m3 + d * d * d)
    });
    let (m2, m3) = (m2 / n, m3 / n);
    if m2 == 0.0 {
        0.0
    } else {
        m3 / m2.powf(1.5)
    }
}

/// Kolmogorov-Smirnov distance between the sample and a reference CDF.
pub fn ks_statistic(values: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    let ecdf = empirical_cdf(values)?;
    let n = values.len() as f64;
    Ok(ecdf
        .sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(p: &[f64]) -> DiscreteDistribution {
        DiscreteDistribution::new(p.to_vec(), None).unwrap()
    }

    #[test]
    fn histogram_basic_and_edge_convention() {
        let h = build_histogram(&[0.1, 0.9], 2, 0.0, 1.0).unwrap();
        assert_eq!(h.counts(), &[1, 1]);
        let h = build_histogram(&[0.5], 2, 0.0, 1.0).unwrap();
        assert_eq!(h.counts(), &[0, 1]);
        let h = build_histogram(&[0.25, 0.5, 0.75, 0.1], 4, 0.0, 1.0).unwrap();
        assert_eq!(h.counts(), &[1, 1, 1, 1]);
        // 0.3 sits just below the rounded edge 3 * 0.1
        let h = build_histogram(&[0.3], 10, 0.0, 1.0).unwrap();
        assert_eq!(h.counts()[2], 1);
    }

    #[test]
    fn histogram_clamps_out_of_range() {
        let h = build_histogram(&[-5.0, 1.0, 7.0, 0.2], 4, 0.0, 1.0).unwrap();
        assert_eq!(h.counts(), &[2, 0, 0, 2]);
        assert_eq!(h.total(), 4);
    }

    #[test]
    fn histogram_errors() {
        assert!(build_histogram(&[], 4, 0.0, 1.0).is_err());
        assert!(build_histogram(&[0.5], 0, 0.0, 1.0).is_err());
        assert!(build_histogram(&[0.5], 4, 1.0, 1.0).is_err());
    }

    #[test]
    fn normalize_examples() {
        let h = Histogram::from_parts(vec![0.0, 1.0, 2.0], vec![1, 1]).unwrap();
        assert_eq!(normalize(&h).unwrap().probabilities(), &[0.5, 0.5]);
        let h = Histogram::from_parts(vec![0.0, 1.0, 2.0], vec![3, 1]).unwrap();
        assert_eq!(normalize(&h).unwrap().probabilities(), &[0.75, 0.25]);
        let h = Histogram::from_parts(vec![0.0, 1.0, 2.0], vec![0, 0]).unwrap();
        assert!(normalize(&h).is_err());
    }

    #[test]
    fn kl_examples() {
        let u = dist(&[0.5, 0.5]);
        assert!(kl_divergence(&u, &u).unwrap().abs() < 1e-12);
        let kl = kl_divergence(&dist(&[1.0, 0.0]), &u).unwrap();
        assert!((kl - std::f64::consts::LN_2).abs() < 1e-15);
        // 0.75 ln 1.5 + 0.25 ln 0.5 evaluated by hand: 0.130812035941137
        let kl = kl_divergence(&dist(&[0.75, 0.25]), &u).unwrap();
        assert!((kl - 0.130_812_035_941_137).abs() < 1e-12);
        assert!(kl_divergence(&u, &dist(&[1.0])).is_err());
    }

    #[test]
    fn kl_zero_bin_is_finite() {
        let kl = kl_divergence(&dist(&[0.5, 0.5]), &dist(&[1.0, 0.0])).unwrap();
        assert!(kl.is_finite() && kl > 10.0);
        let p = dist(&[0.5, 0.0, 0.5]);
        assert!(kl_divergence(&p, &p).unwrap().abs() < 1e-15);
    }

    #[test]
    fn chi_square_examples() {
        let h = Histogram::from_parts(vec![0.0, 1.0, 2.0, 3.0], vec![10, 10, 10]).unwrap();
        assert_eq!(chi_square_uniformity(&h).unwrap(), (0.0, 1.0));
        let h = Histogram::from_parts(vec![0.0, 1.0, 2.0], vec![100, 0]).unwrap();
        let (stat, p) = chi_square_uniformity(&h).unwrap();
        assert!((stat - 100.0).abs() < 1e-12);
        assert!(p < 1e-20 && p > 0.0, "p = {p}");
        let h = Histogram::from_parts(vec![0.0, 1.0, 2.0], vec![4, 4]).unwrap();
        assert!(chi_square_uniformity(&h).is_err());
        let h = Histogram::from_parts(vec![0.0, 1.0], vec![40]).unwrap();
        assert!(chi_square_uniformity(&h).is_err());
    }

    #[test]
    fn chi_square_p_value_reference() {
        // scipy.stats.chi2.sf(4, 1)
        let h = Histogram::from_parts(vec![0.0, 1.0, 2.0], vec![60, 40]).unwrap();
        let (stat, p) = chi_square_uniformity(&h).unwrap();
        assert!((stat - 4.0).abs() < 1e-12);
        assert!((p - 0.045_500_263_896_358_57).abs() < 1e-14);
        // scipy.stats.chi2.sf(100, 1)
        let h = Histogram::from_parts(vec![0.0, 1.0, 2.0], vec![100, 0]).unwrap();
        let (_, p) = chi_square_uniformity(&h).unwrap();
        assert!((p / 1.523_970_604_832_099_5e-23 - 1.0).abs() < 1e-10);
    }

    #[test]
    fn ecdf_examples() {
        let f = empirical_cdf(&[3.0, 1.0, 2.0]).unwrap();
        assert!((f.eval(2.0) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(f.eval(0.0), 0.0);
        assert_eq!(f.eval(10.0), 1.0);
        assert_eq!(f.eval(f64::NEG_INFINITY), 0.0);
        assert_eq!(f.eval(f64::INFINITY), 1.0);
        let mid = f.mid_ranks();
        assert!((mid[0] - 0.5 / 3.0).abs() < 1e-15);
        let tied = empirical_cdf(&[1.0, 1.0, 2.0]).unwrap().mid_ranks();
        assert_eq!(tied[0], tied[1]);
        assert!((tied[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!(empirical_cdf(&[]).is_err());
    }

    #[test]
    fn ci_examples() {
        let (m, hw) = confidence_interval_90(&[4.0, 4.0, 4.0]).unwrap();
        assert_eq!((m, hw), (4.0, 0.0));
        let (m, hw) = confidence_interval_90(&[0.0, 2.0]).unwrap();
        assert_eq!(m, 1.0);
        assert!((hw - 1.645).abs() < 1e-12);
        assert!(confidence_interval_90(&[1.0]).is_err());
    }

    #[test]
    fn skewness_sign() {
        assert!(sample_skewness(&[0.0, 0.0, 0.0, 10.0]) > 0.0);
        assert!(sample_skewness(&[0.0, 10.0, 10.0, 10.0]) < 0.0);
        assert_eq!(sample_skewness(&[2.0, 2.0]), 0.0);
    }
}
