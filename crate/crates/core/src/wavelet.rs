//! Periodic orthonormal discrete wavelet transform and coefficient-budget
//! reconstruction of binned distributions.

use std::io::Write;

use crate::error::{Error, Result};
use crate::stats::{self, DiscreteDistribution, Histogram};

/// Coiflet-2 scaling filter (12 taps).
const COIF2_LOWPASS: [f64; 12] = [
    0.016_387_336_463_203_64,
    -0.041_464_936_786_871_78,
    -0.067_372_554_723_725_6,
    0.386_110_066_822_762_9,
    0.812_723_635_449_413_5,
    0.417_005_184_423_239_1,
    -0.076_488_599_078_280_76,
    -0.059_434_418_646_431_09,
    0.023_680_171_946_847_77,
    0.005_611_434_819_368_834,
    -0.001_823_208_870_911_032_3,
    -0.000_720_549_445_520_347,
];

const FILTER_TOL: f64 = 1e-8;

/// Orthonormal two-channel filter pair.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletFilter {
    name: String,
    lowpass: Vec<f64>,
    highpass: Vec<f64>,
}

impl WaveletFilter {
    /// Builds the filter pair from a scaling filter; the wavelet filter is
    /// its quadrature mirror `g_k = (-1)^k h_{L-1-k}`.
    pub fn new(name: impl Into<String>, lowpass: Vec<f64>) -> Result<Self> {
        let len = lowpass.len();
        if len < 2 || !len.is_multiple_of(2) {
            return Err(Error::validation(format!("filter length must be even and >= 2, got {len}")));
        }
        let sum: f64 = lowpass.iter().sum();
        let energy: f64 = lowpass.iter().map(|h| h * h).sum();
        if (sum - std::f64::consts::SQRT_2).abs() > FILTER_TOL || (energy - 1.0).abs() > FILTER_TOL {
            return Err(Error::validation(format!(
                "lowpass taps must sum to sqrt(2) and have unit energy (sum {sum}, energy {energy})"
            )));
        }
        let highpass = (0..len)
            .map(|k| if k % 2 == 0 { lowpass[len - 1 - k] } else { -lowpass[len - 1 - k] })
            .collect();
        Ok(WaveletFilter { name: name.into(), lowpass, highpass })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn lowpass(&self) -> &[f64] {
        &self.lowpass
    }

    pub fn highpass(&self) -> &[f64] {
        &self.highpass
    }

    pub fn len(&self) -> usize {
        self.lowpass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lowpass.is_empty()
    }
}

pub fn coiflet2_filter() -> WaveletFilter {
    WaveletFilter::new("coif2", COIF2_LOWPASS.to_vec()).expect("coif2 taps are orthonormal")
}

/// Multi-level wavelet coefficients.
///
/// `details[0]` is the coarsest detail band (decomposition level `levels`)
/// and the last entry is the finest (level 1). Flattened order is
/// approximation first, then details coarse to fine.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSet {
    levels: usize,
    approx: Vec<f64>,
    details: Vec<Vec<f64>>,
    original_length: usize,
}

impl CoefficientSet {
    pub fn new(approx: Vec<f64>, details: Vec<Vec<f64>>, original_length: usize) -> Result<Self> {
        let levels = details.len();
        if levels == 0 {
            return Err(Error::validation("coefficient set needs at least one detail band"));
        }
        check_length(original_length, levels)?;
        let approx_len = original_length >> levels;
        if approx.len() != approx_len {
            return Err(Error::validation(format!(
                "approximation band has {} coefficients, expected {approx_len}",
                approx.len()
            )));
        }
        for (i, band) in details.iter().enumerate() {
            let want = original_length >> (levels - i);
            if band.len() != want {
                return Err(Error::validation(format!(
                    "detail band {} (level {}) has {} coefficients, expected {want}",
                    i,
                    levels - i,
                    band.len()
                )));
            }
        }
        Ok(CoefficientSet { levels, approx, details, original_length })
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn approx(&self) -> &[f64] {
        &self.approx
    }

    pub fn details(&self) -> &[Vec<f64>] {
        &self.details
    }

    /// Detail band of decomposition level `level` (1 = finest).
    pub fn detail_level(&self, level: usize) -> Option<&[f64]> {
        (1..=self.levels).contains(&level).then(|| self.details[self.levels - level].as_slice())
    }

    pub fn original_length(&self) -> usize {
        self.original_length
    }

    pub fn total_count(&self) -> usize {
        self.original_length
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.original_length);
        out.extend_from_slice(&self.approx);
        for band in &self.details {
            out.extend_from_slice(band);
        }
        out
    }

    /// Same shape as `self`, filled from a flattened vector.
    pub fn with_flat(&self, flat: &[f64]) -> Result<CoefficientSet> {
        if flat.len() != self.original_length {
            return Err(Error::validation(format!(
                "flat vector has {} values, expected {}",
                flat.len(),
                self.original_length
            )));
        }
        let (approx, mut rest) = flat.split_at(self.approx.len());
        let details = self
            .details
            .iter()
            .map(|band| {
                let (head, tail) = rest.split_at(band.len());
                rest = tail;
                head.to_vec()
            })
            .collect();
        Ok(CoefficientSet { levels: self.levels, approx: approx.to_vec(), details, original_length: self.original_length })
    }

    pub fn nonzero_count(&self) -> usize {
        self.flatten().iter().filter(|c| **c != 0.0).count()
    }

    pub fn energy(&self) -> f64 {
        self.flatten().iter().map(|c| c * c).sum()
    }

    /// `level,index,value` rows; level -1 is the approximation band.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "level,index,value")?;
        for (i, c) in self.approx.iter().enumerate() {
            writeln!(out, "-1,{i},{c}")?;
        }
        for (b, band) in self.details.iter().enumerate() {
            let level = self.levels - b;
            for (i, c) in band.iter().enumerate() {
                writeln!(out, "{level},{i},{c}")?;
            }
        }
        Ok(())
    }
}

fn check_length(len: usize, levels: usize) -> Result<()> {
    if len < 2 || !len.is_power_of_two() {
        return Err(Error::validation(format!("signal length must be a power of two >= 2, got {len}")));
    }
    if levels == 0 || levels >= usize::BITS as usize || (1usize << levels) > len {
        return Err(Error::validation(format!("cannot take {levels} levels of a length-{len} signal")));
    }
    Ok(())
}

/// Default depth `log2(len) - 2`, leaving four approximation coefficients
/// (at least one level).
pub fn default_levels(len: usize) -> usize {
    (len.trailing_zeros() as usize).saturating_sub(2).max(1)
}

/// Forward transform by the periodized pyramid algorithm.
pub fn dwt(signal: &[f64], filter: &WaveletFilter, levels: usize) -> Result<CoefficientSet> {
    check_length(signal.len(), levels)?;
    if signal.iter().any(|x| !x.is_finite()) {
        return Err(Error::validation("signal contains non-finite samples"));
    }
    let mut approx = signal.to_vec();
    let mut details = Vec::with_capacity(levels);
    for _ in 0..levels {
        let (a, d) = analysis_step(&approx, filter);
        details.push(d);
        approx = a;
    }
    details.reverse();
    CoefficientSet::new(approx, details, signal.len())
}

fn analysis_step(x: &[f64], filter: &WaveletFilter) -> (Vec<f64>, Vec<f64>) {
    let n = x.len();
    let half = n / 2;
    let mut a = vec![0.0; half];
    let mut d = vec![0.0; half];
    for k in 0..half {
        let (mut sa, mut sd) = (0.0, 0.0);
        for (j, (h, g)) in filter.lowpass.iter().zip(&filter.highpass).enumerate() {
            let xv = x[(2 * k + j) % n];
            sa += h * xv;
            sd += g * xv;
        }
        a[k] = sa;
        d[k] = sd;
    }
    (a, d)
}

fn synthesis_step(a: &[f64], d: &[f64], filter: &WaveletFilter) -> Vec<f64> {
    let n = a.len() * 2;
    let mut x = vec![0.0; n];
    for k in 0..a.len() {
        for (j, (h, g)) in filter.lowpass.iter().zip(&filter.highpass).enumerate() {
            x[(2 * k + j) % n] += h * a[k] + g * d[k];
        }
    }
    x
}

/// Inverse transform; exact inverse of [`dwt`] up to rounding.
pub fn idwt(coeffs: &CoefficientSet, filter: &WaveletFilter) -> Result<Vec<f64>> {
    // revalidate: the set may have been assembled by hand
    let coeffs = CoefficientSet::new(coeffs.approx.clone(), coeffs.details.clone(), coeffs.original_length)?;
    let mut approx = coeffs.approx;
    for band in &coeffs.details {
        approx = synthesis_step(&approx, band, filter);
    }
    Ok(approx)
}

/// Keeps the `k` largest-magnitude coefficients and zeroes the rest.
///
/// Equal magnitudes are ranked by flattened position, so coarser bands win
/// ties and, within a band, lower indices do.
pub fn truncate_coefficients(coeffs: &CoefficientSet, k: usize) -> Result<CoefficientSet> {
    let flat = coeffs.flatten();
    if k == 0 || k > flat.len() {
        return Err(Error::validation(format!("coefficient budget {k} outside 1..={}", flat.len())));
    }
    let mut order: Vec<usize> = (0..flat.len()).collect();
    order.sort_by(|&a, &b| flat[b].abs().total_cmp(&flat[a].abs()).then(a.cmp(&b)));
    let mut kept = vec![0.0; flat.len()];
    for &idx in &order[..k] {
        kept[idx] = flat[idx];
    }
    coeffs.with_flat(&kept)
}

/// Normalizes `hist`, reconstructs it from its `k` largest wavelet
/// coefficients and scores the result.
///
/// Negative reconstructed mass is clipped before renormalizing. Returns the
/// reconstruction and `KL(original || reconstruction)`.
pub fn reconstruct_distribution(
    hist: &Histogram,
    k: usize,
    filter: &WaveletFilter,
    levels: usize,
) -> Result<(DiscreteDistribution, f64)> {
    if !hist.bins().is_power_of_two() {
        return Err(Error::validation(format!("histogram has {} bins, need a power of two", hist.bins())));
    }
    let original = stats::normalize(hist)?;
    let coeffs = dwt(original.probabilities(), filter, levels)?;
    let kept = truncate_coefficients(&coeffs, k)?;
    let clipped: Vec<f64> = idwt(&kept, filter)?.into_iter().map(|v| v.max(0.0)).collect();
    let reconstruction = DiscreteDistribution::from_weights(&clipped, Some(hist.edges().to_vec()))
        .map_err(|e| Error::validation(format!("reconstruction with k={k} has no positive mass: {e}")))?;
    let kl = stats::kl_divergence(&original, &reconstruction)?;
    Ok((reconstruction, kl))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn filter_orthonormality_conditions() {
        let f = coiflet2_filter();
        assert_eq!(f.len(), 12);
        let sum: f64 = f.lowpass().iter().sum();
        let energy: f64 = f.lowpass().iter().map(|h| h * h).sum();
        assert!((sum - std::f64::consts::SQRT_2).abs() < 1e-8);
        assert!((energy - 1.0).abs() < 1e-8);
        // even-shift orthogonality
        for shift in (2..12).step_by(2) {
            let dot: f64 = (0..12 - shift).map(|k| f.lowpass()[k] * f.lowpass()[k + shift]).sum();
            assert!(dot.abs() < 1e-9, "shift {shift}: {dot}");
        }
    }

    #[test]
    fn highpass_vanishing_moments() {
        let f = coiflet2_filter();
        for m in 0..4 {
            let moment: f64 = f.highpass().iter().enumerate().map(|(k, g)| (k as f64).powi(m) * g).sum();
            assert!(moment.abs() < 1e-6, "moment {m}: {moment}");
        }
    }

    #[test]
    fn filter_rejects_bad_taps() {
        assert!(WaveletFilter::new("x", vec![1.0, 1.0]).is_err());
        assert!(WaveletFilter::new("x", vec![1.0]).is_err());
        let haar = std::f64::consts::FRAC_1_SQRT_2;
        let f = WaveletFilter::new("haar", vec![haar, haar]).unwrap();
        assert_eq!(f.highpass(), &[haar, -haar]);
    }

    #[test]
    fn constant_signal_has_no_detail() {
        let f = coiflet2_filter();
        let c = dwt(&[3.25; 64], &f, 5).unwrap();
        for band in c.details() {
            assert!(band.iter().all(|d| d.abs() < 1e-10));
        }
    }

    #[test]
    fn zero_signal_and_zero_coefficients() {
        let f = coiflet2_filter();
        let c = dwt(&[0.0; 32], &f, 3).unwrap();
        assert!(c.flatten().iter().all(|v| *v == 0.0));
        assert!(idwt(&c, &f).unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn shapes_and_errors() {
        let f = coiflet2_filter();
        assert!(dwt(&[1.0; 48], &f, 2).is_err());
        assert!(dwt(&[1.0; 8], &f, 4).is_err());
        assert!(dwt(&[1.0; 8], &f, 0).is_err());
        let c = dwt(&[1.0; 16], &f, 4).unwrap();
        assert_eq!(c.approx().len(), 1);
        assert_eq!(c.detail_level(1).unwrap().len(), 8);
        assert_eq!(c.detail_level(4).unwrap().len(), 1);
        assert_eq!(c.flatten().len(), 16);
        assert!(CoefficientSet::new(vec![0.0; 2], vec![vec![0.0; 2]], 8).is_err());
        assert!(CoefficientSet::new(vec![0.0; 3], vec![vec![0.0; 3]], 6).is_err());
    }

    #[test]
    fn truncate_by_magnitude() {
        let c = CoefficientSet::new(vec![3.0], vec![vec![-5.0], vec![1.0, 0.0]], 4).unwrap();
        let t = truncate_coefficients(&c, 1).unwrap();
        assert_eq!(t.flatten(), vec![0.0, -5.0, 0.0, 0.0]);
        assert_eq!(truncate_coefficients(&c, 4).unwrap(), c);
        assert!(truncate_coefficients(&c, 0).is_err());
        assert!(truncate_coefficients(&c, 5).is_err());
    }

    #[test]
    fn truncate_ties_prefer_coarse_then_low_index() {
        let c = CoefficientSet::new(vec![1.0], vec![vec![-1.0], vec![1.0, 1.0]], 4).unwrap();
        assert_eq!(truncate_coefficients(&c, 2).unwrap().flatten(), vec![1.0, -1.0, 0.0, 0.0]);
        assert_eq!(truncate_coefficients(&c, 3).unwrap().flatten(), vec![1.0, -1.0, 1.0, 0.0]);
    }

    #[test]
    fn default_depth() {
        assert_eq!(default_levels(64), 4);
        assert_eq!(default_levels(8), 1);
        assert_eq!(default_levels(4), 1);
    }

    #[test]
    fn reconstruct_requires_power_of_two_bins() {
        let h = Histogram::from_parts(vec![0.0, 1.0, 2.0, 3.0], vec![5, 5, 5]).unwrap();
        assert!(reconstruct_distribution(&h, 1, &coiflet2_filter(), 1).is_err());
    }

    #[test]
    fn coefficient_csv_levels() {
        let c = CoefficientSet::new(vec![3.0], vec![vec![-5.0], vec![1.0, 0.5]], 4).unwrap();
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "level,index,value\n-1,0,3\n2,0,-5\n1,0,1\n1,1,0.5\n");
    }
}
