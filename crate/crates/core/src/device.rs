//! GFET transfer characteristics: drain current against gate voltage at a
//! fixed drain-source bias.
//!
//! Curves come either from characterization CSV files or from a parametric
//! v-shaped stand-in ([`synthesize_characteristic`]). Evaluation between
//! knots is piecewise linear and clamps outside the measured gate range, so a
//! curve with positive currents can never produce a non-positive current.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum number of knots in a transfer curve.
pub const MIN_CURVE_POINTS: usize = 4;

/// Header of the characterization CSV format.
pub const CHARACTERIZATION_HEADER: [&str; 5] = ["v_gs", "i_ds", "v_ds", "branch", "unit_i"];

/// Direction of the gate sweep a curve was measured on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub enum SweepBranch {
    #[default]
    #[serde(rename = "F", alias = "Forward", alias = "forward")]
    Forward,
    #[serde(rename = "R", alias = "Reverse", alias = "reverse")]
    Reverse,
}

impl SweepBranch {
    pub fn code(self) -> &'static str {
        match self {
            SweepBranch::Forward => "F",
            SweepBranch::Reverse => "R",
        }
    }
}

impl fmt::Display for SweepBranch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for SweepBranch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "F" | "f" | "Forward" | "forward" => Ok(SweepBranch::Forward),
            "R" | "r" | "Reverse" | "reverse" => Ok(SweepBranch::Reverse),
            other => Err(Error::validation(format!("unknown sweep branch {other:?} (expected F or R)"))),
        }
    }
}

/// Unit of the `i_ds` column in a characterization file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum CurrentUnit {
    Ampere,
    MicroAmpere,
}

impl CurrentUnit {
    fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "A" => Some(CurrentUnit::Ampere),
            "uA" | "µA" | "μA" => Some(CurrentUnit::MicroAmpere),
            _ => None,
        }
    }

    fn to_amperes(self, value: f64) -> f64 {
        match self {
            CurrentUnit::Ampere => value,
            CurrentUnit::MicroAmpere => value * 1e-6,
        }
    }
}

/// Drain current as a function of gate voltage at one drain-source bias.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferCurve {
    v_ds_bias: f64,
    branch: SweepBranch,
    v_gs: Vec<f64>,
    i_ds: Vec<f64>,
}

impl TransferCurve {
    /// Builds a curve from `(v_gs, i_ds)` knots, which must already be
    /// strictly increasing in `v_gs`.
    pub fn new(v_ds_bias: f64, branch: SweepBranch, points: &[(f64, f64)]) -> Result<Self> {
        if !(v_ds_bias.is_finite() && v_ds_bias > 0.0) {
            return Err(Error::validation(format!("v_ds bias must be finite and > 0, got {v_ds_bias}")));
        }
        if points.len() < MIN_CURVE_POINTS {
            return Err(Error::validation(format!(
                "curve at v_ds={v_ds_bias} ({branch}) has {} points, need at least {MIN_CURVE_POINTS}",
                points.len()
            )));
        }
        for (idx, &(v, i)) in points.iter().enumerate() {
            if !v.is_finite() || !i.is_finite() {
                return Err(Error::validation(format!("non-finite point #{idx} ({v}, {i})")));
            }
            if i <= 0.0 {
                return Err(Error::validation(format!("drain current must be > 0, point #{idx} has {i}")));
            }
        }
        if let Some(w) = points.windows(2).position(|w| w[1].0 <= w[0].0) {
            return Err(Error::validation(format!(
                "gate voltages must be strictly increasing (points #{w} and #{})",
                w + 1
            )));
        }
        Ok(TransferCurve {
            v_ds_bias,
            branch,
            v_gs: points.iter().map(|p| p.0).collect(),
            i_ds: points.iter().map(|p| p.1).collect(),
        })
    }

    pub fn v_ds_bias(&self) -> f64 {
        self.v_ds_bias
    }

    pub fn branch(&self) -> SweepBranch {
        self.branch
    }

    pub fn len(&self) -> usize {
        self.v_gs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v_gs.is_empty()
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = (f64, f64)> + '_ {
        self.v_gs.iter().copied().zip(self.i_ds.iter().copied())
    }

    pub fn gate_range(&self) -> (f64, f64) {
        (self.v_gs[0], self.v_gs[self.v_gs.len() - 1])
    }

    pub fn current_range(&self) -> (f64, f64) {
        self.i_ds
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| (lo.min(i), hi.max(i)))
    }

    /// Knot with the lowest drain current: the Dirac-point estimate.
    pub fn dirac_point(&self) -> (f64, f64) {
        let idx = self
            .i_ds
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(idx, _)| idx)
            .unwrap_or(0);
        (self.v_gs[idx], self.i_ds[idx])
    }

    /// Largest absolute segment slope (A/V), the Lipschitz constant of
    /// [`TransferCurve::current_at`].
    pub fn max_slope(&self) -> f64 {
        self.v_gs
            .windows(2)
            .zip(self.i_ds.windows(2))
            .map(|(v, i)| ((i[1] - i[0]) / (v[1] - v[0])).abs())
            .fold(0.0, f64::max)
    }

    /// Piecewise-linear drain current at `v_gs`, clamped to the endpoint
    /// currents outside the tabulated gate range.
    pub fn current_at(&self, v_gs: f64) -> f64 {
        let last = self.v_gs.len() - 1;
        if v_gs <= self.v_gs[0] {
            return self.i_ds[0];
        }
        if v_gs >= self.v_gs[last] {
            return self.i_ds[last];
        }
        // first knot strictly greater than v_gs; in 1..=last here
        let hi = self.v_gs.partition_point(|&v| v <= v_gs);
        let lo = hi - 1;
        let t = (v_gs - self.v_gs[lo]) / (self.v_gs[hi] - self.v_gs[lo]);
        self.i_ds[lo] + t * (self.i_ds[hi] - self.i_ds[lo])
    }

    /// Re-tabulates the curve on a new gate grid.
    pub fn resample(&self, grid: &[f64]) -> Result<TransferCurve> {
        let points: Vec<_> = grid.iter().map(|&v| (v, self.current_at(v))).collect();
        TransferCurve::new(self.v_ds_bias, self.branch, &points)
    }
}

/// Evaluates a transfer curve; see [`TransferCurve::current_at`].
pub fn interpolate_current(curve: &TransferCurve, v_gs: f64) -> f64 {
    curve.current_at(v_gs)
}

/// Lookup key of a curve inside a [`CharacteristicLibrary`].
///
/// Biases are keyed at microvolt resolution so that `0.8` read from a CSV
/// file and `0.8` written in a chain config land on the same entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CurveKey {
    bias_uv: i64,
    pub branch: SweepBranch,
}

impl CurveKey {
    pub fn new(v_ds_bias: f64, branch: SweepBranch) -> Self {
        CurveKey { bias_uv: (v_ds_bias * 1e6).round() as i64, branch }
    }

    pub fn v_ds_bias(&self) -> f64 {
        self.bias_uv as f64 * 1e-6
    }
}

impl fmt::Display for CurveKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v_ds={} V/{}", self.v_ds_bias(), self.branch)
    }
}

/// Set of transfer curves indexed by drain-source bias and sweep branch.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CharacteristicLibrary {
    curves: BTreeMap<CurveKey, TransferCurve>,
}

impl CharacteristicLibrary {
    pub fn new(curves: impl IntoIterator<Item = TransferCurve>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for curve in curves {
            let key = CurveKey::new(curve.v_ds_bias(), curve.branch());
            match map.entry(key) {
                Entry::Occupied(_) => return Err(Error::validation(format!("duplicate curve for {key}"))),
                Entry::Vacant(slot) => {
                    slot.insert(curve);
                }
            }
        }
        if map.is_empty() {
            return Err(Error::validation("characteristic library has no curves"));
        }
        Ok(CharacteristicLibrary { curves: map })
    }

    pub fn len(&self) -> usize {
        self.curves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.curves.is_empty()
    }

    pub fn get(&self, v_ds_bias: f64, branch: SweepBranch) -> Option<&TransferCurve> {
        self.curves.get(&CurveKey::new(v_ds_bias, branch))
    }

    pub fn curves(&self) -> impl Iterator<Item = &TransferCurve> {
        self.curves.values()
    }

    pub fn keys(&self) -> impl Iterator<Item = CurveKey> + '_ {
        self.curves.keys().copied()
    }

    /// Parses the characterization CSV format (`v_gs,i_ds,v_ds,branch,unit_i`).
    ///
    /// Rows are grouped by `(v_ds, branch)` and sorted by gate voltage;
    /// repeated gate voltages within a group are averaged.
    pub fn load_csv<R: Read>(source: R) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .has_headers(true)
            .from_reader(source);

        let headers = reader.headers().map_err(|e| csv_error(&e, 1))?.clone();
        if headers.len() != CHARACTERIZATION_HEADER.len()
            || headers.iter().zip(CHARACTERIZATION_HEADER).any(|(got, want)| got != want)
        {
            let line = headers.position().map_or(1, |p| p.line());
            return Err(Error::Parse {
                line,
                message: format!(
                    "expected header `{}`, found `{}`",
                    CHARACTERIZATION_HEADER.join(","),
                    headers.iter().collect::<Vec<_>>().join(",")
                ),
            });
        }

        // (v_gs, i_ds, count) per group, merged after sorting
        let mut groups: BTreeMap<CurveKey, (f64, Vec<(f64, f64)>)> = BTreeMap::new();
        let mut record = csv::StringRecord::new();
        loop {
            match reader.read_record(&mut record) {
                Ok(false) => break,
                Ok(true) => {}
                Err(e) => return Err(csv_error(&e, 0)),
            }
            let line = record.position().map_or(0, |p| p.line());
            let row = parse_row(&record, line)?;
            let key = CurveKey::new(row.v_ds, row.branch);
            groups.entry(key).or_insert_with(|| (row.v_ds, Vec::new())).1.push((row.v_gs, row.i_ds));
        }

        let mut curves = Vec::with_capacity(groups.len());
        for (key, (v_ds, mut rows)) in groups {
            rows.sort_by(|a, b| a.0.total_cmp(&b.0));
            let points = average_duplicates(&rows);
            let curve = TransferCurve::new(v_ds, key.branch, &points)
                .map_err(|e| Error::validation(format!("group {key}: {e}")))?;
            curves.push(curve);
        }
        CharacteristicLibrary::new(curves)
    }

    /// Writes the library in the characterization CSV format, currents in
    /// amperes with 9 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{}", CHARACTERIZATION_HEADER.join(","))?;
        for curve in self.curves() {
            for (v, i) in curve.points() {
                writeln!(out, "{v:.8e},{i:.8e},{},{},A", curve.v_ds_bias(), curve.branch())?;
            }
        }
        Ok(())
    }
}

struct Row {
    v_gs: f64,
    i_ds: f64,
    v_ds: f64,
    branch: SweepBranch,
}

fn parse_row(record: &csv::StringRecord, line: u64) -> Result<Row> {
    if record.len() != CHARACTERIZATION_HEADER.len() {
        return Err(Error::Parse {
            line,
            message: format!("expected {} fields, found {}", CHARACTERIZATION_HEADER.len(), record.len()),
        });
    }
    let number = |idx: usize| -> Result<f64> {
        record[idx].parse::<f64>().map_err(|_| Error::Parse {
            line,
            message: format!("field `{}` is not a number: {:?}", CHARACTERIZATION_HEADER[idx], &record[idx]),
        })
    };
    let v_gs = number(0)?;
    let i_raw = number(1)?;
    let v_ds = number(2)?;
    let branch = record[3].parse::<SweepBranch>().map_err(|e| Error::Parse { line, message: e.to_string() })?;
    let unit = CurrentUnit::parse(&record[4]).ok_or_else(|| Error::Parse {
        line,
        message: format!("unit_i must be A or uA, found {:?}", &record[4]),
    })?;

    let i_ds = unit.to_amperes(i_raw);
    for (name, value) in [("v_gs", v_gs), ("i_ds", i_ds), ("v_ds", v_ds)] {
        if !value.is_finite() {
            return Err(Error::validation(format!("line {line}: {name} is not finite ({value})")));
        }
    }
    if i_ds <= 0.0 {
        return Err(Error::validation(format!("line {line}: i_ds must be > 0, found {i_ds}")));
    }
    if v_ds <= 0.0 {
        return Err(Error::validation(format!("line {line}: v_ds must be > 0, found {v_ds}")));
    }
    Ok(Row { v_gs, i_ds, v_ds, branch })
}

fn csv_error(err: &csv::Error, fallback_line: u64) -> Error {
    let line = err.position().map_or(fallback_line, |p| p.line());
    Error::Parse { line, message: err.to_string() }
}

/// Collapses runs of equal gate voltage in sorted rows into their mean current.
fn average_duplicates(sorted: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(sorted.len());
    let mut start = 0;
    while start < sorted.len() {
        let v = sorted[start].0;
        let end = start + sorted[start..].iter().take_while(|p| p.0 == v).count();
        let sum: f64 = sorted[start..end].iter().map(|p| p.1).sum();
        out.push((v, sum / (end - start) as f64));
        start = end;
    }
    out
}

/// Parameters of the v-shaped synthetic GFET transfer curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticGfetParams {
    /// Gate voltage of minimum conduction (V).
    pub v_dirac: f64,
    /// Drain current at the Dirac point for zero bias scaling (A).
    pub i_min: f64,
    /// Hole-branch transconductance, gate below the Dirac point (A/V).
    pub transconductance_p: f64,
    /// Electron-branch transconductance, gate above the Dirac point (A/V).
    pub transconductance_n: f64,
    /// Current scaling per volt of drain-source bias (1/V).
    pub bias_depth_scale: f64,
}

impl Default for SyntheticGfetParams {
    /// An n-doped device: Dirac point left of 0 V, tens of microamperes.
    fn default() -> Self {
        SyntheticGfetParams {
            v_dirac: -1.0,
            i_min: 50e-6,
            transconductance_p: 30e-6,
            transconductance_n: 40e-6,
            bias_depth_scale: 1.0,
        }
    }
}

impl SyntheticGfetParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.v_dirac, self.i_min, self.transconductance_p, self.transconductance_n, self.bias_depth_scale]
            .iter()
            .all(|x| x.is_finite());
        if !finite {
            return Err(Error::validation("synthetic GFET parameters must be finite"));
        }
        if self.i_min <= 0.0 {
            return Err(Error::validation(format!("i_min must be > 0, got {}", self.i_min)));
        }
        if self.transconductance_p <= 0.0 || self.transconductance_n <= 0.0 {
            return Err(Error::validation("transconductances must be > 0"));
        }
        if self.bias_depth_scale < 0.0 {
            return Err(Error::validation("bias_depth_scale must be >= 0"));
        }
        Ok(())
    }

    /// Closed-form drain current at `v_gs` for drain-source bias `v_ds_bias`.
    pub fn current(&self, v_ds_bias: f64, v_gs: f64) -> f64 {
        let g = if v_gs < self.v_dirac { self.transconductance_p } else { self.transconductance_n };
        let dv = v_gs - self.v_dirac;
        (self.i_min * self.i_min + g * g * dv * dv).sqrt() * (1.0 + self.bias_depth_scale * v_ds_bias)
    }
}

/// Tabulates the synthetic v-shaped characteristic on `v_gs_grid`.
pub fn synthesize_characteristic(
    params: &SyntheticGfetParams,
    v_ds_bias: f64,
    v_gs_grid: &[f64],
) -> Result<TransferCurve> {
    params.validate()?;
    let points: Vec<_> = v_gs_grid.iter().map(|&v| (v, params.current(v_ds_bias, v))).collect();
    TransferCurve::new(v_ds_bias, SweepBranch::Forward, &points)
}

/// Forward-branch synthetic curves for each bias on a shared gate grid.
pub fn synthetic_library(
    params: &SyntheticGfetParams,
    biases: &[f64],
    v_gs_grid: &[f64],
) -> Result<CharacteristicLibrary> {
    let curves = biases
        .iter()
        .map(|&b| synthesize_characteristic(params, b, v_gs_grid))
        .collect::<Result<Vec<_>>>()?;
    CharacteristicLibrary::new(curves)
}

/// The gate sweep used for characterization: -10 V to +10 V in 0.1 V steps.
pub fn default_gate_grid() -> Vec<f64> {
    linear_grid(-10.0, 10.0, 201)
}

/// `count` evenly spaced points from `lo` to `hi` inclusive.
pub fn linear_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let step = (hi - lo) / (count - 1) as f64;
            (0..count).map(|k| if k == count - 1 { hi } else { lo + k as f64 * step }).collect()
        }
    }
}
