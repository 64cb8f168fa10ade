pub mod characterize;
pub mod mcbench;
pub mod simulate;
pub mod wavelet;

use std::fs::File;
use std::path::Path;

use gfet_prva::device::CharacteristicLibrary;

use crate::error::{CliError, CliResult};

pub fn load_library(path: &Path) -> CliResult<CharacteristicLibrary> {
    let file = File::open(path).map_err(|e| CliError::io(format!("opening {}", path.display()), e))?;
    CharacteristicLibrary::load_csv(file).map_err(|e| match e {
        gfet_prva::Error::Io(io) => CliError::io(format!("reading {}", path.display()), io),
        other => CliError::Usage(format!("{}: {other}", path.display())),
    })
}

pub fn min_max(values: &[f64]) -> (f64, f64) {
    values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

/// Adapts a core writer to an artifact fill closure.
pub fn core_write<F>(fill: F) -> impl FnOnce(&mut dyn std::io::Write) -> CliResult<()>
where
    F: FnOnce(&mut dyn std::io::Write) -> gfet_prva::Result<()>,
{
    move |out| fill(out).map_err(CliError::from)
}
