use std::path::PathBuf;

use gfet_prva::device::{default_gate_grid, linear_grid, synthetic_library, CharacteristicLibrary, SyntheticGfetParams};
use serde::Serialize;

use super::{core_write, load_library};
use crate::config::CharacterizeSection;
use crate::error::{CliError, CliResult};
use crate::manifest::ArtifactDir;
use crate::svg::{Plot, Series};
use crate::Globals;

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Characterization CSV (v_gs,i_ds,v_ds,branch,unit_i)
    #[arg(long)]
    input: Option<PathBuf>,
    /// Build the library from the synthetic ambipolar model instead
    #[arg(long)]
    synthetic: bool,
    /// Drain-source biases for the synthetic library, comma separated
    #[arg(long, value_delimiter = ',')]
    biases: Option<Vec<f64>>,
    /// Also write every curve resampled onto this many evenly spaced gate voltages
    #[arg(long)]
    resample_points: Option<usize>,
}

#[derive(Debug, Serialize)]
struct Settings {
    input: Option<PathBuf>,
    synthetic: Option<SyntheticGfetParams>,
    biases: Vec<f64>,
    resample_points: Option<usize>,
}

fn settings(section: CharacterizeSection, args: Args) -> CliResult<Settings> {
    let synthetic = args.synthetic || section.synthetic.unwrap_or(false);
    let input = args.input.or(if synthetic { None } else { section.input });
    if synthetic && input.is_some() {
        return Err(CliError::Usage("give either --input or --synthetic, not both".into()));
    }
    if !synthetic && input.is_none() {
        return Err(CliError::Usage("characterize needs --input <csv> or --synthetic".into()));
    }
    Ok(Settings {
        input,
        synthetic: synthetic.then(|| section.params.unwrap_or_default()),
        biases: args.biases.or(section.biases).unwrap_or_else(|| vec![0.8, 1.0]),
        resample_points: args.resample_points.or(section.resample_points),
    })
}

pub fn run(globals: &Globals, section: CharacterizeSection, args: Args) -> CliResult<()> {
    let s = settings(section, args)?;
    let library = match (&s.input, &s.synthetic) {
        (Some(path), _) => load_library(path)?,
        (None, Some(params)) => synthetic_library(params, &s.biases, &default_gate_grid())?,
        (None, None) => unreachable!("settings requires a source"),
    };
    let resampled = match s.resample_points {
        Some(points) => Some(resample(&library, points)?),
        None => None,
    };

    let mut out = ArtifactDir::create(&globals.out)?;
    println!("{} curves", library.len());
    let mut summary = String::from("v_ds,branch,points,v_gs_min,v_gs_max,i_ds_min,i_ds_max,dirac_v_gs,dirac_i_ds\n");
    for c in library.curves() {
        let (v_lo, v_hi) = c.gate_range();
        let (i_lo, i_hi) = c.current_range();
        let (dv, di) = c.dirac_point();
        summary.push_str(&format!(
            "{},{},{},{v_lo},{v_hi},{i_lo:e},{i_hi:e},{dv},{di:e}\n",
            c.v_ds_bias(),
            c.branch(),
            c.len()
        ));
        println!(
            "  v_ds={} V {}: {} points, v_gs [{v_lo}, {v_hi}] V, Dirac point {dv} V at {di:.4e} A",
            c.v_ds_bias(),
            c.branch(),
            c.len()
        );
    }
    out.write_text("summary.csv", &summary)?;
    out.write("library.csv", core_write(|w| library.write_csv(w)))?;
    if let Some(r) = &resampled {
        out.write("resampled.csv", core_write(|w| r.write_csv(w)))?;
    }
    if globals.svg {
        let mut plot = Plot::new("Transfer characteristics", "V_GS (V)", "I_DS (A)");
        for c in library.curves() {
            plot = plot.with_series(Series::new(format!("V_DS={} V {}", c.v_ds_bias(), c.branch()), c.points().collect()));
        }
        out.write_text("curves.svg", &plot.render())?;
    }
    out.finish("characterize", globals.seed, &s)?;
    Ok(())
}

fn resample(library: &CharacteristicLibrary, points: usize) -> CliResult<CharacteristicLibrary> {
    if points < gfet_prva::device::MIN_CURVE_POINTS {
        return Err(CliError::Usage(format!(
            "--resample-points must be at least {}, got {points}",
            gfet_prva::device::MIN_CURVE_POINTS
        )));
    }
    let curves = library
        .curves()
        .map(|c| {
            let (lo, hi) = c.gate_range();
            c.resample(&linear_grid(lo, hi, points))
        })
        .collect::<gfet_prva::Result<Vec<_>>>()?;
    Ok(CharacteristicLibrary::new(curves)?)
}
