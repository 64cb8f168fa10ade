//! Simulation of a graphene-FET programmable random variate accelerator.
//!
//! * [`device`]: transfer curves, characterization CSV, synthetic v-shaped devices
//! * [`circuit`]: cascaded GFET/resistor stages driven by uniform gate noise
//! * [`stats`]: histograms, KL divergence, chi-square, empirical CDF, confidence intervals
//! * [`wavelet`]: Coiflet-2 DWT/IDWT and coefficient-budget reconstruction
//! * [`mc`]: sorted-sample trapezoid Monte Carlo integration and its timing harness

pub mod circuit;
pub mod device;
pub mod error;
pub mod mc;
pub mod rng;
pub mod stats;
pub mod wavelet;

pub use error::{Error, Result};
