mod analyze;
mod induce;
mod limits;
mod spectrum;

use std::f64::consts::PI;

use crate::config::Loaded;
use crate::manifest::{Run, RunManifest};
use crate::RunError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    AnalyzeMap,
    Induce,
    Spectrum,
    Limits,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::AnalyzeMap => "analyze-map",
            Command::Induce => "induce",
            Command::Spectrum => "spectrum",
            Command::Limits => "limits",
        }
    }
}

pub(crate) fn run(command: Command, loaded: &Loaded, threads: usize) -> Result<RunManifest, RunError> {
    let mut run = Run::new(command.name(), &loaded.config.output.dir)?;
    match command {
        Command::AnalyzeMap => analyze::run(loaded, &mut run)?,
        Command::Induce => induce::run(loaded, &mut run)?,
        Command::Spectrum => spectrum::run(loaded, &mut run)?,
        Command::Limits => limits::run(loaded, &mut run)?,
    }
    Ok(run.finish(loaded, threads)?)
}

/// Density and its antiderivative for builtin maps with a known
/// absolutely continuous invariant measure.
type Reference = (fn(f64) -> f64, fn(f64) -> f64);

pub(crate) fn reference_density(builtin: Option<&str>) -> Option<Reference> {
    fn one(_: f64) -> f64 {
        1.0
    }
    fn ident(x: f64) -> f64 {
        x
    }
    fn arcsine(x: f64) -> f64 {
        1.0 / (PI * (x * (1.0 - x)).sqrt())
    }
    fn arcsine_cdf(x: f64) -> f64 {
        2.0 / PI * x.clamp(0.0, 1.0).sqrt().asin()
    }
    match builtin? {
        "doubling" => Some((one, ident)),
        "ulam" => Some((arcsine, arcsine_cdf)),
        _ => None,
    }
}

/// Tolerance of the reference-density check: the doubling grid density is
/// exact, the arcsine law converges like `k^{-1/2}`.
pub(crate) fn reference_tolerance(builtin: Option<&str>) -> f64 {
    match builtin {
        Some("doubling") => 1e-3,
        _ => 0.05,
    }
}
