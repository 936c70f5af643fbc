//! Monte Carlo and operator estimators for the limit laws of Birkhoff sums:
//! CLT and its functional version, decay of correlations and large
//! deviations.
//!
//! Every estimator is a fixed function of the ensemble seed. Orbits draw
//! from their own counter-selected stream and reductions run in orbit order,
//! so the thread count never changes a result.

mod clt;
mod decay;
mod deviation;
mod ensemble;

pub use clt::{
    batch_means_variance, batch_variance, birkhoff_samples, clt_test, covariance_matrix, fclt_paths,
    green_kubo_operator, green_kubo_sigma, BirkhoffSamples, Centering, CltReport, CovarianceReport, EstimateMethod,
    FcltReport, GreenKubo, PathStats, DEGENERATE_SIGMA2,
};
pub use decay::{
    cell_averages, correlation_mc, correlation_operator, correlation_with, decay_fit, envelope, envelope_check,
    DecayFit, DecayKind, DecayReport, EnvelopeCheck, MIN_FIT_POINTS,
};
pub use deviation::{large_deviation, large_deviations, tail_exponent, LdReport};
pub use ensemble::{InitialLaw, Orbit, OrbitEnsemble, Sampler};

#[cfg(test)]
mod tests;
