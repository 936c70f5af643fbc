//! Desk-scale laboratory for nonuniformly expanding interval maps.
//!
//! The crate is organised along the analysis pipeline:
//!
//! * [`map_model`]: piecewise smooth maps of `[0,1]` with one-sided critical
//!   and singular points, observables and the basic expansion diagnostics;
//! * [`critical_orbits`]: log-space derivative growth and recurrence along
//!   critical orbits together with the summability diagnostics built on them;
//! * [`inducing`]: the inducing scheme (free flight, binding periods, return
//!   times) and the per-cell quantities of the induced map `F = f^τ`;
//! * [`transfer`]: Ulam discretisations of the transfer operators of `f` and
//!   `F`, invariant densities, spectral gaps, renewal families and the
//!   coboundary (Gordin) decomposition;
//! * [`stats`]: Monte Carlo and operator-based estimators for the central
//!   limit theorem, its functional version, decay of correlations and large
//!   deviations.

// `!(x > 0.0)` style guards are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod critical_orbits;
pub mod error;
pub mod inducing;
pub mod map_model;
pub mod numeric;
pub mod output;
pub mod par;
pub mod stats;
pub mod transfer;

pub use error::{Error, Result};
pub use map_model::{builtin_map, Branch, Formula, Observable, OneSidedCriticalPoint, PiecewiseMap, Side};
