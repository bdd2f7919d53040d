//! Multi-tank material balance analysis of compartmentalized reservoirs.
//!
//! The crate covers the full workflow from raw well data to probabilistic
//! forecasts:
//!
//! - [`cluster`] — spatio-temporal well clustering (k-prototypes on mixed
//!   static attributes, DTW k-medoids on production signals) and SVM-based
//!   zone delineation in the physical plane.
//! - [`pvt`], [`relperm`], [`reservoir`] — fluid property tables, relative
//!   permeability curves, and the compartment network model.
//! - [`aquifer`] — Fetkovich aquifer influx in recursive and closed form.
//! - [`history`] — Newton solution of the coupled per-block pressure system
//!   over the historical schedule, with non-local inter-block flux terms.
//! - [`forecast`] — predictive mode: pressure plus cumulative oil/gas/water
//!   production per block under bottomhole-pressure constraints.
//! - [`history_match`] — ES-rLM ensemble calibration of global parameters
//!   (OOIP, transmissibilities, aquifer size/strength) against observed
//!   block pressures.
//! - [`io`], [`synthetic`], [`cli`] — file formats, synthetic case
//!   generation, and the command-line front end.
//!
//! Numeric kernels (interpolation, aquifer closures, DTW) are generic over
//! the scalar type; the aliases below fix `f64` for the solver stack.

pub mod aquifer;
pub mod cli;
pub mod cluster;
pub mod error;
pub mod forecast;
pub mod history;
pub mod history_match;
pub mod interp;
pub mod io;
pub mod pvt;
pub mod relperm;
pub mod reservoir;
pub mod synthetic;

pub use error::Error;

/// Pressure-indexed fluid property table at solver precision.
pub type PvtTable = pvt::PvtTable<f64>;
/// Relative permeability curves at solver precision.
pub type RelPermCurves = relperm::RelPermCurves<f64>;
/// Fetkovich aquifer parameters at solver precision.
pub type AquiferParams = aquifer::AquiferParams<f64>;

/// Hydrostatic gradient constant: psi per (lbm/ft^3 * ft).
pub const PSI_PER_LBMFT3_FT: f64 = 1.0 / 144.0;

/// Field-unit Darcy constant turning mD*ft * psi / cP into RB/day.
/// A calibration constant, not a physical result.
pub const DEFAULT_FLUX_UNIT_CONSTANT: f64 = 6.3266e-3;
