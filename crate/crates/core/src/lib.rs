//! Reconstruction of missing Doppler velocity log (DVL) beams.
//!
//! A four-beam Janus DVL needs three beams for a velocity fix. When two
//! beams drop out, the missing along-beam velocities are estimated from the
//! last `N` complete epochs and the current available beams, and the full
//! velocity is recovered by least squares. Three strategies are provided:
//! the moving average of the past window, a 1-D CNN regressor
//! ([`estimators::StrategyTag::LiBeamsNet`]) and an LSTM regressor
//! ([`estimators::StrategyTag::MissBeamNet`]).
//!
//! ```
//! use dvl_beams::geometry::{project_to_beams, solve_velocity, BeamGeometry, DvlVelocity};
//!
//! let geom = BeamGeometry::from_degrees(20.0).unwrap();
//! let v = DvlVelocity::new(1.0, -0.2, 0.05);
//! let beams = project_to_beams(&geom, &v);
//! let back = solve_velocity(&geom, &beams.0, &[true, true, true, false]).unwrap();
//! assert!((back.0[0] - 1.0).abs() < 1e-12);
//! ```
//!
//! The networks are built on the small batched f64 toolkit in [`nn`];
//! experiments are driven by [`config::ExperimentConfig`] through
//! [`experiment`] or the `dvl-beams` binary.

pub mod cli;
pub mod config;
pub mod dataset;
pub mod error_model;
pub mod estimators;
pub mod experiment;
pub mod geometry;
pub mod metrics;
pub mod nn;
pub mod seeds;
