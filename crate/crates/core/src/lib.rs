//! Forensic statistics for registered sequential trials.
//!
//! The crate turns reported p-values into censored z-scores, tests their
//! density for discontinuities at significance thresholds, links phase II
//! trials to their phase III follow-ups, fits a continuation (selection)
//! function and decomposes the phase II / phase III gap in significant
//! results into a selective-continuation part and an unexplained residual.
//! A structural simulator with known ground truth drives the validation.
//!
//! Interchangeable algorithms (bandwidth selectors, discontinuity tests,
//! continuation draws, misreporting mechanisms) sit behind traits and are
//! looked up by name through [`strategy::StrategyRegistry`].

pub mod decompose;
pub mod density;
pub mod discontinuity;
pub mod error;
pub mod linker;
pub mod pipeline;
pub mod pz;
pub mod registry;
pub mod rng;
pub mod sample;
pub mod selection;
pub mod simulate;
pub mod strategy;

pub use error::{Error, Result};
