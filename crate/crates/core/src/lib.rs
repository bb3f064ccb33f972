//! Image analysis with weighted 1-currents.
//!
//! Level-set boundaries of a gray-scale image are represented as polygonal
//! currents carrying curvature densities. Candidate images are scored by
//! curvature regularity functionals and by flat-norm fidelity against the
//! observed image, and the combined energy is minimised by greedy descent.
//! A separate pipeline lifts currents to position-direction space to detect
//! and complete straight lines.

pub mod chain;
pub mod config;
pub mod energy;
pub mod error;
pub mod fidelity;
pub mod flatnorm;
pub mod field;
pub mod io;
pub mod levelset;
pub mod lines;
pub mod optimizer;
pub mod pgm;
pub mod registry;
pub mod report;
pub mod regularity;
pub mod scenes;

pub use error::{Error, Result};
