//! Currents extracted from images: level-set contours, their curvature, and jump sets.

pub mod contours;
pub mod curvature;
pub mod jumps;

pub use contours::{default_levels, extract_level_sets, LevelSetFamily, MAX_LEVELS};
pub use curvature::{curvature_density, curvature_density_with, Atom, CurvatureCurrent};
pub use jumps::{extract_jump_set, introduce_discontinuity, CutParams, CutResult, JumpParams, JumpSet};
