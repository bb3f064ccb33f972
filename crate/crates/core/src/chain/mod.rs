//! Discrete currents: polylines, segment tuples, and chains on a triangulated domain.

pub mod complex;
pub mod polyline;
pub mod raster;

pub use complex::{Chain, GridPattern, SimplicialComplex2};
pub use polyline::{
    regular_polygon, tuples_from_csv, tuples_to_csv, Point, Polyline, PolylineCurrent, SegmentTuple,
};
pub use raster::rasterize_to_chain;
