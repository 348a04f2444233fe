//! k shortest non-homotopic paths on 2D occupancy grids.

pub mod bench;
pub mod expansion;
pub mod fixtures;
pub mod geometry;
pub mod gridmap;
pub mod mapgen;
pub mod oracle;
pub mod pruning;
pub mod record;
pub mod search;
pub mod svg;
pub mod tree;

pub use geometry::{OctileLength, Point2, Scalar};
pub use gridmap::{Cell, GridMap, MapError, MapFormat, RayHit};

/// Point in world coordinates (meters).
pub type Point = Point2<f64>;
