//! Geometry, labels and plane prescription for automatic cardiac MR view
//! planning from localizer intersections.

pub mod geom;
pub mod heatmap;
pub mod io;
pub mod metrics;
pub mod phantom;
pub mod prescribe;
pub mod workflow;
