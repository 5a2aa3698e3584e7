//! File formats.

pub mod hmap;
pub mod manifest;
pub mod overlay;
pub mod report;
