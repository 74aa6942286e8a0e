//! Simulation toolkit for camera-based optical tactile sensors.
//!
//! The pipeline presses, slides or rotates a rigid indenter into an elastomer
//! pad ([`mpm`]), extracts the deformed surface as a depth map and heightfield
//! mesh ([`surface`]), renders the sensor image ([`render`]) and compares
//! images ([`metrics`]). [`scenario`] drives whole experiment grids.

pub mod geometry;
pub mod mpm;
pub mod surface;
pub mod render;
pub mod metrics;
pub mod scenario;
