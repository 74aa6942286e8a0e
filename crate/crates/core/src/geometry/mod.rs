//! Indenter shapes and particle seeding.

mod sampling;
mod sdf;

use thiserror::Error;

pub use sampling::{elastomer_block, sample_particles, ParticleCloud, Pose};
pub use sdf::{sdf_eval, ShapeKind, ShapeSpec, SHAPE_NAMES};

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("unknown shape `{name}` (known: {known})")]
    UnknownShape { name: String, known: String },
    #[error("invalid shape: {0}")]
    InvalidShape(String),
    #[error("invalid sampling request: {0}")]
    Sampling(String),
}
