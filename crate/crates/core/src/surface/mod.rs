//! Depth maps and heightfield meshes of the deformed elastomer surface.

mod depth;
mod extract;
mod mesh;

use thiserror::Error;

pub use depth::{perturb_depth, DepthMap, DEPTH_MAGIC};
pub use extract::{extract_surface_depth, RasterSpec};
pub use mesh::{depth_to_mesh, HeightfieldMesh};

#[derive(Debug, Error)]
pub enum SurfaceError {
    #[error("surface extraction failed: {0}")]
    Extraction(String),
    #[error("{0}")]
    Invalid(String),
    #[error("malformed depth file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
