//! Elastomer deformation solver: APIC transfers with a quadratic B-spline
//! kernel, fixed-corotated elasticity, sticky domain boundaries, a kinematic
//! indenter and the relative-rest iteration.

mod config;
pub mod constitutive;
mod grid;
pub mod kernel;
mod particle;
pub mod snapshot;
pub mod solver;
pub mod transfer;

use thiserror::Error;

pub use config::SimConfig;
pub use constitutive::{corotated_stress, MaterialParams};
pub use grid::{Grid, GridNode};
pub use kernel::{kernel_weight, Stencil};
pub use particle::{Body, Particle};
pub use solver::{
    measure_progress, relative_rest_loop, ObjectMotion, Progress, RestMonitor, RestOutcome,
    SimState,
};
pub use transfer::{
    advect_particles, apply_grid_boundaries, compute_grid_velocity, grid_to_particle,
    particle_to_grid,
};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid solver configuration: {0}")]
    Config(String),
    #[error("simulation fault at particle {particle}: {reason}")]
    Fault { particle: usize, reason: String },
    #[error("particle {particle} left the domain at {position:?}")]
    OutOfDomain { particle: usize, position: [f64; 3] },
    #[error("object probe is at rest under a non-zero commanded motion")]
    DegenerateProbe,
    #[error("malformed snapshot: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
