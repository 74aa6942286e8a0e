//! Experiment configuration, trajectory grids and the end-to-end pipeline:
//! simulate, extract depth, mesh, render, and persist with a manifest.

mod compare;
mod config;
mod driver;
mod pipeline;
mod trajectory;
mod world;

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::geometry::GeometryError;
use crate::metrics::MetricsError;
use crate::mpm::SimError;
use crate::render::RenderError;
use crate::surface::SurfaceError;

pub use compare::{compare_command, CompareOutcome};
pub use config::{
    parse_scenario, parse_scenario_str, CaptureConfig, ElastomerConfig, IndenterConfig, ScenarioConfig,
    SensorConfig, SimSection, SCENARIO_PRESETS,
};
pub use driver::{Driver, PhaseReport, StepEvent};
pub use pipeline::{
    base_texture, config_hash, procedural_texture, render_depth, run_pipeline, run_pipeline_with,
    CaptureRecord, Manifest, ManifestFile, PipelineOptions, PipelineOutput,
};
pub use trajectory::{
    parse_shape_label, press_shape_set, scale_shape, trajectory_expand, PhaseKind, Run, TrajectoryPhase,
    TrajectorySpec, DEFAULT_PRESS_SPEED, DEFAULT_SLIDE_SPEED, DEFAULT_SPIN_SPEED,
};
pub use world::World;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid `{field}`: {message}")]
    Invalid { field: String, message: String },
    #[error("simulation fault in {context}: {source}{}", snapshot.as_ref().map(|p| format!(" (last good state saved to {})", p.display())).unwrap_or_default())]
    Fault {
        context: String,
        source: SimError,
        snapshot: Option<PathBuf>,
    },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Surface(#[from] SurfaceError),
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

impl ScenarioError {
    pub fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Invalid {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Process exit status: 1 for invalid input, 2 for a solver fault,
    /// 3 for a file system error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Fault { .. } => 2,
            Self::Io { .. }
            | Self::Surface(SurfaceError::Io(_))
            | Self::Render(RenderError::Io(_))
            | Self::Metrics(MetricsError::Io(_)) => 3,
            _ => 1,
        }
    }
}
