//! Tactile image synthesis: a path tracer with next-event estimation and a
//! Phong baseline, over a BVH of the gel surface mesh and LED emitters.

mod bvh;
pub mod fixtures;
mod image;
mod path;
mod phong;
mod scene;

use thiserror::Error;

pub use bvh::{Bvh, Hit, Ray};
pub use image::{Image, RadianceImage, ToneMap};
pub use path::{render_path_traced, render_radiance, sample_rng, ROULETTE_DEPTH};
pub use phong::{phong_radiance, render_phong};
pub use scene::{
    auto_exposure, build_scene, fit_camera, Albedo, CameraSpec, Material, PhongParams, RectLight, Scene,
    SceneBuilder, SensorProfile, PROFILE_NAMES,
};

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("{0}")]
    Invalid(String),
    #[error("image codec: {0}")]
    Image(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
