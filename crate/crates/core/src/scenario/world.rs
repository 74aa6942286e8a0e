//! Scene layout: the pad inside the grid and the indenter above it.

use nalgebra::Vector3;

use super::{ScenarioConfig, ScenarioError};
use crate::geometry::{elastomer_block, sample_particles, Pose, ShapeSpec};
use crate::mpm::{SimError, SimState};
use crate::surface::RasterSpec;

/// A ready-to-step simulation of one run.
#[derive(Debug, Clone)]
pub struct World {
    pub state: SimState,
    /// Indices of the pad's top-layer particles.
    pub surface: Vec<usize>,
    /// z of the undeformed top surface; depths are measured from here.
    pub rest_height: f64,
    pub gel_center: [f64; 2],
    /// Point on the indenter's vertical axis at its bounding-box center.
    pub axis: Vector3<f64>,
    /// First object particle; objects follow all elastomer particles.
    pub object_start: usize,
}

impl World {
    /// Centers the pad in a footprint widened by `lateral_padding` with its
    /// bottom `floor_gap` above the sticky floor layer, whose nodes hold the
    /// base in place. The indenter starts `approach_gap` above the pad at the
    /// given offset. Grid dimensions are sized to fit unless configured.
    pub fn build(cfg: &ScenarioConfig, shape: &ShapeSpec, offset: [f64; 2]) -> Result<Self, ScenarioError> {
        let mut sim = cfg.sim_config();
        let e = &cfg.elastomer;
        let spacing = e.spacing();
        let w = sim.grid_width;
        let m = sim.boundary_margin.max(1);
        let mw = m as f64 * w;

        let mut lateral_cells = [0usize; 2];
        let mut lo = [0.0; 3];
        for a in 0..2 {
            let cells = (e.extent[a] * (1.0 + e.lateral_padding) / w).ceil() as usize + 1;
            lateral_cells[a] = cells;
            lo[a] = mw + 0.5 * (cells as f64 * w - e.extent[a]);
        }
        lo[2] = mw + e.floor_gap;

        let mut block = elastomer_block(e.extent, e.counts, e.density)?;
        block.translate(Vector3::from(lo));
        let rest_height = block
            .surface
            .iter()
            .map(|&i| block.particles[i].position.z)
            .fold(f64::NEG_INFINITY, f64::max);
        let gel_center = [lo[0] + 0.5 * e.extent[0], lo[1] + 0.5 * e.extent[1]];

        let half = shape.half_extents();
        let axis = Vector3::new(
            gel_center[0] + offset[0],
            gel_center[1] + offset[1],
            rest_height + cfg.indenter.approach_gap + half.z,
        );
        let pose = Pose {
            translation: axis.into(),
            rotation: cfg.indenter.rotation,
        };
        let obj_spacing = cfg
            .indenter
            .spacing
            .unwrap_or_else(|| spacing.iter().copied().fold(f64::INFINITY, f64::min));
        let object = sample_particles(shape, &pose, obj_spacing, cfg.indenter.density)?;

        if sim.grid_dims == [0; 3] {
            let top = axis.z + half.z;
            sim.grid_dims = [
                lateral_cells[0] + 1 + 2 * m,
                lateral_cells[1] + 1 + 2 * m,
                (top / w).ceil() as usize + 2 + m,
            ];
        }

        let object_start = block.particles.len();
        let mut particles = block.particles;
        particles.extend(object.particles);
        let state = SimState::new(particles, sim).map_err(|err| match err {
            SimError::OutOfDomain { particle, position } => ScenarioError::invalid(
                "indenter",
                format!(
                    "{} particle {particle} at {position:?} lies outside the simulation domain",
                    if particle >= object_start { "indenter" } else { "elastomer" }
                ),
            ),
            other => ScenarioError::invalid("sim", other.to_string()),
        })?;
        Ok(Self {
            state,
            surface: block.surface,
            rest_height,
            gel_center,
            axis,
            object_start,
        })
    }

    /// Depth raster centered on the pad.
    pub fn raster(&self, cfg: &ScenarioConfig) -> RasterSpec {
        let [w, h] = cfg.capture.raster;
        RasterSpec::centered(w, h, cfg.raster_pitch(), self.gel_center)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::parse_shape_label;

    fn small() -> ScenarioConfig {
        let mut c = ScenarioConfig::default();
        c.elastomer.extent = [4.0, 4.0, 1.0];
        c.elastomer.counts = [11, 11, 6];
        c
    }

    #[test]
    fn pad_is_padded_and_indenter_clears_it() {
        let cfg = small();
        let shape = parse_shape_label("sphere@0.25").unwrap();
        let w = World::build(&cfg, &shape, [0.0, 0.0]).unwrap();
        let sim = &w.state.cfg;
        let mw = sim.boundary_margin as f64 * sim.grid_width;
        let xmin = w.state.elastomer().map(|(_, p)| p.position.x).fold(f64::INFINITY, f64::min);
        assert!(xmin - mw >= 0.1 * 4.0);
        let zmin = w.state.elastomer().map(|(_, p)| p.position.z).fold(f64::INFINITY, f64::min);
        assert!((zmin - mw - cfg.elastomer.floor_gap).abs() < 1e-12);
        assert!((w.rest_height - zmin - 1.0).abs() < 1e-12);
        let lowest = w.state.particles[w.object_start..]
            .iter()
            .map(|p| p.position.z)
            .fold(f64::INFINITY, f64::min);
        assert!(lowest >= w.rest_height + cfg.indenter.approach_gap - 1e-9);
        assert_eq!(w.surface.len(), 121);
        // symmetric lateral clearance
        let (lo, hi) = sim.interior(0);
        let xmax = w.state.elastomer().map(|(_, p)| p.position.x).fold(f64::NEG_INFINITY, f64::max);
        assert!(((xmin - lo) - (hi - xmax)).abs() < 1e-9);
    }

    #[test]
    fn indenter_outside_domain_is_rejected() {
        let cfg = small();
        let shape = parse_shape_label("sphere@0.25").unwrap();
        let e = World::build(&cfg, &shape, [10.0, 0.0]).unwrap_err();
        assert!(e.to_string().contains("outside"), "{e}");
    }
}
