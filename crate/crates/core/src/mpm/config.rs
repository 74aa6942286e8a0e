use serde::{Deserialize, Serialize};

use super::{MaterialParams, SimError};

/// Solver parameters. Lengths in mm, time in s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    /// Node spacing `W`.
    pub grid_width: f64,
    pub dt: f64,
    pub grid_dims: [usize; 3],
    /// Nodes within this many layers of a domain face are held at zero velocity.
    pub boundary_margin: usize,
    /// Relative velocity mismatch accepted by the rest check.
    pub rest_threshold: f64,
    /// Maximum transfer cycles per step.
    pub rest_limit: usize,
    /// Stop early once the ratio's last improvement, kept up for the cycles
    /// left, would not reach `rest_threshold`. The step still counts as
    /// unconverged.
    pub rest_early_exit: bool,
    /// Fraction of the elastomer's initial height whose particles get z-pinned.
    /// Zero pins only the bottom layer.
    pub pin_fraction: f64,
    /// Also hold the bottom particle layer still in-plane, bonding the base
    /// to the sensor.
    pub anchor_base: bool,
    pub material: MaterialParams,
    /// `false` runs the plain MPM step: one transfer cycle, no pinning or
    /// anchoring.
    pub rest_check: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            grid_width: 0.4,
            dt: 1e-4,
            grid_dims: [64, 64, 32],
            boundary_margin: 3,
            rest_threshold: 0.05,
            rest_limit: 50,
            rest_early_exit: true,
            pin_fraction: 0.5,
            anchor_base: true,
            material: MaterialParams::default(),
            rest_check: true,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |msg: String| Err(SimError::Config(msg));
        if !(self.grid_width > 0.0 && self.grid_width.is_finite()) {
            return bad(format!("grid_width must be positive, got {}", self.grid_width));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if self.grid_dims.iter().any(|&d| d < 2 * self.boundary_margin + 4) {
            return bad(format!(
                "grid_dims {:?} too small for boundary_margin {}",
                self.grid_dims, self.boundary_margin
            ));
        }
        if !(self.rest_threshold > 0.0) {
            return bad(format!("rest_threshold must be positive, got {}", self.rest_threshold));
        }
        if self.rest_limit < 1 {
            return bad("rest_limit must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.pin_fraction) {
            return bad(format!("pin_fraction must lie in [0, 1], got {}", self.pin_fraction));
        }
        self.material.validate()
    }

    /// Open interval of valid particle coordinates along `axis`, in mm.
    pub fn interior(&self, axis: usize) -> (f64, f64) {
        let m = self.boundary_margin.max(1) as f64;
        (
            m * self.grid_width,
            (self.grid_dims[axis] as f64 - 1.0 - m) * self.grid_width,
        )
    }
}
