//! Motion phases and the experiment grids they expand from.

use serde::{Deserialize, Serialize};

use super::ScenarioError;
use crate::geometry::{ShapeKind, ShapeSpec, SHAPE_NAMES};

pub const DEFAULT_PRESS_SPEED: f64 = 50.0;
pub const DEFAULT_SLIDE_SPEED: f64 = 100.0;
pub const DEFAULT_SPIN_SPEED: f64 = 1500.0;

fn press_speed() -> f64 {
    DEFAULT_PRESS_SPEED
}
fn slide_speed() -> f64 {
    DEFAULT_SLIDE_SPEED
}
fn spin_speed() -> f64 {
    DEFAULT_SPIN_SPEED
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseKind {
    Press,
    Slide,
    Rotate,
    Dwell,
}

/// One commanded motion. Press depth counts from first contact and
/// accumulates over consecutive press phases; slides and rotations are
/// relative to the pose at phase start.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TrajectoryPhase {
    Press {
        /// mm below the previous press target.
        depth: f64,
        /// mm/s
        #[serde(default = "press_speed")]
        speed: f64,
        #[serde(default)]
        capture: bool,
    },
    Slide {
        /// mm
        distance: f64,
        /// mm/s
        #[serde(default = "slide_speed")]
        speed: f64,
        /// In-plane direction, degrees from +x.
        #[serde(default)]
        heading_degrees: f64,
        #[serde(default)]
        capture: bool,
    },
    Rotate {
        /// degrees
        angle: f64,
        /// deg/s
        #[serde(default = "spin_speed")]
        speed: f64,
        #[serde(default)]
        clockwise: bool,
        #[serde(default)]
        capture: bool,
    },
    Dwell {
        /// s
        duration: f64,
        #[serde(default)]
        capture: bool,
    },
}

impl TrajectoryPhase {
    pub fn kind(&self) -> PhaseKind {
        match self {
            Self::Press { .. } => PhaseKind::Press,
            Self::Slide { .. } => PhaseKind::Slide,
            Self::Rotate { .. } => PhaseKind::Rotate,
            Self::Dwell { .. } => PhaseKind::Dwell,
        }
    }

    pub fn magnitude(&self) -> f64 {
        match *self {
            Self::Press { depth, .. } => depth,
            Self::Slide { distance, .. } => distance,
            Self::Rotate { angle, .. } => angle,
            Self::Dwell { duration, .. } => duration,
        }
    }

    /// Commanded speed; `None` for dwell.
    pub fn speed(&self) -> Option<f64> {
        match *self {
            Self::Press { speed, .. } | Self::Slide { speed, .. } | Self::Rotate { speed, .. } => Some(speed),
            Self::Dwell { .. } => None,
        }
    }

    pub fn capture(&self) -> bool {
        match *self {
            Self::Press { capture, .. }
            | Self::Slide { capture, .. }
            | Self::Rotate { capture, .. }
            | Self::Dwell { capture, .. } => capture,
        }
    }

    /// Sign attached to the magnitude in capture labels: negative for
    /// clockwise turns and slides with a negative x (or, along y, negative y)
    /// component.
    pub fn label_sign(&self) -> f64 {
        match *self {
            Self::Slide { heading_degrees, .. } => {
                let (s, c) = heading_degrees.to_radians().sin_cos();
                if c < -1e-9 || (c.abs() <= 1e-9 && s < 0.0) {
                    -1.0
                } else {
                    1.0
                }
            }
            Self::Rotate { clockwise: true, .. } => -1.0,
            _ => 1.0,
        }
    }

    pub fn validate(&self, field: &str) -> Result<(), ScenarioError> {
        let m = self.magnitude();
        if !(m >= 0.0 && m.is_finite()) {
            return Err(ScenarioError::invalid(
                format!("{field}.{}", magnitude_key(self.kind())),
                format!("must be a finite value ≥ 0, got {m}"),
            ));
        }
        if let Some(v) = self.speed() {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ScenarioError::invalid(
                    format!("{field}.speed"),
                    format!("must be positive, got {v}"),
                ));
            }
        }
        if let Self::Slide { heading_degrees, .. } = self {
            if !heading_degrees.is_finite() {
                return Err(ScenarioError::invalid(format!("{field}.heading_degrees"), "must be finite"));
            }
        }
        Ok(())
    }
}

fn magnitude_key(kind: PhaseKind) -> &'static str {
    match kind {
        PhaseKind::Press => "depth",
        PhaseKind::Slide => "distance",
        PhaseKind::Rotate => "angle",
        PhaseKind::Dwell => "duration",
    }
}

fn default_slip_shapes() -> Vec<String> {
    ["sphere", "moon", "pacman", "dot_in"].map(String::from).to_vec()
}

fn default_rotation_shapes() -> Vec<String> {
    ["moon", "pacman", "dot_in"].map(String::from).to_vec()
}

/// The seven shape families at three scales.
pub fn press_shape_set() -> Vec<String> {
    SHAPE_NAMES
        .iter()
        .flat_map(|n| [format!("{n}@0.75"), n.to_string(), format!("{n}@1.25")])
        .collect()
}

fn half_mm() -> f64 {
    0.5
}
fn one() -> f64 {
    1.0
}
fn five() -> f64 {
    5.0
}
fn ten() -> f64 {
    10.0
}
fn forty_five() -> f64 {
    45.0
}
fn three() -> f64 {
    3.0
}
fn grid3() -> [usize; 2] {
    [3, 3]
}
fn both_headings() -> Vec<f64> {
    vec![0.0, 180.0]
}

/// Either an explicit phase list for the configured indenter, or one of the
/// experiment grids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TrajectorySpec {
    Phases {
        phases: Vec<TrajectoryPhase>,
    },
    /// Press, capture, then slide in equal steps, per shape and heading.
    Slip {
        #[serde(default = "default_slip_shapes")]
        shapes: Vec<String>,
        #[serde(default = "half_mm")]
        press_depth: f64,
        #[serde(default = "one")]
        step: f64,
        #[serde(default = "five")]
        max_distance: f64,
        #[serde(default = "both_headings")]
        headings: Vec<f64>,
        #[serde(default = "press_speed")]
        press_speed: f64,
        #[serde(default = "slide_speed")]
        slide_speed: f64,
    },
    /// Press, capture, then turn in equal steps, per shape and direction.
    Rotation {
        #[serde(default = "default_rotation_shapes")]
        shapes: Vec<String>,
        #[serde(default = "half_mm")]
        press_depth: f64,
        #[serde(default = "five")]
        step: f64,
        #[serde(default = "forty_five")]
        max_angle: f64,
        #[serde(default = "press_speed")]
        press_speed: f64,
        #[serde(default = "spin_speed")]
        spin_speed: f64,
    },
    /// Capture at contact and at every depth step, per shape and location.
    Press {
        #[serde(default = "press_shape_set")]
        shapes: Vec<String>,
        #[serde(default = "one")]
        step: f64,
        #[serde(default = "ten")]
        max_depth: f64,
        #[serde(default = "grid3")]
        grid: [usize; 2],
        /// mm between neighboring locations.
        #[serde(default = "three")]
        grid_pitch: f64,
        #[serde(default = "press_speed")]
        press_speed: f64,
    },
}

/// One independent simulation: an indenter shape at an in-plane offset
/// driven through a phase list.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Run {
    /// Shape label, `name` or `name@scale`.
    pub shape: String,
    /// Offset from the gel center, mm.
    pub offset: [f64; 2],
    pub phases: Vec<TrajectoryPhase>,
}

impl Run {
    pub fn captures(&self) -> usize {
        self.phases.iter().filter(|p| p.capture()).count()
    }
}

fn step_count(field: &str, step: f64, max: f64) -> Result<usize, ScenarioError> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(ScenarioError::invalid(format!("trajectory.{field}"), format!("step must be positive, got {step}")));
    }
    if !(max >= 0.0 && max.is_finite()) {
        return Err(ScenarioError::invalid(format!("trajectory.{field}"), format!("range must be ≥ 0, got {max}")));
    }
    let n = (max / step + 1e-9).floor() as usize;
    if n == 0 {
        return Err(ScenarioError::invalid(
            format!("trajectory.{field}"),
            format!("step {step} exceeds the range {max}: zero-step expansion"),
        ));
    }
    Ok(n)
}

fn non_empty<'a>(field: &str, xs: &'a [String]) -> Result<&'a [String], ScenarioError> {
    if xs.is_empty() {
        return Err(ScenarioError::invalid(format!("trajectory.{field}"), "must list at least one entry"));
    }
    for (i, s) in xs.iter().enumerate() {
        parse_shape_label(s).map_err(|e| ScenarioError::invalid(format!("trajectory.{field}[{i}]"), e.to_string()))?;
    }
    Ok(xs)
}

/// Expands the spec into runs. `shape` and `offset` are the configured
/// indenter, used by explicit phase lists and as the base offset of grids.
pub fn trajectory_expand(spec: &TrajectorySpec, shape: &str, offset: [f64; 2]) -> Result<Vec<Run>, ScenarioError> {
    let runs = match spec {
        TrajectorySpec::Phases { phases } => {
            for (i, p) in phases.iter().enumerate() {
                p.validate(&format!("trajectory.phases[{i}]"))?;
            }
            if phases.is_empty() {
                return Err(ScenarioError::invalid("trajectory.phases", "zero-step expansion: no phases"));
            }
            vec![Run {
                shape: shape.to_string(),
                offset,
                phases: phases.clone(),
            }]
        }
        TrajectorySpec::Slip {
            shapes,
            press_depth,
            step,
            max_distance,
            headings,
            press_speed,
            slide_speed,
        } => {
            let n = step_count("step", *step, *max_distance)?;
            if headings.is_empty() {
                return Err(ScenarioError::invalid("trajectory.headings", "must list at least one heading"));
            }
            let mut runs = Vec::new();
            for s in non_empty("shapes", shapes)? {
                for &h in headings {
                    let mut phases = vec![TrajectoryPhase::Press {
                        depth: *press_depth,
                        speed: *press_speed,
                        capture: true,
                    }];
                    phases.extend((0..n).map(|_| TrajectoryPhase::Slide {
                        distance: *step,
                        speed: *slide_speed,
                        heading_degrees: h,
                        capture: true,
                    }));
                    runs.push(Run {
                        shape: s.clone(),
                        offset,
                        phases,
                    });
                }
            }
            runs
        }
        TrajectorySpec::Rotation {
            shapes,
            press_depth,
            step,
            max_angle,
            press_speed,
            spin_speed,
        } => {
            let n = step_count("step", *step, *max_angle)?;
            let mut runs = Vec::new();
            for s in non_empty("shapes", shapes)? {
                for clockwise in [false, true] {
                    let mut phases = vec![TrajectoryPhase::Press {
                        depth: *press_depth,
                        speed: *press_speed,
                        capture: true,
                    }];
                    phases.extend((0..n).map(|_| TrajectoryPhase::Rotate {
                        angle: *step,
                        speed: *spin_speed,
                        clockwise,
                        capture: true,
                    }));
                    runs.push(Run {
                        shape: s.clone(),
                        offset,
                        phases,
                    });
                }
            }
            runs
        }
        TrajectorySpec::Press {
            shapes,
            step,
            max_depth,
            grid,
            grid_pitch,
            press_speed,
        } => {
            let n = step_count("step", *step, *max_depth)?;
            if grid.contains(&0) {
                return Err(ScenarioError::invalid("trajectory.grid", "zero-step expansion: empty location grid"));
            }
            if !(grid_pitch.is_finite() && *grid_pitch >= 0.0) {
                return Err(ScenarioError::invalid("trajectory.grid_pitch", "must be ≥ 0"));
            }
            let mut runs = Vec::new();
            for s in non_empty("shapes", shapes)? {
                for gy in 0..grid[1] {
                    for gx in 0..grid[0] {
                        let at = |g: usize, n: usize| (g as f64 - 0.5 * (n - 1) as f64) * grid_pitch;
                        let mut phases = vec![TrajectoryPhase::Press {
                            depth: 0.0,
                            speed: *press_speed,
                            capture: true,
                        }];
                        phases.extend((0..n).map(|_| TrajectoryPhase::Press {
                            depth: *step,
                            speed: *press_speed,
                            capture: true,
                        }));
                        runs.push(Run {
                            shape: s.clone(),
                            offset: [offset[0] + at(gx, grid[0]), offset[1] + at(gy, grid[1])],
                            phases,
                        });
                    }
                }
            }
            runs
        }
    };
    for r in &runs {
        for (i, p) in r.phases.iter().enumerate() {
            p.validate(&format!("trajectory.phases[{i}]"))?;
        }
    }
    if runs.iter().map(Run::captures).sum::<usize>() == 0 {
        return Err(ScenarioError::invalid("trajectory", "zero-step expansion: no phase captures"));
    }
    Ok(runs)
}

/// Resolves `name` or `name@scale` to a shape.
pub fn parse_shape_label(label: &str) -> Result<ShapeSpec, ScenarioError> {
    let (name, scale) = match label.split_once('@') {
        Some((n, s)) => {
            let f: f64 = s
                .parse()
                .map_err(|_| ScenarioError::invalid("shape", format!("bad scale in {label:?}")))?;
            if !(f > 0.0 && f.is_finite()) {
                return Err(ScenarioError::invalid("shape", format!("scale must be positive in {label:?}")));
            }
            (n, f)
        }
        None => (label, 1.0),
    };
    let spec = ShapeSpec::preset(name).map_err(|e| ScenarioError::invalid("shape", e.to_string()))?;
    Ok(scale_shape(&spec, scale))
}

/// Scales every length of a shape; angles are kept.
pub fn scale_shape(spec: &ShapeSpec, f: f64) -> ShapeSpec {
    let kind = match spec.kind {
        ShapeKind::Sphere { radius } => ShapeKind::Sphere { radius: radius * f },
        ShapeKind::Cylinder { radius, height } => ShapeKind::Cylinder {
            radius: radius * f,
            height: height * f,
        },
        ShapeKind::Torus {
            major_radius,
            minor_radius,
        } => ShapeKind::Torus {
            major_radius: major_radius * f,
            minor_radius: minor_radius * f,
        },
        ShapeKind::Prism { size } => ShapeKind::Prism { size: size.map(|s| s * f) },
        ShapeKind::Moon {
            radius,
            cut_radius,
            cut_offset,
            height,
        } => ShapeKind::Moon {
            radius: radius * f,
            cut_radius: cut_radius * f,
            cut_offset: cut_offset * f,
            height: height * f,
        },
        ShapeKind::Pacman {
            radius,
            mouth_degrees,
            height,
        } => ShapeKind::Pacman {
            radius: radius * f,
            mouth_degrees,
            height: height * f,
        },
        ShapeKind::DotIn {
            radius,
            inner_radius,
            height,
        } => ShapeKind::DotIn {
            radius: radius * f,
            inner_radius: inner_radius * f,
            height: height * f,
        },
    };
    ShapeSpec {
        kind,
        edge_round_radius: spec.edge_round_radius * f,
    }
}
