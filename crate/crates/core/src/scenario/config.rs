//! Scenario configuration: TOML with named presets.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::trajectory::{parse_shape_label, trajectory_expand, Run, TrajectoryPhase, TrajectorySpec};
use super::ScenarioError;
use crate::geometry::{ShapeSpec, SHAPE_NAMES};
use crate::mpm::{MaterialParams, SimConfig};
use crate::render::PROFILE_NAMES;

/// Names accepted by the `preset` key.
pub const SCENARIO_PRESETS: [&str; 7] = [
    "gelsight-press-sphere",
    "desk-slip",
    "desk-rotation",
    "desk-press",
    "paper-slip",
    "paper-rotation",
    "paper-press",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    /// Top-level output folder name for this experiment.
    pub name: String,
    pub seed: u64,
    pub output: PathBuf,
    pub sensor: SensorConfig,
    pub elastomer: ElastomerConfig,
    pub indenter: IndenterConfig,
    pub sim: SimSection,
    pub capture: CaptureConfig,
    pub trajectory: TrajectorySpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensorConfig {
    pub profile: String,
    /// PNG applied to the gel surface; a seeded procedural texture otherwise.
    pub texture: Option<PathBuf>,
    pub spp: usize,
    pub max_bounces: usize,
    /// Also write a Phong image per capture.
    pub phong: bool,
    /// Image size; the depth raster size by default.
    pub resolution: Option<[usize; 2]>,
    pub exposure: Option<f64>,
    pub gamma: Option<f64>,
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self {
            profile: "gelsight".into(),
            texture: None,
            spp: 32,
            max_bounces: 4,
            phong: false,
            resolution: None,
            exposure: None,
            gamma: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ElastomerConfig {
    /// Pad size, mm.
    pub extent: [f64; 3],
    /// Particles per axis.
    pub counts: [usize; 3],
    pub density: f64,
    /// Clearance between the pad bottom and the sticky floor layer, mm.
    pub floor_gap: f64,
    /// Free space around the pad footprint as a fraction of its size.
    pub lateral_padding: f64,
}

impl Default for ElastomerConfig {
    fn default() -> Self {
        Self {
            extent: [20.0, 20.0, 4.0],
            counts: [101, 101, 21],
            density: 1.0,
            floor_gap: 0.1,
            lateral_padding: 0.2,
        }
    }
}

impl ElastomerConfig {
    pub fn spacing(&self) -> [f64; 3] {
        [0, 1, 2].map(|a| self.extent[a] / (self.counts[a].max(2) - 1) as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IndenterConfig {
    /// Shape preset, `name` or `name@scale`.
    pub shape: String,
    /// Explicit dimensions; overrides `shape` for phase-list trajectories.
    pub custom: Option<ShapeSpec>,
    /// Sampling spacing, mm; the smallest elastomer spacing by default.
    pub spacing: Option<f64>,
    pub density: f64,
    /// Initial clearance above the gel, mm.
    pub approach_gap: f64,
    /// In-plane offset from the gel center, mm.
    pub offset: [f64; 2],
    /// Initial turn about the vertical axis, degrees.
    pub rotation: f64,
}

impl Default for IndenterConfig {
    fn default() -> Self {
        Self {
            shape: "sphere".into(),
            custom: None,
            spacing: None,
            density: 4.0,
            approach_gap: 0.4,
            offset: [0.0, 0.0],
            rotation: 0.0,
        }
    }
}

/// Solver settings. Unless given, the grid width is twice the largest
/// elastomer spacing and the grid dimensions are sized to the scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimSection {
    pub youngs_modulus: f64,
    pub poisson_ratio: f64,
    pub dt: f64,
    pub grid_width: Option<f64>,
    pub grid_dims: Option<[usize; 3]>,
    pub boundary_margin: usize,
    pub rest_threshold: f64,
    pub rest_limit: usize,
    pub rest_early_exit: bool,
    pub pin_fraction: f64,
    pub anchor_base: bool,
    pub rest_check: bool,
}

impl Default for SimSection {
    fn default() -> Self {
        let d = SimConfig::default();
        Self {
            youngs_modulus: d.material.youngs_modulus,
            poisson_ratio: d.material.poisson_ratio,
            dt: d.dt,
            grid_width: None,
            grid_dims: None,
            boundary_margin: d.boundary_margin,
            rest_threshold: d.rest_threshold,
            rest_limit: d.rest_limit,
            rest_early_exit: d.rest_early_exit,
            pin_fraction: d.pin_fraction,
            anchor_base: d.anchor_base,
            rest_check: d.rest_check,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CaptureConfig {
    /// Depth raster size.
    pub raster: [usize; 2],
    /// Raster pitch, mm; 80% of the pad width by default.
    pub pitch: Option<f64>,
    /// Uniform depth noise amplitude, mm.
    pub perturbation: f64,
    /// Write images; off leaves depth maps and meshes only.
    pub render: bool,
    /// Capture after every solver step instead of at phase ends.
    pub every_step: bool,
}

impl Default for CaptureConfig {
    fn default() -> Self {
        Self {
            raster: [160, 120],
            pitch: None,
            perturbation: 1e-4,
            render: true,
            every_step: false,
        }
    }
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            name: "gelsight-press-sphere".into(),
            seed: 0,
            output: PathBuf::from("out"),
            sensor: SensorConfig::default(),
            elastomer: ElastomerConfig::default(),
            indenter: IndenterConfig::default(),
            sim: SimSection::default(),
            capture: CaptureConfig::default(),
            trajectory: TrajectorySpec::Phases {
                phases: vec![TrajectoryPhase::Press {
                    depth: 1.0,
                    speed: super::trajectory::DEFAULT_PRESS_SPEED,
                    capture: true,
                }],
            },
        }
    }
}

fn grid_spec(name: &str) -> TrajectorySpec {
    let kind = name.rsplit('-').next().unwrap_or(name);
    toml::from_str(&format!("kind = '{kind}'")).expect("grid defaults")
}

impl ScenarioConfig {
    /// The named preset with all defaults materialized.
    pub fn preset(name: &str) -> Result<Self, ScenarioError> {
        let mut c = Self::default();
        match name {
            "gelsight-press-sphere" => {}
            "desk-slip" | "desk-rotation" | "desk-press" => {
                c.trajectory = grid_spec(name);
            }
            "paper-slip" | "paper-rotation" | "paper-press" => {
                c.trajectory = grid_spec(name);
                c.elastomer.counts = [201, 201, 41];
                c.capture.raster = [640, 480];
                c.sensor.spp = 128;
            }
            other => {
                return Err(ScenarioError::invalid(
                    "preset",
                    format!("unknown preset {other:?}; available: {}", SCENARIO_PRESETS.join(", ")),
                ))
            }
        }
        c.name = name.to_string();
        Ok(c)
    }

    pub fn sim_config(&self) -> SimConfig {
        let s = &self.sim;
        let spacing = self.elastomer.spacing();
        SimConfig {
            grid_width: s
                .grid_width
                .unwrap_or_else(|| 2.0 * spacing.iter().copied().fold(0.0, f64::max)),
            dt: s.dt,
            grid_dims: s.grid_dims.unwrap_or([0; 3]),
            boundary_margin: s.boundary_margin,
            rest_threshold: s.rest_threshold,
            rest_limit: s.rest_limit,
            rest_early_exit: s.rest_early_exit,
            pin_fraction: s.pin_fraction,
            anchor_base: s.anchor_base,
            material: MaterialParams {
                youngs_modulus: s.youngs_modulus,
                poisson_ratio: s.poisson_ratio,
            },
            rest_check: s.rest_check,
        }
    }

    pub fn raster_pitch(&self) -> f64 {
        let [w, h] = self.capture.raster;
        self.capture.pitch.unwrap_or_else(|| {
            let span = 0.8 * self.elastomer.extent[0].min(self.elastomer.extent[1]);
            span / ((w.max(h).max(2) - 1) as f64)
        })
    }

    /// Indenter shape for a run label, honoring `indenter.custom` for the
    /// configured shape.
    pub fn shape_for(&self, label: &str) -> Result<ShapeSpec, ScenarioError> {
        match (&self.indenter.custom, label == self.indenter.shape) {
            (Some(c), true) => Ok(*c),
            _ => parse_shape_label(label),
        }
    }

    pub fn runs(&self) -> Result<Vec<Run>, ScenarioError> {
        trajectory_expand(&self.trajectory, &self.indenter.shape, self.indenter.offset)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |f: &str, m: String| ScenarioError::invalid(f, m);
        if self.name.is_empty() || self.name.contains(['/', '\\']) || self.name.starts_with('.') {
            return Err(bad("name", format!("must be a plain folder name, got {:?}", self.name)));
        }
        let s = &self.sensor;
        if !PROFILE_NAMES.contains(&s.profile.as_str()) {
            return Err(bad(
                "sensor.profile",
                format!("unknown sensor profile {:?}; available: {}", s.profile, PROFILE_NAMES.join(", ")),
            ));
        }
        if s.spp == 0 {
            return Err(bad("sensor.spp", "must be at least 1".into()));
        }
        if s.max_bounces == 0 {
            return Err(bad("sensor.max_bounces", "must be at least 1".into()));
        }
        if let Some([w, h]) = s.resolution {
            if w == 0 || h == 0 {
                return Err(bad("sensor.resolution", "must be positive".into()));
            }
        }
        if let Some(e) = s.exposure {
            if !(e > 0.0 && e.is_finite()) {
                return Err(bad("sensor.exposure", format!("must be positive, got {e}")));
            }
        }
        if let Some(g) = s.gamma {
            if !(g > 0.0 && g.is_finite()) {
                return Err(bad("sensor.gamma", format!("must be positive, got {g}")));
            }
        }

        let e = &self.elastomer;
        if e.extent.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
            return Err(bad("elastomer.extent", format!("must be positive, got {:?}", e.extent)));
        }
        if e.counts.iter().any(|&n| n < 2) {
            return Err(bad("elastomer.counts", format!("need at least 2 per axis, got {:?}", e.counts)));
        }
        if !(e.density > 0.0 && e.density.is_finite()) {
            return Err(bad("elastomer.density", format!("must be positive, got {}", e.density)));
        }
        if !(e.floor_gap > 0.0 && e.floor_gap.is_finite()) {
            return Err(bad("elastomer.floor_gap", format!("must be positive, got {}", e.floor_gap)));
        }
        if !(e.lateral_padding >= 0.0 && e.lateral_padding.is_finite()) {
            return Err(bad(
                "elastomer.lateral_padding",
                format!("must be non-negative, got {}", e.lateral_padding),
            ));
        }

        let ind = &self.indenter;
        if let Some(c) = &ind.custom {
            c.validate().map_err(|err| bad("indenter.custom", err.to_string()))?;
        } else {
            parse_shape_label(&ind.shape).map_err(|err| {
                bad(
                    "indenter.shape",
                    format!("{err}; shapes: {}, optionally suffixed @scale", SHAPE_NAMES.join(", ")),
                )
            })?;
        }
        if let Some(sp) = ind.spacing {
            if !(sp > 0.0 && sp.is_finite()) {
                return Err(bad("indenter.spacing", format!("must be positive, got {sp}")));
            }
        }
        if !(ind.density > 0.0 && ind.density.is_finite()) {
            return Err(bad("indenter.density", format!("must be positive, got {}", ind.density)));
        }
        if !(ind.approach_gap > 0.0 && ind.approach_gap.is_finite()) {
            return Err(bad("indenter.approach_gap", format!("must be positive, got {}", ind.approach_gap)));
        }
        if !ind.offset.iter().all(|v| v.is_finite()) || !ind.rotation.is_finite() {
            return Err(bad("indenter.offset", "offset and rotation must be finite".into()));
        }

        if let Some(w) = self.sim.grid_width {
            if !(w > 0.0 && w.is_finite()) {
                return Err(bad("sim.grid_width", format!("must be positive, got {w}")));
            }
        }
        let mut sim = self.sim_config();
        if sim.grid_dims == [0; 3] {
            sim.grid_dims = [64; 3];
        }
        sim.validate().map_err(|err| bad("sim", err.to_string()))?;

        let c = &self.capture;
        if c.raster.iter().any(|&n| n < 2) {
            return Err(bad("capture.raster", format!("need at least 2x2, got {:?}", c.raster)));
        }
        if let Some(p) = c.pitch {
            if !(p > 0.0 && p.is_finite()) {
                return Err(bad("capture.pitch", format!("must be positive, got {p}")));
            }
        }
        if !(c.perturbation >= 0.0 && c.perturbation.is_finite()) {
            return Err(bad("capture.perturbation", format!("must be ≥ 0, got {}", c.perturbation)));
        }
        self.runs()?;
        Ok(())
    }
}

/// Overlays `top` onto `base`. Tables merge key by key, except that a table
/// whose `kind` differs from the base replaces it whole.
fn merge(base: &mut toml::Value, top: toml::Value) {
    match (base, top) {
        (toml::Value::Table(b), toml::Value::Table(t)) => {
            let switched = matches!((b.get("kind"), t.get("kind")), (Some(x), Some(y)) if x != y);
            if switched {
                *b = t;
                return;
            }
            for (k, v) in t {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Parses and validates a scenario from TOML text. A top-level `preset`
/// key selects the base that the remaining keys override.
pub fn parse_scenario_str(text: &str) -> Result<ScenarioConfig, ScenarioError> {
    let mut user: toml::Table = toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
    let base = match user.remove("preset") {
        Some(toml::Value::String(p)) => ScenarioConfig::preset(&p)?,
        Some(_) => return Err(ScenarioError::invalid("preset", "must be a string")),
        None => ScenarioConfig::default(),
    };
    let mut merged = toml::Value::try_from(&base).map_err(|e| ScenarioError::Parse(e.to_string()))?;
    merge(&mut merged, toml::Value::Table(user));
    let cfg: ScenarioConfig = serde_path_to_error::deserialize(merged).map_err(|e| {
        let path = e.path().to_string();
        ScenarioError::invalid(if path == "." { "config".into() } else { path }, e.into_inner().to_string())
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_scenario(path: &Path) -> Result<ScenarioConfig, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::io(path, e))?;
    parse_scenario_str(&text).map_err(|e| match e {
        ScenarioError::Parse(m) => ScenarioError::Parse(format!("{}: {m}", path.display())),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_defaults_materialize() {
        let c = parse_scenario_str("preset = 'gelsight-press-sphere'").unwrap();
        assert_eq!(c, ScenarioConfig::preset("gelsight-press-sphere").unwrap());
        assert_eq!(c.elastomer.counts, [101, 101, 21]);
        assert_eq!(c.capture.raster, [160, 120]);
        assert_eq!(c.sensor.spp, 32);
        assert_eq!(c.seed, 0);
        for p in SCENARIO_PRESETS {
            ScenarioConfig::preset(p).unwrap().validate().unwrap();
        }
    }

    #[test]
    fn overrides_merge_into_preset() {
        let c = parse_scenario_str(
            "preset = 'desk-slip'\nseed = 7\n[sensor]\nspp = 4\n[trajectory]\nshapes = ['moon']\n",
        )
        .unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.sensor.spp, 4);
        assert_eq!(c.sensor.max_bounces, 4);
        assert_eq!(c.runs().unwrap().len(), 2);
        // switching the trajectory kind replaces the preset's table
        let c = parse_scenario_str(
            "preset = 'desk-slip'\n[trajectory]\nkind = 'phases'\nphases = [{ kind = 'dwell', duration = 0.001, capture = true }]\n",
        )
        .unwrap();
        assert_eq!(c.runs().unwrap().len(), 1);
    }

    #[test]
    fn unknown_keys_report_their_path() {
        let e = parse_scenario_str("[elastomer]\nthickness = 3.0\n").unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("elastomer") && msg.contains("thickness"), "{msg}");
        let e = parse_scenario_str("colour = 1\n").unwrap_err();
        assert!(e.to_string().contains("colour"), "{e}");
    }

    #[test]
    fn syntax_errors_carry_a_location() {
        let e = parse_scenario_str("seed = \n").unwrap_err();
        assert!(matches!(e, ScenarioError::Parse(_)));
        assert!(e.to_string().contains("line 1"), "{e}");
    }

    #[test]
    fn negative_press_depth_names_the_field() {
        let e = parse_scenario_str(
            "[trajectory]\nkind = 'phases'\nphases = [{ kind = 'press', depth = -0.5, capture = true }]\n",
        )
        .unwrap_err();
        assert!(e.to_string().contains("trajectory.phases[0].depth"), "{e}");
    }

    #[test]
    fn unknown_profile_lists_presets() {
        let e = parse_scenario_str("[sensor]\nprofile = 'digit'\n").unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("sensor.profile") && msg.contains("gelsight") && msg.contains("slip-sensor"), "{msg}");
        let e = parse_scenario_str("preset = 'huge'\n").unwrap_err();
        assert!(e.to_string().contains("desk-slip"), "{e}");
    }

    #[test]
    fn grid_width_follows_spacing() {
        let c = ScenarioConfig::default();
        assert!((c.sim_config().grid_width - 0.4).abs() < 1e-12);
        assert!((c.raster_pitch() - 16.0 / 159.0).abs() < 1e-12);
    }
}
