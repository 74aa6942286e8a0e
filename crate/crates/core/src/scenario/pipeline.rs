//! End-to-end runs: simulate every trajectory run, capture depth maps,
//! meshes and images, and record them in a manifest.

use std::collections::HashMap;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_pcg::Pcg64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::driver::{Driver, StepEvent};
use super::trajectory::{PhaseKind, Run};
use super::{ScenarioConfig, ScenarioError, World};
use crate::mpm::snapshot::write_snapshot;
use crate::render::{build_scene, render_path_traced, render_phong, sample_rng, Image, SensorProfile};
use crate::surface::{depth_to_mesh, extract_surface_depth, perturb_depth, DepthMap, HeightfieldMesh};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PipelineOptions {
    /// Expand the trajectory and report the planned captures without
    /// simulating or touching the disk.
    pub dry_run: bool,
    /// Write depth maps and meshes only.
    pub skip_render: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptureRecord {
    pub run: usize,
    pub shape: String,
    pub offset: [f64; 2],
    /// Capture number within the shape's folder.
    pub index: usize,
    pub phase: usize,
    pub kind: PhaseKind,
    /// Signed cumulative magnitude of the phase kind, as used in file names.
    pub label: String,
    pub commanded: Option<f64>,
    pub measured: Option<f64>,
    pub step: Option<usize>,
    pub max_depth: Option<f64>,
    pub files: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestFile {
    /// Path relative to the run folder, `/`-separated.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    pub config_sha256: String,
    pub seed: u64,
    pub dry_run: bool,
    pub runs: usize,
    pub captures: Vec<CaptureRecord>,
    pub files: Vec<ManifestFile>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    /// `output/name`.
    pub root: PathBuf,
    pub manifest: Manifest,
}

fn derive_seed(seed: u64, capture: usize, stream: u64) -> u64 {
    sample_rng(seed, capture as u64, stream).gen()
}

fn label(x: f64) -> String {
    if x.abs() < 1e-9 {
        return "0".into();
    }
    let r = x.round();
    if (x - r).abs() < 1e-9 {
        format!("{}", r as i64)
    } else {
        format!("{}", (x * 1000.0).round() / 1000.0)
    }
}

/// Near-white gel texture with faint seeded grain.
pub fn procedural_texture(width: usize, height: usize, seed: u64) -> Image {
    let mut rng = Pcg64::seed_from_u64(seed ^ 0x7465_7874_7572_6500);
    let pixels = (0..width * height)
        .map(|_| {
            let v = (210.0 + rng.gen_range(-8.0..=8.0f64)).round() as u8;
            [v, v, v]
        })
        .collect();
    Image {
        width,
        height,
        pixels,
    }
}

/// The configured surface texture, or the procedural one at raster size.
pub fn base_texture(cfg: &ScenarioConfig) -> Result<Image, ScenarioError> {
    match &cfg.sensor.texture {
        Some(p) => Image::load_png(p).map_err(|e| match e {
            crate::render::RenderError::Io(io) => ScenarioError::io(p, io),
            other => ScenarioError::invalid("sensor.texture", other.to_string()),
        }),
        None => Ok(procedural_texture(cfg.capture.raster[0], cfg.capture.raster[1], cfg.seed)),
    }
}

/// Profile fitted to the mesh footprint. Images match the depth raster
/// unless a resolution is given.
fn profile_for(
    name: &str,
    mesh: &HeightfieldMesh,
    raster: [usize; 2],
    resolution: Option<[usize; 2]>,
    exposure: Option<f64>,
    gamma: Option<f64>,
) -> Result<SensorProfile, ScenarioError> {
    let (lo, hi) = mesh.extent();
    let mut p = SensorProfile::preset(name, [hi.x - lo.x, hi.y - lo.y])
        .map_err(|e| ScenarioError::invalid("sensor.profile", e.to_string()))?;
    p.resolution = resolution.unwrap_or(raster);
    if exposure.is_some() {
        p.exposure = exposure;
    }
    if gamma.is_some() {
        p.gamma = gamma;
    }
    Ok(p)
}

/// Renders a stored depth map under a sensor profile: path traced, or
/// Phong shaded when `phong` is set.
pub fn render_depth(
    depth: &DepthMap,
    profile: &str,
    texture: Option<&Image>,
    spp: usize,
    max_bounces: usize,
    seed: u64,
    phong: bool,
) -> Result<Image, ScenarioError> {
    let mesh = depth_to_mesh(depth)?;
    let profile = profile_for(profile, &mesh, [depth.width, depth.height], None, None, None)?;
    let fallback;
    let texture = match texture {
        Some(t) => t,
        None => {
            fallback = procedural_texture(depth.width, depth.height, seed);
            &fallback
        }
    };
    let scene = build_scene(&mesh, Some(texture), &profile)?;
    if phong {
        Ok(render_phong(&scene))
    } else {
        Ok(render_path_traced(&scene, spp, max_bounces, seed)?)
    }
}

/// Writes captures and keeps the file list.
struct Recorder<'a> {
    cfg: &'a ScenarioConfig,
    root: PathBuf,
    texture: Option<Image>,
    files: Vec<ManifestFile>,
    captures: Vec<CaptureRecord>,
    per_shape: HashMap<String, usize>,
}

struct CaptureMeta<'a> {
    run: usize,
    shape: &'a str,
    offset: [f64; 2],
    phase: usize,
    kind: PhaseKind,
    label: String,
    commanded: Option<f64>,
    measured: Option<f64>,
    step: usize,
}

impl Recorder<'_> {
    fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<(), ScenarioError> {
        let path = rel.split('/').fold(self.root.clone(), |p, c| p.join(c));
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| ScenarioError::io(parent, e))?;
        }
        std::fs::write(&path, bytes).map_err(|e| ScenarioError::io(&path, e))?;
        self.files.push(ManifestFile {
            path: rel.to_string(),
            sha256: hex::encode(Sha256::digest(bytes)),
            bytes: bytes.len() as u64,
        });
        Ok(())
    }

    fn capture(&mut self, world: &World, meta: CaptureMeta) -> Result<(), ScenarioError> {
        let cfg = self.cfg;
        let global = self.captures.len();
        let index = {
            let n = self.per_shape.entry(meta.shape.to_string()).or_insert(0);
            *n += 1;
            *n - 1
        };
        let stem = format!("{}/{index:03}_{}", meta.shape, meta.label);

        let depth = extract_surface_depth(&world.state.particles, &world.surface, world.rest_height, &world.raster(cfg))?;
        let noisy = perturb_depth(&depth, cfg.capture.perturbation, derive_seed(cfg.seed, global, 1))?;
        let mut files = Vec::new();
        let mut buf = Vec::new();
        noisy.write_to(&mut buf)?;
        self.write(&format!("{stem}.dpth"), &buf)?;
        files.push(format!("{stem}.dpth"));

        let mesh = depth_to_mesh(&noisy)?;
        buf.clear();
        mesh.write_obj(&mut buf)?;
        self.write(&format!("{stem}.obj"), &buf)?;
        files.push(format!("{stem}.obj"));

        if let Some(texture) = &self.texture {
            let s = &cfg.sensor;
            let profile = profile_for(&s.profile, &mesh, [noisy.width, noisy.height], s.resolution, s.exposure, s.gamma)?;
            let scene = build_scene(&mesh, Some(texture), &profile)?;
            let img = render_path_traced(&scene, s.spp, s.max_bounces, derive_seed(cfg.seed, global, 2))?;
            let png = img.to_png_bytes()?;
            self.write(&format!("{stem}.png"), &png)?;
            files.push(format!("{stem}.png"));
            if s.phong {
                let png = render_phong(&scene).to_png_bytes()?;
                self.write(&format!("{stem}_phong.png"), &png)?;
                files.push(format!("{stem}_phong.png"));
            }
        }

        self.captures.push(CaptureRecord {
            run: meta.run,
            shape: meta.shape.to_string(),
            offset: meta.offset,
            index,
            phase: meta.phase,
            kind: meta.kind,
            label: meta.label,
            commanded: meta.commanded,
            measured: meta.measured,
            step: Some(meta.step),
            max_depth: Some(depth.max_depth()),
            files,
        });
        Ok(())
    }
}

/// Cumulative signed magnitude per phase kind, for labels.
fn phase_labels(run: &Run) -> Vec<String> {
    let mut sums: HashMap<PhaseKind, f64> = HashMap::new();
    run.phases
        .iter()
        .map(|p| {
            let s = sums.entry(p.kind()).or_insert(0.0);
            *s += p.label_sign() * p.magnitude();
            label(*s)
        })
        .collect()
}

fn planned(cfg: &ScenarioConfig, runs: &[Run]) -> Vec<CaptureRecord> {
    let mut per_shape: HashMap<&str, usize> = HashMap::new();
    let mut out = Vec::new();
    for (r, run) in runs.iter().enumerate() {
        let labels = phase_labels(run);
        for (i, p) in run.phases.iter().enumerate() {
            if !p.capture() || cfg.capture.every_step {
                continue;
            }
            let n = per_shape.entry(run.shape.as_str()).or_insert(0);
            out.push(CaptureRecord {
                run: r,
                shape: run.shape.clone(),
                offset: run.offset,
                index: *n,
                phase: i,
                kind: p.kind(),
                label: labels[i].clone(),
                commanded: None,
                measured: None,
                step: None,
                max_depth: None,
                files: Vec::new(),
            });
            *n += 1;
        }
    }
    out
}

pub fn config_hash(cfg: &ScenarioConfig) -> String {
    let json = serde_json::to_vec(cfg).expect("config serializes");
    hex::encode(Sha256::digest(json))
}

/// Runs the whole scenario. See [`run_pipeline_with`].
pub fn run_pipeline(cfg: &ScenarioConfig, opts: &PipelineOptions) -> Result<PipelineOutput, ScenarioError> {
    run_pipeline_with(cfg, opts, &mut |_, _, _| Ok(()))
}

/// Simulates each run phase by phase and captures at the flagged phase ends
/// (or after every step with `capture.every_step`). Files go to
/// `output/name/<shape>/<index>_<magnitude>.{dpth,obj,png}`, together with
/// the resolved configuration and `manifest.json`. `observer` sees every
/// solver step with its run index. On a solver fault the state before the
/// failing step is saved as a snapshot next to the captures.
pub fn run_pipeline_with(
    cfg: &ScenarioConfig,
    opts: &PipelineOptions,
    observer: &mut dyn FnMut(usize, &StepEvent, &World) -> Result<(), ScenarioError>,
) -> Result<PipelineOutput, ScenarioError> {
    cfg.validate()?;
    let runs = cfg.runs()?;
    let root = cfg.output.join(&cfg.name);
    let mut manifest = Manifest {
        name: cfg.name.clone(),
        config_sha256: config_hash(cfg),
        seed: cfg.seed,
        dry_run: opts.dry_run,
        runs: runs.len(),
        captures: Vec::new(),
        files: Vec::new(),
    };
    if opts.dry_run {
        manifest.captures = planned(cfg, &runs);
        return Ok(PipelineOutput { root, manifest });
    }

    let render = cfg.capture.render && !opts.skip_render;
    let mut rec = Recorder {
        cfg,
        root: root.clone(),
        texture: if render { Some(base_texture(cfg)?) } else { None },
        files: Vec::new(),
        captures: Vec::new(),
        per_shape: HashMap::new(),
    };
    let resolved = toml::to_string(cfg).map_err(|e| ScenarioError::Parse(e.to_string()))?;
    rec.write("scenario.toml", resolved.as_bytes())?;

    for (r, run) in runs.iter().enumerate() {
        let shape = cfg.shape_for(&run.shape)?;
        let world = World::build(cfg, &shape, run.offset)?;
        let mut driver = Driver::new(world)?;
        let labels = phase_labels(run);
        log::info!("run {r}: {} at {:?}, {} phases", run.shape, run.offset, run.phases.len());
        for (i, phase) in run.phases.iter().enumerate() {
            let every = cfg.capture.every_step;
            let rec_ref = &mut rec;
            let mut on_step = |ev: &StepEvent, w: &World| -> Result<(), ScenarioError> {
                observer(r, ev, w)?;
                if every {
                    rec_ref.capture(
                        w,
                        CaptureMeta {
                            run: r,
                            shape: &run.shape,
                            offset: run.offset,
                            phase: i,
                            kind: phase.kind(),
                            label: format!("s{:05}", ev.step),
                            commanded: None,
                            measured: None,
                            step: ev.step,
                        },
                    )?;
                }
                Ok(())
            };
            let report = match driver.run_phase(i, phase, &mut on_step) {
                Ok(rep) => rep,
                Err(ScenarioError::Fault { context, source, .. }) => {
                    let rel = format!("{}/run{r:03}_last_good.mpms", run.shape);
                    let mut buf = Vec::new();
                    write_snapshot(&mut buf, driver.last_good()).map_err(|e| ScenarioError::Fault {
                        context: context.clone(),
                        source: e,
                        snapshot: None,
                    })?;
                    rec.write(&rel, &buf)?;
                    return Err(ScenarioError::Fault {
                        context: format!("run {r} ({}), {context}", run.shape),
                        source,
                        snapshot: Some(rel.split('/').fold(root.clone(), |p, c| p.join(c))),
                    });
                }
                Err(e) => return Err(e),
            };
            log::debug!("run {r} phase {i}: {report:?}");
            if phase.capture() && !every {
                rec.capture(
                    &driver.world,
                    CaptureMeta {
                        run: r,
                        shape: &run.shape,
                        offset: run.offset,
                        phase: i,
                        kind: phase.kind(),
                        label: labels[i].clone(),
                        commanded: Some(report.commanded),
                        measured: Some(report.measured),
                        step: driver.world.state.steps,
                    },
                )?;
            }
        }
    }

    manifest.captures = rec.captures;
    manifest.files = rec.files;
    let json = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    let path = root.join("manifest.json");
    std::fs::write(&path, json).map_err(|e| ScenarioError::io(&path, e))?;
    Ok(PipelineOutput { root, manifest })
}
