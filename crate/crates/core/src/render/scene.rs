use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use super::bvh::{Bvh, Hit, Ray};
use super::image::{Image, ToneMap};
use super::RenderError;
use crate::surface::HeightfieldMesh;

type V3 = Vector3<f64>;

/// Pinhole camera. `up` defaults to +y.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraSpec {
    pub position: [f64; 3],
    pub look: [f64; 3],
    #[serde(default = "default_up")]
    pub up: [f64; 3],
    pub vfov_degrees: f64,
}

fn default_up() -> [f64; 3] {
    [0.0, 1.0, 0.0]
}

/// One-sided rectangular emitter spanning `corner + s·edge_u + t·edge_v`,
/// emitting along `edge_u × edge_v`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RectLight {
    pub corner: [f64; 3],
    pub edge_u: [f64; 3],
    pub edge_v: [f64; 3],
    pub radiance: [f64; 3],
}

impl RectLight {
    pub fn area(&self) -> f64 {
        V3::from(self.edge_u).cross(&V3::from(self.edge_v)).norm()
    }

    pub fn normal(&self) -> V3 {
        V3::from(self.edge_u).cross(&V3::from(self.edge_v)).normalize()
    }

    pub fn center(&self) -> V3 {
        V3::from(self.corner) + 0.5 * (V3::from(self.edge_u) + V3::from(self.edge_v))
    }

    fn corners(&self) -> [V3; 4] {
        let c = V3::from(self.corner);
        let (u, v) = (V3::from(self.edge_u), V3::from(self.edge_v));
        [c, c + u, c + u + v, c + v]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhongParams {
    pub ambient: f64,
    pub diffuse: f64,
    pub specular: f64,
    pub shininess: f64,
}

impl Default for PhongParams {
    fn default() -> Self {
        Self {
            ambient: 0.1,
            diffuse: 1.0,
            specular: 0.05,
            shininess: 16.0,
        }
    }
}

/// Sensor optics: output size, camera, LEDs and display mapping.
///
/// Light and camera positions are in the mesh frame (mm, surface at z = 0).
/// A missing camera is fitted to the mesh; a missing exposure normalizes a
/// flat white surface at the footprint center to full scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorProfile {
    pub name: String,
    pub resolution: [usize; 2],
    #[serde(default)]
    pub camera: Option<CameraSpec>,
    pub lights: Vec<RectLight>,
    #[serde(default)]
    pub exposure: Option<f64>,
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default)]
    pub phong: PhongParams,
}

pub const PROFILE_NAMES: &[&str] = &["gelsight", "slip-sensor"];

impl SensorProfile {
    /// Named preset with LED strips along the four edges of a sensor
    /// footprint of `footprint` mm starting at the origin.
    pub fn preset(name: &str, footprint: [f64; 2]) -> Result<Self, RenderError> {
        let (colors, resolution) = match name {
            "gelsight" => (
                // left, right, bottom, top as seen in the image
                [[40.0, 40.0, 255.0], [40.0, 255.0, 40.0], [255.0, 40.0, 40.0], [255.0, 255.0, 255.0]],
                [640, 480],
            ),
            "slip-sensor" => ([[255.0; 3]; 4], [480, 480]),
            _ => {
                return Err(RenderError::Invalid(format!(
                    "unknown sensor profile {name:?}, expected one of {PROFILE_NAMES:?}"
                )))
            }
        };
        if !(footprint[0] > 0.0 && footprint[1] > 0.0) {
            return Err(RenderError::Invalid(format!("footprint must be positive, got {footprint:?}")));
        }
        let [lx, ly] = footprint;
        let s = lx.min(ly);
        let (gap, z0, hz) = (0.02 * s, 0.03 * s, 0.12 * s);
        let rgb = |c: [f64; 3]| c.map(|v| v / 255.0);
        let lights = vec![
            RectLight {
                corner: [-gap, 0.0, z0],
                edge_u: [0.0, ly, 0.0],
                edge_v: [0.0, 0.0, hz],
                radiance: rgb(colors[0]),
            },
            RectLight {
                corner: [lx + gap, ly, z0],
                edge_u: [0.0, -ly, 0.0],
                edge_v: [0.0, 0.0, hz],
                radiance: rgb(colors[1]),
            },
            RectLight {
                corner: [lx, -gap, z0],
                edge_u: [-lx, 0.0, 0.0],
                edge_v: [0.0, 0.0, hz],
                radiance: rgb(colors[2]),
            },
            RectLight {
                corner: [0.0, ly + gap, z0],
                edge_u: [lx, 0.0, 0.0],
                edge_v: [0.0, 0.0, hz],
                radiance: rgb(colors[3]),
            },
        ];
        Ok(Self {
            name: name.to_string(),
            resolution,
            camera: None,
            lights,
            exposure: None,
            gamma: None,
            phong: PhongParams::default(),
        })
    }

    pub fn validate(&self) -> Result<(), RenderError> {
        if self.resolution[0] == 0 || self.resolution[1] == 0 {
            return Err(RenderError::Invalid(format!("resolution must be positive, got {:?}", self.resolution)));
        }
        if self.lights.is_empty() {
            return Err(RenderError::Invalid("sensor profile needs at least one light".into()));
        }
        for (n, l) in self.lights.iter().enumerate() {
            if !(l.area() > 0.0) || l.radiance.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
                return Err(RenderError::Invalid(format!("light {n} is degenerate: {l:?}")));
            }
        }
        if let Some(e) = self.exposure {
            if !(e > 0.0 && e.is_finite()) {
                return Err(RenderError::Invalid(format!("exposure must be positive, got {e}")));
            }
        }
        if let Some(g) = self.gamma {
            if !(g > 0.0 && g.is_finite()) {
                return Err(RenderError::Invalid(format!("gamma must be positive, got {g}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Camera {
    origin: V3,
    u: V3,
    v: V3,
    w: V3,
    half_h: f64,
    aspect: f64,
}

impl Camera {
    fn new(spec: &CameraSpec, width: usize, height: usize) -> Result<Self, RenderError> {
        let look = V3::from(spec.look);
        let up = V3::from(spec.up);
        if !(look.norm() > 1e-12) || look.iter().any(|c| !c.is_finite()) {
            return Err(RenderError::Invalid(format!("camera look direction is degenerate: {:?}", spec.look)));
        }
        if !(spec.vfov_degrees > 0.0 && spec.vfov_degrees < 180.0) {
            return Err(RenderError::Invalid(format!("vertical field of view must be in (0, 180), got {}", spec.vfov_degrees)));
        }
        let w = -look.normalize();
        let u = up.cross(&w);
        if !(u.norm() > 1e-12) {
            return Err(RenderError::Invalid("camera up is parallel to the look direction".into()));
        }
        let u = u.normalize();
        Ok(Self {
            origin: V3::from(spec.position),
            u,
            v: w.cross(&u),
            w,
            half_h: (0.5 * spec.vfov_degrees.to_radians()).tan(),
            aspect: width as f64 / height as f64,
        })
    }

    /// Ray through film coordinates `(sx, sy)` in `[0, 1]²`, `sy` downwards.
    pub(crate) fn ray(&self, sx: f64, sy: f64) -> Ray {
        let x = (2.0 * sx - 1.0) * self.half_h * self.aspect;
        let y = (1.0 - 2.0 * sy) * self.half_h;
        Ray {
            origin: self.origin,
            dir: (x * self.u + y * self.v - self.w).normalize(),
        }
    }

    pub(crate) fn forward(&self) -> V3 {
        -self.w
    }
}

/// Camera looking down −z at the mesh footprint, framing the largest
/// centered window with the image aspect that stays inside it.
pub fn fit_camera(lo: [f64; 2], hi: [f64; 2], width: usize, height: usize) -> CameraSpec {
    let (lx, ly) = (hi[0] - lo[0], hi[1] - lo[1]);
    let scale = (lx / width as f64).min(ly / height as f64);
    let view_h = scale * height as f64;
    let dist = 1.5 * lx.max(ly);
    CameraSpec {
        position: [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1]), dist],
        look: [0.0, 0.0, -1.0],
        up: default_up(),
        vfov_degrees: 2.0 * (0.5 * view_h / dist).atan().to_degrees(),
    }
}

/// Linear RGB texture with nearest lookup; `v` points up the image.
#[derive(Debug, Clone)]
pub(crate) struct Texture {
    width: usize,
    height: usize,
    texels: Vec<V3>,
}

impl Texture {
    fn from_image(img: &Image) -> Self {
        Self {
            width: img.width,
            height: img.height,
            texels: img
                .pixels
                .iter()
                .map(|p| V3::new(p[0] as f64, p[1] as f64, p[2] as f64) / 255.0)
                .collect(),
        }
    }

    fn lookup(&self, uv: Vector2<f64>) -> V3 {
        let tx = ((uv.x * self.width as f64).floor().max(0.0) as usize).min(self.width - 1);
        let ty = (((1.0 - uv.y) * self.height as f64).floor().max(0.0) as usize).min(self.height - 1);
        self.texels[ty * self.width + tx]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Albedo {
    Constant([f64; 3]),
    /// The scene's base texture.
    Texture,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Material {
    pub albedo: Albedo,
    /// Radiance leaving the front face (along the winding normal).
    pub emission: [f64; 3],
    pub two_sided_emission: bool,
}

impl Material {
    pub fn diffuse(albedo: [f64; 3]) -> Self {
        Self {
            albedo: Albedo::Constant(albedo),
            emission: [0.0; 3],
            two_sided_emission: false,
        }
    }

    pub fn emitter(radiance: [f64; 3]) -> Self {
        Self {
            albedo: Albedo::Constant([0.0; 3]),
            emission: radiance,
            two_sided_emission: false,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct TriShading {
    pub normals: Option<[V3; 3]>,
    pub uvs: [Vector2<f64>; 3],
    pub material: u32,
    pub geo_normal: V3,
    pub area: f64,
}

/// Surface data at a ray hit.
#[derive(Debug, Clone, Copy)]
pub(crate) struct SurfacePoint {
    pub position: V3,
    /// Winding normal.
    pub geo_normal: V3,
    /// Interpolated normal on the same side as `geo_normal`.
    pub shading_normal: V3,
    pub uv: Vector2<f64>,
    pub material: u32,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Emitter {
    pub triangle: usize,
    pub corners: [V3; 3],
    pub area: f64,
}

/// Render-ready scene: triangles with materials, a camera and the emitter
/// table used for light sampling.
#[derive(Debug, Clone)]
pub struct Scene {
    pub(crate) bvh: Bvh,
    pub(crate) tris: Vec<[V3; 3]>,
    pub(crate) shading: Vec<TriShading>,
    pub(crate) materials: Vec<Material>,
    pub(crate) texture: Option<Texture>,
    pub(crate) emitters: Vec<Emitter>,
    /// Cumulative emitter selection probabilities.
    pub(crate) emitter_cdf: Vec<f64>,
    /// Area density of light sampling on each triangle (zero off emitters).
    pub(crate) area_pdf: Vec<f64>,
    pub(crate) lights: Vec<RectLight>,
    pub(crate) camera: Camera,
    pub(crate) width: usize,
    pub(crate) height: usize,
    pub(crate) tone: ToneMap,
    pub(crate) phong: PhongParams,
    pub(crate) albedo_override: bool,
    /// Ray offset for secondary rays.
    pub(crate) eps: f64,
}

impl Scene {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn tone_map(&self) -> ToneMap {
        self.tone
    }

    pub fn triangle_count(&self) -> usize {
        self.tris.len()
    }

    pub(crate) fn intersect(&self, ray: &Ray, t_max: f64) -> Option<(Hit, SurfacePoint)> {
        let hit = self.bvh.intersect(ray, 0.0, t_max)?;
        Some((hit, self.surface_at(&hit, ray)))
    }

    fn surface_at(&self, hit: &Hit, ray: &Ray) -> SurfacePoint {
        let sh = &self.shading[hit.triangle];
        let (b1, b2) = (hit.u, hit.v);
        let b0 = 1.0 - b1 - b2;
        let mut shading_normal = match sh.normals {
            Some(n) => {
                let n = b0 * n[0] + b1 * n[1] + b2 * n[2];
                if n.norm() > 1e-12 {
                    n.normalize()
                } else {
                    sh.geo_normal
                }
            }
            None => sh.geo_normal,
        };
        if shading_normal.dot(&sh.geo_normal) < 0.0 {
            shading_normal = -shading_normal;
        }
        SurfacePoint {
            position: ray.origin + hit.t * ray.dir,
            geo_normal: sh.geo_normal,
            shading_normal,
            uv: b0 * sh.uvs[0] + b1 * sh.uvs[1] + b2 * sh.uvs[2],
            material: sh.material,
        }
    }

    pub(crate) fn albedo(&self, sp: &SurfacePoint) -> V3 {
        match self.materials[sp.material as usize].albedo {
            Albedo::Constant(c) => V3::from(c),
            Albedo::Texture => self.texture.as_ref().map_or(V3::zeros(), |t| t.lookup(sp.uv)),
        }
    }

    /// Radiance emitted from `sp` towards direction `out`.
    pub(crate) fn emitted(&self, sp: &SurfacePoint, out: &V3) -> V3 {
        let m = &self.materials[sp.material as usize];
        if m.two_sided_emission || sp.geo_normal.dot(out) > 0.0 {
            V3::from(m.emission)
        } else {
            V3::zeros()
        }
    }

    /// Replaces the Phong baseline's parameters.
    pub fn with_phong(mut self, phong: PhongParams) -> Self {
        self.phong = phong;
        self
    }

    /// Drops all lighting and makes every surface show its albedo to the
    /// camera unshaded. Test aid for checking texture mapping.
    #[doc(hidden)]
    pub fn with_emissive_albedo(mut self) -> Self {
        self.emitters.clear();
        self.emitter_cdf.clear();
        self.area_pdf.iter_mut().for_each(|p| *p = 0.0);
        self.lights.clear();
        self.albedo_override = true;
        self.tone = ToneMap::default();
        self
    }
}

/// Incremental scene assembly.
#[derive(Debug, Clone)]
pub struct SceneBuilder {
    tris: Vec<[V3; 3]>,
    shading: Vec<TriShading>,
    materials: Vec<Material>,
    texture: Option<Texture>,
    lights: Vec<RectLight>,
    camera: CameraSpec,
    width: usize,
    height: usize,
    tone: ToneMap,
    phong: PhongParams,
}

impl SceneBuilder {
    pub fn new(width: usize, height: usize, camera: CameraSpec) -> Self {
        Self {
            tris: Vec::new(),
            shading: Vec::new(),
            materials: Vec::new(),
            texture: None,
            lights: Vec::new(),
            camera,
            width,
            height,
            tone: ToneMap::default(),
            phong: PhongParams::default(),
        }
    }

    pub fn tone(mut self, tone: ToneMap) -> Self {
        self.tone = tone;
        self
    }

    pub fn phong(mut self, phong: PhongParams) -> Self {
        self.phong = phong;
        self
    }

    pub fn texture(mut self, img: &Image) -> Self {
        self.texture = Some(Texture::from_image(img));
        self
    }

    pub fn material(&mut self, m: Material) -> u32 {
        self.materials.push(m);
        (self.materials.len() - 1) as u32
    }

    /// Adds a flat-shaded triangle; the winding sets its front face.
    pub fn triangle(&mut self, v: [V3; 3], material: u32) {
        self.push(v, None, [Vector2::zeros(); 3], material);
    }

    /// Adds a quad `a, b, c, d` (counter-clockwise seen from the front).
    pub fn quad(&mut self, q: [V3; 4], material: u32) {
        self.triangle([q[0], q[1], q[2]], material);
        self.triangle([q[0], q[2], q[3]], material);
    }

    pub fn mesh(&mut self, mesh: &HeightfieldMesh, material: u32) {
        for t in &mesh.triangles {
            let [a, b, c] = t.map(|i| i as usize);
            self.push(
                [mesh.vertices[a], mesh.vertices[b], mesh.vertices[c]],
                Some([mesh.normals[a], mesh.normals[b], mesh.normals[c]]),
                [mesh.uvs[a], mesh.uvs[b], mesh.uvs[c]],
                material,
            );
        }
    }

    /// Adds a one-sided emitting rectangle.
    pub fn rect_light(&mut self, light: RectLight) {
        let m = self.material(Material::emitter(light.radiance));
        self.quad(light.corners(), m);
        self.lights.push(light);
    }

    fn push(&mut self, v: [V3; 3], normals: Option<[V3; 3]>, uvs: [Vector2<f64>; 3], material: u32) {
        let cross = (v[1] - v[0]).cross(&(v[2] - v[0]));
        let area = 0.5 * cross.norm();
        if !(area > 0.0) {
            return;
        }
        self.tris.push(v);
        self.shading.push(TriShading {
            normals,
            uvs,
            material,
            geo_normal: cross.normalize(),
            area,
        });
    }

    pub fn build(self) -> Result<Scene, RenderError> {
        if self.width == 0 || self.height == 0 {
            return Err(RenderError::Invalid(format!("image size must be positive, got {}x{}", self.width, self.height)));
        }
        let camera = Camera::new(&self.camera, self.width, self.height)?;
        let mut emitters = Vec::new();
        let mut weights = Vec::new();
        for (i, sh) in self.shading.iter().enumerate() {
            let e = V3::from(self.materials[sh.material as usize].emission);
            let power = sh.area * (e.x + e.y + e.z);
            if power > 0.0 {
                emitters.push(Emitter {
                    triangle: i,
                    corners: self.tris[i],
                    area: sh.area,
                });
                weights.push(power);
            }
        }
        let total: f64 = weights.iter().sum();
        let emitter_pick: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let mut acc = 0.0;
        let emitter_cdf = emitter_pick
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        let mut area_pdf = vec![0.0; self.tris.len()];
        for (e, p) in emitters.iter().zip(&emitter_pick) {
            area_pdf[e.triangle] = p / e.area;
        }
        let (lo, hi) = self.tris.iter().flatten().fold(
            (V3::repeat(f64::INFINITY), V3::repeat(f64::NEG_INFINITY)),
            |(lo, hi), p| (lo.inf(p), hi.sup(p)),
        );
        let scale = if self.tris.is_empty() { 1.0 } else { (hi - lo).norm().max(1e-9) };
        Ok(Scene {
            bvh: Bvh::build(self.tris.clone()),
            tris: self.tris,
            shading: self.shading,
            materials: self.materials,
            texture: self.texture,
            emitters,
            emitter_cdf,
            area_pdf,
            lights: self.lights,
            camera,
            width: self.width,
            height: self.height,
            tone: self.tone,
            phong: self.phong,
            albedo_override: false,
            eps: 1e-7 * scale,
        })
    }
}

/// Scene of the elastomer mesh wrapped with `texture`, lit and viewed as
/// described by `profile`.
pub fn build_scene(mesh: &HeightfieldMesh, texture: Option<&Image>, profile: &SensorProfile) -> Result<Scene, RenderError> {
    let texture = texture.ok_or_else(|| RenderError::Invalid("scene needs a base texture".into()))?;
    if texture.width == 0 || texture.height == 0 || texture.pixels.len() != texture.width * texture.height {
        return Err(RenderError::Invalid(format!("texture {}x{} is empty or malformed", texture.width, texture.height)));
    }
    if mesh.triangles.is_empty() {
        return Err(RenderError::Invalid("mesh has no triangles".into()));
    }
    profile.validate()?;
    let [w, h] = profile.resolution;
    let (lo, hi) = mesh.extent();
    let camera = profile
        .camera
        .unwrap_or_else(|| fit_camera([lo.x, lo.y], [hi.x, hi.y], w, h));
    let cam = Camera::new(&camera, w, h)?;
    if let Some(bad) = mesh.normals.iter().position(|n| n.dot(&cam.forward()) >= 0.0) {
        return Err(RenderError::Invalid(format!("mesh normal {bad} faces away from the camera")));
    }
    let center = 0.5 * (lo + hi);
    let exposure = profile
        .exposure
        .unwrap_or_else(|| auto_exposure(&profile.lights, V3::new(center.x, center.y, 0.0)));
    let mut b = SceneBuilder::new(w, h, camera)
        .tone(ToneMap {
            exposure,
            gamma: profile.gamma,
        })
        .phong(profile.phong)
        .texture(texture);
    let gel = b.material(Material {
        albedo: Albedo::Texture,
        emission: [0.0; 3],
        two_sided_emission: false,
    });
    b.mesh(mesh, gel);
    for l in &profile.lights {
        b.rect_light(*l);
    }
    b.build()
}

/// Exposure mapping the unshadowed radiance of a white Lambertian patch
/// facing +z at `at` to 1 (channel mean).
pub fn auto_exposure(lights: &[RectLight], at: V3) -> f64 {
    const N: usize = 64;
    let mut e = V3::zeros();
    for l in lights {
        let (c, u, v) = (V3::from(l.corner), V3::from(l.edge_u), V3::from(l.edge_v));
        let n = l.normal();
        let da = l.area() / (N * N) as f64;
        for i in 0..N {
            for j in 0..N {
                let y = c + (i as f64 + 0.5) / N as f64 * u + (j as f64 + 0.5) / N as f64 * v;
                let d = y - at;
                let r2 = d.norm_squared();
                let wi = d / r2.sqrt();
                let cos_x = wi.z.max(0.0);
                let cos_y = (-wi).dot(&n).max(0.0);
                e += V3::from(l.radiance) * cos_x * cos_y / r2 * da;
            }
        }
    }
    let radiance = e / std::f64::consts::PI;
    let mean = radiance.sum() / 3.0;
    if mean > 0.0 {
        1.0 / mean
    } else {
        1.0
    }
}
