//! Unidirectional path tracing with next-event estimation.

use std::f64::consts::PI;
use std::sync::atomic::{AtomicUsize, Ordering};

use nalgebra::Vector3;
use rand::Rng;
use rand_pcg::Pcg64Mcg;
use rayon::prelude::*;

use super::bvh::Ray;
use super::image::{Image, RadianceImage};
use super::scene::{Scene, SurfacePoint};
use super::RenderError;

type V3 = Vector3<f64>;

/// Bounce count after which paths are terminated by Russian roulette.
pub const ROULETTE_DEPTH: usize = 3;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent generator for one sample of one pixel.
pub fn sample_rng(seed: u64, pixel: u64, sample: u64) -> Pcg64Mcg {
    let a = splitmix64(splitmix64(splitmix64(seed) ^ pixel) ^ sample);
    let b = splitmix64(a ^ 0x6a09_e667_f3bc_c909);
    Pcg64Mcg::new(((a as u128) << 64) | b as u128)
}

fn check_args(spp: usize, max_bounces: usize) -> Result<(), RenderError> {
    if spp == 0 {
        return Err(RenderError::Invalid("samples per pixel must be at least 1".into()));
    }
    if max_bounces == 0 {
        return Err(RenderError::Invalid("max bounces must be at least 1".into()));
    }
    Ok(())
}

/// Mean radiance per pixel before tone mapping.
pub fn render_radiance(scene: &Scene, spp: usize, max_bounces: usize, seed: u64) -> Result<RadianceImage, RenderError> {
    check_args(spp, max_bounces)?;
    let (w, h) = (scene.width, scene.height);
    let rejected = AtomicUsize::new(0);
    let mut data = vec![V3::zeros(); w * h];
    data.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        for (x, out) in row.iter_mut().enumerate() {
            let pixel = (y * w + x) as u64;
            let mut sum = V3::zeros();
            let mut kept = 0usize;
            for s in 0..spp {
                let mut rng = sample_rng(seed, pixel, s as u64);
                let (jx, jy): (f64, f64) = (rng.gen(), rng.gen());
                let ray = scene.camera.ray((x as f64 + jx) / w as f64, (y as f64 + jy) / h as f64);
                let l = radiance(scene, ray, max_bounces, &mut rng);
                if l.iter().all(|c| c.is_finite()) {
                    sum += l;
                    kept += 1;
                }
            }
            if kept < spp {
                rejected.fetch_add(spp - kept, Ordering::Relaxed);
            }
            *out = if kept > 0 { sum / kept as f64 } else { V3::zeros() };
        }
    });
    let rejected = rejected.into_inner();
    if rejected > 0 {
        log::warn!("rejected {rejected} non-finite radiance samples");
    }
    Ok(RadianceImage {
        width: w,
        height: h,
        data,
    })
}

/// Path-traced image tone mapped with the scene's exposure.
pub fn render_path_traced(scene: &Scene, spp: usize, max_bounces: usize, seed: u64) -> Result<Image, RenderError> {
    Ok(scene.tone.apply(&render_radiance(scene, spp, max_bounces, seed)?))
}

fn power_heuristic(a: f64, b: f64) -> f64 {
    let (a2, b2) = (a * a, b * b);
    if a2 + b2 > 0.0 {
        a2 / (a2 + b2)
    } else {
        0.0
    }
}

/// Cosine-weighted direction about `n`.
fn sample_cosine(n: &V3, rng: &mut Pcg64Mcg) -> V3 {
    let (r1, r2): (f64, f64) = (rng.gen(), rng.gen());
    let r = r1.sqrt();
    let phi = 2.0 * PI * r2;
    let t = if n.x.abs() > 0.9 { V3::y() } else { V3::x() };
    let b1 = n.cross(&t).normalize();
    let b2 = n.cross(&b1);
    (r * phi.cos() * b1 + r * phi.sin() * b2 + (1.0 - r1).max(0.0).sqrt() * n).normalize()
}

struct LightSample {
    point: V3,
    normal: V3,
    triangle: usize,
    pdf_area: f64,
}

fn sample_light(scene: &Scene, rng: &mut Pcg64Mcg) -> Option<LightSample> {
    if scene.emitters.is_empty() {
        return None;
    }
    let u: f64 = rng.gen();
    let k = scene
        .emitter_cdf
        .partition_point(|c| *c < u)
        .min(scene.emitters.len() - 1);
    let e = &scene.emitters[k];
    let (r1, r2): (f64, f64) = (rng.gen(), rng.gen());
    let su = r1.sqrt();
    let (b0, b1) = (1.0 - su, r2 * su);
    let [a, b, c] = e.corners;
    Some(LightSample {
        point: b0 * a + b1 * b + (1.0 - b0 - b1) * c,
        normal: scene.shading[e.triangle].geo_normal,
        triangle: e.triangle,
        pdf_area: scene.area_pdf[e.triangle],
    })
}

/// Radiance arriving at the camera along `ray`. `max_bounces` limits the
/// number of diffuse reflections on a path.
fn radiance(scene: &Scene, mut ray: Ray, max_bounces: usize, rng: &mut Pcg64Mcg) -> V3 {
    let mut total = V3::zeros();
    let mut beta = V3::repeat(1.0);
    let mut bsdf_pdf: Option<f64> = None;
    for depth in 0.. {
        let Some((hit, sp)) = scene.intersect(&ray, f64::INFINITY) else {
            break;
        };
        if scene.albedo_override {
            return scene.albedo(&sp);
        }
        let wo = -ray.dir;
        let le = scene.emitted(&sp, &wo);
        if le != V3::zeros() {
            let weight = match bsdf_pdf {
                None => 1.0,
                Some(pb) => {
                    let cos_l = sp.geo_normal.dot(&ray.dir).abs();
                    let pl = if cos_l > 0.0 {
                        scene.area_pdf[hit.triangle] * hit.t * hit.t / cos_l
                    } else {
                        0.0
                    };
                    power_heuristic(pb, pl)
                }
            };
            total += beta.component_mul(&le) * weight;
        }
        if depth >= max_bounces {
            break;
        }
        let albedo = scene.albedo(&sp);
        if albedo.max() <= 0.0 {
            break;
        }
        let (n, ng) = facing(&sp, &wo);
        let origin = sp.position + scene.eps * ng;
        total += beta.component_mul(&direct_light(scene, &origin, &n, &ng, &albedo, rng));

        let wi = sample_cosine(&n, rng);
        if ng.dot(&wi) <= 0.0 {
            break;
        }
        // f·cos/pdf reduces to the albedo for cosine sampling
        beta = beta.component_mul(&albedo);
        bsdf_pdf = Some(n.dot(&wi) / PI);
        if depth + 1 >= ROULETTE_DEPTH {
            // surviving with the local albedo keeps the throughput near one
            let q = albedo.max().min(0.95);
            if rng.gen::<f64>() >= q {
                break;
            }
            beta /= q;
        }
        ray = Ray { origin, dir: wi };
    }
    total
}

/// Shading and geometric normals flipped to the side of `wo`.
fn facing(sp: &SurfacePoint, wo: &V3) -> (V3, V3) {
    if sp.geo_normal.dot(wo) < 0.0 {
        (-sp.shading_normal, -sp.geo_normal)
    } else {
        (sp.shading_normal, sp.geo_normal)
    }
}

/// Light-sampled direct illumination at a diffuse point, MIS weighted
/// against cosine sampling.
fn direct_light(scene: &Scene, origin: &V3, n: &V3, ng: &V3, albedo: &V3, rng: &mut Pcg64Mcg) -> V3 {
    let Some(ls) = sample_light(scene, rng) else {
        return V3::zeros();
    };
    let d = ls.point - origin;
    let dist2 = d.norm_squared();
    let dist = dist2.sqrt();
    if !(dist > 0.0) {
        return V3::zeros();
    }
    let wi = d / dist;
    let cos_x = n.dot(&wi);
    let cos_y = -ls.normal.dot(&wi);
    let mat = &scene.materials[scene.shading[ls.triangle].material as usize];
    let emits = mat.two_sided_emission || cos_y > 0.0;
    if cos_x <= 0.0 || ng.dot(&wi) <= 0.0 || !emits || cos_y == 0.0 {
        return V3::zeros();
    }
    let shadow = Ray {
        origin: *origin,
        dir: wi,
    };
    if scene.bvh.occluded(&shadow, 0.0, dist * (1.0 - 1e-9) - scene.eps) {
        return V3::zeros();
    }
    let pdf_light = ls.pdf_area * dist2 / cos_y.abs();
    let weight = power_heuristic(pdf_light, cos_x / PI);
    V3::from(mat.emission).component_mul(albedo) * (cos_x / PI / pdf_light * weight)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::render::fixtures;

    #[test]
    fn zero_lights_give_black() {
        let scene = fixtures::v_groove(8, 8, 0.0);
        let img = render_path_traced(&scene, 4, 4, 0).unwrap();
        assert!(img.pixels.iter().all(|p| *p == [0, 0, 0]));
    }

    #[test]
    fn rejects_bad_arguments() {
        let scene = fixtures::v_groove(2, 2, 1.0);
        assert!(render_path_traced(&scene, 0, 4, 0).is_err());
        assert!(render_path_traced(&scene, 1, 0, 0).is_err());
    }

    #[test]
    fn streams_differ_per_pixel_and_sample() {
        let a: u64 = sample_rng(0, 0, 0).gen();
        assert_eq!(a, sample_rng(0, 0, 0).gen::<u64>());
        assert_ne!(a, sample_rng(0, 1, 0).gen::<u64>());
        assert_ne!(a, sample_rng(0, 0, 1).gen::<u64>());
        assert_ne!(a, sample_rng(1, 0, 0).gen::<u64>());
    }

    #[test]
    fn cosine_samples_stay_in_hemisphere() {
        let mut rng = sample_rng(3, 4, 5);
        let n = V3::new(0.3, -0.2, 0.9).normalize();
        let mut mean_cos = 0.0;
        for _ in 0..20_000 {
            let w = sample_cosine(&n, &mut rng);
            assert!((w.norm() - 1.0).abs() < 1e-12);
            let c = w.dot(&n);
            assert!(c >= 0.0);
            mean_cos += c;
        }
        // E[cos θ] under the cos/π density is 2/3
        assert!((mean_cos / 20_000.0 - 2.0 / 3.0).abs() < 0.01);
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let scene = fixtures::v_groove(12, 10, 1.0);
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| render_radiance(&scene, 8, 4, 7).unwrap());
        let b = four.install(|| render_radiance(&scene, 8, 4, 7).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn energy_stays_under_furnace_bound() {
        let scene = fixtures::furnace_box(4, 4, 0.5, 1.0);
        let r = render_radiance(&scene, 256, 64, 1).unwrap();
        for c in &r.data {
            for k in 0..3 {
                assert!(c[k] <= 2.0 * 1.1, "{c:?}");
            }
        }
    }
}
