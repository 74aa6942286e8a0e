use std::f64::consts::PI;

use nalgebra::Vector3;
use rayon::prelude::*;

use super::image::{Image, RadianceImage};
use super::scene::Scene;

type V3 = Vector3<f64>;

/// Local Phong shading through pixel centers. Each rectangular light acts as
/// a point at its center with Lambertian intensity `L·A·cos θ`. No shadows
/// and no interreflection.
pub fn render_phong(scene: &Scene) -> Image {
    scene.tone.apply(&phong_radiance(scene))
}

pub fn phong_radiance(scene: &Scene) -> RadianceImage {
    let (w, h) = (scene.width, scene.height);
    let p = scene.phong;
    // ambient is specified in display units
    let ambient = p.ambient / scene.tone.exposure;
    let mut data = vec![V3::zeros(); w * h];
    data.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        for (x, out) in row.iter_mut().enumerate() {
            let ray = scene.camera.ray((x as f64 + 0.5) / w as f64, (y as f64 + 0.5) / h as f64);
            let Some((_, sp)) = scene.intersect(&ray, f64::INFINITY) else {
                continue;
            };
            let albedo = scene.albedo(&sp);
            if scene.albedo_override {
                *out = albedo;
                continue;
            }
            let view = -ray.dir;
            let n = if sp.geo_normal.dot(&view) < 0.0 {
                -sp.shading_normal
            } else {
                sp.shading_normal
            };
            let mut c = ambient * albedo;
            for l in &scene.lights {
                let d = l.center() - sp.position;
                let r2 = d.norm_squared();
                let dir = d / r2.sqrt();
                let cos_l = (-l.normal().dot(&dir)).max(0.0);
                let n_dot_l = n.dot(&dir).max(0.0);
                if cos_l == 0.0 || n_dot_l == 0.0 {
                    continue;
                }
                let e = V3::from(l.radiance) * (l.area() * cos_l / r2);
                c += p.diffuse * albedo.component_mul(&e) * (n_dot_l / PI);
                let reflected = 2.0 * n_dot_l * n - dir;
                let spec = reflected.dot(&view).max(0.0).powf(p.shininess);
                c += e * (p.specular * spec / PI);
            }
            *out = c;
        }
    });
    RadianceImage {
        width: w,
        height: h,
        data,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::render::fixtures::overhead_patch;
    use crate::render::scene::PhongParams;

    fn matte(mut s: Scene) -> Scene {
        s.phong = PhongParams {
            ambient: 0.0,
            diffuse: 1.0,
            specular: 0.0,
            shininess: 1.0,
        };
        s
    }

    #[test]
    fn proportional_to_albedo() {
        let a = phong_radiance(&matte(overhead_patch(9, 0.25, 0.1, 20.0)));
        let b = phong_radiance(&matte(overhead_patch(9, 0.5, 0.1, 20.0)));
        for (x, y) in a.data.iter().zip(&b.data) {
            assert!((2.0 * x - y).norm() < 1e-12);
        }
        // center pixel: E = L·A/h², radiance ρE/π
        let c = b.get(4, 4);
        assert!((c.x - 0.5 * 0.01 / 400.0 / PI).abs() < 1e-12);
        // a distant light gives a nearly uniform image
        let spread = b.data.iter().map(|v| v.x).fold(0.0, f64::max) / b.data.iter().map(|v| v.x).fold(f64::INFINITY, f64::min);
        assert!(spread < 1.05);
    }

    #[test]
    fn back_lit_points_get_no_diffuse() {
        let mut s = matte(overhead_patch(5, 0.5, 0.1, 2.0));
        // light below the surface, facing up
        s.lights[0].corner = [-0.05, -0.05, -1.0];
        s.lights[0].edge_u = [0.1, 0.0, 0.0];
        s.lights[0].edge_v = [0.0, 0.1, 0.0];
        assert!(phong_radiance(&s).data.iter().all(|c| *c == V3::zeros()));
    }
}
