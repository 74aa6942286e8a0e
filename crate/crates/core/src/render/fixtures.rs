//! Small reference scenes with known light transport.

use nalgebra::Vector3;

use super::scene::{CameraSpec, Material, RectLight, Scene, SceneBuilder};

type V3 = Vector3<f64>;

/// Camera at the center of the cube `[-1, 1]³`, whose inward faces are
/// Lambertian with `albedo` and emit `radiance`.
pub fn furnace_box(width: usize, height: usize, albedo: f64, radiance: f64) -> Scene {
    let cam = CameraSpec {
        position: [0.0, 0.0, 0.0],
        look: [0.3, -0.2, -1.0],
        up: [0.0, 1.0, 0.0],
        vfov_degrees: 90.0,
    };
    let mut b = SceneBuilder::new(width, height, cam);
    let m = b.material(Material {
        emission: [radiance; 3],
        ..Material::diffuse([albedo; 3])
    });
    for axis in 0..3 {
        for sign in [-1.0, 1.0] {
            b.quad(inward_face(axis, sign), m);
        }
    }
    b.build().expect("valid fixture")
}

/// Face of the cube at `x[axis] = sign`, wound to face the center.
fn inward_face(axis: usize, sign: f64) -> [V3; 4] {
    let (a1, a2) = ((axis + 1) % 3, (axis + 2) % 3);
    let corner = |s: f64, t: f64| {
        let mut p = V3::zeros();
        p[axis] = sign;
        p[a1] = s;
        p[a2] = t;
        p
    };
    let q = [corner(-1.0, -1.0), corner(1.0, -1.0), corner(1.0, 1.0), corner(-1.0, 1.0)];
    // e_a1 × e_a2 = e_axis points outward on the positive face
    if sign > 0.0 {
        [q[0], q[3], q[2], q[1]]
    } else {
        q
    }
}

/// Open 90° groove along y (faces `z = |x|`, `|x| ≤ 1`, `|y| ≤ 1`) of
/// albedo 0.8 under a small overhead light of the given radiance, seen
/// from above.
pub fn v_groove(width: usize, height: usize, radiance: f64) -> Scene {
    let cam = CameraSpec {
        position: [0.0, 0.0, 6.0],
        look: [0.0, 0.0, -1.0],
        up: [0.0, 1.0, 0.0],
        vfov_degrees: 2.0 * (1.0f64 / 5.0).atan().to_degrees(),
    };
    let mut b = SceneBuilder::new(width, height, cam);
    let gray = b.material(Material::diffuse([0.8; 3]));
    let (l, r) = (-1.0, 1.0);
    b.quad(
        [V3::new(l, -1.0, 1.0), V3::new(0.0, -1.0, 0.0), V3::new(0.0, 1.0, 0.0), V3::new(l, 1.0, 1.0)],
        gray,
    );
    b.quad(
        [V3::new(0.0, -1.0, 0.0), V3::new(r, -1.0, 1.0), V3::new(r, 1.0, 1.0), V3::new(0.0, 1.0, 0.0)],
        gray,
    );
    if radiance > 0.0 {
        b.rect_light(RectLight {
            corner: [-0.25, 0.25, 3.0],
            edge_u: [0.5, 0.0, 0.0],
            edge_v: [0.0, -0.5, 0.0],
            radiance: [radiance; 3],
        });
    }
    b.build().expect("valid fixture")
}

/// Flat square `[-2, 2]²` at z = 0 with `albedo`, a downward square light of
/// side `side` centered at height `height`, and a camera looking straight
/// down from z = 4 framing the square.
pub fn overhead_patch(pixels: usize, albedo: f64, side: f64, height: f64) -> Scene {
    let cam = CameraSpec {
        position: [0.0, 0.0, 4.0],
        look: [0.0, 0.0, -1.0],
        up: [0.0, 1.0, 0.0],
        vfov_degrees: 2.0 * (2.0f64 / 4.0).atan().to_degrees(),
    };
    let mut b = SceneBuilder::new(pixels, pixels, cam);
    let m = b.material(Material::diffuse([albedo; 3]));
    b.quad(
        [V3::new(-2.0, -2.0, 0.0), V3::new(2.0, -2.0, 0.0), V3::new(2.0, 2.0, 0.0), V3::new(-2.0, 2.0, 0.0)],
        m,
    );
    let h = 0.5 * side;
    b.rect_light(RectLight {
        corner: [-h, h, height],
        edge_u: [side, 0.0, 0.0],
        edge_v: [0.0, -side, 0.0],
        radiance: [1.0; 3],
    });
    b.build().expect("valid fixture")
}
