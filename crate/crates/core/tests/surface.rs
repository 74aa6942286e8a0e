use nalgebra::Vector3;

use tacsim::mpm::{Body, Particle};
use tacsim::surface::{depth_to_mesh, extract_surface_depth, perturb_depth, RasterSpec};

const R: f64 = 4.0;
const D: f64 = 1.0;
const TOP: f64 = 5.0;

/// Surface lattice over `[-5, 5]²` indented by a sphere of radius `R`
/// pressed `D` deep at the origin.
fn capped_surface(spacing: f64) -> Vec<Particle> {
    let n = (10.0 / spacing).round() as i64;
    let mut ps = Vec::new();
    for i in 0..=n {
        for j in 0..=n {
            let (x, y) = (-5.0 + i as f64 * spacing, -5.0 + j as f64 * spacing);
            let r2 = x * x + y * y;
            let dent = if r2 < R * R { (D - (R - (R * R - r2).sqrt())).max(0.0) } else { 0.0 };
            ps.push(Particle::at_rest(Vector3::new(x, y, TOP - dent), 1.0, 1.0, Body::Elastomer));
        }
    }
    ps
}

#[test]
fn spherical_cap_depth_and_contact_radius() {
    let ps = capped_surface(0.1);
    let surface: Vec<usize> = (0..ps.len()).collect();
    let raster = RasterSpec::centered(161, 161, 0.05, [0.0, 0.0]);
    let depth = extract_surface_depth(&ps, &surface, TOP, &raster).unwrap();
    assert!((depth.max_depth() - D).abs() <= 0.1 * D, "{}", depth.max_depth());
    let inside = depth.values.iter().filter(|v| **v > D / 10.0).count();
    let radius = (inside as f64 * raster.pitch * raster.pitch / std::f64::consts::PI).sqrt();
    let expect = (D * (2.0 * R - D)).sqrt();
    assert!((radius / expect - 1.0).abs() <= 0.05, "{radius} {expect}");
}

#[test]
fn extraction_and_meshing_are_deterministic() {
    let ps = capped_surface(0.25);
    let surface: Vec<usize> = (0..ps.len()).collect();
    let raster = RasterSpec::centered(40, 30, 0.2, [0.3, -0.1]);
    let a = extract_surface_depth(&ps, &surface, TOP, &raster).unwrap();
    let b = extract_surface_depth(&ps, &surface, TOP, &raster).unwrap();
    assert_eq!(a, b);
    let pa = perturb_depth(&a, 1e-4, 3).unwrap();
    assert_eq!(pa, perturb_depth(&b, 1e-4, 3).unwrap());
    assert_eq!(depth_to_mesh(&pa).unwrap(), depth_to_mesh(&pa).unwrap());
}

#[test]
fn mesh_follows_the_dent() {
    let ps = capped_surface(0.25);
    let surface: Vec<usize> = (0..ps.len()).collect();
    let raster = RasterSpec::centered(41, 41, 0.2, [0.0, 0.0]);
    let depth = extract_surface_depth(&ps, &surface, TOP, &raster).unwrap();
    let mesh = depth_to_mesh(&depth).unwrap();
    assert_eq!(mesh.vertices.len(), 41 * 41);
    assert_eq!(mesh.triangles.len(), 2 * 40 * 40);
    let lowest = mesh.vertices.iter().map(|v| v.z).fold(f64::INFINITY, f64::min);
    assert!((lowest + depth.max_depth()).abs() < 1e-12);
    assert!(mesh.normals.iter().all(|n| n.z > 0.0));
}
