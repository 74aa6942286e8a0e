use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{sdf_eval, GeometryError, ShapeSpec};
use crate::mpm::{Body, Particle};

/// Placement of a shape: translation plus a rotation about the sensor normal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Pose {
    pub translation: [f64; 3],
    /// Degrees, normalized to (−180, 180] on use.
    pub rotation: f64,
}

impl Default for Pose {
    fn default() -> Self {
        Self {
            translation: [0.0; 3],
            rotation: 0.0,
        }
    }
}

impl Pose {
    pub fn normalized_rotation(&self) -> f64 {
        let a = self.rotation.rem_euclid(360.0);
        if a > 180.0 {
            a - 360.0
        } else {
            a
        }
    }

    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        let (s, c) = self.normalized_rotation().to_radians().sin_cos();
        Vector3::new(
            c * p.x - s * p.y + self.translation[0],
            s * p.x + c * p.y + self.translation[1],
            p.z + self.translation[2],
        )
    }
}

/// Seeded particles of one body.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleCloud {
    pub particles: Vec<Particle>,
    pub body: Body,
    /// Lattice spacing used for seeding (mm).
    pub spacing: [f64; 3],
    /// Indices of the top lattice layer, when the cloud is a block.
    pub surface: Vec<usize>,
}

impl ParticleCloud {
    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn translate(&mut self, by: Vector3<f64>) {
        for p in &mut self.particles {
            p.position += by;
        }
    }

    /// Axis-aligned bounds `(min, max)`.
    pub fn bounds(&self) -> (Vector3<f64>, Vector3<f64>) {
        self.particles.iter().fold(
            (Vector3::repeat(f64::INFINITY), Vector3::repeat(f64::NEG_INFINITY)),
            |(lo, hi), p| (lo.inf(&p.position), hi.sup(&p.position)),
        )
    }
}

/// Seeds a shape on a regular lattice anchored at its bounding-box corner,
/// keeping points with `sdf ≤ 0`, then applies `pose`.
pub fn sample_particles(
    shape: &ShapeSpec,
    pose: &Pose,
    spacing: f64,
    density: f64,
) -> Result<ParticleCloud, GeometryError> {
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(GeometryError::Sampling(format!("spacing must be positive, got {spacing}")));
    }
    if !(density > 0.0) {
        return Err(GeometryError::Sampling(format!("density must be positive, got {density}")));
    }
    shape.validate()?;
    let half = shape.half_extents();
    let counts: Vec<usize> = (0..3)
        .map(|a| (2.0 * half[a] / spacing + 1e-9).floor() as usize + 1)
        .collect();
    let volume = spacing * spacing * spacing;
    let mass = density * volume;

    let particles: Vec<Particle> = (0..counts[0])
        .into_par_iter()
        .flat_map_iter(|i| {
            let mut slab = Vec::new();
            for j in 0..counts[1] {
                for k in 0..counts[2] {
                    let local = Vector3::new(
                        -half.x + i as f64 * spacing,
                        -half.y + j as f64 * spacing,
                        -half.z + k as f64 * spacing,
                    );
                    if sdf_eval(shape, &local) <= 0.0 {
                        slab.push(Particle::at_rest(pose.apply(&local), mass, volume, Body::Object));
                    }
                }
            }
            slab
        })
        .collect();

    if particles.is_empty() {
        return Err(GeometryError::Sampling(format!(
            "{} is smaller than the sampling spacing {spacing}",
            shape.name()
        )));
    }
    Ok(ParticleCloud {
        particles,
        body: Body::Object,
        spacing: [spacing; 3],
        surface: Vec::new(),
    })
}

/// Regular elastomer lattice of `counts` particles spanning `extent` from the
/// origin. Particle `(i, j, k)` has index `(i·ny + j)·nz + k`.
pub fn elastomer_block(
    extent: [f64; 3],
    counts: [usize; 3],
    density: f64,
) -> Result<ParticleCloud, GeometryError> {
    if counts.iter().any(|&c| c < 2) {
        return Err(GeometryError::Sampling(format!(
            "elastomer needs at least 2 particles per axis, got {counts:?}"
        )));
    }
    if extent.iter().any(|&e| !(e > 0.0)) {
        return Err(GeometryError::Sampling(format!("extent must be positive, got {extent:?}")));
    }
    let spacing = [0, 1, 2].map(|a| extent[a] / (counts[a] - 1) as f64);
    let volume = spacing[0] * spacing[1] * spacing[2];
    let mass = density * volume;
    let mut particles = Vec::with_capacity(counts[0] * counts[1] * counts[2]);
    let mut surface = Vec::with_capacity(counts[0] * counts[1]);
    for i in 0..counts[0] {
        for j in 0..counts[1] {
            for k in 0..counts[2] {
                if k == counts[2] - 1 {
                    surface.push(particles.len());
                }
                let x = Vector3::new(
                    i as f64 * spacing[0],
                    j as f64 * spacing[1],
                    k as f64 * spacing[2],
                );
                particles.push(Particle::at_rest(x, mass, volume, Body::Elastomer));
            }
        }
    }
    Ok(ParticleCloud {
        particles,
        body: Body::Elastomer,
        spacing,
        surface,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ShapeKind;

    fn cube(side: f64) -> ShapeSpec {
        ShapeSpec {
            kind: ShapeKind::Prism {
                size: [side; 3],
            },
            edge_round_radius: 0.0,
        }
    }

    #[test]
    fn cube_lattice_counts_include_faces() {
        // (side / spacing + 1)^3 lattice points, faces included
        let c = sample_particles(&cube(4.0), &Pose::default(), 0.5, 1.0).unwrap();
        assert_eq!(c.len(), 729);
        let c = sample_particles(&cube(1.0), &Pose::default(), 0.125, 1.0).unwrap();
        assert_eq!(c.len(), 729);
        let c = sample_particles(&cube(1.0), &Pose::default(), 0.5, 1.0).unwrap();
        assert_eq!(c.len(), 27);
    }

    #[test]
    fn sphere_count_matches_volume() {
        let s = ShapeSpec {
            kind: ShapeKind::Sphere { radius: 2.0 },
            edge_round_radius: 0.0,
        };
        let c = sample_particles(&s, &Pose::default(), 0.25, 1.0).unwrap();
        let expected = 4.0 / 3.0 * std::f64::consts::PI * 8.0 / 0.25f64.powi(3);
        assert!((c.len() as f64 - expected).abs() < 0.1 * expected, "{}", c.len());
        assert!((expected - 2144.66).abs() < 0.01);
    }

    #[test]
    fn full_turn_is_identity() {
        let s = ShapeSpec::preset("pacman").unwrap();
        let a = sample_particles(&s, &Pose { translation: [1.0, 2.0, 3.0], rotation: 0.0 }, 0.5, 1.0).unwrap();
        let b = sample_particles(&s, &Pose { translation: [1.0, 2.0, 3.0], rotation: 360.0 }, 0.5, 1.0).unwrap();
        assert_eq!(a.len(), b.len());
        for (p, q) in a.particles.iter().zip(&b.particles) {
            assert!((p.position - q.position).norm() < 1e-9);
        }
    }

    #[test]
    fn tiny_shape_is_rejected() {
        let s = ShapeSpec {
            kind: ShapeKind::Sphere { radius: 0.1 },
            edge_round_radius: 0.0,
        };
        // lattice points at -0.1 and 0.09 per axis all lie outside the ball
        assert!(sample_particles(&s, &Pose::default(), 0.19, 1.0).is_err());
        assert!(sample_particles(&s, &Pose::default(), 0.0, 1.0).is_err());
    }

    #[test]
    fn block_counts_and_surface() {
        let b = elastomer_block([1.0, 1.0, 1.0], [2, 2, 2], 1.0).unwrap();
        assert_eq!(b.len(), 8);
        assert_eq!(b.surface, vec![1, 3, 5, 7]);
        let b = elastomer_block([20.0, 20.0, 4.0], [101, 101, 21], 1.0).unwrap();
        assert_eq!(b.len(), 214_221);
        assert_eq!(b.surface.len(), 101 * 101);
        assert!(b.surface.iter().all(|&i| (b.particles[i].position.z - 4.0).abs() < 1e-12));
        assert!((b.particles[0].mass - 0.008).abs() < 1e-15);
        assert!(elastomer_block([1.0; 3], [1, 2, 2], 1.0).is_err());
    }

    #[test]
    fn paper_scale_block() {
        let b = elastomer_block([20.0, 20.0, 4.0], [201, 201, 41], 1.0).unwrap();
        assert_eq!(b.len(), 1_656_441);
    }
}
