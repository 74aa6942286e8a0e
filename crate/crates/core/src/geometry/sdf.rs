//! Signed distance functions of the indenter shapes.
//!
//! All shapes are centered on their bounding box at the origin, with the
//! sensor normal along +z. Extruded profiles (moon, pacman, dot-in, cylinder)
//! span `|z| ≤ height/2`. Edge rounding erodes the hard shape by the rounding
//! radius and then dilates it back, which keeps the outer dimensions.

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use super::GeometryError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ShapeKind {
    Sphere {
        radius: f64,
    },
    Cylinder {
        radius: f64,
        height: f64,
    },
    /// Ring lying in the sensor plane.
    Torus {
        major_radius: f64,
        minor_radius: f64,
    },
    /// Rectangular prism.
    Prism {
        size: [f64; 3],
    },
    /// Crescent: a disc minus a second disc shifted along +x.
    Moon {
        radius: f64,
        cut_radius: f64,
        cut_offset: f64,
        height: f64,
    },
    /// Disc minus a wedge opening towards +x.
    Pacman {
        radius: f64,
        mouth_degrees: f64,
        height: f64,
    },
    /// Annulus: a disc with a centered hole.
    DotIn {
        radius: f64,
        inner_radius: f64,
        height: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShapeSpec {
    #[serde(flatten)]
    pub kind: ShapeKind,
    #[serde(default = "default_round")]
    pub edge_round_radius: f64,
}

fn default_round() -> f64 {
    0.5
}

/// Names accepted by [`ShapeSpec::preset`].
pub const SHAPE_NAMES: [&str; 7] = [
    "sphere", "cylinder", "torus", "prism", "moon", "pacman", "dot_in",
];

impl ShapeSpec {
    /// Default dimensions for a named shape: 4 mm disc radius, 6 mm height,
    /// 0.5 mm edge rounding.
    pub fn preset(name: &str) -> Result<Self, GeometryError> {
        let kind = match name {
            "sphere" => ShapeKind::Sphere { radius: 4.0 },
            "cylinder" => ShapeKind::Cylinder {
                radius: 4.0,
                height: 6.0,
            },
            "torus" => ShapeKind::Torus {
                major_radius: 3.0,
                minor_radius: 1.0,
            },
            "prism" => ShapeKind::Prism {
                size: [6.0, 6.0, 6.0],
            },
            "moon" => ShapeKind::Moon {
                radius: 4.0,
                cut_radius: 4.0,
                cut_offset: 2.5,
                height: 6.0,
            },
            "pacman" => ShapeKind::Pacman {
                radius: 4.0,
                mouth_degrees: 90.0,
                height: 6.0,
            },
            "dot_in" => ShapeKind::DotIn {
                radius: 4.0,
                inner_radius: 1.5,
                height: 6.0,
            },
            other => {
                return Err(GeometryError::UnknownShape {
                    name: other.to_string(),
                    known: SHAPE_NAMES.join(", "),
                })
            }
        };
        let round = match kind {
            ShapeKind::Sphere { .. } | ShapeKind::Torus { .. } => 0.0,
            _ => default_round(),
        };
        Ok(Self {
            kind,
            edge_round_radius: round,
        })
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            ShapeKind::Sphere { .. } => "sphere",
            ShapeKind::Cylinder { .. } => "cylinder",
            ShapeKind::Torus { .. } => "torus",
            ShapeKind::Prism { .. } => "prism",
            ShapeKind::Moon { .. } => "moon",
            ShapeKind::Pacman { .. } => "pacman",
            ShapeKind::DotIn { .. } => "dot_in",
        }
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let bad = |msg: String| Err(GeometryError::InvalidShape(msg));
        let (dims, smallest): (Vec<f64>, f64) = match self.kind {
            ShapeKind::Sphere { radius } => (vec![radius], radius),
            ShapeKind::Cylinder { radius, height } => (vec![radius, height], radius.min(height / 2.0)),
            ShapeKind::Torus {
                major_radius,
                minor_radius,
            } => {
                if minor_radius >= major_radius {
                    return bad("torus minor_radius must be below major_radius".into());
                }
                (vec![major_radius, minor_radius], minor_radius)
            }
            ShapeKind::Prism { size } => (size.to_vec(), size.iter().fold(f64::INFINITY, |a, &b| a.min(b / 2.0))),
            ShapeKind::Moon {
                radius,
                cut_radius,
                cut_offset,
                height,
            } => {
                let width = radius + cut_offset - cut_radius;
                if width <= 0.0 || cut_offset <= 0.0 {
                    return bad("moon cut leaves no crescent".into());
                }
                (
                    vec![radius, cut_radius, cut_offset, height],
                    (width / 2.0).min(height / 2.0),
                )
            }
            ShapeKind::Pacman {
                radius,
                mouth_degrees,
                height,
            } => {
                if !(mouth_degrees > 0.0 && mouth_degrees < 360.0) {
                    return bad(format!("pacman mouth must lie in (0, 360) degrees, got {mouth_degrees}"));
                }
                (vec![radius, height], radius.min(height / 2.0) / 2.0)
            }
            ShapeKind::DotIn {
                radius,
                inner_radius,
                height,
            } => {
                if inner_radius >= radius {
                    return bad("dot_in inner_radius must be below radius".into());
                }
                (
                    vec![radius, inner_radius, height],
                    ((radius - inner_radius) / 2.0).min(height / 2.0),
                )
            }
        };
        if dims.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
            return bad(format!("{} dimensions must be positive", self.name()));
        }
        if !(self.edge_round_radius >= 0.0 && self.edge_round_radius < smallest) {
            return bad(format!(
                "edge_round_radius {} must be below the smallest feature radius {smallest}",
                self.edge_round_radius
            ));
        }
        Ok(())
    }

    /// Half extents of the axis-aligned bounding box.
    pub fn half_extents(&self) -> Vector3<f64> {
        match self.kind {
            ShapeKind::Sphere { radius } => Vector3::repeat(radius),
            ShapeKind::Torus {
                major_radius,
                minor_radius,
            } => Vector3::new(
                major_radius + minor_radius,
                major_radius + minor_radius,
                minor_radius,
            ),
            ShapeKind::Prism { size } => Vector3::from(size) / 2.0,
            ShapeKind::Cylinder { radius, height }
            | ShapeKind::Moon { radius, height, .. }
            | ShapeKind::Pacman { radius, height, .. }
            | ShapeKind::DotIn { radius, height, .. } => Vector3::new(radius, radius, height / 2.0),
        }
    }
}

fn disc(p: Vector2<f64>, r: f64) -> f64 {
    p.norm() - r
}

/// Signed distance to an infinite wedge of half-angle `half` opening along +x.
fn wedge(p: Vector2<f64>, half: f64) -> f64 {
    let q = Vector2::new(p.x, p.y.abs());
    let (s, c) = half.sin_cos();
    let inside = q.y * c < q.x * s;
    let along = q.x * c + q.y * s;
    let d = if along > 0.0 {
        (q.x * s - q.y * c).abs()
    } else {
        q.norm()
    };
    if inside {
        -d
    } else {
        d
    }
}

/// Extrudes a 2-D distance along z over `|z| ≤ half_height`.
fn extrude(d2: f64, z: f64, half_height: f64) -> f64 {
    let dz = z.abs() - half_height;
    let outside = Vector2::new(d2.max(0.0), dz.max(0.0)).norm();
    d2.max(dz).min(0.0) + outside
}

/// Signed distance from `point` to the shape, in mm. Negative inside.
pub fn sdf_eval(shape: &ShapeSpec, point: &Vector3<f64>) -> f64 {
    let r = shape.edge_round_radius;
    let p = *point;
    let xy = p.xy();
    let hard = match shape.kind {
        ShapeKind::Sphere { radius } => p.norm() - (radius - r),
        ShapeKind::Torus {
            major_radius,
            minor_radius,
        } => Vector2::new(xy.norm() - major_radius, p.z).norm() - (minor_radius - r),
        ShapeKind::Prism { size } => {
            let q = p.abs() - (Vector3::from(size) / 2.0 - Vector3::repeat(r));
            q.map(|v| v.max(0.0)).norm() + q.x.max(q.y).max(q.z).min(0.0)
        }
        ShapeKind::Cylinder { radius, height } => extrude(disc(xy, radius - r), p.z, height / 2.0 - r),
        ShapeKind::Moon {
            radius,
            cut_radius,
            cut_offset,
            height,
        } => {
            let d2 = disc(xy, radius - r).max(-disc(xy - Vector2::new(cut_offset, 0.0), cut_radius + r));
            extrude(d2, p.z, height / 2.0 - r)
        }
        ShapeKind::Pacman {
            radius,
            mouth_degrees,
            height,
        } => {
            let d2 = disc(xy, radius - r).max(-wedge(xy, mouth_degrees.to_radians() / 2.0) + r);
            extrude(d2, p.z, height / 2.0 - r)
        }
        ShapeKind::DotIn {
            radius,
            inner_radius,
            height,
        } => {
            let d2 = disc(xy, radius - r).max(inner_radius + r - xy.norm());
            extrude(d2, p.z, height / 2.0 - r)
        }
    };
    hard - r
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sharp(kind: ShapeKind) -> ShapeSpec {
        ShapeSpec {
            kind,
            edge_round_radius: 0.0,
        }
    }

    #[test]
    fn sphere_center_and_surface() {
        let s = sharp(ShapeKind::Sphere { radius: 2.5 });
        assert_eq!(sdf_eval(&s, &Vector3::zeros()), -2.5);
        assert!(sdf_eval(&s, &Vector3::new(0.0, 2.5, 0.0)).abs() < 1e-15);
        assert!((sdf_eval(&s, &Vector3::new(3.0, 4.0, 0.0)) - 2.5).abs() < 1e-15);
    }

    #[test]
    fn torus_major_circle() {
        let s = sharp(ShapeKind::Torus {
            major_radius: 3.0,
            minor_radius: 0.75,
        });
        for a in [0.0f64, 1.0, 2.5, 4.0] {
            let p = Vector3::new(3.0 * a.cos(), 3.0 * a.sin(), 0.0);
            assert!((sdf_eval(&s, &p) + 0.75).abs() < 1e-12);
        }
    }

    #[test]
    fn rounding_keeps_outer_dimensions() {
        let s = ShapeSpec::preset("dot_in").unwrap();
        // side wall midway up, top face at the rim middle
        assert!(sdf_eval(&s, &Vector3::new(4.0, 0.0, 0.0)).abs() < 1e-12);
        assert!(sdf_eval(&s, &Vector3::new(0.0, 2.75, 3.0)).abs() < 1e-12);
        // hole wall
        assert!(sdf_eval(&s, &Vector3::new(1.5, 0.0, 0.0)).abs() < 1e-12);
        assert!(sdf_eval(&s, &Vector3::new(0.0, 0.0, 0.0)) > 1.4);
        // corner is cut by the rounding
        assert!(sdf_eval(&s, &Vector3::new(4.0, 0.0, 3.0)) > 0.1);
    }

    #[test]
    fn pacman_mouth_is_empty() {
        let s = ShapeSpec::preset("pacman").unwrap();
        assert!(sdf_eval(&s, &Vector3::new(3.0, 0.0, 0.0)) > 0.0);
        assert!(sdf_eval(&s, &Vector3::new(-3.0, 0.0, 0.0)) < 0.0);
        assert!(sdf_eval(&s, &Vector3::new(1.0, 2.5, 0.0)) < 0.0);
    }

    #[test]
    fn moon_is_a_crescent() {
        let s = ShapeSpec::preset("moon").unwrap();
        assert!(sdf_eval(&s, &Vector3::new(-3.0, 0.0, 0.0)) < 0.0);
        assert!(sdf_eval(&s, &Vector3::new(1.0, 0.0, 0.0)) > 0.0);
    }

    #[test]
    fn unknown_preset_lists_names() {
        let err = ShapeSpec::preset("star").unwrap_err();
        assert!(err.to_string().contains("dot_in"));
    }

    #[test]
    fn validation() {
        for name in SHAPE_NAMES {
            ShapeSpec::preset(name).unwrap().validate().unwrap();
        }
        let mut s = ShapeSpec::preset("dot_in").unwrap();
        s.edge_round_radius = 2.0;
        assert!(s.validate().is_err());
        let s = sharp(ShapeKind::Sphere { radius: -1.0 });
        assert!(s.validate().is_err());
    }
}
