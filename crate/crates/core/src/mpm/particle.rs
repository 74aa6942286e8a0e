use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

/// Which body a material point belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Body {
    Elastomer,
    /// Rigid kinematic indenter.
    Object,
}

impl Body {
    pub fn tag(self) -> u8 {
        match self {
            Body::Elastomer => 0,
            Body::Object => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Body::Elastomer),
            1 => Some(Body::Object),
            _ => None,
        }
    }
}

/// A material point. Lengths in mm, time in s.
#[derive(Debug, Clone, PartialEq)]
pub struct Particle {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    pub mass: f64,
    /// APIC affine velocity field `C` (1/s).
    pub affine: Matrix3<f64>,
    /// Deformation gradient `F`.
    pub def_grad: Matrix3<f64>,
    /// Rest volume (mm³).
    pub init_volume: f64,
    pub body: Body,
}

impl Particle {
    pub fn at_rest(position: Vector3<f64>, mass: f64, init_volume: f64, body: Body) -> Self {
        Self {
            position,
            velocity: Vector3::zeros(),
            mass,
            affine: Matrix3::zeros(),
            def_grad: Matrix3::identity(),
            init_volume,
            body,
        }
    }

    pub fn is_object(&self) -> bool {
        self.body == Body::Object
    }
}
