//! Fixed-corotated elasticity.

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use super::SimError;

/// Elastic constants of a body, stored as Young's modulus and Poisson ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialParams {
    pub youngs_modulus: f64,
    pub poisson_ratio: f64,
}

impl Default for MaterialParams {
    fn default() -> Self {
        Self {
            youngs_modulus: 1.45e5,
            poisson_ratio: 0.45,
        }
    }
}

impl MaterialParams {
    pub fn new(youngs_modulus: f64, poisson_ratio: f64) -> Result<Self, SimError> {
        let p = Self {
            youngs_modulus,
            poisson_ratio,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.youngs_modulus > 0.0 && self.youngs_modulus.is_finite()) {
            return Err(SimError::Config(format!(
                "youngs_modulus must be positive, got {}",
                self.youngs_modulus
            )));
        }
        if !(self.poisson_ratio > 0.0 && self.poisson_ratio < 0.5) {
            return Err(SimError::Config(format!(
                "poisson_ratio must lie in (0, 0.5), got {}",
                self.poisson_ratio
            )));
        }
        Ok(())
    }

    /// Shear modulus μ.
    pub fn mu(&self) -> f64 {
        self.youngs_modulus / (2.0 * (1.0 + self.poisson_ratio))
    }

    /// First Lamé parameter λ.
    pub fn lambda(&self) -> f64 {
        let nu = self.poisson_ratio;
        self.youngs_modulus * nu / ((1.0 + nu) * (1.0 - 2.0 * nu))
    }

    /// Dilatational wave speed for the given density, used for step-size checks.
    pub fn wave_speed(&self, density: f64) -> f64 {
        ((self.lambda() + 2.0 * self.mu()) / density).sqrt()
    }
}

/// Rotation factor `R` of the polar decomposition `F = R S`.
///
/// Scaled Newton iteration; requires `det F > 0`.
pub fn polar_rotation(f: &Matrix3<f64>) -> Option<Matrix3<f64>> {
    let mut r = *f;
    for _ in 0..64 {
        let det = r.determinant();
        if !(det > 0.0) || !det.is_finite() {
            return None;
        }
        let inv_t = r.try_inverse()?.transpose();
        let gamma = det.powf(-1.0 / 3.0);
        let next = 0.5 * (gamma * r + inv_t / gamma);
        let delta = (next - r).norm();
        r = next;
        if delta < 1e-14 * 3.0 {
            break;
        }
    }
    // one unscaled step to clean up the last scaling error
    let inv_t = r.try_inverse()?.transpose();
    Some(0.5 * (r + inv_t))
}

/// Energy density `ψ(F) = μ‖F − R‖² + λ/2 (J − 1)²`.
pub fn energy_density(f: &Matrix3<f64>, material: &MaterialParams) -> Option<f64> {
    let r = polar_rotation(f)?;
    let j = f.determinant();
    Some(material.mu() * (f - r).norm_squared() + 0.5 * material.lambda() * (j - 1.0) * (j - 1.0))
}

/// Kirchhoff stress `S = 2μ(F − R)Fᵀ + λ J (J − 1) I` of the fixed-corotated model.
///
/// `particle` only labels the error.
pub fn corotated_stress(
    f: &Matrix3<f64>,
    material: &MaterialParams,
    particle: usize,
) -> Result<Matrix3<f64>, SimError> {
    let j = f.determinant();
    if !(j > 0.0) || !f.iter().all(|v| v.is_finite()) {
        return Err(SimError::Fault {
            particle,
            reason: format!("deformation gradient not invertible (J = {j})"),
        });
    }
    if *f == Matrix3::identity() {
        return Ok(Matrix3::zeros());
    }
    let r = polar_rotation(f).ok_or_else(|| SimError::Fault {
        particle,
        reason: "polar decomposition failed".into(),
    })?;
    let s = 2.0 * material.mu() * (f - r) * f.transpose()
        + Matrix3::from_diagonal_element(material.lambda() * j * (j - 1.0));
    if s.iter().all(|v| v.is_finite()) {
        Ok(s)
    } else {
        Err(SimError::Fault {
            particle,
            reason: "non-finite stress".into(),
        })
    }
}
