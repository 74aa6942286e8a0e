//! Quadratic B-spline interpolation kernel on the 3×3×3 node stencil.

use nalgebra::Vector3;

/// Inverse of the APIC inertia tensor for the quadratic B-spline, in units of 1/W².
pub const APIC_INV_INERTIA: f64 = 4.0;

/// One-dimensional quadratic B-spline `N(r)` with support `|r| < 1.5`.
pub fn bspline(r: f64) -> f64 {
    let a = r.abs();
    if a < 0.5 {
        0.75 - a * a
    } else if a < 1.5 {
        0.5 * (1.5 - a) * (1.5 - a)
    } else {
        0.0
    }
}

/// Per-axis weights of the three stencil nodes for a particle whose position,
/// measured in cells, lies `offset` away from its nearest node.
///
/// `offset` components are expected in `[-0.5, 0.5)`; entry `[axis][k]` is the
/// weight of node `nearest - 1 + k` along that axis.
pub fn kernel_weight(offset: Vector3<f64>) -> [[f64; 3]; 3] {
    let mut w = [[0.0; 3]; 3];
    for axis in 0..3 {
        let o = offset[axis];
        w[axis] = [
            0.5 * (0.5 - o) * (0.5 - o),
            0.75 - o * o,
            0.5 * (0.5 + o) * (0.5 + o),
        ];
    }
    w
}

/// Stencil placement for a particle at `position` on a grid of spacing `width`.
#[derive(Debug, Clone, Copy)]
pub struct Stencil {
    /// Lowest node index of the 3×3×3 block, per axis.
    pub base: [i64; 3],
    /// Per-axis weights, see [`kernel_weight`].
    pub weights: [[f64; 3]; 3],
    /// Particle position relative to the base node, in cells.
    pub frac: Vector3<f64>,
}

impl Stencil {
    pub fn new(position: &Vector3<f64>, width: f64) -> Self {
        let cell = position / width;
        let mut base = [0i64; 3];
        let mut offset = Vector3::zeros();
        let mut frac = Vector3::zeros();
        for axis in 0..3 {
            let b = (cell[axis] - 0.5).floor();
            base[axis] = b as i64;
            frac[axis] = cell[axis] - b;
            offset[axis] = frac[axis] - 1.0;
        }
        Self {
            base,
            weights: kernel_weight(offset),
            frac,
        }
    }

    /// Weight of stencil node `(i, j, k)`.
    #[inline]
    pub fn weight(&self, i: usize, j: usize, k: usize) -> f64 {
        self.weights[0][i] * self.weights[1][j] * self.weights[2][k]
    }

    /// `X_g - x_p` for stencil node `(i, j, k)`, in mm.
    #[inline]
    pub fn node_offset(&self, i: usize, j: usize, k: usize, width: f64) -> Vector3<f64> {
        Vector3::new(
            (i as f64 - self.frac.x) * width,
            (j as f64 - self.frac.y) * width,
            (k as f64 - self.frac.z) * width,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn particle_on_node_has_center_weight() {
        let w = kernel_weight(Vector3::zeros());
        for axis in w {
            assert_eq!(axis, [0.125, 0.75, 0.125]);
        }
        let s = Stencil::new(&Vector3::new(2.0, 2.0, 2.0), 1.0);
        assert_eq!(s.base, [1, 1, 1]);
        assert_eq!(s.weight(1, 1, 1), 0.75 * 0.75 * 0.75);
    }

    #[test]
    fn support_boundary_is_zero() {
        assert_eq!(bspline(1.5), 0.0);
        assert_eq!(bspline(-1.5), 0.0);
        assert_eq!(bspline(0.0), 0.75);
        // the stencil formula agrees with the scalar spline
        let o = 0.3;
        let w = kernel_weight(Vector3::new(o, o, o));
        assert!((w[0][0] - bspline(-1.0 - o)).abs() < 1e-15);
        assert!((w[0][1] - bspline(-o)).abs() < 1e-15);
        assert!((w[0][2] - bspline(1.0 - o)).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn stencil_weights_partition_unity(x in 1.0f64..50.0, y in 1.0f64..50.0, z in 1.0f64..50.0) {
            let s = Stencil::new(&Vector3::new(x, y, z), 0.37);
            let mut sum = 0.0;
            for i in 0..3 { for j in 0..3 { for k in 0..3 { sum += s.weight(i, j, k); } } }
            prop_assert!((sum - 1.0).abs() < 1e-12);
        }
    }
}
