//! Particle/grid transfers.
//!
//! The scatter is made deterministic by binning particles into x-slabs of
//! [`SLAB`] node layers. A particle touches at most `SLAB + 2` layers starting
//! at its slab, so even slabs never overlap each other, nor do odd slabs. Even
//! slabs are scattered in parallel, then odd slabs; inside a slab particles
//! are visited in index order. Every node therefore accumulates its
//! contributions in the same order regardless of the thread count.

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;

use super::constitutive::corotated_stress;
use super::kernel::{Stencil, APIC_INV_INERTIA};
use super::{Grid, MaterialParams, Particle, SimConfig, SimError};

/// Slab width in node layers. Must be at least 2.
pub const SLAB: usize = 4;

/// Per-step stencil data. Positions do not change between the transfer
/// cycles of one step, so this is computed once and reused.
#[derive(Debug, Clone)]
pub struct TransferPlan {
    stencils: Vec<Stencil>,
    slabs: Vec<Vec<u32>>,
}

impl TransferPlan {
    pub fn new(particles: &[Particle], grid: &Grid, cfg: &SimConfig) -> Result<Self, SimError> {
        check_domain(particles, cfg)?;
        let width = grid.width();
        let stencils: Vec<Stencil> = particles
            .par_iter()
            .map(|p| Stencil::new(&p.position, width))
            .collect();
        let n_slabs = grid.dims()[0].div_ceil(SLAB);
        let mut slabs = vec![Vec::new(); n_slabs];
        for (idx, s) in stencils.iter().enumerate() {
            slabs[s.base[0] as usize / SLAB].push(idx as u32);
        }
        Ok(Self { stencils, slabs })
    }

    pub fn stencils(&self) -> &[Stencil] {
        &self.stencils
    }
}

/// Fails if any particle lies outside the domain interior.
pub fn check_domain(particles: &[Particle], cfg: &SimConfig) -> Result<(), SimError> {
    let bounds = [cfg.interior(0), cfg.interior(1), cfg.interior(2)];
    let bad = particles.par_iter().position_first(|p| {
        (0..3).any(|a| {
            let x = p.position[a];
            !(x > bounds[a].0 && x < bounds[a].1)
        })
    });
    match bad {
        Some(particle) => Err(SimError::OutOfDomain {
            particle,
            position: particles[particle].position.into(),
        }),
        None => Ok(()),
    }
}

/// Kirchhoff stress of every particle; object particles carry none.
pub fn compute_stresses(
    particles: &[Particle],
    material: &MaterialParams,
) -> Result<Vec<Matrix3<f64>>, SimError> {
    particles
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            if p.is_object() {
                Ok(Matrix3::zeros())
            } else {
                corotated_stress(&p.def_grad, material, i)
            }
        })
        .collect()
}

/// Scatters mass and momentum (with the elastic impulse) onto a cleared grid.
pub fn particle_to_grid(
    particles: &[Particle],
    grid: &mut Grid,
    cfg: &SimConfig,
) -> Result<(), SimError> {
    let plan = TransferPlan::new(particles, grid, cfg)?;
    let stresses = compute_stresses(particles, &cfg.material)?;
    grid.clear();
    scatter(particles, &stresses, &plan, grid, cfg);
    Ok(())
}

/// Scatter with precomputed stencils and stresses. The grid must be cleared.
pub fn scatter(
    particles: &[Particle],
    stresses: &[Matrix3<f64>],
    plan: &TransferPlan,
    grid: &mut Grid,
    cfg: &SimConfig,
) {
    let width = grid.width();
    let dims = grid.dims();
    let slab_len = grid.slab_len();
    let stress_coef = -APIC_INV_INERTIA * cfg.dt / (width * width);
    let nodes = grid.nodes_mut();

    for phase in 0..2 {
        let skip_rows = phase * SLAB;
        if skip_rows >= dims[0] {
            continue;
        }
        let region = &mut nodes[skip_rows * slab_len..];
        region
            .par_chunks_mut(2 * SLAB * slab_len)
            .enumerate()
            .for_each(|(chunk, out)| {
                let slab = 2 * chunk + phase;
                let Some(members) = plan.slabs.get(slab) else {
                    return;
                };
                let row0 = slab * SLAB;
                for &pi in members {
                    let pi = pi as usize;
                    let p = &particles[pi];
                    let st = &plan.stencils[pi];
                    let q = p.mass * p.affine + (stress_coef * p.init_volume) * stresses[pi];
                    let mv = p.mass * p.velocity;
                    // node offset (i,j,k) - frac in mm, expanded: a + W q·(i,j,k)
                    let a = mv - q * (st.frac * width);
                    let qc = q * width;
                    let bx = st.base[0] as usize - row0;
                    let by = st.base[1] as usize;
                    let bz = st.base[2] as usize;
                    for i in 0..3 {
                        let wi = st.weights[0][i];
                        let ai = a + qc.column(0) * i as f64;
                        for j in 0..3 {
                            let wij = wi * st.weights[1][j];
                            let aij = ai + qc.column(1) * j as f64;
                            let row = ((bx + i) * dims[1] + by + j) * dims[2] + bz;
                            for k in 0..3 {
                                let w = wij * st.weights[2][k];
                                let node = &mut out[row + k];
                                node.mass += w * p.mass;
                                node.momentum += w * (aij + qc.column(2) * k as f64);
                            }
                        }
                    }
                }
            });
    }
}

/// `V = MG / M` where the node carries mass; zero elsewhere.
pub fn compute_grid_velocity(grid: &mut Grid) {
    grid.nodes_mut().par_iter_mut().for_each(|n| {
        n.velocity = if n.mass > 0.0 {
            n.momentum / n.mass
        } else {
            Vector3::zeros()
        };
    });
}

/// Zeroes the velocity of every node within the boundary margin, including
/// the nodes on the interior's faces.
pub fn apply_grid_boundaries(grid: &mut Grid, cfg: &SimConfig) {
    let margin = cfg.boundary_margin;
    if margin == 0 {
        return;
    }
    let dims = grid.dims();
    let slab_len = grid.slab_len();
    grid.nodes_mut()
        .par_chunks_mut(slab_len)
        .enumerate()
        .for_each(|(i, slab)| {
            let edge = |i: usize, d: usize| i <= margin || i + margin + 1 >= d;
            let x_edge = edge(i, dims[0]);
            for j in 0..dims[1] {
                let y_edge = edge(j, dims[1]);
                for k in 0..dims[2] {
                    if x_edge || y_edge || edge(k, dims[2]) {
                        slab[j * dims[2] + k].velocity = Vector3::zeros();
                    }
                }
            }
        });
}

/// Gathers velocity and affine field and updates `F` for elastomer particles.
///
/// When `base_def_grad` is given, `F` is recomputed from it rather than from the
/// particle's current value, so that repeated cycles within one step all
/// advance from the start-of-step gradient.
pub fn gather(
    grid: &Grid,
    particles: &mut [Particle],
    plan: &TransferPlan,
    cfg: &SimConfig,
    base_def_grad: Option<&[Matrix3<f64>]>,
) -> Result<(), SimError> {
    let width = grid.width();
    let dims = grid.dims();
    let nodes = grid.nodes();
    let scale = APIC_INV_INERTIA / (width * width);
    let dt = cfg.dt;

    let bad = particles
        .par_iter_mut()
        .enumerate()
        .filter_map(|(pi, p)| {
            if p.is_object() {
                return None;
            }
            let st = &plan.stencils[pi];
            let mut v = Vector3::zeros();
            let mut b = Matrix3::zeros();
            let bx = st.base[0] as usize;
            let by = st.base[1] as usize;
            let bz = st.base[2] as usize;
            for i in 0..3 {
                for j in 0..3 {
                    let row = ((bx + i) * dims[1] + by + j) * dims[2] + bz;
                    for k in 0..3 {
                        let w = st.weight(i, j, k);
                        let vg = nodes[row + k].velocity;
                        v += w * vg;
                        b += (w * vg) * st.node_offset(i, j, k, width).transpose();
                    }
                }
            }
            let c = scale * b;
            let f0 = base_def_grad.map_or(p.def_grad, |f| f[pi]);
            let f = (Matrix3::identity() + dt * c) * f0;
            p.velocity = v;
            p.affine = c;
            p.def_grad = f;
            let ok = v.iter().chain(c.iter()).all(|x| x.is_finite()) && f.determinant() > 0.0;
            (!ok).then_some(pi)
        })
        .min();
    match bad {
        Some(particle) => Err(SimError::Fault {
            particle,
            reason: "non-finite or inverting grid-to-particle update".into(),
        }),
        None => Ok(()),
    }
}

/// Grid-to-particle transfer from finalized grid velocities.
pub fn grid_to_particle(
    grid: &Grid,
    particles: &mut [Particle],
    cfg: &SimConfig,
) -> Result<(), SimError> {
    let plan = TransferPlan::new(particles, grid, cfg)?;
    gather(grid, particles, &plan, cfg, None)
}

/// `x ← x + v Δt` for every particle.
pub fn advect_particles(particles: &mut [Particle], cfg: &SimConfig) -> Result<(), SimError> {
    let dt = cfg.dt;
    particles
        .par_iter_mut()
        .for_each(|p| p.position += p.velocity * dt);
    check_domain(particles, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mpm::Body;

    fn cfg() -> SimConfig {
        SimConfig {
            grid_width: 0.5,
            grid_dims: [16, 12, 10],
            boundary_margin: 2,
            ..SimConfig::default()
        }
    }

    fn particle(x: f64, y: f64, z: f64) -> Particle {
        Particle::at_rest(Vector3::new(x, y, z), 2.0, 0.125, Body::Elastomer)
    }

    #[test]
    fn single_particle_conserves_mass_and_momentum() {
        let cfg = cfg();
        let mut grid = Grid::new(cfg.grid_dims, cfg.grid_width);
        let mut p = particle(3.13, 2.71, 2.2);
        p.velocity = Vector3::new(1.0, -2.0, 0.5);
        particle_to_grid(&[p.clone()], &mut grid, &cfg).unwrap();
        assert!((grid.total_mass() - 2.0).abs() < 1e-14);
        assert!((grid.total_momentum() - p.mass * p.velocity).norm() < 1e-13);
    }

    #[test]
    fn margin_zeroed_interior_kept() {
        let cfg = cfg();
        let mut grid = Grid::new(cfg.grid_dims, cfg.grid_width);
        for n in grid.nodes_mut() {
            n.mass = 1.0;
            n.momentum = Vector3::new(1.0, 2.0, 3.0);
        }
        compute_grid_velocity(&mut grid);
        apply_grid_boundaries(&mut grid, &cfg);
        for (flat, n) in grid.nodes().iter().enumerate() {
            let idx = grid.coords(flat);
            if grid.in_margin(idx, cfg.boundary_margin) {
                assert_eq!(n.velocity, Vector3::zeros());
            } else {
                assert_eq!(n.velocity, Vector3::new(1.0, 2.0, 3.0));
            }
        }
    }

    #[test]
    fn empty_grid_has_zero_velocity() {
        let cfg = cfg();
        let mut grid = Grid::new(cfg.grid_dims, cfg.grid_width);
        compute_grid_velocity(&mut grid);
        apply_grid_boundaries(&mut grid, &cfg);
        assert!(grid.nodes().iter().all(|n| n.velocity == Vector3::zeros()));
    }

    #[test]
    fn zero_margin_leaves_grid_unchanged() {
        let cfg = SimConfig {
            boundary_margin: 0,
            ..cfg()
        };
        let mut grid = Grid::new(cfg.grid_dims, cfg.grid_width);
        for n in grid.nodes_mut() {
            n.velocity = Vector3::new(0.5, 0.0, -1.0);
        }
        let before = grid.nodes().to_vec();
        apply_grid_boundaries(&mut grid, &cfg);
        assert_eq!(grid.nodes(), &before[..]);
    }

    #[test]
    fn uniform_grid_velocity_gives_uniform_particles() {
        let cfg = cfg();
        let mut grid = Grid::new(cfg.grid_dims, cfg.grid_width);
        let v = Vector3::new(0.3, -0.1, 0.2);
        for n in grid.nodes_mut() {
            n.velocity = v;
        }
        let mut ps = vec![particle(2.3, 2.4, 2.5), particle(4.01, 3.3, 2.9)];
        grid_to_particle(&grid, &mut ps, &cfg).unwrap();
        for p in &ps {
            assert!((p.velocity - v).norm() < 1e-14);
            assert!(p.affine.norm() < 1e-13);
            assert!((p.def_grad - Matrix3::identity()).norm() < 1e-15);
        }
    }

    #[test]
    fn outside_particle_is_rejected() {
        let cfg = cfg();
        let mut grid = Grid::new(cfg.grid_dims, cfg.grid_width);
        let err = particle_to_grid(&[particle(0.6, 2.0, 2.0)], &mut grid, &cfg).unwrap_err();
        assert!(matches!(err, SimError::OutOfDomain { particle: 0, .. }));
    }
}
