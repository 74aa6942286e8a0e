use nalgebra::{Matrix3, Vector3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_pcg::Pcg64;

use tacsim::mpm::constitutive::energy_density;
use tacsim::mpm::transfer::{compute_stresses, gather, scatter, TransferPlan};
use tacsim::mpm::{
    apply_grid_boundaries, compute_grid_velocity, corotated_stress, grid_to_particle, particle_to_grid, Body,
    Grid, MaterialParams, Particle, SimConfig, Stencil,
};

fn cfg(margin: usize) -> SimConfig {
    SimConfig {
        grid_width: 0.5,
        grid_dims: [20, 20, 20],
        boundary_margin: margin,
        ..SimConfig::default()
    }
}

fn cloud(rng: &mut Pcg64, n: usize, lo: f64, hi: f64) -> Vec<Particle> {
    (0..n)
        .map(|_| {
            let x = Vector3::from_fn(|_, _| rng.gen_range(lo..hi));
            let mut p = Particle::at_rest(x, rng.gen_range(0.5..2.0), 0.01, Body::Elastomer);
            p.velocity = Vector3::from_fn(|_, _| rng.gen_range(-1.0..1.0));
            p.affine = Matrix3::from_fn(|_, _| rng.gen_range(-2.0..2.0));
            p
        })
        .collect()
}

fn grid_of(c: &SimConfig) -> Grid {
    Grid::new(c.grid_dims, c.grid_width)
}

#[test]
fn random_clouds_conserve_mass_and_momentum() {
    let c = cfg(0);
    let mut rng = Pcg64::seed_from_u64(11);
    for _ in 0..10 {
        let mut ps = cloud(&mut rng, 400, 2.0, 7.5);
        let mass: f64 = ps.iter().map(|p| p.mass).sum();
        let momentum: Vector3<f64> = ps.iter().map(|p| p.mass * p.velocity).sum();
        let mut g = grid_of(&c);
        particle_to_grid(&ps, &mut g, &c).unwrap();
        assert!((g.total_mass() - mass).abs() <= 1e-10 * mass);
        assert!((g.total_momentum() - momentum).norm() <= 1e-10 * momentum.norm());
        compute_grid_velocity(&mut g);
        grid_to_particle(&g, &mut ps, &c).unwrap();
        let after: Vector3<f64> = ps.iter().map(|p| p.mass * p.velocity).sum();
        assert!((after - momentum).norm() <= 1e-8 * momentum.norm());
    }
}

#[test]
fn linear_velocity_field_is_recovered() {
    let c = cfg(0);
    let a = Matrix3::new(0.3, -1.2, 0.5, 0.7, 0.1, -0.4, -0.9, 0.2, 0.6);
    let v0 = Vector3::new(0.1, -0.2, 0.3);
    let mut g = grid_of(&c);
    for idx in 0..g.nodes().len() {
        let x = g.node_position(g.coords(idx));
        let n = &mut g.nodes_mut()[idx];
        n.mass = 1.0;
        n.velocity = v0 + a * x;
    }
    let x = Vector3::new(4.37, 5.11, 3.92);
    let mut ps = vec![Particle::at_rest(x, 1.0, 0.01, Body::Elastomer)];
    grid_to_particle(&g, &mut ps, &c).unwrap();
    assert!((ps[0].affine - a).abs().max() < 1e-6, "{}", ps[0].affine);
    // the kernel's first moment vanishes, so linear fields interpolate exactly
    let expect = v0 + a * x;
    assert!((ps[0].velocity - expect).norm() < 1e-9);
}

#[test]
fn stress_impulse_has_zero_sum_and_known_first_moment() {
    let c = cfg(0);
    let f = Matrix3::new(1.1, 0.05, 0.0, -0.02, 0.95, 0.03, 0.01, 0.0, 1.04);
    let x = Vector3::new(4.2, 4.7, 5.3);
    let mut p = Particle::at_rest(x, 1.0, 0.2, Body::Elastomer);
    p.def_grad = f;
    let s = corotated_stress(&f, &c.material, 0).unwrap();
    let mut g = grid_of(&c);
    particle_to_grid(&[p], &mut g, &c).unwrap();
    assert!(g.total_momentum().norm() < 1e-9);
    let mut moment = Matrix3::zeros();
    for (idx, n) in g.nodes().iter().enumerate() {
        moment += n.momentum * (g.node_position(g.coords(idx)) - x).transpose();
    }
    // Σ w (X − x)(X − x)ᵀ = W²/4 · I for the quadratic B-spline
    let expect = -c.dt * 0.2 * s;
    assert!((moment - expect).abs().max() <= 1e-9 * expect.abs().max().max(1.0), "{moment}\n{expect}");
}

#[test]
fn whole_cell_translation_gives_identical_updates() {
    let c = cfg(0);
    let mut rng = Pcg64::seed_from_u64(3);
    let mut a = cloud(&mut rng, 200, 2.0, 5.0);
    for p in &mut a {
        p.def_grad = Matrix3::identity() + Matrix3::from_fn(|_, _| rng.gen_range(-0.05..0.05));
    }
    let shift = Vector3::new(3.0, 1.0, 2.0) * c.grid_width;
    let mut b: Vec<Particle> = a
        .iter()
        .map(|p| Particle {
            position: p.position + shift,
            ..p.clone()
        })
        .collect();
    for ps in [&mut a, &mut b] {
        let mut g = grid_of(&c);
        particle_to_grid(ps, &mut g, &c).unwrap();
        compute_grid_velocity(&mut g);
        grid_to_particle(&g, ps, &c).unwrap();
    }
    for (p, q) in a.iter().zip(&b) {
        assert!((p.velocity - q.velocity).norm() < 1e-9);
        assert!((p.affine - q.affine).abs().max() < 1e-7);
        assert!((p.def_grad - q.def_grad).abs().max() < 1e-12);
    }
}

#[test]
fn sticky_margin_stops_boundary_particles() {
    let c = cfg(2);
    let mut ps = vec![Particle::at_rest(Vector3::new(1.01, 5.0, 5.0), 1.0, 0.01, Body::Elastomer)];
    ps[0].velocity = Vector3::new(-1.0, 0.0, 0.0);
    let mut g = grid_of(&c);
    particle_to_grid(&ps, &mut g, &c).unwrap();
    compute_grid_velocity(&mut g);
    apply_grid_boundaries(&mut g, &c);
    grid_to_particle(&g, &mut ps, &c).unwrap();
    // the stencil spans nodes 1..=3 and nodes 1 and 2 lie in the margin
    assert!(ps[0].velocity.x > -1.0 && ps[0].velocity.x < 0.0);
}

#[test]
fn repeated_cycles_restart_from_base_gradient() {
    let c = cfg(0);
    let mut rng = Pcg64::seed_from_u64(5);
    let mut ps = cloud(&mut rng, 100, 3.0, 6.0);
    let base: Vec<Matrix3<f64>> = ps.iter().map(|p| p.def_grad).collect();
    let stresses = compute_stresses(&ps, &c.material).unwrap();
    let mut g = grid_of(&c);
    let plan = TransferPlan::new(&ps, &g, &c).unwrap();
    scatter(&ps, &stresses, &plan, &mut g, &c);
    compute_grid_velocity(&mut g);
    gather(&g, &mut ps, &plan, &c, Some(&base)).unwrap();
    let once: Vec<Matrix3<f64>> = ps.iter().map(|p| p.def_grad).collect();
    gather(&g, &mut ps, &plan, &c, Some(&base)).unwrap();
    for (p, f) in ps.iter().zip(&once) {
        assert_eq!(p.def_grad, *f);
    }
}

fn fd_piola(f: &Matrix3<f64>, m: &MaterialParams) -> Matrix3<f64> {
    let h = 1e-6;
    Matrix3::from_fn(|i, j| {
        let mut a = *f;
        let mut b = *f;
        a[(i, j)] += h;
        b[(i, j)] -= h;
        (energy_density(&a, m).unwrap() - energy_density(&b, m).unwrap()) / (2.0 * h)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn weights_sum_to_one(x in 1.0f64..8.0, y in 1.0f64..8.0, z in 1.0f64..8.0) {
        let s = Stencil::new(&Vector3::new(x, y, z), 0.5);
        let mut sum = 0.0;
        for i in 0..3 { for j in 0..3 { for k in 0..3 { sum += s.weight(i, j, k); } } }
        prop_assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn kirchhoff_stress_matches_energy_gradient(
        e in proptest::collection::vec(-0.25f64..0.25, 9),
    ) {
        let f = Matrix3::identity() + Matrix3::from_row_slice(&e);
        let j = f.determinant();
        prop_assume!(j > 0.5 && j < 1.5);
        let m = MaterialParams::default();
        let p_fd = fd_piola(&f, &m);
        let s = corotated_stress(&f, &m, 0).unwrap();
        let p = s * f.transpose().try_inverse().unwrap();
        let scale = p.abs().max().max(1.0);
        prop_assert!((p - p_fd).abs().max() / scale < 1e-4);
    }
}
