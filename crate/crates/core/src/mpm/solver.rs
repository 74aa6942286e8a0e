//! Time stepping with the relative-rest iteration.

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;

use super::transfer::{
    advect_particles, apply_grid_boundaries, compute_grid_velocity, compute_stresses, gather,
    scatter, TransferPlan,
};
use super::{Body, Grid, Particle, SimConfig, SimError};

/// Commanded rigid motion of the indenter: a translation plus a spin about a
/// vertical axis through `center`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectMotion {
    pub linear: Vector3<f64>,
    /// Angular velocity about +z (rad/s).
    pub spin: f64,
    pub center: Vector3<f64>,
}

impl ObjectMotion {
    pub fn translation(linear: Vector3<f64>) -> Self {
        Self {
            linear,
            spin: 0.0,
            center: Vector3::zeros(),
        }
    }

    pub fn rotation(spin: f64, center: Vector3<f64>) -> Self {
        Self {
            linear: Vector3::zeros(),
            spin,
            center,
        }
    }

    pub fn rest() -> Self {
        Self::translation(Vector3::zeros())
    }

    pub fn velocity_at(&self, x: &Vector3<f64>) -> Vector3<f64> {
        let r = x - self.center;
        self.linear + Vector3::new(-self.spin * r.y, self.spin * r.x, 0.0)
    }

    /// Velocity gradient of the rigid field.
    pub fn gradient(&self) -> Matrix3<f64> {
        Matrix3::new(0.0, -self.spin, 0.0, self.spin, 0.0, 0.0, 0.0, 0.0, 0.0)
    }

    /// True when the motion has no component parallel to the sensor plane.
    pub fn is_in_plane_static(&self) -> bool {
        self.spin.abs() < 1e-12 && self.linear.xy().norm() < 1e-12
    }
}

/// Velocity calibration points: the lowest object particle and the elastomer
/// particle nearest to it.
#[derive(Debug, Clone, PartialEq)]
pub struct RestMonitor {
    pub object_probe: usize,
    pub elastomer_probe: usize,
    /// Rotation center used for angle measurement (in-plane).
    pub center: Vector3<f64>,
    origin: Vector3<f64>,
    start_angle: f64,
    last_angle: f64,
    turned: f64,
}

impl RestMonitor {
    /// Picks the probes. With `rotation_center` set, a lowest particle closer
    /// than `min_radius` to the center is replaced by the farthest particle of
    /// the object's bottom layer so that angles stay measurable.
    pub fn select(
        particles: &[Particle],
        rotation_center: Option<Vector3<f64>>,
        min_radius: f64,
    ) -> Result<Self, SimError> {
        let objects: Vec<usize> = (0..particles.len())
            .filter(|&i| particles[i].body == Body::Object)
            .collect();
        if objects.is_empty() {
            return Err(SimError::Config("no object particles to probe".into()));
        }
        let z_min = objects
            .iter()
            .map(|&i| particles[i].position.z)
            .fold(f64::INFINITY, f64::min);
        let bottom: Vec<usize> = objects
            .iter()
            .copied()
            .filter(|&i| particles[i].position.z <= z_min + 1e-9)
            .collect();
        let lexi = |a: &usize, b: &usize| {
            let pa = particles[*a].position;
            let pb = particles[*b].position;
            pa.x.total_cmp(&pb.x).then(pa.y.total_cmp(&pb.y)).then(a.cmp(b))
        };
        let mut object_probe = *bottom.iter().min_by(|a, b| lexi(a, b)).expect("non-empty");

        let center = match rotation_center {
            Some(c) => c,
            None => {
                let sum: Vector3<f64> = objects.iter().map(|&i| particles[i].position).sum();
                sum / objects.len() as f64
            }
        };
        if rotation_center.is_some() {
            let radius = |i: usize| (particles[i].position - center).xy().norm();
            if radius(object_probe) < min_radius {
                object_probe = *bottom
                    .iter()
                    .max_by(|a, b| radius(**a).total_cmp(&radius(**b)).then(lexi(b, a)))
                    .expect("non-empty");
            }
        }

        let xo = particles[object_probe].position;
        let elastomer_probe = nearest_elastomer(particles, &xo)
            .ok_or_else(|| SimError::Config("no elastomer particles to probe".into()))?;

        let mut m = Self {
            object_probe,
            elastomer_probe,
            center,
            origin: xo,
            start_angle: 0.0,
            last_angle: 0.0,
            turned: 0.0,
        };
        m.begin_phase(particles);
        Ok(m)
    }

    /// Re-picks the elastomer probe as the particle nearest to the object
    /// probe's current position.
    pub fn reselect(&mut self, particles: &[Particle]) {
        let xo = particles[self.object_probe].position;
        if let Some(e) = nearest_elastomer(particles, &xo) {
            self.elastomer_probe = e;
        }
    }

    fn angle_of(&self, x: &Vector3<f64>) -> f64 {
        let r = x - self.center;
        r.y.atan2(r.x)
    }

    /// Caches the probe position as the origin for [`measure_progress`].
    pub fn begin_phase(&mut self, particles: &[Particle]) {
        let x = particles[self.object_probe].position;
        self.origin = x;
        self.start_angle = self.angle_of(&x);
        self.last_angle = self.start_angle;
        self.turned = 0.0;
    }

    /// Accumulates the unwrapped probe angle; call once per step.
    pub fn track(&mut self, particles: &[Particle]) {
        let a = self.angle_of(&particles[self.object_probe].position);
        let mut d = a - self.last_angle;
        while d > std::f64::consts::PI {
            d -= 2.0 * std::f64::consts::PI;
        }
        while d < -std::f64::consts::PI {
            d += 2.0 * std::f64::consts::PI;
        }
        self.turned += d;
        self.last_angle = a;
    }

    /// In-plane `|v_e − v_o| / |v_o|` at the probes, or `None` when the
    /// object probe does not move in-plane.
    pub fn velocity_ratio(&self, particles: &[Particle]) -> Option<f64> {
        let vo = particles[self.object_probe].velocity.xy();
        let ve = particles[self.elastomer_probe].velocity.xy();
        let n = vo.norm();
        (n >= 1e-12).then(|| (ve - vo).norm() / n)
    }
}

fn nearest_elastomer(particles: &[Particle], x: &Vector3<f64>) -> Option<usize> {
    particles
        .par_iter()
        .enumerate()
        .filter(|(_, p)| p.body == Body::Elastomer)
        .min_by(|(ia, a), (ib, b)| {
            (a.position - x)
                .norm_squared()
                .total_cmp(&(b.position - x).norm_squared())
                .then(ia.cmp(ib))
        })
        .map(|(i, _)| i)
}

/// Probe displacement since the phase start, and the rotation angle in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Progress {
    pub displacement: Vector3<f64>,
    pub rotation_angle: f64,
}

pub fn measure_progress(monitor: &RestMonitor, state: &SimState) -> Progress {
    let x = state.particles[monitor.object_probe].position;
    Progress {
        displacement: x - monitor.origin,
        rotation_angle: monitor.turned.to_degrees(),
    }
}

/// Result of one relative-rest step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RestOutcome {
    /// Transfer cycles performed.
    pub iterations: usize,
    pub converged: bool,
    /// Probe velocity mismatch at loop exit, when defined.
    pub ratio: Option<f64>,
}

/// Particles, grid and configuration of a running simulation.
#[derive(Debug, Clone)]
pub struct SimState {
    pub particles: Vec<Particle>,
    pub grid: Grid,
    pub cfg: SimConfig,
    /// Elastomer particles whose z-velocity is held at zero.
    pub pinned: Vec<bool>,
    /// Bottom-layer elastomer particles held fully at rest when
    /// `anchor_base` is set.
    pub anchored: Vec<bool>,
    pub steps: usize,
}

impl SimState {
    pub fn new(particles: Vec<Particle>, cfg: SimConfig) -> Result<Self, SimError> {
        cfg.validate()?;
        for (i, p) in particles.iter().enumerate() {
            if !(p.mass > 0.0 && p.init_volume > 0.0) {
                return Err(SimError::Fault {
                    particle: i,
                    reason: "mass and volume must be positive".into(),
                });
            }
        }
        super::transfer::check_domain(&particles, &cfg)?;
        let pinned = pin_mask(&particles, cfg.pin_fraction);
        let anchored = if cfg.anchor_base {
            pin_mask(&particles, 0.0)
        } else {
            vec![false; particles.len()]
        };
        Ok(Self {
            grid: Grid::new(cfg.grid_dims, cfg.grid_width),
            particles,
            cfg,
            pinned,
            anchored,
            steps: 0,
        })
    }

    /// Largest particle speed times `dt`, in cells.
    pub fn courant(&self) -> f64 {
        let vmax = self
            .particles
            .par_iter()
            .map(|p| p.velocity.norm())
            .reduce(|| 0.0, f64::max);
        vmax * self.cfg.dt / self.cfg.grid_width
    }

    pub fn elastomer(&self) -> impl Iterator<Item = (usize, &Particle)> {
        self.particles
            .iter()
            .enumerate()
            .filter(|(_, p)| p.body == Body::Elastomer)
    }
}

/// Elastomer particles within `fraction` of the body's initial height from its bottom.
pub fn pin_mask(particles: &[Particle], fraction: f64) -> Vec<bool> {
    let (lo, hi) = particles
        .iter()
        .filter(|p| p.body == Body::Elastomer)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            (lo.min(p.position.z), hi.max(p.position.z))
        });
    let cutoff = lo + fraction * (hi - lo) + 1e-9;
    particles
        .iter()
        .map(|p| p.body == Body::Elastomer && p.position.z <= cutoff)
        .collect()
}

fn drive_object(particles: &mut [Particle], motion: &ObjectMotion) {
    let grad = motion.gradient();
    particles.par_iter_mut().for_each(|p| {
        if p.is_object() {
            p.velocity = motion.velocity_at(&p.position);
            p.affine = grad;
        }
    });
}

/// Advances the state by one time step.
///
/// The elastomer probe is first re-picked next to the object probe. With
/// `rest_check` enabled, transfer cycles repeat (object velocity imposed, P2G,
/// boundaries, G2P, z-pinning and base anchoring) until the elastomer probe
/// moves with the object probe within `rest_threshold`, `rest_limit` cycles
/// have run, or (with `rest_early_exit`) the ratio stalls; then
/// particles advect once. Every cycle restarts from the start-of-step
/// deformation gradient and stress. Without `rest_check` a single unpinned
/// cycle runs; the probe ratio is still reported.
pub fn relative_rest_loop(
    state: &mut SimState,
    motion: &ObjectMotion,
    monitor: &mut RestMonitor,
) -> Result<RestOutcome, SimError> {
    if !motion.linear.iter().all(|v| v.is_finite()) || !motion.spin.is_finite() {
        return Err(SimError::Config("object velocity must be finite".into()));
    }
    let cfg = state.cfg.clone();
    let plan = TransferPlan::new(&state.particles, &state.grid, &cfg)?;
    let stresses = compute_stresses(&state.particles, &cfg.material)?;
    let base_f: Vec<Matrix3<f64>> = state.particles.iter().map(|p| p.def_grad).collect();
    let in_plane_static = motion.is_in_plane_static();
    monitor.reselect(&state.particles);

    let mut iterations = 0;
    let mut last_ratio = None;
    let (converged, ratio) = loop {
        drive_object(&mut state.particles, motion);
        state.grid.clear();
        scatter(&state.particles, &stresses, &plan, &mut state.grid, &cfg);
        compute_grid_velocity(&mut state.grid);
        apply_grid_boundaries(&mut state.grid, &cfg);
        gather(&state.grid, &mut state.particles, &plan, &cfg, Some(&base_f))?;
        if cfg.rest_check {
            state
                .particles
                .par_iter_mut()
                .zip(state.pinned.par_iter().zip(state.anchored.par_iter()))
                .for_each(|(p, (&pin, &anchor))| {
                    if anchor {
                        p.velocity = Vector3::zeros();
                    } else if pin {
                        p.velocity.z = 0.0;
                    }
                });
        }
        iterations += 1;

        let ratio = monitor.velocity_ratio(&state.particles);
        let converged = if in_plane_static {
            true
        } else {
            match ratio {
                Some(r) => r <= cfg.rest_threshold,
                None => return Err(SimError::DegenerateProbe),
            }
        };
        if !cfg.rest_check || converged || iterations >= cfg.rest_limit {
            break (converged, ratio);
        }
        if let (true, Some(prev), Some(r)) = (cfg.rest_early_exit, last_ratio, ratio) {
            let left = (cfg.rest_limit - iterations) as f64;
            if r - cfg.rest_threshold > (prev - r) * left {
                break (false, ratio);
            }
        }
        last_ratio = ratio;
    };

    let courant = state.courant();
    if !(courant < 1.0) {
        return Err(SimError::Fault {
            particle: monitor.object_probe,
            reason: format!("CFL violated: max|v|·dt/W = {courant}"),
        });
    }
    advect_particles(&mut state.particles, &cfg)?;
    state.steps += 1;
    Ok(RestOutcome {
        iterations,
        converged,
        ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_state(rest_check: bool) -> SimState {
        let cfg = SimConfig {
            grid_width: 1.0,
            grid_dims: [16, 16, 16],
            boundary_margin: 2,
            rest_check,
            ..SimConfig::default()
        };
        let mut ps = Vec::new();
        for i in 0..6 {
            for j in 0..6 {
                for k in 0..4 {
                    let x = Vector3::new(5.0 + 0.5 * i as f64, 5.0 + 0.5 * j as f64, 3.5 + 0.5 * k as f64);
                    ps.push(Particle::at_rest(x, 0.125, 0.125, Body::Elastomer));
                }
            }
        }
        for i in 0..3 {
            for j in 0..3 {
                let x = Vector3::new(6.0 + 0.5 * i as f64, 6.0 + 0.5 * j as f64, 5.5);
                ps.push(Particle::at_rest(x, 0.125, 0.125, Body::Object));
            }
        }
        SimState::new(ps, cfg).unwrap()
    }

    #[test]
    fn probes_pick_lowest_then_lexicographic() {
        let st = small_state(true);
        let m = RestMonitor::select(&st.particles, None, 0.0).unwrap();
        let xo = st.particles[m.object_probe].position;
        assert_eq!(xo, Vector3::new(6.0, 6.0, 5.5));
        let xe = st.particles[m.elastomer_probe].position;
        assert_eq!(xe, Vector3::new(6.0, 6.0, 5.0));
    }

    #[test]
    fn off_center_probe_for_rotation() {
        let st = small_state(true);
        let c = Vector3::new(6.5, 6.5, 0.0);
        let m = RestMonitor::select(&st.particles, Some(c), 0.5).unwrap();
        let r = (st.particles[m.object_probe].position - c).xy().norm();
        assert!((r - 0.5f64.hypot(0.5)).abs() < 1e-12);
    }

    #[test]
    fn press_dwell_converges_in_one_iteration() {
        let mut st = small_state(true);
        let mut m = RestMonitor::select(&st.particles, None, 0.0).unwrap();
        let out = relative_rest_loop(&mut st, &ObjectMotion::rest(), &mut m).unwrap();
        assert_eq!(out.iterations, 1);
        assert!(out.converged);
        let press = ObjectMotion::translation(Vector3::new(0.0, 0.0, -5.0));
        let out = relative_rest_loop(&mut st, &press, &mut m).unwrap();
        assert_eq!(out.iterations, 1);
        assert!(out.converged);
    }

    #[test]
    fn loop_respects_limit_and_pins() {
        let mut st = small_state(true);
        st.cfg.rest_limit = 1;
        st.cfg.rest_threshold = 1e-9;
        let mut m = RestMonitor::select(&st.particles, None, 0.0).unwrap();
        let slide = ObjectMotion::translation(Vector3::new(5.0, 0.0, 0.0));
        let out = relative_rest_loop(&mut st, &slide, &mut m).unwrap();
        assert_eq!(out.iterations, 1);
        assert!(!out.converged);
        assert!(st.anchored.iter().any(|&a| a));
        for (i, p) in st.particles.iter().enumerate() {
            if st.pinned[i] {
                assert_eq!(p.velocity.z, 0.0);
            }
            if st.anchored[i] {
                assert!(st.pinned[i]);
                assert_eq!(p.velocity, Vector3::zeros());
            }
        }
    }

    #[test]
    fn probe_on_axis_is_degenerate() {
        let mut st = small_state(true);
        let mut m = RestMonitor::select(&st.particles, None, 0.0).unwrap();
        let xo = st.particles[m.object_probe].position;
        let spin = ObjectMotion::rotation(1.0, xo);
        assert!(matches!(
            relative_rest_loop(&mut st, &spin, &mut m),
            Err(SimError::DegenerateProbe)
        ));
    }

    #[test]
    fn plain_mode_runs_one_cycle() {
        let mut st = small_state(false);
        let mut m = RestMonitor::select(&st.particles, None, 0.0).unwrap();
        let slide = ObjectMotion::translation(Vector3::new(5.0, 0.0, 0.0));
        let out = relative_rest_loop(&mut st, &slide, &mut m).unwrap();
        assert_eq!(out.iterations, 1);
        assert!(out.ratio.is_some());
    }

    #[test]
    fn early_exit_needs_at_least_two_cycles() {
        let mut st = small_state(true);
        st.cfg.rest_threshold = 1e-9;
        let mut m = RestMonitor::select(&st.particles, None, 0.0).unwrap();
        let slide = ObjectMotion::translation(Vector3::new(5.0, 0.0, 0.0));
        let mut full = st.clone();
        full.cfg.rest_early_exit = false;
        let out = relative_rest_loop(&mut st, &slide, &mut m.clone()).unwrap();
        assert!(!out.converged);
        assert!(out.iterations >= 2 && out.iterations < st.cfg.rest_limit);
        let out = relative_rest_loop(&mut full, &slide, &mut m).unwrap();
        assert_eq!(out.iterations, full.cfg.rest_limit);
    }

    #[test]
    fn elastomer_probe_follows_object_probe() {
        let mut st = small_state(true);
        let mut m = RestMonitor::select(&st.particles, None, 0.0).unwrap();
        st.particles[m.object_probe].position = Vector3::new(7.4, 6.1, 5.5);
        m.reselect(&st.particles);
        let xe = st.particles[m.elastomer_probe].position;
        assert_eq!(xe, Vector3::new(7.5, 6.0, 5.0));
    }

    #[test]
    fn idle_progress_is_zero() {
        let st = small_state(true);
        let m = RestMonitor::select(&st.particles, None, 0.0).unwrap();
        let p = measure_progress(&m, &st);
        assert_eq!(p.displacement, Vector3::zeros());
        assert_eq!(p.rotation_angle, 0.0);
    }
}
