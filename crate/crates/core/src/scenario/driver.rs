//! Drives a world through trajectory phases until the probe-measured
//! progress reaches each phase target.

use nalgebra::Vector3;

use super::trajectory::{PhaseKind, TrajectoryPhase};
use super::{ScenarioError, World};
use crate::mpm::{measure_progress, relative_rest_loop, ObjectMotion, Particle, RestMonitor, RestOutcome};

/// Progress tolerance below which a phase counts as complete (mm or degrees).
const DONE_TOL: f64 = 1e-9;

/// One solver step inside a phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepEvent {
    pub phase: usize,
    /// Steps since the start of the run.
    pub step: usize,
    pub outcome: RestOutcome,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseReport {
    pub kind: PhaseKind,
    /// Target: cumulative depth below first contact for presses, the phase
    /// magnitude otherwise.
    pub commanded: f64,
    /// Probe-measured counterpart of `commanded`.
    pub measured: f64,
    pub steps: usize,
    /// Steps whose rest loop hit the iteration limit.
    pub unconverged: usize,
    pub max_ratio: Option<f64>,
}

pub struct Driver {
    pub world: World,
    pub monitor: RestMonitor,
    /// Contact level of the object probe: the undeformed pad top.
    contact_z: f64,
    /// Cumulative commanded press depth.
    press_target: f64,
    last_good: Vec<Particle>,
}

impl Driver {
    pub fn new(world: World) -> Result<Self, ScenarioError> {
        let min_radius = 2.0 * world.state.cfg.grid_width;
        let monitor = RestMonitor::select(&world.state.particles, Some(world.axis), min_radius)
            .map_err(|e| ScenarioError::invalid("indenter", e.to_string()))?;
        Ok(Self {
            contact_z: world.rest_height,
            press_target: 0.0,
            last_good: world.state.particles.clone(),
            monitor,
            world,
        })
    }

    /// Probe depth below the contact level; negative before contact.
    pub fn press_depth(&self) -> f64 {
        self.contact_z - self.world.state.particles[self.monitor.object_probe].position.z
    }

    /// Particle state before the most recent step.
    pub fn last_good(&self) -> &[Particle] {
        &self.last_good
    }

    fn step(
        &mut self,
        motion: &ObjectMotion,
        phase: usize,
        on_step: &mut dyn FnMut(&StepEvent, &World) -> Result<(), ScenarioError>,
    ) -> Result<RestOutcome, ScenarioError> {
        self.last_good.clone_from(&self.world.state.particles);
        let outcome = relative_rest_loop(&mut self.world.state, motion, &mut self.monitor).map_err(|source| {
            ScenarioError::Fault {
                context: format!("phase {phase}, step {}", self.world.state.steps),
                source,
                snapshot: None,
            }
        })?;
        self.world.axis += motion.linear * self.world.state.cfg.dt;
        self.monitor.track(&self.world.state.particles);
        on_step(
            &StepEvent {
                phase,
                step: self.world.state.steps,
                outcome,
            },
            &self.world,
        )?;
        Ok(outcome)
    }

    /// Runs one phase. The final step of a motion is slowed so that the
    /// probe lands on the target.
    pub fn run_phase(
        &mut self,
        index: usize,
        phase: &TrajectoryPhase,
        on_step: &mut dyn FnMut(&StepEvent, &World) -> Result<(), ScenarioError>,
    ) -> Result<PhaseReport, ScenarioError> {
        let dt = self.world.state.cfg.dt;
        self.monitor.center = self.world.axis;
        self.monitor.begin_phase(&self.world.state.particles);
        let mut report = PhaseReport {
            kind: phase.kind(),
            commanded: phase.magnitude(),
            measured: 0.0,
            steps: 0,
            unconverged: 0,
            max_ratio: None,
        };
        let record = |r: &mut PhaseReport, o: RestOutcome| {
            r.steps += 1;
            if !o.converged {
                r.unconverged += 1;
            }
            if let Some(x) = o.ratio {
                r.max_ratio = Some(r.max_ratio.map_or(x, |m: f64| m.max(x)));
            }
        };

        // remaining progress and the motion that covers it
        let plan = |d: &Self, speed: f64| -> Option<ObjectMotion> {
            match *phase {
                TrajectoryPhase::Press { .. } => {
                    let rem = d.press_target - d.press_depth();
                    (rem > DONE_TOL).then(|| ObjectMotion::translation(Vector3::new(0.0, 0.0, -speed.min(rem / dt))))
                }
                TrajectoryPhase::Slide {
                    distance,
                    heading_degrees,
                    ..
                } => {
                    let (s, c) = heading_degrees.to_radians().sin_cos();
                    let dir = Vector3::new(c, s, 0.0);
                    let done = measure_progress(&d.monitor, &d.world.state).displacement.dot(&dir);
                    let rem = distance - done;
                    (rem > DONE_TOL).then(|| ObjectMotion::translation(dir * speed.min(rem / dt)))
                }
                TrajectoryPhase::Rotate { angle, clockwise, .. } => {
                    let sign = if clockwise { -1.0 } else { 1.0 };
                    let done = sign * measure_progress(&d.monitor, &d.world.state).rotation_angle;
                    let rem = angle - done;
                    (rem > DONE_TOL).then(|| {
                        let rate = speed.min(rem / dt).to_radians();
                        ObjectMotion::rotation(sign * rate, d.world.axis)
                    })
                }
                TrajectoryPhase::Dwell { .. } => None,
            }
        };

        match *phase {
            TrajectoryPhase::Dwell { duration, .. } => {
                let n = (duration / dt).round() as usize;
                for _ in 0..n {
                    let o = self.step(&ObjectMotion::rest(), index, on_step)?;
                    record(&mut report, o);
                }
                report.measured = report.steps as f64 * dt;
                report.commanded = duration;
                return Ok(report);
            }
            TrajectoryPhase::Press { depth, .. } => {
                self.press_target += depth;
                report.commanded = self.press_target;
            }
            _ => {}
        }

        let speed = phase.speed().expect("moving phase");
        let start_gap = match phase.kind() {
            PhaseKind::Press => (self.press_target - self.press_depth()).max(0.0),
            _ => phase.magnitude(),
        };
        let limit = 2 * (start_gap / (speed * dt)).ceil() as usize + 100;
        while let Some(motion) = plan(self, speed) {
            if report.steps >= limit {
                return Err(ScenarioError::Fault {
                    context: format!("phase {index}"),
                    source: crate::mpm::SimError::Fault {
                        particle: self.monitor.object_probe,
                        reason: format!("target not reached after {limit} steps"),
                    },
                    snapshot: None,
                });
            }
            let o = self.step(&motion, index, on_step)?;
            record(&mut report, o);
        }
        let progress = measure_progress(&self.monitor, &self.world.state);
        report.measured = match *phase {
            TrajectoryPhase::Press { .. } => self.press_depth(),
            TrajectoryPhase::Slide { heading_degrees, .. } => {
                let (s, c) = heading_degrees.to_radians().sin_cos();
                progress.displacement.dot(&Vector3::new(c, s, 0.0))
            }
            TrajectoryPhase::Rotate { clockwise, .. } => {
                if clockwise {
                    -progress.rotation_angle
                } else {
                    progress.rotation_angle
                }
            }
            TrajectoryPhase::Dwell { .. } => unreachable!(),
        };
        Ok(report)
    }
}
