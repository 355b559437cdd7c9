//! Time stepping: spring-damper forces with actuated rest lengths, transient
//! external pokes, pinning and semi-implicit Euler integration.
//!
//! A [`SimState`] has a single writer. Force accumulation runs in a fixed
//! order, so identical inputs give bitwise-identical trajectories.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::{Lattice, Particle, SpringConstraint};
use crate::Vec3;

/// Below this separation (m) a spring has no defined direction and exerts no force.
pub const SINGULAR_DISTANCE: f64 = 1e-9;
/// Speed (m/s) above which the simulation is declared unstable.
pub const MAX_SPEED: f64 = 1e6;
/// Upper bound on `h * sqrt(k_max * inverse_mass_max)`.
pub const STABILITY_LIMIT: f64 = 0.3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("simulation unstable at step {step} (particle {particle})")]
    InstabilityDetected { step: u64, particle: usize },
    #[error("timestep too large: h*sqrt(k/m) = {value:.4} >= {STABILITY_LIMIT}")]
    InstabilityRisk { value: f64 },
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Step length (s).
    pub dt: f64,
    pub substeps: u32,
    /// Acceleration applied to unpinned particles (m/s^2).
    pub gravity: Vec3,
    /// Velocity decay rate towards the world frame (1/s).
    pub global_damping: f64,
    /// Rest lengths are clamped to `[eps L0, (2 - eps) L0]`.
    pub rest_clamp_epsilon: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 1.0 / 240.0,
            substeps: 1,
            gravity: Vec3::zeros(),
            global_damping: 0.0,
            rest_clamp_epsilon: 0.1,
        }
    }
}

impl SimConfig {
    pub fn with_dt(dt: f64) -> Self {
        Self {
            dt,
            ..Self::default()
        }
    }

    /// Substep length.
    pub fn h(&self) -> f64 {
        self.dt / self.substeps as f64
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::InvalidConfig(m.into()));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("dt must be positive");
        }
        if self.substeps == 0 {
            return bad("substeps must be at least 1");
        }
        if !(self.global_damping >= 0.0) {
            return bad("global_damping must be non-negative");
        }
        if !(self.rest_clamp_epsilon > 0.0 && self.rest_clamp_epsilon < 1.0) {
            return bad("rest_clamp_epsilon must lie in (0, 1)");
        }
        if !self.gravity.iter().all(|g| g.is_finite()) {
            return bad("gravity must be finite");
        }
        Ok(())
    }

    /// Rejects configurations where `h * sqrt(k_max * inverse_mass_max)`
    /// reaches the stability limit for this lattice.
    pub fn check_stability(&self, lattice: &Lattice) -> Result<(), SimError> {
        self.validate()?;
        let value = self.h() * (lattice.max_stiffness() * lattice.max_inverse_mass()).sqrt();
        if value >= STABILITY_LIMIT {
            return Err(SimError::InstabilityRisk { value });
        }
        Ok(())
    }

    pub fn clamp_rest(&self, rest: f64, rest_length0: f64) -> f64 {
        let eps = self.rest_clamp_epsilon;
        rest.clamp(eps * rest_length0, (2.0 - eps) * rest_length0)
    }
}

/// Supplies the actuated rest length of every constraint over time.
pub trait RestLengths {
    fn rest_length(&self, index: usize, constraint: &SpringConstraint, t: f64) -> f64;
}

/// Springs at their construction-time rest length.
#[derive(Debug, Clone, Copy, Default)]
pub struct Passive;

impl RestLengths for Passive {
    fn rest_length(&self, _: usize, c: &SpringConstraint, _: f64) -> f64 {
        c.rest_length0
    }
}

impl<R: RestLengths + ?Sized> RestLengths for &R {
    fn rest_length(&self, index: usize, c: &SpringConstraint, t: f64) -> f64 {
        (**self).rest_length(index, c, t)
    }
}

/// Additional per-particle forces evaluated every substep (e.g. keyframe
/// anchors). `substep_end` is true on the last substep of a step.
pub trait ForceField {
    fn accumulate(&mut self, particles: &[Particle], t: f64, forces: &mut [Vec3], substep_end: bool);
}

/// No extra forces.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoField;

impl ForceField for NoField {
    fn accumulate(&mut self, _: &[Particle], _: f64, _: &mut [Vec3], _: bool) {}
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExternalForce {
    pub particle: usize,
    pub force: Vec3,
    pub expires_at: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimState {
    pub lattice: Lattice,
    pub time: f64,
    /// Completed steps; the authoritative clock.
    pub steps: u64,
    pub external_forces: Vec<ExternalForce>,
    /// Set once instability is detected; further stepping is refused.
    pub halted: bool,
    #[serde(skip)]
    scratch: Vec<Vec3>,
}

/// Force on particle `i` from spring `c` at rest length `rest`; the force on
/// `j` is its negation.
pub fn constraint_force(c: &SpringConstraint, particles: &[Particle], rest: f64) -> Vec3 {
    let (pi, pj) = (&particles[c.i], &particles[c.j]);
    let d = pi.position - pj.position;
    let len = d.norm();
    if len < SINGULAR_DISTANCE {
        return Vec3::zeros();
    }
    let dir = d / len;
    let v_rel = pi.velocity - pj.velocity;
    dir * (-c.stiffness * (len - rest) - c.damping * v_rel.dot(&dir))
}

impl SimState {
    pub fn new(lattice: Lattice) -> Self {
        Self {
            lattice,
            time: 0.0,
            steps: 0,
            external_forces: Vec::new(),
            halted: false,
            scratch: Vec::new(),
        }
    }

    pub fn positions(&self) -> Vec<Vec3> {
        self.lattice.positions()
    }

    pub fn total_momentum(&self) -> Vec3 {
        self.lattice
            .particles
            .iter()
            .filter(|p| !p.is_pinned())
            .map(|p| p.velocity / p.inverse_mass)
            .sum()
    }

    /// Advances by one `dt` with no extra force field.
    pub fn step(&mut self, cfg: &SimConfig, rest: &impl RestLengths) -> Result<(), SimError> {
        self.step_with(cfg, rest, &mut NoField)
    }

    pub fn step_with(
        &mut self,
        cfg: &SimConfig,
        rest: &impl RestLengths,
        field: &mut impl ForceField,
    ) -> Result<(), SimError> {
        if self.halted {
            return Err(SimError::InstabilityDetected {
                step: self.steps,
                particle: 0,
            });
        }
        let h = cfg.h();
        let decay = (1.0 - h * cfg.global_damping).max(0.0);
        let n = self.lattice.particles.len();
        let mut forces = std::mem::take(&mut self.scratch);
        forces.resize(n, Vec3::zeros());

        for sub in 0..cfg.substeps {
            let t = self.time + sub as f64 * h;
            forces.iter_mut().for_each(|f| *f = Vec3::zeros());
            for e in &self.external_forces {
                if e.expires_at > t {
                    forces[e.particle] += e.force;
                }
            }
            let particles = &self.lattice.particles;
            field.accumulate(particles, t, &mut forces, sub + 1 == cfg.substeps);
            for (k, c) in self.lattice.constraints.iter().enumerate() {
                let r = cfg.clamp_rest(rest.rest_length(k, c, t), c.rest_length0);
                let f = constraint_force(c, particles, r);
                forces[c.i] += f;
                forces[c.j] -= f;
            }
            for (idx, (p, f)) in self.lattice.particles.iter_mut().zip(&forces).enumerate() {
                if p.is_pinned() {
                    continue;
                }
                p.velocity = (p.velocity + (f * p.inverse_mass + cfg.gravity) * h) * decay;
                p.position += p.velocity * h;
                if p.velocity.norm() > MAX_SPEED || !p.position.iter().all(|x| x.is_finite()) {
                    self.halted = true;
                    self.scratch = forces;
                    return Err(SimError::InstabilityDetected {
                        step: self.steps,
                        particle: idx,
                    });
                }
            }
        }
        self.scratch = forces;
        self.steps += 1;
        self.time += cfg.dt;
        let now = self.time;
        self.external_forces.retain(|e| e.expires_at > now);
        Ok(())
    }

    /// Queues a linear-falloff disturbance on every particle within `radius`
    /// of `point`, lasting `duration` seconds. Returns the number of
    /// particles affected.
    pub fn apply_poke(&mut self, point: Vec3, force: Vec3, radius: f64, duration: f64) -> usize {
        debug_assert!(radius > 0.0 && duration > 0.0);
        let expires_at = self.time + duration;
        let before = self.external_forces.len();
        for (i, p) in self.lattice.particles.iter().enumerate() {
            let dist = (p.position - point).norm();
            if dist < radius {
                self.external_forces.push(ExternalForce {
                    particle: i,
                    force: force * (1.0 - dist / radius),
                    expires_at,
                });
            }
        }
        self.external_forces.len() - before
    }

    /// Kinetic + spring + gravitational potential energy, with rest lengths
    /// frozen at the current time.
    pub fn mechanical_energy(&self, cfg: &SimConfig, rest: &impl RestLengths) -> f64 {
        let particles = &self.lattice.particles;
        let mut e = 0.0;
        for p in particles.iter().filter(|p| !p.is_pinned()) {
            let m = 1.0 / p.inverse_mass;
            e += 0.5 * m * p.velocity.norm_squared() - m * cfg.gravity.dot(&p.position);
        }
        for (k, c) in self.lattice.constraints.iter().enumerate() {
            let r = cfg.clamp_rest(rest.rest_length(k, c, self.time), c.rest_length0);
            let len = (particles[c.i].position - particles[c.j].position).norm();
            e += 0.5 * c.stiffness * (len - r).powi(2);
        }
        e
    }
}
