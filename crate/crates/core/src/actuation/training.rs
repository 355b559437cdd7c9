use serde::{Deserialize, Serialize};

use super::ActuationError;
use crate::dynamics::{ForceField, Passive, SimConfig, SimState};
use crate::lattice::{Lattice, Particle, SkinBinding};
use crate::mesh_io::{KeyframeTrack, TriMesh};
use crate::Vec3;

/// Zero-length spring-damper tying one particle to a moving keyframe target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Anchor {
    /// Mesh vertex whose track drives this particle.
    pub vertex: usize,
    /// Particle rest position minus vertex rest position; the target is the
    /// vertex's track position plus this offset.
    pub offset: Vec3,
    /// Coupling stiffness (N/m).
    pub stiffness: f64,
    /// Coupling damping (N s/m).
    pub damping: f64,
}

/// Samples taken once per step after the transient period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recording {
    /// Sampling interval (s).
    pub dt: f64,
    /// Simulation time of the first sample (s).
    pub start_time: f64,
    /// Steps discarded as transient before the first sample.
    pub transient_steps: usize,
    /// Constraint lengths, indexed `[constraint][sample]`.
    pub lengths: Vec<Vec<f64>>,
    /// Anchor forces on each particle, indexed `[particle][sample]`.
    pub anchor_forces: Vec<Vec<Vec3>>,
}

impl Recording {
    pub fn samples(&self) -> usize {
        self.lengths.first().map_or_else(
            || self.anchor_forces.first().map_or(0, Vec::len),
            Vec::len,
        )
    }

    pub fn sample_rate(&self) -> f64 {
        1.0 / self.dt
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingCoupling {
    pub anchors: Vec<Anchor>,
    pub track: KeyframeTrack,
    pub recording: Option<Recording>,
}

impl TrainingCoupling {
    /// Anchor target position and velocity of particle `i` at time `t`.
    pub fn target(&self, i: usize, t: f64) -> (Vec3, Vec3) {
        let a = &self.anchors[i];
        let (x, v) = self.track.position_velocity(a.vertex, t);
        (x + a.offset, v)
    }

    fn anchor_force(&self, i: usize, p: &Particle, t: f64) -> Vec3 {
        let a = &self.anchors[i];
        let (x, v) = self.target(i, t);
        -(p.position - x) * a.stiffness - (p.velocity - v) * a.damping
    }

    /// Force field applying every anchor; remembers the forces of the last
    /// substep.
    pub fn field(&self) -> CouplingField<'_> {
        CouplingField {
            coupling: self,
            last: vec![Vec3::zeros(); self.anchors.len()],
        }
    }
}

pub struct CouplingField<'a> {
    coupling: &'a TrainingCoupling,
    last: Vec<Vec3>,
}

impl CouplingField<'_> {
    pub fn last_forces(&self) -> &[Vec3] {
        &self.last
    }
}

impl ForceField for CouplingField<'_> {
    fn accumulate(&mut self, particles: &[Particle], t: f64, forces: &mut [Vec3], substep_end: bool) {
        for (i, p) in particles.iter().enumerate() {
            let f = self.coupling.anchor_force(i, p, t);
            forces[i] += f;
            if substep_end {
                self.last[i] = f;
            }
        }
    }
}

/// Anchors every particle to its bind-time nearest vertex of the training
/// mesh. Targets follow the vertex's displacement from its rest position.
pub fn couple_to_keyframes(
    lattice: &Lattice,
    track: &KeyframeTrack,
    mesh: &TriMesh,
    binding: &SkinBinding,
    stiffness: f64,
    damping: f64,
) -> Result<TrainingCoupling, ActuationError> {
    if binding
        .validate(mesh.vertex_count(), lattice.particles.len())
        .is_err()
    {
        return Err(ActuationError::MissingBinding);
    }
    if !(stiffness > 0.0 && damping >= 0.0) {
        return Err(ActuationError::InvalidCoupling(format!(
            "stiffness {stiffness} must be > 0 and damping {damping} >= 0"
        )));
    }
    if track.width() != mesh.vertex_count() {
        return Err(ActuationError::InvalidCoupling(format!(
            "track width {} differs from mesh vertex count {}",
            track.width(),
            mesh.vertex_count()
        )));
    }
    let anchors = lattice
        .particles
        .iter()
        .zip(&binding.particle_vertex)
        .map(|(p, &v)| Anchor {
            vertex: v,
            offset: p.position - mesh.vertices[v],
            stiffness,
            damping,
        })
        .collect();
    Ok(TrainingCoupling {
        anchors,
        track: track.clone(),
        recording: None,
    })
}

/// Runs the passive lattice coupled to the track for `duration` seconds and
/// records constraint lengths and anchor forces every step. The first
/// period is discarded as transient and the kept samples span a whole
/// number of periods.
pub fn record_training_run(
    state: &mut SimState,
    coupling: &mut TrainingCoupling,
    cfg: &SimConfig,
    duration: f64,
) -> Result<(), ActuationError> {
    let period = coupling.track.period().ok_or(ActuationError::NoPeriod)?;
    if duration + 1e-9 < 2.0 * period {
        return Err(ActuationError::TooShort {
            needed: 2.0 * period,
            got: duration,
        });
    }
    cfg.validate()?;
    let steps_for = |secs: f64| (secs / cfg.dt).round() as usize;
    let transient_steps = steps_for(period);
    let whole_periods = ((duration - period) / period + 1e-9).floor();
    let kept = steps_for(whole_periods * period);

    let n_constraints = state.lattice.constraints.len();
    let n_particles = state.lattice.particles.len();
    let mut lengths = vec![Vec::with_capacity(kept); n_constraints];
    let mut anchor_forces = vec![Vec::with_capacity(kept); n_particles];
    let mut field = coupling.field();
    let mut start_time = 0.0;

    for step in 0..transient_steps + kept {
        state.step_with(cfg, &Passive, &mut field)?;
        if step < transient_steps {
            continue;
        }
        if step == transient_steps {
            start_time = state.time;
        }
        let particles = &state.lattice.particles;
        for (series, c) in lengths.iter_mut().zip(&state.lattice.constraints) {
            series.push((particles[c.i].position - particles[c.j].position).norm());
        }
        for (series, f) in anchor_forces.iter_mut().zip(field.last_forces()) {
            series.push(*f);
        }
    }
    coupling.recording = Some(Recording {
        dt: cfg.dt,
        start_time,
        transient_steps,
        lengths,
        anchor_forces,
    });
    Ok(())
}
