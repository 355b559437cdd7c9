use std::f64::consts::{PI, TAU};

use super::protocol::{ClientMessage, RegionInfo, ServerMessage};
use super::SceneFile;
use crate::actuation::{ActuationSignal, RegionDrive};
use crate::dynamics::{SimConfig, SimError, SimState};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Playback {
    Running,
    Paused,
}

/// One live simulation: the only mutator of its [`SimState`]. Commands are
/// applied between steps; the step index is the session clock.
#[derive(Debug, Clone)]
pub struct Session {
    scene: SceneFile,
    cfg: SimConfig,
    state: SimState,
    drive: RegionDrive,
    playback: Playback,
    decimation: u64,
}

/// New phase for `new` so that each harmonic's contribution (times its
/// amplitude scale) keeps its value, and where possible its direction of
/// travel, at time `t`.
pub fn continue_phase(
    old: &ActuationSignal,
    old_scale: f64,
    mut new: ActuationSignal,
    new_scale: f64,
    t: f64,
) -> ActuationSignal {
    for (k, h) in new.harmonics.iter_mut().enumerate() {
        let (value, slope, old_angle) = match old.harmonics.get(k) {
            Some(o) => {
                let angle = TAU * o.f * t + o.phi;
                (old_scale * o.a * angle.sin(), old_scale * o.a * angle.cos(), Some(angle))
            }
            None => (0.0, 0.0, None),
        };
        let span = new_scale * h.a;
        let angle = if span == 0.0 {
            // nothing to match; keep the old oscillator's angle if there was one
            old_angle.unwrap_or(0.0)
        } else {
            let r = (value / span).clamp(-1.0, 1.0);
            let rising = r.asin();
            let falling = PI - rising;
            if slope * span < 0.0 {
                falling
            } else {
                rising
            }
        };
        h.phi = (angle - TAU * h.f * t).rem_euclid(TAU);
    }
    new
}

impl Session {
    pub fn new(
        scene: SceneFile,
        signals: Vec<ActuationSignal>,
        cfg: SimConfig,
        decimation: u64,
    ) -> Result<Self, SimError> {
        cfg.check_stability(&scene.lattice)?;
        if signals.len() != scene.lattice.regions.len() {
            return Err(SimError::InvalidConfig(format!(
                "{} signals for {} regions",
                signals.len(),
                scene.lattice.regions.len()
            )));
        }
        let drive = RegionDrive::with_signals(&scene.lattice, signals, cfg.rest_clamp_epsilon);
        Ok(Self {
            state: SimState::new(scene.lattice.clone()),
            scene,
            cfg,
            drive,
            playback: Playback::Running,
            decimation: decimation.max(1),
        })
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn playback(&self) -> Playback {
        self.playback
    }

    pub fn signals(&self) -> &[ActuationSignal] {
        &self.drive.signals
    }

    fn regions(&self) -> Vec<RegionInfo> {
        let mut regions = RegionInfo::from_lattice(&self.scene.lattice);
        for (r, (s, scale)) in regions
            .iter_mut()
            .zip(self.drive.signals.iter().zip(&self.drive.amplitude_scales))
        {
            r.harmonics = s.harmonics.clone();
            r.amplitude_scale = *scale;
        }
        regions
    }

    pub fn hello(&self) -> ServerMessage {
        ServerMessage::Hello {
            binding: self.scene.binding.clone(),
            mesh: self.scene.mesh.clone(),
            regions: self.regions(),
            dt: self.cfg.dt,
        }
    }

    pub fn frame(&self) -> ServerMessage {
        ServerMessage::Frame {
            step: self.state.steps,
            t: self.state.time,
            positions: self.state.positions(),
        }
    }

    /// Applies one client command. Returns the direct reply, if any.
    pub fn handle(&mut self, msg: ClientMessage) -> Option<ServerMessage> {
        match msg {
            ClientMessage::SetParams {
                region,
                harmonics,
                amplitude_scale,
            } => {
                if region >= self.drive.signals.len() {
                    return Some(ServerMessage::error(format!("unknown region {region}")));
                }
                if !(amplitude_scale >= 0.0 && amplitude_scale.is_finite()) {
                    return Some(ServerMessage::error("amplitude_scale must be >= 0"));
                }
                let signal = ActuationSignal { harmonics };
                if let Err(e) = signal.validate() {
                    return Some(ServerMessage::error(e.to_string()));
                }
                let scale = if self.scene.lattice.regions[region].pinned {
                    0.0
                } else {
                    amplitude_scale
                };
                let old = &self.drive.signals[region];
                let continued = continue_phase(
                    old,
                    self.drive.amplitude_scales[region],
                    signal,
                    scale,
                    self.state.time,
                );
                self.drive.signals[region] = continued;
                self.drive.amplitude_scales[region] = scale;
                None
            }
            ClientMessage::Poke {
                point,
                force,
                radius,
                duration,
            } => {
                if !(radius > 0.0 && duration > 0.0) || !force.iter().all(|f| f.is_finite()) {
                    return Some(ServerMessage::error("poke needs radius > 0, duration > 0"));
                }
                self.state.apply_poke(point, force, radius, duration);
                None
            }
            ClientMessage::Pause => {
                self.playback = Playback::Paused;
                None
            }
            ClientMessage::Resume => {
                if self.state.halted {
                    return Some(ServerMessage::error("simulation halted; reset first"));
                }
                self.playback = Playback::Running;
                None
            }
            ClientMessage::Reset => {
                self.state = SimState::new(self.scene.lattice.clone());
                None
            }
            ClientMessage::Snapshot => Some(ServerMessage::Snapshot {
                step: self.state.steps,
                t: self.state.time,
                positions: self.state.positions(),
                regions: self.regions(),
                paused: self.playback == Playback::Paused,
            }),
        }
    }

    /// Steps once if running. Returns a frame when the new step index is a
    /// multiple of the stream decimation. Instability pauses the session.
    pub fn advance(&mut self) -> Result<Option<ServerMessage>, SimError> {
        if self.playback == Playback::Paused {
            return Ok(None);
        }
        if let Err(e) = self.state.step(&self.cfg, &self.drive) {
            self.playback = Playback::Paused;
            return Err(e);
        }
        Ok(self.state.steps.is_multiple_of(self.decimation).then(|| self.frame()))
    }
}
