//! Self-driving layer: periodic rest-length signals per region, keyframe
//! coupling and recording, and Fourier fitting of recorded motion.

mod fit;
mod params;
mod training;

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::RestLengths;
use crate::lattice::{Lattice, SpringConstraint};

pub use fit::{fit_regions, fit_signal, FitReport, RegionFit, SignalFit};
pub use params::{ParamsEntry, ParamsFile};
pub use training::{
    couple_to_keyframes, record_training_run, Anchor, CouplingField, Recording, TrainingCoupling,
};

pub const MAX_HARMONICS: usize = 4;
/// Bound on the summed absolute amplitudes of one signal.
pub const MAX_TOTAL_AMPLITUDE: f64 = 0.9;
/// Lowest frequency (Hz) a projected signal may carry.
pub const MIN_FREQUENCY: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum ActuationError {
    #[error("invalid actuation signal: {0}")]
    InvalidSignal(String),
    #[error("harmonic count must be between 1 and {MAX_HARMONICS}, got {0}")]
    InvalidHarmonicCount(usize),
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("lattice and mesh have no skin binding")]
    MissingBinding,
    #[error("keyframe track has no period")]
    NoPeriod,
    #[error("recording must cover at least two periods ({needed:.3} s), got {got:.3} s")]
    TooShort { needed: f64, got: f64 },
    #[error("no recording present")]
    NoRecording,
    #[error("invalid coupling: {0}")]
    InvalidCoupling(String),
    #[error(transparent)]
    Sim(#[from] crate::dynamics::SimError),
    #[error("params file: {0}")]
    Params(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Harmonic {
    /// Dimensionless amplitude.
    pub a: f64,
    /// Frequency (Hz).
    pub f: f64,
    /// Phase (rad).
    pub phi: f64,
}

impl Harmonic {
    pub fn new(a: f64, f: f64, phi: f64) -> Self {
        Self { a, f, phi }
    }

    pub fn value(&self, t: f64) -> f64 {
        self.a * (TAU * self.f * t + self.phi).sin()
    }
}

/// Multi-harmonic periodic modulation of rest lengths.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ActuationSignal {
    pub harmonics: Vec<Harmonic>,
}

impl ActuationSignal {
    pub fn new(harmonics: Vec<Harmonic>) -> Result<Self, ActuationError> {
        let s = Self { harmonics };
        s.validate()?;
        Ok(s)
    }

    pub fn sine(a: f64, f: f64, phi: f64) -> Self {
        Self {
            harmonics: vec![Harmonic::new(a, f, phi)],
        }
    }

    pub fn validate(&self) -> Result<(), ActuationError> {
        let bad = |m: String| Err(ActuationError::InvalidSignal(m));
        if self.harmonics.len() > MAX_HARMONICS {
            return bad(format!("{} harmonics (max {MAX_HARMONICS})", self.harmonics.len()));
        }
        for h in &self.harmonics {
            if !(h.a.is_finite() && h.phi.is_finite() && h.f.is_finite() && h.f > 0.0) {
                return bad(format!("harmonic {h:?} is not finite with f > 0"));
            }
        }
        if self.total_amplitude() > MAX_TOTAL_AMPLITUDE + 1e-12 {
            return bad(format!(
                "sum of |a| is {} (max {MAX_TOTAL_AMPLITUDE})",
                self.total_amplitude()
            ));
        }
        if self.harmonics.windows(2).any(|w| w[0].f >= w[1].f) {
            return bad("frequencies must be strictly increasing".into());
        }
        Ok(())
    }

    pub fn total_amplitude(&self) -> f64 {
        self.harmonics.iter().map(|h| h.a.abs()).sum()
    }

    /// Modulation `sum_k a_k sin(2 pi f_k t + phi_k)`.
    pub fn value(&self, t: f64) -> f64 {
        self.harmonics.iter().map(|h| h.value(t)).sum()
    }

    /// Forces the signal into its invariants: frequencies at least
    /// [`MIN_FREQUENCY`] and strictly increasing, amplitudes scaled down to
    /// [`MAX_TOTAL_AMPLITUDE`], phases wrapped into `[0, 2 pi)`.
    pub fn project(&mut self) {
        self.harmonics.truncate(MAX_HARMONICS);
        for h in &mut self.harmonics {
            h.f = h.f.max(MIN_FREQUENCY);
            h.phi = h.phi.rem_euclid(TAU);
            if h.phi >= TAU {
                h.phi = 0.0;
            }
        }
        self.harmonics.sort_by(|a, b| a.f.total_cmp(&b.f));
        for k in 1..self.harmonics.len() {
            let floor = self.harmonics[k - 1].f;
            if self.harmonics[k].f <= floor {
                self.harmonics[k].f = floor + MIN_FREQUENCY;
            }
        }
        let total = self.total_amplitude();
        if total > MAX_TOTAL_AMPLITUDE {
            let s = MAX_TOTAL_AMPLITUDE / total;
            for h in &mut self.harmonics {
                h.a *= s;
            }
        }
    }
}

/// Actuated rest length `L0 * clamp(1 + scale * signal(t), eps, 2 - eps)`.
pub fn eval_rest(
    c: &SpringConstraint,
    signal: &ActuationSignal,
    amplitude_scale: f64,
    t: f64,
    epsilon: f64,
) -> f64 {
    c.rest_length0 * (1.0 + amplitude_scale * signal.value(t)).clamp(epsilon, 2.0 - epsilon)
}

/// Rest-length provider driving each constraint by its region's signal.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionDrive {
    pub signals: Vec<ActuationSignal>,
    pub amplitude_scales: Vec<f64>,
    pub epsilon: f64,
}

impl RegionDrive {
    /// Drive from the signals stored on the lattice's regions.
    pub fn from_lattice(lattice: &Lattice, epsilon: f64) -> Self {
        Self {
            signals: lattice.regions.iter().map(|r| r.actuation.clone()).collect(),
            amplitude_scales: lattice.regions.iter().map(|r| r.amplitude_scale).collect(),
            epsilon,
        }
    }

    /// Drive with replacement signals, one per region, keeping the
    /// lattice's amplitude scales.
    pub fn with_signals(lattice: &Lattice, signals: Vec<ActuationSignal>, epsilon: f64) -> Self {
        debug_assert_eq!(signals.len(), lattice.regions.len());
        Self {
            signals,
            amplitude_scales: lattice.regions.iter().map(|r| r.amplitude_scale).collect(),
            epsilon,
        }
    }
}

impl RestLengths for RegionDrive {
    fn rest_length(&self, _: usize, c: &SpringConstraint, t: f64) -> f64 {
        eval_rest(
            c,
            &self.signals[c.region],
            self.amplitude_scales[c.region],
            t,
            self.epsilon,
        )
    }
}
