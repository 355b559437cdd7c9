//! Stochastic refinement of per-region actuation so the free-running
//! simulation follows a target keyframe track.
//!
//! The search is simulated annealing over small populations. Candidate
//! generation and acceptance run on one thread and own the RNG; candidate
//! evaluations are independent and may run in parallel without changing
//! the outcome.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::actuation::{couple_to_keyframes, ActuationError, ActuationSignal, RegionDrive, TrainingCoupling};
use crate::dynamics::{NoField, SimConfig, SimError, SimState};
use crate::lattice::{Lattice, SkinBinding};
use crate::mesh_io::{KeyframeTrack, TriMesh};

#[derive(Debug, Error)]
pub enum TuneError {
    #[error("track has no period_frames")]
    NoPeriod,
    #[error("duration {duration:.3} s must exceed one period ({period:.3} s)")]
    DurationTooShort { duration: f64, period: f64 },
    #[error("expected {expected} region signals, got {got}")]
    ParamCount { expected: usize, got: usize },
    #[error("invalid tune config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Actuation(#[from] ActuationError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Everything an objective evaluation needs: the graphical mesh, the rest
/// lattice, their binding and the target motion.
#[derive(Debug, Clone)]
pub struct Scene {
    pub mesh: TriMesh,
    pub lattice: Lattice,
    pub binding: SkinBinding,
    pub track: KeyframeTrack,
    /// Keyframe targets per particle; anchor stiffness/damping are only
    /// used for coupled runs.
    targets: TrainingCoupling,
}

/// Coupling used for the anchored reference run in drift measurements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingParams {
    pub stiffness: f64,
    pub damping: f64,
}

impl Default for CouplingParams {
    fn default() -> Self {
        Self {
            stiffness: 500.0,
            damping: 2.0,
        }
    }
}

impl Scene {
    pub fn new(
        mesh: TriMesh,
        lattice: Lattice,
        binding: SkinBinding,
        track: KeyframeTrack,
        coupling: CouplingParams,
    ) -> Result<Self, TuneError> {
        if track.period_frames.is_none() {
            return Err(TuneError::NoPeriod);
        }
        let targets = couple_to_keyframes(
            &lattice,
            &track,
            &mesh,
            &binding,
            coupling.stiffness,
            coupling.damping,
        )?;
        Ok(Self {
            mesh,
            lattice,
            binding,
            track,
            targets,
        })
    }

    pub fn period(&self) -> f64 {
        self.track.period().expect("checked at construction")
    }

    pub fn region_count(&self) -> usize {
        self.lattice.regions.len()
    }

    /// Signals currently stored on the lattice's regions.
    pub fn lattice_signals(&self) -> Vec<ActuationSignal> {
        self.lattice.regions.iter().map(|r| r.actuation.clone()).collect()
    }

    fn check(&self, params: &[ActuationSignal], duration: f64) -> Result<(), TuneError> {
        if params.len() != self.region_count() {
            return Err(TuneError::ParamCount {
                expected: self.region_count(),
                got: params.len(),
            });
        }
        let period = self.period();
        if duration <= period + 1e-12 {
            return Err(TuneError::DurationTooShort { duration, period });
        }
        Ok(())
    }

    /// RMS particle distance to the keyframe targets over the settled part
    /// of a run, divided by the mesh diagonal. Unstable runs score +inf.
    fn score(
        &self,
        params: &[ActuationSignal],
        cfg: &SimConfig,
        duration: f64,
        coupled: bool,
    ) -> Result<f64, TuneError> {
        self.check(params, duration)?;
        cfg.validate()?;
        let drive = RegionDrive::with_signals(&self.lattice, params.to_vec(), cfg.rest_clamp_epsilon);
        let mut state = SimState::new(self.lattice.clone());
        let steps = (duration / cfg.dt).round() as usize;
        let transient = (self.period() / cfg.dt).round() as usize;
        let mut sum = 0.0;
        let mut count = 0usize;
        let mut field = self.targets.field();
        for step in 0..steps {
            let res = if coupled {
                state.step_with(cfg, &drive, &mut field)
            } else {
                state.step_with(cfg, &drive, &mut NoField)
            };
            match res {
                Ok(()) => {}
                Err(SimError::InstabilityDetected { .. }) => return Ok(f64::INFINITY),
                Err(e) => return Err(e.into()),
            }
            if step < transient {
                continue;
            }
            for (i, p) in state.lattice.particles.iter().enumerate() {
                let (target, _) = self.targets.target(i, state.time);
                sum += (p.position - target).norm_squared();
            }
            count += state.lattice.particles.len();
        }
        if count == 0 {
            return Ok(0.0);
        }
        Ok((sum / count as f64).sqrt() / self.mesh.diagonal())
    }
}

/// Tracking error of the free (uncoupled) simulation driven by `params`.
pub fn objective(
    params: &[ActuationSignal],
    scene: &Scene,
    cfg: &SimConfig,
    duration: f64,
) -> Result<f64, TuneError> {
    scene.score(params, cfg, duration, false)
}

/// Open-loop drift: free-run objective minus the objective of the same
/// drive with the keyframe anchors attached.
pub fn evaluate_drift(
    params: &[ActuationSignal],
    scene: &Scene,
    cfg: &SimConfig,
    duration: f64,
) -> Result<f64, TuneError> {
    let free = scene.score(params, cfg, duration, false)?;
    let coupled = scene.score(params, cfg, duration, true)?;
    Ok(free - coupled)
}

/// Gaussian step scales.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepScales {
    pub amplitude: f64,
    /// Hz
    pub frequency: f64,
    /// rad
    pub phase: f64,
}

impl Default for StepScales {
    fn default() -> Self {
        Self {
            amplitude: 0.01,
            frequency: 0.02,
            phase: 0.1,
        }
    }
}

fn default_parallel() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TuneConfig {
    pub iterations: usize,
    pub initial_temperature: f64,
    /// Geometric cooling factor applied after every iteration.
    pub cooling: f64,
    pub sigma: StepScales,
    pub seed: u64,
    /// Simulated seconds per objective evaluation.
    pub eval_duration: f64,
    /// Candidates per iteration.
    pub population: usize,
    #[serde(default = "default_parallel")]
    pub parallel: bool,
}

impl Default for TuneConfig {
    fn default() -> Self {
        Self {
            iterations: 200,
            initial_temperature: 1e-3,
            cooling: 0.98,
            sigma: StepScales::default(),
            seed: 0,
            eval_duration: 2.0,
            population: 8,
            parallel: true,
        }
    }
}

impl TuneConfig {
    pub fn validate(&self) -> Result<(), TuneError> {
        let bad = |m: &str| Err(TuneError::InvalidConfig(m.into()));
        if self.iterations == 0 || self.population == 0 {
            return bad("iterations and population must be at least 1");
        }
        if !(self.initial_temperature > 0.0) {
            return bad("initial_temperature must be positive");
        }
        if !(self.cooling > 0.0 && self.cooling < 1.0) {
            return bad("cooling must lie in (0, 1)");
        }
        let s = self.sigma;
        if !(s.amplitude >= 0.0 && s.frequency >= 0.0 && s.phase >= 0.0) {
            return bad("sigma must be non-negative");
        }
        if !(self.eval_duration > 0.0) {
            return bad("eval_duration must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Objective of the current (accepted) parameters after this iteration.
    pub objective: f64,
    /// Lowest objective seen so far.
    pub best_objective: f64,
    pub temperature: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneReport {
    pub best_params: Vec<ActuationSignal>,
    pub best_objective: f64,
    pub initial_objective: f64,
    pub history: Vec<IterationRecord>,
    pub evaluations: usize,
    pub rejected_unstable: usize,
}

fn perturb(params: &[ActuationSignal], sigma: &StepScales, rng: &mut ChaCha8Rng) -> Vec<ActuationSignal> {
    params
        .iter()
        .map(|signal| {
            let mut s = signal.clone();
            for h in &mut s.harmonics {
                let (za, zf, zp): (f64, f64, f64) = (
                    rng.sample(StandardNormal),
                    rng.sample(StandardNormal),
                    rng.sample(StandardNormal),
                );
                h.a += sigma.amplitude * za;
                h.f += sigma.frequency * zf;
                h.phi += sigma.phase * zp;
            }
            s.project();
            s
        })
        .collect()
}

/// Simulated annealing from `initial`, reproducible from `tc.seed`.
pub fn tune(
    scene: &Scene,
    initial: &[ActuationSignal],
    cfg: &SimConfig,
    tc: &TuneConfig,
) -> Result<TuneReport, TuneError> {
    tune_with_progress(scene, initial, cfg, tc, |_| {})
}

pub fn tune_with_progress(
    scene: &Scene,
    initial: &[ActuationSignal],
    cfg: &SimConfig,
    tc: &TuneConfig,
    mut progress: impl FnMut(&IterationRecord),
) -> Result<TuneReport, TuneError> {
    tc.validate()?;
    scene.check(initial, tc.eval_duration)?;
    for s in initial {
        s.validate()?;
    }
    let eval = |p: &Vec<ActuationSignal>| objective(p, scene, cfg, tc.eval_duration);

    let mut rng = ChaCha8Rng::seed_from_u64(tc.seed);
    let mut current = initial.to_vec();
    let mut current_j = eval(&current)?;
    let initial_objective = current_j;
    let mut best = current.clone();
    let mut best_j = current_j;
    let mut evaluations = 1;
    let mut rejected_unstable = usize::from(!current_j.is_finite());
    let mut temperature = tc.initial_temperature;
    let mut history = Vec::with_capacity(tc.iterations);

    for iteration in 0..tc.iterations {
        let candidates: Vec<Vec<ActuationSignal>> = (0..tc.population)
            .map(|_| perturb(&current, &tc.sigma, &mut rng))
            .collect();
        let scores: Vec<f64> = if tc.parallel {
            candidates.par_iter().map(eval).collect::<Result<_, _>>()?
        } else {
            candidates.iter().map(eval).collect::<Result<_, _>>()?
        };
        evaluations += scores.len();
        rejected_unstable += scores.iter().filter(|j| !j.is_finite()).count();

        // lowest objective wins; ties go to the earliest candidate
        let (pick, pick_j) = scores
            .iter()
            .copied()
            .enumerate()
            .map(|(i, j)| (i, if j.is_nan() { f64::INFINITY } else { j }))
            .fold((0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });

        let u: f64 = rng.random();
        let delta = pick_j - current_j;
        let accepted = pick_j.is_finite() && (delta < 0.0 || u < (-delta / temperature).exp());
        if accepted {
            current = candidates[pick].clone();
            current_j = pick_j;
        }
        if pick_j < best_j {
            best = candidates[pick].clone();
            best_j = pick_j;
        }
        let record = IterationRecord {
            iteration,
            objective: current_j,
            best_objective: best_j,
            temperature,
            accepted,
        };
        progress(&record);
        history.push(record);
        temperature *= tc.cooling;
    }

    Ok(TuneReport {
        best_params: best,
        best_objective: best_j,
        initial_objective,
        history,
        evaluations,
        rejected_unstable,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{assign_regions, bind_skin, build_lattice, voxelize, Material, RegionSpec};
    use crate::synthetic;

    fn breathing_scene() -> Scene {
        let m = synthetic::unit_cube();
        let g = voxelize(&m, 2).unwrap();
        let r = assign_regions(&g, &RegionSpec::default()).unwrap();
        let l = build_lattice(&g, &r, &Material::default()).unwrap();
        let b = bind_skin(&m, &l).unwrap();
        let track = synthetic::breathing_track(&m, 30.0, 1.0, 0.1, 1.0);
        Scene::new(m, l, b, track, CouplingParams::default()).unwrap()
    }

    #[test]
    fn zero_params_against_breathing_closed_form() {
        let scene = breathing_scene();
        let cfg = SimConfig::default();
        let j = objective(&[ActuationSignal::default()], &scene, &cfg, 2.0).unwrap();
        // particles stay at rest; the target displacement of the bind vertex
        // is 0.1 sin(2 pi t) (v - c), |v - c| = sqrt(3)/2 for every corner.
        // Its RMS over the sampled steps of a settled period:
        let r = 3f64.sqrt() / 2.0;
        let dt = cfg.dt;
        let n = 240;
        let ms: f64 = (241..=480)
            .map(|k| {
                let t = k as f64 * dt;
                let p = scene.track.position(0, t);
                let base = scene.mesh.vertices[0];
                (p - base).norm_squared()
            })
            .sum::<f64>()
            / n as f64;
        let expected = ms.sqrt() / 3f64.sqrt();
        assert!((j - expected).abs() < 1e-12, "{j} vs {expected}");
        // and close to the continuous value 0.1 r / sqrt(2) / diagonal
        let continuous = 0.1 * r / 2f64.sqrt() / 3f64.sqrt();
        assert!((j - continuous).abs() / continuous < 0.01);
    }

    #[test]
    fn unstable_candidate_scores_infinity() {
        let scene = breathing_scene();
        let cfg = SimConfig {
            rest_clamp_epsilon: 0.1,
            ..SimConfig::with_dt(0.2)
        };
        let j = objective(&[ActuationSignal::sine(0.9, 2.0, 0.0)], &scene, &cfg, 60.0).unwrap();
        assert_eq!(j, f64::INFINITY);
    }

    #[test]
    fn objective_preconditions() {
        let scene = breathing_scene();
        let cfg = SimConfig::default();
        assert!(matches!(
            objective(&[], &scene, &cfg, 2.0),
            Err(TuneError::ParamCount { .. })
        ));
        assert!(matches!(
            objective(&[ActuationSignal::default()], &scene, &cfg, 1.0),
            Err(TuneError::DurationTooShort { .. })
        ));
    }

    #[test]
    fn zero_sigma_echoes_initial() {
        let scene = breathing_scene();
        let cfg = SimConfig::default();
        let init = vec![ActuationSignal::sine(0.08, 1.0, 0.2)];
        let tc = TuneConfig {
            iterations: 1,
            sigma: StepScales {
                amplitude: 0.0,
                frequency: 0.0,
                phase: 0.0,
            },
            ..TuneConfig::default()
        };
        let report = tune(&scene, &init, &cfg, &tc).unwrap();
        let j0 = objective(&init, &scene, &cfg, tc.eval_duration).unwrap();
        assert_eq!(report.best_objective, j0);
        assert_eq!(report.best_params, init);
        assert_eq!(report.evaluations, 1 + tc.population);
    }

    #[test]
    fn seeded_and_parallel_equivalent() {
        let scene = breathing_scene();
        let cfg = SimConfig::default();
        let init = vec![ActuationSignal::sine(0.05, 1.0, 0.0)];
        let tc = TuneConfig {
            iterations: 6,
            population: 4,
            seed: 11,
            ..TuneConfig::default()
        };
        let a = tune(&scene, &init, &cfg, &tc).unwrap();
        let b = tune(&scene, &init, &cfg, &tc).unwrap();
        let serial = tune(&scene, &init, &cfg, &TuneConfig { parallel: false, ..tc }).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, serial);
        assert!(a
            .history
            .windows(2)
            .all(|w| w[1].best_objective <= w[0].best_objective));
        for p in &a.best_params {
            p.validate().unwrap();
        }
    }

    #[test]
    fn static_track_has_no_drift() {
        let m = synthetic::unit_cube();
        let g = voxelize(&m, 2).unwrap();
        let r = assign_regions(&g, &RegionSpec::default()).unwrap();
        let l = build_lattice(&g, &r, &Material::default()).unwrap();
        let b = bind_skin(&m, &l).unwrap();
        let track = KeyframeTrack::new(30.0, Some(30), vec![m.vertices.clone(); 30]).unwrap();
        let scene = Scene::new(m, l, b, track, CouplingParams::default()).unwrap();
        let d = evaluate_drift(&[ActuationSignal::default()], &scene, &SimConfig::default(), 2.0).unwrap();
        assert!(d.abs() < 1e-12);
    }
}
