//! Batch pipeline: `voxelize`, `simulate`, `fit`, `tune` and `serve`.
//!
//! Every command writes deterministic output files for fixed inputs and
//! seed; timing figures only go to stdout.

use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use super::{RuntimeError, SceneFile, Session};
use crate::actuation::{
    couple_to_keyframes, fit_regions, record_training_run, ActuationSignal, FitReport, ParamsFile,
    RegionDrive,
};
use crate::dynamics::{SimConfig, SimState};
use crate::lattice::{bind_skin, Material, RegionSpec};
use crate::mesh_io::{export_frame, frame_path, load_keyframes, load_mesh};
use crate::tuner::{tune_with_progress, CouplingParams, Scene, StepScales, TuneConfig, TuneReport};
use crate::Vec3;

#[derive(Debug, Parser)]
#[command(name = "organ-motion", version, about = "Self-driven soft-body organ motion")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Voxelize a mesh into a region-annotated lattice file.
    Voxelize(VoxelizeArgs),
    /// Play back actuation parameters and export skinned OBJ frames.
    Simulate(SimulateArgs),
    /// Fit per-region actuation signals to a keyframe track.
    Fit(FitArgs),
    /// Refine actuation parameters by simulated annealing.
    Tune(TuneArgs),
    /// Run the live steering service.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Args)]
pub struct StepArgs {
    /// Step length in seconds.
    #[arg(long, default_value_t = 1.0 / 240.0)]
    pub dt: f64,
    #[arg(long, default_value_t = 1)]
    pub substeps: u32,
    /// Velocity decay towards the world frame (1/s).
    #[arg(long, default_value_t = 0.0)]
    pub global_damping: f64,
    /// Gravity as "x,y,z" in m/s^2.
    #[arg(long, value_parser = parse_vec3, default_value = "0,0,0")]
    pub gravity: Vec3,
}

impl Default for StepArgs {
    fn default() -> Self {
        Self {
            dt: 1.0 / 240.0,
            substeps: 1,
            global_damping: 0.0,
            gravity: Vec3::zeros(),
        }
    }
}

impl StepArgs {
    pub fn config(&self) -> SimConfig {
        SimConfig {
            dt: self.dt,
            substeps: self.substeps,
            gravity: self.gravity,
            global_damping: self.global_damping,
            ..SimConfig::default()
        }
    }
}

fn parse_vec3(s: &str) -> Result<Vec3, String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    match parts.as_slice() {
        [x, y, z] => Ok(Vec3::new(*x, *y, *z)),
        _ => Err(format!("expected x,y,z, got {s:?}")),
    }
}

#[derive(Debug, Clone, Args)]
pub struct VoxelizeArgs {
    pub mesh: PathBuf,
    /// Cells along the longest bounding-box axis.
    #[arg(long, default_value_t = 8)]
    pub resolution: usize,
    /// Region spec JSON; defaults to a single region.
    #[arg(long)]
    pub regions: Option<PathBuf>,
    #[arg(long, default_value_t = Material::default().stiffness)]
    pub stiffness: f64,
    #[arg(long, default_value_t = Material::default().damping)]
    pub damping: f64,
    #[arg(long, default_value_t = Material::default().particle_mass)]
    pub mass: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    pub lattice: PathBuf,
    /// Fitted-parameters JSON; defaults to the signals stored in the lattice file.
    #[arg(long)]
    pub params: Option<PathBuf>,
    #[command(flatten)]
    pub step: StepArgs,
    /// Simulated seconds.
    #[arg(long, default_value_t = 2.0)]
    pub duration: f64,
    /// Export rate in frames per second.
    #[arg(long, default_value_t = 30.0)]
    pub fps: f64,
    /// Frame file prefix; frames are written as `<prefix>_0000.obj` etc.
    #[arg(long)]
    pub out: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    pub lattice: PathBuf,
    pub mesh: PathBuf,
    pub keyframes: PathBuf,
    /// Harmonics per region (1 to 4).
    #[arg(short = 'k', long = "harmonics", default_value_t = 1)]
    pub harmonics: usize,
    #[command(flatten)]
    pub step: StepArgs,
    /// Coupling stiffness to the keyframe targets (N/m).
    #[arg(long, default_value_t = CouplingParams::default().stiffness)]
    pub coupling_stiffness: f64,
    #[arg(long, default_value_t = CouplingParams::default().damping)]
    pub coupling_damping: f64,
    /// Recorded periods, the first of which is discarded.
    #[arg(long, default_value_t = 3)]
    pub periods: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct TuneArgs {
    pub lattice: PathBuf,
    pub mesh: PathBuf,
    pub keyframes: PathBuf,
    /// Starting parameters (typically the output of `fit`).
    pub params: PathBuf,
    #[command(flatten)]
    pub step: StepArgs,
    #[arg(long, default_value_t = 200)]
    pub iterations: usize,
    #[arg(long, default_value_t = 8)]
    pub population: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = TuneConfig::default().initial_temperature)]
    pub temperature: f64,
    #[arg(long, default_value_t = TuneConfig::default().cooling)]
    pub cooling: f64,
    #[arg(long, default_value_t = StepScales::default().amplitude)]
    pub sigma_amplitude: f64,
    #[arg(long, default_value_t = StepScales::default().frequency)]
    pub sigma_frequency: f64,
    #[arg(long, default_value_t = StepScales::default().phase)]
    pub sigma_phase: f64,
    /// Simulated seconds per evaluation; defaults to two track periods.
    #[arg(long)]
    pub eval_duration: Option<f64>,
    /// Report JSON path.
    #[arg(long)]
    pub out: PathBuf,
    /// Best-parameters JSON path; defaults to `<out>.params.json`.
    #[arg(long)]
    pub params_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ServeArgs {
    pub lattice: PathBuf,
    #[arg(long)]
    pub params: Option<PathBuf>,
    #[command(flatten)]
    pub step: StepArgs,
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: SocketAddr,
    /// Broadcast every Nth step.
    #[arg(long, default_value_t = 4)]
    pub decimation: u64,
}

fn signals_for(scene: &SceneFile, params: Option<&Path>) -> Result<Vec<ActuationSignal>, RuntimeError> {
    match params {
        Some(p) => Ok(ParamsFile::load(p)?.signals(scene.lattice.regions.len())?),
        None => Ok(scene.lattice.regions.iter().map(|r| r.actuation.clone()).collect()),
    }
}

pub fn voxelize(args: &VoxelizeArgs, out: &mut impl Write) -> Result<SceneFile, RuntimeError> {
    let mesh = load_mesh(&args.mesh)?;
    let spec = match &args.regions {
        Some(p) => RegionSpec::load(p)?,
        None => RegionSpec::default(),
    };
    let material = Material {
        stiffness: args.stiffness,
        damping: args.damping,
        particle_mass: args.mass,
    };
    let scene = SceneFile::build(mesh, args.resolution, &spec, material)?;
    scene.save(&args.out)?;
    writeln!(out, "{}", scene.summary())?;
    Ok(scene)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateSummary {
    pub steps: usize,
    pub frames: usize,
    pub steps_per_sec: f64,
    pub mean_energy: f64,
}

pub fn simulate(args: &SimulateArgs, out: &mut impl Write) -> Result<SimulateSummary, RuntimeError> {
    let scene = SceneFile::load(&args.lattice)?;
    let signals = signals_for(&scene, args.params.as_deref())?;
    let cfg = args.step.config();
    cfg.check_stability(&scene.lattice)?;
    if !(args.duration > 0.0 && args.fps > 0.0) {
        return Err(RuntimeError::Usage("duration and fps must be positive".into()));
    }
    let drive = RegionDrive::with_signals(&scene.lattice, signals, cfg.rest_clamp_epsilon);
    let mut state = SimState::new(scene.lattice.clone());
    let steps = (args.duration / cfg.dt).round() as usize;
    let frame_count = (args.duration * args.fps).round() as usize;
    let steps_per_frame = 1.0 / (args.fps * cfg.dt);
    let mut next_frame = 0usize;
    let mut energy = 0.0;

    let export = |state: &SimState, k: usize| -> Result<(), RuntimeError> {
        if let Some(prefix) = &args.out {
            let mesh = scene.mesh.with_vertices(scene.binding.deform(&state.positions()));
            export_frame(&mesh, frame_path(prefix, k))?;
        }
        Ok(())
    };

    if let Some(parent) = args.out.as_deref().map(Path::new).and_then(Path::parent) {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let started = Instant::now();
    for n in 0..=steps {
        while next_frame < frame_count && (next_frame as f64 * steps_per_frame).round() as usize == n {
            export(&state, next_frame)?;
            next_frame += 1;
        }
        if n == steps {
            break;
        }
        state.step(&cfg, &drive)?;
        energy += state.mechanical_energy(&cfg, &drive);
    }
    let elapsed = started.elapsed().as_secs_f64();
    let summary = SimulateSummary {
        steps,
        frames: next_frame,
        steps_per_sec: steps as f64 / elapsed.max(1e-9),
        mean_energy: energy / steps.max(1) as f64,
    };
    writeln!(
        out,
        "steps={} frames={} steps_per_sec={:.1} mean_energy={:.6e}",
        summary.steps, summary.frames, summary.steps_per_sec, summary.mean_energy
    )?;
    Ok(summary)
}

pub fn fit(args: &FitArgs, out: &mut impl Write) -> Result<FitReport, RuntimeError> {
    if args.harmonics == 0 {
        return Err(RuntimeError::Usage("K must be >= 1".into()));
    }
    if args.periods < 2 {
        return Err(RuntimeError::Usage("periods must be >= 2".into()));
    }
    let scene = SceneFile::load(&args.lattice)?;
    let mesh = load_mesh(&args.mesh)?;
    let track = load_keyframes(&args.keyframes, &mesh)?;
    let period = track
        .period()
        .ok_or_else(|| RuntimeError::Usage("keyframes need period_frames for fitting".into()))?;
    let binding = bind_skin(&mesh, &scene.lattice)?;
    let cfg = args.step.config();
    cfg.check_stability(&scene.lattice)?;

    let mut coupling = couple_to_keyframes(
        &scene.lattice,
        &track,
        &mesh,
        &binding,
        args.coupling_stiffness,
        args.coupling_damping,
    )?;
    let mut state = SimState::new(scene.lattice.clone());
    record_training_run(&mut state, &mut coupling, &cfg, args.periods as f64 * period)?;
    let recording = coupling.recording.as_ref().expect("recording filled");
    let report = fit_regions(recording, &scene.lattice, args.harmonics)?;

    ParamsFile::from_fit(&report).save(&args.out)?;
    writeln!(out, "{:>4} {:<16} {:>10} {:>10} {:>10} residual", "id", "region", "a1", "f1_hz", "phi1")?;
    for r in &report.regions {
        let (a, f, p) = r
            .signal
            .harmonics
            .iter()
            .max_by(|x, y| x.a.abs().total_cmp(&y.a.abs()))
            .map_or((0.0, 0.0, 0.0), |h| (h.a, h.f, h.phi));
        let residual = r.residual.map_or_else(|| "skipped".to_string(), |v| format!("{v:.3e}"));
        writeln!(out, "{:>4} {:<16} {a:>10.5} {f:>10.4} {p:>10.4} {residual}", r.id, r.name)?;
    }
    writeln!(out, "samples={} residual={:.3e}", report.samples_used, report.residual)?;
    Ok(report)
}

pub fn tune(args: &TuneArgs, out: &mut impl Write) -> Result<TuneReport, RuntimeError> {
    let file = SceneFile::load(&args.lattice)?;
    let mesh = load_mesh(&args.mesh)?;
    let track = load_keyframes(&args.keyframes, &mesh)?;
    let binding = bind_skin(&mesh, &file.lattice)?;
    let initial = ParamsFile::load(&args.params)?.signals(file.lattice.regions.len())?;
    let cfg = args.step.config();
    cfg.check_stability(&file.lattice)?;
    let scene = Scene::new(mesh, file.lattice, binding, track, CouplingParams::default())?;
    let tc = TuneConfig {
        iterations: args.iterations,
        initial_temperature: args.temperature,
        cooling: args.cooling,
        sigma: StepScales {
            amplitude: args.sigma_amplitude,
            frequency: args.sigma_frequency,
            phase: args.sigma_phase,
        },
        seed: args.seed,
        eval_duration: args.eval_duration.unwrap_or(2.0 * scene.period()),
        population: args.population,
        parallel: true,
    };
    let mut io_err = None;
    let report = tune_with_progress(&scene, &initial, &cfg, &tc, |r| {
        if io_err.is_none() {
            if let Err(e) = writeln!(
                out,
                "iter={} objective={:.6e} best={:.6e} temperature={:.4e}",
                r.iteration, r.objective, r.best_objective, r.temperature
            ) {
                io_err = Some(e);
            }
        }
    })?;
    if let Some(e) = io_err {
        return Err(e.into());
    }
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    std::fs::write(&args.out, json)?;
    let params_out = args
        .params_out
        .clone()
        .unwrap_or_else(|| args.out.with_extension("params.json"));
    ParamsFile::from_signals(&scene.lattice, &report.best_params).save(params_out)?;
    writeln!(
        out,
        "initial={:.6e} best={:.6e} evaluations={} unstable={}",
        report.initial_objective, report.best_objective, report.evaluations, report.rejected_unstable
    )?;
    Ok(report)
}

pub fn serve(args: &ServeArgs) -> Result<(), RuntimeError> {
    let scene = SceneFile::load(&args.lattice)?;
    let signals = signals_for(&scene, args.params.as_deref())?;
    let session = Session::new(scene, signals, args.step.config(), args.decimation)?;
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async {
        let listener = super::server::bind(args.addr).await?;
        println!("listening on ws://{}/ws", listener.local_addr()?);
        super::server::serve(session, listener).await
    })
}

/// Runs a parsed command line, writing human-readable output to `out`.
pub fn run(cli: &Cli, out: &mut impl Write) -> Result<(), RuntimeError> {
    match &cli.command {
        Command::Voxelize(a) => voxelize(a, out).map(drop),
        Command::Simulate(a) => simulate(a, out).map(drop),
        Command::Fit(a) => fit(a, out).map(drop),
        Command::Tune(a) => tune(a, out).map(drop),
        Command::Serve(a) => serve(a),
    }
}
