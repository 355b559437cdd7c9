//! Acceptance suite A1-A9. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::f64::consts::TAU;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use organ_motion::actuation::{
    couple_to_keyframes, fit_regions, fit_signal, record_training_run, ActuationSignal, FitReport,
    Harmonic, RegionDrive,
};
use organ_motion::dynamics::{Passive, SimConfig, SimState};
use organ_motion::lattice::{
    assign_regions, build_lattice, Lattice, Material, Particle, RegionRule,
    RegionSpec, SpringConstraint, VoxelGrid,
};
use organ_motion::mesh_io::KeyframeTrack;
use organ_motion::runtime::SceneFile;
use organ_motion::synthetic;
use organ_motion::tuner::{evaluate_drift, objective, tune, CouplingParams, Scene, TuneConfig};
use organ_motion::Vec3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn a1_oscillator() -> Outcome {
    let started = Instant::now();
    let m = 1.0;
    let k = 100.0;
    let lattice = Lattice::from_parts(
        vec![
            Particle::at_rest(Vec3::zeros(), m),
            Particle::at_rest(Vec3::new(1.0, 0.0, 0.0), m),
        ],
        vec![SpringConstraint {
            i: 0,
            j: 1,
            rest_length0: 1.0,
            stiffness: k,
            damping: 0.0,
            region: 0,
        }],
    )
    .map_err(|e| e.to_string())?;
    let mut state = SimState::new(lattice);
    state.lattice.particles[1].position.x = 1.1;
    let cfg = SimConfig::with_dt(1e-4);

    // period from successive upward zero crossings of the extension
    let mut crossings = Vec::new();
    let mut prev = 0.1;
    while crossings.len() < 4 && state.time < 5.0 {
        let prev_t = state.time;
        state.step(&cfg, &Passive).map_err(|e| e.to_string())?;
        let ext = state.lattice.particles[1].position.x - state.lattice.particles[0].position.x - 1.0;
        if prev < 0.0 && ext >= 0.0 {
            crossings.push(prev_t + cfg.dt * (-prev) / (ext - prev));
        }
        prev = ext;
    }
    if crossings.len() < 4 {
        return Err("fewer than four crossings".into());
    }
    let period = (crossings[3] - crossings[0]) / 3.0;
    let analytic = TAU * (0.5f64 / k).sqrt();
    let rel = (period - analytic).abs() / analytic;
    let elapsed = started.elapsed();
    check(
        rel < 0.02 && elapsed < Duration::from_secs(1),
        format!("period {period:.5} s vs {analytic:.5} s (rel err {rel:.2e}), {elapsed:.2?}"),
    )
}

/// Every cell of an n*n*n block occupied, unit cells.
fn full_block(n: usize, material: &Material) -> Lattice {
    let grid = VoxelGrid {
        origin: Vec3::zeros(),
        cell_size: 1.0,
        dims: [n, n, n],
        occupied: (0..n)
            .flat_map(|i| (0..n).flat_map(move |j| (0..n).map(move |k| [i, j, k])))
            .collect(),
        vertex_cells: Vec::new(),
    };
    let regions = assign_regions(&grid, &RegionSpec::default()).unwrap();
    build_lattice(&grid, &regions, material).unwrap()
}

fn perturbed(lattice: Lattice, seed: u64, speed: f64) -> SimState {
    let mut state = SimState::new(lattice);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for p in &mut state.lattice.particles {
        p.velocity = Vec3::new(
            rng.random_range(-speed..speed),
            rng.random_range(-speed..speed),
            rng.random_range(-speed..speed),
        );
    }
    state
}

fn a2_dissipation() -> Outcome {
    let started = Instant::now();
    let material = Material {
        stiffness: 100.0,
        damping: 1.0,
        particle_mass: 1.0,
    };
    let mut state = perturbed(full_block(4, &material), 7, 0.1);
    let cfg = SimConfig::with_dt(1e-4);
    let e0 = state.mechanical_energy(&cfg, &Passive);
    let tol = 1e-6 * e0;
    let mut prev = e0;
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..10_000 {
        state.step(&cfg, &Passive).map_err(|e| e.to_string())?;
        let e = state.mechanical_energy(&cfg, &Passive);
        worst = worst.max(e - prev);
        prev = e;
    }
    let elapsed = started.elapsed();
    check(
        worst <= tol && prev < e0 && elapsed < Duration::from_secs(10),
        format!(
            "E0 {e0:.4e} -> {prev:.4e}, largest per-step rise {:.2e} E0, {elapsed:.2?}",
            worst / e0
        ),
    )
}

fn a3_momentum() -> Outcome {
    let material = Material {
        stiffness: 100.0,
        damping: 2.5,
        particle_mass: 1.0,
    };
    let mut state = perturbed(full_block(4, &material), 11, 0.5);
    let cfg = SimConfig::default();
    let mut prev = state.total_momentum();
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        state.step(&cfg, &Passive).map_err(|e| e.to_string())?;
        let p = state.total_momentum();
        worst = worst.max((p - prev).norm());
        prev = p;
    }
    check(worst < 1e-9, format!("largest per-step |dP| {worst:.2e} kg m/s"))
}

fn a4_fit_round_trip() -> Outcome {
    let rate = 240.0;
    let n = 2400;
    let single: Vec<f64> = (0..n).map(|i| 0.1 * (TAU * 1.2 * i as f64 / rate).sin()).collect();
    let two: Vec<f64> = (0..n)
        .map(|i| {
            let t = i as f64 / rate;
            0.1 * (TAU * 1.2 * t).sin() + 0.03 * (TAU * 3.6 * t + 0.4).sin()
        })
        .collect();
    let bin = rate / n as f64;
    let a = fit_signal(&single, rate, 1).map_err(|e| e.to_string())?;
    let b = fit_signal(&two, rate, 2).map_err(|e| e.to_string())?;
    let h = a.signal.harmonics[0];
    let main = b
        .signal
        .harmonics
        .iter()
        .find(|h| (h.f - 1.2).abs() <= bin)
        .copied()
        .ok_or("two-tone fit lost 1.2 Hz")?;
    let ok = (h.a - 0.1).abs() < 1e-3
        && (h.f - 1.2).abs() <= bin
        && a.residual < 1e-3
        && (main.a - 0.1).abs() < 1e-3
        && b.residual < 1e-3;
    check(
        ok,
        format!(
            "single: a {:.5} f {:.4} residual {:.1e}; two-tone: a {:.5} residual {:.1e}; bin {bin} Hz",
            h.a, h.f, a.residual, main.a, b.residual
        ),
    )
}

fn fit_track(scene: &SceneFile, track: &KeyframeTrack, cfg: &SimConfig, k: usize, periods: f64) -> FitReport {
    let coupling_params = CouplingParams::default();
    let mut coupling = couple_to_keyframes(
        &scene.lattice,
        track,
        &scene.mesh,
        &scene.binding,
        coupling_params.stiffness,
        coupling_params.damping,
    )
    .unwrap();
    let mut state = SimState::new(scene.lattice.clone());
    let duration = periods * track.period().unwrap();
    record_training_run(&mut state, &mut coupling, cfg, duration).unwrap();
    fit_regions(coupling.recording.as_ref().unwrap(), &scene.lattice, k).unwrap()
}

fn a5_pipeline() -> Outcome {
    let started = Instant::now();
    let cfg = SimConfig::default();
    let mesh = synthetic::box_mesh(Vec3::zeros(), Vec3::repeat(0.06), 8);
    let scene = SceneFile::build(mesh, 4, &RegionSpec::default(), Material::default()).map_err(|e| e.to_string())?;
    let truth = vec![ActuationSignal::sine(0.1, 1.0, 0.0)];
    let track = synthetic::simulated_track(&scene.lattice, &scene.binding, truth.clone(), &cfg, 1.0, 60.0, 3)
        .map_err(|e| e.to_string())?;

    let fit = fit_track(&scene, &track, &cfg, 1, 3.0);
    let tuner_scene = Scene::new(
        scene.mesh.clone(),
        scene.lattice.clone(),
        scene.binding.clone(),
        track,
        CouplingParams::default(),
    )
    .map_err(|e| e.to_string())?;
    let tc = TuneConfig {
        iterations: 200,
        population: 8,
        seed: 42,
        eval_duration: 3.0,
        ..TuneConfig::default()
    };
    let report = tune(&tuner_scene, &fit.signals(), &cfg, &tc).map_err(|e| e.to_string())?;
    let truth_j = objective(&truth, &tuner_scene, &cfg, tc.eval_duration).map_err(|e| e.to_string())?;
    let drift_fit = evaluate_drift(&fit.signals(), &tuner_scene, &cfg, tc.eval_duration).map_err(|e| e.to_string())?;
    let drift_tuned = evaluate_drift(&report.best_params, &tuner_scene, &cfg, tc.eval_duration).map_err(|e| e.to_string())?;
    let elapsed = started.elapsed();
    let h = fit.signals()[0].harmonics.first().copied().unwrap_or(Harmonic::new(0.0, 0.0, 0.0));
    let best = report.best_params[0].harmonics.first().copied().unwrap_or(Harmonic::new(0.0, 0.0, 0.0));
    check(
        report.best_objective < 0.05
            && report.best_objective <= 0.5 * report.initial_objective
            && elapsed < Duration::from_secs(300),
        format!(
            "J fit {:.3e} -> tuned {:.3e} (generating params {truth_j:.1e}); drift {drift_fit:.2e} -> {drift_tuned:.2e}; fit a {:.4} f {:.3} phi {:.3}, tuned a {:.4} f {:.3} phi {:.3}; {elapsed:.1?}",
            report.initial_objective, report.best_objective, h.a, h.f, h.phi, best.a, best.f, best.phi
        ),
    )
}

fn a6_regions() -> Outcome {
    let cfg = SimConfig::default();
    let mesh = synthetic::box_mesh(Vec3::zeros(), Vec3::new(0.12, 0.06, 0.06), 8);
    let spec = RegionSpec(vec![
        RegionRule::boxed("left", Vec3::repeat(-1.0), Vec3::new(0.06, 1.0, 1.0)),
        RegionRule::default_region("right"),
    ]);
    let scene = SceneFile::build(mesh, 8, &spec, Material::default()).map_err(|e| e.to_string())?;
    let drive = vec![ActuationSignal::sine(0.1, 1.0, 0.0), ActuationSignal::sine(0.1, 2.0, 0.0)];
    let track = synthetic::simulated_track(&scene.lattice, &scene.binding, drive, &cfg, 1.0, 60.0, 3)
        .map_err(|e| e.to_string())?;
    let fit = fit_track(&scene, &track, &cfg, 1, 3.0);
    let bin = 1.0 / (fit.samples_used as f64 * cfg.dt);
    let f: Vec<f64> = fit
        .regions
        .iter()
        .map(|r| r.signal.harmonics.first().map_or(0.0, |h| h.f))
        .collect();
    let within = |f: f64, target: f64| (f - target).abs() <= bin / 2.0 + 1e-9;
    check(
        f.len() == 2 && within(f[0], 1.0) && within(f[1], 2.0),
        format!("fundamentals {f:.3?} Hz, bin {bin:.3} Hz"),
    )
}

fn a7_scalability() -> Outcome {
    let mesh = synthetic::heart(24, 32);
    let cfg = SimConfig::default();
    let mut lines = Vec::new();
    let mut rates = Vec::new();
    for res in [4, 8, 16] {
        let scene = SceneFile::build(mesh.clone(), res, &RegionSpec::default(), Material::default())
            .map_err(|e| e.to_string())?;
        let drive = RegionDrive::with_signals(
            &scene.lattice,
            vec![ActuationSignal::sine(0.1, 1.0, 0.0)],
            cfg.rest_clamp_epsilon,
        );
        let mut state = SimState::new(scene.lattice.clone());
        let steps = 2400;
        let started = Instant::now();
        for _ in 0..steps {
            state.step(&cfg, &drive).map_err(|e| e.to_string())?;
        }
        let rate = steps as f64 / started.elapsed().as_secs_f64();
        lines.push(format!(
            "res {res}: {} particles, {} constraints, {rate:.0} steps/s",
            scene.lattice.particles.len(),
            scene.lattice.constraints.len()
        ));
        rates.push(rate);
    }
    check(
        rates[0] > rates[1] && rates[1] > rates[2] && rates[1] >= 60.0,
        lines.join("; "),
    )
}

fn run_cli(args: &[&str], cwd: &Path) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_organ-motion"))
        .args(args)
        .current_dir(cwd)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)))
    }
}

fn a8_determinism() -> Outcome {
    let mesh = synthetic::box_mesh(Vec3::zeros(), Vec3::repeat(0.06), 3);
    let track = synthetic::breathing_track(&mesh, 30.0, 1.0, 0.05, 1.0);
    let runs: Vec<Vec<(String, Vec<u8>)>> = (0..2)
        .map(|_| -> Result<_, String> {
            let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
            let d = dir.path();
            std::fs::write(d.join("box.obj"), organ_motion::mesh_io::to_obj_string(&mesh)).map_err(|e| e.to_string())?;
            organ_motion::mesh_io::save_keyframes(&track, d.join("track.json")).map_err(|e| e.to_string())?;
            run_cli(&["voxelize", "box.obj", "--resolution", "3", "--out", "scene.json"], d)?;
            run_cli(&["fit", "scene.json", "box.obj", "track.json", "--out", "fit.json"], d)?;
            run_cli(
                &["tune", "scene.json", "box.obj", "track.json", "fit.json", "--iterations", "10", "--population", "4", "--seed", "5", "--out", "tune.json"],
                d,
            )?;
            run_cli(
                &["simulate", "scene.json", "--params", "tune.params.json", "--duration", "0.5", "--fps", "10", "--out", "frame"],
                d,
            )?;
            let mut files: Vec<_> = std::fs::read_dir(d)
                .map_err(|e| e.to_string())?
                .map(|e| e.unwrap().path())
                .collect();
            files.sort();
            Ok(files
                .into_iter()
                .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
                .collect())
        })
        .collect::<Result<_, _>>()?;
    let same = runs[0] == runs[1];
    check(
        same && runs[0].len() >= 10,
        format!("{} output files compared, identical: {same}", runs[0].len()),
    )
}

fn a9_pinned_valve() -> Outcome {
    let cfg = SimConfig::default();
    let mesh = synthetic::heart(24, 32);
    let (lo, hi) = mesh.bounds();
    let cut = hi.y - 0.2 * (hi.y - lo.y);
    let valve = RegionRule {
        pinned: true,
        ..RegionRule::boxed("valve", Vec3::new(lo.x - 1.0, cut, lo.z - 1.0), hi + Vec3::repeat(1.0))
    };
    let spec = RegionSpec(vec![valve, RegionRule::default_region("myocardium")]);
    let scene = SceneFile::build(mesh, 8, &spec, Material::default()).map_err(|e| e.to_string())?;
    let lattice = &scene.lattice;
    let drive = RegionDrive::with_signals(
        lattice,
        vec![ActuationSignal::default(), ActuationSignal::sine(0.15, 1.0, 0.0)],
        cfg.rest_clamp_epsilon,
    );
    let mut state = SimState::new(lattice.clone());
    let rest = lattice.positions();
    let rest_mesh = scene.binding.deform(&rest);
    let pinned: Vec<usize> = (0..rest.len()).filter(|&i| lattice.particles[i].is_pinned()).collect();

    let warmup = (2.0 / cfg.dt) as usize;
    let window = (1.0 / cfg.dt) as usize;
    let mut pinned_max: f64 = 0.0;
    let mut samples: Vec<Vec<Vec3>> = Vec::with_capacity(window);
    for step in 0..warmup + window {
        state.step(&cfg, &drive).map_err(|e| e.to_string())?;
        for &i in &pinned {
            pinned_max = pinned_max.max((state.lattice.particles[i].position - rest[i]).norm());
        }
        if step >= warmup {
            samples.push(scene.binding.deform(&state.positions()));
        }
    }
    // amplitude: largest excursion from the vertex's mean position over one period
    let amplitude = |v: usize| {
        let mean = samples.iter().map(|s| s[v]).sum::<Vec3>() / samples.len() as f64;
        samples.iter().map(|s| (s[v] - mean).norm()).fold(0.0, f64::max)
    };
    let region_of_vertex = |v: usize| lattice.particle_region[scene.binding.vertices[v].weights[0].0];
    let (mut adj, mut free) = (Vec::new(), Vec::new());
    for v in 0..rest_mesh.len() {
        if lattice.regions[region_of_vertex(v)].pinned {
            adj.push(amplitude(v));
        } else {
            free.push(amplitude(v));
        }
    }
    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len().max(1) as f64;
    let (adj_mean, free_mean) = (mean(&adj), mean(&free));
    let ratio = adj_mean / free_mean;
    check(
        pinned_max == 0.0 && !adj.is_empty() && free_mean > 0.0 && ratio < 0.25,
        format!(
            "{} pinned particles, max displacement {pinned_max:e} m; valve-adjacent amplitude {adj_mean:.3e} m vs free {free_mean:.3e} m (ratio {ratio:.3})",
            pinned.len()
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("A1 oscillator period", a1_oscillator),
        ("A2 energy dissipation", a2_dissipation),
        ("A3 momentum conservation", a3_momentum),
        ("A4 fit round trip", a4_fit_round_trip),
        ("A5 fit + tune pipeline", a5_pipeline),
        ("A6 regional frequencies", a6_regions),
        ("A7 scalability", a7_scalability),
        ("A8 CLI determinism", a8_determinism),
        ("A9 pinned valve", a9_pinned_valve),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, run) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.starts_with(f.as_str())) {
            continue;
        }
        match run() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
