//! Fit then anneal: the track is produced by the engine from known
//! parameters, so the tuner has a reachable target.
//!
//!     cargo run --release --example tune_breathing -- [iterations] [seed]

use organ_motion::actuation::{couple_to_keyframes, fit_regions, record_training_run, ActuationSignal};
use organ_motion::dynamics::{SimConfig, SimState};
use organ_motion::lattice::{Material, RegionSpec};
use organ_motion::runtime::SceneFile;
use organ_motion::synthetic;
use organ_motion::tuner::{evaluate_drift, objective, tune_with_progress, CouplingParams, Scene, TuneConfig};
use organ_motion::Vec3;

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let iterations: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(100);
    let seed: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(0);
    let cfg = SimConfig::default();

    let mesh = synthetic::box_mesh(Vec3::zeros(), Vec3::repeat(0.06), 8);
    let file = SceneFile::build(mesh, 4, &RegionSpec::default(), Material::default())?;
    let truth = vec![ActuationSignal::sine(0.1, 1.0, 0.0)];
    let track = synthetic::simulated_track(&file.lattice, &file.binding, truth.clone(), &cfg, 1.0, 60.0, 3)?;

    let coupling = CouplingParams::default();
    let mut training = couple_to_keyframes(
        &file.lattice,
        &track,
        &file.mesh,
        &file.binding,
        coupling.stiffness,
        coupling.damping,
    )?;
    record_training_run(&mut SimState::new(file.lattice.clone()), &mut training, &cfg, 3.0)?;
    let fitted = fit_regions(training.recording.as_ref().expect("recorded"), &file.lattice, 1)?.signals();

    let scene = Scene::new(file.mesh, file.lattice, file.binding, track, coupling)?;
    let tc = TuneConfig {
        iterations,
        seed,
        eval_duration: 3.0,
        ..TuneConfig::default()
    };
    println!("generating params J = {:.4e}", objective(&truth, &scene, &cfg, tc.eval_duration)?);
    let report = tune_with_progress(&scene, &fitted, &cfg, &tc, |r| {
        if r.iteration % 10 == 0 || r.accepted {
            println!(
                "iter {:>4}  J {:.4e}  best {:.4e}  T {:.3e}{}",
                r.iteration,
                r.objective,
                r.best_objective,
                r.temperature,
                if r.accepted { "  accepted" } else { "" }
            );
        }
    })?;
    let show = |label: &str, s: &[ActuationSignal]| {
        let h = s[0].harmonics[0];
        println!("{label:<8} a {:.4} f {:.4} phi {:.4}", h.a, h.f, h.phi);
    };
    show("truth", &truth);
    show("fitted", &fitted);
    show("tuned", &report.best_params);
    println!(
        "J {:.4e} -> {:.4e} after {} evaluations ({} unstable)",
        report.initial_objective, report.best_objective, report.evaluations, report.rejected_unstable
    );
    println!(
        "drift {:.4e} -> {:.4e}",
        evaluate_drift(&fitted, &scene, &cfg, tc.eval_duration)?,
        evaluate_drift(&report.best_params, &scene, &cfg, tc.eval_duration)?
    );
    Ok(())
}
