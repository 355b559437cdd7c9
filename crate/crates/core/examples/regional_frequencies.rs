//! Two regions driven at different frequencies; the fit separates them.
//!
//!     cargo run --example regional_frequencies

use organ_motion::actuation::{couple_to_keyframes, fit_regions, record_training_run, ActuationSignal};
use organ_motion::dynamics::{SimConfig, SimState};
use organ_motion::lattice::{Material, RegionRule, RegionSpec};
use organ_motion::runtime::SceneFile;
use organ_motion::synthetic;
use organ_motion::Vec3;

fn main() -> anyhow::Result<()> {
    let cfg = SimConfig::default();
    let mesh = synthetic::box_mesh(Vec3::zeros(), Vec3::new(0.12, 0.06, 0.06), 8);
    let spec = RegionSpec(vec![
        RegionRule::boxed("left", Vec3::repeat(-1.0), Vec3::new(0.06, 1.0, 1.0)),
        RegionRule::default_region("right"),
    ]);
    let scene = SceneFile::build(mesh, 8, &spec, Material::default())?;
    let drive = vec![ActuationSignal::sine(0.1, 1.0, 0.0), ActuationSignal::sine(0.08, 2.0, 1.0)];
    let track = synthetic::simulated_track(&scene.lattice, &scene.binding, drive.clone(), &cfg, 1.0, 60.0, 3)?;

    let mut training = couple_to_keyframes(&scene.lattice, &track, &scene.mesh, &scene.binding, 500.0, 2.0)?;
    record_training_run(&mut SimState::new(scene.lattice.clone()), &mut training, &cfg, 4.0)?;
    let report = fit_regions(training.recording.as_ref().expect("recorded"), &scene.lattice, 2)?;
    for (r, d) in report.regions.iter().zip(&drive) {
        let driven = d.harmonics[0];
        println!("{} driven at {} Hz (a {}):", r.name, driven.f, driven.a);
        for h in &r.signal.harmonics {
            println!("  fitted a {:+.4} f {:.3} Hz phi {:.3}", h.a, h.f, h.phi);
        }
    }
    Ok(())
}
