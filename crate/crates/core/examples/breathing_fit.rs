//! Fit actuation signals to a breathing keyframe track: couple the passive
//! lattice to the animation, record constraint lengths, read the dominant
//! Fourier components per region.
//!
//!     cargo run --example breathing_fit -- [harmonics]

use organ_motion::actuation::{couple_to_keyframes, fit_regions, record_training_run, ParamsFile};
use organ_motion::dynamics::{SimConfig, SimState};
use organ_motion::lattice::{Material, RegionSpec};
use organ_motion::runtime::SceneFile;
use organ_motion::synthetic;
use organ_motion::tuner::CouplingParams;
use organ_motion::Vec3;

fn main() -> anyhow::Result<()> {
    let k: usize = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(2);
    let cfg = SimConfig::default();
    let mesh = synthetic::box_mesh(Vec3::zeros(), Vec3::repeat(0.06), 8);
    let scene = SceneFile::build(mesh, 4, &RegionSpec::default(), Material::default())?;
    // 5% scale oscillation at 1.25 Hz, 48 frames per period
    let track = synthetic::breathing_track(&scene.mesh, 60.0, 1.6, 0.05, 1.25);
    let period = track.period().expect("whole period");
    println!("{}; track period {period} s", scene.summary());

    let coupling = CouplingParams::default();
    let mut training = couple_to_keyframes(
        &scene.lattice,
        &track,
        &scene.mesh,
        &scene.binding,
        coupling.stiffness,
        coupling.damping,
    )?;
    let mut state = SimState::new(scene.lattice.clone());
    record_training_run(&mut state, &mut training, &cfg, 3.0 * period)?;
    let recording = training.recording.as_ref().expect("recorded");
    println!(
        "recorded {} samples from t = {:.3} s ({} transient steps)",
        recording.samples(),
        recording.start_time,
        recording.transient_steps
    );

    let report = fit_regions(recording, &scene.lattice, k)?;
    for r in &report.regions {
        println!("region {} ({})", r.id, r.name);
        for h in &r.signal.harmonics {
            println!("  a {:+.5}  f {:.4} Hz  phi {:.4} rad", h.a, h.f, h.phi);
        }
        if let Some(res) = r.residual {
            println!("  residual {res:.3e}");
        }
    }
    println!("{}", ParamsFile::from_fit(&report).to_json());
    Ok(())
}
