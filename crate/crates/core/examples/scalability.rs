//! Resolution against cost: particles, constraints and steps per second.
//!
//!     cargo run --release --example scalability

use std::time::Instant;

use organ_motion::actuation::{ActuationSignal, RegionDrive};
use organ_motion::dynamics::{SimConfig, SimState};
use organ_motion::lattice::{Material, RegionSpec};
use organ_motion::runtime::SceneFile;
use organ_motion::synthetic;

fn main() -> anyhow::Result<()> {
    let cfg = SimConfig::default();
    let mesh = synthetic::heart(32, 48);
    println!("{:>4} {:>9} {:>11} {:>12} {:>9}", "res", "particles", "constraints", "steps/s", "realtime");
    for res in [4, 6, 8, 12, 16, 24] {
        let scene = SceneFile::build(mesh.clone(), res, &RegionSpec::default(), Material::default())?;
        let drive = RegionDrive::with_signals(
            &scene.lattice,
            vec![ActuationSignal::sine(0.1, 1.0, 0.0)],
            cfg.rest_clamp_epsilon,
        );
        let mut state = SimState::new(scene.lattice.clone());
        let steps = 2400;
        let started = Instant::now();
        for _ in 0..steps {
            state.step(&cfg, &drive)?;
        }
        let rate = steps as f64 / started.elapsed().as_secs_f64();
        println!(
            "{res:>4} {:>9} {:>11} {rate:>12.0} {:>8.1}x",
            scene.lattice.particles.len(),
            scene.lattice.constraints.len(),
            rate * cfg.dt
        );
    }
    Ok(())
}
