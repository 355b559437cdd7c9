//! Drive a heart anchored at its valve plane, poke it mid-beat and track
//! how far it strays from an unpoked twin.
//!
//!     cargo run --example poke_dynamics

use organ_motion::actuation::{ActuationSignal, Harmonic, RegionDrive};
use organ_motion::dynamics::{SimConfig, SimState};
use organ_motion::lattice::{Material, RegionRule, RegionSpec};
use organ_motion::runtime::SceneFile;
use organ_motion::synthetic;
use organ_motion::Vec3;

fn main() -> anyhow::Result<()> {
    let cfg = SimConfig::default();
    let mesh = synthetic::heart(24, 32);
    let (lo, hi) = mesh.bounds();
    let valve = RegionRule {
        pinned: true,
        ..RegionRule::boxed(
            "valve",
            Vec3::new(lo.x - 1.0, hi.y - 0.2 * (hi.y - lo.y), lo.z - 1.0),
            hi + Vec3::repeat(1.0),
        )
    };
    let spec = RegionSpec(vec![valve, RegionRule::default_region("wall")]);
    let scene = SceneFile::build(mesh, 8, &spec, Material::default())?;
    let beat = ActuationSignal::new(vec![Harmonic::new(0.12, 1.2, 0.0), Harmonic::new(0.04, 2.4, 1.0)])?;
    let drive = RegionDrive::with_signals(&scene.lattice, vec![ActuationSignal::default(), beat], cfg.rest_clamp_epsilon);
    let mut free = SimState::new(scene.lattice.clone());
    let mut poked = free.clone();

    let side = Vec3::new(hi.x, 0.5 * (lo.y + hi.y), 0.5 * (lo.z + hi.z));
    for step in 0..=720 {
        if step == 240 {
            let n = poked.apply_poke(side, Vec3::new(-0.5, 0.0, 0.0), 0.03, 0.05);
            println!("t {:.3} s: poked {n} particles", poked.time);
        }
        if step % 60 == 0 {
            let gap = free
                .positions()
                .iter()
                .zip(poked.positions())
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            println!(
                "t {:.3} s  energy {:.4e} J  max deviation {:.3e} m",
                poked.time,
                poked.mechanical_energy(&cfg, &drive),
                gap
            );
        }
        free.step(&cfg, &drive)?;
        poked.step(&cfg, &drive)?;
    }
    Ok(())
}
