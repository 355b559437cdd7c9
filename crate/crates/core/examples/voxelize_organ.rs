//! Voxelize a procedural heart into regions, bind the skin and write the
//! lattice file plus the rest-pose OBJ.
//!
//!     cargo run --example voxelize_organ -- [resolution]

use organ_motion::lattice::{Material, RegionRule, RegionSpec};
use organ_motion::mesh_io::export_frame;
use organ_motion::runtime::SceneFile;
use organ_motion::synthetic;
use organ_motion::Vec3;

fn main() -> anyhow::Result<()> {
    let resolution: usize = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(8);
    let mesh = synthetic::heart(24, 32);
    let (lo, hi) = mesh.bounds();
    let height = hi.y - lo.y;
    let far = Vec3::repeat(1.0);

    // top fifth is the valve plane, the lower third the apex
    let spec = RegionSpec(vec![
        RegionRule {
            pinned: true,
            ..RegionRule::boxed("valve", Vec3::new(lo.x - 1.0, hi.y - 0.2 * height, lo.z - 1.0), hi + far)
        },
        RegionRule {
            stiffness_scale: 1.5,
            ..RegionRule::boxed("apex", lo - far, Vec3::new(hi.x + 1.0, lo.y + height / 3.0, hi.z + 1.0))
        },
        RegionRule::default_region("wall"),
    ]);
    let scene = SceneFile::build(mesh, resolution, &spec, Material::default())?;
    println!("{}", scene.summary());
    println!("cell size {:.4} m", scene.lattice.cell_size);
    for (region, constraints) in scene.lattice.regions.iter().zip(scene.lattice.constraints_by_region()) {
        let particles = scene.lattice.particle_region.iter().filter(|&&r| r == region.id).count();
        println!(
            "  {:>2} {:<6} {:>4} particles {:>5} constraints pinned={}",
            region.id, region.name, particles, constraints.len(), region.pinned
        );
    }

    let dir = std::env::temp_dir().join("organ-motion-examples");
    std::fs::create_dir_all(&dir)?;
    scene.save(dir.join("heart.json"))?;
    export_frame(&scene.mesh.with_vertices(scene.binding.deform(&scene.lattice.positions())), dir.join("heart_rest.obj"))?;
    println!("wrote {}", dir.display());
    Ok(())
}
