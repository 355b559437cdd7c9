//! Self-driven soft-body organ motion.
//!
//! A triangle mesh is voxel-partitioned into regions and turned into a
//! mass-spring-damper lattice. Each region drives its springs' rest lengths
//! with a small sum of sinusoids. Signals are fitted from keyframe
//! animations by coupling the lattice to the animated mesh and reading the
//! dominant Fourier components of the resulting spring lengths, then
//! refined by simulated annealing against the same keyframes.
//!
//! ```no_run
//! use organ_motion::prelude::*;
//!
//! let mesh = synthetic::unit_cube();
//! let scene = SceneFile::build(mesh, 2, &RegionSpec::default(), Material::default()).unwrap();
//! let drive = RegionDrive::with_signals(&scene.lattice, vec![ActuationSignal::sine(0.1, 1.0, 0.0)], 0.1);
//! let mut state = SimState::new(scene.lattice.clone());
//! for _ in 0..240 {
//!     state.step(&SimConfig::default(), &drive).unwrap();
//! }
//! ```

pub mod actuation;
pub mod dynamics;
pub mod lattice;
pub mod mesh_io;
pub mod runtime;
pub mod synthetic;
pub mod tuner;

/// 3D vector in SI units.
pub type Vec3 = nalgebra::Vector3<f64>;

pub mod prelude {
    pub use crate::actuation::{
        couple_to_keyframes, eval_rest, fit_regions, fit_signal, record_training_run, ActuationSignal,
        FitReport, Harmonic, ParamsFile, RegionDrive,
    };
    pub use crate::dynamics::{Passive, RestLengths, SimConfig, SimError, SimState};
    pub use crate::lattice::{
        assign_regions, bind_skin, build_lattice, skin_update, voxelize, Lattice, Material, Region,
        RegionRule, RegionSpec, SkinBinding,
    };
    pub use crate::mesh_io::{export_frame, load_keyframes, load_mesh, KeyframeTrack, TriMesh};
    pub use crate::runtime::{SceneFile, Session};
    pub use crate::synthetic;
    pub use crate::tuner::{evaluate_drift, objective, tune, CouplingParams, Scene, TuneConfig};
    pub use crate::Vec3;
}
