//! Batch pipeline commands and the live steering service.

pub mod cli;
pub mod protocol;
pub mod server;
mod session;

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::actuation::ActuationError;
use crate::dynamics::SimError;
use crate::lattice::{
    assign_regions, bind_skin, build_lattice, voxelize, Lattice, LatticeError, Material, RegionSpec,
    SkinBinding,
};
use crate::mesh_io::{MeshError, TriMesh};
use crate::tuner::TuneError;

pub use session::{continue_phase, Playback, Session};

#[derive(Debug, Error)]
pub enum RuntimeError {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Actuation(#[from] ActuationError),
    #[error(transparent)]
    Tune(#[from] TuneError),
    #[error("lattice file: {0}")]
    SceneFile(String),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// The lattice file written by `voxelize`: the graphical mesh, the lattice
/// built from it and the skin binding between them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneFile {
    pub resolution: usize,
    pub material: Material,
    pub mesh: TriMesh,
    pub lattice: Lattice,
    pub binding: SkinBinding,
}

impl SceneFile {
    pub fn build(
        mesh: TriMesh,
        resolution: usize,
        regions: &RegionSpec,
        material: Material,
    ) -> Result<Self, LatticeError> {
        let grid = voxelize(&mesh, resolution)?;
        let regions = assign_regions(&grid, regions)?;
        let lattice = build_lattice(&grid, &regions, &material)?;
        let binding = bind_skin(&mesh, &lattice)?;
        Ok(Self {
            resolution,
            material,
            mesh,
            lattice,
            binding,
        })
    }

    pub fn summary(&self) -> String {
        let regions = self.lattice.regions.len();
        format!(
            "{} particles, {} constraints, {} region{}",
            self.lattice.particles.len(),
            self.lattice.constraints.len(),
            regions,
            if regions == 1 { "" } else { "s" }
        )
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, RuntimeError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| RuntimeError::SceneFile(format!("{}: {e}", path.display())))?;
        let scene: Self =
            serde_json::from_str(&text).map_err(|e| RuntimeError::SceneFile(e.to_string()))?;
        scene.lattice.validate()?;
        scene
            .binding
            .validate(scene.mesh.vertex_count(), scene.lattice.particles.len())?;
        Ok(scene)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), RuntimeError> {
        let text = serde_json::to_string(self).map_err(|e| RuntimeError::SceneFile(e.to_string()))?;
        std::fs::write(path, text)?;
        Ok(())
    }
}
