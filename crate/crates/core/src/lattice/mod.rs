//! Voxel partitioning, regions, the particle/spring lattice and skinning.

mod region;
mod skin;
mod voxel;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Vec3;

pub use region::{assign_regions, Region, RegionRule, RegionSpec};
pub use skin::{bind_skin, skin_update, SkinBinding, VertexInfluence, SKIN_EPSILON, SKIN_INFLUENCES};
pub use voxel::{voxelize, VoxelGrid};

/// Integer grid coordinate of a voxel cell.
pub type Cell = [usize; 3];

#[derive(Debug, Error)]
pub enum LatticeError {
    #[error("resolution must be at least 1")]
    InvalidResolution,
    #[error("mesh bounding box has zero extent")]
    DegenerateMesh,
    #[error("regions do not partition the occupied cells: {0}")]
    PartitionError(String),
    #[error("invalid region spec: {0}")]
    RegionSpec(String),
    #[error("invalid material: {0}")]
    Material(String),
    #[error("invalid lattice: {0}")]
    Invalid(String),
    #[error("skin binding does not match: {0}")]
    Binding(String),
}

/// Default per-lattice material.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Material {
    /// Spring stiffness (N/m).
    pub stiffness: f64,
    /// Spring damping (N s/m).
    pub damping: f64,
    /// Mass of every particle (kg).
    pub particle_mass: f64,
}

impl Default for Material {
    fn default() -> Self {
        Self {
            stiffness: 100.0,
            damping: 0.5,
            particle_mass: 0.05,
        }
    }
}

impl Material {
    pub fn validate(&self) -> Result<(), LatticeError> {
        if !(self.stiffness > 0.0 && self.particle_mass > 0.0 && self.damping >= 0.0)
            || !(self.stiffness.is_finite() && self.particle_mass.is_finite() && self.damping.is_finite())
        {
            return Err(LatticeError::Material(format!("{self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Particle {
    pub position: Vec3,
    pub velocity: Vec3,
    pub inverse_mass: f64,
}

impl Particle {
    pub fn at_rest(position: Vec3, mass: f64) -> Self {
        Self {
            position,
            velocity: Vec3::zeros(),
            inverse_mass: 1.0 / mass,
        }
    }

    pub fn pinned(position: Vec3) -> Self {
        Self {
            position,
            velocity: Vec3::zeros(),
            inverse_mass: 0.0,
        }
    }

    pub fn is_pinned(&self) -> bool {
        self.inverse_mass == 0.0
    }
}

/// Spring-damper between particles `i < j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpringConstraint {
    pub i: usize,
    pub j: usize,
    pub rest_length0: f64,
    pub stiffness: f64,
    pub damping: f64,
    pub region: usize,
}

/// The physical layer: particles joined by spring-dampers, grouped into
/// regions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    pub particles: Vec<Particle>,
    pub constraints: Vec<SpringConstraint>,
    /// Cell of each particle, sorted ascending (empty for hand-built lattices).
    pub particle_cell: Vec<Cell>,
    pub particle_region: Vec<usize>,
    pub regions: Vec<Region>,
    pub cell_size: f64,
}

impl Lattice {
    /// Hand-assembled lattice with a single passive region. Constraints are
    /// canonicalised to `i < j`.
    pub fn from_parts(
        particles: Vec<Particle>,
        constraints: Vec<SpringConstraint>,
    ) -> Result<Self, LatticeError> {
        let n = particles.len();
        let mut constraints: Vec<_> = constraints
            .into_iter()
            .map(|mut c| {
                if c.i > c.j {
                    std::mem::swap(&mut c.i, &mut c.j);
                }
                c.region = 0;
                c
            })
            .collect();
        constraints.sort_by_key(|c| (c.i, c.j));
        let lattice = Self {
            particles,
            constraints,
            particle_cell: Vec::new(),
            particle_region: vec![0; n],
            regions: vec![Region::new(0, "default")],
            cell_size: 0.0,
        };
        lattice.validate()?;
        Ok(lattice)
    }

    pub fn validate(&self) -> Result<(), LatticeError> {
        let n = self.particles.len();
        let bad = |m: String| Err(LatticeError::Invalid(m));
        if self.particle_region.len() != n {
            return bad("particle_region length differs from particle count".into());
        }
        if let Some(r) = self.particle_region.iter().find(|&&r| r >= self.regions.len()) {
            return bad(format!("particle region {r} does not exist"));
        }
        for (k, c) in self.constraints.iter().enumerate() {
            if c.i >= c.j || c.j >= n {
                return bad(format!("constraint {k} has endpoints ({}, {})", c.i, c.j));
            }
            if !(c.rest_length0 > 0.0 && c.stiffness > 0.0 && c.damping >= 0.0) {
                return bad(format!("constraint {k} has non-positive parameters"));
            }
            if c.region >= self.regions.len() {
                return bad(format!("constraint {k} region {} does not exist", c.region));
            }
        }
        if self
            .constraints
            .windows(2)
            .any(|w| (w[0].i, w[0].j) >= (w[1].i, w[1].j))
        {
            return bad("constraints are not sorted or contain duplicate pairs".into());
        }
        Ok(())
    }

    pub fn positions(&self) -> Vec<Vec3> {
        self.particles.iter().map(|p| p.position).collect()
    }

    /// Region id of an occupied cell.
    pub fn region_of_cell(&self, cell: Cell) -> Option<usize> {
        self.particle_cell
            .binary_search(&cell)
            .ok()
            .map(|p| self.particle_region[p])
    }

    pub fn max_inverse_mass(&self) -> f64 {
        self.particles.iter().map(|p| p.inverse_mass).fold(0.0, f64::max)
    }

    pub fn max_stiffness(&self) -> f64 {
        self.constraints.iter().map(|c| c.stiffness).fold(0.0, f64::max)
    }

    /// Constraint indices grouped by governing region.
    pub fn constraints_by_region(&self) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); self.regions.len()];
        for (k, c) in self.constraints.iter().enumerate() {
            groups[c.region].push(k);
        }
        groups
    }
}

/// Offsets to the 13 lexicographically greater neighbours under
/// 26-connectivity; the other 13 are covered from the other side.
fn forward_offsets() -> impl Iterator<Item = [i64; 3]> {
    (-1..=1i64)
        .flat_map(|x| (-1..=1i64).flat_map(move |y| (-1..=1i64).map(move |z| [x, y, z])))
        .filter(|o| *o > [0, 0, 0])
}

/// Builds one particle per occupied cell and springs between all
/// 26-connected occupied neighbours.
pub fn build_lattice(
    grid: &VoxelGrid,
    regions: &[Region],
    material: &Material,
) -> Result<Lattice, LatticeError> {
    material.validate()?;
    let cells: Vec<Cell> = grid.occupied.iter().copied().collect();

    let mut particle_region = vec![usize::MAX; cells.len()];
    for (id, region) in regions.iter().enumerate() {
        if region.id != id {
            return Err(LatticeError::PartitionError(format!(
                "region at position {id} has id {}",
                region.id
            )));
        }
        for cell in &region.cells {
            let p = cells.binary_search(cell).map_err(|_| {
                LatticeError::PartitionError(format!(
                    "region {} claims unoccupied cell {cell:?}",
                    region.name
                ))
            })?;
            if particle_region[p] != usize::MAX {
                return Err(LatticeError::PartitionError(format!(
                    "cell {cell:?} claimed by regions {} and {id}",
                    particle_region[p]
                )));
            }
            particle_region[p] = id;
        }
    }
    if let Some(p) = particle_region.iter().position(|&r| r == usize::MAX) {
        return Err(LatticeError::PartitionError(format!(
            "cell {:?} belongs to no region",
            cells[p]
        )));
    }

    let particles: Vec<Particle> = cells
        .iter()
        .zip(&particle_region)
        .map(|(&cell, &r)| {
            let pos = grid.cell_center(cell);
            if regions[r].pinned {
                Particle::pinned(pos)
            } else {
                Particle::at_rest(pos, material.particle_mass)
            }
        })
        .collect();

    let mut constraints = Vec::new();
    for (i, &cell) in cells.iter().enumerate() {
        for o in forward_offsets() {
            let n = [
                cell[0] as i64 + o[0],
                cell[1] as i64 + o[1],
                cell[2] as i64 + o[2],
            ];
            if n.iter().any(|&c| c < 0) {
                continue;
            }
            let n = [n[0] as usize, n[1] as usize, n[2] as usize];
            let Ok(j) = cells.binary_search(&n) else {
                continue;
            };
            let (ri, rj) = (particle_region[i], particle_region[j]);
            let scale = 0.5 * (regions[ri].stiffness_scale + regions[rj].stiffness_scale);
            if scale <= 0.0 {
                // both endpoints are in zero-stiffness regions
                continue;
            }
            constraints.push(SpringConstraint {
                i,
                j,
                rest_length0: (particles[i].position - particles[j].position).norm(),
                stiffness: material.stiffness * scale,
                damping: material.damping,
                region: ri,
            });
        }
    }
    constraints.sort_by_key(|c| (c.i, c.j));

    let lattice = Lattice {
        particles,
        constraints,
        particle_cell: cells,
        particle_region,
        regions: regions.to_vec(),
        cell_size: grid.cell_size,
    };
    lattice.validate()?;
    Ok(lattice)
}
