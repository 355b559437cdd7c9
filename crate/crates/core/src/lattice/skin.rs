use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Lattice, LatticeError};
use crate::mesh_io::TriMesh;
use crate::Vec3;

/// Maximum number of particles influencing one vertex.
pub const SKIN_INFLUENCES: usize = 4;
/// Distance regulariser (m) in the inverse-distance weights.
pub const SKIN_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VertexInfluence {
    /// `(particle index, weight)` pairs, nearest first.
    pub weights: Vec<(usize, f64)>,
    /// Vertex position minus the weighted particle centroid at bind time.
    pub offset: Vec3,
}

/// Maps the graphical mesh onto the lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkinBinding {
    pub vertices: Vec<VertexInfluence>,
    /// Nearest mesh vertex of every particle at bind time.
    pub particle_vertex: Vec<usize>,
}

impl SkinBinding {
    /// Checks partition of unity and index ranges against a mesh/lattice pair.
    pub fn validate(&self, vertex_count: usize, particle_count: usize) -> Result<(), LatticeError> {
        let bad = |m: String| Err(LatticeError::Binding(m));
        if self.vertices.len() != vertex_count {
            return bad(format!(
                "binding has {} vertices, mesh has {vertex_count}",
                self.vertices.len()
            ));
        }
        if self.particle_vertex.len() != particle_count {
            return bad(format!(
                "binding has {} particles, lattice has {particle_count}",
                self.particle_vertex.len()
            ));
        }
        for (v, inf) in self.vertices.iter().enumerate() {
            if inf.weights.is_empty() || inf.weights.len() > SKIN_INFLUENCES {
                return bad(format!("vertex {v} has {} influences", inf.weights.len()));
            }
            if inf.weights.iter().any(|&(p, w)| p >= particle_count || !(w >= 0.0)) {
                return bad(format!("vertex {v} has an invalid influence"));
            }
            let sum: f64 = inf.weights.iter().map(|&(_, w)| w).sum();
            if (sum - 1.0).abs() >= 1e-9 {
                return bad(format!("vertex {v} weights sum to {sum}"));
            }
        }
        if self.particle_vertex.iter().any(|&v| v >= vertex_count) {
            return bad("particle bound to a missing vertex".into());
        }
        Ok(())
    }

    fn blend(&self, positions: &[Vec3], v: usize) -> Vec3 {
        let inf = &self.vertices[v];
        inf.weights
            .iter()
            .map(|&(p, w)| positions[p] * w)
            .sum::<Vec3>()
            + inf.offset
    }

    /// Skinned vertex positions for the given particle positions.
    pub fn deform(&self, positions: &[Vec3]) -> Vec<Vec3> {
        (0..self.vertices.len())
            .map(|v| self.blend(positions, v))
            .collect()
    }
}

fn nearest_particles(positions: &[Vec3], x: Vec3) -> Vec<(usize, f64)> {
    // (distance, index) ordering makes ties deterministic
    let mut best: Vec<(f64, usize)> = Vec::with_capacity(SKIN_INFLUENCES + 1);
    for (i, p) in positions.iter().enumerate() {
        let d = (p - x).norm();
        if best.len() == SKIN_INFLUENCES && d >= best[SKIN_INFLUENCES - 1].0 {
            continue;
        }
        let at = best.partition_point(|&(bd, _)| bd <= d);
        best.insert(at, (d, i));
        best.truncate(SKIN_INFLUENCES);
    }
    best.into_iter().map(|(d, i)| (i, d)).collect()
}

/// Binds every vertex to its nearest particles with inverse-distance
/// weights `1 / (d + eps)`, normalised.
pub fn bind_skin(mesh: &TriMesh, lattice: &Lattice) -> Result<SkinBinding, LatticeError> {
    if lattice.particles.is_empty() {
        return Err(LatticeError::Binding("lattice has no particles".into()));
    }
    let positions = lattice.positions();
    let vertices = mesh
        .vertices
        .par_iter()
        .map(|&x| {
            let near = nearest_particles(&positions, x);
            let raw: Vec<f64> = near.iter().map(|&(_, d)| 1.0 / (d + SKIN_EPSILON)).collect();
            let total: f64 = raw.iter().sum();
            let weights: Vec<(usize, f64)> = near
                .iter()
                .zip(&raw)
                .map(|(&(p, _), &w)| (p, w / total))
                .collect();
            let centroid: Vec3 = weights.iter().map(|&(p, w)| positions[p] * w).sum();
            VertexInfluence {
                weights,
                offset: x - centroid,
            }
        })
        .collect();
    let particle_vertex = positions
        .par_iter()
        .map(|p| {
            let mut best = (f64::INFINITY, 0);
            for (v, x) in mesh.vertices.iter().enumerate() {
                let d = (x - p).norm_squared();
                if d < best.0 {
                    best = (d, v);
                }
            }
            best.1
        })
        .collect();
    Ok(SkinBinding {
        vertices,
        particle_vertex,
    })
}

/// Mesh with vertices carried along by the lattice's current particle positions.
pub fn skin_update(binding: &SkinBinding, lattice: &Lattice, mesh: &TriMesh) -> TriMesh {
    mesh.with_vertices(binding.deform(&lattice.positions()))
}
