use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{Cell, LatticeError};
use crate::mesh_io::TriMesh;
use crate::Vec3;

/// Uniform grid over a mesh's bounding box with vertex-occupied cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoxelGrid {
    pub origin: Vec3,
    pub cell_size: f64,
    pub dims: [usize; 3],
    pub occupied: BTreeSet<Cell>,
    /// Cell of every mesh vertex, in vertex order.
    pub vertex_cells: Vec<Cell>,
}

impl VoxelGrid {
    pub fn cell_center(&self, cell: Cell) -> Vec3 {
        self.origin
            + Vec3::new(
                cell[0] as f64 + 0.5,
                cell[1] as f64 + 0.5,
                cell[2] as f64 + 0.5,
            ) * self.cell_size
    }

    pub fn contains(&self, cell: Cell) -> bool {
        (0..3).all(|a| cell[a] < self.dims[a])
    }
}

// Snap tolerance, in cells, for deciding that a coordinate sits on a cell boundary.
const TIE_EPS: f64 = 1e-9;

fn axis_index(offset: f64, cell_size: f64, dim: usize) -> usize {
    let u = offset / cell_size;
    let r = u.round();
    let idx = if (u - r).abs() < TIE_EPS {
        // boundary ties go to the lower cell
        r - 1.0
    } else {
        u.floor()
    };
    (idx.max(0.0) as usize).min(dim - 1)
}

/// Vertex-occupancy voxelization with `resolution` cells along the longest
/// bounding-box axis.
pub fn voxelize(mesh: &TriMesh, resolution: usize) -> Result<VoxelGrid, LatticeError> {
    if resolution == 0 {
        return Err(LatticeError::InvalidResolution);
    }
    let (lo, hi) = mesh.bounds();
    let extent = hi - lo;
    let longest = extent.max();
    if !(longest > 0.0) {
        return Err(LatticeError::DegenerateMesh);
    }
    let cell_size = longest / resolution as f64;
    let mut dims = [1usize; 3];
    for (a, d) in dims.iter_mut().enumerate() {
        *d = ((extent[a] / cell_size - TIE_EPS).ceil() as usize).max(1);
    }
    dims[extent.imax()] = resolution;

    let vertex_cells: Vec<Cell> = mesh
        .vertices
        .iter()
        .map(|v| {
            let o = v - lo;
            [
                axis_index(o.x, cell_size, dims[0]),
                axis_index(o.y, cell_size, dims[1]),
                axis_index(o.z, cell_size, dims[2]),
            ]
        })
        .collect();
    let occupied = vertex_cells.iter().copied().collect();
    Ok(VoxelGrid {
        origin: lo,
        cell_size,
        dims,
        occupied,
        vertex_cells,
    })
}
