//! Procedural meshes and keyframe tracks for demos, tests and benchmarks.

use std::f64::consts::{PI, TAU};

use crate::actuation::{ActuationSignal, RegionDrive};
use crate::dynamics::{SimConfig, SimError, SimState};
use crate::lattice::{Lattice, SkinBinding};
use crate::mesh_io::{KeyframeTrack, TriMesh};
use crate::Vec3;

/// The canonical unit cube: 8 corners, 12 outward-facing triangles.
pub fn unit_cube() -> TriMesh {
    let vertices = vec![
        Vec3::new(0.0, 0.0, 0.0),
        Vec3::new(1.0, 0.0, 0.0),
        Vec3::new(1.0, 1.0, 0.0),
        Vec3::new(0.0, 1.0, 0.0),
        Vec3::new(0.0, 0.0, 1.0),
        Vec3::new(1.0, 0.0, 1.0),
        Vec3::new(1.0, 1.0, 1.0),
        Vec3::new(0.0, 1.0, 1.0),
    ];
    let triangles = vec![
        [0, 2, 1],
        [0, 3, 2],
        [4, 5, 6],
        [4, 6, 7],
        [0, 1, 5],
        [0, 5, 4],
        [1, 2, 6],
        [1, 6, 5],
        [2, 3, 7],
        [2, 7, 6],
        [3, 0, 4],
        [3, 4, 7],
    ];
    TriMesh::new("cube", vertices, triangles).expect("cube is valid")
}

/// Closed box surface from `min` to `max` with `n` quads along each face edge.
pub fn box_mesh(min: Vec3, max: Vec3, n: usize) -> TriMesh {
    assert!(n >= 1);
    let mut vertices: Vec<Vec3> = Vec::new();
    let mut index = std::collections::HashMap::new();
    let mut triangles = Vec::new();
    let size = max - min;
    let key = |p: [usize; 3]| p;
    // Each face is a grid over two axes with the third fixed at 0 or n.
    for axis in 0..3 {
        let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
        for side in [0usize, n] {
            let mut ids = vec![vec![0usize; n + 1]; n + 1];
            for (i, row) in ids.iter_mut().enumerate() {
                for (j, id) in row.iter_mut().enumerate() {
                    let mut g = [0usize; 3];
                    g[axis] = side;
                    g[u] = i;
                    g[v] = j;
                    *id = *index.entry(key(g)).or_insert_with(|| {
                        let p = Vec3::new(
                            min.x + size.x * g[0] as f64 / n as f64,
                            min.y + size.y * g[1] as f64 / n as f64,
                            min.z + size.z * g[2] as f64 / n as f64,
                        );
                        vertices.push(p);
                        vertices.len() - 1
                    });
                }
            }
            for i in 0..n {
                for j in 0..n {
                    let (a, b, c, d) = (ids[i][j], ids[i + 1][j], ids[i + 1][j + 1], ids[i][j + 1]);
                    if side == n {
                        triangles.push([a, b, c]);
                        triangles.push([a, c, d]);
                    } else {
                        triangles.push([a, c, b]);
                        triangles.push([a, d, c]);
                    }
                }
            }
        }
    }
    TriMesh::new("box", vertices, triangles).expect("box is valid")
}

/// Latitude/longitude surface of a closed star-shaped body whose radius in
/// direction (polar `theta`, azimuth `phi`) is given by `radius`.
fn radial_surface(
    name: &str,
    rings: usize,
    segments: usize,
    radius: impl Fn(f64, f64) -> Vec3,
) -> TriMesh {
    assert!(rings >= 2 && segments >= 3);
    let mut vertices = vec![radius(0.0, 0.0)];
    for r in 1..rings {
        let theta = PI * r as f64 / rings as f64;
        for s in 0..segments {
            let phi = TAU * s as f64 / segments as f64;
            vertices.push(radius(theta, phi));
        }
    }
    vertices.push(radius(PI, 0.0));
    let south = vertices.len() - 1;
    let ring = |r: usize, s: usize| 1 + (r - 1) * segments + s % segments;

    let mut triangles = Vec::new();
    for s in 0..segments {
        triangles.push([0, ring(1, s), ring(1, s + 1)]);
    }
    for r in 1..rings - 1 {
        for s in 0..segments {
            let (a, b, c, d) = (ring(r, s), ring(r + 1, s), ring(r + 1, s + 1), ring(r, s + 1));
            triangles.push([a, b, c]);
            triangles.push([a, c, d]);
        }
    }
    for s in 0..segments {
        triangles.push([south, ring(rings - 1, s + 1), ring(rings - 1, s)]);
    }
    TriMesh::new(name, vertices, triangles).expect("radial surface is valid")
}

pub fn ellipsoid(radii: Vec3, rings: usize, segments: usize) -> TriMesh {
    radial_surface("ellipsoid", rings, segments, |theta, phi| {
        Vec3::new(
            radii.x * theta.sin() * phi.cos(),
            radii.y * theta.cos(),
            radii.z * theta.sin() * phi.sin(),
        )
    })
}

/// A heart-sized (about 12 cm tall) asymmetric organ surface: an ellipsoid
/// tapering towards an apex at -y, with a flattened lobe on one side.
pub fn heart(rings: usize, segments: usize) -> TriMesh {
    let mut m = radial_surface("heart", rings, segments, |theta, phi| {
        // theta = 0 is the base (top), theta = pi the apex.
        let taper = 1.0 - 0.35 * (theta / PI).powi(2);
        let lobe = 1.0 + 0.15 * phi.cos() * theta.sin();
        let r = 0.05 * taper * lobe;
        Vec3::new(
            r * theta.sin() * phi.cos(),
            0.06 * theta.cos() - 0.01 * (theta / PI),
            0.85 * r * theta.sin() * phi.sin(),
        )
    });
    m.name = "heart".into();
    m
}

/// Uniform "breathing" motion: every vertex scaled about the mesh centroid
/// by `1 + amplitude * sin(2 pi frequency t)`, sampled at `fps` for
/// `duration` seconds. The period is recorded when it is a whole number of
/// frames that fits in the track.
pub fn breathing_track(
    mesh: &TriMesh,
    fps: f64,
    duration: f64,
    amplitude: f64,
    frequency: f64,
) -> KeyframeTrack {
    let centroid = centroid(&mesh.vertices);
    let count = (duration * fps).round() as usize;
    let frames = (0..count)
        .map(|k| {
            let t = k as f64 / fps;
            let s = 1.0 + amplitude * (TAU * frequency * t).sin();
            mesh.vertices
                .iter()
                .map(|v| centroid + (v - centroid) * s)
                .collect()
        })
        .collect();
    let period = fps / frequency;
    let period_frames = (period.fract().abs() < 1e-9 && period.round() as usize <= count)
        .then(|| period.round() as usize);
    KeyframeTrack::new(fps, period_frames, frames).expect("breathing track is valid")
}

/// One period of skinned motion produced by the engine itself: the lattice
/// is driven by `signals` for `warmup_periods` periods of `1 / frequency`,
/// then the deformed mesh is sampled at `fps` over one further period.
/// `fps / frequency` must be a whole number of frames.
pub fn simulated_track(
    lattice: &Lattice,
    binding: &SkinBinding,
    signals: Vec<ActuationSignal>,
    cfg: &SimConfig,
    frequency: f64,
    fps: f64,
    warmup_periods: usize,
) -> Result<KeyframeTrack, SimError> {
    let frames_per_period = fps / frequency;
    if !(frequency > 0.0 && fps > 0.0) || (frames_per_period - frames_per_period.round()).abs() > 1e-9 {
        return Err(SimError::InvalidConfig(format!(
            "fps {fps} is not a whole multiple of frequency {frequency}"
        )));
    }
    cfg.validate()?;
    let drive = RegionDrive::with_signals(lattice, signals, cfg.rest_clamp_epsilon);
    let mut state = SimState::new(lattice.clone());
    let period = 1.0 / frequency;
    let count = frames_per_period.round() as usize;
    let start = (warmup_periods as f64 * period / cfg.dt).round() as usize;
    let mut frames = Vec::with_capacity(count);
    let mut step = 0usize;
    for k in 0..count {
        let at = start + (k as f64 / (fps * cfg.dt)).round() as usize;
        while step < at {
            state.step(cfg, &drive)?;
            step += 1;
        }
        frames.push(binding.deform(&state.positions()));
    }
    Ok(KeyframeTrack::new(fps, Some(count), frames).expect("simulated track is valid"))
}

pub fn centroid(points: &[Vec3]) -> Vec3 {
    points.iter().sum::<Vec3>() / points.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_mesh_counts() {
        let m = box_mesh(Vec3::zeros(), Vec3::repeat(1.0), 2);
        // 6 faces * 2*2 quads * 2 triangles; shared vertices 6*n^2 + 2
        assert_eq!(m.triangles.len(), 48);
        assert_eq!(m.vertex_count(), 26);
    }

    #[test]
    fn heart_is_valid_and_sized() {
        let m = heart(16, 24);
        assert_eq!(m.vertex_count(), 15 * 24 + 2);
        let (lo, hi) = m.bounds();
        assert!((hi.y - lo.y) > 0.1 && (hi.y - lo.y) < 0.14);
    }
}
