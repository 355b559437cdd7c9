//! Triangle meshes and keyframe tracks: Wavefront OBJ and keyframe JSON.
//!
//! Every piece of geometry enters and leaves the engine through this module.
//! Vertex order is preserved on load and export because keyframe frames are
//! positional.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Vec3;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("file not found: {0}")]
    FileNotFound(PathBuf),
    #[error("parse error at line {line}: {msg}")]
    ParseError { line: usize, msg: String },
    #[error("invalid mesh: {0}")]
    ValidationError(String),
    #[error("keyframe schema error: {0}")]
    SchemaError(String),
    #[error("keyframe width mismatch: expected {expected}, found {found}")]
    WidthMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type MeshResult<T> = Result<T, MeshError>;

/// Indexed triangle surface mesh, positions in meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriMesh {
    pub name: String,
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[usize; 3]>,
}

impl TriMesh {
    /// Builds a mesh and checks its invariants.
    pub fn new(
        name: impl Into<String>,
        vertices: Vec<Vec3>,
        triangles: Vec<[usize; 3]>,
    ) -> MeshResult<Self> {
        let mesh = Self {
            name: name.into(),
            vertices,
            triangles,
        };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn validate(&self) -> MeshResult<()> {
        if self.vertices.len() < 3 {
            return Err(MeshError::ValidationError(format!(
                "need at least 3 vertices, got {}",
                self.vertices.len()
            )));
        }
        if self.triangles.is_empty() {
            return Err(MeshError::ValidationError("mesh has no triangles".into()));
        }
        let n = self.vertices.len();
        for (t, tri) in self.triangles.iter().enumerate() {
            if let Some(&bad) = tri.iter().find(|&&i| i >= n) {
                return Err(MeshError::ValidationError(format!(
                    "triangle {t} references vertex {} but only {n} vertices exist",
                    bad + 1
                )));
            }
            if tri[0] == tri[1] && tri[1] == tri[2] {
                return Err(MeshError::ValidationError(format!(
                    "triangle {t} is degenerate"
                )));
            }
        }
        if let Some(i) = self
            .vertices
            .iter()
            .position(|v| !v.iter().all(|c| c.is_finite()))
        {
            return Err(MeshError::ValidationError(format!(
                "vertex {} is not finite",
                i + 1
            )));
        }
        Ok(())
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    /// Axis-aligned bounds `(min, max)`.
    pub fn bounds(&self) -> (Vec3, Vec3) {
        bounds_of(&self.vertices)
    }

    /// Length of the bounding-box diagonal.
    pub fn diagonal(&self) -> f64 {
        let (lo, hi) = self.bounds();
        (hi - lo).norm()
    }

    /// Same topology with different vertex positions.
    pub fn with_vertices(&self, vertices: Vec<Vec3>) -> Self {
        debug_assert_eq!(vertices.len(), self.vertices.len());
        Self {
            name: self.name.clone(),
            vertices,
            triangles: self.triangles.clone(),
        }
    }
}

pub(crate) fn bounds_of(points: &[Vec3]) -> (Vec3, Vec3) {
    let mut lo = Vec3::repeat(f64::INFINITY);
    let mut hi = Vec3::repeat(f64::NEG_INFINITY);
    for p in points {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    (lo, hi)
}

fn read_to_string(path: &Path) -> MeshResult<String> {
    fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => MeshError::FileNotFound(path.to_path_buf()),
        _ => MeshError::Io(e),
    })
}

/// Loads a Wavefront OBJ file. Quads are fan-triangulated; larger polygons
/// are rejected.
pub fn load_mesh(path: impl AsRef<Path>) -> MeshResult<TriMesh> {
    let path = path.as_ref();
    let text = read_to_string(path)?;
    let default_name = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("mesh")
        .to_string();
    parse_obj(&text, &default_name)
}

/// Parses OBJ text. Only `v` and `f` records matter; `o` sets the name and
/// everything else is ignored.
pub fn parse_obj(text: &str, default_name: &str) -> MeshResult<TriMesh> {
    let mut name = None;
    let mut vertices = Vec::new();
    // (line number, raw 1-based or negative indices) resolved after all vertices are known
    let mut faces: Vec<(usize, Vec<i64>, usize)> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split_whitespace();
        let tag = fields.next().unwrap_or_default();
        match tag {
            "v" => {
                let coords: Vec<f64> = fields
                    .take(3)
                    .map(|s| s.parse::<f64>())
                    .collect::<Result<_, _>>()
                    .map_err(|e| MeshError::ParseError {
                        line: line_no,
                        msg: format!("bad vertex coordinate: {e}"),
                    })?;
                if coords.len() != 3 {
                    return Err(MeshError::ParseError {
                        line: line_no,
                        msg: "vertex needs three coordinates".into(),
                    });
                }
                vertices.push(Vec3::new(coords[0], coords[1], coords[2]));
            }
            "f" => {
                let refs: Vec<i64> = fields
                    .map(|s| {
                        s.split('/').next().unwrap_or("").parse::<i64>().map_err(|e| {
                            MeshError::ParseError {
                                line: line_no,
                                msg: format!("bad face index {s:?}: {e}"),
                            }
                        })
                    })
                    .collect::<Result<_, _>>()?;
                if !(3..=4).contains(&refs.len()) {
                    return Err(MeshError::ParseError {
                        line: line_no,
                        msg: format!(
                            "faces must have 3 or 4 vertices, got {}",
                            refs.len()
                        ),
                    });
                }
                if refs.contains(&0) {
                    return Err(MeshError::ParseError {
                        line: line_no,
                        msg: "face index 0 (indices are 1-based)".into(),
                    });
                }
                faces.push((line_no, refs, vertices.len()));
            }
            "o" => {
                let rest = line[1..].trim();
                if !rest.is_empty() && name.is_none() {
                    name = Some(rest.to_string());
                }
            }
            _ => {}
        }
    }

    let n = vertices.len() as i64;
    let mut triangles = Vec::with_capacity(faces.len());
    for (line_no, refs, seen) in faces {
        let resolved: Vec<usize> = refs
            .iter()
            .map(|&r| {
                let i = if r < 0 { seen as i64 + r } else { r - 1 };
                if i < 0 || i >= n {
                    Err(MeshError::ValidationError(format!(
                        "line {line_no}: face index {r} out of range for {n} vertices"
                    )))
                } else {
                    Ok(i as usize)
                }
            })
            .collect::<Result<_, _>>()?;
        triangles.push([resolved[0], resolved[1], resolved[2]]);
        if resolved.len() == 4 {
            triangles.push([resolved[0], resolved[2], resolved[3]]);
        }
    }

    TriMesh::new(name.unwrap_or_else(|| default_name.to_string()), vertices, triangles)
}

/// Renders a mesh as OBJ text with six decimal places per coordinate.
pub fn to_obj_string(mesh: &TriMesh) -> String {
    let mut out = String::with_capacity(mesh.vertices.len() * 40 + mesh.triangles.len() * 24);
    let _ = writeln!(out, "o {}", mesh.name);
    for v in &mesh.vertices {
        let _ = writeln!(out, "v {:.6} {:.6} {:.6}", v.x, v.y, v.z);
    }
    for t in &mesh.triangles {
        let _ = writeln!(out, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
    }
    out
}

pub fn export_frame(mesh: &TriMesh, path: impl AsRef<Path>) -> MeshResult<()> {
    fs::write(path, to_obj_string(mesh))?;
    Ok(())
}

/// `<prefix>_%04d.obj`
pub fn frame_path(prefix: &str, index: usize) -> PathBuf {
    PathBuf::from(format!("{prefix}_{index:04}.obj"))
}

/// Dense per-vertex keyframe animation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyframeTrack {
    pub fps: f64,
    pub period_frames: Option<usize>,
    pub frames: Vec<Vec<Vec3>>,
}

impl KeyframeTrack {
    pub fn new(fps: f64, period_frames: Option<usize>, frames: Vec<Vec<Vec3>>) -> MeshResult<Self> {
        let track = Self {
            fps,
            period_frames,
            frames,
        };
        track.validate()?;
        Ok(track)
    }

    pub fn validate(&self) -> MeshResult<()> {
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return Err(MeshError::SchemaError(format!("fps must be > 0, got {}", self.fps)));
        }
        if self.frames.len() < 2 {
            return Err(MeshError::SchemaError("need at least 2 frames".into()));
        }
        let width = self.frames[0].len();
        if let Some(f) = self.frames.iter().find(|f| f.len() != width) {
            return Err(MeshError::WidthMismatch {
                expected: width,
                found: f.len(),
            });
        }
        if let Some(p) = self.period_frames {
            if p < 2 || p > self.frames.len() {
                return Err(MeshError::SchemaError(format!(
                    "period_frames {p} outside [2, {}]",
                    self.frames.len()
                )));
            }
        }
        Ok(())
    }

    pub fn width(&self) -> usize {
        self.frames[0].len()
    }

    /// Duration of one motion cycle in seconds, if the track is periodic.
    pub fn period(&self) -> Option<f64> {
        self.period_frames.map(|p| p as f64 / self.fps)
    }

    /// Fractional frame position for simulation time `t`, with the wrap or
    /// hold rule applied. Returns `(lower frame, upper frame, blend)`.
    fn locate(&self, t: f64) -> (usize, usize, f64) {
        let pos = (t * self.fps).max(0.0);
        match self.period_frames {
            Some(p) => {
                let wrapped = pos.rem_euclid(p as f64);
                let lo = (wrapped.floor() as usize).min(p - 1);
                let hi = (lo + 1) % p;
                (lo, hi, wrapped - lo as f64)
            }
            None => {
                let last = self.frames.len() - 1;
                if pos >= last as f64 {
                    (last, last, 0.0)
                } else {
                    let lo = pos.floor() as usize;
                    (lo, lo + 1, pos - lo as f64)
                }
            }
        }
    }

    /// Linearly interpolated position of `vertex` at time `t` (s).
    pub fn position(&self, vertex: usize, t: f64) -> Vec3 {
        let (lo, hi, s) = self.locate(t);
        let a = self.frames[lo][vertex];
        let b = self.frames[hi][vertex];
        a + (b - a) * s
    }

    /// Position and velocity of `vertex` at time `t`; the velocity is the
    /// slope of the active interpolation segment.
    pub fn position_velocity(&self, vertex: usize, t: f64) -> (Vec3, Vec3) {
        let (lo, hi, s) = self.locate(t);
        let a = self.frames[lo][vertex];
        let b = self.frames[hi][vertex];
        (a + (b - a) * s, (b - a) * self.fps)
    }
}

#[derive(Deserialize)]
struct TrackFile {
    fps: f64,
    #[serde(default)]
    period_frames: Option<usize>,
    frames: Vec<Vec<[f64; 3]>>,
}

pub fn parse_keyframes(text: &str, mesh: &TriMesh) -> MeshResult<KeyframeTrack> {
    let file: TrackFile =
        serde_json::from_str(text).map_err(|e| MeshError::SchemaError(e.to_string()))?;
    let expected = mesh.vertex_count();
    if let Some(f) = file.frames.iter().find(|f| f.len() != expected) {
        return Err(MeshError::WidthMismatch {
            expected,
            found: f.len(),
        });
    }
    let frames = file
        .frames
        .into_iter()
        .map(|f| f.into_iter().map(Vec3::from).collect())
        .collect();
    KeyframeTrack::new(file.fps, file.period_frames, frames)
}

pub fn load_keyframes(path: impl AsRef<Path>, mesh: &TriMesh) -> MeshResult<KeyframeTrack> {
    parse_keyframes(&read_to_string(path.as_ref())?, mesh)
}

pub fn save_keyframes(track: &KeyframeTrack, path: impl AsRef<Path>) -> MeshResult<()> {
    let text = serde_json::to_string(track).map_err(|e| MeshError::SchemaError(e.to_string()))?;
    fs::write(path, text)?;
    Ok(())
}
