//! JSON text messages exchanged over the live WebSocket channel.

use serde::{Deserialize, Serialize};

use crate::actuation::Harmonic;
use crate::lattice::{Lattice, SkinBinding};
use crate::mesh_io::TriMesh;
use crate::Vec3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionInfo {
    pub id: usize,
    pub name: String,
    pub pinned: bool,
    pub stiffness_scale: f64,
    pub amplitude_scale: f64,
    pub harmonics: Vec<Harmonic>,
}

impl RegionInfo {
    pub fn from_lattice(lattice: &Lattice) -> Vec<Self> {
        lattice
            .regions
            .iter()
            .map(|r| Self {
                id: r.id,
                name: r.name.clone(),
                pinned: r.pinned,
                stiffness_scale: r.stiffness_scale,
                amplitude_scale: r.amplitude_scale,
                harmonics: r.actuation.harmonics.clone(),
            })
            .collect()
    }
}

/// Server to client.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Hello {
        binding: SkinBinding,
        mesh: TriMesh,
        regions: Vec<RegionInfo>,
        /// Simulated seconds per step.
        dt: f64,
    },
    Frame {
        step: u64,
        t: f64,
        positions: Vec<Vec3>,
    },
    /// Reply to `snapshot`: a frame plus the live parameters.
    Snapshot {
        step: u64,
        t: f64,
        positions: Vec<Vec3>,
        regions: Vec<RegionInfo>,
        paused: bool,
    },
    Error {
        msg: String,
    },
    TuneProgress {
        iter: usize,
        objective: f64,
    },
}

/// Client to server.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMessage {
    SetParams {
        region: usize,
        harmonics: Vec<Harmonic>,
        amplitude_scale: f64,
    },
    Poke {
        point: Vec3,
        force: Vec3,
        radius: f64,
        duration: f64,
    },
    Pause,
    Resume,
    Reset,
    Snapshot,
}

impl ServerMessage {
    pub fn error(msg: impl Into<String>) -> Self {
        Self::Error { msg: msg.into() }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("server message serializes")
    }
}

impl ClientMessage {
    pub fn parse(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("client message serializes")
    }
}
