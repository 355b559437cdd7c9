use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ActuationError, ActuationSignal, FitReport, Harmonic};
use crate::lattice::Lattice;

/// One region of the fitted-parameters file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsEntry {
    pub id: usize,
    pub name: String,
    pub harmonics: Vec<Harmonic>,
    #[serde(default)]
    pub residual: Option<f64>,
}

/// `{"regions": [{"id", "name", "harmonics": [{"a","f","phi"}], "residual"}]}`,
/// the interchange between fitting, tuning, simulation and the UI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsFile {
    pub regions: Vec<ParamsEntry>,
}

impl ParamsFile {
    pub fn from_signals(lattice: &Lattice, signals: &[ActuationSignal]) -> Self {
        Self {
            regions: lattice
                .regions
                .iter()
                .zip(signals)
                .map(|(r, s)| ParamsEntry {
                    id: r.id,
                    name: r.name.clone(),
                    harmonics: s.harmonics.clone(),
                    residual: None,
                })
                .collect(),
        }
    }

    pub fn from_lattice(lattice: &Lattice) -> Self {
        let signals: Vec<_> = lattice.regions.iter().map(|r| r.actuation.clone()).collect();
        Self::from_signals(lattice, &signals)
    }

    pub fn from_fit(report: &FitReport) -> Self {
        Self {
            regions: report
                .regions
                .iter()
                .map(|r| ParamsEntry {
                    id: r.id,
                    name: r.name.clone(),
                    harmonics: r.signal.harmonics.clone(),
                    residual: r.residual,
                })
                .collect(),
        }
    }

    /// Per-region signals ordered by region id; regions missing from the
    /// file are passive.
    pub fn signals(&self, region_count: usize) -> Result<Vec<ActuationSignal>, ActuationError> {
        let mut out = vec![ActuationSignal::default(); region_count];
        let mut seen = vec![false; region_count];
        for e in &self.regions {
            if e.id >= region_count {
                return Err(ActuationError::Params(format!(
                    "region id {} out of range ({region_count} regions)",
                    e.id
                )));
            }
            if std::mem::replace(&mut seen[e.id], true) {
                return Err(ActuationError::Params(format!("region id {} repeated", e.id)));
            }
            let signal = ActuationSignal {
                harmonics: e.harmonics.clone(),
            };
            signal
                .validate()
                .map_err(|err| ActuationError::Params(format!("region {}: {err}", e.id)))?;
            out[e.id] = signal;
        }
        Ok(out)
    }

    pub fn parse(text: &str) -> Result<Self, ActuationError> {
        serde_json::from_str(text).map_err(|e| ActuationError::Params(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ActuationError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| ActuationError::Params(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("params serialize")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ActuationError> {
        std::fs::write(path, self.to_json()).map_err(|e| ActuationError::Params(e.to_string()))
    }
}
