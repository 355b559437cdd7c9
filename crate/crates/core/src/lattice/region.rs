use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use tracing::warn;

use super::{Cell, LatticeError, VoxelGrid};
use crate::actuation::ActuationSignal;
use crate::Vec3;

/// Named cluster of cells sharing actuation and material overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub id: usize,
    pub name: String,
    pub cells: BTreeSet<Cell>,
    pub actuation: ActuationSignal,
    pub stiffness_scale: f64,
    pub amplitude_scale: f64,
    pub pinned: bool,
}

impl Region {
    /// A region with default overrides and a passive signal.
    pub fn new(id: usize, name: impl Into<String>) -> Self {
        Self {
            id,
            name: name.into(),
            cells: BTreeSet::new(),
            actuation: ActuationSignal::default(),
            stiffness_scale: 1.0,
            amplitude_scale: 1.0,
            pinned: false,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
}

fn one() -> f64 {
    1.0
}

/// One entry of a region spec file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionRule {
    pub name: String,
    #[serde(rename = "box", default)]
    pub bounds: Option<[Vec3; 2]>,
    /// Explicit cell list, matched in addition to `box`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cells: Option<Vec<Cell>>,
    #[serde(default)]
    pub pinned: bool,
    #[serde(default = "one")]
    pub stiffness_scale: f64,
    #[serde(default = "one")]
    pub amplitude_scale: f64,
    #[serde(default)]
    pub actuation: Option<ActuationSignal>,
}

impl RegionRule {
    pub fn default_region(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            bounds: None,
            cells: None,
            pinned: false,
            stiffness_scale: 1.0,
            amplitude_scale: 1.0,
            actuation: None,
        }
    }

    pub fn boxed(name: impl Into<String>, min: Vec3, max: Vec3) -> Self {
        Self {
            bounds: Some([min, max]),
            ..Self::default_region(name)
        }
    }

    fn is_catch_all(&self) -> bool {
        self.bounds.is_none() && self.cells.is_none()
    }

    fn matches(&self, grid: &VoxelGrid, cell: Cell) -> bool {
        let in_box = self.bounds.is_some_and(|[lo, hi]| {
            let c = grid.cell_center(cell);
            (0..3).all(|a| c[a] >= lo[a] && c[a] <= hi[a])
        });
        in_box || self.cells.as_ref().is_some_and(|cs| cs.contains(&cell))
    }
}

/// Ordered region rules; the last entry is the catch-all default region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RegionSpec(pub Vec<RegionRule>);

impl Default for RegionSpec {
    fn default() -> Self {
        Self(vec![RegionRule::default_region("default")])
    }
}

impl RegionSpec {
    pub fn parse(text: &str) -> Result<Self, LatticeError> {
        let spec: Self =
            serde_json::from_str(text).map_err(|e| LatticeError::RegionSpec(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, LatticeError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| LatticeError::RegionSpec(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<(), LatticeError> {
        let err = |m: String| Err(LatticeError::RegionSpec(m));
        let Some(last) = self.0.last() else {
            return err("region spec is empty".into());
        };
        if !last.is_catch_all() {
            return err("last entry must be the default region (\"box\": null)".into());
        }
        for (i, rule) in self.0.iter().enumerate() {
            if i + 1 < self.0.len() && rule.is_catch_all() {
                return err(format!("entry {i} ({}) has neither box nor cells", rule.name));
            }
            if !(rule.stiffness_scale >= 0.0 && rule.amplitude_scale >= 0.0) {
                return err(format!("entry {i} ({}) has a negative scale", rule.name));
            }
            if let Some(sig) = &rule.actuation {
                sig.validate()
                    .map_err(|e| LatticeError::RegionSpec(format!("entry {i}: {e}")))?;
            }
        }
        Ok(())
    }
}

/// Assigns every occupied cell to the first matching rule, falling back to
/// the default region. Region ids are rule positions, so empty regions are
/// kept (with a warning) to keep ids stable.
pub fn assign_regions(grid: &VoxelGrid, spec: &RegionSpec) -> Result<Vec<Region>, LatticeError> {
    spec.validate()?;
    let rules = &spec.0;
    let default = rules.len() - 1;
    let mut regions: Vec<Region> = rules
        .iter()
        .enumerate()
        .map(|(id, r)| Region {
            id,
            name: r.name.clone(),
            cells: BTreeSet::new(),
            actuation: r.actuation.clone().unwrap_or_default(),
            stiffness_scale: r.stiffness_scale,
            amplitude_scale: if r.pinned { 0.0 } else { r.amplitude_scale },
            pinned: r.pinned,
        })
        .collect();
    for &cell in &grid.occupied {
        let id = rules[..default]
            .iter()
            .position(|r| r.matches(grid, cell))
            .unwrap_or(default);
        regions[id].cells.insert(cell);
    }
    for r in regions.iter().filter(|r| r.is_empty()) {
        warn!(region = %r.name, "region matched no occupied cells");
    }
    Ok(regions)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::voxelize;
    use crate::synthetic;

    #[test]
    fn no_rules_single_default() {
        let g = voxelize(&synthetic::unit_cube(), 2).unwrap();
        let regions = assign_regions(&g, &RegionSpec::default()).unwrap();
        assert_eq!(regions.len(), 1);
        assert_eq!(regions[0].cells, g.occupied);
    }

    #[test]
    fn pinned_valve_on_top_of_heart() {
        let m = synthetic::heart(16, 24);
        let g = voxelize(&m, 8).unwrap();
        let (lo, hi) = m.bounds();
        let cut = hi.y - 0.2 * (hi.y - lo.y);
        let mut valve = RegionRule::boxed(
            "valve",
            Vec3::new(lo.x, cut, lo.z),
            Vec3::new(hi.x, hi.y, hi.z),
        );
        valve.pinned = true;
        let spec = RegionSpec(vec![valve, RegionRule::default_region("muscle")]);
        let regions = assign_regions(&g, &spec).unwrap();
        assert!(!regions[0].is_empty());
        assert_eq!(regions[0].amplitude_scale, 0.0);
        assert!(regions[0].pinned);
        for c in &regions[0].cells {
            assert!(g.cell_center(*c).y >= cut);
        }
        for c in &regions[1].cells {
            assert!(g.cell_center(*c).y < cut);
        }
        assert_eq!(
            regions[0].cells.len() + regions[1].cells.len(),
            g.occupied.len()
        );
    }

    #[test]
    fn overlap_goes_to_first_rule() {
        let g = voxelize(&synthetic::unit_cube(), 2).unwrap();
        let a = RegionRule::boxed("a", Vec3::zeros(), Vec3::repeat(0.5));
        let b = RegionRule::boxed("b", Vec3::zeros(), Vec3::repeat(1.0));
        let spec = RegionSpec(vec![a, b, RegionRule::default_region("rest")]);
        let regions = assign_regions(&g, &spec).unwrap();
        assert_eq!(regions[0].cells.len(), 1);
        assert!(regions[0].cells.contains(&[0, 0, 0]));
        assert_eq!(regions[1].cells.len(), 7);
        assert!(regions[2].is_empty());
    }

    #[test]
    fn cell_list_rule() {
        let g = voxelize(&synthetic::unit_cube(), 2).unwrap();
        let mut r = RegionRule::default_region("corner");
        r.cells = Some(vec![[1, 1, 1]]);
        let spec = RegionSpec(vec![r, RegionRule::default_region("rest")]);
        let regions = assign_regions(&g, &spec).unwrap();
        assert_eq!(regions[0].cells.iter().collect::<Vec<_>>(), vec![&[1, 1, 1]]);
    }

    #[test]
    fn spec_file_format() {
        let text = r#"[
            {"name": "valve", "box": [[0, 0.8, 0], [1, 1, 1]], "pinned": true,
             "stiffness_scale": 2.0, "amplitude_scale": 1.0, "actuation": null},
            {"name": "wall", "box": null, "pinned": false, "stiffness_scale": 1.0,
             "amplitude_scale": 1.0,
             "actuation": {"harmonics": [{"a": 0.1, "f": 1.0, "phi": 0.0}]}}
        ]"#;
        let spec = RegionSpec::parse(text).unwrap();
        assert_eq!(spec.0.len(), 2);
        assert_eq!(spec.0[1].actuation.as_ref().unwrap().harmonics.len(), 1);

        let missing_default = r#"[{"name": "v", "box": [[0,0,0],[1,1,1]]}]"#;
        assert!(RegionSpec::parse(missing_default).is_err());
        let bad_signal = r#"[{"name": "w", "box": null,
            "actuation": {"harmonics": [{"a": 0.95, "f": 1.0, "phi": 0.0}]}}]"#;
        assert!(RegionSpec::parse(bad_signal).is_err());
    }
}
