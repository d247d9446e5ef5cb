//! Scenario files: type chain, weights, utility grid and surface in JSON.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{build_surface, Frontier, Polyline, Quadratic, TypeChain, ValueSurface};

/// A payoff pair `[u, v]`.
pub type Point = [f64; 2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridSpec {
    Levels(Vec<f64>),
    /// `steps` equal intervals, so `steps + 1` levels including both ends.
    Uniform { min: f64, max: f64, steps: usize },
}

impl GridSpec {
    pub fn levels(&self) -> Result<Vec<f64>> {
        let levels = match self {
            GridSpec::Levels(v) => v.clone(),
            GridSpec::Uniform { min, max, steps } => {
                if !min.is_finite() || !max.is_finite() || max < min {
                    return Err(Error::InvalidInput(format!("bad grid range [{min}, {max}]")));
                }
                if *steps == 0 {
                    if min != max {
                        return Err(Error::InvalidInput("grid with zero steps needs min == max".into()));
                    }
                    vec![*min]
                } else {
                    let step = (max - min) / *steps as f64;
                    (0..=*steps)
                        .map(|k| if k == *steps { *max } else { min + step * k as f64 })
                        .collect()
                }
            }
        };
        if levels.is_empty() {
            return Err(Error::InvalidInput("utility grid is empty".into()));
        }
        if levels.iter().any(|u| !u.is_finite()) {
            return Err(Error::InvalidInput("utility grid has non-finite levels".into()));
        }
        if levels.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput("utility grid must be strictly increasing".into()));
        }
        Ok(levels)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SurfaceSpec {
    Points { points: Vec<Vec<Point>> },
    Quadratic { frontiers: Vec<Quadratic> },
    Pwl { breakpoints: Vec<Vec<Point>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DefaultSpec {
    Points(Vec<Point>),
    Quadratic(Quadratic),
}

impl DefaultSpec {
    fn frontier(&self) -> Result<Frontier> {
        match self {
            DefaultSpec::Points(p) => Frontier::from_points(&pairs(p)),
            DefaultSpec::Quadratic(q) => Ok(Frontier::Quadratic(Quadratic::new(q.height, q.peak, q.curvature, q.lo, q.hi)?)),
        }
    }

    fn from_frontier(f: &Frontier) -> Self {
        match f {
            Frontier::Quadratic(q) => DefaultSpec::Quadratic(*q),
            Frontier::Polyline(p) => DefaultSpec::Points(p.vertices().iter().map(|&(u, v)| [u, v]).collect()),
        }
    }
}

/// On-disk scenario layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub types: Vec<f64>,
    pub weights: Vec<f64>,
    pub u_grid: GridSpec,
    pub surface: SurfaceSpec,
    pub default: DefaultSpec,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub metadata: BTreeMap<String, serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_u_c: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub chain: TypeChain,
    pub surface: ValueSurface,
    pub u_grid: Vec<f64>,
    pub metadata: BTreeMap<String, serde_json::Value>,
    pub reference_u_c: Option<Vec<f64>>,
    grid_spec: GridSpec,
    surface_spec: Option<SurfaceSpec>,
}

fn pairs(points: &[Point]) -> Vec<(f64, f64)> {
    points.iter().map(|p| (p[0], p[1])).collect()
}

impl Scenario {
    pub fn from_file(file: ScenarioFile) -> Result<Self> {
        let chain = TypeChain::new(file.types.clone(), file.weights.clone())?;
        let u_grid = file.u_grid.levels()?;
        let n = chain.len();
        let count = match &file.surface {
            SurfaceSpec::Points { points } => points.len(),
            SurfaceSpec::Quadratic { frontiers } => frontiers.len(),
            SurfaceSpec::Pwl { breakpoints } => breakpoints.len(),
        };
        if count != n {
            return Err(Error::InvalidInput(format!("{n} types but {count} surface entries")));
        }
        let surface = match &file.surface {
            SurfaceSpec::Points { points } => {
                let by_type: Vec<_> = points.iter().map(|p| pairs(p)).collect();
                let default_points = match &file.default {
                    DefaultSpec::Points(p) => pairs(p),
                    DefaultSpec::Quadratic(_) => {
                        return Err(Error::InvalidInput(
                            "a point-cloud surface needs a point-list default".into(),
                        ))
                    }
                };
                build_surface(&by_type, &default_points)?
            }
            SurfaceSpec::Quadratic { frontiers } => {
                let fs = frontiers
                    .iter()
                    .map(|q| Quadratic::new(q.height, q.peak, q.curvature, q.lo, q.hi).map(Frontier::Quadratic))
                    .collect::<Result<Vec<_>>>()?;
                ValueSurface::new(fs, file.default.frontier()?)?
            }
            SurfaceSpec::Pwl { breakpoints } => {
                let fs = breakpoints
                    .iter()
                    .map(|b| Polyline::from_breakpoints(&pairs(b)).map(Frontier::Polyline))
                    .collect::<Result<Vec<_>>>()?;
                ValueSurface::new(fs, file.default.frontier()?)?
            }
        };
        if let Some(r) = &file.reference_u_c {
            if r.len() != n {
                return Err(Error::InvalidInput(format!("reference_u_c has {} entries, expected {n}", r.len())));
            }
        }
        Ok(Self {
            chain,
            surface,
            u_grid,
            metadata: file.metadata,
            reference_u_c: file.reference_u_c,
            grid_spec: file.u_grid,
            surface_spec: Some(file.surface),
        })
    }

    /// Scenario from an already-built surface. Serializes as `pwl` or
    /// `quadratic` depending on the frontier kinds.
    pub fn new(chain: TypeChain, surface: ValueSurface, u_grid: Vec<f64>) -> Result<Self> {
        if chain.len() != surface.len() {
            return Err(Error::InvalidInput(format!(
                "{} types but {} frontiers",
                chain.len(),
                surface.len()
            )));
        }
        let grid_spec = GridSpec::Levels(u_grid);
        let u_grid = grid_spec.levels()?;
        Ok(Self {
            chain,
            surface,
            u_grid,
            metadata: BTreeMap::new(),
            reference_u_c: None,
            grid_spec,
            surface_spec: None,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ScenarioFile = serde_json::from_str(text).map_err(|e| {
            Error::InvalidInput(format!("scenario JSON: {e}"))
        })?;
        Self::from_file(file)
    }

    pub fn to_file(&self) -> Result<ScenarioFile> {
        let surface = match &self.surface_spec {
            Some(s) => s.clone(),
            None => surface_spec_of(&self.surface)?,
        };
        let default = match (&surface, self.surface.default_frontier()) {
            (SurfaceSpec::Points { .. }, Frontier::Quadratic(_)) => {
                return Err(Error::InvalidInput("point-cloud surface with quadratic default".into()))
            }
            (_, f) => DefaultSpec::from_frontier(f),
        };
        Ok(ScenarioFile {
            types: self.chain.labels().to_vec(),
            weights: self.chain.weights().to_vec(),
            u_grid: self.grid_spec.clone(),
            surface,
            default,
            metadata: self.metadata.clone(),
            reference_u_c: self.reference_u_c.clone(),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(&self.to_file()?)
            .map_err(|e| Error::InvalidInput(format!("cannot serialize scenario: {e}")))
    }

    pub fn len(&self) -> usize {
        self.chain.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chain.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        self.chain.weights()
    }

    pub fn with_weights(&self, weights: Vec<f64>) -> Result<Self> {
        let mut s = self.clone();
        s.chain = self.chain.with_weights(weights)?;
        Ok(s)
    }

    /// Same frontiers, different default frontier.
    pub fn with_default(&self, default: Frontier) -> Result<Self> {
        let mut s = self.clone();
        s.surface = self.surface.with_default(default)?;
        s.surface_spec = None;
        Ok(s)
    }

    pub fn with_surface(&self, surface: ValueSurface) -> Result<Self> {
        if surface.len() != self.len() {
            return Err(Error::InvalidInput("surface size does not match the chain".into()));
        }
        let mut s = self.clone();
        s.surface = surface;
        s.surface_spec = None;
        Ok(s)
    }

    pub fn with_grid(&self, u_grid: Vec<f64>) -> Result<Self> {
        let mut s = self.clone();
        s.grid_spec = GridSpec::Levels(u_grid);
        s.u_grid = s.grid_spec.levels()?;
        Ok(s)
    }
}

fn surface_spec_of(surface: &ValueSurface) -> Result<SurfaceSpec> {
    let fs = surface.frontiers();
    if fs.iter().all(|f| matches!(f, Frontier::Quadratic(_))) {
        let frontiers = fs
            .iter()
            .map(|f| match f {
                Frontier::Quadratic(q) => *q,
                Frontier::Polyline(_) => unreachable!(),
            })
            .collect();
        return Ok(SurfaceSpec::Quadratic { frontiers });
    }
    if fs.iter().all(|f| matches!(f, Frontier::Polyline(_))) {
        let breakpoints = fs
            .iter()
            .map(|f| match f {
                Frontier::Polyline(p) => p.vertices().iter().map(|&(u, v)| [u, v]).collect(),
                Frontier::Quadratic(_) => unreachable!(),
            })
            .collect();
        return Ok(SurfaceSpec::Pwl { breakpoints });
    }
    Err(Error::InvalidInput("cannot serialize a surface that mixes quadratic and polyline frontiers".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    const THREE_TYPES: &str = r#"{
        "types": [1, 2, 3],
        "weights": [0.3333333333333333, 0.3333333333333333, 0.33333333333333337],
        "u_grid": {"min": 0, "max": 2, "steps": 10},
        "surface": {"kind": "quadratic", "frontiers": [
            {"height": 1, "peak": 1, "curvature": 1, "lo": 0, "hi": 2},
            {"height": 2, "peak": 0, "curvature": 0.25, "lo": 0, "hi": 2},
            {"height": 4, "peak": 2, "curvature": 0.25, "lo": 0, "hi": 2}
        ]},
        "default": [[0, 0]]
    }"#;

    #[test]
    fn parses_uniform_grid_as_steps_plus_one_levels() {
        let s = Scenario::from_json(THREE_TYPES).unwrap();
        assert_eq!(s.u_grid.len(), 11);
        assert_eq!(s.u_grid[0], 0.0);
        assert_eq!(s.u_grid[10], 2.0);
        assert!((s.u_grid[4] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn round_trip_is_stable() {
        let s = Scenario::from_json(THREE_TYPES).unwrap();
        let text = s.to_json().unwrap();
        let again = Scenario::from_json(&text).unwrap();
        assert_eq!(s, again);
        assert_eq!(text, again.to_json().unwrap());
    }

    #[test]
    fn points_surface_round_trip() {
        let text = r#"{"types":[0,1],"weights":[0.5,0.5],"u_grid":[0,0.5,1],
            "surface":{"kind":"points","points":[[[0,1]],[[0,0],[1,2]]]},
            "default":[[0,0]],"metadata":{"name":"tiny"}}"#;
        let s = Scenario::from_json(text).unwrap();
        assert_eq!(s.surface.frontier(1).value_at(0.0), Some(1.0));
        let again = Scenario::from_json(&s.to_json().unwrap()).unwrap();
        assert_eq!(s, again);
    }

    #[test]
    fn parse_error_reports_position() {
        let err = Scenario::from_json("{\"types\": [1,\n 2,]}").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 2"), "{msg}");
    }

    #[test]
    fn rejects_bad_weights_and_grids() {
        let bad_weights = THREE_TYPES.replace("0.33333333333333337", "0.5");
        assert!(Scenario::from_json(&bad_weights).is_err());
        let bad_grid = THREE_TYPES.replace(r#"{"min": 0, "max": 2, "steps": 10}"#, "[0, 1, 1]");
        assert!(Scenario::from_json(&bad_grid).is_err());
    }

    #[test]
    fn built_scenarios_serialize_by_frontier_kind() {
        let s = Scenario::from_json(THREE_TYPES).unwrap();
        let rebuilt = Scenario::new(s.chain.clone(), s.surface.clone(), s.u_grid.clone()).unwrap();
        let file = rebuilt.to_file().unwrap();
        assert!(matches!(file.surface, SurfaceSpec::Quadratic { .. }));
        assert!(matches!(file.u_grid, GridSpec::Levels(_)));
    }
}
