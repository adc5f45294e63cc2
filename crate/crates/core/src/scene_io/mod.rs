//! File formats, scene generators, SVG plots and the timing benchmark.
//!
//! Every file is canonical JSON: object keys sorted, no whitespace, floats
//! written with 17 significant digits so that loading a saved value gives
//! it back bit for bit.

mod bench;
mod generate;
mod plot;

use std::fmt::Write as _;
use std::path::Path;

use serde::{de::DeserializeOwned, Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{PlanError, Result};
use crate::geometry::{AxisBox, BoxSet};
use crate::linegraph::LineGraph;
use crate::smooth::{PiecewiseBezierPath, SafetyMapTimes};

pub use bench::{bench, feasible_grid, grid_query, BenchRow};
pub use generate::{gen_grid, gen_village, running_example, RunningExample, Village, VillageParams};
pub use plot::{plot_svg, PlotOptions};

pub const FORMAT_VERSION: u32 = 1;

/// Continuity tolerance enforced when loading a path.
pub const CONTINUITY_TOL: f64 = 1e-7;

/// Writes `value` as canonical JSON.
pub fn to_canonical_json<T: Serialize>(value: &T) -> Result<String> {
    let value = serde_json::to_value(value)?;
    let mut out = String::new();
    write_value(&value, &mut out)?;
    Ok(out)
}

fn write_value(value: &Value, out: &mut String) -> Result<()> {
    match value {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if n.is_f64() {
                let x = n.as_f64().unwrap();
                if !x.is_finite() {
                    return Err(PlanError::Format(format!("non-finite number {x}")));
                }
                write!(out, "{x:.16e}").unwrap();
            } else {
                write!(out, "{n}").unwrap();
            }
        }
        Value::String(s) => out.push_str(&serde_json::to_string(s)?),
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_value(item, out)?;
            }
            out.push(']');
        }
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, key) in keys.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&serde_json::to_string(key)?);
                out.push(':');
                write_value(&map[key], out)?;
            }
            out.push('}');
        }
    }
    Ok(())
}

fn from_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    Ok(serde_json::from_str(text)?)
}

fn check_version(kind: &str, version: u32) -> Result<()> {
    if version != FORMAT_VERSION {
        return Err(PlanError::Format(format!(
            "{kind} version {version} is not supported (expected {FORMAT_VERSION})"
        )));
    }
    Ok(())
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    let mut text = text.to_owned();
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// A safe set on disk: `lower[k]` and `upper[k]` bound box `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneFile {
    pub version: u32,
    pub dim: usize,
    pub lower: Vec<Vec<f64>>,
    pub upper: Vec<Vec<f64>>,
}

impl SceneFile {
    pub fn from_box_set(set: &BoxSet) -> Self {
        Self {
            version: FORMAT_VERSION,
            dim: set.dim(),
            lower: set.boxes().iter().map(|b| b.lower().to_vec()).collect(),
            upper: set.boxes().iter().map(|b| b.upper().to_vec()).collect(),
        }
    }

    pub fn from_boxes(boxes: &[AxisBox]) -> Result<Self> {
        Ok(Self::from_box_set(&BoxSet::new(boxes.to_vec())?))
    }

    pub fn num_boxes(&self) -> usize {
        self.lower.len()
    }

    pub fn validate(&self) -> Result<()> {
        check_version("scene", self.version)?;
        if self.lower.len() != self.upper.len() {
            return Err(PlanError::Format(format!(
                "{} lower bounds but {} upper bounds",
                self.lower.len(),
                self.upper.len()
            )));
        }
        for row in self.lower.iter().chain(&self.upper) {
            if row.len() != self.dim {
                return Err(PlanError::DimensionMismatch {
                    expected: self.dim,
                    got: row.len(),
                });
            }
        }
        self.to_box_set().map(|_| ())
    }

    pub fn to_box_set(&self) -> Result<BoxSet> {
        if self.lower.is_empty() {
            return Err(PlanError::Format("scene has no boxes".into()));
        }
        BoxSet::from_bounds(&self.lower, &self.upper)
    }

    pub fn to_json(&self) -> Result<String> {
        to_canonical_json(self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let scene: Self = from_json(text)?;
        scene.validate()?;
        Ok(scene)
    }

    /// SHA-256 of the canonical JSON, hex encoded.
    pub fn content_hash(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(self.to_json()?.as_bytes())))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_file(path, &self.to_json()?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// One Bézier piece of a saved path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSegment {
    #[serde(rename = "box")]
    pub box_index: usize,
    pub duration: f64,
    pub control_points: Vec<Vec<f64>>,
}

/// A smooth path on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathFile {
    pub version: u32,
    pub dim: usize,
    /// Number of continuous derivatives.
    pub derivatives: usize,
    pub degree: usize,
    pub duration: f64,
    pub segments: Vec<PathSegment>,
}

impl PathFile {
    pub fn new(path: &PiecewiseBezierPath, times: &SafetyMapTimes) -> Result<Self> {
        if times.boxes != path.boxes() {
            return Err(PlanError::InvalidInput("times and path cover different boxes".into()));
        }
        Ok(Self {
            version: FORMAT_VERSION,
            dim: path.dim(),
            derivatives: path.derivatives(),
            degree: path.degree(),
            duration: times.total(),
            segments: path
                .pieces()
                .iter()
                .zip(&times.durations)
                .zip(path.boxes())
                .map(|((piece, &duration), &box_index)| PathSegment {
                    box_index,
                    duration,
                    control_points: piece.points().to_vec(),
                })
                .collect(),
        })
    }

    pub fn to_path(&self) -> Result<PiecewiseBezierPath> {
        let durations: Vec<f64> = self.segments.iter().map(|s| s.duration).collect();
        PiecewiseBezierPath::new(
            self.segments.iter().map(|s| s.box_index).collect(),
            &durations,
            self.segments.iter().map(|s| s.control_points.clone()).collect(),
            self.derivatives,
        )
    }

    /// Checks the format and the path invariants that need no scene.
    pub fn validate(&self) -> Result<()> {
        check_version("path", self.version)?;
        if self.segments.is_empty() {
            return Err(PlanError::Format("path has no segments".into()));
        }
        if !(self.duration > 0.0) {
            return Err(PlanError::Format(format!("duration {} is not positive", self.duration)));
        }
        for (j, s) in self.segments.iter().enumerate() {
            if !(s.duration > 0.0 && s.duration.is_finite()) {
                return Err(PlanError::Format(format!("segment {j} has duration {}", s.duration)));
            }
            if s.control_points.len() != self.degree + 1 {
                return Err(PlanError::Format(format!(
                    "segment {j} has {} control points, expected {}",
                    s.control_points.len(),
                    self.degree + 1
                )));
            }
            if let Some(p) = s.control_points.iter().find(|p| p.len() != self.dim) {
                return Err(PlanError::DimensionMismatch {
                    expected: self.dim,
                    got: p.len(),
                });
            }
        }
        let total: f64 = self.segments.iter().map(|s| s.duration).sum();
        if (total - self.duration).abs() > 1e-9 * self.duration {
            return Err(PlanError::Format(format!(
                "segment durations sum to {total}, expected {}",
                self.duration
            )));
        }
        let error = self.to_path()?.continuity_error()?;
        if error > CONTINUITY_TOL {
            return Err(PlanError::Format(format!("path is discontinuous (error {error:e})")));
        }
        Ok(())
    }

    /// Checks that every control point lies in its segment's box.
    pub fn validate_against(&self, set: &BoxSet, tol: f64) -> Result<()> {
        if set.dim() != self.dim {
            return Err(PlanError::DimensionMismatch {
                expected: set.dim(),
                got: self.dim,
            });
        }
        for (j, s) in self.segments.iter().enumerate() {
            if s.box_index >= set.len() {
                return Err(PlanError::Format(format!("segment {j} refers to missing box {}", s.box_index)));
            }
            let b = set.get(s.box_index);
            if s.control_points.iter().any(|p| b.violation(p) > tol) {
                return Err(PlanError::Format(format!("segment {j} leaves box {}", s.box_index)));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        to_canonical_json(self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let path: Self = from_json(text)?;
        path.validate()?;
        Ok(path)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_file(path, &self.to_json()?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// The offline line graph on disk, tied to its scene by content hash.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocCache {
    pub version: u32,
    pub scene_hash: String,
    pub num_boxes: usize,
    /// Intersecting box pairs, one per line-graph vertex.
    pub vertices: Vec<(usize, usize)>,
    pub rep_points: Vec<Vec<f64>>,
    pub edges: Vec<(usize, usize)>,
    pub weights: Vec<f64>,
}

impl PreprocCache {
    pub fn new(scene: &SceneFile, graph: &LineGraph) -> Result<Self> {
        Ok(Self {
            version: FORMAT_VERSION,
            scene_hash: scene.content_hash()?,
            num_boxes: graph.num_boxes(),
            vertices: graph.vertices().iter().map(|p| (p.first, p.second)).collect(),
            rep_points: graph.rep_points().to_vec(),
            edges: graph.edges().to_vec(),
            weights: graph.weights().to_vec(),
        })
    }

    /// Rebuilds the graph for `scene`, rejecting a cache made for another
    /// scene or one whose contents disagree with the scene.
    pub fn to_graph(&self, scene: &SceneFile) -> Result<LineGraph> {
        let hash = scene.content_hash()?;
        if hash != self.scene_hash {
            return Err(PlanError::StaleCache {
                expected: hash,
                found: self.scene_hash.clone(),
            });
        }
        let set = scene.to_box_set()?;
        let pairs = set.enumerate_intersections();
        let listed: Vec<(usize, usize)> = pairs.iter().map(|p| (p.first, p.second)).collect();
        if listed != self.vertices || self.num_boxes != set.len() {
            return Err(PlanError::Format("cache vertices do not match the scene".into()));
        }
        if self.rep_points.len() != pairs.len() {
            return Err(PlanError::Format("one representative point per vertex expected".into()));
        }
        for (p, x) in pairs.iter().zip(&self.rep_points) {
            if x.len() != set.dim() || p.overlap.violation(x) > 1e-9 {
                return Err(PlanError::Format(format!(
                    "representative point of pair ({}, {}) is outside its overlap",
                    p.first, p.second
                )));
            }
        }
        let graph = LineGraph::from_parts(set.len(), pairs, self.rep_points.clone());
        if graph.edges() != self.edges.as_slice() || graph.weights() != self.weights.as_slice() {
            return Err(PlanError::Format("cache edges do not match the scene".into()));
        }
        Ok(graph)
    }

    pub fn validate(&self) -> Result<()> {
        check_version("cache", self.version)?;
        if self.edges.len() != self.weights.len() {
            return Err(PlanError::Format("one weight per edge expected".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        to_canonical_json(self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cache: Self = from_json(text)?;
        cache.validate()?;
        Ok(cache)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_file(path, &self.to_json()?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_floats_round_trip() {
        let values = vec![0.1, -0.0, 1e-300, 123456.789, f64::MAX, f64::MIN_POSITIVE, 2.0 / 3.0, 5e-324];
        let text = to_canonical_json(&values).unwrap();
        let back: Vec<f64> = serde_json::from_str(&text).unwrap();
        for (a, b) in values.iter().zip(&back) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        let text = to_canonical_json(&vec![f64::NAN]).unwrap();
        assert!(serde_json::from_str::<Vec<f64>>(&text).is_err());
    }

    #[test]
    fn keys_are_sorted() {
        let scene = SceneFile {
            version: 1,
            dim: 1,
            lower: vec![vec![0.0]],
            upper: vec![vec![1.0]],
        };
        let text = scene.to_json().unwrap();
        assert!(text.starts_with("{\"dim\":1,\"lower\""), "{text}");
        assert_eq!(SceneFile::from_json(&text).unwrap(), scene);
    }

    #[test]
    fn scene_validation() {
        let bad = r#"{"dim":2,"lower":[[0,0]],"upper":[[1]],"version":1}"#;
        assert!(SceneFile::from_json(bad).is_err());
        let inverted = r#"{"dim":1,"lower":[[2]],"upper":[[1]],"version":1}"#;
        assert!(SceneFile::from_json(inverted).is_err());
        let future = r#"{"dim":1,"lower":[[0]],"upper":[[1]],"version":9}"#;
        assert!(SceneFile::from_json(future).is_err());
    }
}
