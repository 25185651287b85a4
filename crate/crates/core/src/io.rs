//! Reading spaces and measures from disk.
//!
//! Spaces: a CSV distance matrix (`n` rows of `n` reals), a JSON matrix
//! `{"n", "dist"}`, or a JSON graph `{"n", "edges": [[i, j, length], ...]}`.
//! Measures: `{"atoms": [{"index", "weight"}]}` on the base space or
//! `{"atoms": [{"base", "radius", "weight"}]}` on the cone.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{ConeMeasure, WeightedMeasure};
use crate::metric::{shortest_path_metric, validate_metric, ConePoint, FiniteMetricSpace};

/// A space as read, before metric validation.
#[derive(Debug, Clone, PartialEq)]
pub enum SpaceInput {
    Matrix(Vec<Vec<f64>>),
    Graph { n: usize, edges: Vec<(usize, usize, f64)> },
}

#[derive(Deserialize)]
#[serde(untagged)]
enum SpaceJson {
    Graph { n: usize, edges: Vec<(usize, usize, f64)> },
    Matrix { n: usize, dist: Vec<Vec<f64>> },
}

#[derive(Serialize)]
struct MatrixJson<'a> {
    n: usize,
    dist: &'a [Vec<f64>],
}

impl SpaceInput {
    pub fn parse(text: &str) -> Result<Self> {
        if text.trim_start().starts_with('{') {
            Self::parse_json(text)
        } else {
            parse_csv_matrix(text).map(SpaceInput::Matrix)
        }
    }

    fn parse_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(json_parse_error)?;
        let parsed: SpaceJson = serde_json::from_value(value)
            .map_err(|e| Error::Parse(format!("expected {{\"n\", \"dist\"}} or {{\"n\", \"edges\"}}: {e}")))?;
        match parsed {
            SpaceJson::Graph { n, edges } => Ok(SpaceInput::Graph { n, edges }),
            SpaceJson::Matrix { n, dist } => {
                if dist.len() != n {
                    return Err(Error::Parse(format!("\"n\" is {n} but \"dist\" has {} rows", dist.len())));
                }
                Ok(SpaceInput::Matrix(dist))
            }
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Validates the matrix, or computes the shortest-path metric of the graph.
    pub fn into_space(self, tol: f64) -> Result<FiniteMetricSpace> {
        match self {
            SpaceInput::Matrix(d) => validate_metric(&d, tol),
            SpaceInput::Graph { n, edges } => shortest_path_metric(&edges, n),
        }
    }
}

fn json_parse_error(e: serde_json::Error) -> Error {
    Error::Parse(format!("line {}, column {}: {e}", e.line(), e.column()))
}

fn parse_csv_matrix(text: &str) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse(e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.iter().all(str::is_empty) {
            continue;
        }
        let row = record
            .iter()
            .enumerate()
            .map(|(c, field)| {
                field.parse::<f64>().map_err(|_| {
                    Error::Parse(format!("line {line}, column {}: not a number: {field:?}", c + 1))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse("no rows".into()));
    }
    Ok(rows)
}

/// JSON matrix form `{"n", "dist"}` of a space.
pub fn space_to_json(space: &FiniteMetricSpace) -> Result<String> {
    let rows = space.to_rows();
    Ok(serde_json::to_string(&MatrixJson { n: rows.len(), dist: &rows })?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomJson {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub index: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureJson {
    pub atoms: Vec<AtomJson>,
}

impl MeasureJson {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(json_parse_error)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// The measure on `X`. Cone atoms are accepted only at radius 1.
    pub fn base_measure(&self) -> Result<WeightedMeasure> {
        let atoms = self
            .atoms
            .iter()
            .enumerate()
            .map(|(k, a)| {
                let index = a.index.or(a.base).ok_or_else(|| Error::Parse(format!("atom {k}: missing \"index\"")))?;
                if let Some(r) = a.radius {
                    if r != 1.0 {
                        return Err(Error::Parse(format!("atom {k}: base measures need radius 1, found {r}")));
                    }
                }
                Ok((index, a.weight))
            })
            .collect::<Result<Vec<_>>>()?;
        WeightedMeasure::normalized(atoms)
    }

    /// The measure on `Cone(X)`. Atoms without a radius sit at radius 1;
    /// radius 0 or a missing base is the cone point.
    pub fn cone_measure(&self, space: Arc<FiniteMetricSpace>) -> Result<ConeMeasure> {
        let atoms = self
            .atoms
            .iter()
            .map(|a| {
                let radius = a.radius.unwrap_or(1.0);
                let point = match a.base.or(a.index) {
                    Some(b) if radius != 0.0 => {
                        if b >= space.len() {
                            return Err(Error::InvalidArgument(format!("base point {b} out of range")));
                        }
                        ConePoint::new(b, radius)?
                    }
                    _ => ConePoint::apex(),
                };
                Ok((point, a.weight))
            })
            .collect::<Result<Vec<_>>>()?;
        ConeMeasure::from_atoms(space, atoms)
    }

    /// Whether the file carries cone coordinates.
    pub fn describes_cone(&self) -> bool {
        self.atoms.iter().any(|a| a.radius.is_some() || a.base.is_some())
    }

    pub fn from_base(mu: &WeightedMeasure) -> Self {
        Self {
            atoms: mu
                .atoms()
                .iter()
                .map(|a| AtomJson { index: Some(a.index), base: None, radius: None, weight: a.weight })
                .collect(),
        }
    }
}
