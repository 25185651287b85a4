use std::fmt;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// One violated metric axiom, with the indices that witness it.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MetricViolation {
    NotSquare { rows: usize, row: usize, len: usize },
    NonFinite { i: usize, j: usize },
    Negative { i: usize, j: usize, value: f64 },
    NonzeroDiagonal { i: usize, value: f64 },
    Asymmetric { i: usize, j: usize, dij: f64, dji: f64 },
    ZeroOffDiagonal { i: usize, j: usize },
    Triangle { i: usize, j: usize, k: usize, dik: f64, dij: f64, djk: f64 },
}

impl fmt::Display for MetricViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricViolation::NotSquare { rows, row, len } => {
                write!(f, "row {row} has {len} entries, expected {rows}")
            }
            MetricViolation::NonFinite { i, j } => write!(f, "non-finite entry at ({i},{j})"),
            MetricViolation::Negative { i, j, value } => {
                write!(f, "negative entry {value} at ({i},{j})")
            }
            MetricViolation::NonzeroDiagonal { i, value } => {
                write!(f, "nonzero diagonal {value} at ({i},{i})")
            }
            MetricViolation::Asymmetric { i, j, dij, dji } => {
                write!(f, "asymmetric at ({i},{j}): {dij} != {dji}")
            }
            MetricViolation::ZeroOffDiagonal { i, j } => {
                write!(f, "distinct points {i} and {j} at distance 0")
            }
            MetricViolation::Triangle { i, j, k, dik, dij, djk } => write!(
                f,
                "triangle violation ({i},{j},{k}): {dik} > {dij} + {djk}"
            ),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid metric: {}", list(.0))]
    InvalidMetric(Vec<MetricViolation>),

    #[error("graph is disconnected: vertex {unreachable} not reachable from vertex {from}")]
    Disconnected { from: usize, unreachable: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("barycenter is not the cone point: defect {defect:.3e} at base point {witness}")]
    Inadmissible { defect: f64, witness: usize },

    #[error("measure must have at least two support points, found {0}")]
    SingleAtom(usize),

    #[error("all mass sits at the cone point")]
    AllMassAtConePoint,

    #[error("factor {factor}: marginal barycenter is not the cone point (defect {defect:.3e})")]
    MarginalBarycenter { factor: usize, defect: f64 },

    #[error("problem too large for the oracle: {0} atoms (max 8)")]
    OracleTooLarge(usize),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn list(v: &[MetricViolation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}
