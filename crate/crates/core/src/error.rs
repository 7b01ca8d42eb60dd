//! Error type shared across the crate.
//!
//! Every variant names the precondition that was violated and carries the
//! offending node index or parameter value, so callers can report failures
//! without re-deriving context.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid must have at least {min} nodes, got {n}")]
    GridTooSmall { n: usize, min: usize },

    #[error("grid length must be finite and positive, got {length}")]
    BadGridLength { length: f64 },

    #[error("fields live on different grids ({left} vs {right})")]
    GridMismatch { left: String, right: String },

    #[error("field value at node {node} is not finite ({value})")]
    NonFiniteValue { node: usize, value: f64 },

    #[error("operation requires a periodic grid")]
    PeriodicRequired,

    #[error("constraint `{constraint}`: rho at node {node} is outside the admissible domain ({value})")]
    DomainViolation {
        constraint: String,
        node: usize,
        value: f64,
    },

    #[error("constraint `{constraint}`: scaled constraint density at node {node} leaves the range of f ({value})")]
    RangeViolation {
        constraint: String,
        node: usize,
        value: f64,
    },

    #[error("constraint `{constraint}`: integral of f(rho) is zero; extension scale undefined")]
    ZeroDenominator { constraint: String },

    #[error("constraint target K must be finite and nonzero, got {value}")]
    ZeroK { value: f64 },

    #[error("constraint target {value} is outside the attainable range ({lo}, {hi}) of integral f(rho)")]
    UnattainableK { value: f64, lo: f64, hi: f64 },

    #[error("field is off the constraint set: conserved integral {actual} vs target {expected} (|diff| {diff:.3e} exceeds tolerance {tol:.3e})")]
    ConstraintMismatch {
        expected: f64,
        actual: f64,
        diff: f64,
        tol: f64,
    },

    #[error("constraint `{constraint}`: f' vanishes at node {node}; division by f' undefined")]
    ZeroFPrime { constraint: String, node: usize },

    #[error("weight field q has zero integral; normalization u = q / integral(q) undefined")]
    ZeroQIntegral,

    #[error("point weight index {index} is out of bounds for a grid with {n} nodes")]
    PointOutOfBounds { index: usize, n: usize },

    #[error("field has zero integral; shape rho / integral(rho) undefined")]
    ZeroNorm,

    #[error("functional `{label}`: {reason}")]
    Evaluation { label: String, reason: String },

    #[error("deformed path left the admissible domain at eps = {eps}: {source}")]
    PathDomainViolation {
        eps: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("directional estimates did not converge: successive estimates differ by {diff:.3e} (tolerance {tol:.3e})")]
    NotConverged { diff: f64, tol: f64 },

    #[error("eps schedule must contain at least two positive, strictly decreasing steps")]
    BadEpsSchedule,

    #[error("flow step size must be positive and finite, got {eta}")]
    BadStepSize { eta: f64 },

    #[error("cannot parse profile `{spec}`: {reason}")]
    BadProfile { spec: String, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;
