use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrix sample at node {node} is out of bounds: {reason}")]
    MaterialBounds { node: usize, reason: String },

    #[error("conjugate gradient did not converge after {iterations} iterations (relative residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("right-hand side is incompatible with the constant kernel (mean defect {defect:e})")]
    IncompatibleRhs { defect: f64 },

    #[error("A0 asymmetry defect {0:e} exceeds tolerance")]
    AsymmetricA0(f64),

    #[error("line search collapsed at iteration {iterations} (gradient residual {residual:e})")]
    StepCollapse { iterations: usize, residual: f64, last: Box<crate::field::ComplexField> },

    #[error("minimizer did not reach tolerance after {iterations} iterations (gradient residual {residual:e})")]
    MaxIterations { iterations: usize, residual: f64, last: Box<crate::field::ComplexField> },

    #[error("epsilon {epsilon} is under-resolved on spacing {h} (need epsilon >= {floor})")]
    UnderResolved { epsilon: f64, h: f64, floor: f64 },

    #[error("no epsilon candidate satisfied the potential bound {bound}: measured {measured:?}")]
    NoEpsilonCandidate { bound: f64, measured: Vec<(f64, f64)> },

    #[error("bad set touches the domain boundary")]
    BadSetOnBoundary,

    #[error("modulus {modulus} below {floor} on the winding loop")]
    LoopModulus { modulus: f64, floor: f64 },

    #[error("winding defect {defect} exceeds 0.05 (raw winding {raw})")]
    WindingDefect { raw: f64, defect: f64 },

    #[error("annulus overlaps a bad disk (modulus {0} < 1/2)")]
    AnnulusOverlap(f64),

    #[error("bound violated: {0}")]
    BoundViolated(String),

    #[error("empty set J: theory violation")]
    EmptyJ,

    #[error("seam mismatch {0:e} in competitor lift")]
    SeamMismatch(f64),

    #[error("delta {delta} leaves no unfolding cell inside the domain")]
    DeltaTooLarge { delta: f64 },

    #[error("exclusion disks leave no test bump inside the domain")]
    NoTestBumps,

    #[error("malformed field file: {0}")]
    Malformed(String),

    #[error("dimension mismatch: expected {expected} values, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("grid of {nodes} nodes exceeds the budget of {limit}")]
    GridBudget { nodes: usize, limit: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}
