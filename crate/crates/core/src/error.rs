use thiserror::Error;

use crate::surface::Hom;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimensions: {0}")]
    InvalidDimensions(String),

    #[error("weight of half-edge {half_edge} must be positive, got {weight}")]
    NonPositiveWeight { half_edge: usize, weight: f64 },

    #[error("weight table has {found} rows, expected {expected}")]
    WeightTable { expected: usize, found: usize },

    #[error("embedding is not faithful: {0}")]
    NotFaithful(String),

    #[error("segment {0} of the path has zero length")]
    ZeroLengthSegment(usize),

    #[error("segment {0} is not a multiple of pi/4 in direction")]
    OffLatticeSegment(usize),

    #[error("reference point lies on the path")]
    PointOnPath,

    #[error("vertex {0} is a wired boundary vertex")]
    BoundaryVertex(usize),

    #[error("vertex {0} has no outgoing edges")]
    IsolatedVertex(usize),

    #[error("loop-erased walk exceeded the step cap of {cap} steps")]
    StepCapExceeded { cap: u64 },

    #[error("cycle through vertex {vertex} is contractible")]
    ContractibleCycle { vertex: usize },

    #[error("cycle through vertex {vertex} has homology class {hom:?}; expected {expected:?}")]
    CycleClass { vertex: usize, hom: Hom, expected: String },

    #[error("internal consistency failure: {0}")]
    Inconsistent(String),

    #[error("not a perfect matching: {0}")]
    NotAPerfectMatching(String),

    #[error("faces {0} and {1} are not adjacent")]
    NotAdjacent(usize, usize),

    #[error("invalid face path: {0}")]
    InvalidPath(String),

    #[error("operation requires a torus")]
    RequiresTorus,

    #[error("height one-form is not closed: {0}")]
    NotClosed(String),

    #[error("solver did not converge after {iterations} iterations (relative residual {residual:e})")]
    SolverDidNotConverge { iterations: usize, residual: f64 },

    #[error("{what} has size {size}, above the cap of {cap}")]
    SizeCap { what: &'static str, size: usize, cap: usize },

    #[error("rejection sampler starved: acceptance rate {rate:e} after {proposals} proposals")]
    AcceptanceStarved { rate: f64, proposals: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
