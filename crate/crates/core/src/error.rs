use thiserror::Error;

use crate::lattice::Coord2;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension too small: {0}")]
    DimensionTooSmall(String),
    #[error("domain is not simply connected (Euler characteristic {0})")]
    NotSimplyConnected(i64),
    #[error("domain is not connected")]
    Disconnected,
    #[error("duplicate face {0}")]
    DuplicateFace(Coord2),
    #[error("{0} is not a face center")]
    NotAFace(Coord2),
    #[error("boundary does not form a single closed cycle")]
    BoundaryNotACycle,
    #[error("invalid cut: {0}")]
    InvalidCut(String),
    #[error("matrix is not symmetric (deviation {0:e})")]
    NotSymmetric(f64),
    #[error("matrix is not antisymmetric (deviation {0:e})")]
    NotAntisymmetric(f64),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("singular matrix: {0}")]
    Singular(String),
    #[error("eigen-pairing failure: {0}")]
    PairingFailure(String),
    #[error("missing value at edge {0}")]
    MissingValue(Coord2),
    #[error("edge {0} is not in the domain")]
    UnknownEdge(Coord2),
    #[error("edge {0} is too close to the boundary")]
    NearBoundary(Coord2),
    #[error("rank-deficient system: rank {rank} of {unknowns} unknowns")]
    RankDeficient { rank: usize, unknowns: usize },
    #[error("residual {residual:e} above tolerance {tol:e}")]
    Residual { residual: f64, tol: f64 },
    #[error("enumeration cap exceeded: {count} dual edges, cap {cap}")]
    CapExceeded { count: usize, cap: usize },
    #[error("invalid position: {0}")]
    InvalidPosition(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("walk failed: {0}")]
    WalkFailed(String),
    #[error("near-singular gluing operator (condition number {0:e})")]
    IllConditioned(f64),
    #[error("anticommutator not proportional to identity (deviation {0:e})")]
    NonClosure(f64),
    #[error("degenerate top eigenvalue (gap {0:e})")]
    DegenerateTop(f64),
}

pub type Result<T> = std::result::Result<T, Error>;
