//! Error types shared across the engine.

use num_rational::BigRational;
use thiserror::Error;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum EngineError {
    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("operands live on different intervals")]
    DomainMismatch,

    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("function is identically zero on cell {0}; no a.e. inverse")]
    IdenticallyZeroOnCell(usize),

    #[error("matrix is not an idempotent")]
    NotIdempotent,

    #[error("matrix has an unbounded entry; not in the bounded algebra")]
    UnboundedInput,

    #[error("pivot lower bound fails on cell {cell}: |P(1,1)| < {threshold} somewhere")]
    PivotTooSmall { cell: usize, threshold: BigRational },

    #[error("candidate does not commute with the operator (index {0})")]
    NotCommuting(usize),

    #[error("frame candidates {0} and {1} do not annihilate on cell {2}")]
    NotAnnihilating(usize, usize, usize),

    #[error("frame candidates do not sum to the identity")]
    SumNotIdentity,

    #[error("frame element {0} is not minimal; a proper commuting sub-idempotent exists")]
    NotMinimal(usize),

    #[error("matrix is not invertible over the field on cell {0}")]
    SingularMatrix(usize),

    #[error(
        "characteristic polynomial does not split over the piecewise-rational field on cell {cell}; irreducible factor: {factor}"
    )]
    SpectrumNotSplit { cell: usize, factor: String },

    #[error("diagonal entries collide on a positive-measure set (rows {0}, {1})")]
    DiagonalCollision(usize, usize),

    #[error("shear entry has a non-cancelling pole; block cannot be split boundedly")]
    UnboundedShear,

    #[error("idempotent is not in the commutant of the operator")]
    NotInCommutant,

    #[error("generator set is not maximal; a commuting idempotent lies outside its algebra")]
    NotMaximal,

    #[error("operator has no canonical form available for this operation")]
    NoCanonicalForm,

    #[error("eigenvalue cluster gap below threshold at sample; skipped")]
    ClusterAmbiguous,

    #[error("required structure point is not rational; unsupported by the exact engine: {0}")]
    IrrationalStructurePoint(String),

    #[error("internal invariant violated: {0}")]
    Internal(String),
}
