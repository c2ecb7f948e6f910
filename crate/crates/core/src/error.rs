//! Error type shared across the crate.
//!
//! Numerical routines distinguish "the input is malformed" (dimension
//! mismatches, invalid partition tuples) from "the geometry rejected the
//! input" (immersion not Lagrangian, lift off the quadric, normal-form
//! pattern violated) from "the computation degenerated" (singular Gram
//! matrix, profile integration left its chart). Callers that certify
//! submanifolds route the second and third kinds into reports; the first
//! kind is a caller bug.

use thiserror::Error;

/// Everything that can go wrong while building or certifying a submanifold.
#[derive(Debug, Error)]
pub enum GeomError {
    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    DimensionMismatch {
        expected: usize,
        got: usize,
        context: &'static str,
    },

    #[error("parameter point lies outside the chart domain")]
    OutsideDomain,

    #[error("immersion is degenerate at this point: Gram matrix of coordinate tangents is singular")]
    DegenerateImmersion,

    #[error("this ambient space requires lift charts into the ambient quadric")]
    RequiresLift,

    #[error("lift point violates the quadric constraints (residual {residual:.3e})")]
    OffQuadric { residual: f64 },

    #[error("tangent plane is not Lagrangian / horizontal (residual {residual:.3e})")]
    NotLagrangian { residual: f64 },

    #[error("cubic form violates the adapted normal-form pattern (residual {residual:.3e})")]
    NormalFormViolation { residual: f64 },

    #[error("mean curvature vanishes here; no adapted basis is distinguished")]
    MinimalPoint,

    #[error("invalid partition tuple: {reason}")]
    InvalidTuple { reason: String },

    #[error("theorem selector does not apply to this tuple: {reason}")]
    SelectorMismatch { reason: String },

    #[error("no building block of kind {kind:?} exists in dimension {dim}")]
    UnsupportedBlock { kind: String, dim: usize },

    #[error("building block failed its minimality/ideality certification and cannot be used")]
    BlockNotCertified,

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("field data is inconsistent: {0}")]
    InconsistentField(String),

    #[error("matrix is not positive definite where the metric requires it")]
    IndefiniteMetric,

    #[error("basis is not orthonormal (deviation {deviation:.3e})")]
    NotOrthonormal { deviation: f64 },

    #[error("numerical degeneracy: {0}")]
    Degenerate(String),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, GeomError>;
