//! Numerical laboratory for delta-invariants of Lagrangian submanifolds
//! in complex space forms.
//!
//! The crate computes the Chen invariant delta(2, n-2) of an immersed
//! Lagrangian submanifold from chart data alone, checks it against the
//! sharp bound delta(2, n-2) <= n^2 (n-2) / (4(n-1)) H^2 + 2(n-2) c,
//! classifies points where the bound is attained, and constructs the
//! explicit ideal families in C^n, the positively curved and the
//! negatively curved complex space forms by integrating their profile
//! and warp-function equations. Every construction is certified by the
//! same residual pipeline that handles user-supplied charts.

pub mod ambient;
pub mod chart;
pub mod curvature;
pub mod delta;
pub mod error;
pub mod families;
pub mod ideal;
pub mod interp;
pub mod jets;
pub mod rng;
pub mod shape;
pub mod testing;

pub use ambient::{AmbientKind, AmbientSpace, AmbientVector};
pub use chart::ImmersionChart;
pub use curvature::{
    codazzi_residual, curvature_from_gauss, riemann_fd, tau_full, tau_subspace,
    CurvatureOperator, CurvatureSource,
};
pub use delta::{
    delta_invariant, ideality_residual, inequality_rhs, DeltaOpts, DeltaResult, IdealityCheck,
    PartitionTuple, TheoremKind,
};
pub use error::{GeomError, Result};
pub use ideal::{
    adapted_basis, classify_case, k_tensor, AdaptedFrame, CaseClassification, CaseVerdict,
    ClassifyOpts,
};
pub use jets::{evaluate_jet, orthonormal_frame, FdSteps, Jet3, TangentFrame};
pub use shape::{
    extract_adapted, induced_metric, lagrangian_residual, second_fundamental_form,
    AdaptedCoefficients, CubicTensor,
};
