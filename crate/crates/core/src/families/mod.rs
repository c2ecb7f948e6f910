//! Construction of the explicit ideal families.
//!
//! The classification splits non-minimal ideal points into two shapes, and
//! each shape comes with an explicit family in every ambient model:
//!
//!   * tube type (case II): a profile circle warped over a minimal ideal
//!     block of dimension n - 1, driven by the planar profile systems in
//!     [`profile`] and assembled by [`case2`];
//!   * warped-product type (case III): a twisted product of a curve, a
//!     circle factor, and a minimal block of dimension n - 2, driven by the
//!     warp field PDE in [`warp`], its companion linear systems in
//!     [`companions`], and assembled by [`case3`].
//!
//! Blocks themselves are built and numerically certified in [`blocks`].
//! Every constructor here returns an ordinary [`crate::chart::ImmersionChart`],
//! so the downstream jet, curvature, invariant, and classification machinery
//! treats constructed families exactly like user-supplied charts.

pub mod blocks;
pub mod case2;
pub mod case3;
pub mod companions;
pub mod profile;
pub mod quad;
pub mod warp;
