//! Building blocks for the tube and warped-product families.
//!
//! Each explicit family wraps a lower-dimensional minimal Lagrangian piece:
//! a horizontal (Legendrian) immersion into S^(2d+1) or H_1^(2d+1), or a
//! Lagrangian immersion into flat C^d.  The families need these blocks to be
//! minimal, and the tube constructions additionally need them ideal for the
//! single-part invariant delta(d-1).
//!
//! Rather than trusting the catalog, `builtin_block` certifies every block
//! numerically at construction: it samples interior points, measures the
//! squared mean curvature and the delta(d-1) ideality residual, and stores
//! the verdict.  The Clifford torus is included as a deliberate negative
//! control: it is minimal but not ideal, so family builders must reject it.

use crate::ambient::{AmbientKind, AmbientSpace, AmbientVector};
use crate::chart::ImmersionChart;
use crate::curvature::curvature_from_gauss;
use crate::delta::{ideality_residual, DeltaOpts, PartitionTuple, TheoremKind, IDEAL_TOL};
use crate::error::{GeomError, Result};
use crate::jets::{evaluate_jet, orthonormal_frame, FdSteps};
use crate::shape::second_fundamental_form;

/// Catalog of built-in block constructions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BlockKind {
    /// Totally geodesic Legendrian sphere S^d in S^(2d+1).
    GeodesicSphere,
    /// Totally geodesic Legendrian hyperbolic space H^d in H_1^(2d+1).
    GeodesicHyperbolic,
    /// Flat Lagrangian subspace R^d in C^d.
    FlatSubspace,
    /// Minimal Legendrian Clifford torus in S^(2d+1); minimal but not
    /// ideal, kept as a negative control.
    CliffordTorus,
}

impl BlockKind {
    pub fn name(self) -> &'static str {
        match self {
            BlockKind::GeodesicSphere => "geodesic-sphere",
            BlockKind::GeodesicHyperbolic => "geodesic-hyperbolic",
            BlockKind::FlatSubspace => "flat-subspace",
            BlockKind::CliffordTorus => "clifford-torus",
        }
    }

    pub fn from_name(name: &str) -> Option<BlockKind> {
        match name {
            "geodesic-sphere" => Some(BlockKind::GeodesicSphere),
            "geodesic-hyperbolic" => Some(BlockKind::GeodesicHyperbolic),
            "flat-subspace" => Some(BlockKind::FlatSubspace),
            "clifford-torus" => Some(BlockKind::CliffordTorus),
            _ => None,
        }
    }

    /// Ambient model the block immerses into.
    pub fn ambient(self) -> AmbientKind {
        match self {
            BlockKind::GeodesicSphere | BlockKind::CliffordTorus => AmbientKind::SphereLift,
            BlockKind::GeodesicHyperbolic => AmbientKind::AdsLift,
            BlockKind::FlatSubspace => AmbientKind::Flat,
        }
    }

    /// All catalog entries, for listings.
    pub fn all() -> [BlockKind; 4] {
        [
            BlockKind::GeodesicSphere,
            BlockKind::GeodesicHyperbolic,
            BlockKind::FlatSubspace,
            BlockKind::CliffordTorus,
        ]
    }
}

/// Numerical certificate attached to a block at construction.
#[derive(Debug, Clone)]
pub struct BlockCertification {
    /// Largest sampled squared mean curvature.
    pub h2_max: f64,
    /// Largest sampled |rhs - delta(d-1)| magnitude.
    pub ideality_worst: f64,
    pub minimal: bool,
    pub ideal: bool,
    /// Points sampled for the certificate.
    pub points: usize,
}

/// A certified block: chart plus measured minimality and ideality.
#[derive(Clone)]
pub struct BuildingBlock {
    pub kind: BlockKind,
    pub dim: usize,
    pub chart: ImmersionChart,
    pub certification: BlockCertification,
}

impl std::fmt::Debug for BuildingBlock {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BuildingBlock")
            .field("kind", &self.kind)
            .field("dim", &self.dim)
            .field("certification", &self.certification)
            .finish()
    }
}

impl BuildingBlock {
    /// Whether the block passed both the minimality and ideality checks.
    pub fn certified_minimal_ideal(&self) -> bool {
        self.certification.minimal && self.certification.ideal
    }

    /// Whether the block passed the minimality check alone.
    pub fn certified_minimal(&self) -> bool {
        self.certification.minimal
    }
}

const H2_MINIMAL_TOL: f64 = 1e-8;
const CERT_POINTS: usize = 5;
const CERT_SEED: u64 = 0xb10c;

/// Spherical coordinates on S^d in R^(d+1): angles map to a point with
/// x_1 = cos(u_1), x_(k+1) = sin(u_1)..sin(u_k) cos(u_(k+1)), and the last
/// coordinate the full sine product.
fn unit_sphere_point(angles: &[f64]) -> Vec<f64> {
    let d = angles.len();
    let mut out = vec![0.0; d + 1];
    let mut sines = 1.0;
    for (k, &a) in angles.iter().enumerate() {
        out[k] = sines * a.cos();
        sines *= a.sin();
    }
    out[d] = sines;
    out
}

fn sphere_chart(dim: usize) -> ImmersionChart {
    let space = AmbientSpace::sphere_lift(dim);
    let domain = vec![(0.4, 2.6); dim];
    ImmersionChart::new(space, domain, format!("geodesic-sphere-{dim}"), move |u| {
        let x = unit_sphere_point(u);
        let mut v = AmbientVector::zeros(2 * (dim + 1));
        for (k, &xk) in x.iter().enumerate() {
            v[2 * k] = xk;
        }
        Ok(v)
    })
}

fn hyperbolic_chart(dim: usize) -> ImmersionChart {
    let space = AmbientSpace::ads_lift(dim);
    let mut domain = vec![(0.2, 1.5)];
    domain.extend(vec![(0.4, 2.6); dim - 1]);
    ImmersionChart::new(space, domain, format!("geodesic-hyperbolic-{dim}"), move |u| {
        let r = u[0];
        let omega = unit_sphere_point(&u[1..]);
        let mut v = AmbientVector::zeros(2 * (dim + 1));
        v[0] = r.cosh();
        for (k, &w) in omega.iter().enumerate() {
            v[2 * (k + 1)] = r.sinh() * w;
        }
        Ok(v)
    })
}

fn flat_chart(dim: usize) -> ImmersionChart {
    let space = AmbientSpace::flat(dim);
    let domain = vec![(-1.0, 1.0); dim];
    ImmersionChart::new(space, domain, format!("flat-subspace-{dim}"), move |u| {
        let mut v = AmbientVector::zeros(2 * dim);
        for (k, &uk) in u.iter().enumerate() {
            v[2 * k] = uk;
        }
        Ok(v)
    })
}

fn torus_chart(dim: usize) -> ImmersionChart {
    let space = AmbientSpace::sphere_lift(dim);
    let domain = vec![(-3.0, 3.0); dim];
    let scale = 1.0 / ((dim + 1) as f64).sqrt();
    ImmersionChart::new(space, domain, format!("clifford-torus-{dim}"), move |u| {
        let mut v = AmbientVector::zeros(2 * (dim + 1));
        let mut sum = 0.0;
        for (k, &uk) in u.iter().enumerate() {
            v[2 * k] = scale * uk.cos();
            v[2 * k + 1] = scale * uk.sin();
            sum += uk;
        }
        v[2 * dim] = scale * sum.cos();
        v[2 * dim + 1] = -scale * sum.sin();
        Ok(v)
    })
}

/// Sample the block and measure minimality and delta(dim-1) ideality.
fn certify_block(chart: &ImmersionChart, dim: usize) -> Result<BlockCertification> {
    let space = chart.space.clone();
    let tuple = PartitionTuple::new(dim, vec![dim - 1])?;
    let opts = DeltaOpts { samples: 300, refine_top: 4, random_restarts: 3, ..DeltaOpts::default() };
    let steps = FdSteps::default();

    let mut h2_max = 0.0f64;
    let mut worst = 0.0f64;
    let points = chart.sample_points(CERT_POINTS, CERT_SEED, 0.06)?;
    for p in &points {
        let jet = evaluate_jet(chart, p, 2, steps)?;
        let frame = orthonormal_frame(&jet, &space)?;
        let cubic = second_fundamental_form(&jet, &space, &frame)?;
        h2_max = h2_max.max(cubic.h2);
        let curv = curvature_from_gauss(&cubic, space.c);
        let check =
            ideality_residual(&curv, &tuple, space.c, cubic.h2, TheoremKind::LagrangianStrict, &opts)?;
        worst = worst.max(check.residual.abs());
    }

    Ok(BlockCertification {
        h2_max,
        ideality_worst: worst,
        minimal: h2_max <= H2_MINIMAL_TOL,
        ideal: worst <= IDEAL_TOL,
        points: points.len(),
    })
}

/// Construct and certify a built-in block of the given dimension.
///
/// The `ambient` argument states the model the caller intends to immerse
/// into and must match the block's natural ambient; the mismatch error
/// catches wiring mistakes before any geometry runs.  Certification needs
/// delta(dim-1), so dim >= 3.
pub fn builtin_block(kind: BlockKind, dim: usize, ambient: AmbientKind) -> Result<BuildingBlock> {
    if ambient != kind.ambient() {
        return Err(GeomError::UnsupportedBlock { kind: kind.name().to_string(), dim });
    }
    if dim < 3 {
        return Err(GeomError::UnsupportedBlock { kind: kind.name().to_string(), dim });
    }
    let chart = match kind {
        BlockKind::GeodesicSphere => sphere_chart(dim),
        BlockKind::GeodesicHyperbolic => hyperbolic_chart(dim),
        BlockKind::FlatSubspace => flat_chart(dim),
        BlockKind::CliffordTorus => torus_chart(dim),
    };
    let certification = certify_block(&chart, dim)?;
    Ok(BuildingBlock { kind, dim, chart, certification })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geodesic_sphere_is_minimal_and_ideal() {
        let b = builtin_block(BlockKind::GeodesicSphere, 4, AmbientKind::SphereLift).unwrap();
        assert!(b.certification.minimal, "h2 = {:.3e}", b.certification.h2_max);
        assert!(b.certification.ideal, "residual = {:.3e}", b.certification.ideality_worst);
        assert!(b.certified_minimal_ideal());
    }

    #[test]
    fn geodesic_hyperbolic_is_minimal_and_ideal() {
        let b = builtin_block(BlockKind::GeodesicHyperbolic, 3, AmbientKind::AdsLift).unwrap();
        assert!(b.certification.minimal, "h2 = {:.3e}", b.certification.h2_max);
        assert!(b.certification.ideal, "residual = {:.3e}", b.certification.ideality_worst);
    }

    #[test]
    fn flat_subspace_is_minimal_and_ideal() {
        let b = builtin_block(BlockKind::FlatSubspace, 4, AmbientKind::Flat).unwrap();
        assert!(b.certified_minimal_ideal());
        assert!(b.certification.h2_max < 1e-12);
    }

    #[test]
    fn clifford_torus_is_minimal_but_not_ideal() {
        let b = builtin_block(BlockKind::CliffordTorus, 4, AmbientKind::SphereLift).unwrap();
        assert!(b.certification.minimal, "h2 = {:.3e}", b.certification.h2_max);
        assert!(!b.certification.ideal, "torus must fail ideality");
        // Flat torus: delta = 0 while the bound is dim - 1.
        assert!((b.certification.ideality_worst - 3.0).abs() < 1e-3);
        assert!(!b.certified_minimal_ideal());
    }

    #[test]
    fn ambient_mismatch_is_rejected() {
        assert!(builtin_block(BlockKind::GeodesicSphere, 4, AmbientKind::Flat).is_err());
        assert!(builtin_block(BlockKind::FlatSubspace, 2, AmbientKind::Flat).is_err());
    }
}
