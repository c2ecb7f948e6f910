//! Tube-type ideal family charts.
//!
//! These are the warped circle bundles over a minimal ideal block: a profile
//! curve (lambda, phi, theta) scales and phase-rotates a block immersion Phi
//! into the ambient model.  Writing e_t for the profile direction, the five
//! variants are
//!
//!   flat         L = e^(i theta) / (phi + i lambda) * Phi,
//!   projective   L = (e^(i theta) Phi, e^(i(n-2) theta) (i lambda - phi)) / sqrt(1 + lambda^2 + phi^2),
//!   hyp interior L = (e^(i theta) Phi, e^(i(n-2) theta) (i lambda - phi)) / sqrt(1 - lambda^2 - phi^2),
//!   hyp exterior L = (e^(i(n-2) theta) (i lambda - phi), e^(i theta) Phi) / sqrt(lambda^2 + phi^2 - 1),
//!   hyp circle   L = f e^(i theta) (a + i + I, Phi, a + I),
//!
//! where in the last line f = exp(int phi), I(t) = int e^(i(n-3)theta) / f^2,
//! a = W + (i/2) |Phi|^2, and W is the angle potential of the block (the
//! primitive of the closed form <Phi, J dPhi>).  The circle variant rides the
//! separatrix lambda^2 + phi^2 = 1 and needs the phase lock
//! lambda = cos((n-3) theta), phi = -sin((n-3) theta), which the quadric and
//! horizontality identities depend on.
//!
//! Block requirements: dimension n-1, minimal and delta(n-2)-ideal, living in
//! the sphere lift for the flat, projective and hyp-exterior variants, in the
//! indefinite lift for hyp-interior, and in flat C^(n-1) for the circle
//! variant.  An uncertified block is rejected outright.

use nalgebra::Complex;

use crate::ambient::{AmbientKind, AmbientSpace};
use crate::chart::ImmersionChart;
use crate::error::{GeomError, Result};
use crate::families::blocks::BuildingBlock;
use crate::families::profile::{ProfileKind, ProfileSolution};
use crate::families::quad::{gauss_legendre_01, line_potential};
use crate::interp::HermiteCurve;

type C64 = Complex<f64>;

/// Trim between the profile grid ends and the chart box, so that jet
/// stencils around any domain point stay on the grid.
const T_PAD: f64 = 0.03;
/// Tolerance for the circle variant's phase lock at the grid nodes.
const PHASE_LOCK_TOL: f64 = 1e-8;

/// Ambient model the case-2 chart of a given profile kind immerses into.
pub fn case2_ambient(kind: ProfileKind, n: usize) -> AmbientSpace {
    match kind {
        ProfileKind::CnII => AmbientSpace::flat(n),
        ProfileKind::CPnII => AmbientSpace::sphere_lift(n),
        ProfileKind::CHnIIa | ProfileKind::CHnIIb | ProfileKind::CHnIIc => {
            AmbientSpace::ads_lift(n)
        }
    }
}

/// Ambient model the block of a case-2 chart must live in.
pub fn case2_block_ambient(kind: ProfileKind) -> AmbientKind {
    match kind {
        ProfileKind::CnII | ProfileKind::CPnII | ProfileKind::CHnIIb => AmbientKind::SphereLift,
        ProfileKind::CHnIIa => AmbientKind::AdsLift,
        ProfileKind::CHnIIc => AmbientKind::Flat,
    }
}

fn check_block(profile: &ProfileSolution, block: &BuildingBlock) -> Result<()> {
    let n = profile.n;
    let want_kind = case2_block_ambient(profile.kind);
    if block.dim != n - 1
        || block.chart.space.kind != want_kind
        || block.chart.space.n != n - 1
    {
        return Err(GeomError::UnsupportedBlock { kind: block.kind.name().to_string(), dim: block.dim });
    }
    if !block.certified_minimal_ideal() {
        return Err(GeomError::BlockNotCertified);
    }
    Ok(())
}

fn padded_span(profile: &ProfileSolution) -> Result<(f64, f64)> {
    let lo = profile.t0 + T_PAD;
    let hi = profile.t_end() - T_PAD;
    if !(hi - lo > 0.1) {
        return Err(GeomError::Degenerate(format!(
            "profile grid [{}, {}] too short for a chart after padding",
            profile.t0,
            profile.t_end()
        )));
    }
    Ok((lo, hi))
}

/// Build the tube chart of a case-2 profile over a certified block.
///
/// Parameters are (t, u_2, ..., u_n): profile time first, then the block
/// coordinates.  The profile kind fixes both the ambient model and the
/// admissible block; mismatches and uncertified blocks are build errors, as
/// is a circle-variant profile whose phase lock is broken.
pub fn build_case2_chart(profile: &ProfileSolution, block: &BuildingBlock) -> Result<ImmersionChart> {
    check_block(profile, block)?;
    let n = profile.n;
    let kind = profile.kind;
    let curves = profile.curves()?;
    let (t_lo, t_hi) = padded_span(profile)?;

    let mut domain = vec![(t_lo, t_hi)];
    domain.extend(block.chart.domain.clone());
    let space = case2_ambient(kind, n);
    let label = format!("case2-{}-n{}-{}", kind.name(), n, block.kind.name());
    let bc = block.chart.clone();
    let nf = n as f64;

    let chart = match kind {
        ProfileKind::CnII => {
            let (lam, phc, th) = (curves.lam, curves.phi, curves.theta);
            ImmersionChart::new(space, domain, label, move |p| {
                let (l, ph, t) = (lam.eval(p[0])?, phc.eval(p[0])?, th.eval(p[0])?);
                let s = C64::from_polar(1.0, t) / C64::new(ph, l);
                let blk = AmbientSpace::to_complex_slots(&bc.eval(&p[1..])?);
                let slots: Vec<C64> = blk.iter().map(|z| s * z).collect();
                Ok(AmbientSpace::from_complex_slots(&slots))
            })
        }
        ProfileKind::CPnII | ProfileKind::CHnIIa | ProfileKind::CHnIIb => {
            let (lam, phc, th) = (curves.lam, curves.phi, curves.theta);
            let scalar_first = kind == ProfileKind::CHnIIb;
            let radial_sign = match kind {
                ProfileKind::CPnII => 1.0,
                ProfileKind::CHnIIa => -1.0,
                _ => 0.0,
            };
            ImmersionChart::new(space, domain, label, move |p| {
                let (l, ph, t) = (lam.eval(p[0])?, phc.eval(p[0])?, th.eval(p[0])?);
                let rho = l * l + ph * ph;
                // 1 + rho, 1 - rho, or rho - 1 depending on the variant.
                let d2 = if radial_sign == 0.0 { rho - 1.0 } else { 1.0 + radial_sign * rho };
                if d2 <= 0.0 {
                    return Err(GeomError::OutsideDomain);
                }
                let d = d2.sqrt();
                let a = C64::from_polar(1.0 / d, t);
                let scalar = C64::from_polar(1.0 / d, (nf - 2.0) * t) * C64::new(-ph, l);
                let blk = AmbientSpace::to_complex_slots(&bc.eval(&p[1..])?);
                let mut slots = Vec::with_capacity(n + 1);
                if scalar_first {
                    slots.push(scalar);
                    slots.extend(blk.iter().map(|z| a * z));
                } else {
                    slots.extend(blk.iter().map(|z| a * z));
                    slots.push(scalar);
                }
                Ok(AmbientSpace::from_complex_slots(&slots))
            })
        }
        ProfileKind::CHnIIc => {
            let m = nf - 3.0;
            for k in 0..profile.len() {
                let psi = m * profile.theta[k];
                let lock = (profile.lam[k] - psi.cos())
                    .abs()
                    .max((profile.phi[k] + psi.sin()).abs());
                if lock > PHASE_LOCK_TOL {
                    return Err(GeomError::Precondition(format!(
                        "circle-variant profile breaks its phase lock at t = {} (residual {lock:.3e})",
                        profile.t[k]
                    )));
                }
            }
            // Phase integral I(t) = int e^(i(n-3)theta)/f^2 with f = exp(int phi):
            // node values and exact derivatives feed Hermite curves whose
            // prefix integrals give I itself.
            let mut ire = Vec::with_capacity(profile.len());
            let mut iim = Vec::with_capacity(profile.len());
            let mut dire = Vec::with_capacity(profile.len());
            let mut diim = Vec::with_capacity(profile.len());
            for k in 0..profile.len() {
                let f2 = (2.0 * curves.phi.integral(profile.t[k])?).exp();
                let psi = m * profile.theta[k];
                let (s, c) = psi.sin_cos();
                let dpsi = m * profile.lam[k];
                ire.push(c / f2);
                iim.push(s / f2);
                dire.push((-dpsi * s - 2.0 * profile.phi[k] * c) / f2);
                diim.push((dpsi * c - 2.0 * profile.phi[k] * s) / f2);
            }
            let i_re = HermiteCurve::new(profile.t0, profile.step, ire, dire)?;
            let i_im = HermiteCurve::new(profile.t0, profile.step, iim, diim)?;
            let (phc, th) = (curves.phi, curves.theta);
            let (gl_x, gl_w) = gauss_legendre_01(32);
            let base = bc.center();
            let block_space = bc.space.clone();
            ImmersionChart::new(space, domain, label, move |p| {
                let t = p[0];
                let u = &p[1..];
                let f = phc.integral(t)?.exp();
                let theta = th.eval(t)?;
                let phase_int = C64::new(i_re.integral(t)?, i_im.integral(t)?);
                let blk_vec = bc.eval(u)?;
                let blk = AmbientSpace::to_complex_slots(&blk_vec);
                let norm2 = block_space.norm_sq(&blk_vec);
                let w = line_potential(&bc, &base, u, &gl_x, &gl_w)?;
                let a = C64::new(w, 0.5 * norm2) + phase_int;
                let c0 = C64::from_polar(f, theta);
                let mut slots = Vec::with_capacity(n + 1);
                slots.push(c0 * (a + C64::i()));
                slots.extend(blk.iter().map(|z| c0 * z));
                slots.push(c0 * a);
                Ok(AmbientSpace::from_complex_slots(&slots))
            })
        }
    };
    Ok(chart)
}
