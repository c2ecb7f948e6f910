//! Companion fields for the warped-product (case III) charts.
//!
//! Each case-III chart couples the warp function f(x, y) to auxiliary
//! fields living in the slots the block does not occupy.  In reduced mode
//! (f_y = 0) every system closes into one-dimensional data along x:
//!
//!   flat slot      z_x = e^(i(n-1)x) f_y / f^(n-2),
//!                  z_y = e^(i(n-1)x) f^(n-1) (i - f_x/f),
//!                  so z(x, y) = y kappa(x) with
//!                  kappa = e^(i(n-1)x) f^(n-2) (i f - f_x),
//!                  and kappa' = 0 along warp solutions;
//!
//!   rotor pair     a unitary-like 2x2 system S_x = A_x S, S_y = A_y S with
//!                  A_x diagonal and A_y off-diagonal in reduced mode.  The
//!                  diagonal integrates to pure phases phi_1, phi_2 with
//!                  phi_1' = alpha and phi_2 = lin (x - anchor) - phi_1,
//!                  where alpha = f^2/(1-f^2) (projective),
//!                  alpha = -f^2/(1+f^2) (hyperbolic interior),
//!                  alpha = -f^2/(f^2-1) (hyperbolic exterior), and
//!                  lin = 1-n in all three variants.  The couplings are
//!                  a = f^(n-2)(f_x+if)/D on Theta_1
//!                  and b = f^(n-2)(-+f_x+if)/D on Theta_2, D the variant's
//!                  denominator.  The exterior variant's second diagonal
//!                  coefficient is -i((n-1)(f^2-1)-f^2)/(f^2-1): the sign is
//!                  forced by the zero-curvature condition with the exterior
//!                  warp equation and by the anti-Hermitian structure that
//!                  preserves the pair's Gram matrix.  Since A_y is constant
//!                  along y-lines in reduced mode, the y-flow is the exact
//!                  2x2 exponential of y A_y(x);
//!
//!   potential slot F_y = e^(-i(n-3)x) f^(n-4) (f_x + i f) (conjugated-phase
//!                  variant), so F = y c(x) with c constant along warp
//!                  solutions; v_x = -1/f^2, v_y = 0; u recovered pointwise.
//!                  A second, direct-phase variant conjugates the phases and
//!                  feeds Im(e^(i(n-3)x) F-bar) into v_y; both are built
//!                  behind a switch and judged by their own consistency.
//!
//! Every builder measures a mixed-partial compatibility residual (the
//! zero-curvature defect of its first-order system, per unit transverse
//! displacement) and refuses fields whose defect exceeds 1e-3; the stored
//! residual is the builder's own honesty check, not an assumption.

use nalgebra::Complex;

use crate::error::{GeomError, Result};
use crate::families::warp::{ReducedWarp, WarpKind};
use crate::interp::HermiteCurve;

type C64 = Complex<f64>;

/// Compatibility defect above which a companion system is rejected.
pub(crate) const COMPAT_ERROR: f64 = 1e-3;

/// Sign convention switch for the potential-slot system, which is stated
/// in two conjugated forms; both are implemented and certified rather than
/// one being assumed correct.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignVariant {
    /// F-slopes carry e^(-i(n-3)x) and (f_x + if); v_y reads Im of
    /// e^(i(n-3)x) F.
    PhaseConjugated,
    /// F-slopes carry e^(+i(n-3)x) and (f_x - if); v_y reads Im of
    /// e^(i(n-3)x) F-bar.
    PhaseDirect,
}

impl SignVariant {
    pub fn name(self) -> &'static str {
        match self {
            SignVariant::PhaseConjugated => "conjugated-phase",
            SignVariant::PhaseDirect => "direct-phase",
        }
    }

    pub fn from_name(name: &str) -> Option<SignVariant> {
        match name {
            "conjugated-phase" => Some(SignVariant::PhaseConjugated),
            "direct-phase" => Some(SignVariant::PhaseDirect),
            _ => None,
        }
    }
}

/// One complex-valued channel interpolated as two Hermite curves.
#[derive(Debug, Clone)]
struct CxCurve {
    re: HermiteCurve,
    im: HermiteCurve,
}

impl CxCurve {
    fn new(t0: f64, dt: f64, values: &[C64], derivs: &[C64]) -> Result<CxCurve> {
        Ok(CxCurve {
            re: HermiteCurve::new(
                t0,
                dt,
                values.iter().map(|z| z.re).collect(),
                derivs.iter().map(|z| z.re).collect(),
            )?,
            im: HermiteCurve::new(
                t0,
                dt,
                values.iter().map(|z| z.im).collect(),
                derivs.iter().map(|z| z.im).collect(),
            )?,
        })
    }

    fn eval(&self, t: f64) -> Result<C64> {
        Ok(C64::new(self.re.eval(t)?, self.im.eval(t)?))
    }
}

/// Anchor for phase and potential integrals: the origin when the grid
/// covers it, otherwise the left grid end.
fn anchor_of(warp: &ReducedWarp) -> f64 {
    if warp.x_start <= 0.0 && warp.x_end() >= 0.0 {
        0.0
    } else {
        warp.x_start
    }
}

/// Flat-factor coordinate of the flat case-III chart: z(x, y) = y kappa(x).
#[derive(Debug, Clone)]
pub struct FlatSlot {
    kappa: CxCurve,
    /// Worst |kappa'| over the grid: the mixed-partial defect of the
    /// z-system per unit of y.
    pub compatibility_residual: f64,
}

impl FlatSlot {
    pub fn z(&self, x: f64, y: f64) -> Result<C64> {
        Ok(self.kappa.eval(x)?.scale(y))
    }

    /// Slope of z along y at fixed x.
    pub fn slope(&self, x: f64) -> Result<C64> {
        self.kappa.eval(x)
    }
}

fn build_flat_slot(warp: &ReducedWarp) -> Result<FlatSlot> {
    let nf = warp.n as f64;
    let m = nf - 1.0;
    let len = warp.x.len();
    let mut values = Vec::with_capacity(len);
    let mut derivs = Vec::with_capacity(len);
    let mut worst = 0.0f64;
    for k in 0..len {
        let (x, f, fx, fxx) = (warp.x[k], warp.f[k], warp.fx[k], warp.fxx[k]);
        let rot = C64::from_polar(1.0, m * x);
        let fp = f.powi(warp.n as i32 - 2);
        let core = C64::new(-fx, f);
        let kappa = rot * fp * core;
        // Product rule; the bracket vanishes along exact warp solutions,
        // so its size is the honest compatibility defect.
        let dcore = C64::new(-fxx, fx);
        let dkappa = rot * (C64::new(0.0, m) * fp * core + (nf - 2.0) * fp / f * fx * core + fp * dcore);
        worst = worst.max(dkappa.norm());
        values.push(kappa);
        derivs.push(dkappa);
    }
    if worst > COMPAT_ERROR {
        return Err(GeomError::InconsistentField(format!(
            "flat-slot system incompatible: |d kappa/dx| reaches {worst:.3e}"
        )));
    }
    Ok(FlatSlot {
        kappa: CxCurve::new(warp.x_start, warp.step, &values, &derivs)?,
        compatibility_residual: worst,
    })
}

/// The unit pair (Theta_1, Theta_2) of the lifted case-III charts:
/// a fundamental solution of the 2x2 linear system attached to the warp.
#[derive(Debug, Clone)]
pub struct RotorPair {
    pub kind: WarpKind,
    anchor: f64,
    alpha: HermiteCurve,
    alpha_at_anchor: f64,
    lin: f64,
    a: CxCurve,
    b: CxCurve,
    /// First slot of the pair's C^2 carries this metric sign (-1 for the
    /// hyp-interior variant, whose pair lives in an indefinite plane).
    pub slot_signs: [f64; 2],
    /// Target Hermitian norms of (Theta_1, Theta_2).
    pub gram: [f64; 2],
    swap_start: bool,
    /// Worst zero-curvature defect of the couplings over the grid.
    pub compatibility_residual: f64,
    /// Worst deviation of the sampled Gram matrix from its target.
    pub gram_drift: f64,
}

/// Exact exponential of y * [[0, a], [b, 0]], row-major.
fn expm_offdiag(a: C64, b: C64, y: f64) -> [[C64; 2]; 2] {
    let delta = a * b * (y * y);
    let (ch, shc) = if delta.norm() < 1e-12 {
        (
            C64::new(1.0, 0.0) + delta * 0.5 + delta * delta / 24.0,
            C64::new(1.0, 0.0) + delta / 6.0 + delta * delta / 120.0,
        )
    } else {
        let s = delta.sqrt();
        (s.cosh(), s.sinh() / s)
    };
    [[ch, shc * a * y], [shc * b * y, ch]]
}

impl RotorPair {
    /// Columns (Theta_1, Theta_2) at (x, y), each a C^2 vector.
    pub fn columns(&self, x: f64, y: f64) -> Result<[[C64; 2]; 2]> {
        let phi1 = self.alpha.integral(x)? - self.alpha_at_anchor;
        let phi2 = self.lin * (x - self.anchor) - phi1;
        let s1 = C64::from_polar(1.0, phi1);
        let s2 = C64::from_polar(1.0, phi2);
        let e = expm_offdiag(self.a.eval(x)?, self.b.eval(x)?, y);
        // Base-line columns at (x, 0): Theta_1 always carries phi_1 and
        // Theta_2 carries phi_2; the hyp-interior pair starts with Theta_2
        // in the timelike first slot.
        let (base1, base2) = if self.swap_start {
            ([C64::new(0.0, 0.0), s1], [s2, C64::new(0.0, 0.0)])
        } else {
            ([s1, C64::new(0.0, 0.0)], [C64::new(0.0, 0.0), s2])
        };
        // The y-flow couples the columns, not the slots: (Theta_1)_y = a Theta_2
        // and (Theta_2)_y = b Theta_1, so the exponential mixes base columns.
        let mix = |w1: C64, w2: C64| {
            [w1 * base1[0] + w2 * base2[0], w1 * base1[1] + w2 * base2[1]]
        };
        Ok([mix(e[0][0], e[0][1]), mix(e[1][0], e[1][1])])
    }

    /// Hermitian products of the pair against the slot metric, as
    /// (⟨Theta_1,Theta_1⟩, ⟨Theta_2,Theta_2⟩, ⟨Theta_1,Theta_2⟩).
    pub fn gram_at(&self, x: f64, y: f64) -> Result<(f64, f64, C64)> {
        let cols = self.columns(x, y)?;
        let dot = |u: &[C64; 2], v: &[C64; 2]| {
            self.slot_signs[0] * u[0] * v[0].conj() + self.slot_signs[1] * u[1] * v[1].conj()
        };
        let g11 = dot(&cols[0], &cols[0]);
        let g22 = dot(&cols[1], &cols[1]);
        let g12 = dot(&cols[0], &cols[1]);
        Ok((g11.re, g22.re, g12))
    }
}

fn build_rotor_pair(warp: &ReducedWarp) -> Result<RotorPair> {
    let n = warp.n;
    let nf = n as f64;
    // Denominator D(f), the diagonal coefficient alpha = sigma_alpha f^2 / D,
    // and the sign relating the return coupling to the conjugate: b = sigma_b conj(a).
    let (sigma_alpha, d_of, sigma_b, slot_signs, gram, swap_start) = match warp.kind {
        WarpKind::CPn => (1.0, (|f: f64| 1.0 - f * f) as fn(f64) -> f64, -1.0, [1.0, 1.0], [1.0, 1.0], false),
        WarpKind::CHnA => (-1.0, (|f: f64| 1.0 + f * f) as fn(f64) -> f64, 1.0, [-1.0, 1.0], [1.0, -1.0], true),
        WarpKind::CHnB => (-1.0, (|f: f64| f * f - 1.0) as fn(f64) -> f64, -1.0, [1.0, 1.0], [1.0, 1.0], false),
        other => {
            return Err(GeomError::Precondition(format!(
                "rotor pairs attach to the lifted warp variants, not {}",
                other.name()
            )))
        }
    };
    let d_sign = match warp.kind {
        WarpKind::CPn => -2.0,
        _ => 2.0,
    };
    let lin = 1.0 - nf;

    let len = warp.x.len();
    let mut alpha_v = Vec::with_capacity(len);
    let mut alpha_d = Vec::with_capacity(len);
    let mut a_v = Vec::with_capacity(len);
    let mut a_d = Vec::with_capacity(len);
    let mut b_v = Vec::with_capacity(len);
    let mut b_d = Vec::with_capacity(len);
    let mut compat = 0.0f64;
    for k in 0..len {
        let (f, fx, fxx) = (warp.f[k], warp.fx[k], warp.fxx[k]);
        let d = d_of(f);
        if d.abs() < 1e-9 {
            return Err(GeomError::Degenerate(format!(
                "rotor denominator vanishes at x = {}",
                warp.x[k]
            )));
        }
        let alpha = sigma_alpha * f * f / d;
        // d(alpha)/dx = sigma 2 f f_x (D - f^2 D_f / ... ) collapses to
        // sigma (2 f D - f^2 d_sign f) f_x / D^2 with D_f = d_sign f.
        let dalpha = sigma_alpha * (2.0 * f * d - f * f * d_sign * f) * fx / (d * d);
        let fp = f.powi(n as i32 - 2);
        let core_a = C64::new(fx, f);
        let core_b = sigma_b * core_a.conj();
        let a = fp * core_a / d;
        let b = fp * core_b / d;
        let dcore_a = C64::new(fxx, fx);
        let dcore_b = sigma_b * dcore_a.conj();
        let da = ((nf - 2.0) * fp / f * fx * core_a + fp * dcore_a) / d
            - fp * core_a * d_sign * f * fx / (d * d);
        let db = ((nf - 2.0) * fp / f * fx * core_b + fp * dcore_b) / d
            - fp * core_b * d_sign * f * fx / (d * d);
        // Zero-curvature: a' = i(alpha_1 - alpha_2) a with
        // alpha_1 - alpha_2 = 2 alpha - lin, and b' the opposite twist.
        let twist = C64::new(0.0, 2.0 * alpha - lin);
        compat = compat.max((da - twist * a).norm()).max((db + twist * b).norm());
        alpha_v.push(alpha);
        alpha_d.push(dalpha);
        a_v.push(a);
        a_d.push(da);
        b_v.push(b);
        b_d.push(db);
    }
    if compat > COMPAT_ERROR {
        return Err(GeomError::InconsistentField(format!(
            "rotor system incompatible with the warp field: defect {compat:.3e}"
        )));
    }

    let alpha = HermiteCurve::new(warp.x_start, warp.step, alpha_v, alpha_d)?;
    let anchor = anchor_of(warp);
    let alpha_at_anchor = alpha.integral(anchor)?;
    let pair = RotorPair {
        kind: warp.kind,
        anchor,
        alpha,
        alpha_at_anchor,
        lin,
        a: CxCurve::new(warp.x_start, warp.step, &a_v, &a_d)?,
        b: CxCurve::new(warp.x_start, warp.step, &b_v, &b_d)?,
        slot_signs,
        gram,
        swap_start: swap_start,
        compatibility_residual: compat,
        gram_drift: 0.0,
    };

    // Sample the Gram matrix over the grid and a band of y values; the
    // generator is anti-Hermitian for the slot metric, so any drift is
    // integration error, not structure.
    let mut drift = 0.0f64;
    let stride = (len / 16).max(1);
    for k in (0..len).step_by(stride) {
        for j in -2i32..=2 {
            let y = 0.25 * j as f64;
            let (g11, g22, g12) = pair.gram_at(warp.x[k], y)?;
            drift = drift
                .max((g11 - pair.gram[0]).abs())
                .max((g22 - pair.gram[1]).abs())
                .max(g12.norm());
        }
    }
    Ok(RotorPair { gram_drift: drift, ..pair })
}

/// Last-slot field F plus the scalar potentials (u, v) of the indefinite
/// flat case-III chart, in the chosen sign variant.
#[derive(Debug, Clone)]
pub struct PotentialField {
    pub variant: SignVariant,
    /// Variant's own F-slope: F(x, y) = y c(x).
    c: CxCurve,
    f: HermiteCurve,
    /// Integrand -1/f^2 of the v-potential.
    neg_inv_f2: HermiteCurve,
    v_at_anchor: f64,
    /// Worst mixed-partial defect of the F- and v-systems per unit y.
    pub compatibility_residual: f64,
    /// Worst gap between pointwise u and the line-integrated u.
    pub u_cross_residual: f64,
}

impl PotentialField {
    /// F at (x, y) in the variant's own convention.
    pub fn f_slot(&self, x: f64, y: f64) -> Result<C64> {
        Ok(self.c.eval(x)?.scale(y))
    }

    /// The value the chart places in its final complex slot: the
    /// conjugated-phase chart carries F-bar, the direct-phase chart F.
    pub fn chart_slot(&self, x: f64, y: f64) -> Result<C64> {
        let f = self.f_slot(x, y)?;
        Ok(match self.variant {
            SignVariant::PhaseConjugated => f.conj(),
            SignVariant::PhaseDirect => f,
        })
    }

    /// Two-dimensional part of the u-potential (the block adds
    /// ⟨G,G⟩ / 2 on top): u = (|F|^2 - 1)/2 + 1/(2 f^2).
    pub fn u2d(&self, x: f64, y: f64) -> Result<f64> {
        let f = self.f.eval(x)?;
        let fs = self.f_slot(x, y)?.norm_sqr();
        Ok(0.5 * (fs - 1.0) + 0.5 / (f * f))
    }

    /// Two-dimensional part of the v-potential, anchored to zero at the
    /// grid anchor (the block adds its own angle potential).
    pub fn v2d(&self, x: f64) -> Result<f64> {
        Ok(self.neg_inv_f2.integral(x)? - self.v_at_anchor)
    }
}

fn build_potential_field(warp: &ReducedWarp, variant: SignVariant) -> Result<PotentialField> {
    let n = warp.n;
    let nf = n as f64;
    let m = nf - 3.0;
    let len = warp.x.len();

    let mut c_v = Vec::with_capacity(len);
    let mut c_d = Vec::with_capacity(len);
    let mut p_v = Vec::with_capacity(len);
    let mut inv_v = Vec::with_capacity(len);
    let mut inv_d = Vec::with_capacity(len);
    let mut w_v = Vec::with_capacity(len);
    let mut w_d = Vec::with_capacity(len);
    let mut slope_defect = 0.0f64;
    for k in 0..len {
        let (x, f, fx, fxx) = (warp.x[k], warp.f[k], warp.fx[k], warp.fxx[k]);
        let fp4 = f.powi(n as i32 - 4);
        let fp3 = fp4 * f;
        // Conjugated-phase slope and its derivative; the direct-phase
        // variant is its conjugate.
        let rot = C64::from_polar(1.0, -m * x);
        let core = C64::new(fx, f);
        let c1 = rot * fp4 * core;
        let dc1 = rot
            * (C64::new(0.0, -m) * fp4 * core
                + (nf - 4.0) * fp4 / f * fx * core
                + fp4 * C64::new(fxx, fx));
        let (c, dc) = match variant {
            SignVariant::PhaseConjugated => (c1, dc1),
            SignVariant::PhaseDirect => (c1.conj(), dc1.conj()),
        };
        slope_defect = slope_defect.max(dc.norm());
        c_v.push(c);
        c_d.push(dc);

        // v_y = y P(x): the conjugated variant reads Im(e^(i m x) F) in
        // both terms, the direct variant reads F-bar in the Im term.
        let e = C64::from_polar(1.0, m * x);
        let q = e * c;
        let im_term = match variant {
            SignVariant::PhaseConjugated => q.im,
            SignVariant::PhaseDirect => (e * c.conj()).im,
        };
        p_v.push(-fp3 * q.re + fp4 * fx * im_term);

        inv_v.push(-1.0 / (f * f));
        inv_d.push(2.0 * fx / (f * f * f));
        w_v.push(-fx / (f * f * f));
        w_d.push(-fxx / (f * f * f) + 3.0 * fx * fx / (f * f * f * f));
    }

    // v-compat: d/dx of v_y/y must vanish (v_x is y-independent).
    let mut p_defect = 0.0f64;
    for k in 1..len.saturating_sub(1) {
        p_defect = p_defect.max(((p_v[k + 1] - p_v[k - 1]) / (2.0 * warp.step)).abs());
    }
    let compat = slope_defect.max(p_defect);
    if compat > COMPAT_ERROR {
        return Err(GeomError::InconsistentField(format!(
            "potential-slot system ({}) incompatible: defect {compat:.3e} per unit y",
            variant.name()
        )));
    }

    let anchor = anchor_of(warp);
    let f = warp.f_curve()?;
    let neg_inv_f2 = HermiteCurve::new(warp.x_start, warp.step, inv_v, inv_d)?;
    let v_at_anchor = neg_inv_f2.integral(anchor)?;

    // Cross-check the pointwise u against the line-integrated one.  The
    // y-legs agree identically in reduced mode, so the gap isolates the
    // x-leg: 1/(2 f^2) - 1/(2 f(anchor)^2) against the integral of
    // -f_x/f^3 along the base line.
    let w = HermiteCurve::new(warp.x_start, warp.step, w_v, w_d)?;
    let w_at_anchor = w.integral(anchor)?;
    let f_anchor = f.eval(anchor)?;
    let mut u_cross = 0.0f64;
    for k in 0..len {
        let direct = 0.5 / (warp.f[k] * warp.f[k]) - 0.5 / (f_anchor * f_anchor);
        let line = w.integral(warp.x[k])? - w_at_anchor;
        u_cross = u_cross.max((direct - line).abs());
    }

    Ok(PotentialField {
        variant,
        c: CxCurve::new(warp.x_start, warp.step, &c_v, &c_d)?,
        f,
        neg_inv_f2,
        v_at_anchor,
        compatibility_residual: compat,
        u_cross_residual: u_cross,
    })
}

/// Companion data of one case-III family, keyed by the warp kind.
#[derive(Debug, Clone)]
pub enum CompanionFields {
    Flat(FlatSlot),
    Rotor(RotorPair),
    Potential(PotentialField),
}

impl CompanionFields {
    pub fn compatibility_residual(&self) -> f64 {
        match self {
            CompanionFields::Flat(fs) => fs.compatibility_residual,
            CompanionFields::Rotor(rp) => rp.compatibility_residual,
            CompanionFields::Potential(pf) => pf.compatibility_residual,
        }
    }
}

/// Integrate the companion system matching the warp's kind.  The sign
/// variant only affects the indefinite-flat potential system; the other
/// systems have a single stated form.
pub fn integrate_companions(warp: &ReducedWarp, variant: SignVariant) -> Result<CompanionFields> {
    if warp.x.len() < 2 {
        return Err(GeomError::Precondition("warp grid too short for companions".into()));
    }
    Ok(match warp.kind {
        WarpKind::Cn => CompanionFields::Flat(build_flat_slot(warp)?),
        WarpKind::CPn | WarpKind::CHnA | WarpKind::CHnB => {
            CompanionFields::Rotor(build_rotor_pair(warp)?)
        }
        WarpKind::CHnC => CompanionFields::Potential(build_potential_field(warp, variant)?),
    })
}
