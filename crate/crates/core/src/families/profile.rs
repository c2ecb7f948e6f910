//! Profile curves for the tube-type ideal families.
//!
//! Every warped-circle family is driven by a planar autonomous system in
//! the functions (lambda(t), phi(t)) together with a phase angle theta(t).
//! All five ambient variants share the same lambda equation,
//!
//!   lambda' = (n - 3) lambda phi,
//!
//! and differ in the phi and theta equations:
//!
//!   flat        phi' = -phi^2 - (n - 2) lambda^2,      theta' = (n - 1) lambda,
//!   projective  phi' = -1 - phi^2 - (n - 2) lambda^2,  theta' = lambda,
//!   hyperbolic  phi' = +1 - phi^2 - (n - 2) lambda^2,  theta' = lambda,
//!
//! where the hyperbolic sign applies to all three hyperbolic variants; they
//! are distinguished by the invariant regions of the unit circle
//! lambda^2 + phi^2 = 1 (inside, outside, and exactly on it).
//!
//! The flat system has the first integral
//!
//!   Q = lambda^(2/(n-3)) (lambda^2 + phi^2),
//!
//! constant along trajectories, which both fixes the tube radius and gives a
//! sharp accuracy monitor for the integrator.  On the positive-phi branch the
//! flat system is solved in closed form by
//!
//!   phi(lambda)   = sqrt(1 / (c^2 lambda^(2/(n-3))) - lambda^2),
//!   theta(lambda) = ((n - 1)/(n - 2)) asin(c lambda^((n-2)/(n-3))),
//!
//! with c = 1/sqrt(Q) chosen so that Q = 1/c^2, and the on-circle hyperbolic
//! system by the separatrix
//!
//!   lambda = sech((n - 3) t),   phi = -tanh((n - 3) t),
//!   theta  = (2/(n - 3)) atan(tanh((n - 3) t / 2)).
//!
//! Integration is classical fixed-step RK4 on a uniform grid.  Node values
//! and exact right-hand-side derivatives feed cubic Hermite curves, so the
//! downstream immersion charts stay smooth enough for high-order finite
//! differencing.

use crate::error::{GeomError, Result};
use crate::interp::HermiteCurve;

/// Which of the five profile systems to integrate.
///
/// The three hyperbolic variants share one vector field; the kind still
/// matters because each has its own admissible region and consumers build
/// different immersion formulas from the result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProfileKind {
    /// Flat ambient, tube over a sphere-block.
    CnII,
    /// Projective ambient.
    CPnII,
    /// Hyperbolic ambient, interior of the unit circle.
    CHnIIa,
    /// Hyperbolic ambient, exterior of the unit circle.
    CHnIIb,
    /// Hyperbolic ambient, on the unit circle (separatrix).
    CHnIIc,
}

impl ProfileKind {
    /// Short stable name used in labels and reports.
    pub fn name(self) -> &'static str {
        match self {
            ProfileKind::CnII => "cn-ii",
            ProfileKind::CPnII => "cpn-ii",
            ProfileKind::CHnIIa => "chn-ii-a",
            ProfileKind::CHnIIb => "chn-ii-b",
            ProfileKind::CHnIIc => "chn-ii-c",
        }
    }
}

/// Why an integration stopped where it did.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TruncationReason {
    /// The requested span was covered in full.
    SpanCompleted,
    /// lambda reached the guard floor; the flat system needs lambda > 0.
    LambdaFloor,
    /// The trajectory came within the guard margin of the invariant circle
    /// lambda^2 + phi^2 = 1 (hyperbolic interior and exterior variants).
    CircleMargin,
    /// A state component exceeded the blow-up bound.
    Blowup,
}

/// Guard floor for lambda and margin around the invariant circle.
const GUARD_MARGIN: f64 = 1e-3;
/// Any state component beyond this magnitude counts as blow-up.
const BLOWUP_BOUND: f64 = 1e6;
/// On-circle tolerance for the separatrix variant's initial state.
const CIRCLE_TOL: f64 = 1e-9;

/// Result of a profile integration: uniform grid, node values, and exact
/// derivative samples for Hermite interpolation.
#[derive(Debug, Clone)]
pub struct ProfileSolution {
    pub kind: ProfileKind,
    pub n: usize,
    /// Grid origin (equals the start of the requested span).
    pub t0: f64,
    /// Uniform step between grid nodes.
    pub step: f64,
    pub t: Vec<f64>,
    pub lam: Vec<f64>,
    pub phi: Vec<f64>,
    pub theta: Vec<f64>,
    /// Exact right-hand sides at the nodes, for Hermite slopes.
    pub dlam: Vec<f64>,
    pub dphi: Vec<f64>,
    pub dtheta: Vec<f64>,
    /// First integral lambda^(2/(n-3)) (lambda^2 + phi^2) at the nodes,
    /// present only for the flat variant.
    pub conserved: Option<Vec<f64>>,
    pub truncation: TruncationReason,
}

/// Smooth views of a profile solution.
#[derive(Debug, Clone)]
pub struct ProfileCurves {
    pub lam: HermiteCurve,
    pub phi: HermiteCurve,
    pub theta: HermiteCurve,
}

impl ProfileSolution {
    /// Last grid node.
    pub fn t_end(&self) -> f64 {
        *self.t.last().expect("profile grid is never empty")
    }

    /// Number of grid nodes.
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Build Hermite curves over the grid.  Requires at least two nodes.
    pub fn curves(&self) -> Result<ProfileCurves> {
        Ok(ProfileCurves {
            lam: HermiteCurve::new(self.t0, self.step, self.lam.clone(), self.dlam.clone())?,
            phi: HermiteCurve::new(self.t0, self.step, self.phi.clone(), self.dphi.clone())?,
            theta: HermiteCurve::new(self.t0, self.step, self.theta.clone(), self.dtheta.clone())?,
        })
    }

    /// Worst relative drift of the first integral per unit time,
    ///
    ///   max_k |Q_k - Q_0| / (|Q_0| (t_k - t_0)),
    ///
    /// or None when the variant has no tracked first integral.
    pub fn conserved_drift(&self) -> Option<f64> {
        let q = self.conserved.as_ref()?;
        let q0 = q[0];
        let mut worst = 0.0f64;
        for k in 1..q.len() {
            let rate = (q[k] - q0).abs() / (q0.abs() * (self.t[k] - self.t0));
            worst = worst.max(rate);
        }
        Some(worst)
    }
}

/// Closed-form positive-branch phi as a function of lambda for the flat
/// system with first integral Q = 1/c^2.
pub fn closed_form_phi(n: usize, c: f64, lam: f64) -> f64 {
    let q = lam.powf(2.0 / (n as f64 - 3.0));
    (1.0 / (c * c * q) - lam * lam).sqrt()
}

/// Closed-form theta as a function of lambda on the same branch, normalized
/// so that theta = 0 at lambda = 0.
pub fn closed_form_theta(n: usize, c: f64, lam: f64) -> f64 {
    let nf = n as f64;
    let arg = c * lam.powf((nf - 2.0) / (nf - 3.0));
    (nf - 1.0) / (nf - 2.0) * arg.asin()
}

/// Separatrix of the hyperbolic system: (lambda, phi, theta) at time t with
/// theta(0) = 0, lambda(0) = 1.
pub fn separatrix_state(n: usize, t: f64) -> (f64, f64, f64) {
    let m = n as f64 - 3.0;
    let lam = 1.0 / (m * t).cosh();
    let phi = -(m * t).tanh();
    let theta = 2.0 / m * (m * t / 2.0).tanh().atan();
    (lam, phi, theta)
}

fn rhs(kind: ProfileKind, n: usize, s: [f64; 3]) -> [f64; 3] {
    let nf = n as f64;
    let (lam, phi) = (s[0], s[1]);
    let dlam = (nf - 3.0) * lam * phi;
    let (dphi, dtheta) = match kind {
        ProfileKind::CnII => (-phi * phi - (nf - 2.0) * lam * lam, (nf - 1.0) * lam),
        ProfileKind::CPnII => (-1.0 - phi * phi - (nf - 2.0) * lam * lam, lam),
        ProfileKind::CHnIIa | ProfileKind::CHnIIb | ProfileKind::CHnIIc => {
            (1.0 - phi * phi - (nf - 2.0) * lam * lam, lam)
        }
    };
    [dlam, dphi, dtheta]
}

fn rk4_step(kind: ProfileKind, n: usize, s: [f64; 3], h: f64) -> [f64; 3] {
    let add = |a: [f64; 3], b: [f64; 3], w: f64| [a[0] + w * b[0], a[1] + w * b[1], a[2] + w * b[2]];
    let k1 = rhs(kind, n, s);
    let k2 = rhs(kind, n, add(s, k1, h / 2.0));
    let k3 = rhs(kind, n, add(s, k2, h / 2.0));
    let k4 = rhs(kind, n, add(s, k3, h));
    let mut out = s;
    for i in 0..3 {
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

/// Check the admissible region of a state, used both for the initial
/// condition (hard error) and as a truncation guard during integration.
fn guard(kind: ProfileKind, s: [f64; 3]) -> Option<TruncationReason> {
    if s.iter().any(|v| !v.is_finite() || v.abs() > BLOWUP_BOUND) {
        return Some(TruncationReason::Blowup);
    }
    let rho = s[0] * s[0] + s[1] * s[1];
    match kind {
        ProfileKind::CnII if s[0] <= GUARD_MARGIN => Some(TruncationReason::LambdaFloor),
        ProfileKind::CHnIIa if rho >= 1.0 - GUARD_MARGIN => Some(TruncationReason::CircleMargin),
        ProfileKind::CHnIIb if rho <= 1.0 + GUARD_MARGIN => Some(TruncationReason::CircleMargin),
        _ => None,
    }
}

fn conserved_value(n: usize, lam: f64, phi: f64) -> f64 {
    lam.powf(2.0 / (n as f64 - 3.0)) * (lam * lam + phi * phi)
}

/// Integrate a profile system with fixed-step RK4 from `init` at the start
/// of `span`.
///
/// The grid covers `span` in whole steps; if a guard fires the solution is
/// truncated at the last admissible node and the reason recorded.  A state
/// that violates its admissible region already at the start is an error:
///
///   * flat variant: lambda(0) must exceed the guard floor,
///   * hyperbolic interior: lambda^2 + phi^2 < 1 (minus the margin),
///   * hyperbolic exterior: lambda^2 + phi^2 > 1 (plus the margin),
///   * separatrix: |lambda^2 + phi^2 - 1| <= 1e-9.
pub fn integrate_profile(
    kind: ProfileKind,
    n: usize,
    init: (f64, f64, f64),
    span: (f64, f64),
    step: f64,
) -> Result<ProfileSolution> {
    if n < 5 {
        return Err(GeomError::Precondition(format!(
            "profile systems need dimension n >= 5, got {n}"
        )));
    }
    if !(step > 0.0) || !step.is_finite() {
        return Err(GeomError::Precondition(format!("invalid step {step}")));
    }
    let (t0, t1) = span;
    if !(t1 > t0) {
        return Err(GeomError::Precondition(format!(
            "invalid span [{t0}, {t1}]"
        )));
    }

    let s0 = [init.0, init.1, init.2];
    if let Some(reason) = guard(kind, s0) {
        return Err(GeomError::Precondition(format!(
            "initial profile state violates the {} admissible region ({reason:?})",
            kind.name()
        )));
    }
    if kind == ProfileKind::CHnIIc {
        let rho = s0[0] * s0[0] + s0[1] * s0[1];
        if (rho - 1.0).abs() > CIRCLE_TOL {
            return Err(GeomError::Precondition(format!(
                "separatrix variant needs lambda^2 + phi^2 = 1, got {rho:.12}"
            )));
        }
    }

    let steps = ((t1 - t0) / step + 1e-9).floor() as usize;
    if steps == 0 {
        return Err(GeomError::Precondition(format!(
            "span [{t0}, {t1}] shorter than one step {step}"
        )));
    }

    let mut t = Vec::with_capacity(steps + 1);
    let mut lam = Vec::with_capacity(steps + 1);
    let mut phi = Vec::with_capacity(steps + 1);
    let mut theta = Vec::with_capacity(steps + 1);
    let mut dlam = Vec::with_capacity(steps + 1);
    let mut dphi = Vec::with_capacity(steps + 1);
    let mut dtheta = Vec::with_capacity(steps + 1);
    let track_conserved = kind == ProfileKind::CnII;
    let mut conserved = if track_conserved { Some(Vec::with_capacity(steps + 1)) } else { None };

    let push = |tk: f64,
                    s: [f64; 3],
                    t: &mut Vec<f64>,
                    lam: &mut Vec<f64>,
                    phi: &mut Vec<f64>,
                    theta: &mut Vec<f64>,
                    dlam: &mut Vec<f64>,
                    dphi: &mut Vec<f64>,
                    dtheta: &mut Vec<f64>,
                    conserved: &mut Option<Vec<f64>>| {
        let d = rhs(kind, n, s);
        t.push(tk);
        lam.push(s[0]);
        phi.push(s[1]);
        theta.push(s[2]);
        dlam.push(d[0]);
        dphi.push(d[1]);
        dtheta.push(d[2]);
        if let Some(q) = conserved {
            q.push(conserved_value(n, s[0], s[1]));
        }
    };

    let mut state = s0;
    push(
        t0, state, &mut t, &mut lam, &mut phi, &mut theta, &mut dlam, &mut dphi, &mut dtheta,
        &mut conserved,
    );

    let mut truncation = TruncationReason::SpanCompleted;
    for k in 1..=steps {
        let next = rk4_step(kind, n, state, step);
        if let Some(reason) = guard(kind, next) {
            truncation = reason;
            break;
        }
        state = next;
        push(
            t0 + k as f64 * step,
            state,
            &mut t,
            &mut lam,
            &mut phi,
            &mut theta,
            &mut dlam,
            &mut dphi,
            &mut dtheta,
            &mut conserved,
        );
    }

    if t.len() < 2 {
        return Err(GeomError::Degenerate(format!(
            "profile integration truncated immediately ({truncation:?})"
        )));
    }

    Ok(ProfileSolution {
        kind,
        n,
        t0,
        step,
        t,
        lam,
        phi,
        theta,
        dlam,
        dphi,
        dtheta,
        conserved,
        truncation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat_start(n: usize, c: f64, lam0: f64) -> (f64, f64, f64) {
        (lam0, closed_form_phi(n, c, lam0), closed_form_theta(n, c, lam0))
    }

    #[test]
    fn flat_first_integral_is_preserved() {
        // Unit tube radius: Q = lambda (lambda^2 + phi^2) = 1 for n = 5.
        let sol = integrate_profile(ProfileKind::CnII, 5, flat_start(5, 1.0, 0.5), (0.0, 1.0), 1e-4)
            .unwrap();
        assert_eq!(sol.truncation, TruncationReason::SpanCompleted);
        assert_eq!(sol.len(), 10_001);
        let drift = sol.conserved_drift().unwrap();
        assert!(drift < 1e-9, "drift per unit time {drift:.3e}");
        // The trajectory crosses phi = 0 inside the span (lambda peaks at the
        // cube root of Q); integration must continue straight through it.
        let crossed = sol.phi.iter().any(|&p| p < 0.0);
        assert!(crossed, "expected a phi sign change within the span");
    }

    #[test]
    fn flat_drift_shrinks_at_rk4_order() {
        // At coarse steps truncation error dominates roundoff, so halving the
        // step must shrink the drift by at least 2^3 (the conserved quantity
        // sees one RK4 order less after the division by elapsed time).
        let d_coarse =
            integrate_profile(ProfileKind::CnII, 5, flat_start(5, 1.0, 0.5), (0.0, 1.0), 4e-3)
                .unwrap()
                .conserved_drift()
                .unwrap();
        let d_fine =
            integrate_profile(ProfileKind::CnII, 5, flat_start(5, 1.0, 0.5), (0.0, 1.0), 2e-3)
                .unwrap()
                .conserved_drift()
                .unwrap();
        assert!(
            d_coarse / d_fine >= 8.0,
            "expected >= 8x reduction, got {d_coarse:.3e} / {d_fine:.3e}"
        );
    }

    #[test]
    fn flat_closed_form_matches_integration() {
        for n in [5usize, 6, 7] {
            let c = 1.0;
            let sol =
                integrate_profile(ProfileKind::CnII, n, flat_start(n, c, 0.5), (0.0, 2.0), 1e-4)
                    .unwrap();
            let nf = n as f64;
            let mut checked = 0usize;
            for k in 0..sol.len() {
                let arg = c * sol.lam[k].powf((nf - 2.0) / (nf - 3.0));
                if arg > 0.99 {
                    break;
                }
                let phi_cf = closed_form_phi(n, c, sol.lam[k]);
                let theta_cf = closed_form_theta(n, c, sol.lam[k]);
                assert!(
                    (sol.phi[k] - phi_cf).abs() < 1e-7,
                    "phi mismatch at n={n}, t={}: {} vs {}",
                    sol.t[k],
                    sol.phi[k],
                    phi_cf
                );
                assert!(
                    (sol.theta[k] - theta_cf).abs() < 1e-7,
                    "theta mismatch at n={n}, t={}",
                    sol.t[k]
                );
                checked += 1;
            }
            assert!(checked > 1000, "closed-form branch too short: {checked} nodes");
        }
    }

    #[test]
    fn hyperbolic_separatrix_matches_closed_form() {
        for n in [5usize, 6] {
            let sol =
                integrate_profile(ProfileKind::CHnIIc, n, (1.0, 0.0, 0.0), (0.0, 1.0), 1e-4)
                    .unwrap();
            assert_eq!(sol.truncation, TruncationReason::SpanCompleted);
            for k in (0..sol.len()).step_by(500) {
                let (l, p, th) = separatrix_state(n, sol.t[k]);
                assert!((sol.lam[k] - l).abs() < 1e-9, "lambda at t={}", sol.t[k]);
                assert!((sol.phi[k] - p).abs() < 1e-9);
                assert!((sol.theta[k] - th).abs() < 1e-9);
            }
            // The unit circle is invariant under the flow.
            for k in 0..sol.len() {
                let rho = sol.lam[k] * sol.lam[k] + sol.phi[k] * sol.phi[k];
                assert!((rho - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn hyperbolic_interior_stays_inside_circle() {
        let sol = integrate_profile(ProfileKind::CHnIIa, 5, (0.5, 0.5, 0.0), (0.0, 5.0), 1e-4)
            .unwrap();
        for k in 0..sol.len() {
            let rho = sol.lam[k] * sol.lam[k] + sol.phi[k] * sol.phi[k];
            assert!(rho < 1.0, "left the invariant disc at t = {}", sol.t[k]);
        }
        assert!(matches!(
            sol.truncation,
            TruncationReason::SpanCompleted | TruncationReason::CircleMargin
        ));
    }

    #[test]
    fn hyperbolic_exterior_truncates_at_circle_margin() {
        // Just outside the circle with phi > 0 the radius decays toward 1
        // exponentially; the guard must stop before crossing.
        let phi0 = (1.002f64 - 0.09).sqrt();
        let sol = integrate_profile(ProfileKind::CHnIIb, 5, (0.3, phi0, 0.0), (0.0, 5.0), 1e-4)
            .unwrap();
        for k in 0..sol.len() {
            let rho = sol.lam[k] * sol.lam[k] + sol.phi[k] * sol.phi[k];
            assert!(rho > 1.0, "crossed the circle at t = {}", sol.t[k]);
        }
        assert_eq!(sol.truncation, TruncationReason::CircleMargin);
    }

    #[test]
    fn projective_phi_decreases_and_blows_up_guarded() {
        // phi' <= -1 everywhere, so phi reaches -infinity in finite time; the
        // blow-up guard truncates instead of producing non-finite values.
        let sol = integrate_profile(ProfileKind::CPnII, 5, (0.3, 0.0, 0.0), (0.0, 50.0), 1e-3)
            .unwrap();
        assert_eq!(sol.truncation, TruncationReason::Blowup);
        assert!(sol.phi.iter().all(|p| p.is_finite()));
    }

    #[test]
    fn initial_guard_violations_are_errors() {
        assert!(integrate_profile(ProfileKind::CnII, 5, (0.0, 1.0, 0.0), (0.0, 1.0), 1e-3).is_err());
        assert!(
            integrate_profile(ProfileKind::CHnIIa, 5, (0.9, 0.9, 0.0), (0.0, 1.0), 1e-3).is_err()
        );
        assert!(
            integrate_profile(ProfileKind::CHnIIb, 5, (0.5, 0.5, 0.0), (0.0, 1.0), 1e-3).is_err()
        );
        assert!(
            integrate_profile(ProfileKind::CHnIIc, 5, (0.9, 0.0, 0.0), (0.0, 1.0), 1e-3).is_err()
        );
        assert!(integrate_profile(ProfileKind::CnII, 4, (0.5, 0.5, 0.0), (0.0, 1.0), 1e-3).is_err());
    }

    #[test]
    fn curves_reproduce_node_values_and_interpolate_smoothly() {
        let sol = integrate_profile(ProfileKind::CnII, 5, flat_start(5, 1.0, 0.5), (0.0, 0.5), 1e-3)
            .unwrap();
        let curves = sol.curves().unwrap();
        for k in (0..sol.len()).step_by(50) {
            assert!((curves.lam.eval(sol.t[k]).unwrap() - sol.lam[k]).abs() < 1e-14);
        }
        // Mid-interval values obey the first integral to Hermite accuracy.
        for k in 0..40 {
            let t = 0.012_5 + k as f64 * 0.011;
            let l = curves.lam.eval(t).unwrap();
            let p = curves.phi.eval(t).unwrap();
            let q = conserved_value(5, l, p);
            assert!((q - 1.0).abs() < 1e-10, "Q = {q} at t = {t}");
        }
    }
}
