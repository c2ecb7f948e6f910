//! Ambient complex space forms and their flat models.
//!
//! Three ambients are supported, each realized inside a flat complex
//! vector space so that charts can be differentiated coordinate-wise:
//!
//! - complex Euclidean space C^n, holomorphic sectional curvature 0;
//! - the complex projective space of holomorphic sectional curvature 4,
//!   handled through horizontal (Legendrian) lifts to the unit sphere
//!   S^{2n+1} in C^{n+1};
//! - the complex hyperbolic space of holomorphic sectional curvature -4,
//!   handled through lifts to the anti-de Sitter quadric <z,z> = -1 in
//!   C^{n+1}_1, whose first complex coordinate is timelike.
//!
//! Real coordinates interleave each complex slot as (Re z_k, Im z_k), and
//! the complex structure J acts per slot by (a, b) -> (-b, a). For the
//! indefinite ambient the Hermitian form weights the first slot by -1 in
//! both real directions, so J is still an isometry.
//!
//! A Lagrangian submanifold of the curved ambients is certified through
//! its lift: the lift must sit on the quadric, its tangents must be
//! tangent to the quadric and annihilate the contact form <., J z>, and
//! those residuals are what the chart-level checks report.

use nalgebra::DVector;

use crate::error::{GeomError, Result};

pub type AmbientVector = DVector<f64>;

/// Which model the charts live in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AmbientKind {
    /// C^n itself; charts map into R^{2n}.
    Flat,
    /// Unit-sphere lift model of the positively curved space form;
    /// charts map into R^{2n+2} and must satisfy <z,z> = +1.
    SphereLift,
    /// Anti-de Sitter lift model of the negatively curved space form;
    /// charts map into R^{2n+2} with signature (-,-,+,...,+) and must
    /// satisfy <z,z> = -1.
    AdsLift,
}

/// An ambient space form together with the flat model it is computed in.
#[derive(Debug, Clone)]
pub struct AmbientSpace {
    pub kind: AmbientKind,
    /// Complex dimension of the space form (= real dimension of a
    /// Lagrangian submanifold in it).
    pub n: usize,
    /// Constant in the curvature tensor of the space form as seen by a
    /// Lagrangian submanifold: 0, +1 or -1.
    pub c: f64,
    /// Sign of <z,z> on the quadric (0 for the flat ambient).
    pub epsilon: f64,
    /// Signature weights of the flat model, one per real coordinate.
    pub signature: Vec<f64>,
}

impl AmbientSpace {
    pub fn flat(n: usize) -> Self {
        AmbientSpace {
            kind: AmbientKind::Flat,
            n,
            c: 0.0,
            epsilon: 0.0,
            signature: vec![1.0; 2 * n],
        }
    }

    pub fn sphere_lift(n: usize) -> Self {
        AmbientSpace {
            kind: AmbientKind::SphereLift,
            n,
            c: 1.0,
            epsilon: 1.0,
            signature: vec![1.0; 2 * (n + 1)],
        }
    }

    pub fn ads_lift(n: usize) -> Self {
        let mut signature = vec![1.0; 2 * (n + 1)];
        signature[0] = -1.0;
        signature[1] = -1.0;
        AmbientSpace {
            kind: AmbientKind::AdsLift,
            n,
            c: -1.0,
            epsilon: -1.0,
            signature,
        }
    }

    /// Real dimension of the flat model charts map into.
    pub fn model_dim(&self) -> usize {
        self.signature.len()
    }

    pub fn uses_lift(&self) -> bool {
        self.kind != AmbientKind::Flat
    }

    fn check_dim(&self, v: &AmbientVector, context: &'static str) -> Result<()> {
        if v.len() != self.model_dim() {
            return Err(GeomError::DimensionMismatch {
                expected: self.model_dim(),
                got: v.len(),
                context,
            });
        }
        Ok(())
    }

    /// Signature-weighted inner product of the flat model.
    pub fn inner(&self, x: &AmbientVector, y: &AmbientVector) -> f64 {
        debug_assert_eq!(x.len(), self.model_dim());
        debug_assert_eq!(y.len(), self.model_dim());
        let mut acc = 0.0;
        for i in 0..x.len() {
            acc += self.signature[i] * x[i] * y[i];
        }
        acc
    }

    pub fn norm_sq(&self, x: &AmbientVector) -> f64 {
        self.inner(x, x)
    }

    /// Multiplication by i, slot by slot: (a, b) -> (-b, a).
    pub fn apply_j(&self, x: &AmbientVector) -> AmbientVector {
        debug_assert_eq!(x.len() % 2, 0);
        let mut out = AmbientVector::zeros(x.len());
        for k in 0..x.len() / 2 {
            out[2 * k] = -x[2 * k + 1];
            out[2 * k + 1] = x[2 * k];
        }
        out
    }

    /// Pack complex slots into the interleaved real layout.
    pub fn from_complex_slots(slots: &[nalgebra::Complex<f64>]) -> AmbientVector {
        let mut out = AmbientVector::zeros(2 * slots.len());
        for (k, z) in slots.iter().enumerate() {
            out[2 * k] = z.re;
            out[2 * k + 1] = z.im;
        }
        out
    }

    pub fn to_complex_slots(x: &AmbientVector) -> Vec<nalgebra::Complex<f64>> {
        (0..x.len() / 2)
            .map(|k| nalgebra::Complex::new(x[2 * k], x[2 * k + 1]))
            .collect()
    }

    /// |<z,z> - epsilon| for lift models; the flat model has no
    /// constraint and reports zero.
    pub fn quadric_residual(&self, p: &AmbientVector) -> Result<f64> {
        self.check_dim(p, "quadric point")?;
        if !self.uses_lift() {
            return Ok(0.0);
        }
        Ok((self.norm_sq(p) - self.epsilon).abs())
    }

    /// Residuals of a tangent vector at a lift point: tangency to the
    /// quadric |<v,p>| and the contact form |<v,Jp>|. Horizontal lift
    /// tangents must kill both.
    pub fn lift_tangent_residuals(&self, p: &AmbientVector, v: &AmbientVector) -> Result<(f64, f64)> {
        if !self.uses_lift() {
            return Err(GeomError::RequiresLift);
        }
        self.check_dim(p, "lift point")?;
        self.check_dim(v, "lift tangent")?;
        let tangency = self.inner(v, p).abs();
        let contact = self.inner(v, &self.apply_j(p)).abs();
        Ok((tangency, contact))
    }
}
