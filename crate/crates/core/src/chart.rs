//! Parametrized immersions into an ambient model.
//!
//! A chart is a smooth map from a box in R^m into the flat model of an
//! ambient space: directly into R^{2n} for the flat ambient, or into the
//! lift quadric for the curved ones. Charts are closures, so families
//! produced by integrating profile equations and families given in closed
//! form share one representation, and the jet machinery differentiates
//! them without knowing where they came from.
//!
//! The stored domain is the box certification samples from; evaluation
//! itself is delegated to the closure, which may be defined slightly
//! beyond the box (finite-difference stencils reach outside sample
//! points by a few step widths).

use std::sync::Arc;

use crate::ambient::{AmbientSpace, AmbientVector};
use crate::error::{GeomError, Result};
use crate::rng::SplitMix64;

type EvalFn = dyn Fn(&[f64]) -> Result<AmbientVector> + Send + Sync;

#[derive(Clone)]
pub struct ImmersionChart {
    pub space: AmbientSpace,
    /// Closed parameter box certification may sample from.
    pub domain: Vec<(f64, f64)>,
    pub label: String,
    eval: Arc<EvalFn>,
}

impl std::fmt::Debug for ImmersionChart {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ImmersionChart")
            .field("label", &self.label)
            .field("domain", &self.domain)
            .field("ambient", &self.space.kind)
            .finish()
    }
}

impl ImmersionChart {
    pub fn new<F>(space: AmbientSpace, domain: Vec<(f64, f64)>, label: impl Into<String>, eval: F) -> Self
    where
        F: Fn(&[f64]) -> Result<AmbientVector> + Send + Sync + 'static,
    {
        ImmersionChart { space, domain, label: label.into(), eval: Arc::new(eval) }
    }

    pub fn param_dim(&self) -> usize {
        self.domain.len()
    }

    pub fn eval(&self, u: &[f64]) -> Result<AmbientVector> {
        if u.len() != self.domain.len() {
            return Err(GeomError::DimensionMismatch {
                expected: self.domain.len(),
                got: u.len(),
                context: "chart parameters",
            });
        }
        (self.eval)(u)
    }

    /// Domain shrunk by `margin` on every side, so that stencil
    /// evaluations around sampled points stay inside the chart.
    pub fn interior_box(&self, margin: f64) -> Result<Vec<(f64, f64)>> {
        let mut out = Vec::with_capacity(self.domain.len());
        for &(lo, hi) in &self.domain {
            let (a, b) = (lo + margin, hi - margin);
            if !(a < b) {
                return Err(GeomError::Precondition(format!(
                    "domain [{lo}, {hi}] too narrow for margin {margin}"
                )));
            }
            out.push((a, b));
        }
        Ok(out)
    }

    /// Deterministic sample points, uniform in the margin-shrunk box.
    /// Point `i` draws from its own split stream, so subsets of a run
    /// reproduce exactly.
    pub fn sample_points(&self, count: usize, seed: u64, margin: f64) -> Result<Vec<Vec<f64>>> {
        let inner = self.interior_box(margin)?;
        let mut points = Vec::with_capacity(count);
        for i in 0..count {
            let mut rng = SplitMix64::stream(seed, i as u64);
            points.push(inner.iter().map(|&(lo, hi)| rng.uniform(lo, hi)).collect());
        }
        Ok(points)
    }

    /// Center of the parameter box.
    pub fn center(&self) -> Vec<f64> {
        self.domain.iter().map(|&(lo, hi)| 0.5 * (lo + hi)).collect()
    }
}
