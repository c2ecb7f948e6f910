//! Cubic Hermite interpolation on uniform grids.
//!
//! Profile and warp solutions are produced by Runge-Kutta integration,
//! which yields both values and exact derivatives (the right-hand side of
//! the system) at every grid node. Cubic Hermite interpolation through
//! value/derivative pairs has O(step^4) value error and O(step^3)
//! derivative error, so with the production steps the interpolant is far
//! more accurate than every downstream tolerance, including finite
//! differencing through interpolated charts.

use crate::error::{GeomError, Result};

/// One scalar channel sampled on a uniform grid, with exact derivatives.
#[derive(Debug, Clone)]
pub struct HermiteCurve {
    t0: f64,
    dt: f64,
    values: Vec<f64>,
    derivs: Vec<f64>,
    /// Prefix integrals: `prefix[i]` integrates the interpolant from `t0`
    /// to node `i`, using the exact per-interval cubic quadrature.
    prefix: Vec<f64>,
}

impl HermiteCurve {
    pub fn new(t0: f64, dt: f64, values: Vec<f64>, derivs: Vec<f64>) -> Result<Self> {
        if values.len() != derivs.len() || values.len() < 2 {
            return Err(GeomError::Precondition(
                "Hermite curve needs matching value/derivative arrays of length >= 2".into(),
            ));
        }
        if !(dt > 0.0) {
            return Err(GeomError::Precondition("Hermite grid step must be positive".into()));
        }
        let mut prefix = Vec::with_capacity(values.len());
        prefix.push(0.0);
        for i in 0..values.len() - 1 {
            let piece = dt / 2.0 * (values[i] + values[i + 1])
                + dt * dt / 12.0 * (derivs[i] - derivs[i + 1]);
            let last = *prefix.last().unwrap();
            prefix.push(last + piece);
        }
        Ok(HermiteCurve { t0, dt, values, derivs, prefix })
    }

    pub fn t_start(&self) -> f64 {
        self.t0
    }

    pub fn t_end(&self) -> f64 {
        self.t0 + self.dt * (self.values.len() - 1) as f64
    }

    /// Interval index and local coordinate in [0,1]. Points a hair outside
    /// the grid (within 1e-9 of an endpoint) are clamped; anything further
    /// out is rejected.
    fn locate(&self, t: f64) -> Result<(usize, f64)> {
        let span = self.t_end() - self.t0;
        let slack = 1e-9 * span.max(1.0);
        if t < self.t0 - slack || t > self.t_end() + slack {
            return Err(GeomError::OutsideDomain);
        }
        let raw = (t - self.t0) / self.dt;
        let max_i = self.values.len() - 2;
        let i = (raw.floor() as isize).clamp(0, max_i as isize) as usize;
        let s = (raw - i as f64).clamp(0.0, 1.0);
        Ok((i, s))
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        let (i, s) = self.locate(t)?;
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let (m0, m1) = (self.derivs[i], self.derivs[i + 1]);
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        Ok(h00 * y0 + h10 * self.dt * m0 + h01 * y1 + h11 * self.dt * m1)
    }

    pub fn eval_deriv(&self, t: f64) -> Result<f64> {
        let (i, s) = self.locate(t)?;
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let (m0, m1) = (self.derivs[i], self.derivs[i + 1]);
        let s2 = s * s;
        let d00 = (6.0 * s2 - 6.0 * s) / self.dt;
        let d10 = 3.0 * s2 - 4.0 * s + 1.0;
        let d01 = (-6.0 * s2 + 6.0 * s) / self.dt;
        let d11 = 3.0 * s2 - 2.0 * s;
        Ok(d00 * y0 + d10 * m0 + d01 * y1 + d11 * m1)
    }

    /// Integral of the interpolant from the grid start to `t`.
    pub fn integral(&self, t: f64) -> Result<f64> {
        let (i, s) = self.locate(t)?;
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let (m0, m1) = (self.derivs[i], self.derivs[i + 1]);
        let s2 = s * s;
        let s3 = s2 * s;
        let s4 = s3 * s;
        let h00 = s4 / 2.0 - s3 + s;
        let h10 = s4 / 4.0 - 2.0 * s3 / 3.0 + s2 / 2.0;
        let h01 = -s4 / 2.0 + s3;
        let h11 = s4 / 4.0 - s3 / 3.0;
        let partial =
            self.dt * (h00 * y0 + h01 * y1) + self.dt * self.dt * (h10 * m0 + h11 * m1);
        Ok(self.prefix[i] + partial)
    }
}
