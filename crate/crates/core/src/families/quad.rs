//! Small quadrature helpers for the family constructions.
//!
//! Two of the explicit families carry an angle potential, a function on the
//! block whose differential is the closed 1-form  sum_k <Phi, J dPhi/du_k> du_k
//! (closedness is exactly the Lagrangian condition on the block).  The
//! potential is recovered by a line integral along the straight segment from
//! a fixed base point; Gauss-Legendre quadrature with a directional
//! finite-difference derivative keeps this cheap enough to sit inside chart
//! evaluation.

use crate::chart::ImmersionChart;
use crate::error::Result;

/// Nodes and weights of the N-point Gauss-Legendre rule on [0, 1].
///
/// Computed by Newton iteration on the Legendre polynomial, seeded with the
/// Chebyshev angle estimate; converges to machine precision in a handful of
/// steps for the moderate N used here.
pub fn gauss_legendre_01(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        // Root estimate on [-1, 1], descending in i.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            // Legendre recurrence for P_n(x) and P_(n-1)(x).
            let (mut p0, mut p1) = (1.0f64, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        // Weight from the derivative at the converged root.
        let (mut p0, mut p1) = (1.0f64, x);
        for k in 2..=n {
            let kf = k as f64;
            let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
            p0 = p1;
            p1 = p2;
        }
        let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // Map [-1, 1] -> [0, 1].
        nodes[i] = 0.5 * (x + 1.0);
        weights[i] = 0.5 * w;
    }
    (nodes, weights)
}

/// Line integral of the angle form along the segment from `base` to `u`:
///
///   W(u) = int_0^1 <Phi(g(s)), J dPhi/ds (g(s))> ds,   g(s) = base + s (u - base).
///
/// The directional derivative uses the 4-point central stencil in s, which
/// is safe because the built-in block charts extend smoothly beyond their
/// sample boxes.
pub fn line_potential(
    chart: &ImmersionChart,
    base: &[f64],
    u: &[f64],
    nodes: &[f64],
    weights: &[f64],
) -> Result<f64> {
    let m = base.len();
    let gamma = |s: f64| -> Vec<f64> {
        (0..m).map(|k| base[k] + s * (u[k] - base[k])).collect()
    };
    let h = 1e-3;
    let mut acc = 0.0;
    for (&s, &w) in nodes.iter().zip(weights) {
        let pm2 = chart.eval(&gamma(s - 2.0 * h))?;
        let pm1 = chart.eval(&gamma(s - h))?;
        let pp1 = chart.eval(&gamma(s + h))?;
        let pp2 = chart.eval(&gamma(s + 2.0 * h))?;
        let dphi = (pm2 - pm1 * 8.0 + pp1 * 8.0 - pp2) / (12.0 * h);
        let phi = chart.eval(&gamma(s))?;
        acc += w * chart.space.inner(&phi, &chart.space.apply_j(&dphi));
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ambient::{AmbientSpace, AmbientVector};

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre_01(8);
        assert_eq!(x.len(), 8);
        // Exact for degree <= 15 on [0, 1]: int x^k = 1/(k+1).
        for k in 0..=15usize {
            let approx: f64 = x.iter().zip(&w).map(|(&xi, &wi)| wi * xi.powi(k as i32)).sum();
            assert!(
                (approx - 1.0 / (k as f64 + 1.0)).abs() < 1e-14,
                "degree {k}: {approx}"
            );
        }
        let total: f64 = w.iter().sum();
        assert!((total - 1.0).abs() < 1e-14);
    }

    #[test]
    fn gauss_legendre_handles_smooth_transcendentals() {
        let (x, w) = gauss_legendre_01(32);
        let approx: f64 = x.iter().zip(&w).map(|(&xi, &wi)| wi * (3.0 * xi).sin()).sum();
        let exact = (1.0 - (3.0f64).cos()) / 3.0;
        assert!((approx - exact).abs() < 1e-14);
    }

    #[test]
    fn line_potential_recovers_a_known_angle_function() {
        // Circle chart u -> (cos u, sin u) in C^1: with J(a, b) = (-b, a) the
        // integrand <Phi, J dPhi/du> is identically -1, so the potential from
        // base to u is -(u - base).
        let space = AmbientSpace::flat(1);
        let chart = ImmersionChart::new(space, vec![(-3.0, 3.0)], "circle", |u| {
            Ok(AmbientVector::from_vec(vec![u[0].cos(), u[0].sin()]))
        });
        let (x, w) = gauss_legendre_01(32);
        let got = line_potential(&chart, &[0.2], &[1.7], &x, &w).unwrap();
        assert!((got + 1.5).abs() < 1e-10, "got {got}");
    }

    #[test]
    fn line_potential_vanishes_on_real_charts() {
        let space = AmbientSpace::flat(3);
        let chart = ImmersionChart::new(space, vec![(-1.0, 1.0); 3], "real-subspace", |u| {
            let mut v = AmbientVector::zeros(6);
            for k in 0..3 {
                v[2 * k] = u[k];
            }
            Ok(v)
        });
        let (x, w) = gauss_legendre_01(16);
        let got = line_potential(&chart, &[0.0, 0.0, 0.0], &[0.5, -0.3, 0.8], &x, &w).unwrap();
        assert!(got.abs() < 1e-14);
    }
}
