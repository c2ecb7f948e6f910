//! Finite-difference jets of immersion charts and orthonormal frames.
//!
//! All derivatives are 4th-order central differences on unit-scaled
//! parameters, with a separate step per derivative order: h1 = 1e-4 for
//! first derivatives, h2 = 1e-3 for second, h3 = 5e-3 for third. The
//! steps balance truncation O(h^4) against roundoff O(eps/h^k); at these
//! choices first derivatives are good to ~1e-12, second to ~1e-10 and
//! third to ~1e-7, comfortably inside every downstream tolerance.
//!
//! One-sided stencils are deliberately absent: several chart families
//! have genuine singularities at their domain edges (warp factors like
//! cos(4x)^{1/4} degenerate), and extrapolating across them would mask
//! exactly the behavior the residual checks exist to catch. Callers
//! sample strictly inside the box.

use nalgebra::DMatrix;

use crate::ambient::{AmbientSpace, AmbientVector};
use crate::chart::ImmersionChart;
use crate::error::{GeomError, Result};

/// Finite-difference steps per derivative order.
#[derive(Debug, Clone, Copy)]
pub struct FdSteps {
    pub h1: f64,
    pub h2: f64,
    pub h3: f64,
}

impl Default for FdSteps {
    fn default() -> Self {
        FdSteps { h1: 1e-4, h2: 1e-3, h3: 5e-3 }
    }
}

impl FdSteps {
    /// Largest excursion any stencil makes from the base point, used by
    /// samplers to keep stencils inside chart domains.
    pub fn stencil_reach(&self) -> f64 {
        (2.0 * self.h1).max(2.0 * self.h2).max(4.0 * self.h3)
    }
}

/// Value and partial derivatives of a chart at one parameter point.
#[derive(Debug, Clone)]
pub struct Jet3 {
    pub params: Vec<f64>,
    pub value: AmbientVector,
    pub d1: Vec<AmbientVector>,
    pub d2: Option<Vec<Vec<AmbientVector>>>,
    pub d3: Option<Vec<Vec<Vec<AmbientVector>>>>,
    /// Worst relative asymmetry of d2 before symmetrization.
    pub d2_symmetry_residual: f64,
}

fn shifted(u: &[f64], moves: &[(usize, f64)]) -> Vec<f64> {
    let mut v = u.to_vec();
    for &(idx, delta) in moves {
        v[idx] += delta;
    }
    v
}

/// Offsets and weights of the 4-point first-derivative stencil; divide
/// by 12h after summing.
const D1_OFFS: [(f64, f64); 4] = [(-2.0, 1.0), (-1.0, -8.0), (1.0, 8.0), (2.0, -1.0)];

fn fd_d1(chart: &ImmersionChart, u: &[f64], i: usize, h: f64) -> Result<AmbientVector> {
    let mut acc = AmbientVector::zeros(chart.space.model_dim());
    for &(s, w) in &D1_OFFS {
        acc += chart.eval(&shifted(u, &[(i, s * h)]))? * w;
    }
    Ok(acc / (12.0 * h))
}

fn fd_d2_pure(chart: &ImmersionChart, u: &[f64], f0: &AmbientVector, i: usize, h: f64) -> Result<AmbientVector> {
    let mut acc = f0 * -30.0;
    for &(s, w) in &[(-2.0, -1.0), (-1.0, 16.0), (1.0, 16.0), (2.0, -1.0)] {
        acc += chart.eval(&shifted(u, &[(i, s * h)]))? * w;
    }
    Ok(acc / (12.0 * h * h))
}

/// Nested 4x4 mixed second derivative with `outer` the outer direction.
fn fd_d2_mixed(chart: &ImmersionChart, u: &[f64], outer: usize, inner: usize, h: f64) -> Result<AmbientVector> {
    let mut acc = AmbientVector::zeros(chart.space.model_dim());
    for &(s, ws) in &D1_OFFS {
        for &(t, wt) in &D1_OFFS {
            acc += chart.eval(&shifted(u, &[(outer, s * h), (inner, t * h)]))? * (ws * wt);
        }
    }
    Ok(acc / (144.0 * h * h))
}

fn fd_d3_pure(chart: &ImmersionChart, u: &[f64], i: usize, h: f64) -> Result<AmbientVector> {
    let mut acc = AmbientVector::zeros(chart.space.model_dim());
    for &(s, w) in &[
        (-3.0, 1.0),
        (-2.0, -8.0),
        (-1.0, 13.0),
        (1.0, -13.0),
        (2.0, 8.0),
        (3.0, -1.0),
    ] {
        acc += chart.eval(&shifted(u, &[(i, s * h)]))? * w;
    }
    Ok(acc / (8.0 * h * h * h))
}

/// Mixed third derivative for a canonical index triple i <= j <= k, not
/// all equal: an outer first-derivative stencil over an inner pure or
/// mixed second derivative, everything at step h.
fn fd_d3_mixed(chart: &ImmersionChart, u: &[f64], i: usize, j: usize, k: usize, h: f64) -> Result<AmbientVector> {
    let mut acc = AmbientVector::zeros(chart.space.model_dim());
    if i == j {
        for &(s, w) in &D1_OFFS {
            let base = shifted(u, &[(k, s * h)]);
            let f0 = chart.eval(&base)?;
            acc += fd_d2_pure(chart, &base, &f0, i, h)? * w;
        }
    } else if j == k {
        for &(s, w) in &D1_OFFS {
            let base = shifted(u, &[(i, s * h)]);
            let f0 = chart.eval(&base)?;
            acc += fd_d2_pure(chart, &base, &f0, j, h)? * w;
        }
    } else {
        for &(s, w) in &D1_OFFS {
            let base = shifted(u, &[(k, s * h)]);
            acc += fd_d2_mixed(chart, &base, i, j, h)? * w;
        }
    }
    Ok(acc / (12.0 * h))
}

/// Evaluate a chart jet to the requested order (1, 2 or 3).
pub fn evaluate_jet(chart: &ImmersionChart, params: &[f64], order: u8, steps: FdSteps) -> Result<Jet3> {
    if !(1..=3).contains(&order) {
        return Err(GeomError::Precondition(format!("jet order {order} not in 1..=3")));
    }
    let m = chart.param_dim();
    let value = chart.eval(params)?;

    let mut d1 = Vec::with_capacity(m);
    for i in 0..m {
        d1.push(fd_d1(chart, params, i, steps.h1)?);
    }
    check_immersion_rank(&d1)?;

    let mut d2_symmetry_residual = 0.0f64;
    let d2 = if order >= 2 {
        let mut grid = vec![vec![AmbientVector::zeros(chart.space.model_dim()); m]; m];
        let mut scale = 0.0f64;
        for i in 0..m {
            grid[i][i] = fd_d2_pure(chart, params, &value, i, steps.h2)?;
            scale = scale.max(grid[i][i].norm());
        }
        for i in 0..m {
            for j in i + 1..m {
                let ij = fd_d2_mixed(chart, params, i, j, steps.h2)?;
                let ji = fd_d2_mixed(chart, params, j, i, steps.h2)?;
                d2_symmetry_residual = d2_symmetry_residual.max((&ij - &ji).norm());
                let sym = (ij + ji) * 0.5;
                scale = scale.max(sym.norm());
                grid[i][j] = sym.clone();
                grid[j][i] = sym;
            }
        }
        d2_symmetry_residual /= 1.0 + scale;
        Some(grid)
    } else {
        None
    };

    let d3 = if order >= 3 {
        let zero = AmbientVector::zeros(chart.space.model_dim());
        let mut grid = vec![vec![vec![zero; m]; m]; m];
        for i in 0..m {
            for j in i..m {
                for k in j..m {
                    let val = if i == j && j == k {
                        fd_d3_pure(chart, params, i, steps.h3)?
                    } else {
                        fd_d3_mixed(chart, params, i, j, k, steps.h3)?
                    };
                    for (a, b, c) in [
                        (i, j, k),
                        (i, k, j),
                        (j, i, k),
                        (j, k, i),
                        (k, i, j),
                        (k, j, i),
                    ] {
                        grid[a][b][c] = val.clone();
                    }
                }
            }
        }
        Some(grid)
    } else {
        None
    };

    Ok(Jet3 { params: params.to_vec(), value, d1, d2, d3, d2_symmetry_residual })
}

/// Reject jets whose Jacobian is numerically rank-deficient.
fn check_immersion_rank(d1: &[AmbientVector]) -> Result<()> {
    let rows = d1[0].len();
    let mat = DMatrix::from_fn(rows, d1.len(), |r, c| d1[c][r]);
    let svd = mat.svd(false, false);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smin < 1e-8 * smax.max(1.0) {
        return Err(GeomError::DegenerateImmersion);
    }
    Ok(())
}

/// Orthonormal tangent frame obtained from the jet's coordinate basis.
#[derive(Debug, Clone)]
pub struct TangentFrame {
    pub vectors: Vec<AmbientVector>,
    /// Change of basis: `vectors[i] = sum_a coeffs[(a, i)] * d1[a]`.
    pub coeffs: DMatrix<f64>,
    pub gram_deviation: f64,
}

/// Modified Gram-Schmidt under the ambient inner product, with one
/// reorthogonalization pass for stability near degeneracies.
pub fn orthonormal_frame(jet: &Jet3, space: &AmbientSpace) -> Result<TangentFrame> {
    let m = jet.d1.len();
    let mut vectors: Vec<AmbientVector> = jet.d1.clone();
    let mut coeffs = DMatrix::<f64>::identity(m, m);

    for i in 0..m {
        let original_norm = vectors[i].norm();
        for _pass in 0..2 {
            for j in 0..i {
                let proj = space.inner(&vectors[i], &vectors[j]);
                let vj = vectors[j].clone();
                vectors[i] -= vj * proj;
                let cj = coeffs.column(j).into_owned();
                let mut ci = coeffs.column_mut(i);
                ci -= cj * proj;
            }
        }
        let sq = space.inner(&vectors[i], &vectors[i]);
        if sq <= 0.0 {
            return Err(GeomError::IndefiniteMetric);
        }
        let norm = sq.sqrt();
        if norm < 1e-8 * (1.0 + original_norm) {
            return Err(GeomError::DegenerateImmersion);
        }
        vectors[i] /= norm;
        let mut ci = coeffs.column_mut(i);
        ci /= norm;
    }

    let mut gram_deviation = 0.0f64;
    for i in 0..m {
        for j in 0..m {
            let g = space.inner(&vectors[i], &vectors[j]);
            let target = if i == j { 1.0 } else { 0.0 };
            gram_deviation = gram_deviation.max((g - target).abs());
        }
    }
    if gram_deviation > 1e-10 {
        return Err(GeomError::NotOrthonormal { deviation: gram_deviation });
    }
    Ok(TangentFrame { vectors, coeffs, gram_deviation })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    /// u -> (u1, 0, u2, 0, u3, 0): the flat Lagrangian plane in C^3.
    fn linear_chart() -> ImmersionChart {
        ImmersionChart::new(
            AmbientSpace::flat(3),
            vec![(-1.0, 1.0); 3],
            "linear",
            |u| {
                let mut v = AmbientVector::zeros(6);
                for i in 0..3 {
                    v[2 * i] = u[i];
                }
                Ok(v)
            },
        )
    }

    /// Curved test surface with hand-coded derivatives as the oracle.
    fn curved_chart() -> ImmersionChart {
        ImmersionChart::new(
            AmbientSpace::flat(2),
            vec![(-1.0, 1.0); 2],
            "curved",
            |u| {
                let (x, y) = (u[0], u[1]);
                Ok(AmbientVector::from_vec(vec![
                    x * x * y,
                    (x * y).sin(),
                    x.exp() * y,
                    x * y * y * y,
                ]))
            },
        )
    }

    #[test]
    fn linear_chart_jets_are_exact() {
        let chart = linear_chart();
        let jet = evaluate_jet(&chart, &[0.2, -0.3, 0.5], 2, FdSteps::default()).unwrap();
        for i in 0..3 {
            let mut e = AmbientVector::zeros(6);
            e[2 * i] = 1.0;
            assert!((&jet.d1[i] - &e).norm() < 1e-10);
        }
        let d2 = jet.d2.as_ref().unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!(d2[i][j].norm() < 1e-8, "d2[{i}][{j}] = {}", d2[i][j].norm());
            }
        }
    }

    #[test]
    fn circle_second_derivative_points_inward() {
        let chart = ImmersionChart::new(
            AmbientSpace::flat(1),
            vec![(-3.0, 3.0)],
            "circle",
            |u| Ok(AmbientVector::from_vec(vec![u[0].cos(), u[0].sin()])),
        );
        let jet = evaluate_jet(&chart, &[0.7], 2, FdSteps::default()).unwrap();
        let d2 = &jet.d2.as_ref().unwrap()[0][0];
        assert!((d2 + &jet.value).norm() < 1e-9, "d2 should be -position");
    }

    #[test]
    fn derivatives_match_hand_coded_oracle() {
        let chart = curved_chart();
        let (x, y) = (0.3, -0.4);
        let jet = evaluate_jet(&chart, &[x, y], 3, FdSteps::default()).unwrap();

        let d1x = AmbientVector::from_vec(vec![
            2.0 * x * y,
            y * (x * y).cos(),
            x.exp() * y,
            y * y * y,
        ]);
        let d1y = AmbientVector::from_vec(vec![
            x * x,
            x * (x * y).cos(),
            x.exp(),
            3.0 * x * y * y,
        ]);
        assert!((&jet.d1[0] - &d1x).norm() < 1e-10);
        assert!((&jet.d1[1] - &d1y).norm() < 1e-10);

        let d2 = jet.d2.as_ref().unwrap();
        let dxx = AmbientVector::from_vec(vec![
            2.0 * y,
            -y * y * (x * y).sin(),
            x.exp() * y,
            0.0,
        ]);
        let dxy = AmbientVector::from_vec(vec![
            2.0 * x,
            (x * y).cos() - x * y * (x * y).sin(),
            x.exp(),
            3.0 * y * y,
        ]);
        let dyy = AmbientVector::from_vec(vec![0.0, -x * x * (x * y).sin(), 0.0, 6.0 * x * y]);
        assert!((&d2[0][0] - &dxx).norm() < 1e-8);
        assert!((&d2[0][1] - &dxy).norm() < 1e-8);
        assert!((&d2[1][1] - &dyy).norm() < 1e-8);

        let d3 = jet.d3.as_ref().unwrap();
        let dxxx = AmbientVector::from_vec(vec![0.0, -y * y * y * (x * y).cos(), x.exp() * y, 0.0]);
        let dxxy = AmbientVector::from_vec(vec![
            2.0,
            -2.0 * y * (x * y).sin() - x * y * y * (x * y).cos(),
            x.exp(),
            0.0,
        ]);
        let dxyy = AmbientVector::from_vec(vec![
            0.0,
            -2.0 * x * (x * y).sin() - x * x * y * (x * y).cos(),
            0.0,
            6.0 * y,
        ]);
        let dyyy = AmbientVector::from_vec(vec![0.0, -x * x * x * (x * y).cos(), 0.0, 6.0 * x]);
        assert!((&d3[0][0][0] - &dxxx).norm() < 1e-5, "{}", (&d3[0][0][0] - &dxxx).norm());
        assert!((&d3[0][0][1] - &dxxy).norm() < 1e-5, "{}", (&d3[0][0][1] - &dxxy).norm());
        assert!((&d3[0][1][1] - &dxyy).norm() < 1e-5, "{}", (&d3[0][1][1] - &dxyy).norm());
        assert!((&d3[1][1][1] - &dyyy).norm() < 1e-5, "{}", (&d3[1][1][1] - &dyyy).norm());
    }

    #[test]
    fn d2_symmetry_residual_is_tiny() {
        let chart = curved_chart();
        let jet = evaluate_jet(&chart, &[0.4, 0.2], 2, FdSteps::default()).unwrap();
        assert!(jet.d2_symmetry_residual <= 1e-7, "{}", jet.d2_symmetry_residual);
        let d2 = jet.d2.as_ref().unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(d2[i][j], d2[j][i]);
            }
        }
    }

    #[test]
    fn degenerate_jacobian_is_rejected() {
        let chart = ImmersionChart::new(
            AmbientSpace::flat(1),
            vec![(-1.0, 1.0)],
            "cusp",
            |u| Ok(AmbientVector::from_vec(vec![u[0] * u[0], u[0] * u[0] * u[0]])),
        );
        // At the cusp parameter the Jacobian vanishes.
        let err = evaluate_jet(&chart, &[0.0], 1, FdSteps::default());
        assert!(matches!(err, Err(GeomError::DegenerateImmersion)));
    }

    #[test]
    fn frame_is_orthonormal_and_spans() {
        let chart = curved_chart();
        let jet = evaluate_jet(&chart, &[0.3, 0.5], 1, FdSteps::default()).unwrap();
        let space = AmbientSpace::flat(2);
        let frame = orthonormal_frame(&jet, &space).unwrap();
        assert!(frame.gram_deviation < 1e-12);
        for i in 0..2 {
            let mut rebuilt = AmbientVector::zeros(4);
            for a in 0..2 {
                rebuilt += &jet.d1[a] * frame.coeffs[(a, i)];
            }
            assert!((rebuilt - &frame.vectors[i]).norm() < 1e-12);
        }
    }

    #[test]
    fn frame_idempotent_and_scale_invariant() {
        let space = AmbientSpace::flat(2);
        let mut e0 = AmbientVector::zeros(4);
        e0[0] = 1.0;
        let mut e1 = AmbientVector::zeros(4);
        e1[2] = 1.0;
        let jet = Jet3 {
            params: vec![0.0, 0.0],
            value: AmbientVector::zeros(4),
            d1: vec![e0.clone(), e1.clone()],
            d2: None,
            d3: None,
            d2_symmetry_residual: 0.0,
        };
        let frame = orthonormal_frame(&jet, &space).unwrap();
        assert!((&frame.vectors[0] - &e0).norm() < 1e-14);
        assert!((&frame.vectors[1] - &e1).norm() < 1e-14);

        let jet_scaled = Jet3 { d1: vec![e0.clone() * 2.0, e1.clone()], ..jet };
        let frame2 = orthonormal_frame(&jet_scaled, &space).unwrap();
        assert!((&frame2.vectors[0] - &e0).norm() < 1e-14);
    }

    #[test]
    fn random_frames_have_tiny_gram_deviation() {
        let space = AmbientSpace::flat(5);
        let mut rng = SplitMix64::new(77);
        for _ in 0..20 {
            let d1: Vec<AmbientVector> = (0..5)
                .map(|_| AmbientVector::from_fn(10, |_, _| rng.gaussian()))
                .collect();
            let jet = Jet3 {
                params: vec![0.0; 5],
                value: AmbientVector::zeros(10),
                d1,
                d2: None,
                d3: None,
                d2_symmetry_residual: 0.0,
            };
            let frame = orthonormal_frame(&jet, &space).unwrap();
            assert!(frame.gram_deviation < 1e-12, "{}", frame.gram_deviation);
        }
    }

    #[test]
    fn ads_frame_uses_signature_inner_product() {
        // Horizontal tangents at the AdS base point e0: spacelike slots.
        let space = AmbientSpace::ads_lift(2);
        let mut v0 = AmbientVector::zeros(6);
        v0[2] = 2.0;
        let mut v1 = AmbientVector::zeros(6);
        v1[2] = 1.0;
        v1[4] = 1.0;
        let jet = Jet3 {
            params: vec![0.0, 0.0],
            value: AmbientVector::zeros(6),
            d1: vec![v0, v1],
            d2: None,
            d3: None,
            d2_symmetry_residual: 0.0,
        };
        let frame = orthonormal_frame(&jet, &space).unwrap();
        assert!(frame.gram_deviation < 1e-12);
        // Timelike input must be rejected, not normalized.
        let mut t = AmbientVector::zeros(6);
        t[0] = 1.0;
        let jet_bad = Jet3 {
            params: vec![0.0],
            value: AmbientVector::zeros(6),
            d1: vec![t],
            d2: None,
            d3: None,
            d2_symmetry_residual: 0.0,
        };
        assert!(matches!(
            orthonormal_frame(&jet_bad, &space),
            Err(GeomError::IndefiniteMetric)
        ));
    }
}
