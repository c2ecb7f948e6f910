//! Induced metric, cubic form and adapted normal forms.
//!
//! For a Lagrangian immersion the second fundamental form is encoded by
//! the totally symmetric cubic form h^C_{AB} = <h(E_A, E_B), J E_C> in an
//! orthonormal tangent frame; symmetry in all three slots is equivalent
//! to the immersion being Lagrangian. The mean curvature vector is
//! H = sum_C m_C J E_C with m_C the slot traces of the cubic divided by
//! n, so JH = -sum_C m_C E_C.
//!
//! At points where the delta(2, n-2) bound is attained, the cubic takes
//! a rigid normal form in a suitable basis: with gamma = h^1_{11},
//! lambda = h^1_{33}, mu = h^2_{33},
//!
//!   h(e_1, e_1) = gamma J e_1,
//!   h(e_1, e_2) = (n lambda - gamma) J e_2,
//!   h(e_2, e_2) = (n lambda - gamma) J e_1 + n mu J e_2,
//!   h(e_1, e_i) = lambda J e_i,   h(e_2, e_i) = mu J e_i,
//!   h(e_i, e_j) = delta_ij (lambda J e_1 + mu J e_2) + sum_k b^k_{ij} J e_k,
//!
//! with i, j, k >= 3 and the residual block b totally symmetric and
//! traceless. This module extracts (gamma, lambda, mu, block) from a
//! cubic tensor and measures how far the tensor is from the pattern; the
//! non-minimal normal form with e_1 along the mean curvature direction
//! (gamma = (n-1) lambda, mu = 0) gets its own residual since only e_1
//! is distinguished there.

use nalgebra::DMatrix;

use crate::ambient::{AmbientSpace, AmbientVector};
use crate::error::{GeomError, Result};
use crate::jets::{Jet3, TangentFrame};

/// Totally symmetric cubic form coefficients in an orthonormal frame.
#[derive(Debug, Clone)]
pub struct CubicTensor {
    pub n: usize,
    /// coeffs[c][a][b] = h^c_{ab}, symmetrized over all index orders.
    pub coeffs: Vec<Vec<Vec<f64>>>,
    /// m_C = (1/n) sum_A h^C_{AA}; the mean curvature vector is
    /// sum_C m_C J E_C and JH = -sum_C m_C E_C.
    pub mean_vector: Vec<f64>,
    /// Squared mean curvature, sum_C m_C^2.
    pub h2: f64,
    /// Worst deviation between the raw coefficients and their
    /// symmetrization, before it was applied.
    pub symmetry_residual: f64,
}

impl CubicTensor {
    /// Symmetrize raw coefficients over all six index orders and record
    /// how asymmetric the input was.
    pub fn from_raw(raw: Vec<Vec<Vec<f64>>>) -> Self {
        let n = raw.len();
        let mut coeffs = vec![vec![vec![0.0; n]; n]; n];
        let mut symmetry_residual = 0.0f64;
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    let perms = [
                        raw[a][b][c],
                        raw[a][c][b],
                        raw[b][a][c],
                        raw[b][c][a],
                        raw[c][a][b],
                        raw[c][b][a],
                    ];
                    let avg = perms.iter().sum::<f64>() / 6.0;
                    for p in perms {
                        symmetry_residual = symmetry_residual.max((p - avg).abs());
                    }
                    coeffs[a][b][c] = avg;
                }
            }
        }
        Self::from_symmetric(coeffs, symmetry_residual)
    }

    fn from_symmetric(coeffs: Vec<Vec<Vec<f64>>>, symmetry_residual: f64) -> Self {
        let n = coeffs.len();
        let mean_vector: Vec<f64> = (0..n)
            .map(|c| (0..n).map(|a| coeffs[c][a][a]).sum::<f64>() / n as f64)
            .collect();
        let h2 = mean_vector.iter().map(|m| m * m).sum();
        CubicTensor { n, coeffs, mean_vector, h2, symmetry_residual }
    }

    pub fn get(&self, a: usize, b: usize, c: usize) -> f64 {
        self.coeffs[a][b][c]
    }

    /// Normal components of h(x, y): out[C] = sum_{ab} x_a y_b h^C_{ab}.
    pub fn apply(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n];
        for (c, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for a in 0..n {
                for b in 0..n {
                    acc += x[a] * y[b] * self.coeffs[c][a][b];
                }
            }
            *o = acc;
        }
        out
    }

    /// Cubic evaluated on three frame-coordinate vectors.
    pub fn eval3(&self, x: &[f64], y: &[f64], z: &[f64]) -> f64 {
        self.apply(x, y).iter().zip(z).map(|(h, zc)| h * zc).sum()
    }

    /// Coefficients in a rotated frame with new_i = sum_a rot[(a, i)] old_a.
    pub fn rotate(&self, rot: &DMatrix<f64>) -> CubicTensor {
        let n = self.n;
        debug_assert_eq!(rot.nrows(), n);
        debug_assert_eq!(rot.ncols(), n);
        let mut t1 = vec![vec![vec![0.0; n]; n]; n];
        for c in 0..n {
            for a in 0..n {
                for bb in 0..n {
                    let mut acc = 0.0;
                    for b in 0..n {
                        acc += self.coeffs[c][a][b] * rot[(b, bb)];
                    }
                    t1[c][a][bb] = acc;
                }
            }
        }
        let mut t2 = vec![vec![vec![0.0; n]; n]; n];
        for c in 0..n {
            for aa in 0..n {
                for bb in 0..n {
                    let mut acc = 0.0;
                    for a in 0..n {
                        acc += t1[c][a][bb] * rot[(a, aa)];
                    }
                    t2[c][aa][bb] = acc;
                }
            }
        }
        let mut t3 = vec![vec![vec![0.0; n]; n]; n];
        for cc in 0..n {
            for aa in 0..n {
                for bb in 0..n {
                    let mut acc = 0.0;
                    for c in 0..n {
                        acc += t2[c][aa][bb] * rot[(c, cc)];
                    }
                    t3[cc][aa][bb] = acc;
                }
            }
        }
        Self::from_symmetric(t3, self.symmetry_residual)
    }
}

/// Coefficients of the ideal-point normal form, with residuals.
#[derive(Debug, Clone)]
pub struct AdaptedCoefficients {
    pub gamma: f64,
    pub lam: f64,
    pub mu: f64,
    /// Traceless symmetric block b^k_{ij} with 0-based indices running
    /// over the last n-2 frame directions.
    pub block: Vec<Vec<Vec<f64>>>,
    /// Worst deviation of the tensor from the normal form rebuilt out of
    /// (gamma, lambda, mu, block), including block tracelessness.
    pub pattern_residual: f64,
    /// gamma - (2n/3) lambda; nonnegative (up to noise) at ideal points.
    pub margin_two_thirds: f64,
    /// gamma - (n/2) lambda; positive at ideal points with gamma > 0.
    pub margin_half_n: f64,
}

/// Build the normal-form tensor from its data; inverse of extraction.
pub fn adapted_model(n: usize, gamma: f64, lam: f64, mu: f64, block: &[Vec<Vec<f64>>]) -> CubicTensor {
    let mut t = vec![vec![vec![0.0; n]; n]; n];
    let set = |a: usize, b: usize, c: usize, v: f64, t: &mut Vec<Vec<Vec<f64>>>| {
        for (x, y, z) in [(a, b, c), (a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a)] {
            t[x][y][z] = v;
        }
    };
    set(0, 0, 0, gamma, &mut t);
    set(0, 1, 1, n as f64 * lam - gamma, &mut t);
    set(1, 1, 1, n as f64 * mu, &mut t);
    for i in 2..n {
        set(0, i, i, lam, &mut t);
        set(1, i, i, mu, &mut t);
    }
    for i in 2..n {
        for j in 2..n {
            for k in 2..n {
                t[i][j][k] += block[k - 2][i - 2][j - 2];
            }
        }
    }
    CubicTensor::from_raw(t)
}

fn pattern_distance(cubic: &CubicTensor, model: &CubicTensor) -> f64 {
    let n = cubic.n;
    let mut worst = 0.0f64;
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                worst = worst.max((cubic.coeffs[a][b][c] - model.coeffs[a][b][c]).abs());
            }
        }
    }
    worst
}

/// Read (gamma, lambda, mu, block) off a tensor assumed to be in the
/// adapted basis, without gating on the pattern residual.
pub fn extract_adapted_lenient(cubic: &CubicTensor) -> Result<AdaptedCoefficients> {
    let n = cubic.n;
    if n < 3 {
        return Err(GeomError::Precondition(
            "adapted normal form needs dimension >= 3".into(),
        ));
    }
    let gamma = cubic.get(0, 0, 0);
    let lam = cubic.get(0, 2, 2);
    let mu = cubic.get(1, 2, 2);
    let nb = n - 2;
    let mut block = vec![vec![vec![0.0; nb]; nb]; nb];
    for i in 0..nb {
        for j in 0..nb {
            for k in 0..nb {
                block[k][i][j] = cubic.get(i + 2, j + 2, k + 2);
            }
        }
    }
    let mut residual = pattern_distance(cubic, &adapted_model(n, gamma, lam, mu, &block));
    for bk in &block {
        let trace: f64 = (0..nb).map(|i| bk[i][i]).sum();
        residual = residual.max(trace.abs());
    }
    Ok(AdaptedCoefficients {
        gamma,
        lam,
        mu,
        block,
        pattern_residual: residual,
        margin_two_thirds: gamma - 2.0 * n as f64 / 3.0 * lam,
        margin_half_n: gamma - n as f64 / 2.0 * lam,
    })
}

/// Like `extract_adapted_lenient`, but rejects tensors whose residual
/// exceeds the structural tolerance.
pub fn extract_adapted(cubic: &CubicTensor) -> Result<AdaptedCoefficients> {
    let out = extract_adapted_lenient(cubic)?;
    if out.pattern_residual > 1e-6 {
        return Err(GeomError::NormalFormViolation { residual: out.pattern_residual });
    }
    Ok(out)
}

/// Residual of the non-minimal normal form in which only e_1 (the mean
/// curvature direction) is distinguished:
///
///   h(E_1, E_1) = (n-1) lambda J E_1,  h(E_1, E_i) = lambda J E_i,
///   h(E_i, E_j) = delta_ij lambda J E_1 + traceless block.
///
/// The residual is invariant under rotations of E_2..E_n, so it is
/// well defined as soon as E_1 is fixed. Returns (lambda, residual).
pub fn mean_direction_pattern_residual(cubic: &CubicTensor) -> (f64, f64) {
    let n = cubic.n;
    let lam = (1..n).map(|i| cubic.get(0, i, i)).sum::<f64>() / (n - 1) as f64;
    let mut worst = (cubic.get(0, 0, 0) - (n - 1) as f64 * lam).abs();
    for k in 1..n {
        worst = worst.max(cubic.get(0, 0, k).abs());
        for i in 1..n {
            let target = if i == k { lam } else { 0.0 };
            worst = worst.max((cubic.get(0, i, k) - target).abs());
        }
    }
    for k in 1..n {
        let trace: f64 = (1..n).map(|i| cubic.get(i, i, k)).sum();
        worst = worst.max(trace.abs());
    }
    (lam, worst)
}

/// Induced metric g_ij = <d1_i, d1_j> under the ambient inner product.
pub fn induced_metric(jet: &Jet3, space: &AmbientSpace) -> Result<DMatrix<f64>> {
    let m = jet.d1.len();
    let g = DMatrix::from_fn(m, m, |i, j| space.inner(&jet.d1[i], &jet.d1[j]));
    if g.clone().cholesky().is_none() {
        return Err(GeomError::IndefiniteMetric);
    }
    Ok(g)
}

/// Kaehler form restricted to the coordinate tangents: the immersion is
/// Lagrangian exactly when this vanishes.
pub fn lagrangian_residual(jet: &Jet3, space: &AmbientSpace) -> f64 {
    let m = jet.d1.len();
    let mut worst = 0.0f64;
    for i in 0..m {
        let jdi = space.apply_j(&jet.d1[i]);
        for j in i + 1..m {
            worst = worst.max(space.inner(&jdi, &jet.d1[j]).abs());
        }
    }
    worst
}

/// Residuals specific to lift charts: how far the position-direction
/// component of D_X Y is from -epsilon <X, Y>, and the size of the
/// component along J times the position (zero for horizontal data).
#[derive(Debug, Clone, Copy, Default)]
pub struct LiftDiagnostics {
    pub position_defect: f64,
    pub contact_defect: f64,
}

/// Second fundamental form as a cubic tensor in the given frame.
///
/// The coordinate second derivatives are expanded in the full ambient
/// basis {E_A, J E_A} (plus {L, J L} for lift charts, L the position),
/// the J-tangent components are the coordinate cubic coefficients, and
/// the frame change pushes both slots to the orthonormal frame. For
/// lifts, the position components are the quadric's own umbilical second
/// fundamental form and are reported as diagnostics instead of entering
/// the cubic.
pub fn second_fundamental_form_full(
    jet: &Jet3,
    space: &AmbientSpace,
    frame: &TangentFrame,
) -> Result<(CubicTensor, LiftDiagnostics)> {
    let m = jet.d1.len();
    if m != space.n {
        return Err(GeomError::DimensionMismatch {
            expected: space.n,
            got: m,
            context: "Lagrangian submanifold dimension",
        });
    }
    let dim = space.model_dim();
    let lag = lagrangian_residual(jet, space);
    if lag > 1e-5 {
        return Err(GeomError::NotLagrangian { residual: lag });
    }
    let d2 = jet
        .d2
        .as_ref()
        .ok_or_else(|| GeomError::Precondition("second fundamental form needs an order-2 jet".into()))?;

    // Expansion basis: tangent frame, its J-rotation, and for lifts the
    // position direction and its J-rotation.
    let mut cols: Vec<AmbientVector> = Vec::with_capacity(dim);
    cols.extend(frame.vectors.iter().cloned());
    cols.extend(frame.vectors.iter().map(|v| space.apply_j(v)));
    if space.uses_lift() {
        cols.push(jet.value.clone());
        cols.push(space.apply_j(&jet.value));
    }
    if cols.len() != dim {
        return Err(GeomError::DimensionMismatch {
            expected: dim,
            got: cols.len(),
            context: "expansion basis",
        });
    }
    let w = DMatrix::from_fn(dim, dim, |r, c| cols[c][r]);
    let svd = w.clone().svd(false, false);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smin < 1e-8 * smax.max(1.0) {
        return Err(GeomError::NotLagrangian { residual: lag.max(smin) });
    }
    let lu = w.lu();

    // Validity gate: a degenerate lift shows up as a non-positive metric.
    induced_metric(jet, space)?;

    // Solve for all second derivatives at once; column (a, b) with a <= b.
    let pairs: Vec<(usize, usize)> = (0..m).flat_map(|a| (a..m).map(move |b| (a, b))).collect();
    let rhs = DMatrix::from_fn(dim, pairs.len(), |r, c| d2[pairs[c].0][pairs[c].1][r]);
    let sol = lu
        .solve(&rhs)
        .ok_or(GeomError::Degenerate("expansion basis is numerically singular".to_string()))?;

    // Coordinate-slot cubic coefficients and lift diagnostics.
    let mut hcoord = vec![vec![vec![0.0; m]; m]; m];
    let mut pos_coord = vec![vec![0.0; m]; m];
    let mut contact_coord = vec![vec![0.0; m]; m];
    for (col, &(a, b)) in pairs.iter().enumerate() {
        for c in 0..m {
            hcoord[c][a][b] = sol[(m + c, col)];
            hcoord[c][b][a] = sol[(m + c, col)];
        }
        if space.uses_lift() {
            pos_coord[a][b] = sol[(2 * m, col)];
            pos_coord[b][a] = sol[(2 * m, col)];
            contact_coord[a][b] = sol[(2 * m + 1, col)];
            contact_coord[b][a] = sol[(2 * m + 1, col)];
        }
    }

    // Push the two symmetric slots from coordinates to the frame. The
    // normal slot c is already a frame index.
    let bmat = &frame.coeffs;
    let push = |mat: &Vec<Vec<f64>>| -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; m]; m];
        for (aa, row) in out.iter_mut().enumerate() {
            for (bb, entry) in row.iter_mut().enumerate() {
                let mut acc = 0.0;
                for a in 0..m {
                    for b in 0..m {
                        acc += bmat[(a, aa)] * bmat[(b, bb)] * mat[a][b];
                    }
                }
                *entry = acc;
            }
        }
        out
    };

    let mut raw = vec![vec![vec![0.0; m]; m]; m];
    for c in 0..m {
        let pushed = push(&hcoord[c]);
        for a in 0..m {
            for b in 0..m {
                raw[c][a][b] = pushed[a][b];
            }
        }
    }

    let mut diag = LiftDiagnostics::default();
    if space.uses_lift() {
        let pos_frame = push(&pos_coord);
        let contact_frame = push(&contact_coord);
        for a in 0..m {
            for b in 0..m {
                let target = if a == b { -space.epsilon } else { 0.0 };
                diag.position_defect = diag.position_defect.max((pos_frame[a][b] - target).abs());
                diag.contact_defect = diag.contact_defect.max(contact_frame[a][b].abs());
            }
        }
    }

    Ok((CubicTensor::from_raw(raw), diag))
}

pub fn second_fundamental_form(
    jet: &Jet3,
    space: &AmbientSpace,
    frame: &TangentFrame,
) -> Result<CubicTensor> {
    second_fundamental_form_full(jet, space, frame).map(|(t, _)| t)
}
