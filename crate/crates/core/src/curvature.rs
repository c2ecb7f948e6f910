//! Intrinsic curvature: Gauss equation, scalar curvature of subspaces,
//! an independent metric-derivative Riemann oracle, and the Codazzi
//! residual.
//!
//! Two independent routes produce the Riemann tensor of a submanifold:
//!
//! - the Gauss equation applied to the cubic form, which is how the
//!   delta-invariant pipeline computes curvature, and
//! - central finite differences of the induced metric through
//!   Christoffel symbols, which never looks at the second fundamental
//!   form at all.
//!
//! Keeping both routes alive is the point: they share no code beyond
//! chart evaluation, so their agreement certifies the shape pipeline.
//!
//! Conventions: R[i][j][k][l] = <R(e_i, e_j) e_k, e_l> ordered so that
//! the sectional curvature of a unit plane is K(e_i ^ e_j) =
//! R[i][j][j][i], and the round unit sphere has K = +1.

use nalgebra::DMatrix;

use crate::ambient::AmbientSpace;
use crate::chart::ImmersionChart;
use crate::error::{GeomError, Result};
use crate::jets::{evaluate_jet, orthonormal_frame, FdSteps};
use crate::shape::{induced_metric, CubicTensor};

/// Which computation produced a curvature operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurvatureSource {
    GaussEquation,
    MetricFiniteDifference,
    Analytic,
}

/// Riemann tensor components in an orthonormal frame.
#[derive(Debug, Clone)]
pub struct CurvatureOperator {
    pub n: usize,
    /// r[i][j][k][l] = <R(e_i, e_j) e_k, e_l>.
    pub r: Vec<Vec<Vec<Vec<f64>>>>,
    pub source: CurvatureSource,
}

impl CurvatureOperator {
    pub fn new(r: Vec<Vec<Vec<Vec<f64>>>>, source: CurvatureSource) -> Self {
        let n = r.len();
        CurvatureOperator { n, r, source }
    }

    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.r[i][j][k][l]
    }

    /// Sectional curvature of the coordinate plane e_i ^ e_j.
    pub fn sectional(&self, i: usize, j: usize) -> f64 {
        self.r[i][j][j][i]
    }

    /// Sectional curvature of the plane spanned by orthonormal u, v in
    /// frame coordinates.
    pub fn sectional_of(&self, u: &[f64], v: &[f64]) -> f64 {
        let n = self.n;
        let mut acc = 0.0;
        for i in 0..n {
            if u[i] == 0.0 {
                continue;
            }
            for j in 0..n {
                if v[j] == 0.0 {
                    continue;
                }
                for k in 0..n {
                    for l in 0..n {
                        acc += u[i] * v[j] * v[k] * u[l] * self.r[i][j][k][l];
                    }
                }
            }
        }
        acc
    }

    /// Worst violation of the algebraic identities: antisymmetry in the
    /// first and last pairs, pair exchange, and the first Bianchi sum.
    pub fn symmetry_residual(&self) -> f64 {
        let n = self.n;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let v = self.r[i][j][k][l];
                        worst = worst.max((v + self.r[j][i][k][l]).abs());
                        worst = worst.max((v + self.r[i][j][l][k]).abs());
                        worst = worst.max((v - self.r[k][l][i][j]).abs());
                        let bianchi = v + self.r[j][k][i][l] + self.r[k][i][j][l];
                        worst = worst.max(bianchi.abs());
                    }
                }
            }
        }
        worst
    }

    /// Largest absolute component, used to scale comparison tolerances.
    pub fn max_abs(&self) -> f64 {
        let mut m = 0.0f64;
        for plane in &self.r {
            for row in plane {
                for col in row {
                    for &v in col {
                        m = m.max(v.abs());
                    }
                }
            }
        }
        m
    }

    /// Entrywise distance to another operator in the same frame.
    pub fn distance(&self, other: &CurvatureOperator) -> f64 {
        let n = self.n;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        worst = worst.max((self.r[i][j][k][l] - other.r[i][j][k][l]).abs());
                    }
                }
            }
        }
        worst
    }
}

/// Riemann tensor from the Gauss equation of a Lagrangian submanifold
/// in a space form with curvature constant c:
///
///   R[i][j][k][l] = c (d_il d_jk - d_ik d_jl)
///                 + sum_C (h^C_il h^C_jk - h^C_ik h^C_jl).
pub fn curvature_from_gauss(cubic: &CubicTensor, c: f64) -> CurvatureOperator {
    let n = cubic.n;
    let mut r = vec![vec![vec![vec![0.0; n]; n]; n]; n];
    let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let mut acc = c * (d(i, l) * d(j, k) - d(i, k) * d(j, l));
                    for cc in 0..n {
                        acc += cubic.get(cc, i, l) * cubic.get(cc, j, k)
                            - cubic.get(cc, i, k) * cubic.get(cc, j, l);
                    }
                    r[i][j][k][l] = acc;
                }
            }
        }
    }
    CurvatureOperator::new(r, CurvatureSource::GaussEquation)
}

/// Scalar curvature of the subspace spanned by an orthonormal set of
/// frame-coordinate vectors: tau = sum_{a<b} K(v_a ^ v_b).
pub fn tau_subspace(curv: &CurvatureOperator, basis: &[Vec<f64>]) -> Result<f64> {
    for v in basis {
        if v.len() != curv.n {
            return Err(GeomError::DimensionMismatch {
                expected: curv.n,
                got: v.len(),
                context: "tau subspace basis vector",
            });
        }
    }
    let mut deviation = 0.0f64;
    for (a, va) in basis.iter().enumerate() {
        for (b, vb) in basis.iter().enumerate() {
            let dot: f64 = va.iter().zip(vb).map(|(x, y)| x * y).sum();
            let target = if a == b { 1.0 } else { 0.0 };
            deviation = deviation.max((dot - target).abs());
        }
    }
    if deviation > 1e-8 {
        return Err(GeomError::NotOrthonormal { deviation });
    }
    let mut tau = 0.0;
    for a in 0..basis.len() {
        for b in a + 1..basis.len() {
            tau += curv.sectional_of(&basis[a], &basis[b]);
        }
    }
    Ok(tau)
}

/// Scalar curvature of the whole tangent space in the frame basis.
pub fn tau_full(curv: &CurvatureOperator) -> f64 {
    let mut tau = 0.0;
    for a in 0..curv.n {
        for b in a + 1..curv.n {
            tau += self_sectional(curv, a, b);
        }
    }
    tau
}

fn self_sectional(curv: &CurvatureOperator, i: usize, j: usize) -> f64 {
    curv.r[i][j][j][i]
}

/// Step for metric finite differences in the Riemann oracle. Coarser
/// than the jet steps because two more derivative orders are stacked on
/// top of the metric values.
const RIEMANN_STEP: f64 = 1e-2;

const D1_OFFS: [(f64, f64); 4] = [(-2.0, 1.0), (-1.0, -8.0), (1.0, 8.0), (2.0, -1.0)];

/// Independent Riemann tensor from metric derivatives only: Christoffel
/// symbols of the induced metric via central differences, curvature from
/// their derivatives, then a push to the same orthonormal frame the
/// Gauss route uses. Shares nothing with the cubic-form pipeline except
/// chart evaluation.
pub fn riemann_fd(chart: &ImmersionChart, params: &[f64], space: &AmbientSpace, steps: FdSteps) -> Result<CurvatureOperator> {
    let m = chart.param_dim();
    let h = RIEMANN_STEP;

    let metric_at = |u: &[f64]| -> Result<DMatrix<f64>> {
        let jet = evaluate_jet(chart, u, 1, steps)?;
        induced_metric(&jet, space)
    };

    let shift = |u: &[f64], moves: &[(usize, f64)]| -> Vec<f64> {
        let mut v = u.to_vec();
        for &(idx, delta) in moves {
            v[idx] += delta;
        }
        v
    };

    let g0 = metric_at(params)?;
    let ginv = g0
        .clone()
        .try_inverse()
        .ok_or(GeomError::DegenerateImmersion)?;

    // dg[e][d][c] = partial_e g_dc.
    let mut dg = vec![vec![vec![0.0; m]; m]; m];
    for e in 0..m {
        let mut acc = DMatrix::<f64>::zeros(m, m);
        for &(s, w) in &D1_OFFS {
            acc += metric_at(&shift(params, &[(e, s * h)]))? * w;
        }
        acc /= 12.0 * h;
        for d in 0..m {
            for c in 0..m {
                dg[e][d][c] = acc[(d, c)];
            }
        }
    }

    // ddg[e][f][d][c] = partial_e partial_f g_dc, pure and mixed.
    let mut ddg = vec![vec![vec![vec![0.0; m]; m]; m]; m];
    for e in 0..m {
        let mut acc = &g0 * -30.0;
        for &(s, w) in &[(-2.0, -1.0), (-1.0, 16.0), (1.0, 16.0), (2.0, -1.0)] {
            acc += metric_at(&shift(params, &[(e, s * h)]))? * w;
        }
        acc /= 12.0 * h * h;
        for d in 0..m {
            for c in 0..m {
                ddg[e][e][d][c] = acc[(d, c)];
            }
        }
    }
    for e in 0..m {
        for f in e + 1..m {
            let mut acc = DMatrix::<f64>::zeros(m, m);
            for &(s, ws) in &D1_OFFS {
                for &(t, wt) in &D1_OFFS {
                    acc += metric_at(&shift(params, &[(e, s * h), (f, t * h)]))? * (ws * wt);
                }
            }
            acc /= 144.0 * h * h;
            for d in 0..m {
                for c in 0..m {
                    ddg[e][f][d][c] = acc[(d, c)];
                    ddg[f][e][d][c] = acc[(d, c)];
                }
            }
        }
    }

    // Christoffels of the first kind and their derivatives.
    let gamma_low =
        |d: usize, b: usize, c: usize, dg: &Vec<Vec<Vec<f64>>>| 0.5 * (dg[b][d][c] + dg[c][d][b] - dg[d][b][c]);
    // gamma[a][b][c] = Gamma^a_{bc}.
    let mut gamma = vec![vec![vec![0.0; m]; m]; m];
    for a in 0..m {
        for b in 0..m {
            for c in 0..m {
                let mut acc = 0.0;
                for d in 0..m {
                    acc += ginv[(a, d)] * gamma_low(d, b, c, &dg);
                }
                gamma[a][b][c] = acc;
            }
        }
    }

    // d(g^{-1})/du_e = -g^{-1} (dg/du_e) g^{-1}.
    let mut dginv = vec![DMatrix::<f64>::zeros(m, m); m];
    for e in 0..m {
        let dge = DMatrix::from_fn(m, m, |d, c| dg[e][d][c]);
        dginv[e] = -&ginv * dge * &ginv;
    }

    // dgamma[e][a][b][c] = partial_e Gamma^a_{bc}.
    let mut dgamma = vec![vec![vec![vec![0.0; m]; m]; m]; m];
    for e in 0..m {
        for a in 0..m {
            for b in 0..m {
                for c in 0..m {
                    let mut acc = 0.0;
                    for d in 0..m {
                        let low = gamma_low(d, b, c, &dg);
                        let dlow = 0.5 * (ddg[e][b][d][c] + ddg[e][c][d][b] - ddg[e][d][b][c]);
                        acc += dginv[e][(a, d)] * low + ginv[(a, d)] * dlow;
                    }
                    dgamma[e][a][b][c] = acc;
                }
            }
        }
    }

    // R(d_a, d_b) d_c = (d_a Gamma^e_bc - d_b Gamma^e_ac
    //                   + Gamma^f_bc Gamma^e_af - Gamma^f_ac Gamma^e_bf) d_e,
    // lowered with the metric so r_coord[a][b][c][d] = <R(d_a,d_b)d_c, d_d>.
    let mut r_coord = vec![vec![vec![vec![0.0; m]; m]; m]; m];
    for a in 0..m {
        for b in 0..m {
            for c in 0..m {
                for e in 0..m {
                    let mut up = dgamma[a][e][b][c] - dgamma[b][e][a][c];
                    for f in 0..m {
                        up += gamma[f][b][c] * gamma[e][a][f] - gamma[f][a][c] * gamma[e][b][f];
                    }
                    for d in 0..m {
                        r_coord[a][b][c][d] += up * g0[(e, d)];
                    }
                }
            }
        }
    }

    // Push all four slots to the deterministic orthonormal frame, the
    // same one the Gauss route expresses its tensor in.
    let jet = evaluate_jet(chart, params, 1, steps)?;
    let frame = orthonormal_frame(&jet, space)?;
    let r = push_four(&r_coord, &frame.coeffs);
    Ok(CurvatureOperator::new(r, CurvatureSource::MetricFiniteDifference))
}

/// Contract every slot of a coordinate 4-tensor with the frame matrix.
fn push_four(t: &[Vec<Vec<Vec<f64>>>], bmat: &DMatrix<f64>) -> Vec<Vec<Vec<Vec<f64>>>> {
    let m = t.len();
    let mut cur = t.to_vec();
    // Rotate one slot at a time; after 4 passes every slot is pushed.
    for _slot in 0..4 {
        let mut next = vec![vec![vec![vec![0.0; m]; m]; m]; m];
        // Contract the first slot and cycle it to the back, so the
        // tensor order is preserved after four passes.
        for bn in 0..m {
            for j in 0..m {
                for k in 0..m {
                    for l in 0..m {
                        let mut acc = 0.0;
                        for a in 0..m {
                            acc += bmat[(a, bn)] * cur[a][j][k][l];
                        }
                        next[j][k][l][bn] = acc;
                    }
                }
            }
        }
        cur = next;
    }
    cur
}

/// Codazzi residual of a chart at a point: the worst component of
/// (nabla_X h)(Y, Z) - (nabla_Y h)(X, Z) over frame directions, pushed
/// from coordinate finite differences of the coordinate cubic form
///
///   C_abc = <d2_ab + eps g_ab L, J d1_c>
///
/// (the position correction only matters for lift charts) using the
/// covariant derivative
///
///   (nabla_a C)_bcd = d_a C_bcd - G^e_ab C_ecd - G^e_ac C_bed - G^e_ad C_bce.
///
/// For a Lagrangian immersion into a space form the normal part of the
/// ambient curvature vanishes, so this residual is a pure consistency
/// check on constructed charts.
pub fn codazzi_residual(chart: &ImmersionChart, params: &[f64], space: &AmbientSpace, steps: FdSteps) -> Result<f64> {
    let m = chart.param_dim();
    let h = steps.h2;
    let eps = space.epsilon;

    let cubic_at = |u: &[f64]| -> Result<Vec<Vec<Vec<f64>>>> {
        let jet = evaluate_jet(chart, u, 2, steps)?;
        let d2 = jet.d2.as_ref().unwrap();
        let g = induced_metric(&jet, space)?;
        let jd1: Vec<_> = jet.d1.iter().map(|v| space.apply_j(v)).collect();
        let mut c = vec![vec![vec![0.0; m]; m]; m];
        for a in 0..m {
            for b in 0..m {
                let corrected = &d2[a][b] + &jet.value * (eps * g[(a, b)]);
                for d in 0..m {
                    c[a][b][d] = space.inner(&corrected, &jd1[d]);
                }
            }
        }
        Ok(c)
    };

    let shift = |u: &[f64], idx: usize, delta: f64| -> Vec<f64> {
        let mut v = u.to_vec();
        v[idx] += delta;
        v
    };

    let c0 = cubic_at(params)?;

    // dc[a][b][c][d] = partial_a C_bcd.
    let mut dc = vec![vec![vec![vec![0.0; m]; m]; m]; m];
    for a in 0..m {
        let mut acc = vec![vec![vec![0.0; m]; m]; m];
        for &(s, w) in &D1_OFFS {
            let cs = cubic_at(&shift(params, a, s * h))?;
            for b in 0..m {
                for c in 0..m {
                    for d in 0..m {
                        acc[b][c][d] += w * cs[b][c][d];
                    }
                }
            }
        }
        for b in 0..m {
            for c in 0..m {
                for d in 0..m {
                    dc[a][b][c][d] = acc[b][c][d] / (12.0 * h);
                }
            }
        }
    }

    // Christoffels from metric first derivatives at the same step.
    let metric_at = |u: &[f64]| -> Result<DMatrix<f64>> {
        let jet = evaluate_jet(chart, u, 1, steps)?;
        induced_metric(&jet, space)
    };
    let g0 = metric_at(params)?;
    let ginv = g0.try_inverse().ok_or(GeomError::DegenerateImmersion)?;
    let mut dg = vec![vec![vec![0.0; m]; m]; m];
    for e in 0..m {
        let mut acc = DMatrix::<f64>::zeros(m, m);
        for &(s, w) in &D1_OFFS {
            acc += metric_at(&shift(params, e, s * h))? * w;
        }
        acc /= 12.0 * h;
        for d in 0..m {
            for c in 0..m {
                dg[e][d][c] = acc[(d, c)];
            }
        }
    }
    let mut gamma = vec![vec![vec![0.0; m]; m]; m];
    for a in 0..m {
        for b in 0..m {
            for c in 0..m {
                let mut acc = 0.0;
                for d in 0..m {
                    acc += ginv[(a, d)] * 0.5 * (dg[b][d][c] + dg[c][d][b] - dg[d][b][c]);
                }
                gamma[a][b][c] = acc;
            }
        }
    }

    // Covariant derivative and its antisymmetrization in (a, b).
    let nabla = |a: usize, b: usize, c: usize, d: usize| -> f64 {
        let mut acc = dc[a][b][c][d];
        for e in 0..m {
            acc -= gamma[e][a][b] * c0[e][c][d];
            acc -= gamma[e][a][c] * c0[b][e][d];
            acc -= gamma[e][a][d] * c0[b][c][e];
        }
        acc
    };
    let mut resid = vec![vec![vec![vec![0.0; m]; m]; m]; m];
    for a in 0..m {
        for b in 0..m {
            for c in 0..m {
                for d in 0..m {
                    resid[a][b][c][d] = nabla(a, b, c, d) - nabla(b, a, c, d);
                }
            }
        }
    }

    let jet = evaluate_jet(chart, params, 1, steps)?;
    let frame = orthonormal_frame(&jet, space)?;
    let pushed = push_four(&resid, &frame.coeffs);
    let mut worst = 0.0f64;
    for plane in &pushed {
        for row in plane {
            for col in row {
                for &v in col {
                    worst = worst.max(v.abs());
                }
            }
        }
    }
    Ok(worst)
}
