//! Classification of ideal points by their second fundamental form.
//!
//! At a point where the bound delta(2, n-2) <= n^2(n-2)/(4(n-1)) H^2
//! + 2(n-2) c is attained, the cubic form admits an adapted orthonormal
//! basis e_1, ..., e_n with
//!
//!   h(e_1, e_1) = gamma J e_1,
//!   h(e_1, e_2) = (n lambda - gamma) J e_2,
//!   h(e_2, e_2) = (n lambda - gamma) J e_1 + n mu J e_2,
//!   h(e_1, e_i) = lambda J e_i,   h(e_2, e_i) = mu J e_i   (i >= 3),
//!   h(e_i, e_j) = delta_ij (lambda J e_1 + mu J e_2) + sum_k h^k_ij J e_k,
//!
//! with the remaining block totally symmetric and traceless, gamma >= 0
//! and gamma >= (2n/3) lambda. Ideal points fall into three types:
//!
//!   I.   minimal points, H = 0;
//!   II.  h(JH, JH) parallel to H and the operator K proportional to
//!        the identity, which forces gamma = (n-1) lambda and mu = 0;
//!   III. the generic type, where the plane spanned by e_1, e_2 is
//!        determined by H together with either h(JH, JH) or the
//!        distinguished eigendirection of K.
//!
//! Here K(X) = proj J h(JH, X) restricted to the hyperplane orthogonal
//! to JH. Its spectrum has an (n-2)-fold cluster at 2(n-1)/n times
//! (lambda^2 + mu^2); type II is exactly the degenerate situation where
//! the remaining eigenvalue joins the cluster and h(JH, JH) gives no
//! second direction.
//!
//! The classifier recovers the adapted basis numerically: it builds the
//! distinguished plane from the invariant data, maximizes the cubic
//! form phi(u) = <h(u, u), Ju> on the circle to find e_1, and completes
//! the frame deterministically. Verdicts carry explicit residuals and
//! margins so borderline points are reported as ambiguous rather than
//! silently forced into a case.

use nalgebra::{DMatrix, DVector};

use crate::error::{GeomError, Result};
use crate::shape::{extract_adapted_lenient, mean_direction_pattern_residual, AdaptedCoefficients, CubicTensor};

/// H^2 below this is treated as minimal (case I).
pub const MINIMAL_TOL: f64 = 1e-10;
/// Relative residual below which a pattern is considered matched.
pub const PATTERN_TOL: f64 = 1e-6;

/// The operator K(X) = proj J h(JH, X) on the orthogonal complement of
/// JH, returned as its matrix in the provided orthonormal basis of that
/// complement, together with the full-space matrix column form.
pub fn k_tensor(cubic: &CubicTensor, basis_perp: &[Vec<f64>]) -> DMatrix<f64> {
    let n = cubic.n;
    let m = &cubic.mean_vector;
    // Full-coordinates matrix: K[c][b] = sum_a m_a T(a, b, c).
    let mut full = DMatrix::<f64>::zeros(n, n);
    for c in 0..n {
        for b in 0..n {
            let mut acc = 0.0;
            for (a, ma) in m.iter().enumerate() {
                acc += ma * cubic.get(a, b, c);
            }
            full[(c, b)] = acc;
        }
    }
    let k = basis_perp.len();
    let mut out = DMatrix::<f64>::zeros(k, k);
    for (i, bi) in basis_perp.iter().enumerate() {
        for (j, bj) in basis_perp.iter().enumerate() {
            let mut acc = 0.0;
            for c in 0..n {
                for b in 0..n {
                    acc += bi[c] * full[(c, b)] * bj[b];
                }
            }
            out[(i, j)] = acc;
        }
    }
    out
}

/// Components of h(JH, JH) in the normal frame J e_C.
pub fn h_jh_jh(cubic: &CubicTensor) -> Vec<f64> {
    // JH has tangent coordinates -m; the sign cancels in the square.
    cubic.apply(&cubic.mean_vector, &cubic.mean_vector)
}

/// Deterministic orthonormal completion of the rows already present in
/// `rows`: candidate coordinate axes are orthogonalized in order and
/// accepted when they keep a stable component.
fn complete_basis(n: usize, rows: &mut Vec<Vec<f64>>) {
    let mut axis = 0;
    while rows.len() < n && axis < n {
        let mut v = vec![0.0; n];
        v[axis] = 1.0;
        axis += 1;
        for _ in 0..2 {
            for r in rows.iter() {
                let p: f64 = v.iter().zip(r).map(|(a, b)| a * b).sum();
                for (vc, rc) in v.iter_mut().zip(r) {
                    *vc -= p * rc;
                }
            }
        }
        let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            for vc in v.iter_mut() {
                *vc /= norm;
            }
            rows.push(v);
        }
    }
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in v.iter_mut() {
            *x /= norm;
        }
    }
    norm
}

fn project_out(v: &mut [f64], unit: &[f64]) {
    let p: f64 = v.iter().zip(unit).map(|(a, b)| a * b).sum();
    for (vc, uc) in v.iter_mut().zip(unit) {
        *vc -= p * uc;
    }
}

/// Orthonormal basis of the hyperplane orthogonal to `unit`.
fn hyperplane_basis(unit: &[f64]) -> Vec<Vec<f64>> {
    let n = unit.len();
    let mut rows = vec![unit.to_vec()];
    complete_basis(n, &mut rows);
    rows.remove(0);
    rows
}

/// An adapted orthonormal frame together with the tensor rewritten in
/// it and the extracted normal-form data.
#[derive(Debug, Clone)]
pub struct AdaptedFrame {
    /// Rows are e_1, ..., e_n in the coordinates of the input frame.
    pub basis: Vec<Vec<f64>>,
    pub coeffs: AdaptedCoefficients,
    pub rotated: CubicTensor,
    /// Eigenvalues of K on the complement of JH, ascending.
    pub k_spectrum: Vec<f64>,
    /// Relative parallelism defect of h(JH, JH) against H.
    pub parallel_residual: f64,
    /// Relative spread of the K spectrum.
    pub k_isotropy_residual: f64,
}

/// Residuals of the invariant data that decide between cases II and
/// III, computable before any frame is chosen.
fn invariant_residuals(cubic: &CubicTensor) -> (Vec<f64>, f64, f64, Vec<f64>, Vec<Vec<f64>>) {
    let m = &cubic.mean_vector;
    let mut mhat = m.clone();
    normalize(&mut mhat);

    let w = h_jh_jh(cubic);
    let wnorm: f64 = w.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut wperp = w.clone();
    project_out(&mut wperp, &mhat);
    let wperp_norm: f64 = wperp.iter().map(|x| x * x).sum::<f64>().sqrt();
    let parallel_residual = if wnorm > 0.0 { wperp_norm / wnorm } else { 0.0 };

    let perp = hyperplane_basis(&mhat);
    let kmat = k_tensor(cubic, &perp);
    let sym = (kmat.clone() + kmat.transpose()) * 0.5;
    let mut eig: Vec<f64> = sym.symmetric_eigen().eigenvalues.iter().copied().collect();
    eig.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let kmax = eig.iter().fold(0.0f64, |acc, e| acc.max(e.abs()));
    let spread = eig.last().unwrap() - eig.first().unwrap();
    let k_isotropy = spread / kmax.max(1e-9);

    (wperp, parallel_residual, k_isotropy, eig, perp)
}

/// Assemble the frame (e_1(theta), e_2(theta), completion) for a
/// rotation angle on the distinguished circle and report the
/// normal-form pattern residual of the tensor in that frame. The
/// residual vanishes exactly when e_1(theta) is the adapted direction,
/// for any deterministic completion, so the angle is found by
/// minimizing it; the cubic form itself can peak elsewhere on the
/// circle, which rules out a naive maximization of <h(u,u), Ju>.
fn frame_at_angle(cubic: &CubicTensor, u1: &[f64], u2: &[f64], theta: f64) -> Result<AdaptedCandidate> {
    let n = cubic.n;
    let e1: Vec<f64> = (0..n).map(|i| theta.cos() * u1[i] + theta.sin() * u2[i]).collect();
    let e2: Vec<f64> = (0..n).map(|i| -theta.sin() * u1[i] + theta.cos() * u2[i]).collect();
    let mut rows = vec![e1, e2];
    complete_basis(n, &mut rows);
    if rows.len() != n {
        return Err(GeomError::Degenerate("could not complete adapted frame".into()));
    }
    let rot = DMatrix::<f64>::from_fn(n, n, |r, c| rows[c][r]);
    let rotated = cubic.rotate(&rot);
    let coeffs = extract_adapted_lenient(&rotated)?;
    Ok(AdaptedCandidate { rows, rotated, coeffs })
}

struct AdaptedCandidate {
    rows: Vec<Vec<f64>>,
    rotated: CubicTensor,
    coeffs: AdaptedCoefficients,
}

/// Critical angles of phi(theta) = <h(u, u), Ju> on the circle spanned
/// by u1, u2, as angles in [0, pi) (each describes a frame line; the
/// opposite direction negates phi). The derivative condition is
/// <h(u, u), J u_perp> = 0, a degree-three trigonometric polynomial
/// found by dense scan plus bisection.
pub fn circle_critical_angles(cubic: &CubicTensor, u1: &[f64], u2: &[f64]) -> Vec<f64> {
    let t111 = cubic.eval3(u1, u1, u1);
    let t112 = cubic.eval3(u1, u1, u2);
    let t122 = cubic.eval3(u1, u2, u2);
    let t222 = cubic.eval3(u2, u2, u2);
    let g = |theta: f64| -> f64 {
        let (s, c) = theta.sin_cos();
        -c * c * s * t111 + (c * c * c - 2.0 * c * s * s) * t112
            + (2.0 * c * c * s - s * s * s) * t122
            + s * s * c * t222
    };
    let samples = 4096;
    let mut roots: Vec<f64> = Vec::new();
    let mut prev_theta = 0.0;
    let mut prev_val = g(0.0);
    for i in 1..=samples {
        let theta = i as f64 / samples as f64 * std::f64::consts::PI;
        let val = g(theta);
        if prev_val == 0.0 {
            roots.push(prev_theta);
        } else if prev_val * val < 0.0 {
            let (mut lo, mut hi) = (prev_theta, theta);
            let mut flo = prev_val;
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                let fmid = g(mid);
                if flo * fmid <= 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                    flo = fmid;
                }
            }
            roots.push(0.5 * (lo + hi));
        }
        prev_theta = theta;
        prev_val = val;
    }
    if roots.is_empty() {
        roots.push(0.0);
    }
    roots
}

/// Find the frame on the circle spanned by u1, u2 whose e_1 attains
/// the global maximum of phi(u) = <h(u, u), Ju>, the defining property
/// of the adapted direction. Every critical angle yields an exact
/// normal-form pattern (the in-plane consistency relations are
/// identities at critical points), so the pattern residual cannot
/// select the frame; maximality of gamma can and does. Signs are then
/// normalized to gamma >= 0 and mu >= 0.
fn best_frame_on_circle(cubic: &CubicTensor, u1: &[f64], u2: &[f64]) -> Result<AdaptedCandidate> {
    let n = cubic.n;
    let phi_at = |theta: f64| -> f64 {
        let u: Vec<f64> = (0..n).map(|i| theta.cos() * u1[i] + theta.sin() * u2[i]).collect();
        cubic.eval3(&u, &u, &u)
    };
    let roots = circle_critical_angles(cubic, u1, u2);
    let mut best_theta = roots[0];
    let mut best_phi = phi_at(roots[0]).abs();
    for &theta in roots.iter().skip(1) {
        let v = phi_at(theta).abs();
        if v > best_phi {
            best_phi = v;
            best_theta = theta;
        }
    }

    let mut cand = frame_at_angle(cubic, u1, u2, best_theta)?;
    // Resolve the sign ambiguities: a half turn flips gamma, an e_2
    // flip alone flips mu; the pattern residual is unchanged by both.
    if cand.coeffs.gamma < 0.0 {
        let rows = cand.rows.clone();
        cand = reframe(cubic, rows, true, false)?;
    }
    if cand.coeffs.mu < 0.0 {
        let rows = cand.rows.clone();
        cand = reframe(cubic, rows, false, true)?;
    }
    Ok(cand)
}

/// Rebuild a candidate after flipping e_1 (and, independently, e_2).
fn reframe(cubic: &CubicTensor, mut rows: Vec<Vec<f64>>, flip_e1: bool, flip_e2: bool) -> Result<AdaptedCandidate> {
    let n = cubic.n;
    if flip_e1 {
        for x in rows[0].iter_mut() {
            *x = -*x;
        }
    }
    if flip_e2 {
        for x in rows[1].iter_mut() {
            *x = -*x;
        }
    }
    rows.truncate(2);
    complete_basis(n, &mut rows);
    if rows.len() != n {
        return Err(GeomError::Degenerate("could not complete adapted frame".into()));
    }
    let rot = DMatrix::<f64>::from_fn(n, n, |r, c| rows[c][r]);
    let rotated = cubic.rotate(&rot);
    let coeffs = extract_adapted_lenient(&rotated)?;
    Ok(AdaptedCandidate { rows, rotated, coeffs })
}

/// Recover an adapted frame at a non-minimal point.
///
/// The distinguished plane is found from H plus the first available
/// invariant: the component of h(JH, JH) orthogonal to H when it is
/// appreciable, else the outlier eigendirection of K, else (type II)
/// the kernel direction of the residual cubic block. e_1 maximizes phi
/// on the circle of the plane, e_2 is its orthogonal complement with
/// the sign fixed so mu >= 0, and the frame closes with a deterministic
/// completion.
pub fn adapted_basis(cubic: &CubicTensor) -> Result<AdaptedFrame> {
    let n = cubic.n;
    if n < 3 {
        return Err(GeomError::DimensionMismatch { expected: 3, got: n, context: "adapted frame needs n >= 3" });
    }
    if cubic.h2 < MINIMAL_TOL {
        return Err(GeomError::MinimalPoint);
    }

    let mut mhat = cubic.mean_vector.clone();
    normalize(&mut mhat);
    let (mut wperp, parallel_residual, k_isotropy, eig, perp) = invariant_residuals(cubic);

    // Second direction of the distinguished plane, orthogonal to JH.
    let second: Option<Vec<f64>> = if parallel_residual > PATTERN_TOL {
        normalize(&mut wperp);
        Some(wperp)
    } else if k_isotropy > PATTERN_TOL {
        // Outlier eigenvalue: farthest from the median of the spectrum.
        let mut sorted = eig.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = sorted[sorted.len() / 2];
        let kmat = k_tensor(cubic, &perp);
        let sym = (kmat.clone() + kmat.transpose()) * 0.5;
        let se = sym.symmetric_eigen();
        let mut best_idx = 0;
        let mut best_dev = -1.0;
        for (i, ev) in se.eigenvalues.iter().enumerate() {
            let dev = (ev - median).abs();
            if dev > best_dev {
                best_dev = dev;
                best_idx = i;
            }
        }
        let coeffs: DVector<f64> = se.eigenvectors.column(best_idx).into();
        let mut v = vec![0.0; n];
        for (row, b) in perp.iter().enumerate() {
            for (vc, bc) in v.iter_mut().zip(b) {
                *vc += coeffs[row] * bc;
            }
        }
        normalize(&mut v);
        Some(v)
    } else {
        None
    };

    let cand = match second {
        Some(u2) => {
            // JH direction: tangent coordinates of JH are -m, but the
            // circle search covers both signs, so mhat works directly.
            best_frame_on_circle(cubic, &mhat, &u2)?
        }
        None => {
            // Type II: e_1 is the H direction with gamma >= 0, e_2 the
            // most degenerate direction of the residual block.
            let gamma_plus = cubic.eval3(&mhat, &mhat, &mhat);
            let e1: Vec<f64> = if gamma_plus >= 0.0 {
                mhat.clone()
            } else {
                mhat.iter().map(|x| -x).collect()
            };
            let perp1 = hyperplane_basis(&e1);
            let d = perp1.len();
            // Block cubic over the complement; its kernel direction is
            // the degenerate eigenvector of M_pq = sum B_p.. B_q.. .
            let mut mgram = DMatrix::<f64>::zeros(d, d);
            let b_entry = |p: usize, i: usize, j: usize| -> f64 {
                let mut acc = 0.0;
                for a in 0..n {
                    for bb in 0..n {
                        for c in 0..n {
                            acc += perp1[p][a] * perp1[i][bb] * perp1[j][c] * cubic.get(a, bb, c);
                        }
                    }
                }
                acc
            };
            let mut entries = vec![vec![vec![0.0; d]; d]; d];
            for p in 0..d {
                for i in 0..d {
                    for j in 0..d {
                        entries[p][i][j] = b_entry(p, i, j);
                    }
                }
            }
            for p in 0..d {
                for q in 0..d {
                    let mut acc = 0.0;
                    for i in 0..d {
                        for j in 0..d {
                            acc += entries[p][i][j] * entries[q][i][j];
                        }
                    }
                    mgram[(p, q)] = acc;
                }
            }
            let se = mgram.symmetric_eigen();
            let mut best_idx = 0;
            let mut best = f64::INFINITY;
            for (i, ev) in se.eigenvalues.iter().enumerate() {
                if *ev < best {
                    best = *ev;
                    best_idx = i;
                }
            }
            let coeffs: DVector<f64> = se.eigenvectors.column(best_idx).into();
            let mut e2 = vec![0.0; n];
            for (row, b) in perp1.iter().enumerate() {
                for (vc, bc) in e2.iter_mut().zip(b) {
                    *vc += coeffs[row] * bc;
                }
            }
            normalize(&mut e2);
            // Deterministic sign: largest-magnitude coordinate positive.
            let lead = e2
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap())
                .map(|(i, _)| i)
                .unwrap_or(0);
            if e2[lead] < 0.0 {
                for x in e2.iter_mut() {
                    *x = -*x;
                }
            }
            let mut rows = vec![e1, e2];
            complete_basis(n, &mut rows);
            if rows.len() != n {
                return Err(GeomError::Degenerate("could not complete adapted frame".into()));
            }
            let rot = DMatrix::<f64>::from_fn(n, n, |r, c| rows[c][r]);
            let rotated = cubic.rotate(&rot);
            let coeffs = extract_adapted_lenient(&rotated)?;
            AdaptedCandidate { rows, rotated, coeffs }
        }
    };

    Ok(AdaptedFrame {
        basis: cand.rows,
        coeffs: cand.coeffs,
        rotated: cand.rotated,
        k_spectrum: eig,
        parallel_residual,
        k_isotropy_residual: k_isotropy,
    })
}

/// Verdict of the pointwise classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseVerdict {
    /// Bound not attained within tolerance.
    NotIdeal,
    /// Ideal and minimal.
    MinimalI,
    /// Ideal with h(JH, JH) parallel to H and isotropic K.
    CaseII,
    /// Ideal, generic type.
    CaseIII,
    /// A deciding quantity sits within a factor two of its threshold.
    Ambiguous,
}

impl std::fmt::Display for CaseVerdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            CaseVerdict::NotIdeal => "not-ideal",
            CaseVerdict::MinimalI => "I",
            CaseVerdict::CaseII => "II",
            CaseVerdict::CaseIII => "III",
            CaseVerdict::Ambiguous => "ambiguous",
        };
        write!(f, "{s}")
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ClassifyOpts {
    /// |rhs - delta| above which the point is not ideal.
    pub ideal_tol: f64,
    /// H^2 below which the point counts as minimal.
    pub minimal_tol: f64,
    /// Relative residual for the case II invariants.
    pub pattern_tol: f64,
    /// Quantities within this factor of a threshold give Ambiguous.
    pub ambiguity_factor: f64,
}

impl Default for ClassifyOpts {
    fn default() -> Self {
        ClassifyOpts {
            ideal_tol: 1e-4,
            minimal_tol: MINIMAL_TOL,
            pattern_tol: PATTERN_TOL,
            ambiguity_factor: 2.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CaseClassification {
    pub verdict: CaseVerdict,
    pub h2: f64,
    /// Residual of the best-matching normal-form pattern.
    pub pattern_residual: f64,
    pub frame: Option<AdaptedFrame>,
    /// Case II pattern coefficient lambda, when that pattern applies.
    pub case2_lambda: Option<f64>,
}

/// Classify a point given its cubic form and the ideality residual
/// |rhs - delta| computed by the invariant pipeline.
pub fn classify_case(cubic: &CubicTensor, ideality_residual: f64, opts: &ClassifyOpts) -> Result<CaseClassification> {
    let amb = opts.ambiguity_factor;
    if ideality_residual.abs() > opts.ideal_tol {
        let verdict = if ideality_residual.abs() <= amb * opts.ideal_tol {
            CaseVerdict::Ambiguous
        } else {
            CaseVerdict::NotIdeal
        };
        return Ok(CaseClassification {
            verdict,
            h2: cubic.h2,
            pattern_residual: f64::NAN,
            frame: None,
            case2_lambda: None,
        });
    }

    if cubic.h2 < opts.minimal_tol / amb {
        return Ok(CaseClassification {
            verdict: CaseVerdict::MinimalI,
            h2: cubic.h2,
            pattern_residual: 0.0,
            frame: None,
            case2_lambda: None,
        });
    }
    if cubic.h2 <= opts.minimal_tol * amb {
        return Ok(CaseClassification {
            verdict: CaseVerdict::Ambiguous,
            h2: cubic.h2,
            pattern_residual: f64::NAN,
            frame: None,
            case2_lambda: None,
        });
    }

    let frame = adapted_basis(cubic)?;
    let pr = frame.parallel_residual;
    let kr = frame.k_isotropy_residual;
    let both_small = pr <= opts.pattern_tol && kr <= opts.pattern_tol;
    let clearly_large = pr > amb * opts.pattern_tol || kr > amb * opts.pattern_tol;

    if both_small {
        let (lam, residual) = mean_direction_pattern_residual(&frame.rotated);
        return Ok(CaseClassification {
            verdict: CaseVerdict::CaseII,
            h2: cubic.h2,
            pattern_residual: residual,
            frame: Some(frame),
            case2_lambda: Some(lam),
        });
    }
    if clearly_large {
        let residual = frame.coeffs.pattern_residual;
        return Ok(CaseClassification {
            verdict: CaseVerdict::CaseIII,
            h2: cubic.h2,
            pattern_residual: residual,
            frame: Some(frame),
            case2_lambda: None,
        });
    }
    Ok(CaseClassification {
        verdict: CaseVerdict::Ambiguous,
        h2: cubic.h2,
        pattern_residual: frame.coeffs.pattern_residual,
        frame: Some(frame),
        case2_lambda: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;
    use crate::shape::adapted_model;
    use crate::testing::random_orthonormal;

    /// Random totally symmetric traceless block over indices 3..n.
    /// Traces are removed exactly by subtracting the symmetrized
    /// delta tensor: T = S - (d_ij v_k + d_jk v_i + d_ki v_j) with
    /// v = trace(S) / (d + 2).
    fn random_block(n: usize, rng: &mut SplitMix64, scale: f64) -> Vec<Vec<Vec<f64>>> {
        let d = n - 2;
        let mut b = vec![vec![vec![0.0; d]; d]; d];
        for i in 0..d {
            for j in i..d {
                for k in j..d {
                    let v = scale * rng.gaussian();
                    for (x, y, z) in [(i, j, k), (i, k, j), (j, i, k), (j, k, i), (k, i, j), (k, j, i)] {
                        b[x][y][z] = v;
                    }
                }
            }
        }
        let v: Vec<f64> = (0..d)
            .map(|k| (0..d).map(|i| b[i][i][k]).sum::<f64>() / (d as f64 + 2.0))
            .collect();
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    let del = |a: usize, bb: usize| if a == bb { 1.0 } else { 0.0 };
                    b[i][j][k] -= del(i, j) * v[k] + del(j, k) * v[i] + del(k, i) * v[j];
                }
            }
        }
        b
    }

    fn max_block_trace(b: &[Vec<Vec<f64>>]) -> f64 {
        let d = b.len();
        (0..d)
            .map(|k| (0..d).map(|i| b[k][i][i]).sum::<f64>().abs())
            .fold(0.0, f64::max)
    }

    /// Generic type III model whose gamma is the strict global maximum
    /// of phi on the distinguished circle, the defining property of the
    /// adapted e_1. Parameter draws violating maximality (large mu can
    /// push a competing critical direction above gamma) are rejected,
    /// since their printed gamma is not the normal-form gamma of the
    /// tensor they generate.
    fn case3_model(n: usize, rng: &mut SplitMix64) -> (CubicTensor, f64, f64, f64) {
        loop {
            let lam = 0.3 + 0.4 * rng.next_f64();
            let mu = 0.2 + 0.4 * rng.next_f64();
            let gamma = (2.0 * n as f64 / 3.0) * lam + 0.5 + rng.next_f64();
            let block = random_block(n, rng, 0.15);
            assert!(max_block_trace(&block) < 1e-12);
            let model = adapted_model(n, gamma, lam, mu, &block);
            let mut u1 = vec![0.0; n];
            u1[0] = 1.0;
            let mut u2 = vec![0.0; n];
            u2[1] = 1.0;
            let phi_at = |theta: f64| -> f64 {
                let u: Vec<f64> = (0..n)
                    .map(|i| theta.cos() * u1[i] + theta.sin() * u2[i])
                    .collect();
                model.eval3(&u, &u, &u)
            };
            let competing = circle_critical_angles(&model, &u1, &u2)
                .into_iter()
                .filter(|t| t.abs() > 1e-6 && (t - std::f64::consts::PI).abs() > 1e-6)
                .map(|t| phi_at(t).abs())
                .fold(0.0f64, f64::max);
            if competing <= gamma - 0.05 {
                return (model, gamma, lam, mu);
            }
        }
    }

    #[test]
    fn k_tensor_cluster_matches_formula() {
        let n = 6;
        let mut rng = SplitMix64::new(7);
        let (cubic, _gamma, lam, mu) = case3_model(n, &mut rng);
        let mut mhat = cubic.mean_vector.clone();
        normalize(&mut mhat);
        let perp = hyperplane_basis(&mhat);
        let kmat = k_tensor(&cubic, &perp);
        let mut eig: Vec<f64> = kmat.symmetric_eigen().eigenvalues.iter().copied().collect();
        eig.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let expected = 2.0 * (n as f64 - 1.0) / n as f64 * (lam * lam + mu * mu);
        let close = eig.iter().filter(|e| (**e - expected).abs() < 1e-9).count();
        assert!(close >= n - 2, "spectrum {eig:?}, cluster at {expected}");
    }

    #[test]
    fn k_tensor_isotropic_in_case_two() {
        let n = 5;
        let lam = 0.7;
        let block = vec![vec![vec![0.0; n - 2]; n - 2]; n - 2];
        let cubic = adapted_model(n, (n as f64 - 1.0) * lam, lam, 0.0, &block);
        let mut mhat = cubic.mean_vector.clone();
        normalize(&mut mhat);
        let perp = hyperplane_basis(&mhat);
        let kmat = k_tensor(&cubic, &perp);
        let expected = 2.0 * (n as f64 - 1.0) / n as f64 * lam * lam;
        for i in 0..n - 1 {
            for j in 0..n - 1 {
                let target = if i == j { expected } else { 0.0 };
                assert!((kmat[(i, j)] - target).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn adapted_frame_round_trip_many_trials() {
        for n in [5usize, 6] {
            let mut rng = SplitMix64::new(40 + n as u64);
            for trial in 0..100 {
                let (model, gamma, lam, mu) = case3_model(n, &mut rng);
                let rot = random_orthonormal(n, &mut rng);
                let rotated = model.rotate(&rot);
                let frame = adapted_basis(&rotated).unwrap();
                let c = &frame.coeffs;
                assert!(
                    (c.gamma - gamma).abs() < 1e-8
                        && (c.lam - lam).abs() < 1e-8
                        && (c.mu - mu).abs() < 1e-8,
                    "n={n} trial={trial}: ({}, {}, {}) vs ({gamma}, {lam}, {mu})",
                    c.gamma,
                    c.lam,
                    c.mu
                );
                assert!(c.pattern_residual < 1e-8, "residual {}", c.pattern_residual);
            }
        }
    }

    #[test]
    fn rotation_equivariance_of_recovered_data() {
        let n = 5;
        let mut rng = SplitMix64::new(11);
        let (model, _gamma, _lam, _mu) = case3_model(n, &mut rng);
        let f0 = adapted_basis(&model).unwrap();
        for _ in 0..10 {
            let rot = random_orthonormal(n, &mut rng);
            let f1 = adapted_basis(&model.rotate(&rot)).unwrap();
            assert!((f0.coeffs.gamma - f1.coeffs.gamma).abs() < 1e-8);
            assert!((f0.coeffs.lam - f1.coeffs.lam).abs() < 1e-8);
            assert!((f0.coeffs.mu - f1.coeffs.mu).abs() < 1e-8);
            for (a, b) in f0.k_spectrum.iter().zip(&f1.k_spectrum) {
                assert!((a - b).abs() < 1e-8, "K spectrum must be invariant");
            }
        }
    }

    #[test]
    fn minimal_points_rejected_by_adapted_basis() {
        let cubic = CubicTensor::from_raw(vec![vec![vec![0.0; 5]; 5]; 5]);
        assert!(matches!(adapted_basis(&cubic), Err(GeomError::MinimalPoint)));
    }

    #[test]
    fn classify_minimal() {
        let cubic = CubicTensor::from_raw(vec![vec![vec![0.0; 5]; 5]; 5]);
        let out = classify_case(&cubic, 0.0, &ClassifyOpts::default()).unwrap();
        assert_eq!(out.verdict, CaseVerdict::MinimalI);
    }

    #[test]
    fn classify_not_ideal_and_ambiguous_band() {
        let cubic = CubicTensor::from_raw(vec![vec![vec![0.0; 5]; 5]; 5]);
        let opts = ClassifyOpts::default();
        let out = classify_case(&cubic, 5e-3, &opts).unwrap();
        assert_eq!(out.verdict, CaseVerdict::NotIdeal);
        let out = classify_case(&cubic, 1.5e-4, &opts).unwrap();
        assert_eq!(out.verdict, CaseVerdict::Ambiguous, "within 2x of ideal_tol");
    }

    #[test]
    fn classify_case_two_pattern() {
        let n = 5;
        let lam = 0.8;
        let mut rng = SplitMix64::new(3);
        // Case II with a nontrivial residual block over e_3..e_n and a
        // kernel direction e_2, expressed through the shared model with
        // gamma = (n-1) lambda and mu = 0.
        let block = random_block(n, &mut rng, 0.1);
        let model = adapted_model(n, (n as f64 - 1.0) * lam, lam, 0.0, &block);
        let rot = random_orthonormal(n, &mut rng);
        let rotated = model.rotate(&rot);
        let out = classify_case(&rotated, 0.0, &ClassifyOpts::default()).unwrap();
        assert_eq!(out.verdict, CaseVerdict::CaseII);
        assert!(out.pattern_residual < 1e-8, "residual {}", out.pattern_residual);
        let lam_rec = out.case2_lambda.unwrap();
        assert!((lam_rec - lam).abs() < 1e-8, "recovered {lam_rec}");
        let frame = out.frame.unwrap();
        let c = &frame.coeffs;
        assert!((c.gamma - (n as f64 - 1.0) * lam).abs() < 1e-8, "gamma = (n-1) lambda");
        assert!(c.mu.abs() < 1e-8, "mu = 0 in case II");
    }

    #[test]
    fn classify_case_three_generic_and_open() {
        let n = 5;
        let mut rng = SplitMix64::new(17);
        let (model, _gamma, _lam, _mu) = case3_model(n, &mut rng);
        let rot = random_orthonormal(n, &mut rng);
        let rotated = model.rotate(&rot);
        let out = classify_case(&rotated, 0.0, &ClassifyOpts::default()).unwrap();
        assert_eq!(out.verdict, CaseVerdict::CaseIII);
        assert!(out.pattern_residual < 1e-8);

        // Openness: small perturbations keep the verdict.
        for trial in 0..5 {
            let mut raw = rotated.coeffs.clone();
            let mut prng = SplitMix64::new(100 + trial);
            for plane in raw.iter_mut() {
                for row in plane.iter_mut() {
                    for v in row.iter_mut() {
                        *v += 1e-6 * prng.gaussian();
                    }
                }
            }
            let perturbed = CubicTensor::from_raw(raw);
            let out = classify_case(&perturbed, 0.0, &ClassifyOpts::default()).unwrap();
            assert_eq!(out.verdict, CaseVerdict::CaseIII, "verdict must be stable");
        }
    }

    #[test]
    fn k_spectrum_has_expected_length() {
        let n = 6;
        let mut rng = SplitMix64::new(23);
        let (model, _gamma, _lam, _mu) = case3_model(n, &mut rng);
        let out = classify_case(&model, 0.0, &ClassifyOpts::default()).unwrap();
        let frame = out.frame.unwrap();
        assert_eq!(frame.k_spectrum.len(), n - 1);
    }

    #[test]
    fn competing_maximum_returns_global_frame() {
        // With mu well above sqrt(3) lambda, a competing critical
        // direction of phi on the circle carries a larger value than
        // the gamma used to synthesize the tensor. The recovered frame
        // is then the genuine normal form (built at the global max),
        // which is an equally exact pattern with a larger gamma.
        let n = 5;
        let block = vec![vec![vec![0.0; n - 2]; n - 2]; n - 2];
        let model = adapted_model(n, 2.0, 0.1, 0.3, &block);
        let frame = adapted_basis(&model).unwrap();
        assert!(frame.coeffs.gamma > 2.5 && frame.coeffs.gamma < 2.6, "gamma {}", frame.coeffs.gamma);
        assert!(frame.coeffs.pattern_residual < 1e-10);
        assert!((frame.rotated.h2 - model.h2).abs() < 1e-12, "invariants preserved");
    }
}
