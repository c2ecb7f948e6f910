//! Delta invariants and the sharp inequality right-hand sides.
//!
//! The invariant delta(n_1, ..., n_k) at a point is
//!
//!   tau(p) - inf { tau(L_1) + ... + tau(L_k) }
//!
//! over k-tuples of mutually orthogonal subspaces with dim L_j = n_j.
//! The infimum is computed numerically in two stages: wide random
//! sampling of orthonormal frames (blocks are consecutive columns), then
//! Nelder-Mead refinement in a Cayley parametrization of the orthogonal
//! group around the most promising frames. The search space is compact,
//! so the infimum is attained and the numerical minimum estimates it
//! from above; delta is therefore estimated from below, which is the
//! safe direction for testing the upper bounds.
//!
//! Four right-hand sides are implemented: the general real-space-form
//! bound, the two Lagrangian refinements (strict and full partitions),
//! and the specialization to the tuple (2, n-2) whose equality case the
//! rest of the crate is about:
//!
//!   delta(2, n-2) <= n^2 (n-2) / (4(n-1)) H^2 + 2(n-2) c.
//!
//! The full-partition coefficient at (2, n-2) reduces to exactly this
//! value, which the tests pin down as a consistency oracle.

use nalgebra::DMatrix;

use crate::curvature::{tau_full, CurvatureOperator};
use crate::error::{GeomError, Result};
use crate::rng::SplitMix64;

/// A tuple (n_1, ..., n_k) from the admissible set S(n):
/// 2 <= n_1 <= ... <= n_k <= n-1 and sum n_j <= n.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionTuple {
    pub n: usize,
    pub parts: Vec<usize>,
}

impl PartitionTuple {
    pub fn new(n: usize, parts: Vec<usize>) -> Result<Self> {
        if parts.is_empty() {
            return Err(GeomError::InvalidTuple { reason: "tuple must have at least one part".into() });
        }
        let mut prev = 2;
        for &p in &parts {
            if p < prev {
                return Err(GeomError::InvalidTuple {
                    reason: format!("parts must be >= 2 and ascending, got {parts:?}"),
                });
            }
            prev = p;
        }
        if *parts.last().unwrap() > n.saturating_sub(1) {
            return Err(GeomError::InvalidTuple {
                reason: format!("largest part exceeds n-1 = {}", n - 1),
            });
        }
        if parts.iter().sum::<usize>() > n {
            return Err(GeomError::InvalidTuple {
                reason: format!("parts sum to more than n = {n}"),
            });
        }
        Ok(PartitionTuple { n, parts })
    }

    /// The standard tuple (2, n-2) this crate revolves around.
    pub fn two_nminus2(n: usize) -> Result<Self> {
        Self::new(n, vec![2, n.saturating_sub(2)])
    }

    pub fn k(&self) -> usize {
        self.parts.len()
    }

    pub fn sum(&self) -> usize {
        self.parts.iter().sum()
    }

    pub fn is_full(&self) -> bool {
        self.sum() == self.n
    }

    /// b(n_1,...,n_k) = n(n-1)/2 - sum n_j (n_j - 1)/2, the coefficient
    /// of the curvature constant in every right-hand side.
    pub fn b(&self) -> f64 {
        let n = self.n as f64;
        let mut b = n * (n - 1.0) / 2.0;
        for &p in &self.parts {
            let pf = p as f64;
            b -= pf * (pf - 1.0) / 2.0;
        }
        b
    }
}

/// Which sharp upper bound to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TheoremKind {
    /// Submanifolds of real space forms; valid for every tuple.
    RealSpaceForm,
    /// Lagrangian bound for partial tuples, sum n_j < n.
    LagrangianStrict,
    /// Lagrangian bound for full tuples, sum n_j = n.
    LagrangianFull,
    /// The (2, n-2) specialization, n >= 5.
    Delta2N2,
}

/// Coefficient of H^2 plus b*c for the selected bound.
pub fn inequality_rhs(tuple: &PartitionTuple, c: f64, h2: f64, theorem: TheoremKind) -> Result<f64> {
    let n = tuple.n as f64;
    let k = tuple.k() as f64;
    let sum = tuple.sum() as f64;
    let coeff = match theorem {
        TheoremKind::RealSpaceForm => {
            n * n * (n + k - 1.0 - sum) / (2.0 * (n + k - sum))
        }
        TheoremKind::LagrangianStrict => {
            if tuple.sum() >= tuple.n {
                return Err(GeomError::SelectorMismatch {
                    reason: "strict Lagrangian bound needs sum n_j < n".into(),
                });
            }
            let s6: f64 = tuple.parts.iter().map(|&p| 1.0 / (2.0 + p as f64)).sum();
            n * n * (n - sum + 3.0 * k - 1.0 - 6.0 * s6)
                / (2.0 * (n - sum + 3.0 * k + 2.0 - 6.0 * s6))
        }
        TheoremKind::LagrangianFull => {
            if !tuple.is_full() {
                return Err(GeomError::SelectorMismatch {
                    reason: "full Lagrangian bound needs sum n_j = n".into(),
                });
            }
            let s2: f64 = tuple.parts[1..].iter().map(|&p| 1.0 / (p as f64 + 2.0)).sum();
            n * n * (k - 1.0 - 2.0 * s2) / (2.0 * (k - 2.0 * s2))
        }
        TheoremKind::Delta2N2 => {
            if tuple.n < 5 || tuple.parts != vec![2, tuple.n - 2] {
                return Err(GeomError::SelectorMismatch {
                    reason: format!("(2, n-2) bound needs tuple (2, {}) with n >= 5", tuple.n.saturating_sub(2)),
                });
            }
            n * n * (n - 2.0) / (4.0 * (n - 1.0))
        }
    };
    Ok(coeff * h2 + tuple.b() * c)
}

/// Optimizer settings. Defaults follow the certified configuration:
/// 2000 samples, Nelder-Mead from the 10 best plus 10 fresh frames.
#[derive(Debug, Clone, Copy)]
pub struct DeltaOpts {
    pub samples: usize,
    pub refine_top: usize,
    pub random_restarts: usize,
    pub simplex_tol: f64,
    pub max_iters: usize,
    pub seed: u64,
}

impl Default for DeltaOpts {
    fn default() -> Self {
        DeltaOpts {
            samples: 2000,
            refine_top: 10,
            random_restarts: 10,
            simplex_tol: 1e-8,
            max_iters: 2000,
            seed: 0x5eed,
        }
    }
}

/// Outcome of the subspace optimization.
#[derive(Debug, Clone)]
pub struct OptimizerTrace {
    pub samples: usize,
    pub restarts: usize,
    pub best_sampled_objective: f64,
    pub best_objective: f64,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct DeltaResult {
    pub delta_value: f64,
    /// One orthonormal basis per part, in frame coordinates.
    pub minimizing_bases: Vec<Vec<Vec<f64>>>,
    pub trace: OptimizerTrace,
}

/// Orthonormal matrix from a Gaussian sample, modified Gram-Schmidt
/// with a reorthogonalization pass.
fn random_frame(n: usize, rng: &mut SplitMix64) -> DMatrix<f64> {
    loop {
        let mut cols: Vec<nalgebra::DVector<f64>> =
            (0..n).map(|_| nalgebra::DVector::from_fn(n, |_, _| rng.gaussian())).collect();
        let mut ok = true;
        for i in 0..n {
            for _ in 0..2 {
                for j in 0..i {
                    let p = cols[i].dot(&cols[j]);
                    let cj = cols[j].clone();
                    cols[i] -= cj * p;
                }
            }
            let norm = cols[i].norm();
            if norm < 1e-8 {
                ok = false;
                break;
            }
            cols[i] /= norm;
        }
        if ok {
            return DMatrix::from_fn(n, n, |r, c| cols[c][r]);
        }
    }
}

/// Objective: sum of block scalar curvatures for consecutive column
/// blocks of the frame.
fn block_objective(curv: &CurvatureOperator, parts: &[usize], q: &DMatrix<f64>) -> f64 {
    let n = curv.n;
    let mut acc = 0.0;
    let mut col = 0;
    for &p in parts {
        for a in col..col + p {
            for b in a + 1..col + p {
                let u: Vec<f64> = (0..n).map(|i| q[(i, a)]).collect();
                let v: Vec<f64> = (0..n).map(|i| q[(i, b)]).collect();
                acc += curv.sectional_of(&u, &v);
            }
        }
        col += p;
    }
    acc
}

/// Cayley retraction: skew matrix from packed coordinates, then
/// Q0 (I - A/2)^{-1} (I + A/2), which is exactly orthogonal.
fn cayley_step(q0: &DMatrix<f64>, x: &[f64]) -> Option<DMatrix<f64>> {
    let n = q0.nrows();
    let mut a = DMatrix::<f64>::zeros(n, n);
    let mut idx = 0;
    for i in 0..n {
        for j in i + 1..n {
            a[(i, j)] = x[idx];
            a[(j, i)] = -x[idx];
            idx += 1;
        }
    }
    let eye = DMatrix::<f64>::identity(n, n);
    let left = &eye - &a * 0.5;
    let right = &eye + &a * 0.5;
    let inv = left.lu().solve(&right)?;
    Some(q0 * inv)
}

/// Nelder-Mead on the Cayley chart around q0. Returns the best frame
/// and objective seen, plus whether the simplex contracted below tol.
fn nelder_mead(
    curv: &CurvatureOperator,
    parts: &[usize],
    q0: DMatrix<f64>,
    opts: &DeltaOpts,
) -> (DMatrix<f64>, f64, bool) {
    let n = curv.n;
    let dim = n * (n - 1) / 2;
    let f = |x: &[f64]| -> f64 {
        match cayley_step(&q0, x) {
            Some(q) => block_objective(curv, parts, &q),
            None => f64::INFINITY,
        }
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
    let origin = vec![0.0; dim];
    simplex.push((origin.clone(), f(&origin)));
    for i in 0..dim {
        let mut x = origin.clone();
        x[i] = 0.1;
        let fx = f(&x);
        simplex.push((x, fx));
    }

    let mut converged = false;
    for _ in 0..opts.max_iters {
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
        let spread = simplex
            .iter()
            .flat_map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0f64, f64::max);
        let fspread = simplex[dim].1 - simplex[0].1;
        if spread < opts.simplex_tol || fspread.abs() < 1e-12 {
            converged = true;
            break;
        }

        let centroid: Vec<f64> = (0..dim)
            .map(|i| simplex[..dim].iter().map(|(x, _)| x[i]).sum::<f64>() / dim as f64)
            .collect();
        let worst = simplex[dim].clone();
        let combine = |t: f64| -> Vec<f64> {
            (0..dim).map(|i| centroid[i] + t * (centroid[i] - worst.0[i])).collect()
        };

        let xr = combine(1.0);
        let fr = f(&xr);
        if fr < simplex[0].1 {
            let xe = combine(2.0);
            let fe = f(&xe);
            simplex[dim] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[dim - 1].1 {
            simplex[dim] = (xr, fr);
        } else {
            let xc = combine(-0.5);
            let fc = f(&xc);
            if fc < worst.1 {
                simplex[dim] = (xc, fc);
            } else {
                let best = simplex[0].0.clone();
                for entry in simplex.iter_mut().skip(1) {
                    let shrunk: Vec<f64> =
                        entry.0.iter().zip(&best).map(|(x, b)| b + 0.5 * (x - b)).collect();
                    let fs = f(&shrunk);
                    *entry = (shrunk, fs);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
    let best_x = &simplex[0].0;
    let best_q = cayley_step(&q0, best_x).unwrap_or(q0);
    (best_q, simplex[0].1, converged)
}

/// Compute delta(n_1, ..., n_k) of a curvature operator.
pub fn delta_invariant(curv: &CurvatureOperator, tuple: &PartitionTuple, opts: &DeltaOpts) -> Result<DeltaResult> {
    if tuple.n != curv.n {
        return Err(GeomError::DimensionMismatch {
            expected: curv.n,
            got: tuple.n,
            context: "partition tuple dimension",
        });
    }
    let n = curv.n;
    let tau_all = tau_full(curv);

    // Stage 1: wide sampling.
    let mut sampled: Vec<(f64, DMatrix<f64>)> = Vec::with_capacity(opts.samples);
    for s in 0..opts.samples {
        let mut rng = SplitMix64::stream(opts.seed, s as u64);
        let q = random_frame(n, &mut rng);
        let obj = block_objective(curv, &tuple.parts, &q);
        sampled.push((obj, q));
    }
    sampled.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let best_sampled = sampled[0].0;

    // Stage 2: refinement from the best frames plus fresh restarts.
    let mut starts: Vec<DMatrix<f64>> = sampled
        .iter()
        .take(opts.refine_top.min(sampled.len()))
        .map(|(_, q)| q.clone())
        .collect();
    let mut rng = SplitMix64::stream(opts.seed ^ 0xABCDEF, 0);
    for _ in 0..opts.random_restarts {
        starts.push(random_frame(n, &mut rng));
    }

    let mut best_obj = best_sampled;
    let mut best_q = sampled[0].1.clone();
    let mut any_converged = false;
    let restarts = starts.len();
    for q0 in starts {
        let (q, obj, conv) = nelder_mead(curv, &tuple.parts, q0, opts);
        any_converged |= conv;
        if obj < best_obj {
            best_obj = obj;
            best_q = q;
        }
    }

    let mut bases = Vec::with_capacity(tuple.k());
    let mut col = 0;
    for &p in &tuple.parts {
        let basis: Vec<Vec<f64>> =
            (col..col + p).map(|j| (0..n).map(|i| best_q[(i, j)]).collect()).collect();
        col += p;
        bases.push(basis);
    }
    // The Cayley retraction keeps frames orthogonal to machine
    // precision; verify anyway since the bases are part of the output.
    let mut flat: Vec<Vec<f64>> = Vec::new();
    for b in &bases {
        flat.extend(b.iter().cloned());
    }
    let mut worst = 0.0f64;
    for (i, u) in flat.iter().enumerate() {
        for (j, v) in flat.iter().enumerate() {
            let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((dot - target).abs());
        }
    }
    if worst > 1e-8 {
        return Err(GeomError::NotOrthonormal { deviation: worst });
    }

    Ok(DeltaResult {
        delta_value: tau_all - best_obj,
        minimizing_bases: bases,
        trace: OptimizerTrace {
            samples: opts.samples,
            restarts,
            best_sampled_objective: best_sampled,
            best_objective: best_obj,
            converged: any_converged,
        },
    })
}

/// Signed ideality data: rhs - delta. A point is delta-ideal when the
/// residual vanishes to tolerance; positive residuals are the strict
/// inequality, negative ones beyond tolerance would falsify the bound.
#[derive(Debug, Clone)]
pub struct IdealityCheck {
    pub delta: DeltaResult,
    pub rhs: f64,
    pub residual: f64,
    pub is_ideal: bool,
}

pub const IDEAL_TOL: f64 = 1e-4;

pub fn ideality_residual(
    curv: &CurvatureOperator,
    tuple: &PartitionTuple,
    c: f64,
    h2: f64,
    theorem: TheoremKind,
    opts: &DeltaOpts,
) -> Result<IdealityCheck> {
    let rhs = inequality_rhs(tuple, c, h2, theorem)?;
    let delta = delta_invariant(curv, tuple, opts)?;
    let residual = rhs - delta.delta_value;
    Ok(IdealityCheck { rhs, residual, is_ideal: residual.abs() <= IDEAL_TOL, delta })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curvature::{curvature_from_gauss, CurvatureSource};
    use crate::shape::CubicTensor;
    use crate::testing;

    fn quick_opts() -> DeltaOpts {
        DeltaOpts { samples: 400, refine_top: 5, random_restarts: 5, ..DeltaOpts::default() }
    }

    #[test]
    fn tuple_validation() {
        assert!(PartitionTuple::new(5, vec![2, 3]).is_ok());
        assert!(PartitionTuple::new(5, vec![4]).is_ok());
        assert!(PartitionTuple::new(5, vec![1, 3]).is_err(), "parts below 2");
        assert!(PartitionTuple::new(5, vec![3, 2]).is_err(), "descending");
        assert!(PartitionTuple::new(5, vec![2, 4]).is_err(), "sum exceeds n");
        assert!(PartitionTuple::new(5, vec![5]).is_err(), "part exceeds n-1");
        assert!(PartitionTuple::new(5, vec![]).is_err(), "empty");
    }

    #[test]
    fn b_values() {
        let t = PartitionTuple::new(5, vec![2, 3]).unwrap();
        assert_eq!(t.b(), 6.0);
        for n in 5..=12 {
            let t = PartitionTuple::two_nminus2(n).unwrap();
            assert_eq!(t.b(), 2.0 * (n as f64 - 2.0), "b(2, n-2) = 2(n-2)");
        }
    }

    #[test]
    fn rhs_frozen_values() {
        let t = PartitionTuple::new(5, vec![2, 3]).unwrap();
        // Curved ambient, minimal: rhs = b * c = 6.
        let rhs = inequality_rhs(&t, 1.0, 0.0, TheoremKind::Delta2N2).unwrap();
        assert!((rhs - 6.0).abs() < 1e-14);
        // Flat ambient, unit mean curvature: coefficient 75/16.
        let rhs = inequality_rhs(&t, 0.0, 1.0, TheoremKind::Delta2N2).unwrap();
        assert!((rhs - 75.0 / 16.0).abs() < 1e-14);
        // Full Lagrangian bound evaluates to the same number.
        let rhs = inequality_rhs(&t, 0.0, 1.0, TheoremKind::LagrangianFull).unwrap();
        assert!((rhs - 75.0 / 16.0).abs() < 1e-14);
        // Real space form bound for the single tuple (2).
        let t2 = PartitionTuple::new(5, vec![2]).unwrap();
        let rhs = inequality_rhs(&t2, 0.0, 1.0, TheoremKind::RealSpaceForm).unwrap();
        assert!((rhs - 9.375).abs() < 1e-14);
    }

    #[test]
    fn full_bound_reduces_to_two_nminus2_bound() {
        for n in 5..=12 {
            let t = PartitionTuple::two_nminus2(n).unwrap();
            let full = inequality_rhs(&t, 0.0, 1.0, TheoremKind::LagrangianFull).unwrap();
            let spec = inequality_rhs(&t, 0.0, 1.0, TheoremKind::Delta2N2).unwrap();
            assert!(
                (full - spec).abs() < 1e-12,
                "n = {n}: full {full} vs specialized {spec}"
            );
        }
    }

    #[test]
    fn selector_mismatches_are_rejected() {
        let t = PartitionTuple::new(5, vec![2, 3]).unwrap();
        assert!(inequality_rhs(&t, 0.0, 1.0, TheoremKind::LagrangianStrict).is_err());
        let t2 = PartitionTuple::new(5, vec![2]).unwrap();
        assert!(inequality_rhs(&t2, 0.0, 1.0, TheoremKind::LagrangianFull).is_err());
        assert!(inequality_rhs(&t2, 0.0, 1.0, TheoremKind::Delta2N2).is_err());
        let t3 = PartitionTuple::new(4, vec![2, 2]).unwrap();
        assert!(inequality_rhs(&t3, 0.0, 1.0, TheoremKind::Delta2N2).is_err(), "needs n >= 5");
    }

    #[test]
    fn flat_operator_has_zero_delta() {
        let r = CurvatureOperator::new(
            vec![vec![vec![vec![0.0; 5]; 5]; 5]; 5],
            CurvatureSource::Analytic,
        );
        let t = PartitionTuple::new(5, vec![2, 3]).unwrap();
        let out = delta_invariant(&r, &t, &quick_opts()).unwrap();
        assert!(out.delta_value.abs() < 1e-12);
    }

    #[test]
    fn constant_curvature_delta_is_combinatorial() {
        // K = 1 everywhere: tau(p) = 10, tau(L1) + tau(L2) = 1 + 3 for
        // any orthogonal split, so delta = 6 with no search needed.
        let cubic = CubicTensor::from_raw(vec![vec![vec![0.0; 5]; 5]; 5]);
        let r = curvature_from_gauss(&cubic, 1.0);
        let t = PartitionTuple::new(5, vec![2, 3]).unwrap();
        let out = delta_invariant(&r, &t, &quick_opts()).unwrap();
        assert!((out.delta_value - 6.0).abs() < 1e-9, "delta = {}", out.delta_value);
        assert!(out.trace.converged);
    }

    #[test]
    fn product_delta_matches_bruteforce_oracle() {
        let r = testing::product_spheres_curvature(&[2, 3]);
        let t = PartitionTuple::new(5, vec![2, 3]).unwrap();
        let out = delta_invariant(&r, &t, &DeltaOpts::default()).unwrap();
        assert!((out.delta_value - 3.0).abs() < 1e-6, "delta = {}", out.delta_value);
        let oracle = testing::delta_bruteforce(&r, &[2, 3], 100_000, 99);
        assert!(
            (out.delta_value - oracle).abs() < 1e-3,
            "optimizer {} vs oracle {}",
            out.delta_value,
            oracle
        );
        // Optimizer refinement may only improve on sampling.
        assert!(out.trace.best_objective <= out.trace.best_sampled_objective + 1e-15);
    }

    #[test]
    fn minimizing_bases_are_orthonormal() {
        let r = testing::product_spheres_curvature(&[2, 3]);
        let t = PartitionTuple::new(5, vec![2, 3]).unwrap();
        let out = delta_invariant(&r, &t, &quick_opts()).unwrap();
        let mut all: Vec<&Vec<f64>> = Vec::new();
        for basis in &out.minimizing_bases {
            for v in basis {
                all.push(v);
            }
        }
        assert_eq!(all.len(), 5);
        for (i, u) in all.iter().enumerate() {
            for (j, v) in all.iter().enumerate() {
                let dot: f64 = u.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((dot - target).abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn partial_tuple_search_works() {
        // Tuple (2) on the product operator: the minimum over single
        // 2-planes is 0 (mixed planes are flat), so delta = tau = 4.
        let r = testing::product_spheres_curvature(&[2, 3]);
        let t = PartitionTuple::new(5, vec![2]).unwrap();
        let out = delta_invariant(&r, &t, &quick_opts()).unwrap();
        assert!((out.delta_value - 4.0).abs() < 1e-6, "delta = {}", out.delta_value);
    }

    #[test]
    fn ideality_of_flat_plane_operator() {
        let r = CurvatureOperator::new(
            vec![vec![vec![vec![0.0; 5]; 5]; 5]; 5],
            CurvatureSource::Analytic,
        );
        let t = PartitionTuple::new(5, vec![2, 3]).unwrap();
        let check =
            ideality_residual(&r, &t, 0.0, 0.0, TheoremKind::Delta2N2, &quick_opts()).unwrap();
        assert!(check.is_ideal, "flat plane is minimal and ideal");
        assert!(check.residual.abs() < 1e-9);
    }

    #[test]
    fn cayley_frames_stay_orthogonal() {
        let mut rng = SplitMix64::new(1);
        let q0 = testing::random_orthonormal(5, &mut rng);
        for _ in 0..10 {
            let x: Vec<f64> = (0..10).map(|_| 0.3 * rng.gaussian()).collect();
            let q = cayley_step(&q0, &x).unwrap();
            let dev = (&q.transpose() * &q - DMatrix::<f64>::identity(5, 5)).norm();
            assert!(dev < 1e-12, "orthogonality deviation {dev}");
        }
    }
}
