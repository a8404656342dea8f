//! Symmetric sparse solves: definite systems, indefinite block systems, and
//! systems carrying factored low-rank terms.
//!
//! The default path is a direct LU factorization under a nested-dissection
//! ordering. Low-rank terms are expanded into the sparse pattern when cheap;
//! otherwise they border the matrix,
//!
//! `[K, s v; s v^T, -sign(w)] (x, y) = (b, 0)`, `s = sqrt(|w|)`,
//!
//! which stays nonsingular even when `K` alone is singular (as `kappa S_h` is).
//! A Woodbury path is available for nonsingular `K`. Every solve finishes with
//! iterative refinement against the original operator.

pub mod cg;
pub mod eigen;
pub mod lu;
pub mod ordering;

use std::time::Instant;

use rayon::prelude::*;
use thiserror::Error;

use crate::fem::{norm2, CsrMatrix, RankOne, SparseSymMatrix};
use crate::Real;
use lu::SparseLu;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Direct,
    /// Jacobi-preconditioned conjugate gradients (definite systems only).
    ConjugateGradient,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LowRank {
    /// Expand when the total cost is under the threshold, border otherwise.
    Auto,
    Expand,
    Bordering,
    Woodbury,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    /// Target relative residual `|Ax - b| / |b|`.
    pub tol: f64,
    pub method: Method,
    pub low_rank: LowRank,
    /// Maximum number of entries an explicit low-rank expansion may add.
    pub expand_threshold: usize,
    pub pivot_threshold: f64,
    pub max_refinement: usize,
    /// Reciprocal condition estimates below this are reported as singular.
    pub singular_tol: f64,
    pub max_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            method: Method::Direct,
            low_rank: LowRank::Auto,
            expand_threshold: 100_000,
            pivot_threshold: 0.1,
            max_refinement: 6,
            singular_tol: 1e-13,
            max_iterations: 50_000,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SolveReport {
    pub rel_residual: f64,
    pub method: String,
    pub unknowns: usize,
    pub factor_nnz: usize,
    /// Low-rank terms handled by bordering or Woodbury rather than expansion.
    pub implicit_terms: usize,
    pub refinement_steps: usize,
    pub iterations: usize,
    pub rcond_estimate: f64,
    pub factor_seconds: f64,
    pub solve_seconds: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("matrix is singular to working precision (rcond ~ {rcond:e})")]
    Singular { rcond: f64, near_null: Vec<f64> },
    #[error("no convergence: relative residual {rel_residual:e} after {iterations} iterations")]
    NotConverged { rel_residual: f64, iterations: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("unsupported: {0}")]
    Unsupported(String),
}

struct Woodbury<T> {
    shifted: Vec<RankOne<T>>,
    z: Vec<Vec<T>>,
    cap: Vec<Vec<T>>,
}

/// A factored operator; immutable, so back-solves may run concurrently.
pub struct Factorization<T> {
    op: SparseSymMatrix<T>,
    lu: SparseLu<T>,
    border: Vec<RankOne<T>>,
    woodbury: Option<Woodbury<T>>,
    opts: SolverOptions,
    report: SolveReport,
    near_null: Vec<T>,
}

fn pseudo_random<T: Real>(n: usize, seed: u64) -> Vec<T> {
    let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    (0..n)
        .map(|_| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            T::lit(((s >> 11) as f64) / ((1u64 << 53) as f64) - 0.5)
        })
        .collect()
}

/// Row sums of `|A|` including the low-rank part.
fn row_norms<T: Real>(a: &SparseSymMatrix<T>) -> Vec<T> {
    let mut d: Vec<T> = (0..a.n())
        .map(|i| a.base.row(i).1.iter().map(|v| v.abs()).sum())
        .collect();
    for t in &a.terms {
        let l1: T = t.vector.val.iter().map(|v| v.abs()).sum();
        for (i, v) in t.vector.idx.iter().zip(&t.vector.val) {
            d[*i] += t.weight.abs() * v.abs() * l1;
        }
    }
    d
}

/// `|D^{-1/2} |A| D^{-1/2}|_inf` for the diagonal scaling `d`.
fn scaled_norm<T: Real>(a: &SparseSymMatrix<T>, dinv: &[T]) -> T {
    let n = a.n();
    let mut rows: Vec<T> = (0..n)
        .map(|i| {
            let (idx, val) = a.base.row(i);
            idx.iter().zip(val).map(|(j, v)| v.abs() * dinv[*j]).sum::<T>() * dinv[i]
        })
        .collect();
    for t in &a.terms {
        let l1: T = t.vector.idx.iter().zip(&t.vector.val).map(|(j, v)| v.abs() * dinv[*j]).sum();
        for (i, v) in t.vector.idx.iter().zip(&t.vector.val) {
            rows[*i] += t.weight.abs() * v.abs() * dinv[*i] * l1;
        }
    }
    rows.into_iter().fold(T::zero(), T::max)
}

impl<T: Real> Factorization<T> {
    pub fn new(a: &SparseSymMatrix<T>, opts: &SolverOptions) -> Result<Self, SolveError> {
        let start = Instant::now();
        let n = a.n();
        let mut policy = opts.low_rank;
        if policy == LowRank::Auto && a.expansion_cost() <= opts.expand_threshold {
            policy = LowRank::Expand;
        }
        let (explicit, implicit): (Vec<RankOne<T>>, Vec<RankOne<T>>) = match policy {
            LowRank::Expand => (a.terms.clone(), Vec::new()),
            // sparse terms (point evaluations) are always cheap to expand
            _ => a.terms.iter().cloned().partition(|t| t.vector.nnz() <= 64),
        };
        let k = SparseSymMatrix {
            base: a.base.clone(),
            terms: explicit,
        }
        .expand();
        let (matrix, border, woodbury_terms) = match policy {
            LowRank::Woodbury => (k, Vec::new(), implicit),
            _ => (bordered(&k, &implicit), implicit, Vec::new()),
        };
        let q = ordering::nested_dissection(&matrix);
        let floor = T::epsilon() * matrix.max_abs() * T::lit(4.0);
        let lu = SparseLu::factor(&matrix, &q, T::lit(opts.pivot_threshold), floor).map_err(|e| {
            SolveError::Singular {
                rcond: 0.0,
                near_null: e.near_null[..n].iter().map(|v| v.as_f64()).collect(),
            }
        })?;
        let factor_nnz = lu.nnz();
        let mut f = Self {
            op: a.clone(),
            lu,
            border,
            woodbury: None,
            opts: *opts,
            report: SolveReport {
                method: match policy {
                    LowRank::Woodbury => "lu+woodbury",
                    _ => "lu",
                }
                .to_string(),
                unknowns: n,
                factor_nnz,
                implicit_terms: 0,
                ..Default::default()
            },
            near_null: Vec::new(),
        };
        f.report.implicit_terms = f.border.len() + woodbury_terms.len();
        if !f.border.is_empty() {
            f.report.method = "lu+bordering".into();
        }
        if !woodbury_terms.is_empty() {
            f.woodbury = Some(f.build_woodbury(woodbury_terms)?);
        }
        let (rcond, near_null) = f.condition_estimate();
        f.report.rcond_estimate = rcond;
        f.near_null = near_null.clone();
        f.report.factor_seconds = start.elapsed().as_secs_f64();
        if !(rcond >= opts.singular_tol) {
            return Err(SolveError::Singular {
                rcond,
                near_null: near_null.iter().map(|v| v.as_f64()).collect(),
            });
        }
        Ok(f)
    }

    fn build_woodbury(&self, terms: Vec<RankOne<T>>) -> Result<Woodbury<T>, SolveError> {
        let n = self.op.n();
        let z: Vec<Vec<T>> = terms
            .par_iter()
            .map(|t| self.lu_solve(&t.vector.to_dense(n)))
            .collect();
        let r = terms.len();
        let mut cap = vec![vec![T::zero(); r]; r];
        for i in 0..r {
            for j in 0..r {
                cap[i][j] = terms[i].vector.dot(&z[j]);
            }
            cap[i][i] += T::one() / terms[i].weight;
        }
        if !cap.iter().flatten().all(|v| v.is_finite()) {
            return Err(SolveError::Unsupported(
                "Woodbury update needs a nonsingular base matrix".into(),
            ));
        }
        Ok(Woodbury {
            shifted: terms,
            z,
            cap,
        })
    }

    fn lu_solve(&self, b: &[T]) -> Vec<T> {
        let n = self.op.n();
        let mut rhs = b.to_vec();
        rhs.resize(self.lu.n(), T::zero());
        self.lu.solve_in_place(&mut rhs);
        rhs.truncate(n);
        rhs
    }

    /// One application of the approximate inverse.
    fn raw_solve(&self, b: &[T]) -> Vec<T> {
        let mut x = self.lu_solve(b);
        if let Some(w) = &self.woodbury {
            let rhs: Vec<T> = w.shifted.iter().map(|t| t.vector.dot(&x)).collect();
            let c = crate::dense::solve(&w.cap, &rhs).unwrap_or_else(|| vec![T::nan(); rhs.len()]);
            for (zk, ck) in w.z.iter().zip(&c) {
                for (xi, zi) in x.iter_mut().zip(zk) {
                    *xi -= *ck * *zi;
                }
            }
        }
        x
    }

    /// Inverse iteration on the symmetrically equilibrated operator
    /// `D^{-1/2} A D^{-1/2}` (`D` = row sums of `|A|`). Returns an estimate of
    /// its reciprocal condition number and the dominant direction of `A^-1`.
    /// Equilibration keeps blocks of very different scale (stiffness next to
    /// mass) from masquerading as near-singularity.
    fn condition_estimate(&self) -> (f64, Vec<T>) {
        let n = self.op.n();
        let dsqrt: Vec<T> = row_norms(&self.op)
            .into_iter()
            .map(|d| if d > T::zero() { d.sqrt() } else { T::one() })
            .collect();
        let dinv: Vec<T> = dsqrt.iter().map(|d| T::one() / *d).collect();
        let mut x = pseudo_random::<T>(n, 7);
        let mut growth = T::zero();
        for _ in 0..8 {
            let nx = norm2(&x);
            if !(nx > T::zero()) {
                break;
            }
            let scaled: Vec<T> = x.iter().zip(&dsqrt).map(|(v, d)| *v / nx * *d).collect();
            let y = self.raw_solve(&scaled);
            x = y.iter().zip(&dsqrt).map(|(v, d)| *v * *d).collect();
            growth = norm2(&x);
            if !growth.is_finite() {
                return (0.0, y);
            }
        }
        let mut z: Vec<T> = x.iter().zip(&dinv).map(|(v, d)| *v * *d).collect();
        let nz = norm2(&z);
        if nz > T::zero() {
            z.iter_mut().for_each(|v| *v /= nz);
        }
        let rcond = (T::one() / (growth * scaled_norm(&self.op, &dinv))).as_f64();
        (if rcond.is_nan() { 0.0 } else { rcond }, z)
    }

    pub fn n(&self) -> usize {
        self.op.n()
    }

    pub fn report(&self) -> &SolveReport {
        &self.report
    }

    pub fn operator(&self) -> &SparseSymMatrix<T> {
        &self.op
    }

    /// Unit vector along which the operator is closest to singular, as
    /// found by the condition estimate.
    pub fn near_null(&self) -> &[T] {
        &self.near_null
    }

    /// Solves `A x = b` with iterative refinement.
    pub fn solve(&self, b: &[T]) -> Result<(Vec<T>, SolveReport), SolveError> {
        let n = self.op.n();
        if b.len() != n {
            return Err(SolveError::Dimension {
                expected: n,
                got: b.len(),
            });
        }
        let start = Instant::now();
        let mut report = self.report.clone();
        let nb = norm2(b);
        if nb == T::zero() {
            report.rel_residual = 0.0;
            return Ok((vec![T::zero(); n], report));
        }
        let mut x = self.raw_solve(b);
        let tol = T::lit(self.opts.tol);
        let mut rel = T::infinity();
        for step in 0..=self.opts.max_refinement {
            let ax = self.op.apply(&x);
            let r: Vec<T> = b.iter().zip(&ax).map(|(bi, ai)| *bi - *ai).collect();
            let new_rel = norm2(&r) / nb;
            report.refinement_steps = step;
            // stop once converged, or when refinement no longer helps
            if new_rel <= tol || !(new_rel < rel * T::lit(0.5)) {
                rel = rel.min(new_rel);
                break;
            }
            rel = new_rel;
            let dx = self.raw_solve(&r);
            for (xi, di) in x.iter_mut().zip(&dx) {
                *xi += *di;
            }
        }
        report.rel_residual = rel.as_f64();
        report.solve_seconds = start.elapsed().as_secs_f64();
        if !(rel <= tol) {
            return Err(SolveError::NotConverged {
                rel_residual: rel.as_f64(),
                iterations: report.refinement_steps,
            });
        }
        Ok((x, report))
    }
}

fn bordered<T: Real>(k: &CsrMatrix<T>, terms: &[RankOne<T>]) -> CsrMatrix<T> {
    if terms.is_empty() {
        return k.clone();
    }
    let n = k.n();
    let mut trip = Vec::with_capacity(k.nnz() + terms.iter().map(|t| 2 * t.vector.nnz() + 1).sum::<usize>());
    k.triplets_into(0, 0, &mut trip);
    for (r, t) in terms.iter().enumerate() {
        let s = t.weight.abs().sqrt();
        let row = n + r;
        for (i, v) in t.vector.idx.iter().zip(&t.vector.val) {
            trip.push((*i, row, s * *v));
            trip.push((row, *i, s * *v));
        }
        trip.push((row, row, -t.weight.signum()));
    }
    CsrMatrix::from_triplets(n + terms.len(), trip)
}

/// Solves a symmetric system that is definite (possibly after its low-rank terms).
pub fn solve_spd<T: Real>(
    a: &SparseSymMatrix<T>,
    b: &[T],
    opts: &SolverOptions,
) -> Result<(Vec<T>, SolveReport), SolveError> {
    match opts.method {
        Method::Direct => Factorization::new(a, opts)?.solve(b),
        Method::ConjugateGradient => cg::pcg(a, b, opts),
    }
}

/// `[[a11, a12], [a12^T, a22]]`, all blocks `n x n`.
#[derive(Clone, Debug)]
pub struct BlockSystem<T> {
    pub a11: SparseSymMatrix<T>,
    pub a12: CsrMatrix<T>,
    pub a22: SparseSymMatrix<T>,
}

impl<T: Real> BlockSystem<T> {
    pub fn n(&self) -> usize {
        self.a11.n()
    }

    /// The assembled `2n x 2n` operator; low-rank terms are shifted, not expanded.
    pub fn assemble(&self) -> SparseSymMatrix<T> {
        let n = self.n();
        let mut trip = Vec::with_capacity(self.a11.base.nnz() + 2 * self.a12.nnz() + self.a22.base.nnz());
        self.a11.base.triplets_into(0, 0, &mut trip);
        self.a12.triplets_into(0, n, &mut trip);
        self.a12.transpose().triplets_into(n, 0, &mut trip);
        self.a22.base.triplets_into(n, n, &mut trip);
        let base = CsrMatrix::from_triplets(2 * n, trip);
        let mut terms = self.a11.terms.clone();
        for t in &self.a22.terms {
            let mut v = t.vector.clone();
            for i in &mut v.idx {
                *i += n;
            }
            terms.push(RankOne {
                vector: v,
                weight: t.weight,
            });
        }
        SparseSymMatrix { base, terms }
    }
}

/// Solves the symmetric indefinite block system for `(x1, x2)`.
pub fn solve_block_sym<T: Real>(
    blocks: &BlockSystem<T>,
    rhs: (&[T], &[T]),
    opts: &SolverOptions,
) -> Result<((Vec<T>, Vec<T>), SolveReport), SolveError> {
    let n = blocks.n();
    for part in [rhs.0, rhs.1] {
        if part.len() != n {
            return Err(SolveError::Dimension {
                expected: n,
                got: part.len(),
            });
        }
    }
    if opts.method == Method::ConjugateGradient {
        return Err(SolveError::Unsupported(
            "conjugate gradients cannot solve indefinite block systems".into(),
        ));
    }
    let big = blocks.assemble();
    let f = Factorization::new(&big, opts)?;
    let b: Vec<T> = rhs.0.iter().chain(rhs.1).copied().collect();
    let (mut x, report) = f.solve(&b)?;
    let x2 = x.split_off(n);
    Ok(((x, x2), report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{assemble_mass, assemble_stiffness, SparseVec};
    use crate::Mesh;

    fn rel_err(a: &[f64], b: &[f64]) -> f64 {
        let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        norm2(&d) / norm2(b)
    }

    #[test]
    fn mass_times_ones() {
        let m = Mesh::build_sphere(1.0, 3).unwrap();
        let mm = assemble_mass(&m).unwrap();
        let one = vec![1.0; m.vertex_count()];
        let b = mm.apply(&one);
        let (x, rep) = solve_spd(&mm, &b, &SolverOptions::default()).unwrap();
        assert!(rel_err(&x, &one) < 1e-10);
        assert!(rep.rel_residual <= 1e-10);
    }

    #[test]
    fn stiffness_plus_mass_recovers_field() {
        let m = Mesh::build_torus(1.0, 12, 20).unwrap();
        let a = assemble_stiffness(&m).unwrap().plus(&assemble_mass(&m).unwrap());
        let v = pseudo_random::<f64>(m.vertex_count(), 3);
        let b = a.apply(&v);
        for method in [Method::Direct, Method::ConjugateGradient] {
            let opts = SolverOptions { method, ..Default::default() };
            let (x, _) = solve_spd(&a, &b, &opts).unwrap();
            assert!(rel_err(&x, &v) < 1e-8, "{method:?}");
        }
    }

    #[test]
    fn bare_stiffness_is_singular() {
        let m = Mesh::build_sphere(1.0, 2).unwrap();
        let s = assemble_stiffness(&m).unwrap();
        let b = pseudo_random::<f64>(m.vertex_count(), 1);
        match solve_spd(&s, &b, &SolverOptions::default()) {
            Err(SolveError::Singular { near_null, .. }) => {
                // the near-null vector is close to constant
                let mean = near_null.iter().sum::<f64>() / near_null.len() as f64;
                let dev = near_null.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max);
                assert!(dev < 1e-6 * mean.abs(), "dev {dev}, mean {mean}");
            }
            other => panic!("expected singular error, got {other:?}"),
        }
    }

    #[test]
    fn singular_base_with_rank_one_fix() {
        // kappa S + (M1)(M1)^T is nonsingular although S is not
        let m = Mesh::build_sphere(1.0, 3).unwrap();
        let s = assemble_stiffness(&m).unwrap();
        let mm = assemble_mass(&m).unwrap();
        let b1 = mm.apply(&vec![1.0; m.vertex_count()]);
        let mut a = s.clone();
        a.terms.push(RankOne { vector: SparseVec::from_dense(&b1), weight: 1.0 });
        let v = pseudo_random::<f64>(m.vertex_count(), 5);
        let rhs = a.apply(&v);
        for low_rank in [LowRank::Expand, LowRank::Bordering] {
            let opts = SolverOptions { low_rank, ..Default::default() };
            let (x, _) = solve_spd(&a, &rhs, &opts).unwrap();
            assert!(rel_err(&x, &v) < 1e-8, "{low_rank:?}");
        }
    }

    #[test]
    fn woodbury_and_expansion_agree() {
        let m = Mesh::build_sphere(1.0, 3).unwrap();
        let mm = assemble_mass(&m).unwrap();
        let base = assemble_stiffness(&m).unwrap().plus(&mm);
        let mut a = base.clone();
        for seed in 0..3 {
            let v = pseudo_random::<f64>(m.vertex_count(), 10 + seed);
            a.terms.push(RankOne { vector: SparseVec::from_dense(&v), weight: 2.0 });
        }
        let rhs = pseudo_random::<f64>(m.vertex_count(), 99);
        let run = |low_rank| {
            let opts = SolverOptions { low_rank, tol: 1e-14, ..Default::default() };
            Factorization::new(&a, &opts).unwrap().solve(&rhs).map(|r| r.0)
        };
        let xe = run(LowRank::Expand).unwrap();
        let xw = run(LowRank::Woodbury).unwrap();
        let xb = run(LowRank::Bordering).unwrap();
        assert!(rel_err(&xw, &xe) < 1e-12);
        assert!(rel_err(&xb, &xe) < 1e-12);
    }

    #[test]
    fn block_system_round_trip() {
        let m = Mesh::build_torus(1.0, 10, 14).unwrap();
        let s = assemble_stiffness(&m).unwrap();
        let mm = assemble_mass(&m).unwrap();
        let sm = s.plus(&mm);
        let blocks = BlockSystem {
            a11: mm.scaled(0.5),
            a12: sm.base.clone(),
            a22: mm.scaled(-1.0),
        };
        let n = m.vertex_count();
        let u = pseudo_random::<f64>(n, 1);
        let w = pseudo_random::<f64>(n, 2);
        let big = blocks.assemble();
        let uw: Vec<f64> = u.iter().chain(&w).copied().collect();
        let rhs = big.apply(&uw);
        let ((x1, x2), _) = solve_block_sym(&blocks, (&rhs[..n], &rhs[n..]), &SolverOptions::default()).unwrap();
        assert!(rel_err(&x1, &u) < 1e-8 && rel_err(&x2, &w) < 1e-8);
        let zero = vec![0.0; n];
        let ((z1, z2), _) = solve_block_sym(&blocks, (&zero, &zero), &SolverOptions::default()).unwrap();
        assert!(z1.iter().chain(&z2).all(|v| *v == 0.0));
    }
}
