//! Lowest eigenvalues of the pencil `(S, M)` by shift-invert subspace iteration.

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::{pseudo_random, Factorization, SolveError, SolverOptions};
use crate::fem::{dot, SparseSymMatrix};
use crate::Real;

/// The `count` smallest generalized eigenvalues of `S x = lambda M x`, with
/// `S` semidefinite and `M` definite. Iterates with `(S + M)^{-1} M`.
pub fn smallest_generalized_eigenvalues<T: Real>(
    s: &SparseSymMatrix<T>,
    m: &SparseSymMatrix<T>,
    count: usize,
    opts: &SolverOptions,
) -> Result<Vec<f64>, SolveError> {
    let n = s.n();
    let p = (2 * count).max(count + 8).min(n);
    let shifted = s.plus(m);
    let f = Factorization::new(&shifted, opts)?;
    let mut block: Vec<Vec<T>> = (0..p).map(|k| pseudo_random::<T>(n, 100 + k as u64)).collect();
    let mut prev = vec![f64::INFINITY; count];
    // relative eigenvalue change accepted as converged, floored by the precision
    let tol = 1e-11f64.max(100.0 * T::epsilon().as_f64());
    let mut change = f64::INFINITY;
    for _ in 0..300 {
        let next: Vec<Vec<T>> = block
            .par_iter()
            .map(|x| f.raw_solve(&m.apply(x)))
            .collect();
        let sx: Vec<Vec<T>> = next.par_iter().map(|y| s.apply(y)).collect();
        let mx: Vec<Vec<T>> = next.par_iter().map(|y| m.apply(y)).collect();
        let a = DMatrix::from_fn(p, p, |i, j| dot(&next[i], &sx[j]).as_f64());
        let b = DMatrix::from_fn(p, p, |i, j| dot(&next[i], &mx[j]).as_f64());
        let a = (&a + a.transpose()) * 0.5;
        let b = (&b + b.transpose()) * 0.5;
        let (vals, vecs) = crate::dense::generalized_symmetric_eigen(&a, &b).ok_or(
            SolveError::Unsupported("Rayleigh-Ritz basis lost independence".into()),
        )?;
        block = (0..p)
            .map(|c| {
                let mut v = vec![T::zero(); n];
                for (r, y) in next.iter().enumerate() {
                    let coef = T::lit(vecs[(r, c)]);
                    for (vi, yi) in v.iter_mut().zip(y) {
                        *vi += coef * *yi;
                    }
                }
                v
            })
            .collect();
        let cur: Vec<f64> = vals[..count].to_vec();
        change = cur
            .iter()
            .zip(&prev)
            .map(|(c, q)| (c - q).abs() / c.abs().max(1.0))
            .fold(0.0, f64::max);
        prev = cur;
        if change <= tol {
            return Ok(prev);
        }
    }
    Err(SolveError::NotConverged {
        rel_residual: change,
        iterations: 300,
    })
}
