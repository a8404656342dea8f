//! Jacobi-preconditioned conjugate gradients with implicit low-rank terms.

use super::{SolveError, SolveReport, SolverOptions};
use crate::fem::{dot, norm2, SparseSymMatrix};
use crate::Real;

pub fn pcg<T: Real>(
    a: &SparseSymMatrix<T>,
    b: &[T],
    opts: &SolverOptions,
) -> Result<(Vec<T>, SolveReport), SolveError> {
    let n = a.n();
    if b.len() != n {
        return Err(SolveError::Dimension {
            expected: n,
            got: b.len(),
        });
    }
    let start = std::time::Instant::now();
    let mut diag = a.base.diag();
    for t in &a.terms {
        for (i, v) in t.vector.idx.iter().zip(&t.vector.val) {
            diag[*i] += t.weight * *v * *v;
        }
    }
    let inv: Vec<T> = diag
        .iter()
        .map(|d| if *d > T::zero() { T::one() / *d } else { T::one() })
        .collect();
    let nb = norm2(b);
    let mut report = SolveReport {
        method: "pcg-jacobi".into(),
        unknowns: n,
        ..Default::default()
    };
    let mut x = vec![T::zero(); n];
    if nb == T::zero() {
        return Ok((x, report));
    }
    let tol = T::lit(opts.tol);
    let mut r = b.to_vec();
    let mut z: Vec<T> = r.iter().zip(&inv).map(|(ri, di)| *ri * *di).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![T::zero(); n];
    for it in 1..=opts.max_iterations {
        a.apply_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > T::zero()) {
            return Err(SolveError::Singular {
                rcond: 0.0,
                near_null: p.iter().map(|v| v.as_f64()).collect(),
            });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rel = norm2(&r) / nb;
        if rel <= tol {
            report.iterations = it;
            // recompute the true residual
            let ax = a.apply(&x);
            let res: Vec<T> = b.iter().zip(&ax).map(|(p, q)| *p - *q).collect();
            report.rel_residual = (norm2(&res) / nb).as_f64();
            report.solve_seconds = start.elapsed().as_secs_f64();
            return Ok((x, report));
        }
        for i in 0..n {
            z[i] = r[i] * inv[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let ax = a.apply(&x);
    let res: Vec<T> = b.iter().zip(&ax).map(|(p, q)| *p - *q).collect();
    Err(SolveError::NotConverged {
        rel_residual: (norm2(&res) / nb).as_f64(),
        iterations: opts.max_iterations,
    })
}
