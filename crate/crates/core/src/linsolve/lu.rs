//! Left-looking sparse LU with threshold partial pivoting.
//!
//! For each column (in the fill-reducing order) the sparse triangular solve
//! `L x = A(:, j)` is performed on the nonzero pattern obtained by a depth-first
//! reach through the graph of `L`; a pivot is then chosen among the rows not
//! yet eliminated, preferring the diagonal when it is within a factor
//! `pivot_threshold` of the largest candidate.

use crate::fem::CsrMatrix;
use crate::Real;

#[derive(Clone, Debug)]
struct Csc<T> {
    ptr: Vec<usize>,
    idx: Vec<usize>,
    val: Vec<T>,
}

#[derive(Clone, Debug)]
pub struct SparseLu<T> {
    n: usize,
    /// `q[k]`: original column eliminated at step `k`.
    q: Vec<usize>,
    /// `pinv[i]`: pivot step of original row `i`.
    pinv: Vec<usize>,
    l: Csc<T>,
    u: Csc<T>,
}

/// Pivot breakdown: the column at step `step` is (numerically) a combination
/// of the earlier ones; `near_null` (in original indexing) spans that relation.
#[derive(Clone, Debug)]
pub struct PivotBreakdown<T> {
    pub step: usize,
    pub pivot: T,
    pub near_null: Vec<T>,
}

impl<T: Real> SparseLu<T> {
    /// Factorizes `A(:, q)` with row pivoting. `A` is read column-wise through
    /// its transpose, so any square CSR works.
    pub fn factor(
        a: &CsrMatrix<T>,
        q: &[usize],
        pivot_threshold: T,
        pivot_floor: T,
    ) -> Result<Self, PivotBreakdown<T>> {
        let n = a.n();
        assert_eq!(q.len(), n);
        let at = a.transpose();
        const NONE: usize = usize::MAX;
        let mut pinv = vec![NONE; n];
        let mut l = Csc {
            ptr: vec![0; n + 1],
            idx: Vec::with_capacity(4 * a.nnz()),
            val: Vec::with_capacity(4 * a.nnz()),
        };
        let mut u = Csc {
            ptr: vec![0; n + 1],
            idx: Vec::with_capacity(4 * a.nnz()),
            val: Vec::with_capacity(4 * a.nnz()),
        };
        let mut x = vec![T::zero(); n];
        let mut xi = vec![0usize; n];
        let mut pstack = vec![0usize; n];
        let mut stack = vec![0usize; n];
        let mut mark = vec![NONE; n];

        for k in 0..n {
            l.ptr[k] = l.idx.len();
            u.ptr[k] = u.idx.len();
            let col = q[k];
            let (bi, bx) = at.row(col);

            // reach: topological order of the nonzero pattern of L \ A(:, col)
            let mut top = n;
            for &start in bi {
                if mark[start] == k {
                    continue;
                }
                let mut head = 0usize;
                stack[0] = start;
                loop {
                    let j = stack[head];
                    let jcol = pinv[j];
                    if mark[j] != k {
                        mark[j] = k;
                        // the first entry of an L column is its own pivot row
                        pstack[head] = if jcol == NONE { 0 } else { l.ptr[jcol] + 1 };
                    }
                    let end = if jcol == NONE { 0 } else { l.ptr[jcol + 1] };
                    let mut descended = false;
                    for p in pstack[head]..end {
                        let i = l.idx[p];
                        if mark[i] != k {
                            pstack[head] = p;
                            head += 1;
                            stack[head] = i;
                            descended = true;
                            break;
                        }
                    }
                    if !descended {
                        top -= 1;
                        xi[top] = j;
                        if head == 0 {
                            break;
                        }
                        head -= 1;
                    }
                }
            }

            // numeric solve on the pattern
            for &i in &xi[top..] {
                x[i] = T::zero();
            }
            for (i, v) in bi.iter().zip(bx) {
                x[*i] = *v;
            }
            for p in top..n {
                let j = xi[p];
                let jcol = pinv[j];
                if jcol == NONE {
                    continue;
                }
                let xj = x[j];
                for r in l.ptr[jcol] + 1..l.ptr[jcol + 1] {
                    x[l.idx[r]] -= l.val[r] * xj;
                }
            }

            // pivot selection
            let mut ipiv = NONE;
            let mut amax = T::zero();
            for &i in &xi[top..] {
                if pinv[i] == NONE {
                    let t = x[i].abs();
                    if t > amax || ipiv == NONE {
                        amax = t;
                        ipiv = i;
                    }
                } else {
                    u.idx.push(pinv[i]);
                    u.val.push(x[i]);
                }
            }
            if ipiv == NONE || !(amax > pivot_floor) {
                let near_null = Self::null_direction(n, q, &u, k);
                let pivot = if ipiv == NONE { T::zero() } else { x[ipiv] };
                return Err(PivotBreakdown {
                    step: k,
                    pivot,
                    near_null,
                });
            }
            if pinv[col] == NONE && mark[col] == k && x[col].abs() >= amax * pivot_threshold {
                ipiv = col;
            }
            let pivot = x[ipiv];
            u.idx.push(k);
            u.val.push(pivot);
            pinv[ipiv] = k;
            l.idx.push(ipiv);
            l.val.push(T::one());
            for &i in &xi[top..] {
                if pinv[i] == NONE {
                    l.idx.push(i);
                    l.val.push(x[i] / pivot);
                }
                x[i] = T::zero();
            }
        }
        l.ptr[n] = l.idx.len();
        u.ptr[n] = u.idx.len();
        for i in l.idx.iter_mut() {
            *i = pinv[*i];
        }
        Ok(Self { n, q: q.to_vec(), pinv, l, u })
    }

    /// Solves `U(0..k,0..k) z = -U(0..k, k)` with `z_k = 1`, where column `k`
    /// of `U` holds only its off-diagonal part.
    fn null_direction(n: usize, q: &[usize], u: &Csc<T>, k: usize) -> Vec<T> {
        let mut z = vec![T::zero(); k + 1];
        z[k] = T::one();
        for p in u.ptr[k]..u.idx.len() {
            z[u.idx[p]] -= u.val[p];
        }
        for j in (0..k).rev() {
            let d = u.ptr[j + 1] - 1;
            z[j] /= u.val[d];
            let zj = z[j];
            for p in u.ptr[j]..d {
                z[u.idx[p]] -= u.val[p] * zj;
            }
        }
        let mut out = vec![T::zero(); n];
        for (j, v) in z.into_iter().enumerate() {
            out[q[j]] = v;
        }
        let nrm = out.iter().map(|v| *v * *v).sum::<T>().sqrt();
        if nrm > T::zero() {
            for v in &mut out {
                *v /= nrm;
            }
        }
        out
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Stored entries of `L` and `U`.
    pub fn nnz(&self) -> usize {
        self.l.idx.len() + self.u.idx.len()
    }

    /// Smallest and largest pivot magnitudes.
    pub fn pivot_range(&self) -> (T, T) {
        let mut lo = T::infinity();
        let mut hi = T::zero();
        for j in 0..self.n {
            let d = self.u.val[self.u.ptr[j + 1] - 1].abs();
            lo = lo.min(d);
            hi = hi.max(d);
        }
        (lo, hi)
    }

    pub fn solve_in_place(&self, b: &mut [T]) {
        let n = self.n;
        let mut y = vec![T::zero(); n];
        for i in 0..n {
            y[self.pinv[i]] = b[i];
        }
        for j in 0..n {
            let yj = y[j];
            if yj != T::zero() {
                for p in self.l.ptr[j] + 1..self.l.ptr[j + 1] {
                    y[self.l.idx[p]] -= self.l.val[p] * yj;
                }
            }
        }
        for j in (0..n).rev() {
            let d = self.u.ptr[j + 1] - 1;
            y[j] /= self.u.val[d];
            let yj = y[j];
            if yj != T::zero() {
                for p in self.u.ptr[j]..d {
                    y[self.u.idx[p]] -= self.u.val[p] * yj;
                }
            }
        }
        for k in 0..n {
            b[self.q[k]] = y[k];
        }
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn residual(a: &CsrMatrix<f64>, x: &[f64], b: &[f64]) -> f64 {
        let ax = a.matvec(x);
        ax.iter().zip(b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn solves_small_unsymmetric_system() {
        let a = CsrMatrix::from_dense(&[
            vec![0.0, 2.0, 0.0, 1.0],
            vec![1.0, 0.0, 3.0, 0.0],
            vec![0.0, 4.0, 1.0, 0.0],
            vec![2.0, 0.0, 0.0, 5.0],
        ]);
        let q = [0, 1, 2, 3];
        let lu = SparseLu::factor(&a, &q, 0.1, 0.0).unwrap();
        let b = [1.0, 2.0, 3.0, 4.0];
        let x = lu.solve(&b);
        assert!(residual(&a, &x, &b) < 1e-14);
    }

    #[test]
    fn indefinite_saddle_with_zero_diagonal() {
        // [[2, 1], [1, 0]] needs an off-diagonal pivot in the second column
        let a = CsrMatrix::from_dense(&[
            vec![0.0, 1.0, 0.0],
            vec![1.0, 0.0, 1.0],
            vec![0.0, 1.0, 2.0],
        ]);
        for q in [[0, 1, 2], [2, 0, 1], [1, 2, 0]] {
            let lu = SparseLu::factor(&a, &q, 0.1, 0.0).unwrap();
            let b = [1.0, -1.0, 0.5];
            assert!(residual(&a, &lu.solve(&b), &b) < 1e-14);
        }
    }

    #[test]
    fn singular_matrix_yields_null_vector() {
        // path-graph Laplacian: constants are in the kernel
        let a = CsrMatrix::from_dense(&[
            vec![1.0f64, -1.0, 0.0],
            vec![-1.0, 2.0, -1.0],
            vec![0.0, -1.0, 1.0],
        ]);
        let err = SparseLu::factor(&a, &[0, 1, 2], 0.1, 1e-12).unwrap_err();
        assert_eq!(err.step, 2);
        let z = err.near_null;
        let az = a.matvec(&z);
        assert!(az.iter().all(|v| v.abs() < 1e-12));
        assert!((z[0] - z[1]).abs() < 1e-12 && (z[1] - z[2]).abs() < 1e-12);
    }
}
