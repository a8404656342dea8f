//! Small dense linear algebra, done in double precision through nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::Real;

pub fn to_na<T: Real>(rows: &[Vec<T>]) -> DMatrix<f64> {
    let r = rows.len();
    let c = rows.first().map_or(0, |x| x.len());
    DMatrix::from_fn(r, c, |i, j| rows[i][j].as_f64())
}

pub fn from_na<T: Real>(m: &DMatrix<f64>) -> Vec<Vec<T>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| T::lit(m[(i, j)])).collect())
        .collect()
}

/// Orthonormal basis (columns) of the nullspace of `a` (`r x c`), with
/// singular values below `rel_tol * sigma_max` treated as zero.
pub fn nullspace<T: Real>(a: &[Vec<T>], cols: usize, rel_tol: f64) -> Vec<Vec<T>> {
    if a.is_empty() {
        return (0..cols)
            .map(|j| (0..cols).map(|i| if i == j { T::one() } else { T::zero() }).collect())
            .collect();
    }
    // pad with zero rows so the SVD returns a full set of right singular vectors
    let r = a.len().max(cols);
    let m = DMatrix::from_fn(r, cols, |i, j| a.get(i).map_or(0.0, |row| row[j].as_f64()));
    let svd = m.svd(false, true);
    let vt = svd.v_t.expect("right singular vectors requested");
    let smax = svd.singular_values.iter().fold(0.0f64, |s, v| s.max(*v));
    let mut basis = Vec::new();
    for k in 0..cols {
        if smax == 0.0 || svd.singular_values[k] <= rel_tol * smax {
            basis.push((0..cols).map(|i| T::lit(vt[(k, i)])).collect());
        }
    }
    basis
}

/// Eigen-pairs of the symmetric pencil `(a, b)` with `b` positive definite,
/// eigenvalues ascending; eigenvectors are `b`-orthonormal columns.
pub fn generalized_symmetric_eigen(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Option<(Vec<f64>, DMatrix<f64>)> {
    let chol = b.clone().cholesky()?;
    let l = chol.l();
    let linv = l.clone().try_inverse()?;
    let c = &linv * a * linv.transpose();
    let c = (&c + c.transpose()) * 0.5;
    let eig = SymmetricEigen::new(c);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let y = DMatrix::from_fn(a.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    let x = linv.transpose() * y;
    Some((vals, x))
}

/// Solves a small dense system by LU; `None` if singular.
pub fn solve<T: Real>(a: &[Vec<T>], b: &[T]) -> Option<Vec<T>> {
    let m = to_na(a);
    let rhs = DVector::from_iterator(b.len(), b.iter().map(|v| v.as_f64()));
    let x = m.lu().solve(&rhs)?;
    Some(x.iter().map(|v| T::lit(*v)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nullspace_of_single_row() {
        let ns = nullspace(&[vec![1.0f64, 0.0, 0.0, 1.0]], 4, 1e-10);
        assert_eq!(ns.len(), 3);
        for v in &ns {
            assert!((v[0] + v[3]).abs() < 1e-12);
        }
    }

    #[test]
    fn full_rank_has_empty_nullspace() {
        let a = vec![vec![1.0f64, 2.0], vec![3.0, 4.0]];
        assert!(nullspace(&a, 2, 1e-10).is_empty());
        let x = solve(&a, &[5.0, 6.0]).unwrap();
        assert!((x[0] + 4.0).abs() < 1e-12 && (x[1] - 4.5).abs() < 1e-12);
    }

    #[test]
    fn pencil_eigenvalues() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 6.0]);
        let b = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]);
        let (vals, _) = generalized_symmetric_eigen(&a, &b).unwrap();
        assert!((vals[0] - 2.0).abs() < 1e-12 && (vals[1] - 3.0).abs() < 1e-12);
    }
}
