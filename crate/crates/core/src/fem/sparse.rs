//! Compressed sparse storage for symmetric matrices with optional low-rank
//! terms kept in factored form.

use crate::Real;

/// Square CSR matrix, both triangles stored.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix<T> {
    n: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<T>,
}

impl<T: Real> CsrMatrix<T> {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            indptr: vec![0; n + 1],
            indices: Vec::new(),
            data: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![T::one(); n])
    }

    pub fn diagonal(d: &[T]) -> Self {
        let n = d.len();
        Self {
            n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            data: d.to_vec(),
        }
    }

    /// Sums duplicate entries. The sort is stable, so contributions are added
    /// in the order given and mirrored entries receive identical sums.
    pub fn from_triplets(n: usize, mut trip: Vec<(usize, usize, T)>) -> Self {
        trip.sort_by_key(|&(i, j, _)| (i, j));
        let mut indptr = vec![0; n + 1];
        let mut indices = Vec::with_capacity(trip.len());
        let mut data: Vec<T> = Vec::with_capacity(trip.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in trip {
            assert!(i < n && j < n, "triplet ({i}, {j}) outside {n} x {n}");
            if last == Some((i, j)) {
                *data.last_mut().unwrap() += v;
            } else {
                indices.push(j);
                data.push(v);
                indptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..n {
            indptr[i + 1] += indptr[i];
        }
        Self {
            n,
            indptr,
            indices,
            data,
        }
    }

    pub fn from_dense(a: &[Vec<T>]) -> Self {
        let n = a.len();
        let mut trip = Vec::new();
        for (i, row) in a.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v != T::zero() {
                    trip.push((i, j, v));
                }
            }
        }
        Self::from_triplets(n, trip)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[T]) {
        let r = self.indptr[i]..self.indptr[i + 1];
        (&self.indices[r.clone()], &self.data[r])
    }

    pub fn row_mut(&mut self, i: usize) -> (&[usize], &mut [T]) {
        let r = self.indptr[i]..self.indptr[i + 1];
        (&self.indices[r.clone()], &mut self.data[r])
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        let (idx, val) = self.row(i);
        match idx.binary_search(&j) {
            Ok(p) => val[p],
            Err(_) => T::zero(),
        }
    }

    pub fn diag(&self) -> Vec<T> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn matvec_into(&self, x: &[T], y: &mut [T]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        for (i, yi) in y.iter_mut().enumerate() {
            let (idx, val) = self.row(i);
            let mut s = T::zero();
            for (j, v) in idx.iter().zip(val) {
                s += *v * x[*j];
            }
            *yi = s;
        }
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.n];
        self.matvec_into(x, &mut y);
        y
    }

    /// `a * self + b * other`.
    pub fn lin_comb(&self, a: T, other: &Self, b: T) -> Self {
        assert_eq!(self.n, other.n, "dimension mismatch");
        let mut indptr = vec![0; self.n + 1];
        let mut indices = Vec::with_capacity(self.nnz().max(other.nnz()));
        let mut data = Vec::with_capacity(indices.capacity());
        for i in 0..self.n {
            let (ia, va) = self.row(i);
            let (ib, vb) = other.row(i);
            let (mut p, mut q) = (0, 0);
            while p < ia.len() || q < ib.len() {
                let ja = ia.get(p).copied().unwrap_or(usize::MAX);
                let jb = ib.get(q).copied().unwrap_or(usize::MAX);
                if ja == jb {
                    indices.push(ja);
                    data.push(a * va[p] + b * vb[q]);
                    p += 1;
                    q += 1;
                } else if ja < jb {
                    indices.push(ja);
                    data.push(a * va[p]);
                    p += 1;
                } else {
                    indices.push(jb);
                    data.push(b * vb[q]);
                    q += 1;
                }
            }
            indptr[i + 1] = indices.len();
        }
        Self {
            n: self.n,
            indptr,
            indices,
            data,
        }
    }

    pub fn scaled(&self, a: T) -> Self {
        let mut out = self.clone();
        for v in &mut out.data {
            *v *= a;
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let mut trip = Vec::with_capacity(self.nnz());
        for i in 0..self.n {
            let (idx, val) = self.row(i);
            for (j, v) in idx.iter().zip(val) {
                trip.push((*j, i, *v));
            }
        }
        Self::from_triplets(self.n, trip)
    }

    /// Exact symmetry test.
    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| {
            let (idx, val) = self.row(i);
            idx.iter().zip(val).all(|(&j, &v)| self.get(j, i) == v)
        })
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    /// Infinity norm (max absolute row sum).
    pub fn norm_inf(&self) -> T {
        (0..self.n)
            .map(|i| self.row(i).1.iter().map(|v| v.abs()).sum::<T>())
            .fold(T::zero(), |m, v| m.max(v))
    }

    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let mut d = vec![vec![T::zero(); self.n]; self.n];
        for (i, row) in d.iter_mut().enumerate() {
            let (idx, val) = self.row(i);
            for (j, v) in idx.iter().zip(val) {
                row[*j] = *v;
            }
        }
        d
    }

    /// Embeds the matrix as the `(offset, offset)` block of a larger one.
    pub(crate) fn triplets_into(&self, ro: usize, co: usize, out: &mut Vec<(usize, usize, T)>) {
        for i in 0..self.n {
            let (idx, val) = self.row(i);
            for (j, v) in idx.iter().zip(val) {
                out.push((ro + i, co + *j, *v));
            }
        }
    }
}

/// Sparse vector with sorted indices.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseVec<T> {
    pub idx: Vec<usize>,
    pub val: Vec<T>,
}

impl<T: Real> SparseVec<T> {
    pub fn from_dense(v: &[T]) -> Self {
        let (idx, val) = v
            .iter()
            .enumerate()
            .filter(|(_, x)| **x != T::zero())
            .map(|(i, x)| (i, *x))
            .unzip();
        Self { idx, val }
    }

    /// Collects `(index, value)` pairs, summing duplicates.
    pub fn from_pairs(mut pairs: Vec<(usize, T)>) -> Self {
        pairs.sort_by_key(|p| p.0);
        let mut idx: Vec<usize> = Vec::with_capacity(pairs.len());
        let mut val: Vec<T> = Vec::with_capacity(pairs.len());
        for (i, v) in pairs {
            if idx.last() == Some(&i) {
                *val.last_mut().unwrap() += v;
            } else {
                idx.push(i);
                val.push(v);
            }
        }
        Self { idx, val }
    }

    pub fn nnz(&self) -> usize {
        self.idx.len()
    }

    pub fn dot(&self, x: &[T]) -> T {
        self.idx.iter().zip(&self.val).map(|(i, v)| *v * x[*i]).sum()
    }

    pub fn axpy_into(&self, a: T, y: &mut [T]) {
        for (i, v) in self.idx.iter().zip(&self.val) {
            y[*i] += a * *v;
        }
    }

    pub fn to_dense(&self, n: usize) -> Vec<T> {
        let mut d = vec![T::zero(); n];
        self.axpy_into(T::one(), &mut d);
        d
    }
}

/// `weight * v v^T`.
#[derive(Clone, Debug, PartialEq)]
pub struct RankOne<T> {
    pub vector: SparseVec<T>,
    pub weight: T,
}

/// Symmetric matrix `base + sum_k w_k v_k v_k^T` with the low-rank part factored.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseSymMatrix<T> {
    pub base: CsrMatrix<T>,
    pub terms: Vec<RankOne<T>>,
}

impl<T: Real> From<CsrMatrix<T>> for SparseSymMatrix<T> {
    fn from(base: CsrMatrix<T>) -> Self {
        Self {
            base,
            terms: Vec::new(),
        }
    }
}

impl<T: Real> SparseSymMatrix<T> {
    pub fn zeros(n: usize) -> Self {
        CsrMatrix::zeros(n).into()
    }

    pub fn low_rank(n: usize, vectors: Vec<SparseVec<T>>, weight: T) -> Self {
        Self {
            base: CsrMatrix::zeros(n),
            terms: vectors
                .into_iter()
                .map(|vector| RankOne { vector, weight })
                .collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.base.n()
    }

    pub fn rank_one_terms(&self) -> &[RankOne<T>] {
        &self.terms
    }

    pub fn apply_into(&self, x: &[T], y: &mut [T]) {
        self.base.matvec_into(x, y);
        for t in &self.terms {
            let c = t.weight * t.vector.dot(x);
            t.vector.axpy_into(c, y);
        }
    }

    pub fn apply(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.n()];
        self.apply_into(x, &mut y);
        y
    }

    pub fn quad_form(&self, x: &[T], y: &[T]) -> T {
        dot(&self.apply(x), y)
    }

    /// `a * self + b * other`; low-rank terms are concatenated with scaled weights.
    pub fn lin_comb(&self, a: T, other: &Self, b: T) -> Self {
        let base = self.base.lin_comb(a, &other.base, b);
        let mut terms: Vec<RankOne<T>> = self
            .terms
            .iter()
            .map(|t| RankOne {
                vector: t.vector.clone(),
                weight: a * t.weight,
            })
            .collect();
        terms.extend(other.terms.iter().map(|t| RankOne {
            vector: t.vector.clone(),
            weight: b * t.weight,
        }));
        terms.retain(|t| t.weight != T::zero());
        Self { base, terms }
    }

    pub fn scaled(&self, a: T) -> Self {
        self.lin_comb(a, &Self::zeros(self.n()), T::zero())
    }

    pub fn plus(&self, other: &Self) -> Self {
        self.lin_comb(T::one(), other, T::one())
    }

    /// Entries an explicit expansion of the low-rank part would add.
    pub fn expansion_cost(&self) -> usize {
        self.terms.iter().map(|t| t.vector.nnz() * t.vector.nnz()).sum()
    }

    /// Explicit CSR of the whole matrix. Each outer product is added as its
    /// own symmetric set of triplets, so the result stays exactly symmetric.
    pub fn expand(&self) -> CsrMatrix<T> {
        let mut trip = Vec::with_capacity(self.base.nnz() + self.expansion_cost());
        self.base.triplets_into(0, 0, &mut trip);
        for t in &self.terms {
            let v = &t.vector;
            for (a, &i) in v.idx.iter().enumerate() {
                for (b, &j) in v.idx.iter().enumerate() {
                    trip.push((i, j, t.weight * v.val[a] * v.val[b]));
                }
            }
        }
        CsrMatrix::from_triplets(self.n(), trip)
    }
}

pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(x, y)| *x * *y).sum()
}

pub fn norm2<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}
