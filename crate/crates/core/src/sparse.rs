//! Square complex sparse matrices in CSR form.
//!
//! The contract needed by the rest of the crate is small: O(nnz) matvec,
//! deterministic iteration order (rows ascending, columns ascending within
//! a row), adjoints, products, and cache-friendly multiplication against
//! dense column-major matrices. Entries that are exactly zero are dropped
//! at construction.

use nalgebra::{DMatrix, DVector};

use crate::C64;

#[derive(Debug, Clone, PartialEq)]
pub struct CsMat {
    dim: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<C64>,
}

impl CsMat {
    /// Build from (row, col, value) triplets. Duplicate positions are summed;
    /// exact zeros are dropped.
    pub fn from_triplets(dim: usize, mut triplets: Vec<(usize, usize, C64)>) -> Self {
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut indptr = vec![0usize; dim + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut data: Vec<C64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            debug_assert!(r < dim && c < dim);
            if last == Some((r, c)) {
                *data.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                data.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..dim {
            indptr[r + 1] += indptr[r];
        }
        let mut m = CsMat {
            dim,
            indptr,
            indices,
            data,
        };
        m.drop_zeros();
        m
    }

    pub fn zeros(dim: usize) -> Self {
        CsMat {
            dim,
            indptr: vec![0; dim + 1],
            indices: Vec::new(),
            data: Vec::new(),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::diagonal(&vec![C64::new(1.0, 0.0); dim])
    }

    pub fn diagonal(diag: &[C64]) -> Self {
        let dim = diag.len();
        let triplets = diag
            .iter()
            .enumerate()
            .map(|(i, &v)| (i, i, v))
            .collect();
        Self::from_triplets(dim, triplets)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    /// Deterministic iteration over stored entries, (row, col, value).
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.dim).flat_map(move |r| {
            (self.indptr[r]..self.indptr[r + 1]).map(move |k| (r, self.indices[k], self.data[k]))
        })
    }

    fn drop_zeros(&mut self) {
        if !self.data.iter().any(|v| v.re == 0.0 && v.im == 0.0) {
            return;
        }
        let mut indptr = vec![0usize; self.dim + 1];
        let mut indices = Vec::with_capacity(self.nnz());
        let mut data = Vec::with_capacity(self.nnz());
        for r in 0..self.dim {
            for k in self.indptr[r]..self.indptr[r + 1] {
                let v = self.data[k];
                if v.re != 0.0 || v.im != 0.0 {
                    indices.push(self.indices[k]);
                    data.push(v);
                }
            }
            indptr[r + 1] = data.len();
        }
        self.indptr = indptr;
        self.indices = indices;
        self.data = data;
    }

    pub fn scale(&self, s: C64) -> Self {
        let mut out = self.clone();
        for v in &mut out.data {
            *v *= s;
        }
        out.drop_zeros();
        out
    }

    /// Linear combination sum_k coeff_k * mat_k (all same dimension).
    pub fn lincomb(terms: &[(C64, &CsMat)]) -> Self {
        assert!(!terms.is_empty());
        let dim = terms[0].1.dim;
        assert!(terms.iter().all(|(_, m)| m.dim == dim));
        let mut triplets = Vec::new();
        for &(c, m) in terms {
            for (r, col, v) in m.iter() {
                triplets.push((r, col, c * v));
            }
        }
        Self::from_triplets(dim, triplets)
    }

    pub fn add(&self, other: &CsMat) -> Self {
        Self::lincomb(&[(C64::new(1.0, 0.0), self), (C64::new(1.0, 0.0), other)])
    }

    pub fn sub(&self, other: &CsMat) -> Self {
        Self::lincomb(&[(C64::new(1.0, 0.0), self), (C64::new(-1.0, 0.0), other)])
    }

    pub fn adjoint(&self) -> Self {
        let triplets = self.iter().map(|(r, c, v)| (c, r, v.conj())).collect();
        Self::from_triplets(self.dim, triplets)
    }

    /// Sparse-sparse product self * other.
    pub fn matmul(&self, other: &CsMat) -> Self {
        assert_eq!(self.dim, other.dim);
        let dim = self.dim;
        let mut acc: Vec<C64> = vec![C64::new(0.0, 0.0); dim];
        let mut touched: Vec<usize> = Vec::new();
        let mut indptr = vec![0usize; dim + 1];
        let mut indices = Vec::new();
        let mut data = Vec::new();
        for r in 0..dim {
            for k in self.indptr[r]..self.indptr[r + 1] {
                let a = self.data[k];
                let mid = self.indices[k];
                for j in other.indptr[mid]..other.indptr[mid + 1] {
                    let c = other.indices[j];
                    if acc[c].re == 0.0 && acc[c].im == 0.0 {
                        touched.push(c);
                    }
                    acc[c] += a * other.data[j];
                }
            }
            touched.sort_unstable();
            for &c in &touched {
                let v = acc[c];
                if v.re != 0.0 || v.im != 0.0 {
                    indices.push(c);
                    data.push(v);
                }
                acc[c] = C64::new(0.0, 0.0);
            }
            touched.clear();
            indptr[r + 1] = data.len();
        }
        CsMat {
            dim,
            indptr,
            indices,
            data,
        }
    }

    /// y = A x.
    pub fn matvec(&self, x: &DVector<C64>) -> DVector<C64> {
        assert_eq!(x.len(), self.dim);
        let mut y = DVector::from_element(self.dim, C64::new(0.0, 0.0));
        self.matvec_into(x.as_slice(), y.as_mut_slice());
        y
    }

    pub fn matvec_into(&self, x: &[C64], y: &mut [C64]) {
        for r in 0..self.dim {
            let mut s = C64::new(0.0, 0.0);
            for k in self.indptr[r]..self.indptr[r + 1] {
                s += self.data[k] * x[self.indices[k]];
            }
            y[r] = s;
        }
    }

    /// out = beta*out + alpha * A * X, with X, out column-major slices of
    /// shape (dim, ncols).
    pub fn spmm_left_slices(&self, xs: &[C64], os: &mut [C64], ncols: usize, alpha: C64, beta: C64) {
        let n = self.dim;
        assert_eq!(xs.len(), n * ncols);
        assert_eq!(os.len(), n * ncols);
        for col in 0..ncols {
            let xcol = &xs[col * n..(col + 1) * n];
            let ocol = &mut os[col * n..(col + 1) * n];
            for r in 0..n {
                let mut s = C64::new(0.0, 0.0);
                for k in self.indptr[r]..self.indptr[r + 1] {
                    s += self.data[k] * xcol[self.indices[k]];
                }
                ocol[r] = beta * ocol[r] + alpha * s;
            }
        }
    }

    /// out = beta*out + alpha * X * A (X square, column-major).
    pub fn spmm_right_slices(&self, xs: &[C64], os: &mut [C64], alpha: C64, beta: C64) {
        let n = self.dim;
        assert_eq!(xs.len(), n * n);
        assert_eq!(os.len(), n * n);
        if beta.re != 1.0 || beta.im != 0.0 {
            for v in os.iter_mut() {
                *v *= beta;
            }
        }
        // (X A)[:, c] += alpha * v * X[:, r] for each entry A[r, c] = v.
        for r in 0..n {
            let xcol = &xs[r * n..(r + 1) * n];
            for k in self.indptr[r]..self.indptr[r + 1] {
                let c = self.indices[k];
                let av = alpha * self.data[k];
                let ocol = &mut os[c * n..(c + 1) * n];
                for i in 0..n {
                    ocol[i] += av * xcol[i];
                }
            }
        }
    }

    /// out = beta*out + alpha * X * A^dag (X square, column-major).
    pub fn spmm_right_adjoint_slices(&self, xs: &[C64], os: &mut [C64], alpha: C64, beta: C64) {
        let n = self.dim;
        assert_eq!(xs.len(), n * n);
        assert_eq!(os.len(), n * n);
        if beta.re != 1.0 || beta.im != 0.0 {
            for v in os.iter_mut() {
                *v *= beta;
            }
        }
        // (X A^dag)[:, r] += alpha * conj(v) * X[:, c] for each entry A[r, c] = v.
        for r in 0..n {
            for k in self.indptr[r]..self.indptr[r + 1] {
                let c = self.indices[k];
                let av = alpha * self.data[k].conj();
                // split borrows: columns r and c of the flat buffers
                let xcol_ptr = &xs[c * n..(c + 1) * n];
                let ocol = &mut os[r * n..(r + 1) * n];
                for i in 0..n {
                    ocol[i] += av * xcol_ptr[i];
                }
            }
        }
    }

    /// out = beta*out + alpha * A * X.
    pub fn spmm_left(&self, x: &DMatrix<C64>, out: &mut DMatrix<C64>, alpha: C64, beta: C64) {
        assert_eq!(x.nrows(), self.dim);
        assert_eq!(out.shape(), x.shape());
        let ncols = x.ncols();
        self.spmm_left_slices(x.as_slice(), out.as_mut_slice(), ncols, alpha, beta);
    }

    /// out = beta*out + alpha * X * A.
    pub fn spmm_right(&self, x: &DMatrix<C64>, out: &mut DMatrix<C64>, alpha: C64, beta: C64) {
        assert_eq!(x.ncols(), self.dim);
        assert_eq!(out.shape(), x.shape());
        self.spmm_right_slices(x.as_slice(), out.as_mut_slice(), alpha, beta);
    }

    /// out = beta*out + alpha * X * A^dag.
    pub fn spmm_right_adjoint(
        &self,
        x: &DMatrix<C64>,
        out: &mut DMatrix<C64>,
        alpha: C64,
        beta: C64,
    ) {
        assert_eq!(x.ncols(), self.dim);
        assert_eq!(out.shape(), x.shape());
        self.spmm_right_adjoint_slices(x.as_slice(), out.as_mut_slice(), alpha, beta);
    }

    pub fn diag(&self) -> Vec<C64> {
        let mut d = vec![C64::new(0.0, 0.0); self.dim];
        for (r, c, v) in self.iter() {
            if r == c {
                d[r] = v;
            }
        }
        d
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut m = DMatrix::from_element(self.dim, self.dim, C64::new(0.0, 0.0));
        for (r, c, v) in self.iter() {
            m[(r, c)] = v;
        }
        m
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest |A[i,j] - conj(A[j,i])| over all stored positions.
    pub fn hermiticity_deviation(&self) -> f64 {
        self.sub(&self.adjoint())
            .data
            .iter()
            .map(|v| v.norm())
            .fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_deviation() <= tol
    }
}
