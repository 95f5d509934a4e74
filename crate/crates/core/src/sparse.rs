//! Compressed sparse row storage for complex matrices.

use nalgebra::DMatrix;
use num_complex::Complex64;

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<Complex64>,
}

impl CsrMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            indptr: vec![0; nrows + 1],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![Complex64::new(1.0, 0.0); n])
    }

    pub fn from_diagonal(diag: &[Complex64]) -> Self {
        let n = diag.len();
        let mut triplets = Vec::with_capacity(n);
        for (i, &d) in diag.iter().enumerate() {
            triplets.push((i, i, d));
        }
        Self::from_triplets(n, n, triplets)
    }

    /// Builds a matrix from `(row, col, value)` entries. Duplicates are summed,
    /// columns are sorted within each row and exact zeros are dropped, so the
    /// structure depends only on the entries and never on their order.
    pub fn from_triplets(nrows: usize, ncols: usize, mut triplets: Vec<(usize, usize, Complex64)>) -> Self {
        for &(r, c, _) in &triplets {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) outside {nrows}x{ncols}");
        }
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut indptr = vec![0usize; nrows + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values: Vec<Complex64> = Vec::with_capacity(triplets.len());
        let mut rows = Vec::with_capacity(triplets.len());
        for (r, c, v) in triplets {
            if let (Some(&lr), Some(&lc)) = (rows.last(), indices.last()) {
                if lr == r && lc == c {
                    *values.last_mut().unwrap() += v;
                    continue;
                }
            }
            rows.push(r);
            indices.push(c);
            values.push(v);
        }
        let mut out_idx = Vec::with_capacity(indices.len());
        let mut out_val = Vec::with_capacity(values.len());
        for ((r, c), v) in rows.into_iter().zip(indices).zip(values) {
            if v != Complex64::new(0.0, 0.0) {
                indptr[r + 1] += 1;
                out_idx.push(c);
                out_val.push(v);
            }
        }
        for i in 0..nrows {
            indptr[i + 1] += indptr[i];
        }
        Self {
            nrows,
            ncols,
            indptr,
            indices: out_idx,
            values: out_val,
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Iterates `(row, col, value)` in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        (0..self.nrows).flat_map(move |r| {
            (self.indptr[r]..self.indptr[r + 1]).map(move |k| (r, self.indices[k], self.values[k]))
        })
    }

    pub fn row(&self, r: usize) -> (&[usize], &[Complex64]) {
        let span = self.indptr[r]..self.indptr[r + 1];
        (&self.indices[span.clone()], &self.values[span])
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        let (cols, vals) = self.row(r);
        match cols.binary_search(&c) {
            Ok(k) => vals[k],
            Err(_) => Complex64::new(0.0, 0.0),
        }
    }

    pub fn diagonal(&self) -> Vec<Complex64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    /// `y = A x`.
    pub fn matvec(&self, x: &[Complex64], y: &mut [Complex64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for r in 0..self.nrows {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in self.indptr[r]..self.indptr[r + 1] {
                acc += self.values[k] * x[self.indices[k]];
            }
            y[r] = acc;
        }
    }

    /// `Y = A X` for column-major blocks of `ncols_x` columns.
    pub fn matmul_cols(&self, x: &[Complex64], y: &mut [Complex64], ncols_x: usize) {
        let (n, m) = (self.nrows, self.ncols);
        assert_eq!(x.len(), m * ncols_x);
        assert_eq!(y.len(), n * ncols_x);
        for col in 0..ncols_x {
            let xc = &x[col * m..(col + 1) * m];
            let yc = &mut y[col * n..(col + 1) * n];
            self.matvec(xc, yc);
        }
    }

    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut y = vec![Complex64::new(0.0, 0.0); self.nrows];
        self.matvec(x, &mut y);
        y
    }

    pub fn adjoint(&self) -> Self {
        let triplets = self.iter().map(|(r, c, v)| (c, r, v.conj())).collect();
        Self::from_triplets(self.ncols, self.nrows, triplets)
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let triplets = self.iter().map(|(r, c, v)| (r, c, v * s)).collect();
        Self::from_triplets(self.nrows, self.ncols, triplets)
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let triplets = self.iter().chain(other.iter()).collect();
        Self::from_triplets(self.nrows, self.ncols, triplets)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.ncols, other.nrows);
        let mut triplets = Vec::new();
        for (r, k, a) in self.iter() {
            let (cols, vals) = other.row(k);
            for (&c, &b) in cols.iter().zip(vals) {
                triplets.push((r, c, a * b));
            }
        }
        Self::from_triplets(self.nrows, other.ncols, triplets)
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let mut m = DMatrix::<Complex64>::zeros(self.nrows, self.ncols);
        for (r, c, v) in self.iter() {
            m[(r, c)] += v;
        }
        m
    }

    /// Keeps every entry of `m` whose modulus exceeds `drop_below`.
    pub fn from_dense(m: &DMatrix<Complex64>, drop_below: f64) -> Self {
        let mut triplets = Vec::new();
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                let v = m[(r, c)];
                if v.norm() > drop_below {
                    triplets.push((r, c, v));
                }
            }
        }
        Self::from_triplets(m.nrows(), m.ncols(), triplets)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |acc, v| acc.max(v.norm()))
    }

    /// `max |A - A†|` over all entries.
    pub fn hermiticity_defect(&self) -> f64 {
        if self.nrows != self.ncols {
            return f64::INFINITY;
        }
        self.sub(&self.adjoint()).max_abs()
    }

    /// Largest absolute row sum, an upper bound on the spectral norm for
    /// Hermitian matrices.
    pub fn max_row_sum(&self) -> f64 {
        (0..self.nrows)
            .map(|r| self.row(r).1.iter().map(|v| v.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Gershgorin enclosure `[lo, hi]` of the spectrum, treating the matrix as
    /// Hermitian (real diagonal).
    pub fn gershgorin_interval(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            let mut centre = 0.0;
            let mut radius = 0.0;
            for (&c, v) in cols.iter().zip(vals) {
                if c == r {
                    centre = v.re;
                } else {
                    radius += v.norm();
                }
            }
            lo = lo.min(centre - radius);
            hi = hi.max(centre + radius);
        }
        if self.nrows == 0 {
            (0.0, 0.0)
        } else {
            (lo, hi)
        }
    }

    /// Connected components of the sparsity graph (treated as undirected).
    /// Each component lists its indices in ascending order; components are
    /// ordered by their smallest index.
    pub fn connected_components(&self) -> Vec<Vec<usize>> {
        let n = self.nrows;
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for (r, c, _) in self.iter() {
            let (a, b) = (find(&mut parent, r), find(&mut parent, c));
            if a != b {
                let (lo, hi) = (a.min(b), a.max(b));
                parent[hi] = lo;
            }
        }
        let mut label = vec![usize::MAX; n];
        let mut comps: Vec<Vec<usize>> = Vec::new();
        for i in 0..n {
            let root = find(&mut parent, i);
            if label[root] == usize::MAX {
                label[root] = comps.len();
                comps.push(Vec::new());
            }
            comps[label[root]].push(i);
        }
        comps
    }

    /// Principal submatrix on `idx` as a dense matrix.
    pub fn dense_block(&self, idx: &[usize]) -> DMatrix<Complex64> {
        let mut pos = std::collections::HashMap::with_capacity(idx.len());
        for (k, &i) in idx.iter().enumerate() {
            pos.insert(i, k);
        }
        let mut m = DMatrix::<Complex64>::zeros(idx.len(), idx.len());
        for (a, &r) in idx.iter().enumerate() {
            let (cols, vals) = self.row(r);
            for (c, v) in cols.iter().zip(vals) {
                if let Some(&b) = pos.get(c) {
                    m[(a, b)] += *v;
                }
            }
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn triplets_sum_duplicates_and_drop_zeros() {
        let m = CsrMatrix::from_triplets(
            2,
            2,
            vec![(1, 0, c(1.0, 0.0)), (0, 1, c(2.0, 0.0)), (1, 0, c(-1.0, 0.0)), (0, 1, c(0.0, 1.0))],
        );
        assert_eq!(m.nnz(), 1);
        assert_eq!(m.get(0, 1), c(2.0, 1.0));
        assert_eq!(m.get(1, 0), c(0.0, 0.0));
    }

    #[test]
    fn structure_is_order_independent() {
        let t = vec![(0, 0, c(1.0, 0.0)), (2, 1, c(0.5, 0.5)), (1, 2, c(0.0, -1.0))];
        let mut r = t.clone();
        r.reverse();
        assert_eq!(CsrMatrix::from_triplets(3, 3, t), CsrMatrix::from_triplets(3, 3, r));
    }

    #[test]
    fn products_match_dense() {
        let a = CsrMatrix::from_triplets(3, 3, vec![(0, 1, c(1.0, 2.0)), (2, 0, c(-1.0, 0.5)), (1, 1, c(3.0, 0.0))]);
        let b = CsrMatrix::from_triplets(3, 3, vec![(1, 2, c(0.0, 1.0)), (0, 0, c(2.0, 0.0)), (1, 0, c(1.0, 1.0))]);
        let dense = a.to_dense() * b.to_dense();
        assert!((a.matmul(&b).to_dense() - dense).camax() < 1e-15);
        let x = vec![c(1.0, 0.0), c(0.0, 1.0), c(-2.0, 0.5)];
        let y = a.apply(&x);
        let yd = a.to_dense() * nalgebra::DVector::from_vec(x);
        for (p, q) in y.iter().zip(yd.iter()) {
            assert!((p - q).norm() < 1e-15);
        }
        assert!((a.adjoint().to_dense() - a.to_dense().adjoint()).camax() == 0.0);
    }

    #[test]
    fn gershgorin_encloses_spectrum() {
        let h = CsrMatrix::from_triplets(
            2,
            2,
            vec![(0, 0, c(1.0, 0.0)), (1, 1, c(-1.0, 0.0)), (0, 1, c(0.0, 0.5)), (1, 0, c(0.0, -0.5))],
        );
        let (lo, hi) = h.gershgorin_interval();
        let ev = 1.25f64.sqrt();
        assert!(lo <= -ev && hi >= ev);
        assert_eq!(h.hermiticity_defect(), 0.0);
    }

    #[test]
    fn components_split_disconnected_blocks() {
        let m = CsrMatrix::from_triplets(4, 4, vec![(0, 2, c(1.0, 0.0)), (3, 3, c(1.0, 0.0))]);
        assert_eq!(m.connected_components(), vec![vec![0, 2], vec![1], vec![3]]);
    }
}
