//! Compressed sparse row matrices assembled from triplets.

use crate::scalar::Real;

/// Coordinate-format accumulator; duplicates are summed on compression.
#[derive(Debug, Clone)]
pub struct Triplets<T> {
    pub n: usize,
    rows: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<T>,
}

impl<T: Real> Triplets<T> {
    pub fn new(n: usize) -> Self {
        Self { n, rows: Vec::new(), cols: Vec::new(), vals: Vec::new() }
    }

    pub fn with_capacity(n: usize, cap: usize) -> Self {
        Self {
            n,
            rows: Vec::with_capacity(cap),
            cols: Vec::with_capacity(cap),
            vals: Vec::with_capacity(cap),
        }
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: T) {
        debug_assert!(i < self.n && j < self.n);
        self.rows.push(i);
        self.cols.push(j);
        self.vals.push(v);
    }

    pub fn extend(&mut self, other: &Triplets<T>) {
        assert_eq!(self.n, other.n);
        self.rows.extend_from_slice(&other.rows);
        self.cols.extend_from_slice(&other.cols);
        self.vals.extend_from_slice(&other.vals);
    }

    pub fn to_csr(&self) -> CsrMatrix<T> {
        CsrMatrix::from_triplets(self)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix<T> {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub vals: Vec<T>,
}

impl<T: Real> CsrMatrix<T> {
    pub fn from_triplets(t: &Triplets<T>) -> Self {
        let n = t.n;
        let mut count = vec![0usize; n + 1];
        for &r in &t.rows {
            count[r + 1] += 1;
        }
        for i in 0..n {
            count[i + 1] += count[i];
        }
        let mut next = count.clone();
        let mut cols = vec![0usize; t.rows.len()];
        let mut vals = vec![T::zero(); t.rows.len()];
        for k in 0..t.rows.len() {
            let r = t.rows[k];
            cols[next[r]] = t.cols[k];
            vals[next[r]] = t.vals[k];
            next[r] += 1;
        }
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::with_capacity(cols.len());
        let mut out = Vec::with_capacity(cols.len());
        let mut scratch: Vec<(usize, T)> = Vec::new();
        for i in 0..n {
            scratch.clear();
            scratch.extend((count[i]..count[i + 1]).map(|k| (cols[k], vals[k])));
            scratch.sort_by_key(|e| e.0);
            let mut k = 0;
            while k < scratch.len() {
                let c = scratch[k].0;
                let mut v = T::zero();
                while k < scratch.len() && scratch[k].0 == c {
                    v += scratch[k].1;
                    k += 1;
                }
                col_idx.push(c);
                out.push(v);
            }
            row_ptr[i + 1] = col_idx.len();
        }
        Self { n, row_ptr, col_idx, vals: out }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            vals: vec![T::one(); n],
        }
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |k| (self.col_idx[k], self.vals[k]))
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[range.clone()].binary_search(&j) {
            Ok(k) => self.vals[range.start + k],
            Err(_) => T::zero(),
        }
    }

    pub fn diag(&self) -> Vec<T> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.n];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[T], y: &mut [T]) {
        assert_eq!(x.len(), self.n);
        for i in 0..self.n {
            let mut s = T::zero();
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.vals[k] * x[self.col_idx[k]];
            }
            y[i] = s;
        }
    }

    pub fn transpose(&self) -> Self {
        let mut t = Triplets::with_capacity(self.n, self.nnz());
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                t.add(j, i, v);
            }
        }
        t.to_csr()
    }

    /// Largest |a_ij - a_ji| relative to the largest |a_ij|.
    pub fn asymmetry(&self) -> T {
        let t = self.transpose();
        let mut num = T::zero();
        let mut den = T::zero();
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                num = num.max((v - t.get(i, j)).abs());
                den = den.max(v.abs());
            }
        }
        if den > T::zero() { num / den } else { T::zero() }
    }

    /// `self + s * other` (patterns are merged).
    pub fn add_scaled(&self, s: T, other: &CsrMatrix<T>) -> Self {
        assert_eq!(self.n, other.n);
        let mut t = Triplets::with_capacity(self.n, self.nnz() + other.nnz());
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                t.add(i, j, v);
            }
            for (j, v) in other.row(i) {
                t.add(i, j, s * v);
            }
        }
        t.to_csr()
    }

    pub fn row_sums(&self) -> Vec<T> {
        (0..self.n).map(|i| self.row(i).map(|(_, v)| v).sum()).collect()
    }

    pub fn quad_form(&self, x: &[T], y: &[T]) -> T {
        let ax = self.mul_vec(y);
        x.iter().zip(&ax).map(|(a, b)| *a * *b).sum()
    }
}

pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(x, y)| *x * *y).sum()
}

pub fn norm2<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

pub fn norm_inf<T: Real>(a: &[T]) -> T {
    a.iter().fold(T::zero(), |m, x| m.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_are_summed() {
        let mut t = Triplets::<f64>::new(2);
        t.add(0, 0, 1.0);
        t.add(0, 0, 2.0);
        t.add(1, 0, -1.0);
        t.add(0, 1, -1.0);
        let a = t.to_csr();
        assert_eq!(a.get(0, 0), 3.0);
        assert_eq!(a.nnz(), 3);
        assert_eq!(a.mul_vec(&[1.0, 1.0]), vec![2.0, -1.0]);
        assert_eq!(a.asymmetry(), 0.0);
    }
}
