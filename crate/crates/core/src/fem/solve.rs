//! Symmetric positive definite solvers: envelope Cholesky on a reverse
//! Cuthill-McKee ordering, and Jacobi-preconditioned conjugate gradients.

use std::collections::VecDeque;

use thiserror::Error;

use super::sparse::{norm2, CsrMatrix};
use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("matrix is not positive definite: pivot {pivot:e} at elimination step {step} of {n}")]
    NotPositiveDefinite { step: usize, n: usize, pivot: f64 },
    #[error("conjugate gradients broke down after {iterations} iterations")]
    Breakdown { iterations: usize },
    #[error("conjugate gradients reached residual {residual:e} > {tol:e} after {iterations} iterations")]
    NotConverged { iterations: usize, residual: f64, tol: f64 },
    #[error("dimension mismatch: matrix {n}, vector {len}")]
    Dimension { n: usize, len: usize },
    #[error("non-finite entry in the {0}")]
    NonFinite(&'static str),
}

/// Envelope larger than this many entries switches `solve_spd` to CG.
pub const ENVELOPE_BUDGET: usize = 200_000_000;

/// Ordering and envelope structure of a sparsity pattern.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Symbolic {
    pub n: usize,
    /// New position to original index.
    pub perm: Vec<usize>,
    /// Original index to new position.
    pub iperm: Vec<usize>,
    first: Vec<usize>,
    start: Vec<usize>,
}

impl Symbolic {
    pub fn new<T: Real>(a: &CsrMatrix<T>) -> Self {
        let n = a.n;
        let perm = rcm(a);
        let mut iperm = vec![0; n];
        for (k, &v) in perm.iter().enumerate() {
            iperm[v] = k;
        }
        let mut first: Vec<usize> = (0..n).collect();
        for r in 0..n {
            for (c, _) in a.row(r) {
                let (i, j) = (iperm[r], iperm[c]);
                let (i, j) = if j <= i { (i, j) } else { (j, i) };
                first[i] = first[i].min(j);
            }
        }
        let mut start = vec![0; n + 1];
        for i in 0..n {
            start[i + 1] = start[i] + (i - first[i] + 1);
        }
        Self { n, perm, iperm, first, start }
    }

    pub fn envelope_size(&self) -> usize {
        self.start[self.n]
    }

    /// Largest distance from a row's first entry to its diagonal.
    pub fn bandwidth(&self) -> usize {
        (0..self.n).map(|i| i - self.first[i]).max().unwrap_or(0)
    }
}

fn rcm<T: Real>(a: &CsrMatrix<T>) -> Vec<usize> {
    let n = a.n;
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for (j, _) in a.row(i) {
            if i != j {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    for l in &mut adj {
        l.sort_unstable();
        l.dedup();
    }
    let deg: Vec<usize> = adj.iter().map(|l| l.len()).collect();
    let mut placed = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&v| (deg[v], v));
    for &seed in &by_degree {
        if placed[seed] {
            continue;
        }
        // pseudo-peripheral start: repeat BFS from the last, lowest-degree node
        let mut start = seed;
        let mut depth = 0;
        for _ in 0..4 {
            let (levels, far) = bfs_levels(&adj, &deg, start, &placed);
            if levels <= depth {
                break;
            }
            depth = levels;
            start = far;
        }
        let mut queue = VecDeque::from([start]);
        placed[start] = true;
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut nb: Vec<usize> = adj[v].iter().copied().filter(|&w| !placed[w]).collect();
            nb.sort_by_key(|&w| (deg[w], w));
            for w in nb {
                placed[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

fn bfs_levels(adj: &[Vec<usize>], deg: &[usize], start: usize, placed: &[bool]) -> (usize, usize) {
    let mut level = vec![usize::MAX; adj.len()];
    level[start] = 0;
    let mut queue = VecDeque::from([start]);
    let mut last = start;
    while let Some(v) = queue.pop_front() {
        last = v;
        for &w in &adj[v] {
            if !placed[w] && level[w] == usize::MAX {
                level[w] = level[v] + 1;
                queue.push_back(w);
            }
        }
    }
    let depth = level[last];
    let far = (0..adj.len())
        .filter(|&v| level[v] == depth)
        .min_by_key(|&v| (deg[v], v))
        .unwrap_or(last);
    (depth, far)
}

/// Envelope Cholesky factor L (row storage) of P A Pᵀ.
#[derive(Debug, Clone)]
pub struct Cholesky<T> {
    sym: Symbolic,
    data: Vec<T>,
}

impl<T: Real> Cholesky<T> {
    pub fn factor(a: &CsrMatrix<T>) -> Result<Self, SolveError> {
        let sym = Symbolic::new(a);
        Self::factor_with(&sym, a)
    }

    /// Numeric factorization reusing an ordering computed for the same pattern.
    pub fn factor_with(sym: &Symbolic, a: &CsrMatrix<T>) -> Result<Self, SolveError> {
        let n = a.n;
        assert_eq!(sym.n, n, "symbolic structure for another size");
        let (first, start) = (&sym.first, &sym.start);
        let mut data = vec![T::zero(); sym.envelope_size()];
        let mut diag = vec![T::zero(); n];
        for r in 0..n {
            let i = sym.iperm[r];
            for (c, v) in a.row(r) {
                let j = sym.iperm[c];
                if j <= i {
                    assert!(j >= first[i], "pattern differs from the symbolic structure");
                    data[start[i] + j - first[i]] += v;
                }
                if j == i {
                    diag[i] = v;
                }
            }
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(SolveError::NonFinite("matrix"));
        }
        let tiny = T::epsilon() * T::lit(1e3);
        for i in 0..n {
            let fi = first[i];
            let ri = start[i];
            for j in fi..i {
                let fj = first[j];
                let rj = start[j];
                let k0 = fi.max(fj);
                let mut s = data[ri + j - fi];
                for k in k0..j {
                    s -= data[ri + k - fi] * data[rj + k - fj];
                }
                data[ri + j - fi] = s / data[rj + j - fj];
            }
            let mut d = data[ri + i - fi];
            for k in fi..i {
                let l = data[ri + k - fi];
                d -= l * l;
            }
            if !(d > tiny * diag[i].abs()) || !(diag[i] > T::zero()) {
                return Err(SolveError::NotPositiveDefinite { step: i, n, pivot: d.f64() });
            }
            data[ri + i - fi] = d.sqrt();
        }
        Ok(Self { sym: sym.clone(), data })
    }

    pub fn n(&self) -> usize {
        self.sym.n
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.sym.n;
        assert_eq!(b.len(), n, "right-hand side length");
        let (first, start) = (&self.sym.first, &self.sym.start);
        let mut y: Vec<T> = self.sym.perm.iter().map(|&v| b[v]).collect();
        for i in 0..n {
            let fi = first[i];
            let ri = start[i];
            let mut s = y[i];
            for k in fi..i {
                s -= self.data[ri + k - fi] * y[k];
            }
            y[i] = s / self.data[ri + i - fi];
        }
        for i in (0..n).rev() {
            let fi = first[i];
            let ri = start[i];
            let xi = y[i] / self.data[ri + i - fi];
            y[i] = xi;
            for k in fi..i {
                y[k] -= self.data[ri + k - fi] * xi;
            }
        }
        let mut x = vec![T::zero(); n];
        for (k, &v) in self.sym.perm.iter().enumerate() {
            x[v] = y[k];
        }
        x
    }
}

/// Jacobi-preconditioned conjugate gradients. Returns the solution and the
/// iteration count; `tol` bounds ‖b − Ax‖/‖b‖.
pub fn cg<T: Real>(
    a: &CsrMatrix<T>,
    b: &[T],
    x0: Option<&[T]>,
    tol: T,
    max_iter: usize,
) -> Result<(Vec<T>, usize), SolveError> {
    let n = a.n;
    if b.len() != n {
        return Err(SolveError::Dimension { n, len: b.len() });
    }
    let bn = norm2(b);
    if bn == T::zero() {
        return Ok((vec![T::zero(); n], 0));
    }
    let dinv: Vec<T> = a
        .diag()
        .into_iter()
        .map(|d| if d > T::zero() { T::one() / d } else { T::one() })
        .collect();
    let mut x = x0.map_or_else(|| vec![T::zero(); n], |v| v.to_vec());
    let ax = a.mul_vec(&x);
    let mut r: Vec<T> = b.iter().zip(&ax).map(|(b, a)| *b - *a).collect();
    let mut z: Vec<T> = r.iter().zip(&dinv).map(|(r, d)| *r * *d).collect();
    let mut p = z.clone();
    let mut rz: T = r.iter().zip(&z).map(|(a, b)| *a * *b).sum();
    let mut ap = vec![T::zero(); n];
    for it in 0..max_iter {
        if norm2(&r) <= tol * bn {
            return Ok((x, it));
        }
        a.mul_vec_into(&p, &mut ap);
        let pap: T = p.iter().zip(&ap).map(|(a, b)| *a * *b).sum();
        if !(pap > T::zero()) {
            return Err(SolveError::Breakdown { iterations: it });
        }
        let alpha = rz / pap;
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
            z[k] = r[k] * dinv[k];
        }
        let rz_new: T = r.iter().zip(&z).map(|(a, b)| *a * *b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..n {
            p[k] = z[k] + beta * p[k];
        }
    }
    let res = norm2(&r) / bn;
    if res <= tol {
        return Ok((x, max_iter));
    }
    Err(SolveError::NotConverged { iterations: max_iter, residual: res.f64(), tol: tol.f64() })
}

pub fn relative_residual<T: Real>(a: &CsrMatrix<T>, x: &[T], b: &[T]) -> T {
    let ax = a.mul_vec(x);
    let r: Vec<T> = b.iter().zip(&ax).map(|(b, a)| *b - *a).collect();
    let bn = norm2(b);
    if bn == T::zero() { norm2(&r) } else { norm2(&r) / bn }
}

/// Solves an SPD system to relative residual `tol`: Cholesky with iterative
/// refinement, CG polishing if needed, CG alone for very large envelopes.
pub fn solve_spd<T: Real>(a: &CsrMatrix<T>, b: &[T], tol: T) -> Result<Vec<T>, SolveError> {
    if b.len() != a.n {
        return Err(SolveError::Dimension { n: a.n, len: b.len() });
    }
    if b.iter().any(|v| !v.is_finite()) {
        return Err(SolveError::NonFinite("right-hand side"));
    }
    let sym = Symbolic::new(a);
    if sym.envelope_size() > ENVELOPE_BUDGET {
        return cg(a, b, None, tol, 20 * a.n + 100).map(|r| r.0);
    }
    let chol = Cholesky::factor_with(&sym, a)?;
    refine_solution(a, &chol, b, tol)
}

/// Cholesky solve followed by up to three refinement sweeps and, if the
/// tolerance is still missed, CG started from the current iterate.
pub fn refine_solution<T: Real>(
    a: &CsrMatrix<T>,
    chol: &Cholesky<T>,
    b: &[T],
    tol: T,
) -> Result<Vec<T>, SolveError> {
    let mut x = chol.solve(b);
    for _ in 0..3 {
        if relative_residual(a, &x, b) <= tol {
            return Ok(x);
        }
        let ax = a.mul_vec(&x);
        let r: Vec<T> = b.iter().zip(&ax).map(|(b, a)| *b - *a).collect();
        let dx = chol.solve(&r);
        for (xi, d) in x.iter_mut().zip(dx) {
            *xi += d;
        }
    }
    if relative_residual(a, &x, b) <= tol {
        return Ok(x);
    }
    cg(a, b, Some(&x), tol, 10 * a.n + 100).map(|r| r.0)
}

#[cfg(test)]
mod tests {
    use super::super::sparse::Triplets;
    use super::*;

    fn laplace_1d(n: usize, shift: f64) -> CsrMatrix<f64> {
        let mut t = Triplets::new(n);
        for i in 0..n {
            t.add(i, i, 2.0 + shift);
            if i > 0 {
                t.add(i, i - 1, -1.0);
                t.add(i - 1, i, -1.0);
            }
        }
        t.to_csr()
    }

    #[test]
    fn identity_returns_rhs() {
        let a = CsrMatrix::<f64>::identity(5);
        let b = vec![1.0, -2.0, 3.0, 0.5, 7.0];
        assert_eq!(solve_spd(&a, &b, 1e-12).unwrap(), b);
    }

    #[test]
    fn cholesky_matches_cg() {
        let a = laplace_1d(50, 0.01);
        let b: Vec<f64> = (0..50).map(|i| (i as f64).sin()).collect();
        let x = solve_spd(&a, &b, 1e-12).unwrap();
        let (y, _) = cg(&a, &b, None, 1e-12, 1000).unwrap();
        for (p, q) in x.iter().zip(&y) {
            assert!((p - q).abs() < 1e-8);
        }
    }

    #[test]
    fn singular_matrix_is_reported() {
        // Neumann Laplacian on a path: constants in the kernel
        let mut t = Triplets::new(4);
        for i in 0..3 {
            t.add(i, i, 1.0);
            t.add(i + 1, i + 1, 1.0);
            t.add(i, i + 1, -1.0);
            t.add(i + 1, i, -1.0);
        }
        let err = solve_spd(&t.to_csr(), &[1.0, 0.0, 0.0, 0.0], 1e-10).unwrap_err();
        assert!(matches!(err, SolveError::NotPositiveDefinite { step: 3, n: 4, .. }), "{err}");
    }

    #[test]
    fn indefinite_cg_reports_iterations() {
        let mut t = Triplets::new(2);
        t.add(0, 0, 1.0);
        t.add(1, 1, -1.0);
        let err = cg(&t.to_csr(), &[1.0, 1.0], None, 1e-12, 10).unwrap_err();
        assert_eq!(err, SolveError::Breakdown { iterations: 0 });
    }

    #[test]
    fn works_in_single_precision() {
        let a = laplace_1d(20, 0.5).clone();
        let a32 = CsrMatrix::<f32> {
            n: a.n,
            row_ptr: a.row_ptr.clone(),
            col_idx: a.col_idx.clone(),
            vals: a.vals.iter().map(|&v| v as f32).collect(),
        };
        let b = vec![1.0f32; 20];
        let x = solve_spd(&a32, &b, 1e-5).unwrap();
        assert!(relative_residual(&a32, &x, &b) <= 1e-5);
    }
}
