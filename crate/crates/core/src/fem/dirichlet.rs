//! Symmetric elimination of prescribed degrees of freedom.

use std::collections::BTreeMap;

use thiserror::Error;

use super::sparse::{CsrMatrix, Triplets};
use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DirichletError {
    #[error("conflicting constraints on dof {dof}: {a} vs {b}")]
    Conflict { dof: usize, a: f64, b: f64 },
    #[error("constraint on dof {dof} outside a system of size {n}")]
    OutOfRange { dof: usize, n: usize },
}

/// The free block of a matrix after removing fixed rows and columns, plus
/// the coupling needed to move prescribed values to the right-hand side.
#[derive(Debug, Clone)]
pub struct DirichletSystem<T> {
    pub n: usize,
    pub free: Vec<usize>,
    pub fixed: Vec<usize>,
    /// Reduced matrix on the free dofs.
    pub matrix: CsrMatrix<T>,
    /// (free row, fixed slot, value) entries of the free/fixed block.
    coupling: Vec<(usize, usize, T)>,
}

impl<T: Real> DirichletSystem<T> {
    /// `fixed` must be sorted and free of duplicates.
    pub fn new(a: &CsrMatrix<T>, fixed: &[usize]) -> Self {
        let n = a.n;
        let mut slot = vec![None; n];
        let mut fixed_slot = vec![None; n];
        for (k, &d) in fixed.iter().enumerate() {
            fixed_slot[d] = Some(k);
        }
        let mut free = Vec::with_capacity(n - fixed.len());
        for d in 0..n {
            if fixed_slot[d].is_none() {
                slot[d] = Some(free.len());
                free.push(d);
            }
        }
        let mut trip = Triplets::with_capacity(free.len(), a.nnz());
        let mut coupling = Vec::new();
        for (i, &r) in free.iter().enumerate() {
            for (c, v) in a.row(r) {
                if let Some(j) = slot[c] {
                    trip.add(i, j, v);
                } else if let Some(k) = fixed_slot[c] {
                    coupling.push((i, k, v));
                }
            }
        }
        Self { n, free, fixed: fixed.to_vec(), matrix: trip.to_csr(), coupling }
    }

    /// b_free − A_free,fixed · values.
    pub fn reduce_rhs(&self, b: &[T], values: &[T]) -> Vec<T> {
        assert_eq!(b.len(), self.n);
        assert_eq!(values.len(), self.fixed.len());
        let mut out: Vec<T> = self.free.iter().map(|&d| b[d]).collect();
        for &(i, k, v) in &self.coupling {
            out[i] -= v * values[k];
        }
        out
    }

    /// Full vector from free values and prescribed values.
    pub fn reconstruct(&self, x_free: &[T], values: &[T]) -> Vec<T> {
        let mut x = vec![T::zero(); self.n];
        for (&d, &v) in self.free.iter().zip(x_free) {
            x[d] = v;
        }
        for (&d, &v) in self.fixed.iter().zip(values) {
            x[d] = v;
        }
        x
    }
}

/// A reduced linear system ready to solve.
#[derive(Debug, Clone)]
pub struct Reduced<T> {
    pub system: DirichletSystem<T>,
    pub rhs: Vec<T>,
    pub values: Vec<T>,
}

impl<T: Real> Reduced<T> {
    pub fn reconstruct(&self, x_free: &[T]) -> Vec<T> {
        self.system.reconstruct(x_free, &self.values)
    }
}

/// Eliminates the constraints `(dof, value)`. Repeated constraints must agree.
pub fn apply_dirichlet<T: Real>(
    a: &CsrMatrix<T>,
    b: &[T],
    constraints: &[(usize, T)],
) -> Result<Reduced<T>, DirichletError> {
    let mut map: BTreeMap<usize, T> = BTreeMap::new();
    for &(d, v) in constraints {
        if d >= a.n {
            return Err(DirichletError::OutOfRange { dof: d, n: a.n });
        }
        if let Some(&old) = map.get(&d) {
            if old != v {
                return Err(DirichletError::Conflict { dof: d, a: old.f64(), b: v.f64() });
            }
        }
        map.insert(d, v);
    }
    let fixed: Vec<usize> = map.keys().copied().collect();
    let values: Vec<T> = map.values().copied().collect();
    let system = DirichletSystem::new(a, &fixed);
    let rhs = system.reduce_rhs(b, &values);
    Ok(Reduced { system, rhs, values })
}
