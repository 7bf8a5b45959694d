//! P1 finite-element kernels.

pub mod assembly;
pub mod dirichlet;
pub mod solve;
pub mod sparse;

use crate::mesh::{Mesh, Region};
use crate::scalar::{self, Real, Vec2};

pub use assembly::{
    assemble_elasticity, assemble_scalar, boundary_functional, boundary_functional_vec, laplacian, load_vector,
    lumped_mass, mass_matrix, AssemblyError,
};
pub use dirichlet::{apply_dirichlet, DirichletError, DirichletSystem, Reduced};
pub use solve::{cg, solve_spd, Cholesky, SolveError, Symbolic};
pub use sparse::{CsrMatrix, Triplets};

/// Where a nodal field lives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldRegion {
    Fluid,
    Solid,
    All,
}

impl From<Option<Region>> for FieldRegion {
    fn from(r: Option<Region>) -> Self {
        match r {
            Some(Region::Fluid) => FieldRegion::Fluid,
            Some(Region::Solid) => FieldRegion::Solid,
            None => FieldRegion::All,
        }
    }
}

pub trait FieldValue: Copy {
    fn finite(&self) -> bool;
}

macro_rules! field_value {
    ($($t:ty),*) => {$(
        impl FieldValue for $t {
            fn finite(&self) -> bool { self.is_finite() }
        }
        impl FieldValue for [$t; 2] {
            fn finite(&self) -> bool { self[0].is_finite() && self[1].is_finite() }
        }
    )*};
}
field_value!(f32, f64);

/// Nodal values on the nodes of one mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct Field<V> {
    pub values: Vec<V>,
    pub region: FieldRegion,
    pub dimensionless: bool,
}

impl<V: FieldValue> Field<V> {
    pub fn new(values: Vec<V>, region: FieldRegion, dimensionless: bool) -> Self {
        Self { values, region, dimensionless }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(FieldValue::finite)
    }

    /// Length matches the mesh and no entry is NaN or infinite.
    pub fn check<T: Real>(&self, mesh: &Mesh<T>) -> Result<(), String> {
        if self.values.len() != mesh.num_nodes() {
            return Err(format!("field has {} values for {} nodes", self.values.len(), mesh.num_nodes()));
        }
        if !self.is_finite() {
            return Err("field has non-finite values".into());
        }
        Ok(())
    }
}

/// Gradients of the three P1 basis functions and the signed area.
#[inline]
pub fn p1_gradients<T: Real>(v: [Vec2<T>; 3]) -> ([Vec2<T>; 3], T) {
    let det = scalar::cross(scalar::sub(v[1], v[0]), scalar::sub(v[2], v[0]));
    let inv = T::one() / det;
    let g = [
        [(v[1][1] - v[2][1]) * inv, (v[2][0] - v[1][0]) * inv],
        [(v[2][1] - v[0][1]) * inv, (v[0][0] - v[2][0]) * inv],
        [(v[0][1] - v[1][1]) * inv, (v[1][0] - v[0][0]) * inv],
    ];
    (g, T::half() * det)
}

/// Gradient of a P1 field on triangle `t`.
pub fn gradient<T: Real>(mesh: &Mesh<T>, t: usize, values: &[T]) -> Vec2<T> {
    let (g, _) = p1_gradients(mesh.vertices(t));
    let tri = mesh.triangles[t];
    let mut out = [T::zero(); 2];
    for k in 0..3 {
        out = scalar::add(out, scalar::scale(g[k], values[tri[k]]));
    }
    out
}

/// Barycentric coordinates of the edge midpoints; with weights area/3 this
/// rule is exact for quadratics.
pub const MIDPOINT_RULE: [[f64; 3]; 3] = [[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]];

/// Degree-4 six-point rule (barycentric point, weight relative to area).
pub const SIX_POINT_RULE: [([f64; 3], f64); 6] = [
    ([0.445948490915965, 0.445948490915965, 0.108103018168070], 0.223381589678011),
    ([0.445948490915965, 0.108103018168070, 0.445948490915965], 0.223381589678011),
    ([0.108103018168070, 0.445948490915965, 0.445948490915965], 0.223381589678011),
    ([0.091576213509771, 0.091576213509771, 0.816847572980459], 0.109951743655322),
    ([0.091576213509771, 0.816847572980459, 0.091576213509771], 0.109951743655322),
    ([0.816847572980459, 0.091576213509771, 0.091576213509771], 0.109951743655322),
];

/// Two-point Gauss rule on [0, 1]: parameters, each with weight 1/2.
pub fn gauss2<T: Real>() -> [T; 2] {
    let d = T::lit(0.5 / 3f64.sqrt());
    [T::half() - d, T::half() + d]
}

#[inline]
pub fn bary_point<T: Real>(v: [Vec2<T>; 3], b: [f64; 3]) -> Vec2<T> {
    let mut p = [T::zero(); 2];
    for k in 0..3 {
        p = scalar::add(p, scalar::scale(v[k], T::lit(b[k])));
    }
    p
}

/// L2 norm of `u_h - exact` over the triangles of `region`, by the six-point rule.
pub fn l2_error<T: Real>(
    mesh: &Mesh<T>,
    region: Option<Region>,
    uh: &[T],
    exact: &dyn Fn(Vec2<T>) -> T,
) -> T {
    let mut s = T::zero();
    for t in 0..mesh.num_triangles() {
        if region.map_or(false, |r| mesh.regions[t] != r) {
            continue;
        }
        let v = mesh.vertices(t);
        let tri = mesh.triangles[t];
        let area = mesh.signed_area(t);
        for (b, w) in SIX_POINT_RULE {
            let uhq = (0..3).map(|k| T::lit(b[k]) * uh[tri[k]]).sum::<T>();
            let e = uhq - exact(bary_point(v, b));
            s += T::lit(w) * area * e * e;
        }
    }
    s.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::BoundaryTag::*;

    #[test]
    fn gradients_reproduce_linear_fields() {
        let m = Mesh::<f64>::rectangle([0.0, 0.0], [1.0, 2.0], 3, 4, Region::Solid, [Sigma, Pi, Sigma, Z0]);
        let vals: Vec<f64> = m.nodes.iter().map(|p| 3.0 * p[0] - 2.0 * p[1]).collect();
        for t in 0..m.num_triangles() {
            let g = gradient(&m, t, &vals);
            assert!((g[0] - 3.0).abs() < 1e-12 && (g[1] + 2.0).abs() < 1e-12);
        }
        assert!(l2_error(&m, None, &vals, &|p| 3.0 * p[0] - 2.0 * p[1]) < 1e-13);
    }

    #[test]
    fn field_checks_length_and_nan() {
        let m = Mesh::<f64>::rectangle([0.0, 0.0], [1.0, 1.0], 1, 1, Region::Fluid, [Gamma, O0, Gamma, I0]);
        assert!(Field::new(vec![0.0; 4], FieldRegion::Fluid, true).check(&m).is_ok());
        assert!(Field::new(vec![0.0; 3], FieldRegion::Fluid, true).check(&m).is_err());
        assert!(Field::new(vec![[f64::NAN, 0.0]; 4], FieldRegion::Fluid, true).check(&m).is_err());
    }
}
