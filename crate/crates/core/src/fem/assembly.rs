//! Element loops for the scalar reaction-diffusion operator, linear
//! elasticity and boundary load functionals.

use thiserror::Error;

use super::sparse::{CsrMatrix, Triplets};
use super::{gauss2, p1_gradients, MIDPOINT_RULE};
use crate::mesh::{BoundaryTag, Mesh, Region};
use crate::scalar::{self, Real, Vec2};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AssemblyError {
    #[error("elastic moduli violate λ = k_S − 2G_S/3 ≥ 0, G_S > 0 (λ = {lame}, G = {shear})")]
    Moduli { lame: f64, shear: f64 },
}

fn in_region(mesh_region: Region, sel: Option<Region>) -> bool {
    sel.map_or(true, |r| r == mesh_region)
}

/// Stiffness of `a` plus mass of `r`, and the load of `f`, on the triangles of
/// `region` (all triangles for `None`). Coefficients are sampled at the
/// edge midpoints.
pub fn assemble_scalar<T: Real>(
    mesh: &Mesh<T>,
    region: Option<Region>,
    a: &dyn Fn(Vec2<T>) -> T,
    r: &dyn Fn(Vec2<T>) -> T,
    f: &dyn Fn(Vec2<T>) -> T,
) -> (CsrMatrix<T>, Vec<T>) {
    let n = mesh.num_nodes();
    let mut trip = Triplets::with_capacity(n, 9 * mesh.num_triangles());
    let mut load = vec![T::zero(); n];
    let third = T::one() / T::lit(3.0);
    for t in 0..mesh.num_triangles() {
        if !in_region(mesh.regions[t], region) {
            continue;
        }
        let v = mesh.vertices(t);
        let tri = mesh.triangles[t];
        let (g, area) = p1_gradients(v);
        let w = area * third;
        let mut abar = T::zero();
        let mut rq = [T::zero(); 3];
        let mut fq = [T::zero(); 3];
        for (q, b) in MIDPOINT_RULE.iter().enumerate() {
            let x = super::bary_point(v, *b);
            abar += a(x);
            rq[q] = r(x);
            fq[q] = f(x);
        }
        abar *= w;
        for i in 0..3 {
            let mut li = T::zero();
            for q in 0..3 {
                li += fq[q] * T::lit(MIDPOINT_RULE[q][i]);
            }
            load[tri[i]] += w * li;
            for j in 0..3 {
                let mut m = T::zero();
                for q in 0..3 {
                    m += rq[q] * T::lit(MIDPOINT_RULE[q][i] * MIDPOINT_RULE[q][j]);
                }
                let k = abar * scalar::dot(g[i], g[j]) + w * m;
                trip.add(tri[i], tri[j], k);
            }
        }
    }
    (trip.to_csr(), load)
}

pub fn laplacian<T: Real>(mesh: &Mesh<T>, region: Option<Region>) -> CsrMatrix<T> {
    assemble_scalar(mesh, region, &|_| T::one(), &|_| T::zero(), &|_| T::zero()).0
}

pub fn mass_matrix<T: Real>(mesh: &Mesh<T>, region: Option<Region>) -> CsrMatrix<T> {
    assemble_scalar(mesh, region, &|_| T::zero(), &|_| T::one(), &|_| T::zero()).0
}

/// Row sums of the mass matrix: a third of the adjacent area per node.
pub fn lumped_mass<T: Real>(mesh: &Mesh<T>, region: Option<Region>) -> Vec<T> {
    let mut m = vec![T::zero(); mesh.num_nodes()];
    let third = T::one() / T::lit(3.0);
    for t in 0..mesh.num_triangles() {
        if in_region(mesh.regions[t], region) {
            let a = mesh.signed_area(t) * third;
            for &v in &mesh.triangles[t] {
                m[v] += a;
            }
        }
    }
    m
}

pub fn load_vector<T: Real>(mesh: &Mesh<T>, region: Option<Region>, f: &dyn Fn(Vec2<T>) -> T) -> Vec<T> {
    let n = mesh.num_nodes();
    let mut load = vec![T::zero(); n];
    let third = T::one() / T::lit(3.0);
    for t in 0..mesh.num_triangles() {
        if !in_region(mesh.regions[t], region) {
            continue;
        }
        let v = mesh.vertices(t);
        let w = mesh.signed_area(t) * third;
        for b in MIDPOINT_RULE {
            let fx = f(super::bary_point(v, b));
            for i in 0..3 {
                load[mesh.triangles[t][i]] += w * fx * T::lit(b[i]);
            }
        }
    }
    load
}

/// Matrix of b(V, W) = ∫ λ div V div W + 2G ε(V):ε(W) with interleaved
/// degrees of freedom (2v, 2v + 1).
pub fn assemble_elasticity<T: Real>(
    mesh: &Mesh<T>,
    region: Option<Region>,
    lame: T,
    shear: T,
) -> Result<CsrMatrix<T>, AssemblyError> {
    if !(lame >= T::zero()) || !(shear > T::zero()) {
        return Err(AssemblyError::Moduli { lame: lame.f64(), shear: shear.f64() });
    }
    let n = 2 * mesh.num_nodes();
    let mut trip = Triplets::with_capacity(n, 36 * mesh.num_triangles());
    for t in 0..mesh.num_triangles() {
        if !in_region(mesh.regions[t], region) {
            continue;
        }
        let (g, area) = p1_gradients(mesh.vertices(t));
        let tri = mesh.triangles[t];
        for a in 0..3 {
            for b in 0..3 {
                let gg = scalar::dot(g[a], g[b]);
                for k in 0..2 {
                    for l in 0..2 {
                        let mut v = lame * g[a][k] * g[b][l] + shear * g[a][l] * g[b][k];
                        if k == l {
                            v += shear * gg;
                        }
                        trip.add(2 * tri[a] + k, 2 * tri[b] + l, area * v);
                    }
                }
            }
        }
    }
    Ok(trip.to_csr())
}

/// Entries ∫_e density · φ_i over the edges with `tag` (two-point Gauss).
pub fn boundary_functional<T: Real>(mesh: &Mesh<T>, tag: BoundaryTag, density: &dyn Fn(Vec2<T>) -> T) -> Vec<T> {
    let mut out = vec![T::zero(); mesh.num_nodes()];
    let gp = gauss2::<T>();
    for e in mesh.edges_with_tag(tag) {
        let [a, b] = e.nodes;
        let (pa, pb) = (mesh.nodes[a], mesh.nodes[b]);
        let half_len = T::half() * scalar::dist(pa, pb);
        for s in gp {
            let x = scalar::add(pa, scalar::scale(scalar::sub(pb, pa), s));
            let f = density(x) * half_len;
            out[a] += f * (T::one() - s);
            out[b] += f * s;
        }
    }
    out
}

/// Vector version of [`boundary_functional`]; the density also receives the
/// unit normal of the edge (right-hand side of its orientation).
pub fn boundary_functional_vec<T: Real>(
    mesh: &Mesh<T>,
    tag: BoundaryTag,
    density: &dyn Fn(Vec2<T>, Vec2<T>) -> Vec2<T>,
) -> Vec<Vec2<T>> {
    let mut out = vec![[T::zero(); 2]; mesh.num_nodes()];
    let gp = gauss2::<T>();
    for e in mesh.edges_with_tag(tag) {
        let [a, b] = e.nodes;
        let (pa, pb) = (mesh.nodes[a], mesh.nodes[b]);
        let d = scalar::sub(pb, pa);
        let half_len = T::half() * scalar::norm(d);
        let nu = scalar::normalize(scalar::right_normal(d));
        for s in gp {
            let x = scalar::add(pa, scalar::scale(d, s));
            let f = scalar::scale(density(x, nu), half_len);
            out[a] = scalar::add(out[a], scalar::scale(f, T::one() - s));
            out[b] = scalar::add(out[b], scalar::scale(f, s));
        }
    }
    out
}
