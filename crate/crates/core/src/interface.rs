//! Geometry of the interface polyline: normals, smoothed curvature,
//! tangential derivatives, effective pressure and tension, admissibility of
//! boundary updates, and harmonic extensions into the bulk.
//!
//! Polyline functions take the node positions of a [`GammaIndex`] and its
//! arcs. Arcs keep the fluid on their left, so the right-hand normal points
//! out of the fluid.

use crate::fem::{laplacian, Cholesky, DirichletSystem, SolveError};
use crate::mesh::{Arc, BoundaryTag, GammaIndex, Mesh, Region};
use crate::params::Dimensionless;
use crate::scalar::{self, Real, Vec2};

fn edge_normal<T: Real>(a: Vec2<T>, b: Vec2<T>) -> Vec2<T> {
    scalar::normalize(scalar::right_normal(scalar::sub(b, a)))
}

/// Unit normal per node: normalized sum of the unit normals of the adjacent edges.
pub fn nodal_normals<T: Real>(pts: &[Vec2<T>], arcs: &[Arc]) -> Vec<Vec2<T>> {
    let mut acc = vec![[T::zero(); 2]; pts.len()];
    for arc in arcs {
        for [a, b] in arc.edges() {
            let n = edge_normal(pts[a], pts[b]);
            acc[a] = scalar::add(acc[a], n);
            acc[b] = scalar::add(acc[b], n);
        }
    }
    acc.into_iter().map(scalar::normalize).collect()
}

/// Half the length of the adjacent edges per node (lumped mass of the polyline).
pub fn lumped_lengths<T: Real>(pts: &[Vec2<T>], arcs: &[Arc]) -> Vec<T> {
    let mut m = vec![T::zero(); pts.len()];
    for arc in arcs {
        for [a, b] in arc.edges() {
            let h = T::half() * scalar::dist(pts[a], pts[b]);
            m[a] += h;
            m[b] += h;
        }
    }
    m
}

/// Mean edge length of the polyline.
pub fn mean_edge_length<T: Real>(pts: &[Vec2<T>], arcs: &[Arc]) -> T {
    let mut total = T::zero();
    let mut count = 0usize;
    for arc in arcs {
        for [a, b] in arc.edges() {
            total += scalar::dist(pts[a], pts[b]);
            count += 1;
        }
    }
    total / T::lit(count.max(1) as f64)
}

/// Smoothing parameter (2 h_Γ)².
pub fn default_eps_s<T: Real>(h_gamma: T) -> T {
    let t = T::two() * h_gamma;
    t * t
}

/// ∫ (∇_τ·V) φ_i along the polyline for a nodal P1 vector field.
fn divergence_load<T: Real>(pts: &[Vec2<T>], arcs: &[Arc], field: &[Vec2<T>]) -> Vec<T> {
    let mut b = vec![T::zero(); pts.len()];
    for arc in arcs {
        for [i, j] in arc.edges() {
            let d = scalar::sub(pts[j], pts[i]);
            let len = scalar::norm(d);
            let tau = scalar::scale(d, T::one() / len);
            // d_e · L_e / 2 to each endpoint
            let half = T::half() * scalar::dot(tau, scalar::sub(field[j], field[i]));
            b[i] += half;
            b[j] += half;
        }
    }
    b
}

/// Solves −ε_s Δ_τ H + H = ∇_τ·V along each arc with P1 elements and a
/// lumped mass, H = 0 at the endpoints of open arcs. `eps_s = 0` gives the
/// lumped projection of the surface divergence.
pub fn smoothed_curvature<T: Real>(pts: &[Vec2<T>], arcs: &[Arc], field: &[Vec2<T>], eps_s: T) -> Vec<T> {
    smooth_load(pts, arcs, &divergence_load(pts, arcs, field), eps_s)
}

/// ∫ (∇_τ·ν_h) φ_i for the edgewise constant normal ν_h: the tangent jump
/// τ_prev − τ_next at each node, projected on the nodal normal. This is the
/// derivative of the polyline length along ν_i.
pub fn turning_load<T: Real>(pts: &[Vec2<T>], arcs: &[Arc]) -> Vec<T> {
    let nu = nodal_normals(pts, arcs);
    let mut jump = vec![[T::zero(); 2]; pts.len()];
    for arc in arcs {
        for [a, b] in arc.edges() {
            let tau = scalar::normalize(scalar::sub(pts[b], pts[a]));
            jump[a] = scalar::sub(jump[a], tau);
            jump[b] = scalar::add(jump[b], tau);
        }
    }
    jump.iter().zip(&nu).map(|(j, n)| scalar::dot(*j, *n)).collect()
}

/// Solves (ε_s K + M) H = b along each arc (lumped M), with H = 0 at the
/// endpoints of open arcs.
pub fn smooth_load<T: Real>(pts: &[Vec2<T>], arcs: &[Arc], b: &[T], eps_s: T) -> Vec<T> {
    let m = lumped_lengths(pts, arcs);
    let mut h = vec![T::zero(); pts.len()];
    for arc in arcs {
        let nodes = &arc.nodes;
        let n = nodes.len();
        if n < 2 {
            continue;
        }
        // Tridiagonal (cyclic when closed) system along the arc.
        let ne = if arc.closed { n } else { n - 1 };
        let mut diag: Vec<T> = nodes.iter().map(|&v| m[v]).collect();
        let mut off = vec![T::zero(); ne]; // coupling of k and k+1
        for k in 0..ne {
            let (a, c) = (nodes[k], nodes[(k + 1) % n]);
            let w = eps_s / scalar::dist(pts[a], pts[c]);
            diag[k] += w;
            diag[(k + 1) % n] += w;
            off[k] = -w;
        }
        let rhs: Vec<T> = nodes.iter().map(|&v| b[v]).collect();
        let sol = if arc.closed {
            solve_cyclic(&diag, &off, &rhs)
        } else {
            let mut d = diag.clone();
            let mut r = rhs.clone();
            let mut o = off.clone();
            // H = 0 at both ends: drop their couplings.
            r[0] = T::zero();
            r[n - 1] = T::zero();
            d[0] = T::one();
            d[n - 1] = T::one();
            o[0] = T::zero();
            o[ne - 1] = T::zero();
            if n > 2 {
                solve_tridiagonal(&d, &o, &r)
            } else {
                vec![T::zero(); n]
            }
        };
        for (k, &v) in nodes.iter().enumerate() {
            h[v] = sol[k];
        }
    }
    h
}

/// Symmetric tridiagonal solve; `off[k]` couples k and k + 1.
fn solve_tridiagonal<T: Real>(diag: &[T], off: &[T], rhs: &[T]) -> Vec<T> {
    let n = diag.len();
    let mut c = vec![T::zero(); n];
    let mut d = vec![T::zero(); n];
    c[0] = if n > 1 { off[0] / diag[0] } else { T::zero() };
    d[0] = rhs[0] / diag[0];
    for k in 1..n {
        let den = diag[k] - off[k - 1] * c[k - 1];
        if k + 1 < n {
            c[k] = off[k] / den;
        }
        d[k] = (rhs[k] - off[k - 1] * d[k - 1]) / den;
    }
    let mut x = vec![T::zero(); n];
    x[n - 1] = d[n - 1];
    for k in (0..n - 1).rev() {
        x[k] = d[k] - c[k] * x[k + 1];
    }
    x
}

/// Cyclic symmetric tridiagonal solve (Sherman–Morrison).
fn solve_cyclic<T: Real>(diag: &[T], off: &[T], rhs: &[T]) -> Vec<T> {
    let n = diag.len();
    if n < 3 {
        return (0..n).map(|k| rhs[k] / diag[k]).collect();
    }
    let corner = off[n - 1];
    let gamma = -diag[0];
    let mut d = diag.to_vec();
    d[0] -= gamma;
    d[n - 1] -= corner * corner / gamma;
    let x = solve_tridiagonal(&d, &off[..n - 1], rhs);
    let mut u = vec![T::zero(); n];
    u[0] = gamma;
    u[n - 1] = corner;
    let z = solve_tridiagonal(&d, &off[..n - 1], &u);
    let fact = (x[0] + corner * x[n - 1] / gamma) / (T::one() + z[0] + corner * z[n - 1] / gamma);
    x.iter().zip(&z).map(|(a, b)| *a - fact * *b).collect()
}

/// Mean curvature of the polyline itself, smoothed with ε_s. With ε_s = 0,
/// m_i H_i ν_i is exactly the gradient of the length at node i.
pub fn curvature<T: Real>(pts: &[Vec2<T>], arcs: &[Arc], eps_s: T) -> Vec<T> {
    smooth_load(pts, arcs, &turning_load(pts, arcs), eps_s)
}

/// Derivative of nodal values with respect to arc length: three-point
/// central differences on the nonuniform spacing, one-sided at open ends.
pub fn tangential_derivative<T: Real>(pts: &[Vec2<T>], arcs: &[Arc], values: &[T]) -> Vec<T> {
    let mut out = vec![T::zero(); pts.len()];
    let central = |fm: T, f0: T, fp: T, h1: T, h2: T| {
        -h2 / (h1 * (h1 + h2)) * fm + (h2 - h1) / (h1 * h2) * f0 + h1 / (h2 * (h1 + h2)) * fp
    };
    for arc in arcs {
        let nodes = &arc.nodes;
        let n = nodes.len();
        if n < 2 {
            continue;
        }
        let len = |a: usize, b: usize| scalar::dist(pts[nodes[a]], pts[nodes[b]]);
        if n == 2 {
            let s = (values[nodes[1]] - values[nodes[0]]) / len(0, 1);
            out[nodes[0]] = s;
            out[nodes[1]] = s;
            continue;
        }
        for k in 0..n {
            let v = |j: usize| values[nodes[j]];
            out[nodes[k]] = if arc.closed {
                let (km, kp) = ((k + n - 1) % n, (k + 1) % n);
                central(v(km), v(k), v(kp), len(km, k), len(k, kp))
            } else if k == 0 {
                let (h1, h2) = (len(0, 1), len(1, 2));
                -(T::two() * h1 + h2) / (h1 * (h1 + h2)) * v(0) + (h1 + h2) / (h1 * h2) * v(1)
                    - h1 / (h2 * (h1 + h2)) * v(2)
            } else if k == n - 1 {
                let (h1, h2) = (len(n - 3, n - 2), len(n - 2, n - 1));
                (T::two() * h2 + h1) / (h2 * (h1 + h2)) * v(n - 1) - (h1 + h2) / (h1 * h2) * v(n - 2)
                    + h2 / (h1 * (h1 + h2)) * v(n - 3)
            } else {
                central(v(k - 1), v(k), v(k + 1), len(k - 1, k), len(k, k + 1))
            };
        }
    }
    out
}

/// Effective pressure and tension of the modified law, dimensionless:
/// p* = p + (|∂_τ u|² − g²)/(2 u0), γ* = γ + (g/u0) u.
pub fn effective_terms<T: Real>(p: &[T], u: &[T], dtau_u: &[T], dl: &Dimensionless<T>) -> (Vec<T>, Vec<T>) {
    let two_u0 = T::two() * dl.u0;
    let p_star = p
        .iter()
        .zip(dtau_u)
        .map(|(&p, &d)| p + (d * d - dl.g * dl.g) / two_u0)
        .collect();
    let gamma_star = u.iter().map(|&u| dl.gamma + dl.sigma_c() * u).collect();
    (p_star, gamma_star)
}

/// Admissible version of an interface update: zero at open-arc endpoints
/// and without normal component (w.r.t. `normals`) at their neighbours, so
/// the interface keeps meeting the box orthogonally. Idempotent.
pub fn project_compatibility<T: Real>(update: &[Vec2<T>], gamma: &GammaIndex, normals: &[Vec2<T>]) -> Vec<Vec2<T>> {
    let mut out = update.to_vec();
    for arc in gamma.arcs.iter().filter(|a| !a.closed) {
        let n = arc.nodes.len();
        let ends = [arc.nodes[0], arc.nodes[n - 1]];
        for e in ends {
            out[e] = [T::zero(); 2];
        }
        if n > 2 {
            for k in [arc.nodes[1], arc.nodes[n - 2]] {
                if ends.contains(&k) {
                    continue;
                }
                let nu = normals[k];
                out[k] = scalar::sub(out[k], scalar::scale(nu, scalar::dot(out[k], nu)));
            }
        }
    }
    out
}

/// Discrete harmonic extension with a cached factorization.
#[derive(Debug, Clone)]
pub struct HarmonicExtension<T> {
    n: usize,
    system: DirichletSystem<T>,
    factor: Cholesky<T>,
}

impl<T: Real> HarmonicExtension<T> {
    /// Laplacian on the triangles of `region` with `fixed` nodes prescribed.
    /// Nodes outside the region are prescribed as well.
    pub fn new(mesh: &Mesh<T>, region: Option<Region>, fixed: &[usize]) -> Result<Self, SolveError> {
        let n = mesh.num_nodes();
        let mut is_fixed = vec![true; n];
        for (t, tri) in mesh.triangles.iter().enumerate() {
            if region.map_or(true, |r| r == mesh.regions[t]) {
                for &v in tri {
                    is_fixed[v] = false;
                }
            }
        }
        for &v in fixed {
            is_fixed[v] = true;
        }
        let fixed: Vec<usize> = (0..n).filter(|&v| is_fixed[v]).collect();
        let k = laplacian(mesh, region);
        let system = DirichletSystem::new(&k, &fixed);
        let factor = Cholesky::factor(&system.matrix)?;
        Ok(Self { n, system, factor })
    }

    /// Extends the prescribed entries of `data` (other entries are ignored).
    pub fn extend(&self, data: &[T]) -> Vec<T> {
        assert_eq!(data.len(), self.n);
        let values: Vec<T> = self.system.fixed.iter().map(|&v| data[v]).collect();
        let rhs = self.system.reduce_rhs(&vec![T::zero(); self.n], &values);
        let x = self.factor.solve(&rhs);
        self.system.reconstruct(&x, &values)
    }

    pub fn extend_vec(&self, data: &[Vec2<T>]) -> Vec<Vec2<T>> {
        let x: Vec<T> = data.iter().map(|v| v[0]).collect();
        let y: Vec<T> = data.iter().map(|v| v[1]).collect();
        self.extend(&x).into_iter().zip(self.extend(&y)).map(|(a, b)| [a, b]).collect()
    }
}

/// Nodes on any tagged boundary edge of `mesh`.
fn boundary_nodes<T: Real>(mesh: &Mesh<T>) -> Vec<usize> {
    let mut v: Vec<usize> = mesh.boundary_edges.iter().flat_map(|e| e.nodes).collect();
    v.sort_unstable();
    v.dedup();
    v
}

/// Dirichlet data for the normal extension: ν on Γ, ν/2 on the mouth node
/// next to each open-arc endpoint, 0 elsewhere on the boundary.
pub fn normal_boundary_data<T: Real>(mesh: &Mesh<T>, gamma: &GammaIndex) -> Vec<Vec2<T>> {
    let pts = gamma.positions(mesh);
    let nu = nodal_normals(&pts, &gamma.arcs);
    let mut data = vec![[T::zero(); 2]; mesh.num_nodes()];
    for e in gamma.endpoints() {
        let corner = gamma.nodes[e];
        for edge in mesh.boundary_edges.iter().filter(|b| matches!(b.tag, BoundaryTag::I0 | BoundaryTag::O0)) {
            let other = if edge.nodes[0] == corner {
                edge.nodes[1]
            } else if edge.nodes[1] == corner {
                edge.nodes[0]
            } else {
                continue;
            };
            if gamma.position(other).is_none() {
                data[other] = scalar::add(data[other], scalar::scale(nu[e], T::half()));
            }
        }
    }
    for (k, &v) in gamma.nodes.iter().enumerate() {
        data[v] = nu[k];
    }
    data
}

/// Harmonic extension 𝒱 of the interface normal into the fluid.
pub fn extend_normal<T: Real>(mesh: &Mesh<T>, gamma: &GammaIndex) -> Result<Vec<Vec2<T>>, SolveError> {
    let ext = HarmonicExtension::new(mesh, Some(Region::Fluid), &boundary_nodes(mesh))?;
    Ok(ext.extend_vec(&normal_boundary_data(mesh, gamma)))
}

/// Harmonic extension of an interface displacement into every region, zero
/// on the rest of the boundary.
pub fn extend_displacement<T: Real>(
    mesh: &Mesh<T>,
    gamma: &GammaIndex,
    lambda: &[Vec2<T>],
) -> Result<Vec<Vec2<T>>, SolveError> {
    let mut fixed = boundary_nodes(mesh);
    fixed.extend(gamma.nodes.iter().copied());
    let ext = HarmonicExtension::new(mesh, None, &fixed)?;
    let mut data = vec![[T::zero(); 2]; mesh.num_nodes()];
    for (k, &v) in gamma.nodes.iter().enumerate() {
        data[v] = lambda[k];
    }
    Ok(ext.extend_vec(&data))
}

/// Nodes of the fluid boundary and the interface, for mesh motion.
pub fn fluid_motion_extension<T: Real>(mesh: &Mesh<T>, gamma: &GammaIndex) -> Result<HarmonicExtension<T>, SolveError> {
    let mut fixed = boundary_nodes(mesh);
    fixed.extend(gamma.nodes.iter().copied());
    HarmonicExtension::new(mesh, Some(Region::Fluid), &fixed)
}

/// Signed turning angle of the tangent from the first to the last edge of an open arc.
pub fn turning_angle<T: Real>(pts: &[Vec2<T>], arc: &Arc) -> T {
    let mut total = T::zero();
    let edges: Vec<[usize; 2]> = arc.edges().collect();
    for w in edges.windows(2) {
        let t0 = scalar::sub(pts[w[0][1]], pts[w[0][0]]);
        let t1 = scalar::sub(pts[w[1][1]], pts[w[1][0]]);
        total += scalar::cross(t0, t1).atan2(scalar::dot(t0, t1));
    }
    total
}

/// ∫_Γ ν φ_i per node: half the sum of the adjacent edge normals scaled by
/// length. This is the derivative of the enclosed area along node i.
pub fn area_weights<T: Real>(pts: &[Vec2<T>], arcs: &[Arc]) -> Vec<Vec2<T>> {
    let mut w = vec![[T::zero(); 2]; pts.len()];
    for arc in arcs {
        for [a, b] in arc.edges() {
            let n = scalar::scale(scalar::right_normal(scalar::sub(pts[b], pts[a])), T::half());
            w[a] = scalar::add(w[a], n);
            w[b] = scalar::add(w[b], n);
        }
    }
    w
}

/// Geometry and effective terms on the current interface, indexed like the
/// [`GammaIndex`] it was built from. Dimensionless.
#[derive(Debug, Clone, PartialEq)]
pub struct InterfaceState<T> {
    pub positions: Vec<Vec2<T>>,
    pub nu: Vec<Vec2<T>>,
    /// Lumped lengths m_i.
    pub lengths: Vec<T>,
    pub area_weights: Vec<Vec2<T>>,
    /// Smoothed mean curvature.
    pub curvature: Vec<T>,
    /// Potential trace u = −Fφ/(RT) and its tangential derivative.
    pub u: Vec<T>,
    pub dtau_u: Vec<T>,
    pub p: Vec<T>,
    pub p_star: Vec<T>,
    pub gamma_star: Vec<T>,
    /// Consistent nodal force of the solid on the interface.
    pub reaction: Vec<Vec2<T>>,
    /// Cauchy traction density, length-weighted mean of the adjacent edges.
    pub traction: Vec<Vec2<T>>,
}

impl<T: Real> InterfaceState<T> {
    /// `u` and `p` are nodal traces; `edge_traction` follows the edge order
    /// of `arcs`, or is empty when unavailable.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        positions: Vec<Vec2<T>>,
        arcs: &[Arc],
        u: Vec<T>,
        p: Vec<T>,
        reaction: Vec<Vec2<T>>,
        edge_traction: &[Vec2<T>],
        dl: &Dimensionless<T>,
        eps_s: T,
    ) -> Self {
        let nu = nodal_normals(&positions, arcs);
        let lengths = lumped_lengths(&positions, arcs);
        let area_weights = area_weights(&positions, arcs);
        let curvature = curvature(&positions, arcs, eps_s);
        let dtau_u = tangential_derivative(&positions, arcs, &u);
        let (p_star, gamma_star) = effective_terms(&p, &u, &dtau_u, dl);
        let mut traction = vec![[T::zero(); 2]; positions.len()];
        if !edge_traction.is_empty() {
            for ([a, b], t) in arcs.iter().flat_map(|a| a.edges()).zip(edge_traction) {
                let h = T::half() * scalar::dist(positions[a], positions[b]);
                traction[a] = scalar::add(traction[a], scalar::scale(*t, h));
                traction[b] = scalar::add(traction[b], scalar::scale(*t, h));
            }
            for (t, m) in traction.iter_mut().zip(&lengths) {
                *t = scalar::scale(*t, T::one() / *m);
            }
        }
        Self { positions, nu, lengths, area_weights, curvature, u, dtau_u, p, p_star, gamma_star, reaction, traction }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_disk, build_reference_domain, triangulate, ChannelGeometry, Mesh, TriangulateOptions};
    use std::f64::consts::PI;

    fn circle(n: usize, r: f64, grade: f64) -> (Vec<Vec2<f64>>, Vec<Arc>) {
        let pts = (0..n)
            .map(|k| {
                let s = 2.0 * PI * k as f64 / n as f64;
                let t = s + grade * s.sin();
                [r * t.cos(), r * t.sin()]
            })
            .collect();
        (pts, vec![Arc { nodes: (0..n).collect(), closed: true }])
    }

    fn channel() -> (Mesh<f64>, GammaIndex) {
        let g = ChannelGeometry { d: 2.0, l: 10.0, s: 0.5, thickness: 6.0, fillet: 0.0 };
        let m = triangulate(&build_reference_domain(&g, 0.25).unwrap(), &TriangulateOptions::new(0.5, 2.0)).unwrap();
        let gi = GammaIndex::from_mesh(&m).unwrap();
        (m, gi)
    }

    #[test]
    fn circle_curvature_converges() {
        let mut errs = Vec::new();
        for n in [32, 64, 128, 256] {
            let (p, a) = circle(n, 2.0, 0.3);
            let h = curvature(&p, &a, 0.0);
            errs.push(h.iter().map(|x| (x - 0.5).abs()).fold(0.0, f64::max));
        }
        for w in errs.windows(2) {
            assert!((w[0] / w[1]).log2() >= 1.0, "{errs:?}");
        }
    }

    #[test]
    fn raw_curvature_is_length_gradient() {
        let (p, a) = circle(30, 1.5, 0.3);
        let h = curvature(&p, &a, 0.0);
        let m = lumped_lengths(&p, &a);
        let nu = nodal_normals(&p, &a);
        let length = |q: &[Vec2<f64>]| lumped_lengths(q, &a).iter().sum::<f64>();
        for i in [0, 7, 19] {
            for dir in [[1.0, 0.0], [0.0, 1.0]] {
                let eps = 1e-6;
                let mut qp = p.clone();
                let mut qm = p.clone();
                qp[i] = scalar::add(p[i], scalar::scale(dir, eps));
                qm[i] = scalar::sub(p[i], scalar::scale(dir, eps));
                let fd = (length(&qp) - length(&qm)) / (2.0 * eps);
                assert!((fd - m[i] * h[i] * scalar::dot(nu[i], dir)).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn smoothing_keeps_uniform_circle_curvature() {
        let (p, a) = circle(50, 2.0, 0.0);
        let raw = curvature(&p, &a, 0.0);
        let smooth = curvature(&p, &a, 0.7);
        for (x, y) in raw.iter().zip(&smooth) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn nodal_field_divergence_matches_on_circle() {
        let (p, a) = circle(128, 2.0, 0.3);
        let nu = nodal_normals(&p, &a);
        let h = smoothed_curvature(&p, &a, &nu, 0.0);
        assert!(h.iter().all(|x| (x - 0.5).abs() < 2e-2));
    }

    #[test]
    fn normals_are_unit_and_outward_on_circle() {
        let (p, a) = circle(40, 1.0, 0.0);
        for (x, n) in p.iter().zip(nodal_normals(&p, &a)) {
            assert!((scalar::norm(n) - 1.0).abs() < 1e-12);
            assert!(scalar::dot(*x, n) > 0.99);
        }
    }

    #[test]
    fn straight_wall_has_zero_curvature() {
        let p: Vec<Vec2<f64>> = (0..20).map(|k| [k as f64 * 0.1 + 0.01 * (k as f64).sin(), 0.0]).collect();
        let a = vec![Arc { nodes: (0..20).collect(), closed: false }];
        assert!(curvature(&p, &a, 0.0).iter().all(|h| h.abs() < 1e-12));
        assert!(curvature(&p, &a, 0.3).iter().all(|h| h.abs() < 1e-12));
    }

    #[test]
    fn integrated_curvature_is_turning_angle() {
        let n = 200;
        let p: Vec<Vec2<f64>> = (0..=n)
            .map(|k| {
                let t = PI / 2.0 * k as f64 / n as f64;
                [t.cos(), t.sin()]
            })
            .collect();
        let arc = Arc { nodes: (0..=n).collect(), closed: false };
        let a = vec![arc.clone()];
        let h = curvature(&p, &a, 0.0);
        let m = lumped_lengths(&p, &a);
        let integral: f64 = h.iter().zip(&m).map(|(x, y)| x * y).sum();
        // CCW quarter circle traversed with the fluid inside on the left.
        assert!((integral - turning_angle(&p, &arc)).abs() < 2.0 * PI / 2.0 / n as f64 * 2.0);
        assert_eq!(h[0], 0.0);
        assert_eq!(h[n], 0.0);
    }

    #[test]
    fn smoothing_lowers_step_peaks() {
        let (m, g) = channel();
        let p = g.positions(&m);
        let raw = curvature(&p, &g.arcs, 0.0);
        let smooth = curvature(&p, &g.arcs, default_eps_s(mean_edge_length(&p, &g.arcs)));
        let max = |v: &[f64]| v.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        assert!(max(&smooth) < max(&raw));
    }

    #[test]
    fn tangential_derivative_exact_for_quadratics() {
        let p: Vec<Vec2<f64>> = [0.0, 0.1, 0.35, 0.5, 0.9, 1.0].iter().map(|&x| [x, 0.0]).collect();
        let v: Vec<f64> = p.iter().map(|x| 1.0 + 2.0 * x[0] - 3.0 * x[0] * x[0]).collect();
        let a = vec![Arc { nodes: (0..6).collect(), closed: false }];
        for (x, d) in p.iter().zip(tangential_derivative(&p, &a, &v)) {
            assert!((d - (2.0 - 6.0 * x[0])).abs() < 1e-12);
        }
    }

    #[test]
    fn effective_terms_reference_values() {
        let params = crate::PhysicalParams::default();
        let scales = crate::Scales::new(&params, 1e-9, 2);
        let dl: Dimensionless<f64> = Dimensionless::from_params(&params, &scales, true);
        let (ps, gs) = effective_terms(&[1.0], &[0.0], &[0.0], &dl);
        let shift = scales.pressure_to_si(ps[0] - 1.0);
        assert!((shift + 1.812e7).abs() < 1e4, "{shift}");
        assert_eq!(gs[0], dl.gamma);
        let classical = Dimensionless { g: 0.0, ..dl };
        let (ps, gs) = effective_terms(&[2.0], &[0.0], &[0.0], &classical);
        assert_eq!((ps[0], gs[0]), (2.0, dl.gamma));
    }

    #[test]
    fn projection_is_idempotent_and_zeroes_ends() {
        let (m, g) = channel();
        let p = g.positions(&m);
        let nu = nodal_normals(&p, &g.arcs);
        let update: Vec<Vec2<f64>> = (0..g.len()).map(|k| [(k as f64).sin(), (k as f64 * 0.7).cos()]).collect();
        let once = project_compatibility(&update, &g, &nu);
        let twice = project_compatibility(&once, &g, &nu);
        for e in g.endpoints() {
            assert_eq!(once[e], [0.0, 0.0]);
        }
        for (a, b) in once.iter().zip(&twice) {
            assert!(scalar::dist(*a, *b) <= 1e-12);
        }
    }

    #[test]
    fn normal_extension_bounded_and_symmetric() {
        let (m, g) = channel();
        let fluid = m.submesh(Region::Fluid).unwrap();
        let gf = g.remap(|v| fluid.from_parent[v]).unwrap();
        let v = extend_normal(&fluid.mesh, &gf).unwrap();
        assert!(v.iter().all(|x| scalar::norm(*x) <= 1.0 + 1e-10));
        // On Γ the extension reproduces the normal.
        let nu = nodal_normals(&gf.positions(&fluid.mesh), &gf.arcs);
        for (k, &node) in gf.nodes.iter().enumerate() {
            assert!(scalar::dist(v[node], nu[k]) < 1e-14);
        }
    }

    #[test]
    fn straight_channel_normal_extension_vanishes_midway() {
        let m = Mesh::<f64>::rectangle([0.0, -1.0], [4.0, 1.0], 16, 8, Region::Fluid, [BoundaryTag::Gamma, BoundaryTag::O0, BoundaryTag::Gamma, BoundaryTag::I0]);
        let g = GammaIndex::from_mesh(&m).unwrap();
        let v = extend_normal(&m, &g).unwrap();
        for (p, x) in m.nodes.iter().zip(&v) {
            if p[1].abs() < 1e-12 && (p[0] - 2.0).abs() < 1e-12 {
                assert!(scalar::norm(*x) < 1e-12);
            }
        }
    }

    #[test]
    fn displacement_extension_linear_and_bounded() {
        let (m, g) = channel();
        let lam: Vec<Vec2<f64>> = g.positions(&m).iter().map(|p| [0.0, 0.1 * (PI * p[0] / 20.0).sin()]).collect();
        let u = extend_displacement(&m, &g, &lam).unwrap();
        let bound = lam.iter().fold(0.0f64, |a, v| a.max(v[1].abs()));
        assert!(u.iter().all(|v| v[1].abs() <= bound + 1e-12 && v[0].abs() < 1e-12));
        let zero = extend_displacement(&m, &g, &vec![[0.0; 2]; g.len()]).unwrap();
        assert!(zero.iter().all(|v| *v == [0.0, 0.0]));
        let doubled: Vec<Vec2<f64>> = lam.iter().map(|v| [2.0 * v[0], 2.0 * v[1]]).collect();
        let u2 = extend_displacement(&m, &g, &doubled).unwrap();
        for (a, b) in u.iter().zip(&u2) {
            assert!((2.0 * a[1] - b[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn disk_extension_is_roughly_radial_near_rim() {
        let m = triangulate(&build_disk(3.0, 64), &TriangulateOptions::new(0.4, 1.0)).unwrap();
        let g = GammaIndex::from_mesh(&m).unwrap();
        let v = extend_normal(&m, &g).unwrap();
        for (p, x) in m.nodes.iter().zip(&v) {
            let r = scalar::norm(*p);
            if r > 2.7 && r < 2.999 {
                assert!(scalar::dot(scalar::normalize(*p), scalar::normalize(*x)) > 0.95);
            }
        }
    }
}
