//! Linear elasticity of the reference solid, interface tractions and the
//! Dirichlet-to-Neumann map on the interface.
//!
//! Interface quantities are indexed by position in a [`GammaIndex`]. Normals
//! point out of the fluid, i.e. into the solid, and nodal tractions are the
//! integrated forces ∫ (σ⁰·ν₀) φ_i dΓ₀ the solid exerts across Γ₀.

use thiserror::Error;

use crate::fem::{
    assemble_elasticity, AssemblyError, Cholesky, CsrMatrix, DirichletSystem, SolveError,
};
use crate::mesh::{BoundaryTag, GammaIndex, Mesh, MeshError, Region, SubMesh};
use crate::scalar::{self, Mat2, Real, Vec2};

#[derive(Debug, Error)]
pub enum ElasticityError {
    #[error("mesh has no solid region")]
    NoSolid,
    #[error("incompatible λ: interface node {node} is clamped but λ = ({x:e}, {y:e})")]
    IncompatibleLambda { node: usize, x: f64, y: f64 },
    #[error("expected {expected} interface values, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("interface node {0} is not in the solid")]
    MissingNode(usize),
    #[error("no solid triangle next to interface edge {0:?}")]
    DetachedEdge([usize; 2]),
    #[error("interface arc ending at node {0} does not leave the box along an axis")]
    SkewEnd(usize),
    #[error("deformation gradient not invertible next to interface edge {edge} (det = {det:e})")]
    Inverted { edge: usize, det: f64 },
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

/// Elastic moduli and the reference pressure, all in one unit system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Material<T> {
    /// First Lamé coefficient k_S − 2G_S/3.
    pub lame: T,
    pub shear: T,
    /// Reference solid pressure p_S⁰.
    pub p_s0: T,
}

impl<T: Real> Material<T> {
    /// Stress part of σ⁰ for a displacement gradient (without −p_S⁰ I).
    pub fn strain_stress(&self, grad: Mat2<T>) -> Mat2<T> {
        let tr = grad[0][0] + grad[1][1];
        let mut s = [[T::zero(); 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                s[i][j] = self.shear * (grad[i][j] + grad[j][i]);
            }
            s[i][i] += self.lame * tr;
        }
        s
    }

    /// First Piola–Kirchhoff stress σ⁰ = −p_S⁰ I + ε⁰(U).
    pub fn piola(&self, grad: Mat2<T>) -> Mat2<T> {
        let mut s = self.strain_stress(grad);
        s[0][0] -= self.p_s0;
        s[1][1] -= self.p_s0;
        s
    }
}

/// Where an interface traction is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Configuration {
    Reference,
    Current,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DisplacementSolution<T> {
    /// Displacement at each node of the solid submesh.
    pub u: Vec<Vec2<T>>,
    /// The prescribed interface displacement, per interface position.
    pub lambda: Vec<Vec2<T>>,
}

impl<T: Real> DisplacementSolution<T> {
    pub fn max_norm(&self) -> T {
        self.u.iter().fold(T::zero(), |m, v| m.max(scalar::norm(*v)))
    }
}

/// Precomputed solid operators for one reference mesh.
#[derive(Debug, Clone)]
pub struct ElasticSolver<T> {
    pub solid: SubMesh<T>,
    pub gamma: GammaIndex,
    pub material: Material<T>,
    /// Solid-local node of each interface position.
    gamma_local: Vec<usize>,
    clamped: Vec<bool>,
    stiffness: CsrMatrix<T>,
    dirichlet: DirichletSystem<T>,
    dirichlet_factor: Cholesky<T>,
    neumann: DirichletSystem<T>,
    neumann_factor: Cholesky<T>,
    /// Σ ν_e |e| / 2 over the reference interface edges at each position.
    normal_weights: Vec<Vec2<T>>,
    /// Interface edges (positions) and the solid triangle next to each.
    edges: Vec<[usize; 2]>,
    edge_triangle: Vec<usize>,
}

impl<T: Real> ElasticSolver<T> {
    /// `mesh` is the full reference mesh and `gamma` indexes its nodes.
    pub fn new(mesh: &Mesh<T>, gamma: &GammaIndex, material: Material<T>) -> Result<Self, ElasticityError> {
        if !mesh.has_region(Region::Solid) {
            return Err(ElasticityError::NoSolid);
        }
        let solid = mesh.submesh(Region::Solid)?;
        let sm = &solid.mesh;
        let n = sm.num_nodes();
        let gamma_local: Vec<usize> = gamma
            .nodes
            .iter()
            .map(|&v| solid.from_parent[v].ok_or(ElasticityError::MissingNode(v)))
            .collect::<Result<_, _>>()?;
        let mut clamped = vec![false; n];
        for e in sm.boundary_edges.iter().filter(|e| e.tag.is_clamped()) {
            clamped[e.nodes[0]] = true;
            clamped[e.nodes[1]] = true;
        }
        let stiffness = assemble_elasticity(sm, None, material.lame, material.shear)?;

        let dofs = |nodes: &mut dyn Iterator<Item = usize>| {
            let mut d: Vec<usize> = nodes.flat_map(|v| [2 * v, 2 * v + 1]).collect();
            d.sort_unstable();
            d.dedup();
            d
        };
        let neumann_fixed = dofs(&mut (0..n).filter(|&v| clamped[v]));
        let dirichlet_fixed = dofs(&mut (0..n).filter(|&v| clamped[v]).chain(gamma_local.iter().copied()));
        let dirichlet = DirichletSystem::new(&stiffness, &dirichlet_fixed);
        let neumann = DirichletSystem::new(&stiffness, &neumann_fixed);
        let dirichlet_factor = Cholesky::factor(&dirichlet.matrix)?;
        let neumann_factor = Cholesky::factor(&neumann.matrix)?;

        // Solid triangle on the far side of each interface edge.
        let mut edge_map = std::collections::HashMap::new();
        for (t, tri) in sm.triangles.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                edge_map.insert((a.min(b), a.max(b)), t);
            }
        }
        let edges = gamma.edges();
        let mut edge_triangle = Vec::with_capacity(edges.len());
        let mut normal_weights = vec![[T::zero(); 2]; gamma.len()];
        for &[a, b] in &edges {
            let (la, lb) = (gamma_local[a], gamma_local[b]);
            let t = *edge_map
                .get(&(la.min(lb), la.max(lb)))
                .ok_or(ElasticityError::DetachedEdge([gamma.nodes[a], gamma.nodes[b]]))?;
            edge_triangle.push(t);
            let w = scalar::scale(scalar::right_normal(scalar::sub(sm.nodes[lb], sm.nodes[la])), T::half());
            normal_weights[a] = scalar::add(normal_weights[a], w);
            normal_weights[b] = scalar::add(normal_weights[b], w);
        }
        Ok(Self {
            solid,
            gamma: gamma.clone(),
            material,
            gamma_local,
            clamped,
            stiffness,
            dirichlet,
            dirichlet_factor,
            neumann,
            neumann_factor,
            normal_weights,
            edges,
            edge_triangle,
        })
    }

    /// Pins the displacement normal to the end edge at the neighbours of the
    /// open-arc ends in the mixed problem, so that [`dtn_inverse`](Self::dtn_inverse)
    /// stays in the admissible set and its reaction there acts as the
    /// multiplier of that constraint. End edges must be axis-aligned.
    pub fn with_compatibility(mut self) -> Result<Self, ElasticityError> {
        let n = self.solid.mesh.num_nodes();
        let mut fixed: Vec<usize> = (0..n).filter(|&v| self.clamped[v]).flat_map(|v| [2 * v, 2 * v + 1]).collect();
        for arc in self.gamma.arcs.iter().filter(|a| !a.closed && a.nodes.len() > 2) {
            let m = arc.nodes.len();
            for (end, next) in [(arc.nodes[0], arc.nodes[1]), (arc.nodes[m - 1], arc.nodes[m - 2])] {
                let sm = &self.solid.mesh;
                let d = scalar::sub(sm.nodes[self.gamma_local[next]], sm.nodes[self.gamma_local[end]]);
                let tol = T::lit(1e-9) * scalar::norm(d);
                let component = if d[1].abs() <= tol {
                    1
                } else if d[0].abs() <= tol {
                    0
                } else {
                    return Err(ElasticityError::SkewEnd(self.gamma.nodes[end]));
                };
                fixed.push(2 * self.gamma_local[next] + component);
            }
        }
        fixed.sort_unstable();
        fixed.dedup();
        self.neumann = DirichletSystem::new(&self.stiffness, &fixed);
        self.neumann_factor = Cholesky::factor(&self.neumann.matrix)?;
        Ok(self)
    }

    pub fn num_interface_nodes(&self) -> usize {
        self.gamma.len()
    }

    /// ∫_Γ₀ ν₀ φ_i per interface position.
    pub fn normal_weights(&self) -> &[Vec2<T>] {
        &self.normal_weights
    }

    /// Whether an interface position sits on the clamped boundary.
    pub fn is_clamped(&self, position: usize) -> bool {
        self.clamped[self.gamma_local[position]]
    }

    fn check_len(&self, len: usize) -> Result<(), ElasticityError> {
        if len != self.gamma.len() {
            return Err(ElasticityError::Dimension { expected: self.gamma.len(), got: len });
        }
        Ok(())
    }

    /// Displacement with U = λ on Γ₀ and U = 0 on the clamped boundary.
    pub fn solve_displacement(&self, lambda: &[Vec2<T>]) -> Result<DisplacementSolution<T>, ElasticityError> {
        self.check_len(lambda.len())?;
        let n = self.solid.mesh.num_nodes();
        let mut full = vec![T::zero(); 2 * n];
        let tol = T::lit(1e-12) * (T::one() + lambda.iter().fold(T::zero(), |m, v| m.max(scalar::norm(*v))));
        for (k, &v) in self.gamma_local.iter().enumerate() {
            if self.clamped[v] {
                if scalar::norm(lambda[k]) > tol {
                    return Err(ElasticityError::IncompatibleLambda {
                        node: self.gamma.nodes[k],
                        x: lambda[k][0].f64(),
                        y: lambda[k][1].f64(),
                    });
                }
                continue;
            }
            full[2 * v] = lambda[k][0];
            full[2 * v + 1] = lambda[k][1];
        }
        let values: Vec<T> = self.dirichlet.fixed.iter().map(|&d| full[d]).collect();
        let rhs = self.dirichlet.reduce_rhs(&vec![T::zero(); 2 * n], &values);
        let x = self.dirichlet_factor.solve(&rhs);
        let u = self.dirichlet.reconstruct(&x, &values);
        Ok(DisplacementSolution { u: u.chunks(2).map(|c| [c[0], c[1]]).collect(), lambda: lambda.to_vec() })
    }

    /// Displacement gradient (∇U)_ij = ∂_j U_i on a solid triangle.
    pub fn displacement_gradient(&self, sol: &DisplacementSolution<T>, t: usize) -> Mat2<T> {
        let sm = &self.solid.mesh;
        let (g, _) = crate::fem::p1_gradients(sm.vertices(t));
        let tri = sm.triangles[t];
        let mut m = [[T::zero(); 2]; 2];
        for k in 0..3 {
            let u = sol.u[tri[k]];
            for i in 0..2 {
                for j in 0..2 {
                    m[i][j] += u[i] * g[k][j];
                }
            }
        }
        m
    }

    /// σ⁰ on every solid triangle.
    pub fn piola_stress(&self, sol: &DisplacementSolution<T>) -> Vec<Mat2<T>> {
        (0..self.solid.mesh.num_triangles())
            .map(|t| self.material.piola(self.displacement_gradient(sol, t)))
            .collect()
    }

    /// Consistent nodal interface forces of a solution: the action A(λ).
    pub fn reaction(&self, sol: &DisplacementSolution<T>) -> Vec<Vec2<T>> {
        let flat: Vec<T> = sol.u.iter().flat_map(|v| *v).collect();
        let ku = self.stiffness.mul_vec(&flat);
        self.gamma_local
            .iter()
            .zip(&self.normal_weights)
            .map(|(&v, w)| {
                [
                    -ku[2 * v] - self.material.p_s0 * w[0],
                    -ku[2 * v + 1] - self.material.p_s0 * w[1],
                ]
            })
            .collect()
    }

    /// Interface edges as pairs of positions, in the order used by
    /// [`traction`](Self::traction).
    pub fn interface_edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    /// Traction density per interface edge. `Reference` gives σ⁰·ν₀ on Γ₀;
    /// `Current` gives the Cauchy traction σ·ν on the deformed edge, with
    /// σ = σ⁰ Fᵀ / det F.
    pub fn traction(
        &self,
        sol: &DisplacementSolution<T>,
        configuration: Configuration,
    ) -> Result<Vec<Vec2<T>>, ElasticityError> {
        let sm = &self.solid.mesh;
        let mut out = Vec::with_capacity(self.edges.len());
        for (e, (&[a, b], &t)) in self.edges.iter().zip(&self.edge_triangle).enumerate() {
            let grad = self.displacement_gradient(sol, t);
            let p = self.material.piola(grad);
            let (la, lb) = (self.gamma_local[a], self.gamma_local[b]);
            match configuration {
                Configuration::Reference => {
                    let nu0 = scalar::normalize(scalar::right_normal(scalar::sub(sm.nodes[lb], sm.nodes[la])));
                    out.push(scalar::mat_vec(p, nu0));
                }
                Configuration::Current => {
                    let f = [
                        [T::one() + grad[0][0], grad[0][1]],
                        [grad[1][0], T::one() + grad[1][1]],
                    ];
                    let det = scalar::det(f);
                    if !(det > T::zero()) {
                        return Err(ElasticityError::Inverted { edge: e, det: det.f64() });
                    }
                    let xa = scalar::add(sm.nodes[la], sol.u[la]);
                    let xb = scalar::add(sm.nodes[lb], sol.u[lb]);
                    let nu = scalar::normalize(scalar::right_normal(scalar::sub(xb, xa)));
                    let cauchy = scalar::mat_mul(p, scalar::transpose(f));
                    out.push(scalar::scale(scalar::mat_vec(cauchy, nu), T::one() / det));
                }
            }
        }
        Ok(out)
    }

    /// Nodal forces from a traction density that is constant on each
    /// reference interface edge.
    pub fn integrate_edge_density(&self, density: &[Vec2<T>]) -> Result<Vec<Vec2<T>>, ElasticityError> {
        if density.len() != self.edges.len() {
            return Err(ElasticityError::Dimension { expected: self.edges.len(), got: density.len() });
        }
        let sm = &self.solid.mesh;
        let mut out = vec![[T::zero(); 2]; self.gamma.len()];
        for (&[a, b], t) in self.edges.iter().zip(density) {
            let half = T::half() * scalar::dist(sm.nodes[self.gamma_local[a]], sm.nodes[self.gamma_local[b]]);
            let f = scalar::scale(*t, half);
            out[a] = scalar::add(out[a], f);
            out[b] = scalar::add(out[b], f);
        }
        Ok(out)
    }

    /// Solves the mixed problem with nodal interface forces `forces` and
    /// returns the interface displacement: the action of A⁻¹.
    pub fn dtn_inverse(&self, forces: &[Vec2<T>]) -> Result<Vec<Vec2<T>>, ElasticityError> {
        Ok(self.neumann_solve(forces)?.lambda)
    }

    /// Full displacement of the mixed problem behind [`dtn_inverse`](Self::dtn_inverse).
    pub fn neumann_solve(&self, forces: &[Vec2<T>]) -> Result<DisplacementSolution<T>, ElasticityError> {
        self.check_len(forces.len())?;
        let n = self.solid.mesh.num_nodes();
        let mut b = vec![T::zero(); 2 * n];
        for (k, &v) in self.gamma_local.iter().enumerate() {
            let w = self.normal_weights[k];
            b[2 * v] -= forces[k][0] + self.material.p_s0 * w[0];
            b[2 * v + 1] -= forces[k][1] + self.material.p_s0 * w[1];
        }
        let values = vec![T::zero(); self.neumann.fixed.len()];
        let rhs = self.neumann.reduce_rhs(&b, &values);
        let x = self.neumann_factor.solve(&rhs);
        let full = self.neumann.reconstruct(&x, &values);
        let u: Vec<Vec2<T>> = full.chunks(2).map(|c| [c[0], c[1]]).collect();
        let lambda = self.gamma_local.iter().map(|&v| u[v]).collect();
        Ok(DisplacementSolution { u, lambda })
    }

    /// E_mech,s = ∫_S₀ ½ ε⁰(U):∇U − p_S⁰ div U, elementwise.
    pub fn mechanical_energy(&self, sol: &DisplacementSolution<T>) -> T {
        let sm = &self.solid.mesh;
        let mut e = T::zero();
        for t in 0..sm.num_triangles() {
            let g = self.displacement_gradient(sol, t);
            let s = self.material.strain_stress(g);
            let mut contraction = T::zero();
            for i in 0..2 {
                for j in 0..2 {
                    contraction += s[i][j] * g[i][j];
                }
            }
            e += sm.signed_area(t) * (T::half() * contraction - self.material.p_s0 * (g[0][0] + g[1][1]));
        }
        e
    }

    /// ½ Uᵀ K U from the assembled matrix.
    pub fn bilinear_energy(&self, sol: &DisplacementSolution<T>) -> T {
        let flat: Vec<T> = sol.u.iter().flat_map(|v| *v).collect();
        T::half() * self.stiffness.quad_form(&flat, &flat)
    }

    /// ∫_S₀ div U.
    pub fn divergence_integral(&self, sol: &DisplacementSolution<T>) -> T {
        let sm = &self.solid.mesh;
        (0..sm.num_triangles())
            .map(|t| {
                let g = self.displacement_gradient(sol, t);
                sm.signed_area(t) * (g[0][0] + g[1][1])
            })
            .sum()
    }

    /// Interface displacement of the solid submesh nodes lifted to the parent mesh.
    pub fn to_parent(&self, sol: &DisplacementSolution<T>, parent_nodes: usize) -> Vec<Vec2<T>> {
        let mut out = vec![[T::zero(); 2]; parent_nodes];
        for (k, &v) in self.solid.to_parent.iter().enumerate() {
            out[v] = sol.u[k];
        }
        out
    }

    /// Clamped tags present in the solid; useful for diagnostics.
    pub fn clamped_tags(&self) -> Vec<BoundaryTag> {
        let mut tags: Vec<BoundaryTag> =
            self.solid.mesh.boundary_edges.iter().map(|e| e.tag).filter(|t| t.is_clamped()).collect();
        tags.sort();
        tags.dedup();
        tags
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::BoundaryTag::*;

    /// Solid strip [0, 4] × [0, 1] with the interface on the bottom side,
    /// clamped elsewhere.
    fn strip(nx: usize, ny: usize) -> (Mesh<f64>, GammaIndex) {
        let mut m = Mesh::rectangle([0.0, 0.0], [4.0, 1.0], nx, ny, Region::Solid, [Gamma, Pi, Sigma, Z0]);
        // Interface edges must have the fluid (y < 0) on their left.
        for e in m.boundary_edges.iter_mut().filter(|e| e.tag == Gamma) {
            e.nodes.swap(0, 1);
        }
        let g = GammaIndex::from_mesh(&m).unwrap();
        (m, g)
    }

    fn material() -> Material<f64> {
        Material { lame: 3.0, shear: 1.5, p_s0: -2.0 }
    }

    fn bump(m: &Mesh<f64>, g: &GammaIndex, amp: f64) -> Vec<Vec2<f64>> {
        g.positions(m)
            .iter()
            .map(|p| [0.0, amp * (std::f64::consts::PI * p[0] / 4.0).sin().powi(2)])
            .collect()
    }

    #[test]
    fn zero_lambda_gives_zero_displacement_and_pressure_stress() {
        let (m, g) = strip(8, 3);
        let s = ElasticSolver::new(&m, &g, material()).unwrap();
        let sol = s.solve_displacement(&vec![[0.0; 2]; g.len()]).unwrap();
        assert_eq!(sol.max_norm(), 0.0);
        for p in s.piola_stress(&sol) {
            assert_eq!(p, [[2.0, 0.0], [0.0, 2.0]]);
        }
        let cur = s.traction(&sol, Configuration::Current).unwrap();
        let refe = s.traction(&sol, Configuration::Reference).unwrap();
        for (c, r) in cur.iter().zip(&refe) {
            // ν = (0, 1) into the solid, σ⁰ν = −p_S⁰ ν
            assert!((c[0] - r[0]).abs() < 1e-15 && (c[1] - 2.0).abs() < 1e-14);
        }
    }

    #[test]
    fn table_pressure_gives_positive_diagonal() {
        let (m, g) = strip(4, 2);
        let mat = Material { lame: 3.6e9, shear: 9.22e7, p_s0: -6.5e7 };
        let s = ElasticSolver::new(&m, &g, mat).unwrap();
        let sol = s.solve_displacement(&vec![[0.0; 2]; g.len()]).unwrap();
        assert_eq!(s.piola_stress(&sol)[0], [[6.5e7, 0.0], [0.0, 6.5e7]]);
    }

    #[test]
    fn uniform_dilation_stress_is_isotropic() {
        let mat = material();
        let alpha = 0.01;
        let p = mat.piola([[alpha, 0.0], [0.0, alpha]]);
        assert_eq!(p[0][1], 0.0);
        assert!((p[0][0] - p[1][1]).abs() < 1e-15);
        assert!((p[0][0] - (2.0 + 2.0 * alpha * mat.lame + 2.0 * alpha * mat.shear)).abs() < 1e-14);
        let shear = mat.strain_stress([[0.0, 0.3], [-0.1, 0.0]]);
        assert_eq!(shear[0][1], shear[1][0]);
    }

    #[test]
    fn incompatible_lambda_rejected() {
        let (m, g) = strip(6, 2);
        let s = ElasticSolver::new(&m, &g, material()).unwrap();
        let end = g.endpoints()[0];
        let mut lam = vec![[0.0; 2]; g.len()];
        lam[end] = [0.0, 0.1];
        assert!(matches!(s.solve_displacement(&lam), Err(ElasticityError::IncompatibleLambda { .. })));
    }

    #[test]
    fn round_trip_through_dtn() {
        let (m, g) = strip(16, 4);
        let s = ElasticSolver::new(&m, &g, material()).unwrap();
        let lam = bump(&m, &g, 0.05);
        let sol = s.solve_displacement(&lam).unwrap();
        let back = s.dtn_inverse(&s.reaction(&sol)).unwrap();
        for (a, b) in lam.iter().zip(&back) {
            assert!(scalar::dist(*a, *b) < 1e-10);
        }
    }

    #[test]
    fn energy_consistency_and_pullback() {
        let (m, g) = strip(16, 4);
        let s = ElasticSolver::new(&m, &g, material()).unwrap();
        let sol = s.solve_displacement(&bump(&m, &g, 0.05)).unwrap();
        let lhs = s.bilinear_energy(&sol);
        let rhs = s.mechanical_energy(&sol) + s.material.p_s0 * s.divergence_integral(&sol);
        assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs());

        let refe = s.traction(&sol, Configuration::Reference).unwrap();
        let cur = s.traction(&sol, Configuration::Current).unwrap();
        let sm = &s.solid.mesh;
        for (k, &[a, b]) in s.interface_edges().iter().enumerate() {
            let (la, lb) = (s.gamma_local[a], s.gamma_local[b]);
            let l0 = scalar::dist(sm.nodes[la], sm.nodes[lb]);
            let l1 = scalar::dist(scalar::add(sm.nodes[la], sol.u[la]), scalar::add(sm.nodes[lb], sol.u[lb]));
            let d = scalar::sub(scalar::scale(cur[k], l1), scalar::scale(refe[k], l0));
            assert!(scalar::norm(d) < 1e-10);
        }
    }

    #[test]
    fn dtn_is_symmetric_and_linear() {
        let (m, g) = strip(12, 3);
        let mut mat = material();
        mat.p_s0 = 0.0;
        let s = ElasticSolver::new(&m, &g, mat).unwrap();
        let l1 = bump(&m, &g, 0.1);
        let l2: Vec<Vec2<f64>> = l1.iter().enumerate().map(|(k, v)| [v[1] * (k as f64 * 0.3).cos(), v[1]]).collect();
        let a1 = s.reaction(&s.solve_displacement(&l1).unwrap());
        let a2 = s.reaction(&s.solve_displacement(&l2).unwrap());
        let pair = |x: &[Vec2<f64>], y: &[Vec2<f64>]| x.iter().zip(y).map(|(a, b)| scalar::dot(*a, *b)).sum::<f64>();
        let (p12, p21) = (pair(&a1, &l2), pair(&l1, &a2));
        assert!((p12 - p21).abs() <= 1e-10 * p12.abs().max(1e-300));

        let mix: Vec<Vec2<f64>> = l1.iter().zip(&l2).map(|(a, b)| [2.0 * a[0] - b[0], 2.0 * a[1] - b[1]]).collect();
        let u1 = s.solve_displacement(&l1).unwrap().u;
        let u2 = s.solve_displacement(&l2).unwrap().u;
        let um = s.solve_displacement(&mix).unwrap().u;
        for k in 0..um.len() {
            assert!(scalar::dist(um[k], [2.0 * u1[k][0] - u2[k][0], 2.0 * u1[k][1] - u2[k][1]]) < 1e-12);
        }
    }

    #[test]
    fn force_balance_on_solid_boundary() {
        // Total reaction of clamped plus interface nodes vanishes.
        let (m, g) = strip(12, 3);
        let mut mat = material();
        mat.p_s0 = 0.0;
        let s = ElasticSolver::new(&m, &g, mat).unwrap();
        let sol = s.solve_displacement(&bump(&m, &g, 0.1)).unwrap();
        let flat: Vec<f64> = sol.u.iter().flat_map(|v| *v).collect();
        let ku = s.stiffness.mul_vec(&flat);
        let fx: f64 = ku.iter().step_by(2).sum();
        let fy: f64 = ku.iter().skip(1).step_by(2).sum();
        assert!(fx.abs() < 1e-12 && fy.abs() < 1e-12);
    }

    #[test]
    fn bump_displacement_peaks_on_interface() {
        let (m, g) = strip(16, 4);
        let s = ElasticSolver::new(&m, &g, material()).unwrap();
        let sol = s.solve_displacement(&bump(&m, &g, 0.05)).unwrap();
        let on_gamma = sol.lambda.iter().fold(0.0f64, |a, v| a.max(scalar::norm(*v)));
        assert!((sol.max_norm() - on_gamma).abs() < 1e-14);
    }

    #[test]
    fn constant_normal_traction_is_mirror_symmetric() {
        let (m, g) = strip(16, 4);
        let s = ElasticSolver::new(&m, &g, material()).unwrap();
        let density = vec![[0.0, 1.0]; s.interface_edges().len()];
        let lam = s.dtn_inverse(&s.integrate_edge_density(&density).unwrap()).unwrap();
        let pos = g.positions(&m);
        for (k, p) in pos.iter().enumerate() {
            let j = pos.iter().position(|q| (q[0] - (4.0 - p[0])).abs() < 1e-12).unwrap();
            assert!((lam[k][1] - lam[j][1]).abs() < 1e-12);
            assert!((lam[k][0] + lam[j][0]).abs() < 1e-12);
        }
    }
}
