//! Nonlinear Poisson–Boltzmann problem for the dimensionless potential
//! u = −Fφ/(RT):
//!
//! ```text
//! −Δu + u0 eᵘ = 0 in Ω,   ∂_ν u = g on Γ,   ∂_ν u = 0 on the mouths.
//! ```
//!
//! The exponential term is integrated with the edge-midpoint rule on the P1
//! interpolant, so the discrete residual is the exact gradient of the
//! discrete functional ½uᵀKu + u0 ∫ eᵘ − g ∫_Γ u.

use thiserror::Error;

use crate::fem::{assemble_scalar, boundary_functional, p1_gradients, Cholesky, CsrMatrix, SolveError, Symbolic, Triplets};
use crate::mesh::{BoundaryTag, Mesh, Region};
use crate::params::{PhysicalParams, Scales};
use crate::scalar::{self, Real};

/// Largest admissible potential; beyond it the solve is declared non-physical.
pub const MAX_POTENTIAL: f64 = 50.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PbError {
    #[error("GEN unsatisfiable for σ_c = 0 (g = {0})")]
    GenUnsatisfiable(f64),
    #[error("u0 must be positive, got {0}")]
    NonPositiveU0(f64),
    #[error("fluid region is empty or disconnected")]
    Disconnected,
    #[error("mesh has no charged interface edges")]
    NoInterface,
    #[error("Newton diverged after {iterations} iterations (residual {residual:e})")]
    Diverged { iterations: usize, residual: f64 },
    #[error("non-physical potential: max u = {0} exceeds {MAX_POTENTIAL}")]
    NonPhysical(f64),
    #[error("initial guess has {got} values for {expected} nodes")]
    Dimension { expected: usize, got: usize },
    #[error("λ_p = {0} is outside the domain λ_p < 8 of the radial formula")]
    RadialDomain(f64),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    /// Stop when the residual 2-norm is at most this.
    pub tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 60, max_halvings: 40 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PotentialSolution<T> {
    /// Dimensionless potential at every mesh node (0 off the fluid).
    pub u: Vec<T>,
    /// Residual 2-norm before each Newton step and after the last one.
    pub newton_trace: Vec<T>,
}

impl<T: Real> PotentialSolution<T> {
    pub fn iterations(&self) -> usize {
        self.newton_trace.len().saturating_sub(1)
    }

    pub fn residual(&self) -> T {
        *self.newton_trace.last().unwrap_or(&T::infinity())
    }

    pub fn max_u(&self) -> T {
        self.u.iter().fold(T::neg_infinity(), |m, &v| m.max(v))
    }
}

/// Operators of the potential problem on one fluid mesh.
#[derive(Debug, Clone)]
pub struct PbSolver<T> {
    pub mesh: Mesh<T>,
    pub u0: T,
    pub g: T,
    active: Vec<bool>,
    stiffness: CsrMatrix<T>,
    /// ∫_Γ φ_i.
    gamma_load: Vec<T>,
    gamma_length: T,
    symbolic: Symbolic,
}

impl<T: Real> PbSolver<T> {
    /// Works on the fluid triangles of `mesh`; other nodes are held at 0.
    pub fn new(mesh: &Mesh<T>, u0: T, g: T) -> Result<Self, PbError> {
        if !(u0 > T::zero()) {
            return Err(PbError::NonPositiveU0(u0.f64()));
        }
        if !(g > T::zero()) {
            return Err(PbError::GenUnsatisfiable(g.f64()));
        }
        if !mesh.has_region(Region::Fluid) || !mesh.is_connected(Some(Region::Fluid)) {
            return Err(PbError::Disconnected);
        }
        let n = mesh.num_nodes();
        let mut active = vec![false; n];
        for (t, tri) in mesh.triangles.iter().enumerate() {
            if mesh.regions[t] == Region::Fluid {
                for &v in tri {
                    active[v] = true;
                }
            }
        }
        let zero = |_: [T; 2]| T::zero();
        let (mut k, _) = assemble_scalar(mesh, Some(Region::Fluid), &|_| T::one(), &zero, &zero);
        if active.iter().any(|a| !a) {
            let mut t = Triplets::new(n);
            for (v, _) in active.iter().enumerate().filter(|(_, a)| !**a) {
                t.add(v, v, T::one());
            }
            k = k.add_scaled(T::one(), &t.to_csr());
        }
        let gamma_load = boundary_functional(mesh, BoundaryTag::Gamma, &|_| T::one());
        let gamma_length = mesh.boundary_length(BoundaryTag::Gamma);
        if !(gamma_length > T::zero()) {
            return Err(PbError::NoInterface);
        }
        let symbolic = Symbolic::new(&k);
        Ok(Self { mesh: mesh.clone(), u0, g, active, stiffness: k, gamma_load, gamma_length, symbolic })
    }

    pub fn gamma_length(&self) -> T {
        self.gamma_length
    }

    fn fluid_triangles(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.mesh.num_triangles()).filter(move |&t| self.mesh.regions[t] == Region::Fluid)
    }

    /// Midpoint values of eᵘ on a triangle, ordered as the edges (0,1), (1,2), (2,0).
    fn exp_mid(&self, t: usize, u: &[T]) -> [T; 3] {
        let [a, b, c] = self.mesh.triangles[t];
        let h = T::half();
        [((u[a] + u[b]) * h).exp(), ((u[b] + u[c]) * h).exp(), ((u[c] + u[a]) * h).exp()]
    }

    /// ∫_Ω eᵘ φ_i with the midpoint rule.
    pub fn exp_load(&self, u: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); u.len()];
        let sixth = T::one() / T::lit(6.0);
        for t in self.fluid_triangles() {
            let e = self.exp_mid(t, u);
            let w = self.mesh.signed_area(t) * sixth;
            let [a, b, c] = self.mesh.triangles[t];
            out[a] += w * (e[0] + e[2]);
            out[b] += w * (e[0] + e[1]);
            out[c] += w * (e[1] + e[2]);
        }
        out
    }

    /// ∫_Ω eᵘ.
    pub fn exp_integral(&self, u: &[T]) -> T {
        let third = T::one() / T::lit(3.0);
        self.fluid_triangles()
            .map(|t| {
                let e = self.exp_mid(t, u);
                self.mesh.signed_area(t) * third * (e[0] + e[1] + e[2])
            })
            .sum()
    }

    /// ∫_Ω eᵘ u with the same rule.
    pub fn exp_u_integral(&self, u: &[T]) -> T {
        let third = T::one() / T::lit(3.0);
        let h = T::half();
        self.fluid_triangles()
            .map(|t| {
                let e = self.exp_mid(t, u);
                let [a, b, c] = self.mesh.triangles[t];
                let m = [(u[a] + u[b]) * h, (u[b] + u[c]) * h, (u[c] + u[a]) * h];
                self.mesh.signed_area(t) * third * (e[0] * m[0] + e[1] * m[1] + e[2] * m[2])
            })
            .sum()
    }

    /// R(u) = K u + u0 ∫ eᵘ φ_i − g ∫_Γ φ_i; zero on inactive nodes.
    pub fn residual(&self, u: &[T]) -> Vec<T> {
        let mut r = self.stiffness.mul_vec(u);
        let e = self.exp_load(u);
        for i in 0..r.len() {
            if self.active[i] {
                r[i] += self.u0 * e[i] - self.g * self.gamma_load[i];
            }
        }
        r
    }

    pub fn jacobian(&self, u: &[T]) -> CsrMatrix<T> {
        let mut t = Triplets::with_capacity(u.len(), 9 * self.mesh.num_triangles());
        let w0 = T::one() / T::lit(12.0);
        for tri in self.fluid_triangles() {
            let e = self.exp_mid(tri, u);
            let w = self.mesh.signed_area(tri) * w0 * self.u0;
            let [a, b, c] = self.mesh.triangles[tri];
            // φ_i φ_j at the midpoints is ¼ on the edge's own pair.
            t.add(a, a, w * (e[0] + e[2]));
            t.add(b, b, w * (e[0] + e[1]));
            t.add(c, c, w * (e[1] + e[2]));
            for (i, j, ex) in [(a, b, e[0]), (b, c, e[1]), (c, a, e[2])] {
                t.add(i, j, w * ex);
                t.add(j, i, w * ex);
            }
        }
        self.stiffness.add_scaled(T::one(), &t.to_csr())
    }

    /// ½ ∫ |∇u|² on the fluid.
    pub fn dirichlet_energy(&self, u: &[T]) -> T {
        T::half() * self.stiffness.quad_form(u, u)
    }

    /// ∫_Γ u.
    pub fn gamma_integral(&self, u: &[T]) -> T {
        self.gamma_load.iter().zip(u).map(|(a, b)| *a * *b).sum()
    }

    /// ½uᵀKu + u0 ∫ eᵘ − g ∫_Γ u; its gradient is [`residual`](Self::residual).
    pub fn functional(&self, u: &[T]) -> T {
        let ku = self.stiffness.quad_form(u, u);
        let gamma: T = self.gamma_load.iter().zip(u).map(|(a, b)| *a * *b).sum();
        T::half() * ku + self.u0 * self.exp_integral(u) - self.g * gamma
    }

    /// Constant state satisfying global electro-neutrality.
    pub fn neutral_guess(&self) -> Vec<T> {
        let area = self.mesh.area(Some(Region::Fluid));
        let c = (self.g * self.gamma_length / (self.u0 * area)).ln();
        self.active.iter().map(|&a| if a { c } else { T::zero() }).collect()
    }

    /// |u0 ∫eᵘ − g|Γ|| / (g|Γ|).
    pub fn gen_residual(&self, u: &[T]) -> T {
        let q = self.g * self.gamma_length;
        (self.u0 * self.exp_integral(u) - q).abs() / q
    }

    /// Damped Newton from `guess` (electro-neutral constant when `None`).
    pub fn solve(&self, guess: Option<&[T]>, opts: &NewtonOptions) -> Result<PotentialSolution<T>, PbError> {
        let n = self.mesh.num_nodes();
        let mut u = match guess {
            Some(g) if g.len() != n => return Err(PbError::Dimension { expected: n, got: g.len() }),
            Some(g) => g.iter().zip(&self.active).map(|(&v, &a)| if a { v } else { T::zero() }).collect(),
            None => self.neutral_guess(),
        };
        let tol = T::lit(opts.tol);
        let mut r = self.residual(&u);
        let mut rn = finite_norm(&r);
        let mut trace = vec![rn];
        let mut it = 0;
        while !(rn <= tol) {
            if it == opts.max_iter {
                return Err(PbError::Diverged { iterations: it, residual: rn.f64() });
            }
            let jac = self.jacobian(&u);
            let fac = Cholesky::factor_with(&self.symbolic, &jac)?;
            let du = fac.solve(&r);
            let mut alpha = T::one();
            let mut accepted = false;
            for _ in 0..=opts.max_halvings {
                let trial: Vec<T> = u.iter().zip(&du).map(|(a, d)| *a - alpha * *d).collect();
                let rt = self.residual(&trial);
                let tn = finite_norm(&rt);
                if tn < rn {
                    u = trial;
                    r = rt;
                    rn = tn;
                    accepted = true;
                    break;
                }
                alpha *= T::half();
            }
            it += 1;
            trace.push(rn);
            if !accepted {
                // Round-off floor just above the tolerance still counts.
                if rn <= tol * T::lit(100.0) {
                    log::debug!("Newton stalled at residual {:e}", rn.f64());
                    break;
                }
                return Err(PbError::Diverged { iterations: it, residual: rn.f64() });
            }
        }
        let sol = PotentialSolution { u, newton_trace: trace };
        let max_u = sol.max_u();
        if max_u > T::lit(MAX_POTENTIAL) {
            return Err(PbError::NonPhysical(max_u.f64()));
        }
        Ok(sol)
    }

    /// Largest per-triangle |∇ĉ − ĉ∇u| / |∇ĉ| with ĉ = eᵘ, the discrete
    /// Nernst–Planck defect (zero for the exact solution).
    pub fn nernst_planck_defect(&self, u: &[T]) -> T {
        let mut worst = T::zero();
        for t in self.fluid_triangles() {
            let tri = self.mesh.triangles[t];
            let (g, _) = p1_gradients(self.mesh.vertices(t));
            let mut gc = [T::zero(); 2];
            let mut gu = [T::zero(); 2];
            let mut cbar = T::zero();
            for k in 0..3 {
                let c = u[tri[k]].exp();
                gc = scalar::add(gc, scalar::scale(g[k], c));
                gu = scalar::add(gu, scalar::scale(g[k], u[tri[k]]));
                cbar += c / T::lit(3.0);
            }
            let den = scalar::norm(gc);
            if den > T::zero() {
                worst = worst.max(scalar::norm(scalar::sub(gc, scalar::scale(gu, cbar))) / den);
            }
        }
        worst
    }
}

fn finite_norm<T: Real>(r: &[T]) -> T {
    let n = crate::fem::sparse::norm2(r);
    if n.is_finite() { n } else { T::infinity() }
}

/// One-call form of [`PbSolver::solve`].
pub fn solve_potential<T: Real>(
    mesh: &Mesh<T>,
    u0: T,
    g: T,
    guess: Option<&[T]>,
    opts: &NewtonOptions,
) -> Result<PotentialSolution<T>, PbError> {
    PbSolver::new(mesh, u0, g)?.solve(guess, opts)
}

/// Concentration, pressure and potential in SI units.
#[derive(Debug, Clone, PartialEq)]
pub struct SecondaryFields {
    /// [mol/m³]
    pub c: Vec<f64>,
    /// [N/m²]
    pub p: Vec<f64>,
    /// [V]
    pub phi: Vec<f64>,
}

/// c = c0 eᵘ, p = RT(c − c0) + p0, φ = −u RT/F.
pub fn secondary_fields<T: Real>(u: &[T], params: &PhysicalParams) -> Result<SecondaryFields, PbError> {
    let max = u.iter().fold(f64::NEG_INFINITY, |m, v| m.max(v.f64()));
    if max > MAX_POTENTIAL {
        return Err(PbError::NonPhysical(max));
    }
    let rt = params.r * params.t;
    let vt = params.thermal_voltage();
    let c: Vec<f64> = u.iter().map(|v| params.c0 * v.f64().exp()).collect();
    let p = c.iter().map(|c| rt * (c - params.c0) + params.p0).collect();
    let phi = u.iter().map(|v| -v.f64() * vt).collect();
    Ok(SecondaryFields { c, p, phi })
}

/// Dimensionless pressure p / (RT c0) = eᵘ − 1 + p̂0.
pub fn pressure_hat<T: Real>(u: &[T], p0_hat: T) -> Vec<T> {
    u.iter().map(|&v| v.exp() - T::one() + p0_hat).collect()
}

/// Debye length sqrt(ε R T / (F² c0)) [m].
pub fn debye_length(params: &PhysicalParams) -> f64 {
    params.debye_length()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialOracle {
    /// Debye length [m].
    pub debye_length: f64,
    /// r² / d_l².
    pub lambda_p: f64,
    /// (2RT/F) ln(1 − λ_p/8) [V].
    pub phi_wall: f64,
}

/// Closed-form wall potential of a charged channel of radius `r` [m]; the
/// Debye length defaults to the one of `params`.
pub fn radial_oracle(r: f64, debye: Option<f64>, params: &PhysicalParams) -> Result<RadialOracle, PbError> {
    let dl = debye.unwrap_or_else(|| params.debye_length());
    let lambda_p = r * r / (dl * dl);
    if !(lambda_p < 8.0) {
        return Err(PbError::RadialDomain(lambda_p));
    }
    let phi_wall = 2.0 * params.thermal_voltage() * (1.0 - lambda_p / 8.0).ln();
    Ok(RadialOracle { debye_length: dl, lambda_p, phi_wall })
}

/// Exact solution of the slab problem −u'' + u0 eᵘ = 0 on (−w, w) with
/// u'(±w) = ±g: u = a − 2 ln cos(k y).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlabProfile {
    pub k: f64,
    pub a: f64,
    pub half_width: f64,
}

impl SlabProfile {
    pub fn new(u0: f64, g: f64, half_width: f64) -> Result<Self, PbError> {
        if !(g > 0.0) {
            return Err(PbError::GenUnsatisfiable(g));
        }
        if !(u0 > 0.0) {
            return Err(PbError::NonPositiveU0(u0));
        }
        // 2k tan(k w) = g is increasing in k on (0, π/(2w)).
        let (mut lo, mut hi) = (0.0, std::f64::consts::FRAC_PI_2 / half_width);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if 2.0 * mid * (mid * half_width).tan() < g {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let k = 0.5 * (lo + hi);
        let a = (2.0 * k * k / u0).ln();
        Ok(Self { k, a, half_width })
    }

    pub fn eval(&self, y: f64) -> f64 {
        self.a - 2.0 * (self.k * y).cos().ln()
    }
}

/// Slab potential by shooting from the midplane with fixed-step RK4 and
/// bisection on u(0); returns (u(0), u(w)).
pub fn slab_shooting(u0: f64, g: f64, half_width: f64, steps: usize) -> Result<(f64, f64), PbError> {
    if !(g > 0.0) {
        return Err(PbError::GenUnsatisfiable(g));
    }
    let shoot = |a: f64| -> (f64, f64) {
        let h = half_width / steps as f64;
        let f = |y: [f64; 2]| [y[1], u0 * y[0].exp()];
        let mut y = [a, 0.0];
        for _ in 0..steps {
            let k1 = f(y);
            let k2 = f([y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]]);
            let k3 = f([y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1]]);
            let k4 = f([y[0] + h * k3[0], y[1] + h * k3[1]]);
            for i in 0..2 {
                y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            if !y[1].is_finite() || y[1] > 1e6 {
                return (f64::INFINITY, f64::INFINITY);
            }
        }
        (y[0], y[1])
    };
    // u'(w) grows with u(0); bracket then bisect.
    let (mut lo, mut hi) = (-60.0, 10.0);
    if shoot(lo).1 > g || shoot(hi).1 < g {
        return Err(PbError::Diverged { iterations: 0, residual: g });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if shoot(mid).1 < g {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let a = 0.5 * (lo + hi);
    Ok((a, shoot(a).0))
}

/// Dimensionless potential to volts.
pub fn potential_to_si(u: f64, scales: &Scales) -> f64 {
    -u * scales.potential
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::BoundaryTag::*;
    use crate::mesh::{Mesh, Transfer};

    /// Channel [0, w] × [−1, 1] with charged walls and open mouths.
    fn slab(nx: usize, ny: usize) -> Mesh<f64> {
        Mesh::rectangle([0.0, -1.0], [1.0, 1.0], nx, ny, Region::Fluid, [Gamma, O0, Gamma, I0])
    }

    const U0: f64 = 2.14;
    const G: f64 = 7.436;

    fn solve(m: &Mesh<f64>, u0: f64, guess: Option<&[f64]>) -> PotentialSolution<f64> {
        solve_potential(m, u0, G, guess, &NewtonOptions::default()).unwrap()
    }

    #[test]
    fn zero_charge_is_rejected() {
        let err = solve_potential(&slab(2, 4), 1.0, 0.0, None, &NewtonOptions::default()).unwrap_err();
        assert!(err.to_string().contains("GEN unsatisfiable for σ_c = 0"));
    }

    #[test]
    fn converged_solution_satisfies_gen() {
        let m = slab(2, 20);
        let s = PbSolver::new(&m, U0, G).unwrap();
        let sol = s.solve(None, &NewtonOptions::default()).unwrap();
        assert!(sol.residual() <= 1e-10);
        assert!(s.gen_residual(&sol.u) <= 1e-8);
        let trace = &sol.newton_trace;
        assert!(trace.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn one_newton_step_leaves_gen_violated() {
        let m = slab(2, 20);
        let s = PbSolver::new(&m, U0, G).unwrap();
        let opts = NewtonOptions { max_iter: 1, ..Default::default() };
        assert!(s.solve(Some(&vec![0.0; m.num_nodes()]), &opts).is_err());
        let zero = vec![0.0; m.num_nodes()];
        assert!(s.gen_residual(&zero) > 0.1);
    }

    #[test]
    fn residual_is_gradient_of_functional() {
        let m = slab(3, 6);
        let s = PbSolver::new(&m, U0, G).unwrap();
        let u: Vec<f64> = m.nodes.iter().map(|p| 0.3 * p[1] * p[1] + 0.1 * p[0]).collect();
        let r = s.residual(&u);
        let h = 1e-6;
        for i in [0, 5, 11] {
            let mut up = u.clone();
            let mut um = u.clone();
            up[i] += h;
            um[i] -= h;
            let fd = (s.functional(&up) - s.functional(&um)) / (2.0 * h);
            assert!((fd - r[i]).abs() < 1e-7);
        }
    }

    #[test]
    fn shift_identity_in_u0() {
        let m = slab(2, 16);
        let a = solve(&m, 1.0, None);
        let b = solve(&m, U0, None);
        for (x, y) in a.u.iter().zip(&b.u) {
            assert!((x - U0.ln() - y).abs() <= 1e-9);
        }
    }

    #[test]
    fn cold_starts_agree() {
        let m = slab(2, 16);
        let n = m.num_nodes();
        let a = solve(&m, U0, Some(&vec![0.0; n]));
        let b = solve(&m, U0, Some(&vec![-5.0; n]));
        for (x, y) in a.u.iter().zip(&b.u) {
            assert!((x - y).abs() <= 1e-8);
        }
    }

    #[test]
    fn solution_minimizes_functional() {
        use rand::{Rng, SeedableRng};
        let m = slab(3, 12);
        let s = PbSolver::new(&m, U0, G).unwrap();
        let sol = s.solve(None, &NewtonOptions::default()).unwrap();
        let f0 = s.functional(&sol.u);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let v: Vec<f64> = sol.u.iter().map(|x| x + rng.gen_range(-0.1..0.1)).collect();
            assert!(s.functional(&v) > f0);
        }
    }

    #[test]
    fn slab_profile_matches_shooting() {
        let p = SlabProfile::new(U0, G, 1.0).unwrap();
        let (a, uw) = slab_shooting(U0, G, 1.0, 4000).unwrap();
        assert!((a - p.a).abs() < 1e-8);
        assert!((uw - p.eval(1.0)).abs() < 1e-8);
        assert!((2.0 * p.k * (p.k).tan() - G).abs() < 1e-10);
    }

    #[test]
    fn fem_approaches_slab_profile() {
        let p = SlabProfile::new(U0, G, 1.0).unwrap();
        let err = |ny: usize| {
            let m = slab(2, ny);
            let sol = solve(&m, U0, None);
            m.nodes.iter().zip(&sol.u).map(|(x, u)| (u - p.eval(x[1])).abs()).fold(0.0, f64::max)
        };
        let (e1, e2) = (err(20), err(40));
        assert!(e2 < e1 / 3.0, "{e1} {e2}");
    }

    #[test]
    fn transfer_without_resolve_breaks_gen() {
        let m = slab(2, 20);
        let s = PbSolver::new(&m, U0, G).unwrap();
        let sol = s.solve(None, &NewtonOptions::default()).unwrap();
        let m2 = slab(3, 17);
        let moved = Transfer::new(&m, &m2.nodes).apply(&sol.u);
        let s2 = PbSolver::new(&m2, U0, G).unwrap();
        assert!(s2.gen_residual(&moved) > 1e-6);
        let re = s2.solve(Some(&moved), &NewtonOptions::default()).unwrap();
        assert!(s2.gen_residual(&re.u) <= 1e-8);
    }

    #[test]
    fn secondary_fields_reference_values() {
        let params = PhysicalParams::default();
        let f = secondary_fields(&[0.0, 1.0], &params).unwrap();
        assert_eq!(f.c[0], params.c0);
        assert_eq!(f.p[0], params.p0);
        assert!((f.c[1] - params.c0 * std::f64::consts::E).abs() < 1e-9);
        // φ = RT/F gives c = c0 / e.
        let g = secondary_fields(&[-1.0], &params).unwrap();
        assert!((g.phi[0] - params.thermal_voltage()).abs() < 1e-15);
        assert!((g.c[0] - params.c0 / std::f64::consts::E).abs() < 1e-9);
        let rtc0 = params.r * params.t * params.c0;
        assert!((rtc0 - 1.4026e6).abs() < 1e2);
        assert!(secondary_fields(&[51.0], &params).is_err());
    }

    #[test]
    fn radial_oracle_values() {
        let params = PhysicalParams::default();
        let o = radial_oracle(1e-9, Some(0.6e-9), &params).unwrap();
        assert!((o.lambda_p - 2.7778).abs() < 1e-3);
        let o = radial_oracle(1e-9, Some(1e-9 / 2.78f64.sqrt()), &params).unwrap();
        assert!((o.phi_wall + 0.02596).abs() < 2e-5, "{}", o.phi_wall);
        let small = radial_oracle(1e-12, None, &params).unwrap();
        assert!(small.phi_wall.abs() < 1e-7);
        assert!(radial_oracle(3e-9, Some(1e-9), &params).is_err());
        let dl = debye_length(&params);
        assert!((1.0 / (dl * dl) * 1e-18 - params_u0(&params)).abs() < 1e-9);
    }

    fn params_u0(p: &PhysicalParams) -> f64 {
        p.c0 * p.f * p.f * 1e-18 / (p.r * p.t * p.eps())
    }
}
