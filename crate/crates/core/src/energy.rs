//! Free energy of a configuration, the shape gradient of the modified law
//! and a central finite-difference check of the two.
//!
//! Everything is dimensionless. Solid terms live on the reference solid,
//! fluid terms on the current fluid domain.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::elasticity::{DisplacementSolution, ElasticSolver};
use crate::interface::{lumped_lengths, nodal_normals, project_compatibility, InterfaceState};
use crate::mesh::{Arc, GammaIndex};
use crate::params::{Dimensionless, Law, Scales};
use crate::pb::PbSolver;
use crate::scalar::{self, Real, Vec2};

/// Largest GEN residual of a potential accepted by the energy.
pub const GEN_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnergyError {
    #[error("potential not converged: GEN residual {residual:e} exceeds {tol:e}")]
    Unconverged { residual: f64, tol: f64 },
    #[error("interface state has {got} nodes, expected {expected}")]
    Dimension { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyBreakdown<T> {
    /// Stored elastic energy minus the reference-pressure work, on S₀.
    pub mech_s: T,
    /// −∫_Ω p.
    pub mech_l: T,
    /// −∫ |∇u|²/(2u0) + (g/u0) ∫_Γ u.
    pub el: T,
    /// ∫ |∇u|²/(2u0) + ∫ eᵘ u; equal to `el` for a converged potential.
    pub el_alt: T,
    pub st: T,
    pub total: T,
}

impl<T: Real> EnergyBreakdown<T> {
    pub fn new(mech_s: T, mech_l: T, el: T, el_alt: T, st: T) -> Self {
        Self { mech_s, mech_l, el, el_alt, st, total: mech_s + mech_l + el + st }
    }

    /// |el − el_alt| relative to the size of the electric terms.
    pub fn el_discrepancy(&self) -> T {
        let scale = self.el.abs().max(self.el_alt.abs());
        if scale > T::zero() {
            (self.el - self.el_alt).abs() / scale
        } else {
            T::zero()
        }
    }

    /// Energies per unit depth [J/m].
    pub fn to_si(&self, scales: &Scales) -> EnergyBreakdown<f64> {
        let c = |v: T| scales.energy_to_si(v.f64());
        EnergyBreakdown {
            mech_s: c(self.mech_s),
            mech_l: c(self.mech_l),
            el: c(self.el),
            el_alt: c(self.el_alt),
            st: c(self.st),
            total: c(self.mech_s) + c(self.mech_l) + c(self.el) + c(self.st),
        }
    }
}

/// Fluid-side input of [`total_energy`]. Without a potential the uncharged
/// limit is used: c = 0 and p = p0.
#[derive(Debug, Clone, Copy)]
pub struct FluidTerms<'a, T> {
    pub area: T,
    pub gamma_length: T,
    pub potential: Option<(&'a PbSolver<T>, &'a [T])>,
}

pub fn total_energy<T: Real>(
    elastic: &ElasticSolver<T>,
    sol: &DisplacementSolution<T>,
    fluid: &FluidTerms<'_, T>,
    dl: &Dimensionless<T>,
) -> Result<EnergyBreakdown<T>, EnergyError> {
    let mech_s = elastic.mechanical_energy(sol);
    let st = dl.gamma * fluid.gamma_length;
    let Some((pb, u)) = fluid.potential else {
        return Ok(EnergyBreakdown::new(mech_s, -dl.p0 * fluid.area, T::zero(), T::zero(), st));
    };
    let gen = pb.gen_residual(u);
    if !(gen <= T::lit(GEN_TOL)) {
        return Err(EnergyError::Unconverged { residual: gen.f64(), tol: GEN_TOL });
    }
    let grad2 = pb.dirichlet_energy(u) / pb.u0;
    let mech_l = -(pb.exp_integral(u) - fluid.area + dl.p0 * fluid.area);
    let el = -grad2 + pb.g / pb.u0 * pb.gamma_integral(u);
    let el_alt = grad2 + pb.exp_u_integral(u);
    Ok(EnergyBreakdown::new(mech_s, mech_l, el, el_alt, st))
}

/// Nodal shape gradient G_i = −T_i − p*_i N_i + γ*_i m_i H_i ν_i, so that
/// E(λ + μ) − E(λ) ≈ Σ G_i·μ_i, and its density G_i / m_i.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeGradient<T> {
    pub nodal: Vec<Vec2<T>>,
    pub density: Vec<Vec2<T>>,
}

impl<T: Real> ShapeGradient<T> {
    /// ∫_Γ g·μ with the lumped (trapezoidal) pairing.
    pub fn apply(&self, mu: &[Vec2<T>]) -> T {
        self.nodal.iter().zip(mu).map(|(g, m)| scalar::dot(*g, *m)).sum()
    }

    /// (g·ν)ν per node.
    pub fn normal_density(&self, nu: &[Vec2<T>]) -> Vec<Vec2<T>> {
        self.density.iter().zip(nu).map(|(g, n)| scalar::scale(*n, scalar::dot(*g, *n))).collect()
    }
}

pub fn shape_gradient<T: Real>(state: &InterfaceState<T>) -> ShapeGradient<T> {
    let forces = law_forces(state, &state.p_star, &state.gamma_star);
    let nodal: Vec<Vec2<T>> = forces.iter().zip(&state.reaction).map(|(f, r)| scalar::sub(*f, *r)).collect();
    let density = nodal.iter().zip(&state.lengths).map(|(g, m)| scalar::scale(*g, T::one() / *m)).collect();
    ShapeGradient { nodal, density }
}

/// Fluid-side nodal forces γ m H ν − p N of an interface law; the
/// classical law uses p and the constant tension of `dl`.
pub fn interface_forces<T: Real>(state: &InterfaceState<T>, law: Law, dl: &Dimensionless<T>) -> Vec<Vec2<T>> {
    match law {
        Law::Classical => law_forces(state, &state.p, &vec![dl.gamma; state.p.len()]),
        Law::Modified => law_forces(state, &state.p_star, &state.gamma_star),
    }
}

fn law_forces<T: Real>(state: &InterfaceState<T>, p: &[T], gamma: &[T]) -> Vec<Vec2<T>> {
    (0..state.positions.len())
        .map(|i| {
            let tension = scalar::scale(state.nu[i], gamma[i] * state.lengths[i] * state.curvature[i]);
            scalar::sub(tension, scalar::scale(state.area_weights[i], p[i]))
        })
        .collect()
}

/// Random smooth admissible normal fields on Γ: per arc, a combination of
/// the first `modes` sines in arc length along the nodal normal, scaled to
/// unit max norm and projected for compatibility.
pub fn random_normal_directions(
    positions: &[Vec2<f64>],
    gamma: &GammaIndex,
    count: usize,
    modes: usize,
    seed: u64,
) -> Vec<Vec<Vec2<f64>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nu = nodal_normals(positions, &gamma.arcs);
    let s = arc_parameters(positions, &gamma.arcs);
    (0..count)
        .map(|_| {
            let mut mu = vec![[0.0; 2]; positions.len()];
            for (a, arc) in gamma.arcs.iter().enumerate() {
                let coef: Vec<f64> = (0..modes).map(|_| rng.gen_range(-1.0..1.0)).collect();
                for &k in &arc.nodes {
                    let t = s[k].1;
                    let amp: f64 = coef
                        .iter()
                        .enumerate()
                        .map(|(j, c)| c * ((j + 1) as f64 * std::f64::consts::PI * t).sin())
                        .sum();
                    if s[k].0 == a {
                        mu[k] = scalar::scale(nu[k], amp);
                    }
                }
            }
            let mu = project_compatibility(&mu, gamma, &nu);
            let max = mu.iter().fold(0.0f64, |m, v| m.max(scalar::norm(*v)));
            if max > 0.0 {
                mu.iter().map(|v| scalar::scale(*v, 1.0 / max)).collect()
            } else {
                mu
            }
        })
        .collect()
}

/// (arc, normalized arc length in [0, 1]) per node.
fn arc_parameters(pts: &[Vec2<f64>], arcs: &[Arc]) -> Vec<(usize, f64)> {
    let mut out = vec![(usize::MAX, 0.0); pts.len()];
    for (a, arc) in arcs.iter().enumerate() {
        let mut acc = vec![0.0];
        for w in arc.nodes.windows(2) {
            acc.push(acc.last().unwrap() + scalar::dist(pts[w[0]], pts[w[1]]));
        }
        if arc.closed {
            let n = arc.nodes.len();
            acc.push(acc.last().unwrap() + scalar::dist(pts[arc.nodes[n - 1]], pts[arc.nodes[0]]));
        }
        let total = *acc.last().unwrap();
        for (j, &k) in arc.nodes.iter().enumerate() {
            out[k] = (a, acc[j] / total);
        }
    }
    out
}

/// One central difference of the energy along a direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdRow {
    pub direction: usize,
    pub h: f64,
    pub fd: f64,
    pub analytic: f64,
    pub rel_err: f64,
    /// |(E(+h) − E(0)) + (E(−h) − E(0))| / |E(+h) − E(−h)|; O(h) when E is smooth.
    pub asymmetry: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FdReport {
    pub rows: Vec<FdRow>,
    /// Row with the smallest error among the selection steps, per direction.
    pub best: Vec<Option<FdRow>>,
    /// Observed order of the difference quotients per direction.
    pub slopes: Vec<Option<f64>>,
    /// Directions or steps where the energy could not be evaluated.
    pub skipped: Vec<(usize, f64, String)>,
}

impl FdReport {
    pub fn median_rel_err(&self) -> Option<f64> {
        let mut v: Vec<f64> = self.best.iter().flatten().map(|r| r.rel_err).collect();
        if v.is_empty() {
            return None;
        }
        v.sort_by(f64::total_cmp);
        let n = v.len();
        Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
    }

    /// Median of the observed orders.
    pub fn median_slope(&self) -> Option<f64> {
        let mut v: Vec<f64> = self.slopes.iter().flatten().copied().collect();
        if v.is_empty() {
            return None;
        }
        v.sort_by(f64::total_cmp);
        Some(v[v.len() / 2])
    }
}

/// Compares `analytic[d]` with (E(+h μ_d) − E(−h μ_d)) / 2h for every step.
/// `energy(d, t)` evaluates E(λ + t μ_d). The best error is taken over
/// `select` (a subset of `steps`); the order is read off the three largest
/// steps, which must shrink geometrically.
pub fn fd_gradient_check<E: std::fmt::Display>(
    mut energy: impl FnMut(usize, f64) -> Result<f64, E>,
    analytic: &[f64],
    steps: &[f64],
    select: &[f64],
) -> FdReport {
    let mut rows = Vec::new();
    let mut best = Vec::new();
    let mut slopes = Vec::new();
    let mut skipped = Vec::new();
    for (d, &a) in analytic.iter().enumerate() {
        let base = match energy(d, 0.0) {
            Ok(e) => e,
            Err(e) => {
                skipped.push((d, 0.0, e.to_string()));
                best.push(None);
                slopes.push(None);
                continue;
            }
        };
        let mut quotients = Vec::new();
        let mut chosen: Option<FdRow> = None;
        for &h in steps {
            let (ep, em) = match (energy(d, h), energy(d, -h)) {
                (Ok(p), Ok(m)) => (p, m),
                (Err(e), _) | (_, Err(e)) => {
                    skipped.push((d, h, e.to_string()));
                    continue;
                }
            };
            let fd = (ep - em) / (2.0 * h);
            let rel_err = if a != 0.0 { (fd - a).abs() / a.abs() } else { (fd - a).abs() };
            let asymmetry = if ep != em { ((ep - base) + (em - base)).abs() / (ep - em).abs() } else { 0.0 };
            let row = FdRow { direction: d, h, fd, analytic: a, rel_err, asymmetry };
            rows.push(row);
            quotients.push((h, fd));
            if select.iter().any(|s| (s - h).abs() <= 1e-12 * s.abs()) && chosen.map_or(true, |c| rel_err < c.rel_err) {
                chosen = Some(row);
            }
        }
        best.push(chosen);
        slopes.push(observed_order(&quotients));
    }
    FdReport { rows, best, slopes, skipped }
}

/// log(|q1 − q2| / |q2 − q3|) / log(h1/h2) from the first three quotients.
fn observed_order(q: &[(f64, f64)]) -> Option<f64> {
    if q.len() < 3 {
        return None;
    }
    let (h1, h2) = (q[0].0, q[1].0);
    let d1 = (q[0].1 - q[1].1).abs();
    let d2 = (q[1].1 - q[2].1).abs();
    if d1 == 0.0 || d2 == 0.0 {
        return None;
    }
    Some((d1 / d2).ln() / (h1 / h2).ln())
}

/// Lumped L² norm of an interface field.
pub fn interface_l2<T: Real>(positions: &[Vec2<T>], arcs: &[Arc], field: &[Vec2<T>]) -> T {
    let m = lumped_lengths(positions, arcs);
    m.iter().zip(field).map(|(w, v)| *w * scalar::dot(*v, *v)).sum::<T>().sqrt()
}
