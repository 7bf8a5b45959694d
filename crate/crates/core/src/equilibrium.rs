//! Outer loops for the interface displacement λ: the relaxed fixed point
//! λ ← (1 − ω)λ + ωB(λ) of an interface law, and energy descent along the
//! gradient.
//!
//! λ lives on the reference interface nodes for the whole run. The solid is
//! never remeshed. The fluid mesh follows Γ by harmonic extension of the
//! increments of λ and is rebuilt from its boundary when it degrades.

use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use thiserror::Error;

use crate::elasticity::{Configuration, DisplacementSolution, ElasticSolver, ElasticityError, Material};
use crate::energy::{
    fd_gradient_check, interface_forces, random_normal_directions, shape_gradient, total_energy, EnergyBreakdown,
    EnergyError, FdReport, FluidTerms, ShapeGradient,
};
use crate::fem::SolveError;
use crate::interface::{
    default_eps_s, fluid_motion_extension, lumped_lengths, mean_edge_length, nodal_normals, project_compatibility,
    HarmonicExtension, InterfaceState,
};
use crate::mesh::{
    build_reference_domain, gamma_self_intersection, remesh_fluid, triangulate, ChannelGeometry, GammaIndex, Mesh,
    MeshError, Region, Transfer, TriangulateOptions,
};
use crate::params::{Config, ConfigError, Dimensionless, Law, PhysicalParams, RunConfig, Scales, StopRule};
use crate::pb::{NewtonOptions, PbError, PbSolver};
use crate::scalar::{self, Vec2};

/// Remesh when the smallest fluid angle drops below this (degrees).
pub const REMESH_MIN_ANGLE_DEG: f64 = 10.0;
/// Halvings of the descent step before giving up.
pub const MAX_HALVINGS: usize = 40;

#[derive(Debug, Error)]
pub enum EquilibriumError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Elasticity(#[from] ElasticityError),
    #[error(transparent)]
    Potential(#[from] PbError),
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("{0}")]
    Evaluation(String),
    #[error("checkpoint {path}: {msg}")]
    Checkpoint { path: PathBuf, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Why a λ could not be turned into a state.
#[derive(Debug, Error)]
pub enum EvalError {
    #[error("pore closed: {0}")]
    Closed(String),
    #[error("fluid mesh inverted and remeshing is disabled")]
    Inverted,
    #[error(transparent)]
    Failed(#[from] EquilibriumError),
}

macro_rules! eval_from {
    ($($t:ty),*) => {$(
        impl From<$t> for EvalError {
            fn from(e: $t) -> Self {
                EvalError::Failed(e.into())
            }
        }
    )*};
}
eval_from!(ElasticityError, PbError, EnergyError, SolveError);

impl From<MeshError> for EvalError {
    fn from(e: MeshError) -> Self {
        match e {
            MeshError::InterfaceCollapse(msg) => EvalError::Closed(msg),
            other => EvalError::Failed(other.into()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Converged,
    PoreClosed,
    MaxIter,
    Diverged,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Converged => "CONVERGED",
            Status::PoreClosed => "PORE_CLOSED",
            Status::MaxIter => "MAX_ITER",
            Status::Diverged => "DIVERGED",
        }
    }

    pub fn exit_code(self) -> i32 {
        match self {
            Status::Converged => 0,
            Status::PoreClosed => 2,
            Status::MaxIter => 3,
            Status::Diverged => 4,
        }
    }
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Everything that stays fixed during a run.
#[derive(Debug, Clone)]
pub struct Model {
    pub params: PhysicalParams,
    pub run: RunConfig,
    pub scales: Scales,
    pub dl: Dimensionless<f64>,
    /// Groups used on the interface: g = 0 without electrostatics.
    pub dl_interface: Dimensionless<f64>,
    pub reference: Mesh<f64>,
    pub gamma: GammaIndex,
    pub elastic: ElasticSolver<f64>,
    pub fluid_reference: Mesh<f64>,
    pub fluid_gamma: GammaIndex,
    pub reference_positions: Vec<Vec2<f64>>,
    pub reference_normals: Vec<Vec2<f64>>,
    /// Bulk target edge length used when remeshing.
    pub h: f64,
    /// Mean reference interface edge length.
    pub h_gamma: f64,
    pub eps_s: f64,
    pub newton: NewtonOptions,
}

impl Model {
    /// Meshes the channel geometry of `config`.
    pub fn new(config: &Config) -> Result<Self, EquilibriumError> {
        config.run.validate()?;
        config.params.validate()?;
        let len = config.run.solver.length_scale;
        let g = &config.run.geometry;
        let cg = ChannelGeometry {
            d: g.d / len,
            l: g.l / len,
            s: g.s / len,
            thickness: g.thickness / len,
            fillet: g.fillet / len,
        };
        let h = g.h / len;
        let pslg = build_reference_domain(&cg, h / g.refine_interface)?;
        let mesh = triangulate(&pslg, &TriangulateOptions::new(h, g.refine_interface))?;
        Self::from_mesh(mesh, config, h)
    }

    /// Uses a given dimensionless reference mesh; `h` is the remeshing size.
    pub fn from_mesh(mesh: Mesh<f64>, config: &Config, h: f64) -> Result<Self, EquilibriumError> {
        let scales = config.scales();
        let dl: Dimensionless<f64> = config.dimensionless();
        if dl.electrostatics && !(dl.g > 0.0) {
            return Err(PbError::GenUnsatisfiable(dl.g).into());
        }
        let mut dl_interface = dl;
        if !dl.electrostatics {
            dl_interface.g = 0.0;
        }
        let gamma = GammaIndex::from_mesh(&mesh)?;
        let material = Material { lame: dl.lame, shear: dl.g_s, p_s0: dl.p_s0 };
        let elastic = ElasticSolver::new(&mesh, &gamma, material)?.with_compatibility()?;
        let fluid = mesh.submesh(Region::Fluid)?;
        let fluid_gamma = gamma
            .remap(|v| fluid.from_parent[v])
            .ok_or_else(|| EquilibriumError::Evaluation("interface node outside the fluid".into()))?;
        let reference_positions = gamma.positions(&mesh);
        let reference_normals = nodal_normals(&reference_positions, &gamma.arcs);
        let h_gamma = mean_edge_length(&reference_positions, &gamma.arcs);
        let len = config.run.solver.length_scale;
        let eps_s = config.run.solver.eps_s.map_or_else(|| default_eps_s(h_gamma), |e| e / (len * len));
        let newton = NewtonOptions {
            tol: config.run.solver.newton_tol,
            max_iter: config.run.solver.newton_max_iter,
            ..NewtonOptions::default()
        };
        Ok(Self {
            params: config.params.clone(),
            run: config.run.clone(),
            scales,
            dl,
            dl_interface,
            reference: mesh,
            gamma,
            elastic,
            fluid_reference: fluid.mesh,
            fluid_gamma,
            reference_positions,
            reference_normals,
            h,
            h_gamma,
            eps_s,
            newton,
        })
    }

    pub fn zero_lambda(&self) -> Vec<Vec2<f64>> {
        vec![[0.0; 2]; self.gamma.len()]
    }

    /// Admissible part of an interface field (reference normals).
    pub fn project(&self, field: &[Vec2<f64>]) -> Vec<Vec2<f64>> {
        let mut out = project_compatibility(field, &self.gamma, &self.reference_normals);
        for (k, v) in out.iter_mut().enumerate() {
            if self.elastic.is_clamped(k) {
                *v = [0.0; 2];
            }
        }
        out
    }

    pub fn fluid_domain(&self) -> Result<FluidDomain, EquilibriumError> {
        FluidDomain::new(self.fluid_reference.clone(), self.fluid_gamma.clone(), self.zero_lambda())
    }

    /// States at `lambda`. A new fluid domain is returned when the deformed
    /// mesh had to be rebuilt.
    pub fn evaluate(
        &self,
        domain: &FluidDomain,
        lambda: &[Vec2<f64>],
        guess: Option<&[f64]>,
        allow_remesh: bool,
    ) -> Result<(State, Option<FluidDomain>), EvalError> {
        let displacement = self.elastic.solve_displacement(lambda)?;
        let mesh = domain.deformed(lambda);
        if let Some(msg) = gamma_self_intersection(&mesh) {
            return Err(EvalError::Closed(msg));
        }
        if mesh.quality().inverted_count > 0 {
            if !allow_remesh {
                return Err(EvalError::Inverted);
            }
            let (next, u) = domain.remesh(&mesh, lambda, guess, self.h)?;
            let state = self.state_on(next.base.clone(), next.gamma.clone(), lambda, displacement, u.as_deref())?;
            return Ok((state, Some(next)));
        }
        Ok((self.state_on(mesh, domain.gamma.clone(), lambda, displacement, guess)?, None))
    }

    fn state_on(
        &self,
        fluid: Mesh<f64>,
        fluid_gamma: GammaIndex,
        lambda: &[Vec2<f64>],
        displacement: DisplacementSolution<f64>,
        guess: Option<&[f64]>,
    ) -> Result<State, EvalError> {
        let area = fluid.area(None);
        if !(area > 0.0) {
            return Err(EvalError::Closed(format!("fluid area {area:e}")));
        }
        let positions = fluid_gamma.positions(&fluid);
        let gamma_length: f64 = lumped_lengths(&positions, &self.gamma.arcs).iter().sum();
        let dl = &self.dl;
        let (u, energy, gen_residual, newton_iterations) = if dl.electrostatics {
            let pb = PbSolver::new(&fluid, dl.u0, dl.g)?;
            let sol = match pb.solve(guess, &self.newton) {
                Ok(s) => s,
                Err(e) if guess.is_some() => {
                    log::debug!("warm Newton start failed ({e}); restarting from the neutral state");
                    pb.solve(None, &self.newton)?
                }
                Err(e) => return Err(e.into()),
            };
            let terms = FluidTerms { area, gamma_length, potential: Some((&pb, &sol.u)) };
            let energy = total_energy(&self.elastic, &displacement, &terms, dl)?;
            let gen = pb.gen_residual(&sol.u);
            let its = sol.iterations();
            (Some(sol.u), energy, gen, its)
        } else {
            let terms = FluidTerms { area, gamma_length, potential: None };
            (None, total_energy(&self.elastic, &displacement, &terms, dl)?, 0.0, 0)
        };
        let trace: Vec<f64> = match &u {
            Some(u) => fluid_gamma.nodes.iter().map(|&v| u[v]).collect(),
            None => vec![0.0; self.gamma.len()],
        };
        let p: Vec<f64> = match &u {
            Some(_) => trace.iter().map(|v| v.exp() - 1.0 + dl.p0).collect(),
            None => vec![dl.p0; self.gamma.len()],
        };
        let traction = self.elastic.traction(&displacement, Configuration::Current).unwrap_or_default();
        let interface = InterfaceState::new(
            positions,
            &self.gamma.arcs,
            trace,
            p,
            self.elastic.reaction(&displacement),
            &traction,
            &self.dl_interface,
            self.eps_s,
        );
        let gradient = shape_gradient(&interface);
        Ok(State {
            lambda: lambda.to_vec(),
            displacement,
            fluid,
            fluid_gamma,
            u,
            interface,
            energy,
            gradient,
            gen_residual,
            newton_iterations,
            area,
        })
    }

    /// B(λ): the projected interface displacement produced by the fluid
    /// forces of `law` at the current state.
    pub fn fixed_point_map(&self, state: &State, law: Law) -> Result<Vec<Vec2<f64>>, ElasticityError> {
        let forces = interface_forces(&state.interface, law, &self.dl_interface);
        Ok(self.project(&self.elastic.dtn_inverse(&forces)?))
    }

    /// Projected descent direction: the admissible part of the full
    /// gradient density. The solid energy depends on the tangential part of
    /// λ as well, so dropping it would stall on a sheared interface.
    pub fn descent_direction(&self, state: &State) -> Vec<Vec2<f64>> {
        self.project(&state.gradient.density)
    }

    fn needs_remesh(&self, domain: &FluidDomain, state: &State) -> bool {
        if !self.run.solver.remesh {
            return false;
        }
        let q = state.fluid.quality();
        q.inverted_count > 0
            || q.min_angle.to_degrees() < REMESH_MIN_ANGLE_DEG
            || sup_distance(&state.lambda, &domain.base_lambda) > 0.5 * self.h
    }
}

/// Fluid mesh at the last rebuild plus the cached motion operator.
#[derive(Debug, Clone)]
pub struct FluidDomain {
    pub base: Mesh<f64>,
    /// Interface positions as nodes of `base`.
    pub gamma: GammaIndex,
    pub base_lambda: Vec<Vec2<f64>>,
    extension: HarmonicExtension<f64>,
    pub rebuilds: usize,
}

impl FluidDomain {
    pub fn new(base: Mesh<f64>, gamma: GammaIndex, base_lambda: Vec<Vec2<f64>>) -> Result<Self, EquilibriumError> {
        let extension = fluid_motion_extension(&base, &gamma)?;
        Ok(Self { base, gamma, base_lambda, extension, rebuilds: 0 })
    }

    /// Base mesh moved so that Γ sits at reference + `lambda`.
    pub fn deformed(&self, lambda: &[Vec2<f64>]) -> Mesh<f64> {
        let mut data = vec![[0.0; 2]; self.base.num_nodes()];
        for (k, &v) in self.gamma.nodes.iter().enumerate() {
            data[v] = scalar::sub(lambda[k], self.base_lambda[k]);
        }
        let mut mesh = self.base.deform(&self.extension.extend_vec(&data));
        // pin Γ exactly
        for (k, &v) in self.gamma.nodes.iter().enumerate() {
            mesh.nodes[v] = scalar::add(self.base.nodes[v], data[v]);
            let _ = k;
        }
        mesh
    }

    /// Rebuilds the fluid mesh inside the boundary of `current`, carrying a
    /// nodal field of the base topology along.
    pub fn remesh(
        &self,
        current: &Mesh<f64>,
        lambda: &[Vec2<f64>],
        field: Option<&[f64]>,
        h: f64,
    ) -> Result<(FluidDomain, Option<Vec<f64>>), EvalError> {
        let r = remesh_fluid(current, h)?;
        let gamma = self
            .gamma
            .remap(|v| r.boundary_map.get(&v).copied())
            .ok_or_else(|| EquilibriumError::Evaluation("interface node lost while remeshing".into()))?;
        let moved = field.map(|f| {
            if current.quality().inverted_count == 0 {
                r.transfer.apply(f)
            } else {
                Transfer::new(&self.base, &r.mesh.nodes).apply(f)
            }
        });
        let mut next = FluidDomain::new(r.mesh, gamma, lambda.to_vec()).map_err(EvalError::Failed)?;
        next.rebuilds = self.rebuilds + 1;
        Ok((next, moved))
    }
}

/// Solid displacement, potential, interface quantities and energy at one λ.
#[derive(Debug, Clone)]
pub struct State {
    pub lambda: Vec<Vec2<f64>>,
    pub displacement: DisplacementSolution<f64>,
    pub fluid: Mesh<f64>,
    pub fluid_gamma: GammaIndex,
    /// Potential on `fluid`; `None` without electrostatics.
    pub u: Option<Vec<f64>>,
    pub interface: InterfaceState<f64>,
    pub energy: EnergyBreakdown<f64>,
    pub gradient: ShapeGradient<f64>,
    pub gen_residual: f64,
    pub newton_iterations: usize,
    pub area: f64,
}

impl State {
    pub fn sup_lambda(&self) -> f64 {
        self.lambda.iter().fold(0.0, |m, v| m.max(scalar::norm(*v)))
    }
}

/// One outer iteration. Lengths, areas and energies are SI; the stopping
/// metrics are dimensionless.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub n: usize,
    /// sup |λ_n| [m].
    pub sup_lambda: f64,
    /// ‖λ − B(λ)‖∞ for the fixed point, max |g| h_Γ over admissible g for descent.
    pub native: f64,
    /// |sup|λ_n| − sup|λ_{n−1}|| (dimensionless); infinite at n = 0.
    pub sup_change: f64,
    /// [J/m]
    pub energy: EnergyBreakdown<f64>,
    pub gen_residual: f64,
    /// max |g| over the interface [N/m²].
    pub grad_inf: f64,
    /// [m²]
    pub area: f64,
    /// ω for the fixed point, the accepted k for descent.
    pub step: f64,
    pub remeshed: bool,
    pub newton_iterations: usize,
    /// Wall-clock seconds since the start of the run (not logged).
    pub elapsed: f64,
}

#[derive(Debug, Clone)]
pub struct EquilibriumResult {
    pub status: Status,
    pub message: String,
    /// Last valid state.
    pub state: State,
    pub history: Vec<IterationRecord>,
    pub rebuilds: usize,
}

impl EquilibriumResult {
    pub fn iterations(&self) -> usize {
        self.history.last().map_or(0, |r| r.n)
    }
}

fn sup_distance(a: &[Vec2<f64>], b: &[Vec2<f64>]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max(scalar::dist(*x, *y)))
}

fn sup_norm(a: &[Vec2<f64>]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(scalar::norm(*v)))
}

/// Shared bookkeeping of the two drivers.
struct Run<'a> {
    model: &'a Model,
    domain: FluidDomain,
    state: State,
    history: Vec<IterationRecord>,
    clock: Instant,
    checkpoints: Option<PathBuf>,
}

impl<'a> Run<'a> {
    fn start(model: &'a Model, start: Option<&[Vec2<f64>]>) -> Result<Self, EquilibriumError> {
        let lambda = match start {
            Some(l) if l.len() != model.gamma.len() => {
                return Err(EquilibriumError::Evaluation(format!(
                    "start λ has {} entries, expected {}",
                    l.len(),
                    model.gamma.len()
                )))
            }
            Some(l) => model.project(l),
            None => model.zero_lambda(),
        };
        let mut domain = model.fluid_domain()?;
        let (state, next) = model
            .evaluate(&domain, &lambda, None, model.run.solver.remesh)
            .map_err(|e| EquilibriumError::Evaluation(format!("initial state: {e}")))?;
        if let Some(d) = next {
            domain = d;
        }
        let checkpoints = (model.run.solver.checkpoint_every > 0).then(|| model.run.output_dir.join("checkpoints"));
        Ok(Self { model, domain, state, history: Vec::new(), clock: Instant::now(), checkpoints })
    }

    fn record(&mut self, n: usize, native: f64, sup_change: f64, step: f64, remeshed: bool) {
        let s = &self.state;
        let sc = &self.model.scales;
        let grad_inf = s.gradient.density.iter().fold(0.0f64, |m, g| m.max(scalar::norm(*g)));
        self.history.push(IterationRecord {
            n,
            sup_lambda: sc.length_to_si(s.sup_lambda()),
            native,
            sup_change,
            energy: s.energy.to_si(sc),
            gen_residual: s.gen_residual,
            grad_inf: sc.pressure_to_si(grad_inf),
            area: s.area * sc.length * sc.length,
            step,
            remeshed,
            newton_iterations: s.newton_iterations,
            elapsed: self.clock.elapsed().as_secs_f64(),
        });
        log::info!(
            "n={n} native={native:.3e} sup|λ|={:.4e} E={:.6e} area={:.6e}",
            s.sup_lambda(),
            s.energy.total,
            s.area
        );
        if let Some(dir) = &self.checkpoints {
            let every = self.model.run.solver.checkpoint_every;
            if n % every == 0 {
                if let Err(e) = write_checkpoint(dir, n, self.model, s) {
                    log::warn!("checkpoint {n} not written: {e}");
                }
            }
        }
    }

    /// Rebuilds the fluid mesh after an accepted step if it has degraded.
    fn maintain(&mut self) -> Result<bool, EvalError> {
        if !self.model.needs_remesh(&self.domain, &self.state) {
            return Ok(false);
        }
        let (next, u) =
            self.domain.remesh(&self.state.fluid, &self.state.lambda, self.state.u.as_deref(), self.model.h)?;
        let (state, _) = self.model.evaluate(&next, &self.state.lambda, u.as_deref(), false)?;
        self.domain = next;
        self.state = state;
        Ok(true)
    }

    fn finish(self, status: Status, message: impl Into<String>) -> EquilibriumResult {
        EquilibriumResult {
            status,
            message: message.into(),
            state: self.state,
            history: self.history,
            rebuilds: self.domain.rebuilds,
        }
    }
}

fn failure_status(e: &EvalError) -> Status {
    match e {
        EvalError::Closed(_) => Status::PoreClosed,
        _ => Status::Diverged,
    }
}

/// Relaxed fixed point λ ← (1 − ω)λ + ωB(λ) for `law`.
pub fn run_fixed_point(
    model: &Model,
    law: Law,
    start: Option<&[Vec2<f64>]>,
) -> Result<EquilibriumResult, EquilibriumError> {
    let cfg = &model.run.solver;
    let omega = cfg.omega;
    let mut run = Run::start(model, start)?;
    let mut prev_sup = f64::NAN;
    let mut remeshed = false;
    for n in 0.. {
        let b = match model.fixed_point_map(&run.state, law) {
            Ok(b) => b,
            Err(e) => return Ok(run.finish(Status::Diverged, e.to_string())),
        };
        let native = sup_distance(&run.state.lambda, &b);
        let sup = run.state.sup_lambda();
        let sup_change = if n == 0 { f64::INFINITY } else { (sup - prev_sup).abs() };
        prev_sup = sup;
        run.record(n, native, sup_change, omega, remeshed);
        let converged = match cfg.stop {
            StopRule::Native => native <= cfg.err,
            StopRule::SupChange => sup_change <= cfg.sup_tol,
        };
        if converged {
            return Ok(run.finish(Status::Converged, format!("stopping metric met after {n} iterations")));
        }
        if !native.is_finite() {
            return Ok(run.finish(Status::Diverged, "non-finite fixed-point residual"));
        }
        if n >= cfg.max_iter {
            return Ok(run.finish(Status::MaxIter, format!("{} iterations", cfg.max_iter)));
        }
        let next: Vec<Vec2<f64>> = run
            .state
            .lambda
            .iter()
            .zip(&b)
            .map(|(l, b)| scalar::add(scalar::scale(*l, 1.0 - omega), scalar::scale(*b, omega)))
            .collect();
        let guess = run.state.u.clone();
        match model.evaluate(&run.domain, &next, guess.as_deref(), cfg.remesh) {
            Ok((state, domain)) => {
                remeshed = domain.is_some();
                if let Some(d) = domain {
                    run.domain = d;
                }
                run.state = state;
            }
            Err(e) => return Ok(run.finish(failure_status(&e), e.to_string())),
        }
        match run.maintain() {
            Ok(r) => remeshed |= r,
            Err(e) => return Ok(run.finish(failure_status(&e), e.to_string())),
        }
    }
    unreachable!()
}

/// Descent λ ← λ − k g with the step halved whenever the energy would
/// increase.
pub fn run_variational(model: &Model, start: Option<&[Vec2<f64>]>) -> Result<EquilibriumResult, EquilibriumError> {
    let cfg = &model.run.solver;
    let mut k = cfg.k;
    let k_min = cfg.k * 0.5f64.powi(MAX_HALVINGS as i32);
    let mut run = Run::start(model, start)?;
    let mut prev_sup = f64::NAN;
    let mut remeshed = false;
    for n in 0.. {
        let dir = model.descent_direction(&run.state);
        let native = sup_norm(&dir) * model.h_gamma;
        let sup = run.state.sup_lambda();
        let sup_change = if n == 0 { f64::INFINITY } else { (sup - prev_sup).abs() };
        prev_sup = sup;
        run.record(n, native, sup_change, k, remeshed);
        let converged = match cfg.stop {
            StopRule::Native => native <= cfg.err,
            StopRule::SupChange => sup_change <= cfg.sup_tol,
        };
        if converged {
            return Ok(run.finish(Status::Converged, format!("stopping metric met after {n} iterations")));
        }
        if !native.is_finite() {
            return Ok(run.finish(Status::Diverged, "non-finite shape gradient"));
        }
        if n >= cfg.max_iter {
            return Ok(run.finish(Status::MaxIter, format!("{} iterations", cfg.max_iter)));
        }
        let e0 = run.state.energy.total;
        let guess = run.state.u.clone();
        let mut last_failure: Option<EvalError> = None;
        loop {
            if k < k_min {
                let (status, msg) = match last_failure {
                    Some(e @ EvalError::Closed(_)) => (Status::PoreClosed, e.to_string()),
                    Some(e) => (Status::Diverged, format!("no acceptable step: {e}")),
                    None => (Status::Diverged, format!("no energy decrease down to k = {k:e}")),
                };
                return Ok(run.finish(status, msg));
            }
            let trial: Vec<Vec2<f64>> =
                run.state.lambda.iter().zip(&dir).map(|(l, d)| scalar::sub(*l, scalar::scale(*d, k))).collect();
            match model.evaluate(&run.domain, &model.project(&trial), guess.as_deref(), cfg.remesh) {
                Ok((state, domain)) if state.energy.total <= e0 => {
                    remeshed = domain.is_some();
                    if let Some(d) = domain {
                        run.domain = d;
                    }
                    run.state = state;
                    break;
                }
                Ok(_) => last_failure = None,
                Err(e) => last_failure = Some(e),
            }
            k *= 0.5;
        }
        match run.maintain() {
            Ok(r) => remeshed |= r,
            Err(e) => return Ok(run.finish(failure_status(&e), e.to_string())),
        }
    }
    unreachable!()
}

/// Symmetric Hausdorff distance between two interfaces with the same arcs.
pub fn hausdorff(a: &[Vec2<f64>], b: &[Vec2<f64>], gamma: &GammaIndex) -> f64 {
    let one_way = |p: &[Vec2<f64>], q: &[Vec2<f64>]| {
        let edges = gamma.edges();
        p.iter().fold(0.0f64, |m, x| {
            let d = edges
                .iter()
                .map(|&[i, j]| point_segment_distance(*x, q[i], q[j]))
                .fold(f64::INFINITY, f64::min);
            m.max(d)
        })
    };
    one_way(a, b).max(one_way(b, a))
}

fn point_segment_distance(p: Vec2<f64>, a: Vec2<f64>, b: Vec2<f64>) -> f64 {
    let d = scalar::sub(b, a);
    let len2 = scalar::dot(d, d);
    let t = if len2 > 0.0 { (scalar::dot(scalar::sub(p, a), d) / len2).clamp(0.0, 1.0) } else { 0.0 };
    scalar::dist(p, scalar::add(a, scalar::scale(d, t)))
}

/// Lumped L² distance of two interface displacements on the reference Γ.
pub fn l2_distance(model: &Model, a: &[Vec2<f64>], b: &[Vec2<f64>]) -> f64 {
    let m = lumped_lengths(&model.reference_positions, &model.gamma.arcs);
    m.iter().zip(a.iter().zip(b)).map(|(w, (x, y))| w * scalar::dist(*x, *y).powi(2)).sum::<f64>().sqrt()
}

/// Results of the classical fixed point and of the descent on one model.
#[derive(Debug, Clone)]
pub struct LawComparison {
    pub classical: EquilibriumResult,
    pub modified: EquilibriumResult,
    /// [m]
    pub hausdorff: f64,
    /// [m^(3/2)]
    pub l2: f64,
}

pub fn compare_laws(model: &Model) -> Result<LawComparison, EquilibriumError> {
    let classical = run_fixed_point(model, Law::Classical, None)?;
    let modified = run_variational(model, None)?;
    let h = hausdorff(&classical.state.interface.positions, &modified.state.interface.positions, &model.gamma);
    let l2 = l2_distance(model, &classical.state.lambda, &modified.state.lambda);
    let len = model.scales.length;
    Ok(LawComparison { classical, modified, hausdorff: h * len, l2: l2 * len.powf(1.5) })
}

/// FD check of the shape gradient at `lambda` along `count` random smooth
/// normal directions. The fluid mesh is only moved, never rebuilt.
pub fn gradient_check(
    model: &Model,
    lambda: Option<&[Vec2<f64>]>,
    count: usize,
    seed: u64,
) -> Result<(FdReport, Vec<Vec<Vec2<f64>>>), EquilibriumError> {
    let base_lambda = lambda.map_or_else(|| model.zero_lambda(), |l| model.project(l));
    let domain = model.fluid_domain()?;
    let (base, _) = model
        .evaluate(&domain, &base_lambda, None, false)
        .map_err(|e| EquilibriumError::Evaluation(format!("base state: {e}")))?;
    let pts: Vec<Vec2<f64>> =
        model.reference_positions.iter().zip(&base_lambda).map(|(x, l)| scalar::add(*x, *l)).collect();
    let dirs = random_normal_directions(&pts, &model.gamma, count, 3, seed);
    let dirs: Vec<Vec<Vec2<f64>>> = dirs.iter().map(|d| model.project(d)).collect();
    let analytic: Vec<f64> = dirs.iter().map(|mu| base.gradient.apply(mu)).collect();
    let hg = model.h_gamma;
    let steps: Vec<f64> = [1.0, 1e-1, 1e-2, 1e-3, 1e-4].iter().map(|f| f * hg).collect();
    let select: Vec<f64> = steps[2..].to_vec();
    let guess = base.u.clone();
    let report = fd_gradient_check(
        |d, t| {
            let l: Vec<Vec2<f64>> =
                base_lambda.iter().zip(&dirs[d]).map(|(l, m)| scalar::add(*l, scalar::scale(*m, t))).collect();
            model.evaluate(&domain, &l, guess.as_deref(), false).map(|(s, _)| s.energy.total)
        },
        &analytic,
        &steps,
        &select,
    );
    Ok((report, dirs))
}

/// Writes λ (dimensionless, per reference interface node) and the current
/// fluid mesh.
pub fn write_checkpoint(dir: &Path, n: usize, model: &Model, state: &State) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    write_lambda(&dir.join(format!("lambda_{n:05}.csv")), model, &state.lambda)?;
    let f = std::fs::File::create(dir.join(format!("fluid_{n:05}.mesh")))?;
    crate::mesh::write_text(&state.fluid, std::io::BufWriter::new(f))
}

pub fn write_lambda(path: &Path, model: &Model, lambda: &[Vec2<f64>]) -> std::io::Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "position,x0 [L*],y0 [L*],lambda_x [L*],lambda_y [L*]")?;
    for (k, (x, l)) in model.reference_positions.iter().zip(lambda).enumerate() {
        writeln!(w, "{k},{:.17e},{:.17e},{:.17e},{:.17e}", x[0], x[1], l[0], l[1])?;
    }
    w.flush()
}

/// Reads a λ file written by [`write_lambda`].
pub fn read_lambda(path: &Path, expected: usize) -> Result<Vec<Vec2<f64>>, EquilibriumError> {
    let bad = |msg: String| EquilibriumError::Checkpoint { path: path.to_path_buf(), msg };
    let f = std::fs::File::open(path).map_err(|e| bad(e.to_string()))?;
    let mut out = Vec::new();
    for (i, line) in std::io::BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| bad(e.to_string()))?;
        if i == 0 || line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 5 {
            return Err(bad(format!("line {}: expected 5 columns", i + 1)));
        }
        let num = |s: &str| s.trim().parse::<f64>().map_err(|e| bad(format!("line {}: {e}", i + 1)));
        out.push([num(cols[3])?, num(cols[4])?]);
    }
    if out.len() != expected {
        return Err(bad(format!("{} interface nodes, expected {expected}", out.len())));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{Algorithm, Geometry};

    /// Short, coarse channel pair.
    pub(crate) fn small_config(electrostatics: bool) -> Config {
        let mut run = RunConfig::default();
        run.geometry = Geometry {
            d: 2e-9,
            l: 3e-9,
            s: 0.5e-9,
            thickness: 2e-9,
            fillet: 0.0,
            h: 0.5e-9,
            refine_interface: 2.0,
        };
        run.electrostatics = electrostatics;
        run.solver.algorithm = Algorithm::FixedPoint;
        Config { run, params: PhysicalParams::default() }
    }

    #[test]
    fn zero_lambda_state_is_the_reference() {
        let model = Model::new(&small_config(true)).unwrap();
        let d = model.fluid_domain().unwrap();
        let (s, next) = model.evaluate(&d, &model.zero_lambda(), None, false).unwrap();
        assert!(next.is_none());
        assert!(s.gen_residual <= 1e-8);
        assert!((s.area - model.fluid_reference.area(None)).abs() < 1e-12);
        assert!(s.energy.el_discrepancy() <= 1e-8, "{}", s.energy.el_discrepancy());
        assert_eq!(s.energy.mech_s, 0.0);
    }

    #[test]
    fn lambda_round_trip_through_csv() {
        let model = Model::new(&small_config(false)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let lambda: Vec<Vec2<f64>> = (0..model.gamma.len()).map(|k| [k as f64 * 1e-3, -(k as f64) * 2e-3]).collect();
        let p = dir.path().join("l.csv");
        write_lambda(&p, &model, &lambda).unwrap();
        assert_eq!(read_lambda(&p, lambda.len()).unwrap(), lambda);
        assert!(read_lambda(&p, lambda.len() + 1).is_err());
    }

    #[test]
    fn hausdorff_of_a_shift() {
        let model = Model::new(&small_config(false)).unwrap();
        let a = model.reference_positions.clone();
        let b: Vec<Vec2<f64>> = a.iter().map(|p| [p[0], p[1] + 0.01]).collect();
        let h = hausdorff(&a, &b, &model.gamma);
        assert!(h <= 0.01 + 1e-12 && h > 0.0);
        assert_eq!(hausdorff(&a, &a, &model.gamma), 0.0);
    }

    #[test]
    fn fixed_point_restarted_at_its_limit_stops_at_once() {
        let mut config = small_config(false);
        config.run.solver.err = 1e-6;
        config.run.solver.max_iter = 200;
        let model = Model::new(&config).unwrap();
        let first = run_fixed_point(&model, Law::Classical, None).unwrap();
        assert_eq!(first.status, Status::Converged, "{}", first.message);
        let again = run_fixed_point(&model, Law::Classical, Some(&first.state.lambda)).unwrap();
        assert_eq!(again.status, Status::Converged);
        assert!(again.iterations() <= 2);
    }

    #[test]
    fn runs_are_deterministic() {
        let mut config = small_config(false);
        config.run.solver.max_iter = 5;
        let model = Model::new(&config).unwrap();
        let strip = |r: &EquilibriumResult| {
            r.history.iter().map(|h| IterationRecord { elapsed: 0.0, ..h.clone() }).collect::<Vec<_>>()
        };
        let a = run_fixed_point(&model, Law::Classical, None).unwrap();
        let b = run_fixed_point(&model, Law::Classical, None).unwrap();
        assert_eq!(strip(&a), strip(&b));
    }

    #[test]
    fn projection_keeps_lambda_admissible_during_runs() {
        let mut config = small_config(false);
        config.run.solver.max_iter = 4;
        let model = Model::new(&config).unwrap();
        let r = run_fixed_point(&model, Law::Classical, None).unwrap();
        assert_eq!(model.project(&r.state.lambda), r.state.lambda);
        for e in model.gamma.endpoints() {
            assert_eq!(r.state.lambda[e], [0.0, 0.0]);
        }
    }
}
