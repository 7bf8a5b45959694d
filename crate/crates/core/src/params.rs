//! Physical constants, non-dimensional scaling and run configuration.
//!
//! Configuration files are flat INI documents with the sections `[geometry]`,
//! `[physics]`, `[solver]` and `[output]`. Every physical field that is not
//! given falls back to the reference parameter set returned by
//! [`PhysicalParams::default`].

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ini::Ini;
use thiserror::Error;

use crate::scalar::Real;

/// 1 bar in N/m².
pub const BAR: f64 = 1.0e5;

pub fn bar_to_pa(bar: f64) -> f64 {
    bar * BAR
}

pub fn pa_to_bar(pa: f64) -> f64 {
    pa / BAR
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("parse error at line {line}, column {col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },
    #[error("[{section}] {key}: cannot parse {value:?} ({reason})")]
    BadValue {
        section: String,
        key: String,
        value: String,
        reason: String,
    },
    #[error("unknown key [{section}] {key}")]
    UnknownKey { section: String, key: String },
    #[error("invariant violated: {0}")]
    Invariant(String),
}

/// Dimensional physical parameters in SI units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalParams {
    /// Temperature [K].
    pub t: f64,
    /// Surface tension [N/m].
    pub gamma: f64,
    /// Bulk modulus [N/m²].
    pub k_s: f64,
    /// Shear modulus [N/m²].
    pub g_s: f64,
    /// Relative permittivity [1].
    pub eps_r: f64,
    /// Magnitude of the wall surface charge density [C/m²].
    pub sigma_c: f64,
    /// Solid reference pressure [N/m²].
    pub p_s0: f64,
    /// Reference liquid pressure [N/m²].
    pub p0: f64,
    /// Reference concentration [mol/m³].
    pub c0: f64,
    /// Faraday constant [C/mol].
    pub f: f64,
    /// Gas constant [J/(mol K)].
    pub r: f64,
    /// Vacuum permittivity [F/m].
    pub eps0: f64,
}

impl Default for PhysicalParams {
    fn default() -> Self {
        Self {
            t: 353.0,
            gamma: 6.5e-2,
            k_s: 5.09e9,
            g_s: 9.22e7,
            eps_r: 80.0,
            sigma_c: 0.16022,
            p_s0: -6.5e7,
            p0: 1.4e6,
            c0: 4.7790e2,
            f: 96485.0,
            r: 8.314,
            eps0: 8.8542e-12,
        }
    }
}

impl PhysicalParams {
    /// Electric permittivity ε = ε0 ε_r.
    pub fn eps(&self) -> f64 {
        self.eps0 * self.eps_r
    }

    /// First Lamé coefficient k_S - 2 G_S / 3.
    pub fn lame(&self) -> f64 {
        self.k_s - 2.0 / 3.0 * self.g_s
    }

    /// Thermal voltage RT/F [V].
    pub fn thermal_voltage(&self) -> f64 {
        self.r * self.t / self.f
    }

    /// Debye length sqrt(ε R T / (F² c0)) [m].
    pub fn debye_length(&self) -> f64 {
        (self.eps() * self.r * self.t / (self.f * self.f * self.c0)).sqrt()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let check = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(ConfigError::Invariant(what.to_string()))
            }
        };
        let all = [
            self.t,
            self.gamma,
            self.k_s,
            self.g_s,
            self.eps_r,
            self.sigma_c,
            self.p_s0,
            self.p0,
            self.c0,
            self.f,
            self.r,
            self.eps0,
        ];
        check(all.iter().all(|v| v.is_finite()), "all parameters finite")?;
        check(self.k_s > 0.0, "k_S > 0")?;
        check(self.g_s > 0.0, "G_S > 0")?;
        check(self.lame() >= 0.0, "k_S − (2/3)G_S ≥ 0")?;
        check(self.sigma_c >= 0.0, "sigma_c ≥ 0")?;
        check(self.eps() > 0.0, "eps0·eps_r > 0")?;
        check(self.t > 0.0, "T > 0")?;
        check(self.c0 > 0.0, "c0 > 0")?;
        check(self.f > 0.0 && self.r > 0.0, "F > 0 and R > 0")?;
        check(self.gamma >= 0.0, "gamma ≥ 0")
    }
}

/// Characteristic scales used to make the equations dimensionless.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scales {
    /// Length scale [m].
    pub length: f64,
    /// Potential scale RT/F [V].
    pub potential: f64,
    /// Concentration scale c0 [mol/m³].
    pub concentration: f64,
    /// Pressure scale R T c0 [N/m²].
    pub pressure: f64,
    /// Energy scale pressure · length^dim (per unit depth in 2D).
    pub energy: f64,
    pub dim: u32,
}

impl Scales {
    pub fn new(params: &PhysicalParams, length: f64, dim: u32) -> Self {
        let pressure = params.r * params.t * params.c0;
        Self {
            length,
            potential: params.thermal_voltage(),
            concentration: params.c0,
            pressure,
            energy: pressure * length.powi(dim as i32),
            dim,
        }
    }

    pub fn identity(dim: u32) -> Self {
        Self {
            length: 1.0,
            potential: 1.0,
            concentration: 1.0,
            pressure: 1.0,
            energy: 1.0,
            dim,
        }
    }

    pub fn length_to_si(&self, x: f64) -> f64 {
        x * self.length
    }

    pub fn length_from_si(&self, x: f64) -> f64 {
        x / self.length
    }

    pub fn pressure_to_si(&self, p: f64) -> f64 {
        p * self.pressure
    }

    pub fn pressure_from_si(&self, p: f64) -> f64 {
        p / self.pressure
    }

    pub fn energy_to_si(&self, e: f64) -> f64 {
        e * self.energy
    }

    /// Tension (force per length) scale: pressure · length.
    pub fn tension(&self) -> f64 {
        self.pressure * self.length
    }

    pub fn curvature_to_si(&self, h: f64) -> f64 {
        h / self.length
    }
}

/// Parameter groups consumed by the dimensionless solvers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dimensionless<T> {
    /// Reaction coefficient c0 F² L² / (R T ε).
    pub u0: T,
    /// Neumann datum σ_c F L / (R T ε).
    pub g: T,
    pub k_s: T,
    pub g_s: T,
    /// First Lamé coefficient (k_S - 2G_S/3) in pressure units.
    pub lame: T,
    pub p_s0: T,
    pub p0: T,
    pub gamma: T,
    /// Whether the electrostatic problem is solved (false: c = 0, p = p0).
    pub electrostatics: bool,
}

impl<T: Real> Dimensionless<T> {
    pub fn from_params(params: &PhysicalParams, scales: &Scales, electrostatics: bool) -> Self {
        let rte = params.r * params.t * params.eps();
        let l = scales.length;
        let p = scales.pressure;
        Self {
            u0: T::lit(params.c0 * params.f * params.f * l * l / rte),
            g: T::lit(params.sigma_c * params.f * l / rte),
            k_s: T::lit(params.k_s / p),
            g_s: T::lit(params.g_s / p),
            lame: T::lit(params.lame() / p),
            p_s0: T::lit(params.p_s0 / p),
            p0: T::lit(params.p0 / p),
            gamma: T::lit(params.gamma / (p * l)),
            electrostatics,
        }
    }

    /// Dimensionless wall charge σ_c / (F c0 L) = g / u0.
    pub fn sigma_c(&self) -> T {
        self.g / self.u0
    }

    pub fn cast<S: Real>(&self) -> Dimensionless<S> {
        Dimensionless {
            u0: S::lit(self.u0.f64()),
            g: S::lit(self.g.f64()),
            k_s: S::lit(self.k_s.f64()),
            g_s: S::lit(self.g_s.f64()),
            lame: S::lit(self.lame.f64()),
            p_s0: S::lit(self.p_s0.f64()),
            p0: S::lit(self.p0.f64()),
            gamma: S::lit(self.gamma.f64()),
            electrostatics: self.electrostatics,
        }
    }
}

/// Outer-loop algorithm.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    FixedPoint,
    Variational,
    RadialOracle,
    GradientCheck,
}

/// Which interface law drives the fixed point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Law {
    Classical,
    Modified,
}

/// Which stopping test declares convergence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopRule {
    /// ‖λ − B(λ)‖ ≤ err for the fixed point, max‖g‖·h_Γ ≤ err for descent.
    Native,
    /// |sup|λ_n| − sup|λ_{n−1}|| ≤ sup_tol.
    SupChange,
}

macro_rules! impl_from_str {
    ($t:ty, $($s:literal => $v:expr),+ $(,)?) => {
        impl FromStr for $t {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, String> {
                match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
                    $($s => Ok($v),)+
                    other => Err(format!("unknown value {other:?}")),
                }
            }
        }
    };
}

impl_from_str!(Algorithm,
    "fixed_point" => Algorithm::FixedPoint,
    "variational" => Algorithm::Variational,
    "radial_oracle" => Algorithm::RadialOracle,
    "gradient_check" => Algorithm::GradientCheck,
);
impl_from_str!(Law, "classical" => Law::Classical, "modified" => Law::Modified);
impl_from_str!(StopRule, "native" => StopRule::Native, "sup" => StopRule::SupChange, "sup_change" => StopRule::SupChange);

impl fmt::Display for Law {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Law::Classical => "classical",
            Law::Modified => "modified",
        })
    }
}

/// Channel geometry in metres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Geometry {
    /// Channel diameter.
    pub d: f64,
    /// Length of each channel.
    pub l: f64,
    /// Vertical offset of the second channel.
    pub s: f64,
    /// Elastomer thickness above and below the channels (default 3d).
    pub thickness: f64,
    /// Fillet radius at the step corners (0 = sharp).
    pub fillet: f64,
    /// Target edge length away from the interface.
    pub h: f64,
    /// Interface edges are at most h / refine_interface.
    pub refine_interface: f64,
}

impl Default for Geometry {
    fn default() -> Self {
        Self {
            d: 2e-9,
            l: 10e-9,
            s: 0.5e-9,
            thickness: 6e-9,
            fillet: 0.0,
            h: 0.25e-9,
            refine_interface: 4.0,
        }
    }
}

/// Outer-loop and inner-solver controls.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub algorithm: Algorithm,
    pub law: Law,
    /// Descent step k (dimensionless).
    pub k: f64,
    /// Under-relaxation ω of the fixed point.
    pub omega: f64,
    /// Stopping tolerance err (dimensionless).
    pub err: f64,
    pub stop: StopRule,
    /// Tolerance of the sup-change criterion (dimensionless).
    pub sup_tol: f64,
    /// Curvature smoothing ε_s [m²]; `None` selects (2 h_Γ)².
    pub eps_s: Option<f64>,
    pub max_iter: usize,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub remesh: bool,
    /// Length scale L* [m].
    pub length_scale: f64,
    pub seed: u64,
    pub fd_directions: usize,
    pub checkpoint_every: usize,
    pub restart: Option<PathBuf>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::FixedPoint,
            law: Law::Classical,
            k: 1e-3,
            omega: 0.5,
            err: 1e-3,
            stop: StopRule::Native,
            sup_tol: 1e-3,
            eps_s: None,
            max_iter: 100,
            newton_tol: 1e-10,
            newton_max_iter: 60,
            remesh: true,
            length_scale: 1e-9,
            seed: 0,
            fd_directions: 3,
            checkpoint_every: 0,
            restart: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub geometry: Geometry,
    pub solver: SolverConfig,
    /// Whether to solve the potential problem; `false` is the uncharged limit.
    pub electrostatics: bool,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            geometry: Geometry::default(),
            solver: SolverConfig::default(),
            electrostatics: true,
            output_dir: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let g = &self.geometry;
        let s = &self.solver;
        let inv = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(ConfigError::Invariant(what.to_string()))
            }
        };
        inv(g.d > 0.0 && g.l > 0.0, "d > 0 and l > 0")?;
        inv(g.s >= 0.0 && g.s < g.d, "0 ≤ s < d")?;
        inv(g.thickness > 0.0, "thickness > 0")?;
        inv(g.fillet >= 0.0, "fillet ≥ 0")?;
        inv(g.h > 0.0, "h > 0")?;
        inv(g.refine_interface >= 1.0, "refine_interface ≥ 1")?;
        inv(s.err > 0.0, "err > 0")?;
        inv(s.sup_tol > 0.0, "sup_tol > 0")?;
        if s.algorithm == Algorithm::Variational {
            inv(s.k > 0.0, "k > 0")?;
        }
        inv(s.omega > 0.0 && s.omega <= 1.0, "0 < omega ≤ 1")?;
        inv(s.eps_s.map_or(true, |e| e >= 0.0), "eps_s ≥ 0")?;
        inv(s.length_scale > 0.0, "length scale > 0")?;
        inv(s.newton_tol > 0.0, "newton_tol > 0")
    }

    /// Mean interface edge length target in metres.
    pub fn h_gamma(&self) -> f64 {
        self.geometry.h / self.geometry.refine_interface
    }
}

/// A fully loaded configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub run: RunConfig,
    pub params: PhysicalParams,
}

impl Config {
    pub fn scales(&self) -> Scales {
        Scales::new(&self.params, self.run.solver.length_scale, 2)
    }

    pub fn dimensionless<T: Real>(&self) -> Dimensionless<T> {
        Dimensionless::from_params(&self.params, &self.scales(), self.run.electrostatics)
    }
}

/// Computes the scales and dimensionless groups for a run.
pub fn nondimensionalize<T: Real>(
    params: &PhysicalParams,
    config: &RunConfig,
) -> (Scales, Dimensionless<T>) {
    let scales = Scales::new(params, config.solver.length_scale, 2);
    let dl = Dimensionless::from_params(params, &scales, config.electrostatics);
    (scales, dl)
}

pub fn load_config(path: &Path) -> Result<Config, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<Config, ConfigError> {
    let ini = Ini::load_from_str(text).map_err(|e| ConfigError::Parse {
        line: e.line,
        col: e.col,
        msg: e.msg.to_string(),
    })?;
    let mut run = RunConfig::default();
    let mut params = PhysicalParams::default();
    let mut thickness_set = false;

    for (section, props) in ini.iter() {
        let section = section.unwrap_or("").to_ascii_lowercase();
        for (key, value) in props.iter() {
            let key_lc = key.to_ascii_lowercase();
            let bad = |reason: String| ConfigError::BadValue {
                section: section.clone(),
                key: key.to_string(),
                value: value.to_string(),
                reason,
            };
            let num = || value.trim().parse::<f64>().map_err(|e| bad(e.to_string()));
            let int = || value.trim().parse::<usize>().map_err(|e| bad(e.to_string()));
            let flag = || match value.trim().to_ascii_lowercase().as_str() {
                "true" | "yes" | "on" | "1" => Ok(true),
                "false" | "no" | "off" | "0" => Ok(false),
                _ => Err(bad("expected a boolean".into())),
            };
            let g = &mut run.geometry;
            let s = &mut run.solver;
            match (section.as_str(), key_lc.as_str()) {
                ("geometry", "d") => g.d = num()?,
                ("geometry", "l") => g.l = num()?,
                ("geometry", "s") => g.s = num()?,
                ("geometry", "thickness") => {
                    g.thickness = num()?;
                    thickness_set = true;
                }
                ("geometry", "fillet") => g.fillet = num()?,
                ("geometry", "h") => g.h = num()?,
                ("geometry", "refine_interface") => g.refine_interface = num()?,
                ("physics", "t") => params.t = num()?,
                ("physics", "gamma") => params.gamma = num()?,
                ("physics", "k_s") => params.k_s = num()?,
                ("physics", "g_s") => params.g_s = num()?,
                ("physics", "eps_r") => params.eps_r = num()?,
                ("physics", "sigma_c") => params.sigma_c = num()?,
                ("physics", "p_s0") => params.p_s0 = num()?,
                ("physics", "p0") => params.p0 = num()?,
                ("physics", "p0_bar") => params.p0 = bar_to_pa(num()?),
                ("physics", "c0") => params.c0 = num()?,
                ("physics", "f") => params.f = num()?,
                ("physics", "r") => params.r = num()?,
                ("physics", "eps0") => params.eps0 = num()?,
                ("physics", "electrostatics") => {
                    run.electrostatics = match value.trim().to_ascii_lowercase().as_str() {
                        "full" => true,
                        "skip" => false,
                        _ => flag()?,
                    }
                }
                ("solver", "algorithm") => s.algorithm = value.parse().map_err(bad)?,
                ("solver", "law") => s.law = value.parse().map_err(bad)?,
                ("solver", "k") => s.k = num()?,
                ("solver", "omega") => s.omega = num()?,
                ("solver", "err") => s.err = num()?,
                ("solver", "stop") => s.stop = value.parse().map_err(bad)?,
                ("solver", "sup_tol") => s.sup_tol = num()?,
                ("solver", "eps_s") => s.eps_s = Some(num()?),
                ("solver", "max_iter") => s.max_iter = int()?,
                ("solver", "newton_tol") => s.newton_tol = num()?,
                ("solver", "newton_max_iter") => s.newton_max_iter = int()?,
                ("solver", "remesh") => s.remesh = flag()?,
                ("solver", "length_scale") => s.length_scale = num()?,
                ("solver", "seed") => s.seed = int()? as u64,
                ("solver", "fd_directions") => s.fd_directions = int()?,
                ("solver", "checkpoint_every") => s.checkpoint_every = int()?,
                ("solver", "restart") => s.restart = Some(PathBuf::from(value.trim())),
                ("output", "dir") => run.output_dir = PathBuf::from(value.trim()),
                _ => {
                    return Err(ConfigError::UnknownKey {
                        section,
                        key: key.to_string(),
                    })
                }
            }
        }
    }
    if !thickness_set {
        run.geometry.thickness = 3.0 * run.geometry.d;
    }
    params.validate()?;
    run.validate()?;
    if params.sigma_c == 0.0 && run.electrostatics {
        return Err(ConfigError::Invariant(
            "sigma_c > 0 (use electrostatics = skip for the uncharged limit)".into(),
        ));
    }
    let table_p0 = PhysicalParams::default().p0;
    if (params.p0 - table_p0).abs() > 1e-9 * table_p0 {
        log::info!(
            "p0 = {:.6e} N/m² ({:.2} bar) differs from the reference parameter set ({:.2e} N/m²)",
            params.p0,
            pa_to_bar(params.p0),
            table_p0
        );
    }
    Ok(Config { run, params })
}

/// Canonical INI text of a configuration; [`parse_config`] reads it back to
/// the same value.
pub fn config_to_ini(config: &Config) -> String {
    use std::fmt::Write;
    let (g, s, p) = (&config.run.geometry, &config.run.solver, &config.params);
    let mut out = String::new();
    let _ = writeln!(out, "[geometry]");
    for (k, v) in [
        ("d", g.d),
        ("l", g.l),
        ("s", g.s),
        ("thickness", g.thickness),
        ("fillet", g.fillet),
        ("h", g.h),
        ("refine_interface", g.refine_interface),
    ] {
        let _ = writeln!(out, "{k} = {v:e}");
    }
    let _ = writeln!(out, "\n[physics]");
    for (k, v) in [
        ("T", p.t),
        ("gamma", p.gamma),
        ("k_S", p.k_s),
        ("G_S", p.g_s),
        ("eps_r", p.eps_r),
        ("sigma_c", p.sigma_c),
        ("p_S0", p.p_s0),
        ("p0", p.p0),
        ("c0", p.c0),
        ("F", p.f),
        ("R", p.r),
        ("eps0", p.eps0),
    ] {
        let _ = writeln!(out, "{k} = {v:e}");
    }
    let _ = writeln!(out, "electrostatics = {}", if config.run.electrostatics { "full" } else { "skip" });
    let _ = writeln!(out, "\n[solver]");
    let algorithm = match s.algorithm {
        Algorithm::FixedPoint => "fixed_point",
        Algorithm::Variational => "variational",
        Algorithm::RadialOracle => "radial_oracle",
        Algorithm::GradientCheck => "gradient_check",
    };
    let _ = writeln!(out, "algorithm = {algorithm}");
    let _ = writeln!(out, "law = {}", s.law);
    let stop = match s.stop {
        StopRule::Native => "native",
        StopRule::SupChange => "sup",
    };
    let _ = writeln!(out, "stop = {stop}");
    for (k, v) in [
        ("k", s.k),
        ("omega", s.omega),
        ("err", s.err),
        ("sup_tol", s.sup_tol),
        ("newton_tol", s.newton_tol),
        ("length_scale", s.length_scale),
    ] {
        let _ = writeln!(out, "{k} = {v:e}");
    }
    if let Some(e) = s.eps_s {
        let _ = writeln!(out, "eps_s = {e:e}");
    }
    for (k, v) in [
        ("max_iter", s.max_iter),
        ("newton_max_iter", s.newton_max_iter),
        ("fd_directions", s.fd_directions),
        ("checkpoint_every", s.checkpoint_every),
    ] {
        let _ = writeln!(out, "{k} = {v}");
    }
    let _ = writeln!(out, "seed = {}", s.seed);
    let _ = writeln!(out, "remesh = {}", s.remesh);
    if let Some(r) = &s.restart {
        let _ = writeln!(out, "restart = {}", r.display());
    }
    let _ = writeln!(out, "\n[output]");
    let _ = writeln!(out, "dir = {}", config.run.output_dir.display());
    out
}
