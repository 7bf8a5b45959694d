//! Post-processing: the Young–Laplace discrepancy of a straight charged
//! channel, slab checks of the potential solver, field export, iteration
//! logs and run reports.

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

use thiserror::Error;

use crate::energy::{EnergyBreakdown, FdReport};
use crate::equilibrium::{IterationRecord, Model, State, Status};
use crate::interface::InterfaceState;
use crate::mesh::{write_vtk, BoundaryTag, Mesh, Region, VtkData};
use crate::params::{Dimensionless, PhysicalParams, Scales};
use crate::pb::{secondary_fields, slab_shooting, NewtonOptions, PbError, PbSolver, SlabProfile};
use crate::scalar::{self, Vec2};

#[derive(Debug, Error)]
pub enum DiagnosticsError {
    #[error("λ_p = r²/d_l² = {0} must be below 8")]
    LambdaP(f64),
    #[error(transparent)]
    Potential(#[from] PbError),
    #[error("iteration log line {line}: {msg}")]
    Log { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// |p* − p − (γ* − γ)H| for a straight channel of radius r with H = 1/r.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YLDiscrepancy {
    /// [N/m²]
    pub delta_yl: f64,
    /// δ_YL / k_S
    pub relative: f64,
    /// [m]
    pub r: f64,
    /// Debye length [m]; infinite in the λ_p → 0 limit.
    pub d_l: f64,
    pub lambda_p: f64,
    /// [C/m²]
    pub sigma_c: f64,
    /// [F/m]
    pub eps: f64,
    /// [K]
    pub t: f64,
}

/// Closed form with the wall potential 2(RT/F) ln(1 − λ_p/8).
pub fn yl_discrepancy(r: f64, d_l: f64, params: &PhysicalParams) -> Result<YLDiscrepancy, DiagnosticsError> {
    let lambda_p = if d_l.is_infinite() { 0.0 } else { r * r / (d_l * d_l) };
    let mut out = yl_discrepancy_at(r, lambda_p, params)?;
    out.d_l = d_l;
    Ok(out)
}

/// Same, parametrized by λ_p directly.
pub fn yl_discrepancy_at(r: f64, lambda_p: f64, params: &PhysicalParams) -> Result<YLDiscrepancy, DiagnosticsError> {
    if !(lambda_p < 8.0) || lambda_p < 0.0 {
        return Err(DiagnosticsError::LambdaP(lambda_p));
    }
    let eps = params.eps();
    let sc = params.sigma_c;
    let phi_wall = 2.0 * params.thermal_voltage() * (1.0 - lambda_p / 8.0).ln();
    let delta_yl = sc * (-0.5 * sc / eps + phi_wall / r).abs();
    Ok(YLDiscrepancy {
        delta_yl,
        relative: delta_yl / params.k_s,
        r,
        d_l: if lambda_p > 0.0 { r / lambda_p.sqrt() } else { f64::INFINITY },
        lambda_p,
        sigma_c: sc,
        eps,
        t: params.t,
    })
}

/// λ_p = 0 followed by `points` Debye lengths log-spaced from `d_max` down
/// to `d_min` [m].
pub fn yl_band(
    r: f64,
    d_min: f64,
    d_max: f64,
    points: usize,
    params: &PhysicalParams,
) -> Result<Vec<YLDiscrepancy>, DiagnosticsError> {
    let mut out = vec![yl_discrepancy_at(r, 0.0, params)?];
    let n = points.max(2);
    for k in 0..n {
        let t = k as f64 / (n - 1) as f64;
        let d = (d_max.ln() + t * (d_min.ln() - d_max.ln())).exp();
        out.push(yl_discrepancy(r, d, params)?);
    }
    Ok(out)
}

pub fn write_yl_band<W: Write>(band: &[YLDiscrepancy], mut w: W) -> std::io::Result<()> {
    writeln!(w, "r [m],d_l [m],lambda_p [1],delta_YL [N/m^2],relative [1],sigma_c [C/m^2],eps [F/m],T [K]")?;
    for b in band {
        writeln!(
            w,
            "{:e},{:e},{:.17e},{:.17e},{:.17e},{:e},{:e},{}",
            b.r, b.d_l, b.lambda_p, b.delta_yl, b.relative, b.sigma_c, b.eps, b.t
        )?;
    }
    w.flush()
}

/// Nodal |p* − p − (γ* − γ)H| along the interface [N/m²].
pub fn yl_field(state: &InterfaceState<f64>, dl: &Dimensionless<f64>, scales: &Scales) -> Vec<f64> {
    (0..state.positions.len())
        .map(|i| {
            let d = state.p_star[i] - state.p[i] - (state.gamma_star[i] - dl.gamma) * state.curvature[i];
            scales.pressure_to_si(d.abs())
        })
        .collect()
}

/// Midplane-to-wall potential of the slab by RK4 shooting, sampled at |y|.
pub fn shooting_profile(u0: f64, g: f64, half_width: f64, steps: usize, ys: &[f64]) -> Result<Vec<f64>, PbError> {
    let (a, _) = slab_shooting(u0, g, half_width, steps)?;
    let f = |y: [f64; 2]| [y[1], u0 * y[0].exp()];
    Ok(ys
        .iter()
        .map(|&target| {
            let target = target.abs().min(half_width);
            let n = ((target / half_width) * steps as f64).ceil().max(1.0) as usize;
            let h = target / n as f64;
            let mut y = [a, 0.0];
            for _ in 0..n {
                let k1 = f(y);
                let k2 = f([y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]]);
                let k3 = f([y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1]]);
                let k4 = f([y[0] + h * k3[0], y[1] + h * k3[1]]);
                for i in 0..2 {
                    y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
                }
            }
            y[0]
        })
        .collect())
}

/// One resolution of the slab comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlabCheck {
    pub ny: usize,
    /// Nodal L∞ distance to the shooting profile.
    pub linf_shooting: f64,
    /// Nodal L∞ distance to the closed form a − 2 ln cos(ky).
    pub linf_exact: f64,
    pub gen_residual: f64,
}

/// FEM potential on the channel [0, 1] × [−w, w] (charged walls, open mouths)
/// against the 1D slab oracles, for each vertical resolution.
pub fn slab_checks(u0: f64, g: f64, half_width: f64, resolutions: &[usize]) -> Result<Vec<SlabCheck>, PbError> {
    use BoundaryTag::*;
    let exact = SlabProfile::new(u0, g, half_width)?;
    resolutions
        .iter()
        .map(|&ny| {
            let mesh = Mesh::rectangle([0.0, -half_width], [1.0, half_width], 2, ny, Region::Fluid, [Gamma, O0, Gamma, I0]);
            let pb = PbSolver::new(&mesh, u0, g)?;
            let sol = pb.solve(None, &NewtonOptions::default())?;
            let ys: Vec<f64> = mesh.nodes.iter().map(|p| p[1]).collect();
            let shot = shooting_profile(u0, g, half_width, 20_000, &ys)?;
            let mut check = SlabCheck { ny, linf_shooting: 0.0, linf_exact: 0.0, gen_residual: pb.gen_residual(&sol.u) };
            for (i, y) in ys.iter().enumerate() {
                check.linf_shooting = check.linf_shooting.max((sol.u[i] - shot[i]).abs());
                check.linf_exact = check.linf_exact.max((sol.u[i] - exact.eval(*y)).abs());
            }
            Ok(check)
        })
        .collect()
}

/// Max nodal |u(1) − ln u0 − u(u0)| on a slab mesh.
pub fn u0_shift_defect(u0: f64, g: f64, half_width: f64, ny: usize) -> Result<f64, PbError> {
    use BoundaryTag::*;
    let mesh = Mesh::rectangle([0.0, -half_width], [1.0, half_width], 2, ny, Region::Fluid, [Gamma, O0, Gamma, I0]);
    let opts = NewtonOptions::default();
    let a = PbSolver::new(&mesh, 1.0, g)?.solve(None, &opts)?;
    let b = PbSolver::new(&mesh, u0, g)?.solve(None, &opts)?;
    Ok(a.u.iter().zip(&b.u).fold(0.0f64, |m, (x, y)| m.max((x - u0.ln() - y).abs())))
}

fn scaled(mesh: &Mesh<f64>, length: f64) -> Mesh<f64> {
    let mut m = mesh.clone();
    for p in &mut m.nodes {
        *p = scalar::scale(*p, length);
    }
    m
}

/// Elementwise gradient of a P1 field.
pub fn cell_gradients(mesh: &Mesh<f64>, field: &[f64]) -> Vec<Vec2<f64>> {
    mesh.triangles
        .iter()
        .map(|t| {
            let [a, b, c] = [mesh.nodes[t[0]], mesh.nodes[t[1]], mesh.nodes[t[2]]];
            let (e1, e2) = (scalar::sub(b, a), scalar::sub(c, a));
            let det = e1[0] * e2[1] - e1[1] * e2[0];
            let (d1, d2) = (field[t[1]] - field[t[0]], field[t[2]] - field[t[0]]);
            [(d1 * e2[1] - d2 * e1[1]) / det, (e1[0] * d2 - e2[0] * d1) / det]
        })
        .collect()
}

/// Writes `fluid.vtk` (φ, c, p, −∇φ), `solid.vtk` (U⁰, |U⁰|, U₂⁰) on the
/// current configuration and `interface.csv`, all in SI units.
pub fn export_fields(model: &Model, state: &State, dir: &Path) -> Result<(), DiagnosticsError> {
    std::fs::create_dir_all(dir)?;
    let sc = &model.scales;
    let len = sc.length;
    let n = state.fluid.num_nodes();
    let (phi, c, p) = match &state.u {
        Some(u) => {
            let f = secondary_fields(u, &model.params)?;
            (f.phi, f.c, f.p)
        }
        None => (vec![0.0; n], vec![0.0; n], vec![model.params.p0; n]),
    };
    let e_field: Vec<Vec2<f64>> =
        cell_gradients(&state.fluid, &phi).into_iter().map(|g| [-g[0] / len, -g[1] / len]).collect();
    let fluid = VtkData {
        point_scalars: vec![("phi [V]".into(), phi), ("c [mol/m^3]".into(), c), ("p [N/m^2]".into(), p)],
        cell_vectors: vec![("minus_grad_phi [V/m]".into(), e_field)],
        ..Default::default()
    };
    write_vtk(&scaled(&state.fluid, len), &fluid, std::io::BufWriter::new(std::fs::File::create(dir.join("fluid.vtk"))?))?;

    let solid_mesh = model.elastic.solid.mesh.deform(&state.displacement.u);
    let u_si: Vec<Vec2<f64>> = state.displacement.u.iter().map(|v| scalar::scale(*v, len)).collect();
    let solid = VtkData {
        point_scalars: vec![
            ("U_norm [m]".into(), u_si.iter().map(|v| scalar::norm(*v)).collect()),
            ("U_2 [m]".into(), u_si.iter().map(|v| v[1]).collect()),
        ],
        point_vectors: vec![("U [m]".into(), u_si)],
        ..Default::default()
    };
    write_vtk(&scaled(&solid_mesh, len), &solid, std::io::BufWriter::new(std::fs::File::create(dir.join("solid.vtk"))?))?;

    write_interface_csv(model, state, std::io::BufWriter::new(std::fs::File::create(dir.join("interface.csv"))?))?;
    Ok(())
}

pub fn write_interface_csv<W: Write>(model: &Model, state: &State, mut w: W) -> std::io::Result<()> {
    let sc = &model.scales;
    let s = &state.interface;
    let yl = yl_field(s, &model.dl_interface, sc);
    let tension = sc.tension();
    writeln!(
        w,
        "position,arc,x [m],y [m],lambda_x [m],lambda_y [m],nu_x [1],nu_y [1],H [1/m],u [1],phi [V],p [N/m^2],\
         p_star [N/m^2],gamma_star [N/m],g_x [N/m^2],g_y [N/m^2],delta_YL [N/m^2]"
    )?;
    let mut arc_of = vec![0usize; s.positions.len()];
    for (a, arc) in model.gamma.arcs.iter().enumerate() {
        for &k in &arc.nodes {
            arc_of[k] = a;
        }
    }
    for k in 0..s.positions.len() {
        let g = state.gradient.density[k];
        writeln!(
            w,
            "{k},{},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
            arc_of[k],
            s.positions[k][0] * sc.length,
            s.positions[k][1] * sc.length,
            state.lambda[k][0] * sc.length,
            state.lambda[k][1] * sc.length,
            s.nu[k][0],
            s.nu[k][1],
            sc.curvature_to_si(s.curvature[k]),
            s.u[k],
            -s.u[k] * sc.potential,
            sc.pressure_to_si(s.p[k]),
            sc.pressure_to_si(s.p_star[k]),
            s.gamma_star[k] * tension,
            sc.pressure_to_si(g[0]),
            sc.pressure_to_si(g[1]),
            yl[k],
        )?;
    }
    w.flush()
}

const LOG_HEADER: &str = "n,sup_lambda [m],native [1],sup_change [1],E_mech_s [J/m],E_mech_l [J/m],E_el [J/m],\
E_el_alt [J/m],E_st [J/m],E_total [J/m],gen_residual [1],grad_inf [N/m^2],area [m^2],step [1],remeshed,newton_iterations";

/// One line per record; wall-clock time is left out so that identical runs
/// give identical bytes.
pub fn write_iteration_log<W: Write>(records: &[IterationRecord], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{LOG_HEADER}")?;
    for r in records {
        let e = &r.energy;
        writeln!(
            w,
            "{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{},{}",
            r.n,
            r.sup_lambda,
            r.native,
            r.sup_change,
            e.mech_s,
            e.mech_l,
            e.el,
            e.el_alt,
            e.st,
            e.total,
            r.gen_residual,
            r.grad_inf,
            r.area,
            r.step,
            u8::from(r.remeshed),
            r.newton_iterations
        )?;
    }
    w.flush()
}

/// Reads a log written by [`write_iteration_log`]; `elapsed` is zero.
pub fn read_iteration_log<R: BufRead>(r: R) -> Result<Vec<IterationRecord>, DiagnosticsError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let bad = |msg: String| DiagnosticsError::Log { line: i + 1, msg };
        if i == 0 {
            if line.trim() != LOG_HEADER {
                return Err(bad("unexpected header".into()));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 16 {
            return Err(bad(format!("{} columns, expected 16", cols.len())));
        }
        let f = |k: usize| cols[k].trim().parse::<f64>().map_err(|e| bad(format!("column {}: {e}", k + 1)));
        let u = |k: usize| cols[k].trim().parse::<usize>().map_err(|e| bad(format!("column {}: {e}", k + 1)));
        out.push(IterationRecord {
            n: u(0)?,
            sup_lambda: f(1)?,
            native: f(2)?,
            sup_change: f(3)?,
            energy: EnergyBreakdown {
                mech_s: f(4)?,
                mech_l: f(5)?,
                el: f(6)?,
                el_alt: f(7)?,
                st: f(8)?,
                total: f(9)?,
            },
            gen_residual: f(10)?,
            grad_inf: f(11)?,
            area: f(12)?,
            step: f(13)?,
            remeshed: u(14)? != 0,
            newton_iterations: u(15)?,
            elapsed: 0.0,
        });
    }
    Ok(out)
}

pub fn write_fd_report<W: Write>(report: &FdReport, scales: &Scales, mut w: W) -> std::io::Result<()> {
    writeln!(w, "direction,h [m],fd [J/m^2],analytic [J/m^2],rel_err [1],asymmetry [1],selected")?;
    let per_len = scales.energy / scales.length;
    for r in &report.rows {
        let selected = report.best.get(r.direction).and_then(|b| b.as_ref()).is_some_and(|b| b.h == r.h);
        writeln!(
            w,
            "{},{:e},{:e},{:e},{:e},{:e},{}",
            r.direction,
            r.h * scales.length,
            r.fd * per_len,
            r.analytic * per_len,
            r.rel_err,
            r.asymmetry,
            u8::from(selected)
        )?;
    }
    for (d, h, msg) in &report.skipped {
        writeln!(w, "{d},{:e},,,,,skipped: {}", h * scales.length, msg.replace(',', ";"))?;
    }
    w.flush()
}

/// One acceptance or sanity check shown in a report.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Plain-text summary of a run. Everything below the timestamp line is a
/// function of the config echo, the status and the iteration log.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub timestamp: Option<String>,
    pub mode: String,
    pub config_echo: String,
    pub status: Option<Status>,
    pub message: String,
    pub records: Vec<IterationRecord>,
    pub checks: Vec<Check>,
}

impl RunReport {
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "poreshape run report");
        if let Some(t) = &self.timestamp {
            let _ = writeln!(s, "generated: {t}");
        }
        let _ = writeln!(s, "mode: {}", self.mode);
        match self.status {
            Some(st) => {
                let _ = writeln!(s, "status: {st} (exit {})", st.exit_code());
            }
            None => {
                let _ = writeln!(s, "status: completed");
            }
        }
        if !self.message.is_empty() {
            let _ = writeln!(s, "message: {}", self.message);
        }
        let _ = writeln!(s, "\n== config ==\n{}", self.config_echo.trim_end());
        if !self.records.is_empty() {
            let _ = writeln!(s, "\n== history ==");
            let _ = writeln!(
                s,
                "{:>6} {:>16} {:>12} {:>12} {:>12} {:>14} {:>4}",
                "n", "E_total [J/m]", "native", "gen", "sup|λ| [m]", "area [m^2]", "rm"
            );
            for r in &self.records {
                let _ = writeln!(
                    s,
                    "{:>6} {:>16.9e} {:>12.4e} {:>12.4e} {:>12.4e} {:>14.7e} {:>4}",
                    r.n,
                    r.energy.total,
                    r.native,
                    r.gen_residual,
                    r.sup_lambda,
                    r.area,
                    if r.remeshed { "y" } else { "" }
                );
            }
        }
        if !self.checks.is_empty() {
            let _ = writeln!(s, "\n== checks ==");
            for c in &self.checks {
                let _ = writeln!(s, "[{}] {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
        }
        s
    }
}

/// `STATUS<TAB>message` as stored next to the log.
pub fn write_status<W: Write>(status: Status, message: &str, mut w: W) -> std::io::Result<()> {
    writeln!(w, "{}\t{}", status, message.replace('\n', " "))
}

pub fn read_status(text: &str) -> Option<(Status, String)> {
    let line = text.lines().next()?;
    let (s, msg) = line.split_once('\t').unwrap_or((line, ""));
    let status = match s.trim() {
        "CONVERGED" => Status::Converged,
        "PORE_CLOSED" => Status::PoreClosed,
        "MAX_ITER" => Status::MaxIter,
        "DIVERGED" => Status::Diverged,
        _ => return None,
    };
    Some((status, msg.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> PhysicalParams {
        PhysicalParams::default()
    }

    #[test]
    fn uncharged_limit_is_maxwell_stress() {
        let p = table();
        let d = yl_discrepancy_at(1e-9, 0.0, &p).unwrap();
        let expected = p.sigma_c * p.sigma_c / (2.0 * p.eps());
        assert!((d.delta_yl - expected).abs() <= 1e-12 * expected);
        assert!(d.d_l.is_infinite());
    }

    #[test]
    fn no_charge_no_discrepancy() {
        let p = PhysicalParams { sigma_c: 0.0, ..table() };
        assert_eq!(yl_discrepancy(1e-9, 0.6e-9, &p).unwrap().delta_yl, 0.0);
    }

    #[test]
    fn band_is_monotone_in_lambda_p() {
        let band = yl_band(1e-9, 0.6e-9, 100e-9, 40, &table()).unwrap();
        let mut sorted = band.clone();
        sorted.sort_by(|a, b| a.lambda_p.total_cmp(&b.lambda_p));
        assert!(sorted.windows(2).all(|w| w[1].relative >= w[0].relative));
    }

    #[test]
    fn lambda_p_eight_is_rejected() {
        assert!(yl_discrepancy(1e-9, 1e-9 / 8f64.sqrt(), &table()).is_err());
        assert!(yl_discrepancy_at(1e-9, 9.0, &table()).is_err());
    }

    #[test]
    fn gradient_of_linear_field_is_exact() {
        let m = Mesh::rectangle([0.0, 0.0], [2.0, 1.0], 3, 2, Region::Fluid, [BoundaryTag::Gamma; 4]);
        let f: Vec<f64> = m.nodes.iter().map(|p| 3.0 * p[0] - 2.0 * p[1] + 1.0).collect();
        for g in cell_gradients(&m, &f) {
            assert!((g[0] - 3.0).abs() < 1e-12 && (g[1] + 2.0).abs() < 1e-12);
        }
        let flat = vec![0.7; m.num_nodes()];
        assert!(cell_gradients(&m, &flat).iter().all(|g| scalar::norm(*g) < 1e-14));
    }

    #[test]
    fn shooting_profile_matches_closed_form() {
        let exact = SlabProfile::new(2.14, 7.436, 1.0).unwrap();
        let ys = [0.0, 0.3, -0.7, 1.0];
        let shot = shooting_profile(2.14, 7.436, 1.0, 20_000, &ys).unwrap();
        for (y, u) in ys.iter().zip(&shot) {
            assert!((u - exact.eval(*y)).abs() < 1e-8, "{y}: {u} vs {}", exact.eval(*y));
        }
    }

    #[test]
    fn iteration_log_round_trip() {
        let rec = IterationRecord {
            n: 3,
            sup_lambda: 1.25e-10,
            native: 0.1 + 0.2,
            sup_change: f64::INFINITY,
            energy: EnergyBreakdown::new(1.0 / 3.0, -2.5, 0.125, 0.125, 7e-3),
            gen_residual: 1e-12,
            grad_inf: 3.5e6,
            area: 4e-17,
            step: 0.5,
            remeshed: true,
            newton_iterations: 4,
            elapsed: 0.0,
        };
        let mut buf = Vec::new();
        write_iteration_log(&[rec.clone(), IterationRecord { n: 4, remeshed: false, ..rec.clone() }], &mut buf).unwrap();
        let back = read_iteration_log(buf.as_slice()).unwrap();
        assert_eq!(back[0], rec);
        assert_eq!(back.len(), 2);
        let mut again = Vec::new();
        write_iteration_log(&back, &mut again).unwrap();
        assert_eq!(buf, again);
    }

    #[test]
    fn status_line_round_trip() {
        let mut buf = Vec::new();
        write_status(Status::PoreClosed, "edges 1-2 and 5-6 intersect", &mut buf).unwrap();
        let (s, m) = read_status(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(s, Status::PoreClosed);
        assert_eq!(m, "edges 1-2 and 5-6 intersect");
    }
}
