use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, ValueEnum};

use poreshape_core::diagnostics::{
    export_fields, slab_checks, u0_shift_defect, write_fd_report, write_iteration_log, write_status,
    write_yl_band, yl_band, yl_discrepancy_at, Check, RunReport,
};
use poreshape_core::equilibrium::{
    compare_laws, gradient_check, read_lambda, run_fixed_point, run_variational, write_lambda, EquilibriumResult,
    Model, Status,
};
use poreshape_core::params::{config_to_ini, load_config, Config, PhysicalParams, RunConfig};
use poreshape_core::pb::radial_oracle;

/// Exit code for unusable command lines and configurations.
const EXIT_CONFIG: u8 = 64;
/// Slab oracle tolerance and resolutions.
const SLAB_TOL: f64 = 1e-3;
const SLAB_RESOLUTIONS: [usize; 3] = [32, 64, 128];

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    FixedPoint,
    Variational,
    Compare,
    RadialOracle,
    GradientCheck,
    YlBand,
}

/// Equilibrium shape of a charged nanochannel in an elastomer.
#[derive(Debug, Parser)]
#[command(name = "poreshape", version)]
struct Cli {
    #[arg(long, value_enum)]
    mode: Mode,
    /// INI configuration; the reference parameter set when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides [output] dir).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for the random FD directions (overrides [solver] seed).
    #[arg(long)]
    seed: Option<u64>,
}

/// Setup failures map to the config exit code, the rest to 1.
enum Failure {
    Setup(anyhow::Error),
    Runtime(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Runtime(e.into())
    }
}

fn setup<T, E: Into<anyhow::Error>>(r: Result<T, E>) -> Result<T, Failure> {
    r.map_err(|e| Failure::Setup(e.into()))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Setup(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn load(cli: &Cli) -> Result<Config, Failure> {
    let mut config = match &cli.config {
        Some(p) => setup(load_config(p).with_context(|| format!("loading {}", p.display())))?,
        None => Config { run: RunConfig::default(), params: PhysicalParams::default() },
    };
    if let Some(o) = &cli.out {
        config.run.output_dir = o.clone();
    }
    if let Some(s) = cli.seed {
        config.run.solver.seed = s;
    }
    let dir = &config.run.output_dir;
    setup(std::fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display())))?;
    Ok(config)
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("writing {}", path.display()))?))
}

fn timestamp() -> String {
    let secs = std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map_or(0, |d| d.as_secs());
    format!("unix {secs}")
}

fn run(cli: &Cli) -> Result<u8, Failure> {
    let config = load(cli)?;
    let out = config.run.output_dir.clone();
    std::fs::write(out.join("config.ini"), config_to_ini(&config))?;
    let mode = cli.mode.to_possible_value().map_or_else(String::new, |v| v.get_name().to_string());
    let mut report = RunReport {
        timestamp: Some(timestamp()),
        mode,
        config_echo: config_to_ini(&config),
        status: None,
        message: String::new(),
        records: Vec::new(),
        checks: Vec::new(),
    };
    let code = match cli.mode {
        Mode::FixedPoint | Mode::Variational => {
            let model = setup(Model::new(&config))?;
            let start = match &config.run.solver.restart {
                Some(p) => Some(setup(read_lambda(p, model.gamma.len()))?),
                None => None,
            };
            let result = if cli.mode == Mode::FixedPoint {
                run_fixed_point(&model, config.run.solver.law, start.as_deref())?
            } else {
                run_variational(&model, start.as_deref())?
            };
            write_result(&model, &result, &out)?;
            println!("{}: {}", result.status, result.message);
            report.status = Some(result.status);
            report.message = result.message.clone();
            report.records = result.history;
            result.status.exit_code() as u8
        }
        Mode::Compare => {
            let model = setup(Model::new(&config))?;
            let cmp = compare_laws(&model)?;
            for (name, r) in [("classical", &cmp.classical), ("modified", &cmp.modified)] {
                let dir = out.join(name);
                std::fs::create_dir_all(&dir)?;
                write_result(&model, r, &dir)?;
                report.checks.push(Check {
                    name: format!("{name} run"),
                    passed: r.status == Status::Converged,
                    detail: format!("{} after {} iterations", r.status, r.iterations()),
                });
            }
            let mut w = create(&out.join("compare.csv"))?;
            use std::io::Write;
            writeln!(w, "hausdorff [m],l2 [m^1.5],classical,modified")?;
            writeln!(w, "{:e},{:e},{},{}", cmp.hausdorff, cmp.l2, cmp.classical.status, cmp.modified.status)?;
            w.flush()?;
            report.message = format!("Hausdorff distance {:.4e} m, L2 distance {:.4e}", cmp.hausdorff, cmp.l2);
            println!("{}", report.message);
            let worst = [cmp.classical.status, cmp.modified.status].into_iter().find(|s| *s != Status::Converged);
            report.status = Some(worst.unwrap_or(Status::Converged));
            worst.map_or(0, |s| s.exit_code() as u8)
        }
        Mode::GradientCheck => {
            let model = setup(Model::new(&config))?;
            let s = &config.run.solver;
            let (fd, _) = gradient_check(&model, None, s.fd_directions.max(1), s.seed)?;
            write_fd_report(&fd, &model.scales, create(&out.join("gradient_check.csv"))?)?;
            let median = fd.median_rel_err();
            report.checks.push(Check {
                name: "median relative error".into(),
                passed: median.is_some_and(|m| m <= 5e-2),
                detail: format!("{median:?} (tolerance 5e-2)"),
            });
            report.checks.push(Check {
                name: "observed FD order".into(),
                passed: fd.median_slope().is_some_and(|p| p > 1.5),
                detail: format!("{:?}", fd.median_slope()),
            });
            println!("median relative error {median:?}, FD order {:?}", fd.median_slope());
            0
        }
        Mode::RadialOracle => {
            let dl = config.dimensionless::<f64>();
            let half_width = 0.5 * config.run.geometry.d / config.run.solver.length_scale;
            let checks = slab_checks(dl.u0, dl.g, half_width, &SLAB_RESOLUTIONS)?;
            let shift = u0_shift_defect(dl.u0, dl.g, half_width, SLAB_RESOLUTIONS[1])?;
            let mut w = create(&out.join("slab_oracle.csv"))?;
            use std::io::Write;
            writeln!(w, "ny,linf_shooting [1],linf_closed_form [1],gen_residual [1]")?;
            for c in &checks {
                writeln!(w, "{},{:e},{:e},{:e}", c.ny, c.linf_shooting, c.linf_exact, c.gen_residual)?;
            }
            w.flush()?;
            let r = 0.5 * config.run.geometry.d;
            let radial = radial_oracle(r, None, &config.params)?;
            let mut w = create(&out.join("radial_oracle.csv"))?;
            writeln!(w, "r [m],debye_length [m],lambda_p [1],phi_wall [V]")?;
            writeln!(w, "{:e},{:e},{:e},{:e}", r, radial.debye_length, radial.lambda_p, radial.phi_wall)?;
            w.flush()?;
            let finest = checks.last().map_or(f64::NAN, |c| c.linf_shooting);
            report.checks.push(Check {
                name: "slab vs shooting, finest mesh".into(),
                passed: finest <= SLAB_TOL,
                detail: format!("L∞ = {finest:.3e} (tolerance {SLAB_TOL:e})"),
            });
            report.checks.push(Check {
                name: "u0 shift identity".into(),
                passed: shift <= 1e-9,
                detail: format!("max defect {shift:.3e}"),
            });
            println!("slab L∞ {finest:.3e}, shift defect {shift:.3e}");
            0
        }
        Mode::YlBand => {
            let r = 0.5 * config.run.geometry.d;
            let band = yl_band(r, 0.6e-9, 100e-9, 50, &config.params)?;
            write_yl_band(&band, create(&out.join("yl_band.csv"))?)?;
            let low = band[0].relative;
            let high = yl_discrepancy_at(r, 2.78, &config.params)?.relative;
            let at_06 = band.last().map_or(f64::NAN, |b| b.relative);
            report.message = format!(
                "relative δ_YL {low:.5} at λ_p = 0, {high:.5} at λ_p = 2.78, {at_06:.5} at d_l = 0.6 nm"
            );
            println!("{}", report.message);
            0
        }
    };
    if let (Mode::Compare, Some(status)) = (cli.mode, report.status) {
        write_status(status, &report.message, create(&out.join("status.txt"))?)?;
    }
    std::fs::write(out.join("report.txt"), report.render())?;
    Ok(code)
}

fn write_result(model: &Model, result: &EquilibriumResult, dir: &Path) -> anyhow::Result<()> {
    write_iteration_log(&result.history, create(&dir.join("iterations.csv"))?)?;
    write_status(result.status, &result.message, create(&dir.join("status.txt"))?)?;
    write_lambda(&dir.join("lambda.csv"), model, &result.state.lambda)?;
    export_fields(model, &result.state, dir)?;
    Ok(())
}
