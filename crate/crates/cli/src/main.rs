use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use wopsip::experiment::{
    render_mesh_report, render_table, run_convergence, run_mesh_report, Equation, ExperimentConfig,
    OutputFormat, DEFAULT_N, EXTENDED_N,
};
use wopsip::fespace::{cr_divergence, DiscreteFunction, FieldValue};
use wopsip::linalg::InnerSolver;
use wopsip::mesh::vtk::{export_vtk, VtkField};
use wopsip::mesh::{generate_structured, Mesh2D, MeshFamily, Point2};
use wopsip::poisson::{solve_poisson, PoissonProblem};
use wopsip::stokes::{solve_stokes, Example, StokesProblem, StokesTolerances, Variant};
use wopsip::verify::{run_verify_with, VerifyOptions};

const EXIT_SOLVER: u8 = 1;
const EXIT_VERIFY: u8 = 2;
const EXIT_USAGE: u8 = 3;

#[derive(Parser)]
#[command(
    name = "wopsip",
    version,
    about = "Penalty-based Nitsche schemes for Poisson and Stokes on anisotropic meshes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convergence sweep for a manufactured Poisson solution.
    Poisson(SweepArgs),
    /// Convergence sweep for a Stokes example.
    Stokes(SweepArgs),
    /// Shape statistics of a mesh family.
    MeshReport(MeshReportArgs),
    /// Run the self-check suite.
    Verify(VerifyArgs),
    /// Solve once and write a legacy VTK file.
    ExportVtk(ExportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum MeshArg {
    Uniform,
    Graded,
    Cosine,
}

impl From<MeshArg> for MeshFamily {
    fn from(m: MeshArg) -> Self {
        match m {
            MeshArg::Uniform => MeshFamily::Uniform,
            MeshArg::Graded => MeshFamily::Graded,
            MeshArg::Cosine => MeshFamily::Cosine,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Robust,
    Plain,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Robust => Variant::Robust,
            VariantArg::Plain => Variant::Plain,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum InnerArg {
    Cholesky,
    Cg,
}

impl From<InnerArg> for InnerSolver {
    fn from(i: InnerArg) -> Self {
        match i {
            InnerArg::Cholesky => InnerSolver::Cholesky,
            InnerArg::Cg => InnerSolver::Cg,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Markdown,
}

impl From<FormatArg> for OutputFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => OutputFormat::Csv,
            FormatArg::Markdown => OutputFormat::Markdown,
        }
    }
}

#[derive(Args)]
struct SweepArgs {
    /// JSON experiment file; flags given on the command line override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    mesh: Option<MeshArg>,
    /// Comma-separated mesh sizes, e.g. `16,32,64`.
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    /// Append 256 and 512 to the default sizes.
    #[arg(long)]
    extended: bool,
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    /// Stokes: example1 or example2. Poisson: sin-product, sin-cos, quadratic or exponential.
    #[arg(long)]
    example: Option<String>,
    #[arg(long, value_enum)]
    variant: Option<VariantArg>,
    /// Stopping tolerance of the outer iteration.
    #[arg(long)]
    tol: Option<f64>,
    /// Velocity solves inside the Stokes iteration.
    #[arg(long, value_enum)]
    inner_solver: Option<InnerArg>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MeshReportArgs {
    #[arg(long, value_enum, default_value = "graded")]
    mesh: MeshArg,
    #[arg(long, value_delimiter = ',', default_values_t = [8, 16, 32, 64, 128])]
    n: Vec<usize>,
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatArg,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Penalty exponent used by the Poisson rate check (mutation testing).
    #[arg(long, default_value_t = 1.0, hide = true)]
    beta: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExportKind {
    Mesh,
    Poisson,
    Stokes,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long, value_enum, default_value = "stokes")]
    equation: ExportKind,
    #[arg(long, value_enum, default_value = "uniform")]
    mesh: MeshArg,
    #[arg(long, default_value_t = 16)]
    n: usize,
    #[arg(long, default_value_t = 1.0)]
    nu: f64,
    #[arg(long, default_value_t = 1.0)]
    eta: f64,
    #[arg(long)]
    example: Option<String>,
    #[arg(long, value_enum, default_value = "robust")]
    variant: VariantArg,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

struct Failure {
    code: u8,
    error: anyhow::Error,
}

fn usage(error: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        error: error.into(),
    }
}

fn solver(error: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code: EXIT_SOLVER,
        error: error.into(),
    }
}

fn emit(text: &str, out: Option<&PathBuf>) -> Result<(), Failure> {
    match out {
        Some(path) => std::fs::write(path, text)
            .with_context(|| format!("writing {}", path.display()))
            .map_err(usage),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn sweep_config(equation: Equation, args: &SweepArgs) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &args.config {
        Some(path) => {
            let cfg = ExperimentConfig::load(path)
                .with_context(|| format!("reading {}", path.display()))
                .map_err(usage)?;
            if cfg.equation != equation {
                return Err(usage(anyhow!(
                    "{} describes a {:?} experiment",
                    path.display(),
                    cfg.equation
                )));
            }
            cfg
        }
        None => match equation {
            Equation::Stokes => ExperimentConfig::stokes(
                MeshFamily::Uniform,
                Example::Example1,
                1.0,
                1.0,
                DEFAULT_N.to_vec(),
            ),
            Equation::Poisson => ExperimentConfig::poisson(
                MeshFamily::Uniform,
                wopsip::experiment::PoissonExample::SinCos,
                DEFAULT_N.to_vec(),
            ),
        },
    };
    if let Some(m) = args.mesh {
        cfg.mesh = m.into();
    }
    if let Some(n) = &args.n {
        cfg.n = n.clone();
    }
    if args.extended {
        let last = cfg.n.last().copied().unwrap_or(0);
        cfg.n.extend(EXTENDED_N.iter().filter(|&&n| n > last));
    }
    if let Some(nu) = args.nu {
        cfg.nu = nu;
    }
    if let Some(eta) = args.eta {
        cfg.eta = eta;
    }
    if let Some(ex) = &args.example {
        cfg.example = ex.clone();
    }
    if let Some(v) = args.variant {
        cfg.variant = v.into();
    }
    if let Some(tol) = args.tol {
        cfg.tolerances.outer = tol;
    }
    if let Some(s) = args.inner_solver {
        cfg.tolerances.inner_solver = s.into();
    }
    if let Some(f) = args.format {
        cfg.format = f.into();
    }
    if let Some(out) = &args.out {
        cfg.output = Some(out.clone());
    }
    cfg.validate().map_err(usage)?;
    Ok(cfg)
}

fn sweep(equation: Equation, args: &SweepArgs) -> Result<(), Failure> {
    let cfg = sweep_config(equation, args)?;
    let rows = run_convergence(&cfg).map_err(solver)?;
    emit(&render_table(&rows, cfg.format), cfg.output.as_ref())?;
    let failed: Vec<usize> = rows
        .iter()
        .filter(|r| r.solver_failed)
        .map(|r| r.n)
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(solver(anyhow!(
            "solver did not converge for n = {failed:?}"
        )))
    }
}

fn centroid_values(mesh: &Mesh2D, f: &DiscreteFunction) -> Result<Vec<FieldValue>, Failure> {
    (0..mesh.num_elements())
        .map(|t| {
            let p = mesh.element_points(t);
            let c = Point2::new(
                (p[0].x + p[1].x + p[2].x) / 3.0,
                (p[0].y + p[1].y + p[2].y) / 3.0,
            );
            f.evaluate(mesh, t, c).map_err(solver)
        })
        .collect()
}

fn export(args: &ExportArgs) -> Result<(), Failure> {
    let mesh = generate_structured(args.mesh.into(), args.n).map_err(usage)?;
    let mut fields = vec![VtkField::cell_scalar(
        "area",
        mesh.geometry.iter().map(|g| g.area).collect(),
    )];
    match args.equation {
        ExportKind::Mesh => {}
        ExportKind::Poisson => {
            let example: wopsip::experiment::PoissonExample = args
                .example
                .as_deref()
                .unwrap_or("sin-cos")
                .parse()
                .map_err(usage)?;
            let problem = PoissonProblem::manufactured(&mesh, example.field()).map_err(usage)?;
            let sol = solve_poisson(&problem, args.tol.unwrap_or(1e-10)).map_err(solver)?;
            let values = centroid_values(&mesh, &sol.u_h)?
                .into_iter()
                .map(|v| match v {
                    FieldValue::Scalar(s) => s,
                    FieldValue::Vector(v) => v[0],
                })
                .collect();
            fields.push(VtkField::cell_scalar("u_h", values));
        }
        ExportKind::Stokes => {
            let example: Example = args
                .example
                .as_deref()
                .unwrap_or("example1")
                .parse()
                .map_err(usage)?;
            let problem = StokesProblem::from_example(&mesh, example, args.nu, args.eta)
                .map_err(usage)?
                .with_variant(args.variant.into());
            let tol = StokesTolerances {
                outer: args.tol.unwrap_or(StokesTolerances::default().outer),
                ..Default::default()
            };
            let sol = solve_stokes(&problem, tol).map_err(solver)?;
            let velocity = centroid_values(&mesh, &sol.u_h)?
                .into_iter()
                .map(|v| match v {
                    FieldValue::Vector(v) => v,
                    FieldValue::Scalar(s) => [s, 0.0],
                })
                .collect();
            fields.push(VtkField::cell_vector("velocity", velocity));
            fields.push(VtkField::cell_scalar(
                "pressure",
                sol.p_h.coefficients.clone(),
            ));
            fields.push(VtkField::cell_scalar(
                "divergence",
                cr_divergence(&mesh, &sol.u_h),
            ));
        }
    }
    export_vtk(&args.out, &mesh, &fields).map_err(usage)
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Poisson(args) => sweep(Equation::Poisson, &args),
        Command::Stokes(args) => sweep(Equation::Stokes, &args),
        Command::MeshReport(args) => {
            let rows = run_mesh_report(args.mesh.into(), &args.n).map_err(usage)?;
            emit(
                &render_mesh_report(&rows, args.format.into()),
                args.out.as_ref(),
            )
        }
        Command::Verify(args) => {
            let report = run_verify_with(VerifyOptions {
                beta: args.beta,
                ..Default::default()
            });
            print!("{}", report.render());
            if report.passed() {
                Ok(())
            } else {
                let names: Vec<&str> = report.failures().map(|c| c.name).collect();
                Err(Failure {
                    code: EXIT_VERIFY,
                    error: anyhow!("failed checks: {}", names.join(", ")),
                })
            }
        }
        Command::ExportVtk(args) => export(&args),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
