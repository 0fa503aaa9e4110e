//! Convergence sweeps driven by a JSON configuration.

use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::analysis::{self, fill_rates, records_to_csv, records_to_markdown, ErrorRecord};
use crate::error::{FemError, Result};
use crate::field::ScalarField;
use crate::linalg::InnerSolver;
use crate::mesh::{generate_structured, semi_regularity_report, MeshFamily, SemiRegularityReport};
use crate::poisson::{solve_poisson, PoissonProblem};
use crate::stokes::{solve_stokes, Example, StokesProblem, StokesTolerances, Variant};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Equation {
    Poisson,
    Stokes,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Markdown,
}

impl FromStr for OutputFormat {
    type Err = FemError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Self::Csv),
            "markdown" | "md" => Ok(Self::Markdown),
            other => Err(FemError::InvalidArgument(format!(
                "unknown format `{other}`"
            ))),
        }
    }
}

/// Manufactured solutions for the Poisson problem.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PoissonExample {
    /// `sin(πx) sin(πy)`, homogeneous boundary data.
    SinProduct,
    /// `sin(πx) cos(πy)`, nonzero boundary data.
    SinCos,
    /// `x(1 - x)`, constant load.
    Quadratic,
    /// `exp(x + 2y)`, nonzero boundary data.
    Exponential,
}

impl fmt::Display for PoissonExample {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::SinProduct => "sin-product",
            Self::SinCos => "sin-cos",
            Self::Quadratic => "quadratic",
            Self::Exponential => "exponential",
        })
    }
}

impl FromStr for PoissonExample {
    type Err = FemError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sin-product" | "sin" => Ok(Self::SinProduct),
            "sin-cos" => Ok(Self::SinCos),
            "quadratic" => Ok(Self::Quadratic),
            "exponential" | "exp" => Ok(Self::Exponential),
            other => Err(FemError::UnknownExample(other.to_string())),
        }
    }
}

impl PoissonExample {
    pub fn field(self) -> ScalarField {
        match self {
            Self::SinProduct => ScalarField::new(|p| (PI * p.x).sin() * (PI * p.y).sin())
                .with_gradient(|p| {
                    [
                        PI * (PI * p.x).cos() * (PI * p.y).sin(),
                        PI * (PI * p.x).sin() * (PI * p.y).cos(),
                    ]
                })
                .with_laplacian(|p| -2.0 * PI * PI * (PI * p.x).sin() * (PI * p.y).sin())
                .with_hessian(|p| {
                    let (s1, c1, s2, c2) = (
                        (PI * p.x).sin(),
                        (PI * p.x).cos(),
                        (PI * p.y).sin(),
                        (PI * p.y).cos(),
                    );
                    let pp = PI * PI;
                    [[-pp * s1 * s2, pp * c1 * c2], [pp * c1 * c2, -pp * s1 * s2]]
                }),
            Self::SinCos => ScalarField::new(|p| (PI * p.x).sin() * (PI * p.y).cos())
                .with_gradient(|p| {
                    [
                        PI * (PI * p.x).cos() * (PI * p.y).cos(),
                        -PI * (PI * p.x).sin() * (PI * p.y).sin(),
                    ]
                })
                .with_laplacian(|p| -2.0 * PI * PI * (PI * p.x).sin() * (PI * p.y).cos())
                .with_hessian(|p| {
                    let (s1, c1, s2, c2) = (
                        (PI * p.x).sin(),
                        (PI * p.x).cos(),
                        (PI * p.y).sin(),
                        (PI * p.y).cos(),
                    );
                    let pp = PI * PI;
                    [
                        [-pp * s1 * c2, -pp * c1 * s2],
                        [-pp * c1 * s2, -pp * s1 * c2],
                    ]
                }),
            Self::Quadratic => ScalarField::new(|p| p.x * (1.0 - p.x))
                .with_gradient(|p| [1.0 - 2.0 * p.x, 0.0])
                .with_laplacian(|_| -2.0)
                .with_hessian(|_| [[-2.0, 0.0], [0.0, 0.0]]),
            Self::Exponential => {
                let e = |p: crate::mesh::Point2| (p.x + 2.0 * p.y).exp();
                ScalarField::new(e)
                    .with_gradient(move |p| [e(p), 2.0 * e(p)])
                    .with_laplacian(move |p| 5.0 * e(p))
                    .with_hessian(move |p| [[e(p), 2.0 * e(p)], [2.0 * e(p), 4.0 * e(p)]])
            }
        }
    }
}

/// Solver stopping tolerances. `outer` stops the Poisson CG and the Uzawa
/// loop; `inner` stops the velocity solves inside Uzawa when they use CG.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub outer: f64,
    pub inner: f64,
    #[serde(default)]
    pub inner_solver: InnerSolver,
}

impl Default for Tolerances {
    fn default() -> Self {
        let d = StokesTolerances::default();
        Self {
            outer: d.outer,
            inner: d.inner,
            inner_solver: d.inner_solver,
        }
    }
}

pub const DEFAULT_N: [usize; 4] = [16, 32, 64, 128];
pub const EXTENDED_N: [usize; 2] = [256, 512];

fn one() -> f64 {
    1.0
}

fn default_n() -> Vec<usize> {
    DEFAULT_N.to_vec()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub equation: Equation,
    pub mesh: MeshFamily,
    #[serde(default = "default_n")]
    pub n: Vec<usize>,
    #[serde(default = "one")]
    pub nu: f64,
    #[serde(default = "one")]
    pub eta: f64,
    /// `example1`/`example2` for Stokes, `sin-product`/`exponential` for Poisson.
    pub example: String,
    #[serde(default)]
    pub variant: Variant,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub format: OutputFormat,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn stokes(mesh: MeshFamily, example: Example, nu: f64, eta: f64, n: Vec<usize>) -> Self {
        Self {
            equation: Equation::Stokes,
            mesh,
            n,
            nu,
            eta,
            example: example.to_string(),
            variant: Variant::Robust,
            tolerances: Tolerances::default(),
            format: OutputFormat::Csv,
            output: None,
        }
    }

    pub fn poisson(mesh: MeshFamily, example: PoissonExample, n: Vec<usize>) -> Self {
        Self {
            equation: Equation::Poisson,
            example: example.to_string(),
            ..Self::stokes(mesh, Example::Example1, 1.0, 1.0, n)
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| FemError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let first = *self
            .n
            .first()
            .ok_or_else(|| FemError::Config("empty n list".into()))?;
        if first == 0 {
            return Err(FemError::Config("n must be positive".into()));
        }
        for w in self.n.windows(2) {
            if w[1] <= w[0] {
                return Err(FemError::Config(format!(
                    "n list must increase strictly, got {} then {}",
                    w[0], w[1]
                )));
            }
        }
        for &n in &self.n {
            if n % first != 0 || !(n / first).is_power_of_two() {
                return Err(FemError::Config(format!(
                    "n = {n} is not a power-of-two multiple of {first}"
                )));
            }
        }
        for (name, v) in [
            ("nu", self.nu),
            ("eta", self.eta),
            ("outer tolerance", self.tolerances.outer),
            ("inner tolerance", self.tolerances.inner),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(FemError::Config(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        match self.equation {
            Equation::Stokes => self.example.parse::<Example>().map(|_| ()),
            Equation::Poisson => self.example.parse::<PoissonExample>().map(|_| ()),
        }
    }
}

fn run_one(config: &ExperimentConfig, n: usize) -> Result<ErrorRecord> {
    let mesh = generate_structured(config.mesh, n)?;
    let mut record = match config.equation {
        Equation::Stokes => {
            let example: Example = config.example.parse()?;
            let problem = StokesProblem::from_example(&mesh, example, config.nu, config.eta)?
                .with_variant(config.variant);
            let tol = StokesTolerances {
                outer: config.tolerances.outer,
                inner: config.tolerances.inner,
                inner_solver: config.tolerances.inner_solver,
            };
            let sol = solve_stokes(&problem, tol)?;
            let (u, p) = problem
                .exact
                .as_ref()
                .expect("catalogued examples carry exact fields");
            let mut r = analysis::relative_errors(&mesh, u, p, &sol.u_h, &sol.p_h)?;
            r.solver_failed = !sol.report.converged;
            r
        }
        Equation::Poisson => {
            let example: PoissonExample = config.example.parse()?;
            let u = example.field();
            let problem = PoissonProblem::manufactured(&mesh, u.clone())?;
            let sol = solve_poisson(&problem, config.tolerances.outer)?;
            let (w, l2) = analysis::relative_velocity_errors(&mesh, &[&u], &sol.u_h)?;
            let mut r = ErrorRecord::new(n, mesh.h, w, l2, None);
            r.solver_failed = !sol.report.converged;
            r
        }
    };
    record.n = n;
    record.h = mesh.h;
    Ok(record)
}

/// Runs the sweep; rows whose solver failed to converge are kept and flagged.
pub fn run_convergence(config: &ExperimentConfig) -> Result<Vec<ErrorRecord>> {
    config.validate()?;
    let mut rows = config
        .n
        .iter()
        .map(|&n| run_one(config, n))
        .collect::<Result<Vec<_>>>()?;
    fill_rates(&mut rows);
    Ok(rows)
}

pub fn render_table(rows: &[ErrorRecord], format: OutputFormat) -> String {
    match format {
        OutputFormat::Csv => records_to_csv(rows),
        OutputFormat::Markdown => records_to_markdown(rows),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeshReportRow {
    pub n: usize,
    pub h: f64,
    #[serde(flatten)]
    pub stats: SemiRegularityReport,
}

pub fn run_mesh_report(family: MeshFamily, ns: &[usize]) -> Result<Vec<MeshReportRow>> {
    ns.iter()
        .map(|&n| {
            let mesh = generate_structured(family, n)?;
            Ok(MeshReportRow {
                n,
                h: mesh.h,
                stats: semi_regularity_report(&mesh),
            })
        })
        .collect()
}

pub fn render_mesh_report(rows: &[MeshReportRow], format: OutputFormat) -> String {
    let header = ["N", "h", "max H/h", "max angle", "max aspect"];
    let cells = |r: &MeshReportRow| {
        [
            r.n.to_string(),
            format!("{:.5e}", r.h),
            format!("{:.5e}", r.stats.max_shape_parameter),
            format!("{:.5e}", r.stats.max_angle_deg),
            format!("{:.5e}", r.stats.max_aspect_ratio),
        ]
    };
    let mut out = String::new();
    match format {
        OutputFormat::Csv => {
            out.push_str(&header.join(","));
            out.push('\n');
            for r in rows {
                out.push_str(&cells(r).join(","));
                out.push('\n');
            }
        }
        OutputFormat::Markdown => {
            out.push_str(&format!(
                "| {} |\n|{}\n",
                header.join(" | "),
                "---|".repeat(header.len())
            ));
            for r in rows {
                out.push_str(&format!("| {} |\n", cells(r).join(" | ")));
            }
        }
    }
    out
}
