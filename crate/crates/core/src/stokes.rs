//! Nitsche scheme for the scaled Stokes problem
//! `-ν Δu + ∇p = f`, `div u = 0`, `u = g` on the boundary,
//! with CR velocities and elementwise constant pressures.
//!
//! The robust variant tests the load against the Raviart–Thomas interpolant
//! of the velocity test function (zero boundary fluxes), which makes the
//! discrete velocity insensitive to gradient forces. The plain variant tests
//! against the CR function itself.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{FemError, Result};
use crate::fespace::{CrElement, DiscreteFunction, RtElement, SpaceTag};
use crate::field::{ScalarField, VectorField};
use crate::linalg::{
    solve_saddle_scaled, CsrMatrix, InnerSolver, PressureConstraint, SaddleOptions, SaddleReport,
    SparseSym,
};
use crate::mesh::Mesh2D;
use crate::poisson::{add_boundary_load, cr_load, push_penalty, push_stiffness};
use crate::quadrature::TRIANGLE_DEGREE5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    #[default]
    Robust,
    Plain,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Robust => "robust",
            Variant::Plain => "plain",
        })
    }
}

impl FromStr for Variant {
    type Err = FemError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "robust" => Ok(Variant::Robust),
            "plain" => Ok(Variant::Plain),
            other => Err(FemError::InvalidArgument(format!(
                "unknown variant `{other}`"
            ))),
        }
    }
}

/// Treatment of boundary normal fluxes when the robust load interpolates
/// velocity test functions into RT0.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryFlux {
    /// Boundary fluxes are the edge means of the test function, like interior ones.
    #[default]
    Keep,
    /// Boundary fluxes are set to zero.
    Zero,
}

/// Pressure space used by the saddle solve.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PressureSpace {
    /// Elementwise constants with zero mean, for trial and test functions.
    #[default]
    ZeroMean,
    /// All elementwise constants; the computed pressure is shifted to zero mean afterwards.
    Full,
}

#[derive(Clone, Debug)]
pub struct StokesProblem<'m> {
    pub mesh: &'m Mesh2D,
    pub nu: f64,
    pub eta: f64,
    pub f: VectorField,
    pub g: VectorField,
    pub exact: Option<(VectorField, ScalarField)>,
    pub variant: Variant,
    pub pressure: PressureSpace,
    pub boundary_flux: BoundaryFlux,
}

impl<'m> StokesProblem<'m> {
    pub fn new(
        mesh: &'m Mesh2D,
        nu: f64,
        eta: f64,
        f: VectorField,
        g: VectorField,
    ) -> Result<Self> {
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(FemError::InvalidArgument(format!(
                "viscosity must be positive, got {nu}"
            )));
        }
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(FemError::InvalidArgument(format!(
                "penalty scale must be positive, got {eta}"
            )));
        }
        Ok(Self {
            mesh,
            nu,
            eta,
            f,
            g,
            exact: None,
            variant: Variant::Robust,
            pressure: PressureSpace::default(),
            boundary_flux: BoundaryFlux::default(),
        })
    }

    /// Problem for one of the catalogued exact solutions.
    pub fn from_example(mesh: &'m Mesh2D, example: Example, nu: f64, eta: f64) -> Result<Self> {
        let data = example_catalog(example, nu)?;
        let mut p = Self::new(mesh, nu, eta, data.f, data.u.clone())?;
        p.exact = Some((data.u, data.p));
        Ok(p)
    }

    pub fn with_variant(mut self, variant: Variant) -> Self {
        self.variant = variant;
        self
    }

    pub fn with_boundary_flux(mut self, flux: BoundaryFlux) -> Self {
        self.boundary_flux = flux;
        self
    }

    pub fn with_pressure_space(mut self, pressure: PressureSpace) -> Self {
        self.pressure = pressure;
        self
    }

    /// `∫_∂Ω g·n`, which must vanish for a well-posed problem.
    pub fn boundary_flux(&self) -> f64 {
        let mesh = self.mesh;
        mesh.boundary_edges()
            .iter()
            .map(|&e| {
                let edge = &mesh.edges[e];
                let [a, b] = edge.endpoints.map(|v| mesh.vertices[v]);
                crate::quadrature::integrate_edge(a, b, |x| self.g.value_point(x).dot(edge.normal))
            })
            .sum()
    }
}

/// Velocity block `K + η P` for one component, unscaled by `ν`.
pub fn push_velocity_block(
    mesh: &Mesh2D,
    eta: f64,
    offset: usize,
    scale: f64,
    out: &mut Vec<(usize, usize, f64)>,
) {
    push_stiffness(mesh, offset, scale, out);
    push_penalty(mesh, 1.0, offset, scale * eta, out);
}

/// `B(T, (c, E)) = -∫_T ∂_c θ_E`.
pub fn divergence_matrix(mesh: &Mesh2D) -> CsrMatrix {
    let ne = mesh.num_edges();
    let mut t = Vec::with_capacity(6 * mesh.num_elements());
    for k in 0..mesh.num_elements() {
        let el = CrElement::of(mesh, k);
        let g = el.basis_gradients();
        for (i, &e) in mesh.element_edges[k].iter().enumerate() {
            t.push((k, e, -el.area * g[i].x));
            t.push((k, ne + e, -el.area * g[i].y));
        }
    }
    CsrMatrix::from_triplets(mesh.num_elements(), 2 * ne, &t).expect("valid indices")
}

/// `(f, θ_E e_c)` for every velocity dof.
pub fn plain_load(mesh: &Mesh2D, f: &VectorField) -> Vec<f64> {
    let mut b = cr_load(mesh, |x| f.components[0].value(x));
    b.extend(cr_load(mesh, |x| f.components[1].value(x)));
    b
}

/// `(f, I^{RT}(θ_E e_c))` for every velocity dof.
///
/// The RT interpolant of `θ_E e_c` is `|E| n_E[c] ψ_E`; with
/// [`BoundaryFlux::Zero`] it is dropped on boundary edges.
pub fn robust_load(mesh: &Mesh2D, f: &VectorField, flux: BoundaryFlux) -> Vec<f64> {
    let ne = mesh.num_edges();
    let mut flux_moment = vec![0.0; ne];
    for t in 0..mesh.num_elements() {
        let rt = RtElement::of(mesh, t);
        for (x, w) in TRIANGLE_DEGREE5.map(&rt.points) {
            let fx = f.value_point(x);
            for (i, &e) in mesh.element_edges[t].iter().enumerate() {
                if flux == BoundaryFlux::Keep || !mesh.edges[e].is_boundary() {
                    flux_moment[e] += w * fx.dot(rt.basis_value(i, x));
                }
            }
        }
    }
    let mut b = vec![0.0; 2 * ne];
    for (e, edge) in mesh.edges.iter().enumerate() {
        b[e] = edge.length * edge.normal.x * flux_moment[e];
        b[ne + e] = edge.length * edge.normal.y * flux_moment[e];
    }
    b
}

#[derive(Clone, Debug)]
pub struct StokesSystem {
    /// `ν (K + η P)` for both components.
    pub velocity: SparseSym,
    pub divergence: CsrMatrix,
    pub rhs: Vec<f64>,
}

pub fn assemble_stokes(problem: &StokesProblem) -> Result<StokesSystem> {
    let mesh = problem.mesh;
    let ne = mesh.num_edges();
    let mut t = Vec::with_capacity(18 * mesh.num_elements());
    for c in 0..2 {
        push_velocity_block(mesh, problem.eta, c * ne, problem.nu, &mut t);
    }
    let velocity = SparseSym::assemble(2 * ne, &t)?;
    let mut rhs = match problem.variant {
        Variant::Robust => robust_load(mesh, &problem.f, problem.boundary_flux),
        Variant::Plain => plain_load(mesh, &problem.f),
    };
    for c in 0..2 {
        add_boundary_load(
            mesh,
            &problem.g.components[c],
            1.0,
            c * ne,
            problem.nu * problem.eta,
            &mut rhs,
        );
    }
    Ok(StokesSystem {
        velocity,
        divergence: divergence_matrix(mesh),
        rhs,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StokesTolerances {
    pub outer: f64,
    pub inner: f64,
    #[serde(default)]
    pub inner_solver: InnerSolver,
}

impl Default for StokesTolerances {
    fn default() -> Self {
        Self {
            outer: 1e-10,
            inner: 1e-12,
            inner_solver: InnerSolver::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct StokesSolution {
    pub u_h: DiscreteFunction,
    pub p_h: DiscreteFunction,
    pub report: SaddleReport,
    /// `max_T |div u_h|_T|`.
    pub max_divergence: f64,
}

pub fn solve_stokes(problem: &StokesProblem, tol: StokesTolerances) -> Result<StokesSolution> {
    let mesh = problem.mesh;
    let sys = assemble_stokes(problem)?;
    let areas: Vec<f64> = mesh.geometry.iter().map(|g| g.area).collect();
    let constraint = match problem.pressure {
        PressureSpace::ZeroMean => PressureConstraint::WeightedZeroMean(areas.clone()),
        PressureSpace::Full => PressureConstraint::None,
    };
    let opts =
        SaddleOptions::new(tol.outer, tol.inner, constraint).with_inner_solver(tol.inner_solver);
    let g = vec![0.0; mesh.num_elements()];
    let (u, p, report) =
        solve_saddle_scaled(&sys.velocity, &sys.divergence, &sys.rhs, &g, &areas, &opts)?;
    let p = crate::linalg::project_zero_mean(&p, &areas);
    let u_h = DiscreteFunction::new(mesh, SpaceTag::CrVector, u)?;
    let max_divergence = crate::fespace::cr_divergence(mesh, &u_h)
        .iter()
        .fold(0.0f64, |m, d| m.max(d.abs()));
    Ok(StokesSolution {
        u_h,
        p_h: DiscreteFunction::new(mesh, SpaceTag::P0Element, p)?,
        report,
        max_divergence,
    })
}

/// `f = -ν Δu + ∇p`.
pub fn manufacture_stokes_rhs(u: &VectorField, p: &ScalarField, nu: f64) -> Result<VectorField> {
    for c in &u.components {
        if !c.has_laplacian() {
            return Err(FemError::MissingCallback("laplacian"));
        }
    }
    if !p.has_gradient() {
        return Err(FemError::MissingCallback("gradient"));
    }
    let comp = |i: usize| {
        let (u, p) = (u.components[i].clone(), p.clone());
        ScalarField::new(move |x| {
            -nu * u.laplacian(x).expect("checked") + p.gradient(x).expect("checked")[i]
        })
    };
    Ok(VectorField::new(comp(0), comp(1)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Example {
    /// Smooth divergence-free trigonometric velocity.
    Example1,
    /// Rigid rotation with a strong polynomial pressure.
    Example2,
}

impl fmt::Display for Example {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Example::Example1 => "example1",
            Example::Example2 => "example2",
        })
    }
}

impl FromStr for Example {
    type Err = FemError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_', ' '], "").as_str() {
            "example1" | "1" => Ok(Example::Example1),
            "example2" | "2" => Ok(Example::Example2),
            other => Err(FemError::UnknownExample(other.to_string())),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ExampleData {
    pub u: VectorField,
    pub p: ScalarField,
    pub f: VectorField,
}

pub fn example_catalog(example: Example, nu: f64) -> Result<ExampleData> {
    let (u, p) = match example {
        Example::Example1 => {
            let sc = |x: f64, y: f64| (PI * x).sin() * (PI * y).cos();
            let cs = |x: f64, y: f64| (PI * x).cos() * (PI * y).sin();
            let pi2 = PI * PI;
            let u1 = ScalarField::new(move |q| sc(q.x, q.y))
                .with_gradient(move |q| {
                    [
                        PI * (PI * q.x).cos() * (PI * q.y).cos(),
                        -PI * (PI * q.x).sin() * (PI * q.y).sin(),
                    ]
                })
                .with_laplacian(move |q| -2.0 * pi2 * sc(q.x, q.y))
                .with_hessian(move |q| {
                    let (a, b) = (sc(q.x, q.y), cs(q.x, q.y));
                    [[-pi2 * a, -pi2 * b], [-pi2 * b, -pi2 * a]]
                });
            let u2 = ScalarField::new(move |q| -cs(q.x, q.y))
                .with_gradient(move |q| {
                    [
                        PI * (PI * q.x).sin() * (PI * q.y).sin(),
                        -PI * (PI * q.x).cos() * (PI * q.y).cos(),
                    ]
                })
                .with_laplacian(move |q| 2.0 * pi2 * cs(q.x, q.y))
                .with_hessian(move |q| {
                    let (a, b) = (sc(q.x, q.y), cs(q.x, q.y));
                    [[pi2 * b, pi2 * a], [pi2 * a, pi2 * b]]
                });
            let p = ScalarField::new(move |q| sc(q.x, q.y)).with_gradient(move |q| {
                [
                    PI * (PI * q.x).cos() * (PI * q.y).cos(),
                    -PI * (PI * q.x).sin() * (PI * q.y).sin(),
                ]
            });
            (VectorField::new(u1, u2), p)
        }
        Example::Example2 => {
            let u = VectorField::new(
                ScalarField::affine(0.5, 0.0, -1.0),
                ScalarField::affine(-0.5, 1.0, 0.0),
            );
            let p = ScalarField::new(|q| 1e5 * (1.0 - q.y).powi(3) - 1e5 / 4.0)
                .with_gradient(|q| [0.0, -3e5 * (1.0 - q.y).powi(2)]);
            (u, p)
        }
    };
    let f = manufacture_stokes_rhs(&u, &p, nu)?;
    Ok(ExampleData { u, p, f })
}
