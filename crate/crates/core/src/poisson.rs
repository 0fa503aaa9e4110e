//! Weakly over-penalised Nitsche scheme for `-Δu = f`, `u = g` on the boundary,
//! discretised with Crouzeix–Raviart elements.
//!
//! Boundary values act only through the penalty on boundary edge means:
//! `a_h(u, v) = Σ_T (∇u, ∇v)_T + Σ_F κ_F |F| ū_F v̄_F` with
//! `κ_F = h^{-2β} / ℓ_{T,F}` and `h` the global mesh size.

use crate::analysis;
use crate::error::{FemError, Result};
use crate::fespace::{interpolate_cr, CrElement, DiscreteFunction, SpaceTag};
use crate::field::ScalarField;
use crate::linalg::{cg_scaled, SolveReport, SparseSym};
use crate::mesh::{Mesh2D, Point2};
use crate::quadrature::{edge_mean, TRIANGLE_DEGREE5};

/// Penalty weight `κ_{F(β)} = h^{-2β} / ℓ_{T,F}` of a boundary edge.
pub fn kappa(mesh: &Mesh2D, edge: usize, beta: f64) -> f64 {
    mesh.h.powf(-2.0 * beta) / mesh.boundary_ell(edge)
}

/// Adds `scale * Σ_T |T| ∇θ_i·∇θ_j` for one component stored at `offset`.
pub fn push_stiffness(
    mesh: &Mesh2D,
    offset: usize,
    scale: f64,
    out: &mut Vec<(usize, usize, f64)>,
) {
    for t in 0..mesh.num_elements() {
        let el = CrElement::of(mesh, t);
        let g = el.basis_gradients();
        let dofs = mesh.element_edges[t];
        for i in 0..3 {
            for j in 0..3 {
                out.push((
                    offset + dofs[i],
                    offset + dofs[j],
                    scale * el.area * g[i].dot(g[j]),
                ));
            }
        }
    }
}

/// Adds `scale * κ_{F(β)} |F|` on the diagonal of each boundary edge dof.
pub fn push_penalty(
    mesh: &Mesh2D,
    beta: f64,
    offset: usize,
    scale: f64,
    out: &mut Vec<(usize, usize, f64)>,
) {
    for &e in mesh.boundary_edges() {
        let w = scale * kappa(mesh, e, beta) * mesh.edges[e].length;
        out.push((offset + e, offset + e, w));
    }
}

/// `∫_Ω f θ_E` for every CR basis function, by the degree-5 rule.
pub fn cr_load(mesh: &Mesh2D, f: impl Fn(Point2) -> f64) -> Vec<f64> {
    let mut b = vec![0.0; mesh.num_edges()];
    for t in 0..mesh.num_elements() {
        let el = CrElement::of(mesh, t);
        let dofs = mesh.element_edges[t];
        for (x, w) in TRIANGLE_DEGREE5.map(&el.points) {
            let fx = f(x) * w;
            let phi = el.basis_values(x);
            for i in 0..3 {
                b[dofs[i]] += fx * phi[i];
            }
        }
    }
    b
}

/// Edge means of `g` on the boundary edges, in the order of `mesh.boundary_edges()`.
pub fn boundary_means(mesh: &Mesh2D, g: &ScalarField) -> Vec<f64> {
    mesh.boundary_edges()
        .iter()
        .map(|&e| {
            let [a, b] = mesh.edges[e].endpoints.map(|v| mesh.vertices[v]);
            edge_mean(a, b, |x| g.value(x))
        })
        .collect()
}

/// Adds `scale * κ_{F(β)} |F| ḡ_F` at each boundary edge dof.
pub fn add_boundary_load(
    mesh: &Mesh2D,
    g: &ScalarField,
    beta: f64,
    offset: usize,
    scale: f64,
    rhs: &mut [f64],
) {
    for (&e, gbar) in mesh.boundary_edges().iter().zip(boundary_means(mesh, g)) {
        rhs[offset + e] += scale * kappa(mesh, e, beta) * mesh.edges[e].length * gbar;
    }
}

/// `f = -Δu`; fails if `u` has no second derivatives.
pub fn manufacture_poisson_rhs(u: &ScalarField) -> Result<ScalarField> {
    if !u.has_laplacian() {
        return Err(FemError::MissingCallback("laplacian"));
    }
    let u = u.clone();
    Ok(ScalarField::new(move |x| {
        -u.laplacian(x).expect("checked above")
    }))
}

#[derive(Clone, Debug)]
pub struct PoissonProblem<'m> {
    pub mesh: &'m Mesh2D,
    pub f: ScalarField,
    pub g: ScalarField,
    pub exact: Option<ScalarField>,
    /// Penalty exponent; the scheme uses 1.
    pub beta: f64,
}

impl<'m> PoissonProblem<'m> {
    pub fn new(mesh: &'m Mesh2D, f: ScalarField, g: ScalarField) -> Self {
        Self {
            mesh,
            f,
            g,
            exact: None,
            beta: 1.0,
        }
    }

    /// Problem with `f = -Δu`, `g = u` and `u` kept as the exact solution.
    pub fn manufactured(mesh: &'m Mesh2D, u: ScalarField) -> Result<Self> {
        let f = manufacture_poisson_rhs(&u)?;
        Ok(Self {
            mesh,
            f,
            g: u.clone(),
            exact: Some(u),
            beta: 1.0,
        })
    }
}

#[derive(Clone, Debug)]
pub struct PoissonSystem {
    pub matrix: SparseSym,
    pub rhs: Vec<f64>,
}

pub fn assemble_poisson(problem: &PoissonProblem) -> Result<PoissonSystem> {
    let mesh = problem.mesh;
    let mut t = Vec::with_capacity(9 * mesh.num_elements() + mesh.boundary_edges().len());
    push_stiffness(mesh, 0, 1.0, &mut t);
    push_penalty(mesh, problem.beta, 0, 1.0, &mut t);
    let matrix = SparseSym::assemble(mesh.num_edges(), &t)?;
    let mut rhs = cr_load(mesh, |x| problem.f.value(x));
    add_boundary_load(mesh, &problem.g, problem.beta, 0, 1.0, &mut rhs);
    Ok(PoissonSystem { matrix, rhs })
}

#[derive(Clone, Debug)]
pub struct PoissonSolution {
    pub u_h: DiscreteFunction,
    pub report: SolveReport,
    /// `|u_h|_{1,1} / (‖f‖ + |g|_1)`, a stability diagnostic.
    pub stability_ratio: f64,
}

pub fn solve_poisson(problem: &PoissonProblem, tol: f64) -> Result<PoissonSolution> {
    let mesh = problem.mesh;
    let sys = assemble_poisson(problem)?;
    let n = sys.matrix.dim();
    let (x, report) = cg_scaled(&sys.matrix, &sys.rhs, tol, 50 * n)?;
    let u_h = DiscreteFunction::new(mesh, SpaceTag::CrScalar, x)?;

    let f_norm = analysis::l2_norm(mesh, &problem.f);
    let g_h = interpolate_cr(mesh, &problem.g);
    let g_pen = analysis::seminorm_penalty(mesh, &g_h, problem.beta);
    let data = f_norm + g_pen;
    let stability_ratio = if data > 0.0 {
        analysis::norm_11(mesh, &u_h) / data
    } else {
        0.0
    };
    Ok(PoissonSolution {
        u_h,
        report,
        stability_ratio,
    })
}
