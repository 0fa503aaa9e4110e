//! Self-check suite run by `wopsip verify`.

use std::f64::consts::PI;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::analysis::{
    convergence_rate, fitted_slope, green_formula_residual, inf_sup_constant, norm_11,
    norm_broken_h1, records_from_csv, records_to_csv, seminorm_penalty, ErrorRecord,
};
use crate::error::Result;
use crate::experiment::{run_convergence, ExperimentConfig, PoissonExample};
use crate::fespace::{interpolate_rt, rt_divergence, CrElement, DiscreteFunction, SpaceTag};
use crate::field::{ScalarField, VectorField};
use crate::linalg::cg;
use crate::mesh::{generate_structured, Mesh2D, MeshFamily, Point2};
use crate::poisson::{assemble_poisson, solve_poisson, PoissonProblem};
use crate::quadrature::integrate_triangle;
use crate::stokes::{
    assemble_stokes, solve_stokes, BoundaryFlux, StokesProblem, StokesTolerances, Variant,
};

#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct VerifyReport {
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn render(&self) -> String {
        self.checks
            .iter()
            .map(|c| {
                format!(
                    "{} {}: {}\n",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.detail
                )
            })
            .collect()
    }
}

/// Knobs for mutation testing of the suite itself.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VerifyOptions {
    /// Penalty exponent used by the Poisson rate check.
    pub beta: f64,
    pub seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            beta: 1.0,
            seed: 20240917,
        }
    }
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Largest relative defect of `a_h(v, v) = |v|²_{1,1}` over `samples` random CR functions.
pub fn poisson_coercivity_defect(mesh: &Mesh2D, samples: usize, seed: u64) -> Result<f64> {
    let problem = PoissonProblem::new(mesh, ScalarField::constant(0.0), ScalarField::constant(0.0));
    let a = assemble_poisson(&problem)?.matrix;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let v = DiscreteFunction::new(
            mesh,
            SpaceTag::CrScalar,
            random_vec(&mut rng, mesh.num_edges()),
        )?;
        let lhs = a.quadratic_form(&v.coefficients);
        let rhs = norm_11(mesh, &v).powi(2);
        worst = worst.max((lhs - rhs).abs() / rhs);
    }
    Ok(worst)
}

/// Largest relative defect of `vᵀ A v = ν Σ_i (|v_i|²_{H¹} + η |v_i|²_1)`.
pub fn stokes_coercivity_defect(
    mesh: &Mesh2D,
    nu: f64,
    eta: f64,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    let zero = VectorField::constant(0.0, 0.0);
    let problem = StokesProblem::new(mesh, nu, eta, zero.clone(), zero)?;
    let a = assemble_stokes(&problem)?.velocity;
    let ne = mesh.num_edges();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let v = random_vec(&mut rng, 2 * ne);
        let lhs = a.quadratic_form(&v);
        let mut rhs = 0.0;
        for c in 0..2 {
            let vc =
                DiscreteFunction::new(mesh, SpaceTag::CrScalar, v[c * ne..(c + 1) * ne].to_vec())?;
            rhs +=
                norm_broken_h1(mesh, &vc).powi(2) + eta * seminorm_penalty(mesh, &vc, 1.0).powi(2);
        }
        rhs *= nu;
        worst = worst.max((lhs - rhs).abs() / rhs);
    }
    Ok(worst)
}

/// `max_T |div(I^RT v)|_T - mean_T(div v)|` for the given field.
pub fn commuting_defect(mesh: &Mesh2D, v: &VectorField) -> Result<f64> {
    let div = rt_divergence(mesh, &interpolate_rt(mesh, v));
    let mut worst = 0.0f64;
    for (t, d) in div.iter().enumerate() {
        let pts = mesh.element_points(t);
        let mut integral = 0.0;
        for (x, w) in crate::quadrature::TRIANGLE_DEGREE5.map(&pts) {
            integral += w * v.divergence(x)?;
        }
        worst = worst.max((d - integral / mesh.geometry[t].area).abs());
    }
    Ok(worst)
}

/// Relative change of the discrete velocity, `(robust, plain)`, when `∇φ` is
/// added to a Stokes load on a Uniform mesh.
///
/// The robust velocity is invariant when the robust load keeps boundary
/// fluxes and `φ` is constant on the boundary with that constant equal to its
/// mean. Zeroing the boundary fluxes loses the invariance on boundary cells.
pub fn pressure_robustness_shift(
    n: usize,
    nu: f64,
    flux: BoundaryFlux,
    phi_gradient: &VectorField,
) -> Result<(f64, f64)> {
    let mesh = generate_structured(MeshFamily::Uniform, n)?;
    let u = VectorField::new(
        ScalarField::new(|p| (PI * p.x).sin() * (PI * p.y).cos()),
        ScalarField::new(|p| -(PI * p.x).cos() * (PI * p.y).sin()),
    );
    let base = move |p: Point2| {
        let s = 2.0 * nu * PI * PI;
        [
            s * (PI * p.x).sin() * (PI * p.y).cos(),
            -s * (PI * p.x).cos() * (PI * p.y).sin(),
        ]
    };
    let f0 = VectorField::new(
        ScalarField::new(move |p| base(p)[0]),
        ScalarField::new(move |p| base(p)[1]),
    );
    let (gx, gy) = (
        phi_gradient.components[0].clone(),
        phi_gradient.components[1].clone(),
    );
    let f1 = VectorField::new(
        ScalarField::new(move |p| base(p)[0] + gx.value(p)),
        ScalarField::new(move |p| base(p)[1] + gy.value(p)),
    );
    let mut shifts = [0.0; 2];
    for (k, variant) in [Variant::Robust, Variant::Plain].into_iter().enumerate() {
        let solve = |f: &VectorField| -> Result<Vec<f64>> {
            let problem = StokesProblem::new(&mesh, nu, 1.0, f.clone(), u.clone())?
                .with_variant(variant)
                .with_boundary_flux(flux);
            Ok(solve_stokes(
                &problem,
                StokesTolerances {
                    outer: 1e-13,
                    inner: 1e-14,
                    ..Default::default()
                },
            )?
            .u_h
            .coefficients)
        };
        let (a, b) = (solve(&f0)?, solve(&f1)?);
        let diff: f64 = a
            .iter()
            .zip(&b)
            .map(|(x, y)| (x - y).powi(2))
            .sum::<f64>()
            .sqrt();
        let norm: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        shifts[k] = diff / norm;
    }
    Ok((shifts[0], shifts[1]))
}

/// `∇φ` for `φ = x(1-x)(2x-1)y(1-y)`, zero on the boundary with zero mean.
pub fn bubble_gradient() -> VectorField {
    VectorField::new(
        ScalarField::new(|p| (-6.0 * p.x * p.x + 6.0 * p.x - 1.0) * p.y * (1.0 - p.y)),
        ScalarField::new(|p| p.x * (1.0 - p.x) * (2.0 * p.x - 1.0) * (1.0 - 2.0 * p.y)),
    )
}

/// Fitted `(energy, L²)` slopes of a manufactured Poisson solution.
pub fn poisson_slopes(
    family: MeshFamily,
    example: PoissonExample,
    ns: &[usize],
    beta: f64,
) -> Result<(f64, f64)> {
    let u = example.field();
    let mut rows = Vec::new();
    for &n in ns {
        let mesh = generate_structured(family, n)?;
        let mut problem = PoissonProblem::manufactured(&mesh, u.clone())?;
        problem.beta = beta;
        let sol = solve_poisson(&problem, 1e-12)?;
        let (w, l2) = crate::analysis::relative_velocity_errors(&mesh, &[&u], &sol.u_h)?;
        rows.push(ErrorRecord::new(n, mesh.h, w, l2, None));
    }
    let h: Vec<f64> = rows.iter().map(|r| r.h).collect();
    let e: Vec<f64> = rows.iter().map(|r| r.err_energy).collect();
    let l: Vec<f64> = rows.iter().map(|r| r.err_l2).collect();
    Ok((fitted_slope(&h, &e)?, fitted_slope(&h, &l)?))
}

fn check(name: &'static str, f: impl FnOnce() -> Result<(bool, String)>) -> CheckResult {
    match f() {
        Ok((passed, detail)) => CheckResult {
            name,
            passed,
            detail,
        },
        Err(e) => CheckResult {
            name,
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

fn mesh_checks(out: &mut Vec<CheckResult>) {
    out.push(check("mesh topology", || {
        for family in MeshFamily::ALL {
            for n in [1, 3, 8] {
                let m = generate_structured(family, n)?;
                let euler =
                    m.num_vertices() as i64 - m.num_edges() as i64 + m.num_elements() as i64;
                let area: f64 = m.geometry.iter().map(|g| g.area).sum();
                if euler != 1 || m.boundary_edges().len() != 4 * n || (area - 1.0).abs() > 1e-12 {
                    return Ok((false, format!("{family} n={n}: V-E+T={euler}, area={area}")));
                }
            }
        }
        Ok((
            true,
            "Euler characteristic 1, 4n boundary edges, unit area".into(),
        ))
    }));
    out.push(check("uniform shape parameter", || {
        let m = generate_structured(MeshFamily::Uniform, 8)?;
        let s = crate::mesh::semi_regularity_report(&m).max_shape_parameter;
        Ok(((s - 2.0).abs() < 1e-12, format!("max H/h = {s}")))
    }));
}

fn quadrature_checks(out: &mut Vec<CheckResult>) {
    out.push(check("triangle quadrature degree 5", || {
        let reference = [
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(0.0, 1.0),
        ];
        let fact = |k: i32| (1..=k).map(f64::from).product::<f64>();
        let mut worst = 0.0f64;
        for a in 0..=5 {
            for b in 0..=(5 - a) {
                let got = integrate_triangle(&reference, |x| x.x.powi(a) * x.y.powi(b));
                let exact = fact(a) * fact(b) / fact(a + b + 2);
                worst = worst.max((got - exact).abs());
            }
        }
        Ok((worst < 1e-14, format!("max monomial error {worst:.2e}")))
    }));
    out.push(check("CR basis is nodal at edge midpoints", || {
        let el = CrElement::new([
            Point2::new(0.1, 0.0),
            Point2::new(1.0, 0.3),
            Point2::new(0.2, 0.05),
        ]);
        let mut worst = 0.0f64;
        for i in 0..3 {
            let mid = (el.points[(i + 1) % 3] + el.points[(i + 2) % 3]) * 0.5;
            for (j, v) in el.basis_values(mid).iter().enumerate() {
                worst = worst.max((v - f64::from(u8::from(i == j))).abs());
            }
        }
        Ok((worst < 1e-12, format!("max deviation {worst:.2e}")))
    }));
}

fn identity_checks(out: &mut Vec<CheckResult>, opts: VerifyOptions) {
    out.push(check("Poisson coercivity identity", || {
        let mut worst = 0.0f64;
        for family in MeshFamily::ALL {
            worst = worst.max(poisson_coercivity_defect(
                &generate_structured(family, 6)?,
                100,
                opts.seed,
            )?);
        }
        Ok((worst < 1e-12, format!("max relative defect {worst:.2e}")))
    }));
    out.push(check("Stokes coercivity identity", || {
        let mut worst = 0.0f64;
        for (nu, eta) in [(1.0, 1.0), (1e-5, 1e5)] {
            let m = generate_structured(MeshFamily::Cosine, 6)?;
            worst = worst.max(stokes_coercivity_defect(&m, nu, eta, 100, opts.seed)?);
        }
        Ok((worst < 1e-12, format!("max relative defect {worst:.2e}")))
    }));
    out.push(check("RT commuting property", || {
        let v = VectorField::new(
            ScalarField::new(|p| p.x * p.x * p.y + 0.3 * p.y)
                .with_gradient(|p| [2.0 * p.x * p.y, p.x * p.x + 0.3]),
            ScalarField::new(|p| p.y * p.y - p.x * p.y).with_gradient(|p| [-p.y, 2.0 * p.y - p.x]),
        );
        let d = commuting_defect(&generate_structured(MeshFamily::Graded, 6)?, &v)?;
        Ok((d < 1e-12, format!("max elementwise defect {d:.2e}")))
    }));
    out.push(check("discrete Green formula for RT interpolants", || {
        let mesh = generate_structured(MeshFamily::Cosine, 6)?;
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let psi = DiscreteFunction::new(
            &mesh,
            SpaceTag::CrScalar,
            random_vec(&mut rng, mesh.num_edges()),
        )?;
        let w = VectorField::new(
            ScalarField::new(|p| p.x * p.y - 0.5 * p.y * p.y),
            ScalarField::new(|p| p.x * p.x + 2.0 * p.y),
        );
        let r = green_formula_residual(&mesh, &w, &psi)?;
        Ok((r < 1e-11, format!("residual {r:.2e}")))
    }));
}

fn solver_checks(out: &mut Vec<CheckResult>, opts: VerifyOptions) {
    out.push(check("CG agrees with dense Cholesky", || {
        let mesh = generate_structured(MeshFamily::Graded, 4)?;
        let problem = PoissonProblem::new(
            &mesh,
            ScalarField::new(|p| p.x + 1.0),
            ScalarField::new(|p| p.y),
        );
        let sys = assemble_poisson(&problem)?;
        let (x, _) = cg(&sys.matrix, &sys.rhs, 1e-14, 10_000);
        let dense = sys.matrix.csr().to_dense();
        let exact = dense
            .cholesky()
            .expect("SPD")
            .solve(&DVector::from_vec(sys.rhs.clone()));
        let err = (DVector::from_vec(x) - &exact).norm() / exact.norm();
        Ok((err < 1e-10, format!("relative difference {err:.2e}")))
    }));
    out.push(check("Poisson reproduces constants", || {
        let mesh = generate_structured(MeshFamily::Cosine, 8)?;
        let sol = solve_poisson(
            &PoissonProblem::new(
                &mesh,
                ScalarField::constant(0.0),
                ScalarField::constant(2.5),
            ),
            1e-13,
        )?;
        let dev = sol
            .u_h
            .coefficients
            .iter()
            .fold(0.0f64, |m, c| m.max((c - 2.5).abs()));
        Ok((dev < 1e-9, format!("max deviation {dev:.2e}")))
    }));
    out.push(check("Poisson convergence rates", || {
        let mut detail = String::new();
        let mut ok = true;
        for family in [MeshFamily::Uniform, MeshFamily::Graded] {
            let (re, rl) =
                poisson_slopes(family, PoissonExample::SinCos, &[8, 16, 32, 64], opts.beta)?;
            ok &= (0.85..=1.15).contains(&re) && (1.8..=2.2).contains(&rl);
            detail.push_str(&format!("{family}: energy {re:.3}, L2 {rl:.3}; "));
        }
        Ok((ok, detail.trim_end_matches("; ").to_string()))
    }));
    out.push(check("pressure robustness", || {
        let (robust, plain) =
            pressure_robustness_shift(8, 1e-5, BoundaryFlux::Keep, &bubble_gradient())?;
        let ok = robust <= 1e-8 && plain >= 1e-5 && plain >= 1e3 * robust;
        Ok((
            ok,
            format!("robust shift {robust:.2e}, plain shift {plain:.2e}"),
        ))
    }));
    out.push(check("inf-sup constant positive", || {
        let betas = [2, 4]
            .iter()
            .map(|&n| inf_sup_constant(&generate_structured(MeshFamily::Uniform, n)?))
            .collect::<Result<Vec<_>>>()?;
        Ok((betas.iter().all(|b| *b > 0.1), format!("{betas:.4?}")))
    }));
}

fn plumbing_checks(out: &mut Vec<CheckResult>) {
    out.push(check("rate antisymmetry", || {
        let (a, b) = (convergence_rate(0.3, 0.07)?, convergence_rate(0.07, 0.3)?);
        Ok(((a + b).abs() < 1e-14, format!("{a} vs {b}")))
    }));
    out.push(check("table round trip and determinism", || {
        let cfg =
            ExperimentConfig::poisson(MeshFamily::Graded, PoissonExample::Exponential, vec![4, 8]);
        let again = ExperimentConfig::from_json(&cfg.to_json())?;
        let a = records_to_csv(&run_convergence(&cfg)?);
        let b = records_to_csv(&run_convergence(&again)?);
        let parsed = records_to_csv(&records_from_csv(&a)?);
        Ok((a == b && a == parsed, format!("{} bytes", a.len())))
    }));
}

pub fn run_verify_with(opts: VerifyOptions) -> VerifyReport {
    let mut checks = Vec::new();
    mesh_checks(&mut checks);
    quadrature_checks(&mut checks);
    identity_checks(&mut checks, opts);
    solver_checks(&mut checks, opts);
    plumbing_checks(&mut checks);
    VerifyReport { checks }
}

pub fn run_verify() -> VerifyReport {
    run_verify_with(VerifyOptions::default())
}
