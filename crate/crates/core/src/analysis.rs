//! Discrete norms, error metrics and convergence rates.

use std::fmt::Write as _;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{FemError, Result};
use crate::fespace::{interpolate_rt, CrElement, DiscreteFunction, RtElement, SpaceTag};
use crate::field::{ScalarField, VectorField};
use crate::linalg::CsrMatrix;
use crate::mesh::Mesh2D;
use crate::poisson::{kappa, push_penalty, push_stiffness};
use crate::quadrature::{edge_mean, integrate_edge, integrate_triangle, TRIANGLE_DEGREE5};

fn components(v: &DiscreteFunction) -> usize {
    match v.space {
        SpaceTag::CrVector => 2,
        _ => 1,
    }
}

fn require_cr(v: &DiscreteFunction) {
    assert!(
        matches!(v.space, SpaceTag::CrScalar | SpaceTag::CrVector),
        "expected a CR function, got {:?}",
        v.space
    );
}

/// `‖f‖_{L²(Ω)}`.
pub fn l2_norm(mesh: &Mesh2D, f: &ScalarField) -> f64 {
    (0..mesh.num_elements())
        .map(|t| integrate_triangle(&mesh.element_points(t), |x| f.value(x).powi(2)))
        .sum::<f64>()
        .sqrt()
}

/// Broken `H¹` seminorm of a CR function, summed over components.
pub fn norm_broken_h1(mesh: &Mesh2D, v: &DiscreteFunction) -> f64 {
    require_cr(v);
    let mut s = 0.0;
    for t in 0..mesh.num_elements() {
        let el = CrElement::of(mesh, t);
        for c in 0..components(v) {
            let g = el.gradient(&v.cr_local(mesh, t, c));
            s += el.area * g.dot(g);
        }
    }
    s.sqrt()
}

/// `|v|_β = (Σ_F κ_{F(β)} |F| (Π_F v)²)^{1/2}` over boundary edges, summed over components.
pub fn seminorm_penalty(mesh: &Mesh2D, v: &DiscreteFunction, beta: f64) -> f64 {
    require_cr(v);
    let ne = mesh.num_edges();
    let mut s = 0.0;
    for &e in mesh.boundary_edges() {
        let w = kappa(mesh, e, beta) * mesh.edges[e].length;
        for c in 0..components(v) {
            s += w * v.coefficients[c * ne + e].powi(2);
        }
    }
    s.sqrt()
}

/// `|v|_{1,1} = (|v|²_{H¹(T_h)} + |v|²_1)^{1/2}`.
pub fn norm_11(mesh: &Mesh2D, v: &DiscreteFunction) -> f64 {
    norm_broken_h1(mesh, v).hypot(seminorm_penalty(mesh, v, 1.0))
}

/// `|w|_W = (Σ_i |w_i|²_{1,1})^{1/2}` for a vector CR function.
pub fn norm_w(mesh: &Mesh2D, v: &DiscreteFunction) -> Result<f64> {
    if v.space != SpaceTag::CrVector {
        return Err(FemError::InvalidArgument(format!(
            "expected a vector CR function, got {:?}",
            v.space
        )));
    }
    Ok(norm_11(mesh, v))
}

/// Squared pieces of the energy norm of `u - v_h`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EnergyParts {
    pub broken_h1_sq: f64,
    pub penalty_sq: f64,
}

impl EnergyParts {
    pub fn total(&self) -> f64 {
        (self.broken_h1_sq + self.penalty_sq).sqrt()
    }

    pub fn broken_h1(&self) -> f64 {
        self.broken_h1_sq.sqrt()
    }
}

fn check_components(exact: &[&ScalarField], v_h: Option<&DiscreteFunction>) -> Result<()> {
    if let Some(v) = v_h {
        require_cr(v);
        if components(v) != exact.len() {
            return Err(FemError::DimensionMismatch(format!(
                "{} exact components against {:?}",
                exact.len(),
                v.space
            )));
        }
    }
    Ok(())
}

/// Energy pieces of `u - v_h` (or of `u` alone when `v_h` is `None`):
/// broken `H¹` by quadrature with the exact gradient, penalty part from edge means.
pub fn energy_difference(
    mesh: &Mesh2D,
    exact: &[&ScalarField],
    v_h: Option<&DiscreteFunction>,
    beta: f64,
) -> Result<EnergyParts> {
    check_components(exact, v_h)?;
    let ne = mesh.num_edges();
    let mut parts = EnergyParts::default();
    for t in 0..mesh.num_elements() {
        let el = CrElement::of(mesh, t);
        for (c, u) in exact.iter().enumerate() {
            let gh = v_h.map_or(Default::default(), |v| el.gradient(&v.cr_local(mesh, t, c)));
            for (x, w) in TRIANGLE_DEGREE5.map(&el.points) {
                let g = u.gradient(x)?;
                parts.broken_h1_sq += w * ((g[0] - gh.x).powi(2) + (g[1] - gh.y).powi(2));
            }
        }
    }
    for &e in mesh.boundary_edges() {
        let [a, b] = mesh.edges[e].endpoints.map(|v| mesh.vertices[v]);
        let w = kappa(mesh, e, beta) * mesh.edges[e].length;
        for (c, u) in exact.iter().enumerate() {
            let mean =
                edge_mean(a, b, |x| u.value(x)) - v_h.map_or(0.0, |v| v.coefficients[c * ne + e]);
            parts.penalty_sq += w * mean * mean;
        }
    }
    Ok(parts)
}

/// `‖u - v_h‖_{L²}` (or `‖u‖` when `v_h` is `None`) over all components.
pub fn l2_difference(
    mesh: &Mesh2D,
    exact: &[&ScalarField],
    v_h: Option<&DiscreteFunction>,
) -> Result<f64> {
    check_components(exact, v_h)?;
    let mut s = 0.0;
    for t in 0..mesh.num_elements() {
        let el = CrElement::of(mesh, t);
        for (c, u) in exact.iter().enumerate() {
            let local = v_h.map(|v| v.cr_local(mesh, t, c));
            for (x, w) in TRIANGLE_DEGREE5.map(&el.points) {
                let vh = local.map_or(0.0, |l| el.value(&l, x));
                s += w * (u.value(x) - vh).powi(2);
            }
        }
    }
    Ok(s.sqrt())
}

/// `‖p - p_h‖_{L²}` for an elementwise constant `p_h` (or `‖p‖`).
pub fn p0_l2_difference(
    mesh: &Mesh2D,
    p: &ScalarField,
    p_h: Option<&DiscreteFunction>,
) -> Result<f64> {
    if let Some(q) = p_h {
        if q.space != SpaceTag::P0Element {
            return Err(FemError::InvalidArgument(format!(
                "expected P0 pressure, got {:?}",
                q.space
            )));
        }
    }
    let mut s = 0.0;
    for t in 0..mesh.num_elements() {
        let c = p_h.map_or(0.0, |q| q.coefficients[t]);
        s += integrate_triangle(&mesh.element_points(t), |x| (p.value(x) - c).powi(2));
    }
    Ok(s.sqrt())
}

/// `log2(e_N / e_2N)`.
pub fn convergence_rate(e_n: f64, e_2n: f64) -> Result<f64> {
    if !(e_n > 0.0 && e_2n > 0.0) || !e_n.is_finite() || !e_2n.is_finite() {
        return Err(FemError::UndefinedRate(e_n, e_2n));
    }
    Ok((e_n / e_2n).log2())
}

/// Least-squares slope of `log e` against `log h`.
pub fn fitted_slope(h: &[f64], e: &[f64]) -> Result<f64> {
    if h.len() != e.len() || h.len() < 2 {
        return Err(FemError::InvalidArgument(
            "slope fit needs at least two matching samples".into(),
        ));
    }
    if let Some(&bad) = h.iter().chain(e).find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(FemError::UndefinedRate(bad, bad));
    }
    let lx: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = e.iter().map(|v| v.ln()).collect();
    let k = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / k, ly.iter().sum::<f64>() / k);
    let num: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let den: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    Ok(num / den)
}

/// One row of a convergence table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub n: usize,
    pub h: f64,
    /// `|u - u_h|_{1,1} / |u|_{H¹}` (vector case: the `W` norm).
    pub err_energy: f64,
    pub err_l2: f64,
    pub err_pressure: Option<f64>,
    pub rate_energy: Option<f64>,
    pub rate_l2: Option<f64>,
    pub rate_pressure: Option<f64>,
    /// Set when the solver did not converge for this row.
    #[serde(default)]
    pub solver_failed: bool,
}

impl ErrorRecord {
    pub fn new(n: usize, h: f64, err_energy: f64, err_l2: f64, err_pressure: Option<f64>) -> Self {
        Self {
            n,
            h,
            err_energy,
            err_l2,
            err_pressure,
            rate_energy: None,
            rate_l2: None,
            rate_pressure: None,
            solver_failed: false,
        }
    }
}

fn ratio(num: f64, den: f64, what: &'static str) -> Result<f64> {
    if den > 0.0 {
        Ok(num / den)
    } else {
        Err(FemError::ZeroNorm(what))
    }
}

/// Relative velocity errors (energy and `L²`) of a CR solution.
pub fn relative_velocity_errors(
    mesh: &Mesh2D,
    exact: &[&ScalarField],
    u_h: &DiscreteFunction,
) -> Result<(f64, f64)> {
    let err = energy_difference(mesh, exact, Some(u_h), 1.0)?;
    let norm = energy_difference(mesh, exact, None, 1.0)?;
    let e_w = ratio(
        err.total(),
        norm.broken_h1(),
        "exact solution has zero H1 seminorm",
    )?;
    let e_l2 = ratio(
        l2_difference(mesh, exact, Some(u_h))?,
        l2_difference(mesh, exact, None)?,
        "exact solution has zero L2 norm",
    )?;
    Ok((e_w, e_l2))
}

/// `Err(W)`, `Err(L²)` and `Err(Q)` of a Stokes solution.
pub fn relative_errors(
    mesh: &Mesh2D,
    u: &VectorField,
    p: &ScalarField,
    u_h: &DiscreteFunction,
    p_h: &DiscreteFunction,
) -> Result<ErrorRecord> {
    let comps = [&u.components[0], &u.components[1]];
    let (e_w, e_l2) = relative_velocity_errors(mesh, &comps, u_h)?;
    let e_q = ratio(
        p0_l2_difference(mesh, p, Some(p_h))?,
        p0_l2_difference(mesh, p, None)?,
        "exact pressure has zero L2 norm",
    )?;
    Ok(ErrorRecord::new(0, mesh.h, e_w, e_l2, Some(e_q)))
}

/// Fills in rates between consecutive records. Rates stay empty where `n`
/// does not exactly double.
pub fn fill_rates(records: &mut [ErrorRecord]) {
    for k in 1..records.len() {
        let prev = records[k - 1].clone();
        let cur = &mut records[k];
        if cur.n != 2 * prev.n {
            cur.rate_energy = None;
            cur.rate_l2 = None;
            cur.rate_pressure = None;
            continue;
        }
        cur.rate_energy = convergence_rate(prev.err_energy, cur.err_energy).ok();
        cur.rate_l2 = convergence_rate(prev.err_l2, cur.err_l2).ok();
        cur.rate_pressure = match (prev.err_pressure, cur.err_pressure) {
            (Some(a), Some(b)) => convergence_rate(a, b).ok(),
            _ => None,
        };
    }
}

pub const TABLE_HEADER: [&str; 8] = ["N", "h", "Err(W)", "r", "Err(L2)", "r", "Err(Q)", "r"];

fn sci(v: f64) -> String {
    format!("{v:.5e}")
}

fn opt(v: Option<f64>, f: impl Fn(f64) -> String) -> String {
    v.map(f).unwrap_or_default()
}

fn row_cells(r: &ErrorRecord) -> [String; 8] {
    let rate = |v: f64| format!("{v:.2}");
    [
        r.n.to_string(),
        sci(r.h),
        sci(r.err_energy),
        opt(r.rate_energy, rate),
        sci(r.err_l2),
        opt(r.rate_l2, rate),
        opt(r.err_pressure, sci),
        opt(r.rate_pressure, rate),
    ]
}

/// CSV with the columns of [`TABLE_HEADER`]; errors carry six significant digits.
pub fn records_to_csv(records: &[ErrorRecord]) -> String {
    let mut out = TABLE_HEADER.join(",");
    out.push('\n');
    for r in records {
        out.push_str(&row_cells(r).join(","));
        if r.solver_failed {
            out.push_str(",solver-failed");
        }
        out.push('\n');
    }
    out
}

pub fn records_to_markdown(records: &[ErrorRecord]) -> String {
    let mut out = format!("| {} |\n", TABLE_HEADER.join(" | "));
    out.push_str(&format!("|{}\n", "---|".repeat(TABLE_HEADER.len())));
    for r in records {
        let cells = row_cells(r);
        let _ = write!(out, "| {} |", cells.join(" | "));
        if r.solver_failed {
            out.push_str(" solver failed");
        }
        out.push('\n');
    }
    out
}

/// Parses the output of [`records_to_csv`].
pub fn records_from_csv(text: &str) -> Result<Vec<ErrorRecord>> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| FemError::Config("empty table".into()))?;
    if header.split(',').collect::<Vec<_>>() != TABLE_HEADER {
        return Err(FemError::Config(format!("unexpected header `{header}`")));
    }
    let num = |s: &str| -> Result<Option<f64>> {
        if s.is_empty() {
            Ok(None)
        } else {
            s.parse()
                .map(Some)
                .map_err(|_| FemError::Config(format!("bad number `{s}`")))
        }
    };
    let mut out = Vec::new();
    for line in lines.filter(|l| !l.trim().is_empty()) {
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() < 8 {
            return Err(FemError::Config(format!("short row `{line}`")));
        }
        let req =
            |s: &str| num(s)?.ok_or_else(|| FemError::Config(format!("missing value in `{line}`")));
        out.push(ErrorRecord {
            n: cells[0]
                .parse()
                .map_err(|_| FemError::Config(format!("bad N `{}`", cells[0])))?,
            h: req(cells[1])?,
            err_energy: req(cells[2])?,
            rate_energy: num(cells[3])?,
            err_l2: req(cells[4])?,
            rate_l2: num(cells[5])?,
            err_pressure: num(cells[6])?,
            rate_pressure: num(cells[7])?,
            solver_failed: cells.get(8) == Some(&"solver-failed"),
        });
    }
    Ok(out)
}

/// Residual of the discrete Green formula for the RT interpolant:
/// `|Σ_T ∫_T (I w·∇ψ_h + div(I w) ψ_h) - Σ_F ∫_F (w·n) Π_F ψ_h|`.
pub fn green_formula_residual(
    mesh: &Mesh2D,
    w: &VectorField,
    psi: &DiscreteFunction,
) -> Result<f64> {
    if psi.space != SpaceTag::CrScalar {
        return Err(FemError::InvalidArgument(format!(
            "expected a scalar CR function, got {:?}",
            psi.space
        )));
    }
    let iw = interpolate_rt(mesh, w);
    let mut volume = 0.0;
    for t in 0..mesh.num_elements() {
        let el = CrElement::of(mesh, t);
        let rt = RtElement::of(mesh, t);
        let local_w = mesh.element_edges[t].map(|e| iw.coefficients[e]);
        let local_psi = psi.cr_local(mesh, t, 0);
        let grad = el.gradient(&local_psi);
        let div = rt.divergence(&local_w);
        volume += integrate_triangle(&el.points, |x| {
            rt.value(&local_w, x).dot(grad) + div * el.value(&local_psi, x)
        });
    }
    let mut boundary = 0.0;
    for &e in mesh.boundary_edges() {
        let edge = &mesh.edges[e];
        let [a, b] = edge.endpoints.map(|v| mesh.vertices[v]);
        boundary +=
            integrate_edge(a, b, |x| w.value_point(x).dot(edge.normal)) * psi.coefficients[e];
    }
    Ok((volume - boundary).abs())
}

/// Terms of the anisotropic energy error bound (all constants set to one).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnisotropicBound {
    /// `(Σ_i Σ_T h_i² ‖∂_{r_i} ∇u‖²_{L²(T)})^{1/2}`
    pub directional: f64,
    /// `h ‖Δu‖`
    pub laplacian: f64,
    /// `h |u|_{H¹} + h^{3/2} |u|_{H¹}^{1/2} ‖Δu‖^{1/2}`
    pub boundary: f64,
}

impl AnisotropicBound {
    pub fn total(&self) -> f64 {
        self.directional + self.laplacian + self.boundary
    }
}

/// Evaluates the anisotropic bound; second derivatives come from the exact
/// Hessian when available, otherwise from differences of the gradient.
pub fn anisotropic_bound(mesh: &Mesh2D, u: &ScalarField) -> Result<AnisotropicBound> {
    let (mut dir, mut lap, mut h1) = (0.0, 0.0, 0.0);
    for t in 0..mesh.num_elements() {
        let pts = mesh.element_points(t);
        let g = &mesh.geometry[t];
        for (x, w) in TRIANGLE_DEGREE5.map(&pts) {
            let hs = u.hessian(x)?;
            for (hi, r) in [(g.h1, g.r1), (g.h2, g.r2)] {
                let d = [
                    hs[0][0] * r.x + hs[0][1] * r.y,
                    hs[1][0] * r.x + hs[1][1] * r.y,
                ];
                dir += w * hi * hi * (d[0] * d[0] + d[1] * d[1]);
            }
            lap += w * (hs[0][0] + hs[1][1]).powi(2);
            let gr = u.gradient(x)?;
            h1 += w * (gr[0] * gr[0] + gr[1] * gr[1]);
        }
    }
    let h = mesh.h;
    let (lap, h1) = (lap.sqrt(), h1.sqrt());
    Ok(AnisotropicBound {
        directional: dir.sqrt(),
        laplacian: h * lap,
        boundary: h * h1 + h.powf(1.5) * h1.sqrt() * lap.sqrt(),
    })
}

fn dense_velocity_norm_matrix(mesh: &Mesh2D, beta: f64, components: usize) -> DMatrix<f64> {
    let ne = mesh.num_edges();
    let mut t = Vec::new();
    for c in 0..components {
        push_stiffness(mesh, c * ne, 1.0, &mut t);
        push_penalty(mesh, beta, c * ne, 1.0, &mut t);
    }
    CsrMatrix::from_triplets(components * ne, components * ne, &t)
        .expect("valid indices")
        .to_dense()
}

/// Orthonormal basis (columns) of the complement of `w`.
fn complement_basis(w: &[f64]) -> DMatrix<f64> {
    let n = w.len();
    let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
    // Householder reflector mapping w/|w| to e_0; its other columns span w⊥
    let mut v: Vec<f64> = w.iter().map(|x| x / norm).collect();
    v[0] += if v[0] >= 0.0 { 1.0 } else { -1.0 };
    let vv: f64 = v.iter().map(|x| x * x).sum();
    let mut q = DMatrix::identity(n, n);
    for i in 0..n {
        for j in 0..n {
            q[(i, j)] -= 2.0 * v[i] * v[j] / vv;
        }
    }
    q.columns(1, n - 1).into_owned()
}

/// Smallest generalised singular value of the divergence matrix between the
/// `W` norm on velocities and the `L²` norm on zero-mean elementwise constants.
pub fn inf_sup_constant(mesh: &Mesh2D) -> Result<f64> {
    let wmat = dense_velocity_norm_matrix(mesh, 1.0, 2);
    let b = crate::stokes::divergence_matrix(mesh).to_dense();
    let chol = wmat.cholesky().ok_or_else(|| {
        FemError::InvalidArgument("velocity norm matrix is not positive definite".into())
    })?;
    let s = &b * chol.solve(&b.transpose());
    let areas: Vec<f64> = mesh.geometry.iter().map(|g| g.area).collect();
    let inv_sqrt = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        areas.len(),
        areas.iter().map(|a| 1.0 / a.sqrt()),
    ));
    let scaled = &inv_sqrt * s * &inv_sqrt;
    let w: Vec<f64> = areas.iter().map(|a| a.sqrt()).collect();
    let q = complement_basis(&w);
    let reduced = q.transpose() * scaled * &q;
    let eig = SymmetricEigen::new(reduced);
    Ok(eig.eigenvalues.min().max(0.0).sqrt())
}

/// `max ‖ψ_h‖_{L²} / |ψ_h|_{1,0}` over scalar CR functions.
pub fn discrete_poincare_constant(mesh: &Mesh2D) -> f64 {
    let a = dense_velocity_norm_matrix(mesh, 0.0, 1);
    // CR basis functions are L2-orthogonal on each triangle with ‖θ_i‖² = |T|/3
    let mut mass = vec![0.0; mesh.num_edges()];
    for t in 0..mesh.num_elements() {
        for &e in &mesh.element_edges[t] {
            mass[e] += mesh.geometry[t].area / 3.0;
        }
    }
    let n = mass.len();
    let mut scaled = a;
    for i in 0..n {
        for j in 0..n {
            scaled[(i, j)] /= (mass[i] * mass[j]).sqrt();
        }
    }
    let lmin = SymmetricEigen::new(scaled).eigenvalues.min();
    1.0 / lmin.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fespace::interpolate_cr;
    use crate::mesh::{generate_structured, MeshFamily, Point2};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_cr(mesh: &Mesh2D, seed: u64) -> DiscreteFunction {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = (0..mesh.num_edges())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        DiscreteFunction::new(mesh, SpaceTag::CrScalar, c).unwrap()
    }

    #[test]
    fn rates() {
        assert!((convergence_rate(0.4, 0.1).unwrap() - 2.0).abs() < 1e-14);
        assert_eq!(convergence_rate(1.0, 1.0).unwrap(), 0.0);
        assert!((convergence_rate(4.71422e-3, 2.35001e-3).unwrap() - 1.00).abs() < 5e-3);
        assert!(convergence_rate(0.0, 1.0).is_err());
        assert!(
            (convergence_rate(0.3, 0.07).unwrap() + convergence_rate(0.07, 0.3).unwrap()).abs()
                < 1e-14
        );
    }

    #[test]
    fn slope_of_a_power_law() {
        let h = [0.5, 0.2, 0.1, 0.03];
        let e: Vec<f64> = h.iter().map(|x| 3.0 * x * x).collect();
        assert!((fitted_slope(&h, &e).unwrap() - 2.0).abs() < 1e-12);
        assert!(fitted_slope(&h[..1], &e[..1]).is_err());
        assert!(fitted_slope(&[0.1, 0.05], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn fill_rates_needs_doubling() {
        let mut rows = vec![
            ErrorRecord::new(8, 0.1, 1.0, 1.0, None),
            ErrorRecord::new(16, 0.05, 0.5, 0.25, None),
        ];
        fill_rates(&mut rows);
        assert!((rows[1].rate_energy.unwrap() - 1.0).abs() < 1e-14);
        assert!((rows[1].rate_l2.unwrap() - 2.0).abs() < 1e-14);
        assert_eq!(rows[1].rate_pressure, None);
        rows[1].n = 32;
        fill_rates(&mut rows);
        assert_eq!(rows[1].rate_energy, None);
    }

    #[test]
    fn csv_round_trip() {
        let mut rows = vec![
            ErrorRecord::new(16, 0.0883883, 0.123456789, 4.5e-3, Some(0.0654321)),
            ErrorRecord::new(32, 0.0441942, 0.0612345, 1.1e-3, Some(0.0327)),
        ];
        fill_rates(&mut rows);
        rows[1].solver_failed = true;
        let csv = records_to_csv(&rows);
        assert!(csv.starts_with("N,h,Err(W),r,Err(L2),r,Err(Q),r\n"));
        let back = records_from_csv(&csv).unwrap();
        assert_eq!(records_to_csv(&back), csv);
        assert!(back[1].solver_failed);
        for (a, b) in rows.iter().zip(&back) {
            assert!((a.err_energy - b.err_energy).abs() <= 5e-6 * a.err_energy);
        }
        assert!(records_to_markdown(&rows).contains("| 32 |"));
    }

    #[test]
    fn penalty_of_constant_on_single_square() {
        let mesh = generate_structured(MeshFamily::Uniform, 1).unwrap();
        let one =
            DiscreteFunction::new(&mesh, SpaceTag::CrScalar, vec![1.0; mesh.num_edges()]).unwrap();
        // h = √2, every boundary face has |F| = 1 and ℓ = 2·(1/2)/1 = 1
        let expected = 4.0 * 0.5;
        assert!((seminorm_penalty(&mesh, &one, 1.0).powi(2) - expected).abs() < 1e-13);
        assert!((seminorm_penalty(&mesh, &one, 0.0).powi(2) - 4.0).abs() < 1e-13);
        assert!(seminorm_penalty(&mesh, &one, 0.0) >= seminorm_penalty(&mesh, &one, 1.0));
    }

    #[test]
    fn broken_h1_against_per_element_sum() {
        let mesh = generate_structured(MeshFamily::Graded, 5).unwrap();
        let v = random_cr(&mesh, 3);
        let mut sum = 0.0;
        for t in 0..mesh.num_elements() {
            let pts = mesh.element_points(t);
            let area = 0.5 * (pts[1] - pts[0]).cross(pts[2] - pts[0]).abs();
            // gradient from the three edge midpoint values
            let mids = [0, 1, 2].map(|i| (pts[(i + 1) % 3] + pts[(i + 2) % 3]) * 0.5);
            let vals = mesh.element_edges[t].map(|e| v.coefficients[e]);
            let (d1, d2) = (mids[1] - mids[0], mids[2] - mids[0]);
            let det = d1.cross(d2);
            let (a, b) = (vals[1] - vals[0], vals[2] - vals[0]);
            let g = Point2::new((a * d2.y - b * d1.y) / det, (b * d1.x - a * d2.x) / det);
            sum += area * g.dot(g);
        }
        assert!((norm_broken_h1(&mesh, &v) - sum.sqrt()).abs() < 1e-12 * sum.sqrt());
    }

    #[test]
    fn energy_difference_of_affine_interpolant_vanishes() {
        let mesh = generate_structured(MeshFamily::Cosine, 4).unwrap();
        let u = ScalarField::affine(0.3, 1.5, -2.0);
        let u_h = interpolate_cr(&mesh, &u);
        let d = energy_difference(&mesh, &[&u], Some(&u_h), 1.0).unwrap();
        assert!(d.broken_h1() < 1e-12 && d.penalty_sq < 1e-24);
        let c = DiscreteFunction::zeros(&mesh, SpaceTag::CrScalar);
        let norm = energy_difference(&mesh, &[&u], Some(&c), 1.0).unwrap();
        assert!((norm.broken_h1() - (1.5f64.powi(2) + 4.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn norm_w_is_pythagorean() {
        let mesh = generate_structured(MeshFamily::Uniform, 4).unwrap();
        let (a, b) = (random_cr(&mesh, 1), random_cr(&mesh, 2));
        let mut c = a.coefficients.clone();
        c.extend_from_slice(&b.coefficients);
        let v = DiscreteFunction::new(&mesh, SpaceTag::CrVector, c).unwrap();
        let direct = norm_w(&mesh, &v).unwrap();
        let parts = (norm_11(&mesh, &a).powi(2) + norm_11(&mesh, &b).powi(2)).sqrt();
        assert!((direct - parts).abs() < 1e-13 * direct);
    }

    #[test]
    fn metrics_are_scale_invariant() {
        let mesh = generate_structured(MeshFamily::Uniform, 6).unwrap();
        let u = ScalarField::new(|p| (3.0 * p.x).sin() * p.y)
            .with_gradient(|p| [3.0 * (3.0 * p.x).cos() * p.y, (3.0 * p.x).sin()]);
        let u_h = random_cr(&mesh, 9);
        let (w1, l1) = relative_velocity_errors(&mesh, &[&u], &u_h).unwrap();
        let lambda = 37.5;
        let us = u.scaled(lambda);
        let mut sh = u_h.clone();
        sh.coefficients.iter_mut().for_each(|c| *c *= lambda);
        let (w2, l2) = relative_velocity_errors(&mesh, &[&us], &sh).unwrap();
        assert!((w1 - w2).abs() < 1e-13 * w1);
        assert!((l1 - l2).abs() < 1e-13 * l1);
    }

    #[test]
    fn zero_denominator_is_flagged() {
        let mesh = generate_structured(MeshFamily::Uniform, 2).unwrap();
        let zero = ScalarField::constant(0.0);
        let u_h = DiscreteFunction::zeros(&mesh, SpaceTag::CrScalar);
        assert!(matches!(
            relative_velocity_errors(&mesh, &[&zero], &u_h),
            Err(FemError::ZeroNorm(_))
        ));
    }

    #[test]
    fn green_formula_polynomial_fields() {
        let mesh = generate_structured(MeshFamily::Graded, 6).unwrap();
        let psi = random_cr(&mesh, 11);
        let constant = VectorField::constant(0.7, -1.3);
        assert!(green_formula_residual(&mesh, &constant, &psi).unwrap() < 1e-12);
        let quad = VectorField::new(
            ScalarField::new(|p| p.x * p.x - 2.0 * p.x * p.y + 0.5),
            ScalarField::new(|p| 3.0 * p.y * p.y + p.x),
        );
        assert!(green_formula_residual(&mesh, &quad, &psi).unwrap() < 1e-11);
    }

    #[test]
    fn green_formula_trigonometric_decays() {
        use std::f64::consts::PI;
        let w = VectorField::new(
            ScalarField::new(|p| PI * (PI * p.x).cos() * (PI * p.y).sin()),
            ScalarField::new(|p| PI * (PI * p.x).sin() * (PI * p.y).cos()),
        );
        let r: Vec<f64> = [4, 8, 16]
            .iter()
            .map(|&n| {
                let mesh = generate_structured(MeshFamily::Uniform, n).unwrap();
                green_formula_residual(&mesh, &w, &random_cr(&mesh, 5)).unwrap()
            })
            .collect();
        assert!(r.iter().all(|&v| v < 1e-6), "{r:?}");
    }

    #[test]
    fn anisotropic_bound_examples() {
        let mesh = generate_structured(MeshFamily::Graded, 4).unwrap();
        let affine = ScalarField::affine(1.0, 2.0, 3.0);
        assert!(anisotropic_bound(&mesh, &affine).unwrap().directional < 1e-6);

        // unit square split into two right triangles; u = x² + xy, H = [[2,1],[1,0]]
        let single = generate_structured(MeshFamily::Uniform, 1).unwrap();
        let u = ScalarField::new(|p| p.x * p.x + p.x * p.y)
            .with_gradient(|p| [2.0 * p.x + p.y, p.x])
            .with_hessian(|_| [[2.0, 1.0], [1.0, 0.0]]);
        let dir = |r: Point2| (2.0 * r.x + r.y).powi(2) + r.x.powi(2);
        let expected = single
            .geometry
            .iter()
            .map(|g| g.area * (g.h1 * g.h1 * dir(g.r1) + g.h2 * g.h2 * dir(g.r2)))
            .sum::<f64>()
            .sqrt();
        let got = anisotropic_bound(&single, &u).unwrap();
        assert!((got.directional - expected).abs() < 1e-12);
        assert!((got.laplacian - single.h * 2.0).abs() < 1e-12);
        // finite-difference Hessian agrees
        let fd =
            ScalarField::new(|p| p.x * p.x + p.x * p.y).with_gradient(|p| [2.0 * p.x + p.y, p.x]);
        assert!((anisotropic_bound(&single, &fd).unwrap().directional - expected).abs() < 1e-6);
    }

    #[test]
    fn inf_sup_and_poincare_are_positive() {
        let mesh = generate_structured(MeshFamily::Uniform, 2).unwrap();
        let beta = inf_sup_constant(&mesh).unwrap();
        assert!(beta > 0.05 && beta.is_finite(), "{beta}");
        let cp = discrete_poincare_constant(&mesh);
        assert!(cp > 0.0 && cp < 1.0, "{cp}");
    }
}
