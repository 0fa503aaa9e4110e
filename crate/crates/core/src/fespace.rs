//! Crouzeix–Raviart, piecewise-constant and lowest-order Raviart–Thomas spaces
//! on a [`Mesh2D`], together with their interpolation operators.
//!
//! Local numbering follows the mesh: local basis function `i` of an element is
//! attached to the edge opposite its local vertex `i`.

use crate::error::{FemError, Result};
use crate::field::{ScalarField, VectorField};
use crate::mesh::{Mesh2D, Point2};
use crate::quadrature::{edge_mean, integrate_edge, integrate_triangle};

/// Affine Crouzeix–Raviart element: `theta_i = 1 - 2 lambda_i`.
#[derive(Clone, Copy, Debug)]
pub struct CrElement {
    pub points: [Point2; 3],
    pub area: f64,
    grad_lambda: [Point2; 3],
}

impl CrElement {
    pub fn new(points: [Point2; 3]) -> Self {
        let twice_area = (points[1] - points[0]).cross(points[2] - points[0]);
        let grad_lambda = std::array::from_fn(|i| {
            (points[(i + 2) % 3] - points[(i + 1) % 3]).rot90() * (1.0 / twice_area)
        });
        Self {
            points,
            area: 0.5 * twice_area.abs(),
            grad_lambda,
        }
    }

    pub fn of(mesh: &Mesh2D, t: usize) -> Self {
        Self::new(mesh.element_points(t))
    }

    pub fn barycentric(&self, x: Point2) -> [f64; 3] {
        let p = &self.points;
        std::array::from_fn(|i| {
            1.0 / 3.0 + self.grad_lambda[i].dot(x - (p[0] + p[1] + p[2]) * (1.0 / 3.0))
        })
    }

    pub fn contains(&self, x: Point2) -> bool {
        self.barycentric(x).iter().all(|&l| l >= -1e-10)
    }

    pub fn basis_values(&self, x: Point2) -> [f64; 3] {
        self.barycentric(x).map(|l| 1.0 - 2.0 * l)
    }

    pub fn basis_gradients(&self) -> [Point2; 3] {
        self.grad_lambda.map(|g| g * -2.0)
    }

    pub fn value(&self, local: &[f64; 3], x: Point2) -> f64 {
        let b = self.basis_values(x);
        local[0] * b[0] + local[1] * b[1] + local[2] * b[2]
    }

    pub fn gradient(&self, local: &[f64; 3]) -> Point2 {
        let g = self.basis_gradients();
        g[0] * local[0] + g[1] * local[1] + g[2] * local[2]
    }
}

/// Local Crouzeix–Raviart basis of a triangle.
pub fn cr_local_basis(points: [Point2; 3]) -> CrElement {
    CrElement::new(points)
}

/// Lowest-order Raviart–Thomas element with per-edge orientation signs:
/// `theta_i(x) = sigma_i (x - p_i) / (2|T|)`.
#[derive(Clone, Copy, Debug)]
pub struct RtElement {
    pub points: [Point2; 3],
    pub area: f64,
    pub signs: [f64; 3],
}

impl RtElement {
    pub fn new(points: [Point2; 3], signs: [f64; 3]) -> Self {
        let area = 0.5 * (points[1] - points[0]).cross(points[2] - points[0]).abs();
        Self {
            points,
            area,
            signs,
        }
    }

    pub fn of(mesh: &Mesh2D, t: usize) -> Self {
        Self::new(mesh.element_points(t), mesh.element_edge_signs[t])
    }

    pub fn basis_value(&self, i: usize, x: Point2) -> Point2 {
        (x - self.points[i]) * (self.signs[i] / (2.0 * self.area))
    }

    pub fn basis_divergence(&self, i: usize) -> f64 {
        self.signs[i] / self.area
    }

    pub fn value(&self, local: &[f64; 3], x: Point2) -> Point2 {
        (0..3).fold(Point2::default(), |acc, i| {
            acc + self.basis_value(i, x) * local[i]
        })
    }

    pub fn divergence(&self, local: &[f64; 3]) -> f64 {
        (0..3).map(|i| local[i] * self.basis_divergence(i)).sum()
    }
}

/// Local Raviart–Thomas basis; `signs[i] = +1` when the fixed normal of edge `i` points outward.
pub fn rt_local_basis(points: [Point2; 3], signs: [f64; 3]) -> RtElement {
    RtElement::new(points, signs)
}

/// One Crouzeix–Raviart unknown per edge and component; component `c` of
/// edge `e` is numbered `c * n_edges + e`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DofMapCr {
    pub n_edges: usize,
    pub components: usize,
}

impl DofMapCr {
    pub fn new(mesh: &Mesh2D, components: usize) -> Self {
        Self {
            n_edges: mesh.num_edges(),
            components,
        }
    }

    pub fn dof(&self, component: usize, edge: usize) -> usize {
        component * self.n_edges + edge
    }

    pub fn len(&self) -> usize {
        self.n_edges * self.components
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn element_dofs(&self, mesh: &Mesh2D, t: usize, component: usize) -> [usize; 3] {
        mesh.element_edges[t].map(|e| self.dof(component, e))
    }
}

/// Elementwise constants (numbered by element) and boundary-facewise constants
/// (numbered by position among the boundary edges).
#[derive(Clone, Debug)]
pub struct DofMapP0 {
    pub n_elements: usize,
    face_dofs: Vec<Option<usize>>,
    faces: Vec<usize>,
}

impl DofMapP0 {
    pub fn new(mesh: &Mesh2D) -> Self {
        let mut face_dofs = vec![None; mesh.num_edges()];
        for (k, &e) in mesh.boundary_edges().iter().enumerate() {
            face_dofs[e] = Some(k);
        }
        Self {
            n_elements: mesh.num_elements(),
            face_dofs,
            faces: mesh.boundary_edges().to_vec(),
        }
    }

    pub fn element_dof(&self, t: usize) -> usize {
        t
    }

    pub fn face_dof(&self, edge: usize) -> Option<usize> {
        self.face_dofs.get(edge).copied().flatten()
    }

    pub fn face_edge(&self, dof: usize) -> usize {
        self.faces[dof]
    }

    pub fn n_faces(&self) -> usize {
        self.faces.len()
    }
}

/// Normal-flux unknowns, one per edge, measured along the fixed edge normal.
#[derive(Clone, Debug)]
pub struct DofMapRt {
    pub n_edges: usize,
    signs: Vec<[f64; 3]>,
}

impl DofMapRt {
    pub fn new(mesh: &Mesh2D) -> Self {
        Self {
            n_edges: mesh.num_edges(),
            signs: mesh.element_edge_signs.clone(),
        }
    }

    pub fn dof(&self, edge: usize) -> usize {
        edge
    }

    pub fn sign(&self, t: usize, local: usize) -> f64 {
        self.signs[t][local]
    }
}

/// Which space a coefficient array belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpaceTag {
    CrScalar,
    CrVector,
    P0Element,
    P0Face,
    Rt0,
}

impl SpaceTag {
    pub fn dimension(self, mesh: &Mesh2D) -> usize {
        match self {
            SpaceTag::CrScalar | SpaceTag::Rt0 => mesh.num_edges(),
            SpaceTag::CrVector => 2 * mesh.num_edges(),
            SpaceTag::P0Element => mesh.num_elements(),
            SpaceTag::P0Face => mesh.boundary_edges().len(),
        }
    }
}

/// Value of a discrete function at a point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FieldValue {
    Scalar(f64),
    Vector([f64; 2]),
}

/// Coefficient array tagged with its space.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteFunction {
    pub space: SpaceTag,
    pub coefficients: Vec<f64>,
}

impl DiscreteFunction {
    pub fn new(mesh: &Mesh2D, space: SpaceTag, coefficients: Vec<f64>) -> Result<Self> {
        let n = space.dimension(mesh);
        if coefficients.len() != n {
            return Err(FemError::DimensionMismatch(format!(
                "{space:?} on this mesh has {n} dofs, got {} coefficients",
                coefficients.len()
            )));
        }
        Ok(Self {
            space,
            coefficients,
        })
    }

    pub fn zeros(mesh: &Mesh2D, space: SpaceTag) -> Self {
        Self {
            space,
            coefficients: vec![0.0; space.dimension(mesh)],
        }
    }

    /// Local CR coefficients of one component on element `t`.
    pub fn cr_local(&self, mesh: &Mesh2D, t: usize, component: usize) -> [f64; 3] {
        let offset = component * mesh.num_edges();
        mesh.element_edges[t].map(|e| self.coefficients[offset + e])
    }

    fn check_element(&self, mesh: &Mesh2D, t: usize) -> Result<()> {
        if t >= mesh.num_elements() {
            return Err(FemError::Lookup(format!("element {t} does not exist")));
        }
        Ok(())
    }

    /// Evaluates the function on element `t` at `x`, which must lie in `t`.
    pub fn evaluate(&self, mesh: &Mesh2D, t: usize, x: Point2) -> Result<FieldValue> {
        self.check_element(mesh, t)?;
        let el = CrElement::of(mesh, t);
        if !el.contains(x) {
            return Err(FemError::Lookup(format!(
                "point {x:?} is not in element {t}"
            )));
        }
        match self.space {
            SpaceTag::CrScalar => Ok(FieldValue::Scalar(el.value(&self.cr_local(mesh, t, 0), x))),
            SpaceTag::CrVector => Ok(FieldValue::Vector([
                el.value(&self.cr_local(mesh, t, 0), x),
                el.value(&self.cr_local(mesh, t, 1), x),
            ])),
            SpaceTag::P0Element => Ok(FieldValue::Scalar(self.coefficients[t])),
            SpaceTag::Rt0 => {
                let rt = RtElement::of(mesh, t);
                let local = mesh.element_edges[t].map(|e| self.coefficients[e]);
                Ok(FieldValue::Vector(rt.value(&local, x).to_array()))
            }
            SpaceTag::P0Face => Err(FemError::Lookup(
                "facewise constants have no value inside elements".into(),
            )),
        }
    }

    /// Elementwise gradient, one entry per component.
    pub fn broken_gradient(&self, mesh: &Mesh2D, t: usize) -> Result<Vec<Point2>> {
        self.check_element(mesh, t)?;
        match self.space {
            SpaceTag::CrScalar => Ok(vec![
                CrElement::of(mesh, t).gradient(&self.cr_local(mesh, t, 0))
            ]),
            SpaceTag::CrVector => {
                let el = CrElement::of(mesh, t);
                Ok((0..2)
                    .map(|c| el.gradient(&self.cr_local(mesh, t, c)))
                    .collect())
            }
            SpaceTag::P0Element => Ok(vec![Point2::default()]),
            SpaceTag::Rt0 | SpaceTag::P0Face => Err(FemError::InvalidArgument(format!(
                "broken gradient is not available for {:?}",
                self.space
            ))),
        }
    }
}

/// Elementwise mean `(1/|T|) int_T f`.
pub fn project_p0_element<F: Fn(Point2) -> f64>(points: &[Point2; 3], f: F) -> f64 {
    let area = crate::mesh::signed_area(points[0], points[1], points[2]).abs();
    integrate_triangle(points, f) / area
}

/// Edge mean `(1/|F|) int_F f`.
pub fn project_p0_face<F: Fn(Point2) -> f64>(a: Point2, b: Point2, f: F) -> f64 {
    edge_mean(a, b, f)
}

/// Global elementwise projection onto piecewise constants.
pub fn project_p0(mesh: &Mesh2D, f: &ScalarField) -> DiscreteFunction {
    let coefficients = (0..mesh.num_elements())
        .map(|t| project_p0_element(&mesh.element_points(t), |x| f.value(x)))
        .collect();
    DiscreteFunction {
        space: SpaceTag::P0Element,
        coefficients,
    }
}

fn edge_ends(mesh: &Mesh2D, e: usize) -> (Point2, Point2) {
    let ends = mesh.edges[e].endpoints;
    (mesh.vertices[ends[0]], mesh.vertices[ends[1]])
}

/// Crouzeix–Raviart interpolant: each unknown is the edge mean of `f`.
pub fn interpolate_cr(mesh: &Mesh2D, f: &ScalarField) -> DiscreteFunction {
    let coefficients = (0..mesh.num_edges())
        .map(|e| {
            let (a, b) = edge_ends(mesh, e);
            edge_mean(a, b, |x| f.value(x))
        })
        .collect();
    DiscreteFunction {
        space: SpaceTag::CrScalar,
        coefficients,
    }
}

pub fn interpolate_cr_vector(mesh: &Mesh2D, v: &VectorField) -> DiscreteFunction {
    let mut coefficients = interpolate_cr(mesh, &v.components[0]).coefficients;
    coefficients.extend(interpolate_cr(mesh, &v.components[1]).coefficients);
    DiscreteFunction {
        space: SpaceTag::CrVector,
        coefficients,
    }
}

/// Raviart–Thomas interpolant: each unknown is the flux of `v` through the
/// edge along its fixed normal.
pub fn interpolate_rt(mesh: &Mesh2D, v: &VectorField) -> DiscreteFunction {
    let coefficients = mesh
        .edges
        .iter()
        .enumerate()
        .map(|(e, edge)| {
            let (a, b) = edge_ends(mesh, e);
            integrate_edge(a, b, |x| v.value_point(x).dot(edge.normal))
        })
        .collect();
    DiscreteFunction {
        space: SpaceTag::Rt0,
        coefficients,
    }
}

/// Raviart–Thomas interpolant of a vector CR function with vanishing boundary fluxes.
///
/// Interior fluxes are `|F| (mean_F v_h) . n_F`, single valued because CR edge
/// means are continuous. Boundary fluxes are set to zero so the result has
/// zero normal trace on the boundary.
pub fn interpolate_rt0_from_cr(mesh: &Mesh2D, v_h: &DiscreteFunction) -> Result<DiscreteFunction> {
    if v_h.space != SpaceTag::CrVector {
        return Err(FemError::InvalidArgument(format!(
            "expected a vector CR function, got {:?}",
            v_h.space
        )));
    }
    let ne = mesh.num_edges();
    if v_h.coefficients.len() != 2 * ne {
        return Err(FemError::DimensionMismatch(
            "vector CR coefficient length".into(),
        ));
    }
    let coefficients = mesh
        .edges
        .iter()
        .enumerate()
        .map(|(e, edge)| {
            if edge.is_boundary() {
                0.0
            } else {
                edge.length
                    * (v_h.coefficients[e] * edge.normal.x
                        + v_h.coefficients[ne + e] * edge.normal.y)
            }
        })
        .collect();
    Ok(DiscreteFunction {
        space: SpaceTag::Rt0,
        coefficients,
    })
}

/// Elementwise divergence of an RT0 function.
pub fn rt_divergence(mesh: &Mesh2D, v: &DiscreteFunction) -> Vec<f64> {
    (0..mesh.num_elements())
        .map(|t| {
            let local = mesh.element_edges[t].map(|e| v.coefficients[e]);
            RtElement::of(mesh, t).divergence(&local)
        })
        .collect()
}

/// Elementwise divergence of a vector CR function.
pub fn cr_divergence(mesh: &Mesh2D, v: &DiscreteFunction) -> Vec<f64> {
    (0..mesh.num_elements())
        .map(|t| {
            let el = CrElement::of(mesh, t);
            el.gradient(&v.cr_local(mesh, t, 0)).x + el.gradient(&v.cr_local(mesh, t, 1)).y
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_structured, MeshFamily};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tri() -> [Point2; 3] {
        [
            Point2::new(0.1, 0.2),
            Point2::new(0.9, 0.3),
            Point2::new(0.4, 0.8),
        ]
    }

    #[test]
    fn cr_basis_edge_means_are_kronecker() {
        let el = cr_local_basis(tri());
        for i in 0..3 {
            let a = el.points[(i + 1) % 3];
            let b = el.points[(i + 2) % 3];
            let mid = (a + b) * 0.5;
            assert!((el.basis_values(mid)[i] - 1.0).abs() < 1e-14);
            for j in 0..3 {
                let m = edge_mean(a, b, |x| el.basis_values(x)[j]);
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((m - expect).abs() < 1e-14);
            }
        }
        let x = Point2::new(0.45, 0.4);
        assert!((el.basis_values(x).iter().sum::<f64>() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn rt_basis_flux_duality_and_divergence() {
        let signs = [1.0, -1.0, 1.0];
        let rt = rt_local_basis(tri(), signs);
        for j in 0..3 {
            let a = rt.points[(j + 1) % 3];
            let b = rt.points[(j + 2) % 3];
            // outward normal for counterclockwise vertices, then the fixed one
            let n = (b - a).rot90() * (-1.0 / a.distance(b)) * signs[j];
            for i in 0..3 {
                let flux = integrate_edge(a, b, |x| rt.basis_value(i, x).dot(n));
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((flux - expect).abs() < 1e-14, "i={i} j={j} flux={flux}");
            }
        }
        for i in 0..3 {
            assert!((rt.basis_divergence(i) - signs[i] / rt.area).abs() < 1e-14);
        }
    }

    #[test]
    fn constant_vector_is_in_rt_span() {
        let mesh = generate_structured(MeshFamily::Graded, 3).unwrap();
        let c = VectorField::constant(0.7, -1.3);
        let rt = interpolate_rt(&mesh, &c);
        for t in 0..mesh.num_elements() {
            let el = CrElement::of(&mesh, t);
            let x = (el.points[0] + el.points[1] * 2.0 + el.points[2]) * 0.25;
            match rt.evaluate(&mesh, t, x).unwrap() {
                FieldValue::Vector(v) => {
                    assert!((v[0] - 0.7).abs() < 1e-12 && (v[1] + 1.3).abs() < 1e-12);
                }
                _ => unreachable!(),
            }
        }
    }

    #[test]
    fn p0_projections() {
        let t = [
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(0.0, 1.0),
        ];
        assert!((project_p0_element(&t, |_| 4.0) - 4.0).abs() < 1e-15);
        assert!((project_p0_element(&t, |x| x.x) - 1.0 / 3.0).abs() < 1e-15);
        let (a, b) = (Point2::new(0.0, 0.0), Point2::new(1.0, 0.0));
        assert!((project_p0_face(a, b, |x| x.x) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn affine_functions_are_reproduced() {
        let mesh = generate_structured(MeshFamily::Cosine, 4).unwrap();
        let f = ScalarField::affine(0.3, -1.2, 2.5);
        let fh = interpolate_cr(&mesh, &f);
        for t in 0..mesh.num_elements() {
            let el = CrElement::of(&mesh, t);
            let x = (el.points[0] + el.points[1] + el.points[2] * 3.0) * 0.2;
            match fh.evaluate(&mesh, t, x).unwrap() {
                FieldValue::Scalar(v) => assert!((v - f.value(x)).abs() < 1e-12),
                _ => unreachable!(),
            }
            let g = fh.broken_gradient(&mesh, t).unwrap()[0];
            assert!((g.x + 1.2).abs() < 1e-12 && (g.y - 2.5).abs() < 1e-12);
        }
        let c = interpolate_cr(&mesh, &ScalarField::constant(2.0));
        assert!(c.broken_gradient(&mesh, 3).unwrap()[0].norm() < 1e-12);
    }

    #[test]
    fn evaluation_outside_element_is_a_lookup_error() {
        let mesh = generate_structured(MeshFamily::Uniform, 2).unwrap();
        let f = DiscreteFunction::zeros(&mesh, SpaceTag::CrScalar);
        assert!(matches!(
            f.evaluate(&mesh, 0, Point2::new(0.9, 0.9)),
            Err(FemError::Lookup(_))
        ));
        assert!(matches!(
            f.evaluate(&mesh, 99, Point2::new(0.1, 0.0)),
            Err(FemError::Lookup(_))
        ));
    }

    #[test]
    fn coefficient_length_is_checked() {
        let mesh = generate_structured(MeshFamily::Uniform, 2).unwrap();
        assert!(DiscreteFunction::new(&mesh, SpaceTag::CrVector, vec![0.0; 16]).is_err());
        assert!(DiscreteFunction::new(&mesh, SpaceTag::CrVector, vec![0.0; 32]).is_ok());
        assert!(DiscreteFunction::new(&mesh, SpaceTag::P0Face, vec![0.0; 8]).is_ok());
    }

    #[test]
    fn gradient_matches_finite_differences_of_local_evaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mesh = generate_structured(MeshFamily::Graded, 3).unwrap();
        let coeffs = (0..mesh.num_edges())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let f = DiscreteFunction::new(&mesh, SpaceTag::CrScalar, coeffs).unwrap();
        for t in 0..mesh.num_elements() {
            let el = CrElement::of(&mesh, t);
            let local = f.cr_local(&mesh, t, 0);
            let x = (el.points[0] + el.points[1] + el.points[2]) * (1.0 / 3.0);
            let h = 1e-7;
            let fd = Point2::new(
                (el.value(&local, x + Point2::new(h, 0.0))
                    - el.value(&local, x - Point2::new(h, 0.0)))
                    / (2.0 * h),
                (el.value(&local, x + Point2::new(0.0, h))
                    - el.value(&local, x - Point2::new(0.0, h)))
                    / (2.0 * h),
            );
            let g = f.broken_gradient(&mesh, t).unwrap()[0];
            assert!((g - fd).norm() < 1e-6 * g.norm().max(1.0));
        }
    }

    #[test]
    fn rt0_from_cr_of_zero_and_constant() {
        let mesh = generate_structured(MeshFamily::Uniform, 3).unwrap();
        let zero = DiscreteFunction::zeros(&mesh, SpaceTag::CrVector);
        assert!(interpolate_rt0_from_cr(&mesh, &zero)
            .unwrap()
            .coefficients
            .iter()
            .all(|&c| c == 0.0));

        let c = VectorField::constant(1.5, -0.5);
        let rt = interpolate_rt0_from_cr(&mesh, &interpolate_cr_vector(&mesh, &c)).unwrap();
        let exact = interpolate_rt(&mesh, &c);
        for (e, edge) in mesh.edges.iter().enumerate() {
            if edge.is_boundary() {
                assert_eq!(rt.coefficients[e], 0.0);
            } else {
                assert!((rt.coefficients[e] - exact.coefficients[e]).abs() < 1e-14);
            }
        }
        let wrong = DiscreteFunction::zeros(&mesh, SpaceTag::Rt0);
        assert!(interpolate_rt0_from_cr(&mesh, &wrong).is_err());
    }

    #[test]
    fn rt0_from_cr_divergence_on_interior_elements() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mesh = generate_structured(MeshFamily::Cosine, 5).unwrap();
        let coeffs = (0..2 * mesh.num_edges())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let v = DiscreteFunction::new(&mesh, SpaceTag::CrVector, coeffs).unwrap();
        let div_rt = rt_divergence(&mesh, &interpolate_rt0_from_cr(&mesh, &v).unwrap());
        let div_cr = cr_divergence(&mesh, &v);
        for t in 0..mesh.num_elements() {
            let touches_boundary = mesh.element_edges[t]
                .iter()
                .any(|&e| mesh.edges[e].is_boundary());
            if !touches_boundary {
                assert!((div_rt[t] - div_cr[t]).abs() < 1e-10 * div_cr[t].abs().max(1.0));
            }
        }
    }

    #[test]
    fn cr_interpolation_is_a_projection() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mesh = generate_structured(MeshFamily::Graded, 4).unwrap();
        let coeffs: Vec<f64> = (0..mesh.num_edges())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let f = DiscreteFunction::new(&mesh, SpaceTag::CrScalar, coeffs.clone()).unwrap();
        // re-interpolate edge by edge through one adjacent element
        for (e, edge) in mesh.edges.iter().enumerate() {
            let t = edge.adjacent.0;
            let el = CrElement::of(&mesh, t);
            let local = f.cr_local(&mesh, t, 0);
            let ends = edge.endpoints.map(|v| mesh.vertices[v]);
            let m = edge_mean(ends[0], ends[1], |x| el.value(&local, x));
            assert!((m - coeffs[e]).abs() < 1e-13);
        }
    }
}
