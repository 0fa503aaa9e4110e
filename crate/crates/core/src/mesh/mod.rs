//! Structured triangulations of the unit square and their edge topology.

mod geometry;
mod point;
pub mod vtk;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use geometry::{
    element_geometry, label_longest_edge, label_longest_edge_with_ids, max_angle, ElementGeometry,
    LongestEdgeLabels,
};
pub use point::{signed_area, Point2};

use crate::error::{FemError, Result};

/// Grid-point distributions on the unit square.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeshFamily {
    /// `x_i = i / n` in both directions.
    Uniform,
    /// `x1_i = i / n`, `x2_i = (i / n)^2`.
    Graded,
    /// `x_i = (1 - cos(i pi / n)) / 2` in both directions.
    Cosine,
}

impl MeshFamily {
    pub const ALL: [MeshFamily; 3] = [MeshFamily::Uniform, MeshFamily::Graded, MeshFamily::Cosine];

    /// Grid coordinates `(x1_i, x2_j)` of grid point `(i, j)`.
    pub fn grid_point(self, i: usize, j: usize, n: usize) -> Point2 {
        let t = |k: usize| k as f64 / n as f64;
        let cosine = |k: usize| {
            // exact end points
            if k == 0 {
                0.0
            } else if k == n {
                1.0
            } else {
                0.5 * (1.0 - (k as f64 * std::f64::consts::PI / n as f64).cos())
            }
        };
        match self {
            MeshFamily::Uniform => Point2::new(t(i), t(j)),
            MeshFamily::Graded => Point2::new(t(i), t(j) * t(j)),
            MeshFamily::Cosine => Point2::new(cosine(i), cosine(j)),
        }
    }
}

impl fmt::Display for MeshFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MeshFamily::Uniform => "uniform",
            MeshFamily::Graded => "graded",
            MeshFamily::Cosine => "cosine",
        })
    }
}

impl FromStr for MeshFamily {
    type Err = FemError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "uniform" | "standard" => Ok(MeshFamily::Uniform),
            "graded" => Ok(MeshFamily::Graded),
            "cosine" | "anisotropic" => Ok(MeshFamily::Cosine),
            other => Err(FemError::InvalidArgument(format!(
                "unknown mesh family `{other}`"
            ))),
        }
    }
}

/// Counterclockwise triangle given by three vertex indices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Triangle {
    pub v: [usize; 3],
}

/// Mesh edge. Local edge `i` of a triangle is the edge opposite its local vertex `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct Edge {
    /// Sorted vertex indices.
    pub endpoints: [usize; 2],
    /// First and (for interior edges) second adjacent triangle.
    pub adjacent: (usize, Option<usize>),
    pub length: f64,
    pub midpoint: Point2,
    /// Fixed unit normal: outward on the boundary, otherwise the tangent
    /// `x[endpoints[1]] - x[endpoints[0]]` rotated by +90 degrees.
    pub normal: Point2,
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.adjacent.1.is_none()
    }

    /// Point at parameter `t` in `[0, 1]` along the edge.
    pub fn point(&self, vertices: &[Point2], t: f64) -> Point2 {
        let a = vertices[self.endpoints[0]];
        let b = vertices[self.endpoints[1]];
        a + (b - a) * t
    }
}

/// Edge topology of a triangle array.
#[derive(Clone, Debug)]
pub struct Topology {
    pub edges: Vec<Edge>,
    /// `element_edges[t][i]` is the global index of local edge `i` of triangle `t`.
    pub element_edges: Vec<[usize; 3]>,
    /// `+1` when the fixed edge normal points out of the triangle, `-1` otherwise.
    pub element_edge_signs: Vec<[f64; 3]>,
}

/// Builds edges, adjacency and orientation signs.
///
/// Interior edges must be shared by exactly two triangles traversing them in
/// opposite directions; anything else (duplicate triangles, non-manifold
/// edges) is a construction error. Boundary normals are oriented outward.
pub fn build_topology(vertices: &[Point2], triangles: &[Triangle]) -> Result<Topology> {
    let mut index: HashMap<(usize, usize), usize> =
        HashMap::with_capacity(3 * triangles.len() / 2 + 8);
    // (element, directed start vertex) for each use of an edge
    let mut uses: Vec<Vec<(usize, usize)>> = Vec::new();
    let mut edge_ends: Vec<[usize; 2]> = Vec::new();
    let mut element_edges = Vec::with_capacity(triangles.len());

    for (t, tri) in triangles.iter().enumerate() {
        for &v in &tri.v {
            if v >= vertices.len() {
                return Err(FemError::MeshConstruction(format!(
                    "triangle {t} references vertex {v} but only {} exist",
                    vertices.len()
                )));
            }
        }
        if tri.v[0] == tri.v[1] || tri.v[1] == tri.v[2] || tri.v[0] == tri.v[2] {
            return Err(FemError::MeshConstruction(format!(
                "triangle {t} repeats a vertex"
            )));
        }
        let mut local = [0usize; 3];
        for (i, slot) in local.iter_mut().enumerate() {
            let a = tri.v[(i + 1) % 3];
            let b = tri.v[(i + 2) % 3];
            let key = (a.min(b), a.max(b));
            let e = *index.entry(key).or_insert_with(|| {
                edge_ends.push([key.0, key.1]);
                uses.push(Vec::with_capacity(2));
                edge_ends.len() - 1
            });
            uses[e].push((t, a));
            *slot = e;
        }
        element_edges.push(local);
    }

    let mut edges = Vec::with_capacity(edge_ends.len());
    for (e, ends) in edge_ends.iter().enumerate() {
        let u = &uses[e];
        let adjacent = match u.as_slice() {
            [(t0, _)] => (*t0, None),
            [(t0, s0), (t1, s1)] => {
                if s0 == s1 {
                    return Err(FemError::MeshConstruction(format!(
                        "edge {:?} is traversed in the same direction by triangles {t0} and {t1} \
                         (duplicate or inverted triangle)",
                        ends
                    )));
                }
                (*t0, Some(*t1))
            }
            _ => {
                return Err(FemError::MeshConstruction(format!(
                    "edge {:?} is shared by {} triangles",
                    ends,
                    u.len()
                )))
            }
        };
        let a = vertices[ends[0]];
        let b = vertices[ends[1]];
        let length = a.distance(b);
        let mut normal = (b - a).rot90() * (1.0 / length);
        if adjacent.1.is_none() {
            // outward: away from the opposite vertex of the single neighbour
            let tri = &triangles[adjacent.0];
            let opposite = tri
                .v
                .iter()
                .find(|&&v| v != ends[0] && v != ends[1])
                .copied()
                .unwrap();
            if normal.dot(vertices[opposite] - a) > 0.0 {
                normal = -normal;
            }
        }
        edges.push(Edge {
            endpoints: *ends,
            adjacent,
            length,
            midpoint: (a + b) * 0.5,
            normal,
        });
    }

    let element_edge_signs = triangles
        .iter()
        .zip(&element_edges)
        .map(|(tri, local)| {
            std::array::from_fn(|i| {
                let edge = &edges[local[i]];
                let inward = vertices[tri.v[i]] - vertices[edge.endpoints[0]];
                if edge.normal.dot(inward) < 0.0 {
                    1.0
                } else {
                    -1.0
                }
            })
        })
        .collect();

    Ok(Topology {
        edges,
        element_edges,
        element_edge_signs,
    })
}

/// Conforming triangulation of the unit square with precomputed geometry.
///
/// Immutable once built.
#[derive(Clone, Debug)]
pub struct Mesh2D {
    pub vertices: Vec<Point2>,
    pub triangles: Vec<Triangle>,
    pub edges: Vec<Edge>,
    pub element_edges: Vec<[usize; 3]>,
    pub element_edge_signs: Vec<[f64; 3]>,
    pub geometry: Vec<ElementGeometry>,
    /// Global mesh size `max_T h_T`.
    pub h: f64,
    boundary_edges: Vec<usize>,
}

fn on_unit_square_boundary(p: Point2) -> bool {
    const TOL: f64 = 1e-12;
    p.x.abs() < TOL || (p.x - 1.0).abs() < TOL || p.y.abs() < TOL || (p.y - 1.0).abs() < TOL
}

impl Mesh2D {
    /// Validates and assembles a triangulation of `[0, 1]^2`.
    pub fn from_parts(vertices: Vec<Point2>, triangles: Vec<Triangle>) -> Result<Self> {
        if triangles.is_empty() {
            return Err(FemError::MeshConstruction("no triangles".into()));
        }
        let topo = build_topology(&vertices, &triangles)?;

        let mut geometry = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            let pts = tri.v.map(|v| vertices[v]);
            let area = signed_area(pts[0], pts[1], pts[2]);
            if area <= 0.0 {
                return Err(FemError::DegenerateTriangle { index: t, area });
            }
            let g = ElementGeometry::with_ids(&pts, &tri.v)
                .map_err(|_| FemError::DegenerateTriangle { index: t, area })?;
            geometry.push(g);
        }

        let mut boundary_edges = Vec::new();
        for (e, edge) in topo.edges.iter().enumerate() {
            if edge.is_boundary() {
                let a = vertices[edge.endpoints[0]];
                let b = vertices[edge.endpoints[1]];
                if !(on_unit_square_boundary(a)
                    && on_unit_square_boundary(b)
                    && on_unit_square_boundary(edge.midpoint))
                {
                    return Err(FemError::MeshConstruction(format!(
                        "boundary edge {e} {:?} lies inside the domain (hanging node?)",
                        edge.endpoints
                    )));
                }
                boundary_edges.push(e);
            }
        }

        let total: f64 = geometry.iter().map(|g| g.area).sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(FemError::MeshConstruction(format!(
                "triangles cover area {total}, expected 1"
            )));
        }
        let h = geometry.iter().map(|g| g.diameter).fold(0.0, f64::max);

        Ok(Self {
            vertices,
            triangles,
            edges: topo.edges,
            element_edges: topo.element_edges,
            element_edge_signs: topo.element_edge_signs,
            geometry,
            h,
            boundary_edges,
        })
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_elements(&self) -> usize {
        self.triangles.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Indices of boundary edges in increasing order.
    pub fn boundary_edges(&self) -> &[usize] {
        &self.boundary_edges
    }

    pub fn element_points(&self, t: usize) -> [Point2; 3] {
        self.triangles[t].v.map(|v| self.vertices[v])
    }

    /// Local index of `edge` in triangle `t`.
    pub fn local_edge_index(&self, t: usize, edge: usize) -> Option<usize> {
        self.element_edges[t].iter().position(|&e| e == edge)
    }

    /// For a boundary edge, the adjacent triangle and the local index of the edge.
    pub fn boundary_owner(&self, edge: usize) -> (usize, usize) {
        let t = self.edges[edge].adjacent.0;
        let local = self
            .local_edge_index(t, edge)
            .expect("edge belongs to its owner");
        (t, local)
    }

    /// `ell_{T,F} = 2|T| / |F|` for a boundary edge and its owning triangle.
    pub fn boundary_ell(&self, edge: usize) -> f64 {
        let (t, local) = self.boundary_owner(edge);
        self.geometry[t].ell[local]
    }
}

/// Generates the structured triangulation with `n` cells per side.
///
/// Vertex `(i, j)` has index `j (n + 1) + i`. Each grid cell is cut along the
/// diagonal from its lower-left to its upper-right corner into the
/// counterclockwise triangles (ll, lr, ur) and (ll, ur, ul).
pub fn generate_structured(family: MeshFamily, n: usize) -> Result<Mesh2D> {
    if n == 0 {
        return Err(FemError::InvalidArgument("n must be at least 1".into()));
    }
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            vertices.push(family.grid_point(i, j, n));
        }
    }
    let id = |i: usize, j: usize| j * (n + 1) + i;
    let mut triangles = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let (ll, lr, ur, ul) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            triangles.push(Triangle { v: [ll, lr, ur] });
            triangles.push(Triangle { v: [ll, ur, ul] });
        }
    }
    Mesh2D::from_parts(vertices, triangles)
}

/// Worst-case shape statistics over a mesh.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SemiRegularityReport {
    /// `max_T H_T / h_T`.
    pub max_shape_parameter: f64,
    /// Largest interior angle in degrees.
    pub max_angle_deg: f64,
    /// `max_T h_T^2 / (2 |T|)`.
    pub max_aspect_ratio: f64,
}

pub fn semi_regularity_report(mesh: &Mesh2D) -> SemiRegularityReport {
    let mut r = SemiRegularityReport {
        max_shape_parameter: 0.0,
        max_angle_deg: 0.0,
        max_aspect_ratio: 0.0,
    };
    for (t, g) in mesh.geometry.iter().enumerate() {
        r.max_shape_parameter = r.max_shape_parameter.max(g.shape_parameter());
        r.max_aspect_ratio = r.max_aspect_ratio.max(g.aspect_ratio());
        r.max_angle_deg = r
            .max_angle_deg
            .max(max_angle(&mesh.element_points(t)).to_degrees());
    }
    r
}
