//! Anisotropic element quantities: the longest-edge labelling of a triangle, the
//! directional lengths `h1`, `h2` with unit directions `r1`, `r2`, and the
//! semi-regularity parameter `H_T = h1 h2 / |T| * h_T`.

use super::point::{signed_area, Point2};
use crate::error::{FemError, Result};

/// Relative tolerance under which two edge lengths count as equal.
const LENGTH_TIE_TOL: f64 = 1e-12;

/// Longest-edge labelling of a triangle.
///
/// `p2 p3` is a longest edge, `p1` the opposite vertex, and
/// `h1 = |p1 - p2| >= h2 = |p1 - p3|`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LongestEdgeLabels {
    /// Positions (0, 1, 2) of `p1`, `p2`, `p3` in the input array.
    pub labels: [usize; 3],
    pub p1: Point2,
    pub p2: Point2,
    pub p3: Point2,
    pub h1: f64,
    pub h2: f64,
    pub r1: Point2,
    pub r2: Point2,
}

fn check_nondegenerate(points: &[Point2; 3]) -> Result<f64> {
    let area = signed_area(points[0], points[1], points[2]).abs();
    let scale = (points[1] - points[0])
        .norm()
        .max((points[2] - points[1]).norm())
        .max((points[0] - points[2]).norm());
    if !(area > 1e-14 * scale * scale) {
        return Err(FemError::Geometry(format!(
            "zero-area triangle ({:?}, {:?}, {:?})",
            points[0], points[1], points[2]
        )));
    }
    Ok(area)
}

fn ties(a: f64, b: f64) -> bool {
    (a - b).abs() <= LENGTH_TIE_TOL * a.abs().max(b.abs())
}

/// Labels the vertices of a triangle by the longest-edge rule, using the
/// positions 0, 1, 2 as tie-breaking ids.
pub fn label_longest_edge(points: &[Point2; 3]) -> Result<LongestEdgeLabels> {
    label_longest_edge_with_ids(points, &[0, 1, 2])
}

/// Labels the vertices of a triangle by the longest-edge rule.
///
/// Ties among longest edges go to the edge with the lexicographically smallest
/// sorted id pair; `p2` is the endpoint farther from `p1`, ties again by id.
pub fn label_longest_edge_with_ids(
    points: &[Point2; 3],
    ids: &[usize; 3],
) -> Result<LongestEdgeLabels> {
    check_nondegenerate(points)?;

    // local edge k joins the two vertices other than k
    let ends = |k: usize| match k {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    let sorted_ids = |k: usize| {
        let (a, b) = ends(k);
        let (ia, ib) = (ids[a], ids[b]);
        if ia <= ib {
            (ia, ib)
        } else {
            (ib, ia)
        }
    };
    let lengths: [f64; 3] = std::array::from_fn(|k| {
        let (a, b) = ends(k);
        points[a].distance(points[b])
    });
    let max_len = lengths.iter().cloned().fold(0.0, f64::max);

    let longest = (0..3)
        .filter(|&k| ties(lengths[k], max_len))
        .min_by_key(|&k| sorted_ids(k))
        .expect("at least one edge attains the maximum");

    let i1 = longest;
    let (a, b) = ends(longest);
    let (da, db) = (
        points[i1].distance(points[a]),
        points[i1].distance(points[b]),
    );
    let (i2, i3) = if ties(da, db) {
        if ids[a] <= ids[b] {
            (a, b)
        } else {
            (b, a)
        }
    } else if da > db {
        (a, b)
    } else {
        (b, a)
    };

    let (p1, p2, p3) = (points[i1], points[i2], points[i3]);
    let h1 = p1.distance(p2);
    let h2 = p1.distance(p3);
    Ok(LongestEdgeLabels {
        labels: [i1, i2, i3],
        p1,
        p2,
        p3,
        h1,
        h2,
        r1: (p2 - p1) * (1.0 / h1),
        r2: (p3 - p1) * (1.0 / h2),
    })
}

/// Per-element anisotropic geometry.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ElementGeometry {
    /// Diameter `h_T` (longest edge).
    pub diameter: f64,
    pub area: f64,
    pub labels: [usize; 3],
    pub h1: f64,
    pub h2: f64,
    pub r1: Point2,
    pub r2: Point2,
    /// Semi-regularity parameter `H_T`.
    pub big_h: f64,
    /// `ell[i] = 2|T| / |F_i|` with `F_i` the edge opposite local vertex `i`.
    pub ell: [f64; 3],
}

impl ElementGeometry {
    pub fn new(points: &[Point2; 3]) -> Result<Self> {
        Self::with_ids(points, &[0, 1, 2])
    }

    pub fn with_ids(points: &[Point2; 3], ids: &[usize; 3]) -> Result<Self> {
        let c1 = label_longest_edge_with_ids(points, ids)?;
        let area = signed_area(points[0], points[1], points[2]).abs();
        let edge_len: [f64; 3] =
            std::array::from_fn(|i| points[(i + 1) % 3].distance(points[(i + 2) % 3]));
        let diameter = edge_len.iter().cloned().fold(0.0, f64::max);
        Ok(Self {
            diameter,
            area,
            labels: c1.labels,
            h1: c1.h1,
            h2: c1.h2,
            r1: c1.r1,
            r2: c1.r2,
            big_h: c1.h1 * c1.h2 / area * diameter,
            ell: std::array::from_fn(|i| 2.0 * area / edge_len[i]),
        })
    }

    /// `H_T / h_T`, bounded on semi-regular mesh families.
    pub fn shape_parameter(&self) -> f64 {
        self.big_h / self.diameter
    }

    /// `h_T` over the height on the longest edge.
    pub fn aspect_ratio(&self) -> f64 {
        self.diameter * self.diameter / (2.0 * self.area)
    }
}

/// Computes the anisotropic geometry of a nondegenerate triangle.
pub fn element_geometry(points: &[Point2; 3]) -> Result<ElementGeometry> {
    ElementGeometry::new(points)
}

/// Largest interior angle of a triangle, in radians.
pub fn max_angle(points: &[Point2; 3]) -> f64 {
    (0..3)
        .map(|i| {
            let a = points[(i + 1) % 3] - points[i];
            let b = points[(i + 2) % 3] - points[i];
            a.cross(b).abs().atan2(a.dot(b))
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(x: f64, y: f64) -> Point2 {
        Point2::new(x, y)
    }

    #[test]
    fn thin_right_triangle_labels() {
        let c = label_longest_edge(&[p(0.0, 0.0), p(1.0, 0.0), p(0.0, 0.1)]).unwrap();
        assert_eq!(c.p1, p(0.0, 0.0));
        assert!((c.h1 - 1.0).abs() < 1e-15);
        assert!((c.h2 - 0.1).abs() < 1e-15);
        assert!((c.r1 - p(1.0, 0.0)).norm() < 1e-15);
        assert!((c.r2 - p(0.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn isosceles_right_triangle_tie_break() {
        let a = 0.3;
        let c = label_longest_edge(&[p(1.0, 1.0), p(1.0 + a, 1.0), p(1.0, 1.0 + a)]).unwrap();
        assert_eq!(c.labels, [0, 1, 2]);
        assert!((c.h1 - a).abs() < 1e-15 && (c.h2 - a).abs() < 1e-15);
        // permuted input keeps the right-angle vertex as p1
        let c = label_longest_edge(&[p(1.0 + a, 1.0), p(1.0, 1.0 + a), p(1.0, 1.0)]).unwrap();
        assert_eq!(c.labels, [2, 0, 1]);
    }

    #[test]
    fn equilateral_is_deterministic() {
        let pts = [p(0.0, 0.0), p(1.0, 0.0), p(0.5, 0.75f64.sqrt())];
        let c = label_longest_edge(&pts).unwrap();
        // every edge is longest; (0, 1) is the smallest id pair
        assert_eq!(c.labels, [2, 0, 1]);
        assert!((c.h1 - 1.0).abs() < 1e-12 && (c.h2 - 1.0).abs() < 1e-12);
        assert_eq!(label_longest_edge(&pts).unwrap(), c);
    }

    #[test]
    fn zero_area_is_rejected() {
        let err = label_longest_edge(&[p(0.0, 0.0), p(1.0, 0.0), p(2.0, 0.0)]).unwrap_err();
        assert!(matches!(err, FemError::Geometry(_)));
        assert!(element_geometry(&[p(0.0, 0.0), p(0.0, 0.0), p(0.0, 1.0)]).is_err());
    }

    #[test]
    fn unit_right_triangle_geometry() {
        let g = element_geometry(&[p(0.0, 0.0), p(1.0, 0.0), p(0.0, 1.0)]).unwrap();
        let s2 = 2f64.sqrt();
        assert!((g.area - 0.5).abs() < 1e-15);
        assert!((g.diameter - s2).abs() < 1e-15);
        assert!((g.big_h - 2.0 * s2).abs() < 1e-14);
        // hypotenuse is opposite local vertex 0
        assert!((g.ell[0] - 1.0 / s2).abs() < 1e-15);
        assert!((g.ell[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn thin_right_triangle_shape_parameter_tends_to_two() {
        // H_T / h_T = 2 for every right triangle: h1 h2 = 2|T|
        for eps in [1e-1, 1e-3, 1e-6] {
            let g = element_geometry(&[p(0.0, 0.0), p(1.0, 0.0), p(0.0, eps)]).unwrap();
            assert!((g.shape_parameter() - 2.0).abs() < 1e-9, "eps={eps}");
        }
    }

    #[test]
    fn rigid_motion_invariance() {
        let pts = [p(0.1, 0.2), p(0.9, 0.25), p(0.3, 0.31)];
        let g = element_geometry(&pts).unwrap();
        let (s, c) = 0.7f64.sin_cos();
        let rot = |q: Point2| p(c * q.x - s * q.y + 3.0, s * q.x + c * q.y - 1.0);
        let moved = [rot(pts[0]), rot(pts[1]), rot(pts[2])];
        let gm = element_geometry(&moved).unwrap();
        assert!((g.big_h - gm.big_h).abs() < 1e-12 * g.big_h);
        assert!((g.h1 - gm.h1).abs() < 1e-12 && (g.h2 - gm.h2).abs() < 1e-12);
    }

    #[test]
    fn max_angle_of_right_triangle() {
        let a = max_angle(&[p(0.0, 0.0), p(2.0, 0.0), p(0.0, 0.1)]);
        assert!((a - std::f64::consts::FRAC_PI_2).abs() < 1e-14);
    }
}
