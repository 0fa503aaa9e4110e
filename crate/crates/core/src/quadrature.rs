//! Fixed quadrature on triangles and edges, exact for polynomials of degree 5.

use crate::mesh::{signed_area, Point2};

/// Symmetric rule on the reference triangle with weights normalised to sum to one.
#[derive(Clone, Copy, Debug)]
pub struct TriangleRule {
    pub points: &'static [[f64; 3]],
    pub weights: &'static [f64],
}

/// Gauss rule on `[0, 1]` with weights normalised to sum to one.
#[derive(Clone, Copy, Debug)]
pub struct EdgeRule {
    pub points: &'static [f64],
    pub weights: &'static [f64],
}

const A1: f64 = 0.101_286_507_323_456_338_8;
const B1: f64 = 0.797_426_985_353_087_322_4;
const W1: f64 = 0.125_939_180_544_827_152_6;
const A2: f64 = 0.470_142_064_105_115_089_77;
const B2: f64 = 0.059_715_871_789_769_820_459;
const W2: f64 = 0.132_394_152_788_506_180_74;

const TRI7_POINTS: [[f64; 3]; 7] = [
    [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
    [A1, A1, B1],
    [A1, B1, A1],
    [B1, A1, A1],
    [A2, A2, B2],
    [A2, B2, A2],
    [B2, A2, A2],
];
const TRI7_WEIGHTS: [f64; 7] = [9.0 / 40.0, W1, W1, W1, W2, W2, W2];

const G3: f64 = 0.112_701_665_379_258_311_48;
const EDGE3_POINTS: [f64; 3] = [G3, 0.5, 1.0 - G3];
const EDGE3_WEIGHTS: [f64; 3] = [5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0];

/// Seven-point degree-5 rule.
pub const TRIANGLE_DEGREE5: TriangleRule = TriangleRule {
    points: &TRI7_POINTS,
    weights: &TRI7_WEIGHTS,
};

/// Three-point Gauss–Legendre rule (degree 5).
pub const EDGE_DEGREE5: EdgeRule = EdgeRule {
    points: &EDGE3_POINTS,
    weights: &EDGE3_WEIGHTS,
};

impl TriangleRule {
    /// Physical quadrature points of the triangle `t` paired with absolute weights.
    pub fn map(&self, t: &[Point2; 3]) -> impl Iterator<Item = (Point2, f64)> + '_ {
        let area = signed_area(t[0], t[1], t[2]).abs();
        let t = *t;
        self.points
            .iter()
            .zip(self.weights)
            .map(move |(l, &w)| (t[0] * l[0] + t[1] * l[1] + t[2] * l[2], w * area))
    }
}

impl EdgeRule {
    /// Physical quadrature points on segment `a -> b` with absolute weights.
    pub fn map(&self, a: Point2, b: Point2) -> impl Iterator<Item = (Point2, f64)> + '_ {
        let len = a.distance(b);
        self.points
            .iter()
            .zip(self.weights)
            .map(move |(&s, &w)| (a + (b - a) * s, w * len))
    }
}

/// Integral of `f` over the triangle `t`.
pub fn integrate_triangle<F: Fn(Point2) -> f64>(t: &[Point2; 3], f: F) -> f64 {
    TRIANGLE_DEGREE5.map(t).map(|(x, w)| w * f(x)).sum()
}

/// Integral of `f` over the segment `a -> b`.
pub fn integrate_edge<F: Fn(Point2) -> f64>(a: Point2, b: Point2, f: F) -> f64 {
    EDGE_DEGREE5.map(a, b).map(|(x, w)| w * f(x)).sum()
}

/// Mean value of `f` over the segment `a -> b`.
pub fn edge_mean<F: Fn(Point2) -> f64>(a: Point2, b: Point2, f: F) -> f64 {
    EDGE_DEGREE5
        .points
        .iter()
        .zip(EDGE_DEGREE5.weights)
        .map(|(&s, &w)| w * f(a + (b - a) * s))
        .sum()
}
