//! Planar primitives for reachability analysis.
//!
//! A reachability region between two timed waypoints is a focal-sum ellipse:
//! every point whose distances to the two foci add up to less than `2a`.
//! Forbidden regions are convex polygons. The one non-trivial kernel is the
//! ellipse/polygon intersection test, which reduces to minimizing the focal
//! sum over each polygon edge.

use alloc::vec::Vec;
use core::ops::{Add, Mul, Sub};

use crate::num;
use crate::{Error, Result};

/// Focal sums within this distance of `2a` count as touching the ellipse.
///
/// Security checks must never under-report reachability, so boundary
/// contact is treated as intersection.
pub const BOUNDARY_TOL: f64 = 1e-9;

/// Golden-section search stops once the bracket is shorter than this
/// (in the segment parameter, which lives in `[0, 1]`).
const GOLDEN_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point2) -> f64 {
        num::hypot(self.x - other.x, self.y - other.y)
    }

    pub fn norm(self) -> f64 {
        num::hypot(self.x, self.y)
    }

    pub fn dot(self, other: Point2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 2-D cross product.
    pub fn cross(self, other: Point2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn lerp(self, other: Point2, s: f64) -> Point2 {
        Point2::new(self.x + s * (other.x - self.x), self.y + s * (other.y - self.y))
    }

    pub fn midpoint(self, other: Point2) -> Point2 {
        self.lerp(other, 0.5)
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, rhs: Point2) -> Point2 {
        Point2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, rhs: Point2) -> Point2 {
        Point2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, s: f64) -> Point2 {
        Point2::new(self.x * s, self.y * s)
    }
}

impl From<[f64; 2]> for Point2 {
    fn from([x, y]: [f64; 2]) -> Self {
        Point2::new(x, y)
    }
}

impl From<Point2> for [f64; 2] {
    fn from(p: Point2) -> Self {
        [p.x, p.y]
    }
}

/// A strictly convex polygon with counter-clockwise vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexPolygon {
    vertices: Vec<Point2>,
}

impl ConvexPolygon {
    /// Validates and stores the polygon. Clockwise input is reversed.
    pub fn new(mut vertices: Vec<Point2>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::InvalidPolygon("needs at least 3 vertices"));
        }
        if vertices.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidPolygon("non-finite vertex"));
        }
        let n = vertices.len();
        for i in 0..n {
            for j in i + 1..n {
                if vertices[i] == vertices[j] {
                    return Err(Error::InvalidPolygon("repeated vertex"));
                }
            }
        }
        let twice_area: f64 = (0..n)
            .map(|i| vertices[i].cross(vertices[(i + 1) % n]))
            .sum();
        if twice_area < 0.0 {
            vertices.reverse();
        }
        for i in 0..n {
            let a = vertices[i];
            let b = vertices[(i + 1) % n];
            let c = vertices[(i + 2) % n];
            if (b - a).cross(c - b) <= 0.0 {
                return Err(Error::InvalidPolygon("not strictly convex"));
            }
        }
        Ok(Self { vertices })
    }

    /// Axis-aligned rectangle `[min.x, max.x] × [min.y, max.y]`.
    pub fn rectangle(min: Point2, max: Point2) -> Result<Self> {
        Self::new(alloc::vec![
            min,
            Point2::new(max.x, min.y),
            max,
            Point2::new(min.x, max.y),
        ])
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    /// Edges as `(start, end)` pairs in counter-clockwise order.
    pub fn edges(&self) -> impl Iterator<Item = (Point2, Point2)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    pub fn centroid(&self) -> Point2 {
        let n = self.vertices.len() as f64;
        let sum = self.vertices.iter().fold(Point2::default(), |acc, v| acc + *v);
        sum * (1.0 / n)
    }

    /// Largest distance from the vertex centroid to a vertex.
    pub fn circumradius(&self) -> f64 {
        let c = self.centroid();
        self.vertices.iter().map(|v| v.distance(c)).fold(0.0, f64::max)
    }

    pub fn bounding_box(&self) -> (Point2, Point2) {
        let mut lo = self.vertices[0];
        let mut hi = self.vertices[0];
        for v in &self.vertices[1..] {
            lo = Point2::new(lo.x.min(v.x), lo.y.min(v.y));
            hi = Point2::new(hi.x.max(v.x), hi.y.max(v.y));
        }
        (lo, hi)
    }
}

/// `{ p : d(f1, p) + d(p, f2) < two_a }`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FocalEllipse {
    pub f1: Point2,
    pub f2: Point2,
    pub two_a: f64,
}

impl FocalEllipse {
    /// Rejects a focal-sum bound shorter than the focal distance. Exactly
    /// equal (within [`BOUNDARY_TOL`]) is the degenerate segment ellipse.
    pub fn new(f1: Point2, f2: Point2, two_a: f64) -> Result<Self> {
        let focal_distance = f1.distance(f2);
        if !two_a.is_finite() || two_a < focal_distance - BOUNDARY_TOL {
            return Err(Error::InvalidEllipse {
                two_a,
                focal_distance,
            });
        }
        Ok(Self { f1, f2, two_a })
    }

    pub fn focal_sum(&self, p: Point2) -> f64 {
        self.f1.distance(p) + p.distance(self.f2)
    }
}

/// Strict membership, exactly as the reachability set is defined.
pub fn point_in_ellipse(p: Point2, e: &FocalEllipse) -> bool {
    e.focal_sum(p) < e.two_a
}

/// Inside or on the boundary of a convex polygon.
pub fn point_in_polygon(p: Point2, poly: &ConvexPolygon) -> bool {
    poly.edges().all(|(a, b)| (b - a).cross(p - a) >= 0.0)
}

/// Minimum of `d(f1, p) + d(p, f2)` over the closed segment `[a, b]`.
///
/// The objective is convex along the segment, so golden-section search on
/// the segment parameter finds the global minimum.
pub fn segment_min_focal_sum(a: Point2, b: Point2, f1: Point2, f2: Point2) -> f64 {
    let g = |s: f64| {
        let p = a.lerp(b, s);
        f1.distance(p) + p.distance(f2)
    };
    let at_ends = g(0.0).min(g(1.0));
    if a == b {
        return at_ends;
    }

    let inv_phi = (num::sqrt(5.0) - 1.0) / 2.0;
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut g1 = g(x1);
    let mut g2 = g(x2);
    while hi - lo > GOLDEN_TOL {
        if g1 <= g2 {
            hi = x2;
            x2 = x1;
            g2 = g1;
            x1 = hi - inv_phi * (hi - lo);
            g1 = g(x1);
        } else {
            lo = x1;
            x1 = x2;
            g1 = g2;
            x2 = lo + inv_phi * (hi - lo);
            g2 = g(x2);
        }
    }
    at_ends.min(g1).min(g2).min(g(0.5 * (lo + hi)))
}

/// Minimum focal sum over the closed polygon (boundary and interior).
pub fn polygon_min_focal_sum(e: &FocalEllipse, poly: &ConvexPolygon) -> f64 {
    let mid = e.f1.midpoint(e.f2);
    if point_in_polygon(mid, poly) {
        return e.f1.distance(e.f2);
    }
    poly.edges()
        .map(|(a, b)| segment_min_focal_sum(a, b, e.f1, e.f2))
        .fold(f64::INFINITY, f64::min)
}

/// Whether the ellipse touches the closed polygon.
///
/// True when a vertex lies in the ellipse, an edge comes within the focal
/// bound, or the ellipse sits entirely inside the polygon. Boundary contact
/// (within [`BOUNDARY_TOL`]) counts as intersection.
pub fn ellipse_intersects_polygon(e: &FocalEllipse, poly: &ConvexPolygon) -> bool {
    let bound = e.two_a + BOUNDARY_TOL;
    if poly.vertices().iter().any(|v| e.focal_sum(*v) < bound) {
        return true;
    }
    if poly
        .edges()
        .any(|(a, b)| segment_min_focal_sum(a, b, e.f1, e.f2) < bound)
    {
        return true;
    }
    point_in_polygon(e.f1.midpoint(e.f2), poly)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square() -> ConvexPolygon {
        ConvexPolygon::rectangle(Point2::new(0.0, 0.0), Point2::new(1.0, 1.0)).unwrap()
    }

    fn square_at(c: Point2, half: f64) -> ConvexPolygon {
        ConvexPolygon::rectangle(
            Point2::new(c.x - half, c.y - half),
            Point2::new(c.x + half, c.y + half),
        )
        .unwrap()
    }

    #[test]
    fn ellipse_membership_examples() {
        let e = FocalEllipse::new(Point2::new(0.0, 0.0), Point2::new(4.0, 0.0), 6.0).unwrap();
        // 2·√8 ≈ 5.657 < 6
        assert!(point_in_ellipse(Point2::new(2.0, 2.0), &e));
        assert!(point_in_ellipse(e.f1, &e));

        let seg = FocalEllipse::new(Point2::new(0.0, 0.0), Point2::new(4.0, 0.0), 4.0).unwrap();
        assert!(!point_in_ellipse(Point2::new(2.0, 1.0), &seg));
    }

    #[test]
    fn ellipse_rejects_short_focal_sum() {
        let err = FocalEllipse::new(Point2::new(0.0, 0.0), Point2::new(4.0, 0.0), 3.0);
        assert!(matches!(err, Err(Error::InvalidEllipse { .. })));
    }

    #[test]
    fn polygon_membership_examples() {
        let sq = unit_square();
        assert!(point_in_polygon(Point2::new(0.5, 0.5), &sq));
        assert!(!point_in_polygon(Point2::new(2.0, 0.0), &sq));
        assert!(point_in_polygon(Point2::new(1.0, 0.5), &sq));
    }

    #[test]
    fn polygon_validation() {
        assert!(ConvexPolygon::new(alloc::vec![Point2::new(0.0, 0.0), Point2::new(1.0, 0.0)]).is_err());
        // collinear
        assert!(ConvexPolygon::new(alloc::vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(2.0, 0.0)
        ])
        .is_err());
        // clockwise input is accepted and normalized
        let cw = ConvexPolygon::new(alloc::vec![
            Point2::new(0.0, 0.0),
            Point2::new(0.0, 1.0),
            Point2::new(1.0, 1.0),
            Point2::new(1.0, 0.0)
        ])
        .unwrap();
        assert!(point_in_polygon(Point2::new(0.5, 0.5), &cw));
        // reflex vertex
        assert!(ConvexPolygon::new(alloc::vec![
            Point2::new(0.0, 0.0),
            Point2::new(2.0, 0.0),
            Point2::new(1.0, 0.5),
            Point2::new(2.0, 2.0),
            Point2::new(0.0, 2.0)
        ])
        .is_err());
        assert!(ConvexPolygon::new(alloc::vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(0.0, 0.0),
            Point2::new(0.0, 1.0)
        ])
        .is_err());
    }

    #[test]
    fn segment_min_examples() {
        let f1 = Point2::new(-1.0, 0.0);
        let f2 = Point2::new(1.0, 0.0);
        // by symmetry the minimizer is (0, 1): √2 + √2
        let m = segment_min_focal_sum(Point2::new(-1.0, 1.0), Point2::new(1.0, 1.0), f1, f2);
        assert!((m - 2.0 * core::f64::consts::SQRT_2).abs() < 1e-9);

        let through = segment_min_focal_sum(Point2::new(-3.0, 0.0), Point2::new(3.0, 0.0), f1, f2);
        assert!((through - 2.0).abs() < 1e-12);

        let p = Point2::new(0.3, 2.0);
        let point = segment_min_focal_sum(p, p, f1, f2);
        assert_eq!(point, f1.distance(p) + p.distance(f2));
    }

    #[test]
    fn intersection_examples() {
        let e = FocalEllipse::new(Point2::new(0.0, 0.0), Point2::new(4.0, 0.0), 6.0).unwrap();
        assert!(!ellipse_intersects_polygon(&e, &square_at(Point2::new(20.0, 20.0), 1.0)));
        assert!(ellipse_intersects_polygon(&e, &square_at(Point2::new(0.0, 0.0), 0.2)));
        // nearest point (2, 1.9): 2·√(4 + 3.61) ≈ 5.517 < 6
        assert!(ellipse_intersects_polygon(&e, &square_at(Point2::new(2.0, 2.4), 0.5)));
        // polygon swallowing the whole ellipse
        assert!(ellipse_intersects_polygon(&e, &square_at(Point2::new(2.0, 0.0), 10.0)));
    }

    #[test]
    fn boundary_contact_counts() {
        // nearest point (2, 1) has focal sum 2·√5 exactly
        let two_a = 2.0 * num::sqrt(5.0);
        let e = FocalEllipse::new(Point2::new(0.0, 0.0), Point2::new(4.0, 0.0), two_a).unwrap();
        let poly = ConvexPolygon::rectangle(Point2::new(1.0, 1.0), Point2::new(3.0, 2.0)).unwrap();
        assert!(ellipse_intersects_polygon(&e, &poly));
    }
}
