use coobs_core::geometry::{ellipse_intersects_polygon, point_in_polygon, polygon_min_focal_sum, ConvexPolygon, FocalEllipse};
use coobs_core::Point2;
use proptest::prelude::*;

fn regular_polygon(c: Point2, radius: f64, sides: usize, phase: f64) -> ConvexPolygon {
    let vertices = (0..sides)
        .map(|k| {
            let a = phase + k as f64 * std::f64::consts::TAU / sides as f64;
            Point2::new(c.x + radius * a.cos(), c.y + radius * a.sin())
        })
        .collect();
    ConvexPolygon::new(vertices).unwrap()
}

/// Smallest focal sum over dense boundary samples and an interior grid.
fn sampled_min(f1: Point2, f2: Point2, poly: &ConvexPolygon) -> f64 {
    let g = |p: Point2| f1.distance(p) + p.distance(f2);
    let mut best = f64::INFINITY;
    for (a, b) in poly.edges() {
        for k in 0..=400 {
            best = best.min(g(a.lerp(b, k as f64 / 400.0)));
        }
    }
    let (lo, hi) = poly.bounding_box();
    for i in 0..=60 {
        for j in 0..=60 {
            let p = Point2::new(lo.x + (hi.x - lo.x) * i as f64 / 60.0, lo.y + (hi.y - lo.y) * j as f64 / 60.0);
            if point_in_polygon(p, poly) {
                best = best.min(g(p));
            }
        }
    }
    best
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn minimum_focal_sum_is_below_every_sample(
        cx in -3.0f64..3.0, cy in -3.0f64..3.0, radius in 0.1f64..2.0, sides in 3usize..8, phase in 0.0f64..6.3,
        f1x in -4.0f64..4.0, f1y in -4.0f64..4.0, f2x in -4.0f64..4.0, f2y in -4.0f64..4.0,
    ) {
        let poly = regular_polygon(Point2::new(cx, cy), radius, sides, phase);
        let (f1, f2) = (Point2::new(f1x, f1y), Point2::new(f2x, f2y));
        let e = FocalEllipse::new(f1, f2, f1.distance(f2) + 1.0).unwrap();
        let exact = polygon_min_focal_sum(&e, &poly);
        let sampled = sampled_min(f1, f2, &poly);
        prop_assert!(exact <= sampled + 1e-9);
        // boundary spacing bounds the sampling error (focal sum is 2-Lipschitz)
        let spacing = poly.edges().map(|(a, b)| a.distance(b)).fold(0.0, f64::max) / 400.0;
        prop_assert!(sampled - exact <= spacing + 1e-9);
    }

    #[test]
    fn intersection_agrees_with_sampling_away_from_the_boundary(
        cx in -3.0f64..3.0, cy in -3.0f64..3.0, radius in 0.1f64..2.0, sides in 3usize..8, phase in 0.0f64..6.3,
        f1x in -4.0f64..4.0, f1y in -4.0f64..4.0, f2x in -4.0f64..4.0, f2y in -4.0f64..4.0, extra in 0.0f64..6.0,
    ) {
        let poly = regular_polygon(Point2::new(cx, cy), radius, sides, phase);
        let (f1, f2) = (Point2::new(f1x, f1y), Point2::new(f2x, f2y));
        let two_a = f1.distance(f2) + extra;
        let e = FocalEllipse::new(f1, f2, two_a).unwrap();
        let sampled = sampled_min(f1, f2, &poly);
        let spacing = poly.edges().map(|(a, b)| a.distance(b)).fold(0.0, f64::max) / 400.0;
        if sampled < two_a - 1e-6 {
            prop_assert!(ellipse_intersects_polygon(&e, &poly));
        } else if sampled - spacing > two_a + 1e-6 {
            prop_assert!(!ellipse_intersects_polygon(&e, &poly));
        }
    }

    #[test]
    fn polygon_contains_its_centroid(cx in -3.0f64..3.0, cy in -3.0f64..3.0, radius in 0.1f64..2.0, sides in 3usize..9) {
        let poly = regular_polygon(Point2::new(cx, cy), radius, sides, 0.3);
        prop_assert!(point_in_polygon(poly.centroid(), &poly));
        prop_assert!(poly.vertices().iter().all(|v| v.distance(poly.centroid()) <= poly.circumradius() + 1e-12));
    }
}
