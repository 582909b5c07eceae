mod common;

use common::geom::{boundary_distance, hull_matches, in_some_triangle};
use hybridplan::geometry::{convex_hull, point_in_hull, Point};
use proptest::prelude::*;

const EPS: f64 = 1e-9;

fn int_points(max: usize) -> impl Strategy<Value = Vec<Point<i64>>> {
    prop::collection::vec((-12i64..=12, -12i64..=12).prop_map(|(x, y)| Point::new(x, y)), 1..max)
}

fn float_points(max: usize) -> impl Strategy<Value = Vec<Point>> {
    prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0).prop_map(|(x, y)| Point::new(x, y)), 1..max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn integer_hull_matches_edge_oracle(pts in int_points(25)) {
        let hull = convex_hull(&pts).unwrap();
        prop_assert_eq!(hull_matches(&pts, &hull), Ok(()));
    }

    #[test]
    fn float_hull_matches_edge_oracle(pts in float_points(25)) {
        let hull = convex_hull(&pts).unwrap();
        prop_assert_eq!(hull_matches(&pts, &hull), Ok(()));
    }

    #[test]
    fn integer_containment_is_exact(pts in int_points(12), q in prop::collection::vec((-14i64..=14, -14i64..=14), 20)) {
        let hull = convex_hull(&pts).unwrap();
        for (x, y) in q {
            let p = Point::new(x, y);
            prop_assert_eq!(point_in_hull(p, &hull), in_some_triangle(&pts, p), "query {:?}", p);
        }
    }

    #[test]
    fn float_containment_away_from_boundary(
        pts in float_points(12),
        q in prop::collection::vec((-11.0f64..11.0, -11.0f64..11.0), 20),
        w in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 12), 5),
    ) {
        let hull = convex_hull(&pts).unwrap();
        let mut queries: Vec<Point> = q.into_iter().map(|(x, y)| Point::new(x, y)).collect();
        // Random convex combinations are inside by construction.
        for ws in &w {
            let total: f64 = ws[..pts.len()].iter().sum();
            if total > 0.0 {
                let (x, y) = pts.iter().zip(ws).fold((0.0, 0.0), |(x, y), (p, &k)| (x + k * p.x, y + k * p.y));
                let c = Point::new(x / total, y / total);
                if boundary_distance(c, &hull) > EPS {
                    prop_assert!(point_in_hull(c, &hull), "combination {:?}", c);
                }
            }
        }
        queries.retain(|&p| boundary_distance(p, &hull) > EPS);
        for p in queries {
            prop_assert_eq!(point_in_hull(p, &hull), in_some_triangle(&pts, p), "query {:?}", p);
        }
    }
}
