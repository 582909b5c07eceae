//! Slow reference answers for hull construction and containment.

use hybridplan::geometry::{cross, Point, Polygon, Scalar};

/// Directed hull edges `a -> b`: every point lies left of or on the line,
/// and points on the line lie on the closed segment.
pub fn hull_edges<T: Scalar>(pts: &[Point<T>]) -> Vec<(Point<T>, Point<T>)> {
    let mut out = Vec::new();
    for &a in pts {
        for &b in pts {
            if a == b {
                continue;
            }
            let ok = pts.iter().all(|&p| {
                let c = cross(a, b, p);
                c > T::ZERO || (c == T::ZERO && between(p, a, b))
            });
            if ok && !out.contains(&(a, b)) {
                out.push((a, b));
            }
        }
    }
    out
}

fn between<T: Scalar>(p: Point<T>, a: Point<T>, b: Point<T>) -> bool {
    let inside = |v: T, l: T, h: T| (l <= v && v <= h) || (h <= v && v <= l);
    inside(p.x, a.x, b.x) && inside(p.y, a.y, b.y)
}

/// Checks `hull` against the outcome of [`hull_edges`]. Returns a
/// description of the first disagreement.
pub fn hull_matches<T: Scalar + std::fmt::Debug>(pts: &[Point<T>], hull: &Polygon<T>) -> Result<(), String> {
    let edges = hull_edges(pts);
    let v = &hull.vertices;
    let mut expected: Vec<Point<T>> = edges.iter().map(|e| e.0).collect();
    if edges.is_empty() {
        expected.push(pts[0]);
    }
    expected.sort_by(|a, b| a.x.partial_cmp(&b.x).unwrap().then(a.y.partial_cmp(&b.y).unwrap()));
    expected.dedup();
    let mut got = v.clone();
    got.sort_by(|a, b| a.x.partial_cmp(&b.x).unwrap().then(a.y.partial_cmp(&b.y).unwrap()));
    if got != expected {
        return Err(format!("vertices {got:?}, expected {expected:?}"));
    }
    if v[0] != expected[0] {
        return Err(format!("starts at {:?}, not the lexicographic minimum", v[0]));
    }
    if v.len() >= 2 {
        for i in 0..v.len() {
            let e = (v[i], v[(i + 1) % v.len()]);
            if !edges.contains(&e) {
                return Err(format!("{:?} -> {:?} is not a counter-clockwise hull edge", e.0, e.1));
            }
        }
    }
    Ok(())
}

/// Closed containment via some triangle of input points (repeats allowed,
/// so points and segments are covered too).
pub fn in_some_triangle<T: Scalar>(pts: &[Point<T>], p: Point<T>) -> bool {
    pts.iter().any(|&a| {
        pts.iter().any(|&b| {
            pts.iter().any(|&c| {
                let d = [cross(a, b, p), cross(b, c, p), cross(c, a, p)];
                let same = d.iter().all(|&x| x >= T::ZERO) || d.iter().all(|&x| x <= T::ZERO);
                let lo = |f: fn(&Point<T>) -> T| [f(&a), f(&b), f(&c)].into_iter().fold(f(&a), |m, x| if x < m { x } else { m });
                let hi = |f: fn(&Point<T>) -> T| [f(&a), f(&b), f(&c)].into_iter().fold(f(&a), |m, x| if x > m { x } else { m });
                let boxed = lo(|q| q.x) <= p.x && p.x <= hi(|q| q.x) && lo(|q| q.y) <= p.y && p.y <= hi(|q| q.y);
                same && boxed
            })
        })
    })
}

/// Distance from `p` to the closed segment `a`–`b`.
pub fn segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 { 0.0 } else { (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0) };
    p.distance(Point::new(a.x + t * dx, a.y + t * dy))
}

/// Distance from `p` to the boundary of `hull`.
pub fn boundary_distance(p: Point, hull: &Polygon) -> f64 {
    let v = &hull.vertices;
    (0..v.len())
        .map(|i| segment_distance(p, v[i], v[(i + 1) % v.len()]))
        .fold(f64::INFINITY, f64::min)
}
