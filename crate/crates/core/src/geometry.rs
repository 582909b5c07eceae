//! Planar geometry for the low-level checks.
//!
//! Orientation predicates are evaluated in the coordinate type itself, so
//! integer inputs (`i64`) get exact hulls and containment tests. Floating
//! point is used where positions come out of trigonometry (arm elbows) or
//! are cell centers.

use std::ops::{Add, Mul, Sub};

use thiserror::Error;

pub trait Scalar: Copy + PartialOrd + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> {
    const ZERO: Self;
    fn to_f64(self) -> f64;
}

impl Scalar for i64 {
    const ZERO: Self = 0;
    fn to_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    const ZERO: Self = 0.0;
    fn to_f64(self) -> f64 {
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Default)]
pub struct Point<T = f64> {
    pub x: T,
    pub y: T,
}

impl<T> Point<T> {
    pub const fn new(x: T, y: T) -> Self {
        Point { x, y }
    }
}

impl<T: Scalar> Point<T> {
    pub fn to_f64(self) -> Point<f64> {
        Point::new(self.x.to_f64(), self.y.to_f64())
    }
}

impl Point<f64> {
    pub fn distance(self, other: Point<f64>) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn lerp(self, other: Point<f64>, t: f64) -> Point<f64> {
        Point::new(self.x + (other.x - self.x) * t, self.y + (other.y - self.y) * t)
    }
}

/// Twice the signed area of `(o, a, b)`; positive when counter-clockwise.
pub fn cross<T: Scalar>(o: Point<T>, a: Point<T>, b: Point<T>) -> T {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

fn lex_lt<T: Scalar>(a: &Point<T>, b: &Point<T>) -> bool {
    a.x < b.x || (a.x == b.x && a.y < b.y)
}

fn lex_cmp<T: Scalar>(a: &Point<T>, b: &Point<T>) -> std::cmp::Ordering {
    if lex_lt(a, b) {
        std::cmp::Ordering::Less
    } else if lex_lt(b, a) {
        std::cmp::Ordering::Greater
    } else {
        std::cmp::Ordering::Equal
    }
}

/// Convex polygon, counter-clockwise, starting at its lexicographically
/// smallest vertex. One vertex is a point, two a segment.
#[derive(Clone, Debug, PartialEq)]
pub struct Polygon<T = f64> {
    pub vertices: Vec<Point<T>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GeometryError {
    #[error("convex hull of an empty point set")]
    EmptyInput,
}

/// Monotone-chain hull with collinear points dropped.
pub fn convex_hull<T: Scalar>(points: &[Point<T>]) -> Result<Polygon<T>, GeometryError> {
    if points.is_empty() {
        return Err(GeometryError::EmptyInput);
    }
    let mut pts = points.to_vec();
    pts.sort_by(lex_cmp);
    pts.dedup_by(|a, b| a == b);
    if pts.len() <= 2 {
        return Ok(Polygon { vertices: pts });
    }

    let mut lower: Vec<Point<T>> = Vec::with_capacity(pts.len());
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= T::ZERO {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<Point<T>> = Vec::with_capacity(pts.len());
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= T::ZERO {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    // Collinear input leaves one extreme in each chain.
    lower.extend(upper);
    Ok(Polygon { vertices: lower })
}

/// Whether `p` lies on the closed segment `a`–`b`.
pub fn on_segment<T: Scalar>(p: Point<T>, a: Point<T>, b: Point<T>) -> bool {
    cross(a, b, p) == T::ZERO && within_box(p, a, b)
}

fn within_box<T: Scalar>(p: Point<T>, a: Point<T>, b: Point<T>) -> bool {
    let (lx, hx) = if a.x <= b.x { (a.x, b.x) } else { (b.x, a.x) };
    let (ly, hy) = if a.y <= b.y { (a.y, b.y) } else { (b.y, a.y) };
    lx <= p.x && p.x <= hx && ly <= p.y && p.y <= hy
}

/// Boundary-inclusive containment in a hull produced by [`convex_hull`].
pub fn point_in_hull<T: Scalar>(p: Point<T>, hull: &Polygon<T>) -> bool {
    let v = &hull.vertices;
    match v.len() {
        0 => false,
        1 => p == v[0],
        2 => on_segment(p, v[0], v[1]),
        n => (0..n).all(|i| cross(v[i], v[(i + 1) % n], p) >= T::ZERO),
    }
}

fn sign<T: Scalar>(v: T) -> i8 {
    if v > T::ZERO {
        1
    } else if v < T::ZERO {
        -1
    } else {
        0
    }
}

/// Closed segments `a1a2` and `b1b2` share at least one point.
pub fn segments_intersect<T: Scalar>(a1: Point<T>, a2: Point<T>, b1: Point<T>, b2: Point<T>) -> bool {
    let d1 = sign(cross(b1, b2, a1));
    let d2 = sign(cross(b1, b2, a2));
    let d3 = sign(cross(a1, a2, b1));
    let d4 = sign(cross(a1, a2, b2));
    if d1 * d2 < 0 && d3 * d4 < 0 {
        return true;
    }
    (d1 == 0 && within_box(a1, b1, b2))
        || (d2 == 0 && within_box(a2, b1, b2))
        || (d3 == 0 && within_box(b1, a1, a2))
        || (d4 == 0 && within_box(b2, a1, a2))
}

/// Closed segment `a`–`b` against the closed unit square `[cx,cx+1]×[cy,cy+1]`.
pub fn segment_intersects_cell(a: Point<f64>, b: Point<f64>, cell: (i64, i64)) -> bool {
    let (x0, y0) = (cell.0 as f64, cell.1 as f64);
    let (x1, y1) = (x0 + 1.0, y0 + 1.0);
    // Bounding boxes must overlap.
    if a.x.max(b.x) < x0 || a.x.min(b.x) > x1 || a.y.max(b.y) < y0 || a.y.min(b.y) > y1 {
        return false;
    }
    // The square must not lie strictly on one side of the segment's line.
    let corners = [Point::new(x0, y0), Point::new(x1, y0), Point::new(x1, y1), Point::new(x0, y1)];
    let sides: Vec<i8> = corners.iter().map(|&c| sign(cross(a, b, c))).collect();
    let all_pos = sides.iter().all(|&s| s > 0);
    let all_neg = sides.iter().all(|&s| s < 0);
    !(all_pos || all_neg)
}
