//! Planar geometry for the deployment scene.

use serde::{Deserialize, Serialize};

/// A point in the room plane, metres.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

impl From<(f64, f64)> for Point {
    fn from((x, y): (f64, f64)) -> Self {
        Point { x, y }
    }
}

/// Shortest distance from `p` to the segment from `a` to `b`.
pub fn segment_distance(a: Point, b: Point, p: Point) -> f64 {
    let abx = b.x - a.x;
    let aby = b.y - a.y;
    let len_sq = abx * abx + aby * aby;
    if len_sq == 0.0 {
        return a.distance(p);
    }
    let t = ((p.x - a.x) * abx + (p.y - a.y) * aby) / len_sq;
    let t = t.clamp(0.0, 1.0);
    let proj = Point::new(a.x + t * abx, a.y + t * aby);
    proj.distance(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distance_is_euclidean() {
        assert_eq!(Point::new(0.0, 0.0).distance(Point::new(3.0, 4.0)), 5.0);
    }

    #[test]
    fn segment_distance_interior_and_endpoints() {
        let a = Point::new(0.0, 0.0);
        let b = Point::new(4.0, 0.0);
        // perpendicular drop onto the interior
        assert!((segment_distance(a, b, Point::new(2.0, 1.5)) - 1.5).abs() < 1e-12);
        // beyond the endpoint the nearest point is the endpoint itself
        assert!((segment_distance(a, b, Point::new(7.0, 4.0)) - 5.0).abs() < 1e-12);
        // degenerate segment
        assert_eq!(segment_distance(a, a, Point::new(0.0, 2.0)), 2.0);
    }
}
