//! Planar geometry on the image frame (origin top-left, x right, y down).

mod contour;
mod hull;

pub use contour::{extract_contours, label_components, largest_component, Component, Contour};
pub use hull::{convex_hull, supporting_vertex, tangent_from_point, Side};

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum GeometryError {
    #[error("mask has no foreground pixels")]
    EmptyInput,
    #[error("degenerate geometry: {0}")]
    Degenerate(String),
    #[error("point ({x:.3}, {y:.3}) lies inside the convex hull; no supporting line exists")]
    TangentUndefined { x: f64, y: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    #[inline]
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    #[inline]
    pub fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }

    #[inline]
    pub fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }

    #[inline]
    pub fn scale(self, k: f64) -> Point {
        Point::new(self.x * k, self.y * k)
    }

    #[inline]
    pub fn dot(self, o: Point) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 3D cross product. Positive when `o` is clockwise
    /// from `self` as displayed (y axis pointing down).
    #[inline]
    pub fn cross(self, o: Point) -> f64 {
        self.x * o.y - self.y * o.x
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    #[inline]
    pub fn dist(self, o: Point) -> f64 {
        self.sub(o).norm()
    }

    /// Rotation about the origin by `theta` radians (positive = clockwise as displayed).
    pub fn rotated(self, theta: f64) -> Point {
        let (s, c) = theta.sin_cos();
        Point::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }
}

impl From<(f64, f64)> for Point {
    fn from((x, y): (f64, f64)) -> Self {
        Point::new(x, y)
    }
}

/// Infinite line: anchor plus unit direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Line2D {
    pub point: Point,
    pub direction: Point,
}

impl Line2D {
    /// Normalizes `direction`; fails when it is zero or not finite.
    pub fn new(point: Point, direction: Point) -> Result<Self, GeometryError> {
        let n = direction.norm();
        if !(n.is_finite() && n > 0.0) || !point.x.is_finite() || !point.y.is_finite() {
            return Err(GeometryError::Degenerate(format!(
                "invalid line direction ({}, {})",
                direction.x, direction.y
            )));
        }
        Ok(Self {
            point,
            direction: direction.scale(1.0 / n),
        })
    }

    pub fn through(a: Point, b: Point) -> Result<Self, GeometryError> {
        if a == b {
            return Err(GeometryError::Degenerate(format!(
                "line through coincident points ({}, {})",
                a.x, a.y
            )));
        }
        Self::new(a, b.sub(a))
    }

    /// Signed perpendicular distance; positive on the clockwise side of the direction.
    pub fn signed_distance(&self, p: Point) -> f64 {
        self.direction.cross(p.sub(self.point))
    }
}

/// Acute angle between two lines in degrees, in `[0, 90]`.
pub fn angle_between(l1: &Line2D, l2: &Line2D) -> f64 {
    let c = l1.direction.cross(l2.direction).abs();
    let d = l1.direction.dot(l2.direction).abs();
    c.atan2(d).to_degrees()
}

/// Total-least-squares line: anchored at the centroid, along the principal axis
/// of the scatter matrix.
pub fn fit_line_tls(points: &[Point]) -> Result<Line2D, GeometryError> {
    if points.len() < 2 {
        return Err(GeometryError::Degenerate(format!(
            "line fit needs at least 2 points, got {}",
            points.len()
        )));
    }
    let n = points.len() as f64;
    let cx = points.iter().map(|p| p.x).sum::<f64>() / n;
    let cy = points.iter().map(|p| p.y).sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for p in points {
        let dx = p.x - cx;
        let dy = p.y - cy;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx + syy <= 0.0 {
        return Err(GeometryError::Degenerate(
            "all points coincide; line direction undefined".into(),
        ));
    }
    // major-axis angle of the 2x2 symmetric scatter matrix
    let theta = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    Line2D::new(Point::new(cx, cy), Point::new(theta.cos(), theta.sin()))
}
