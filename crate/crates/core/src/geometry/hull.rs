use super::{Contour, GeometryError, Line2D, Point};

/// Rotation sense, as displayed on screen (y axis pointing down).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Clockwise,
    CounterClockwise,
}

/// Andrew's monotone chain. Collinear points are dropped; fewer than three
/// distinct inputs are returned as-is (deduplicated).
pub fn convex_hull(points: &[Point]) -> Vec<Point> {
    let mut pts: Vec<Point> = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let turn = |o: Point, a: Point, b: Point| a.sub(o).cross(b.sub(o));
    let mut lower: Vec<Point> = Vec::with_capacity(pts.len());
    for &p in &pts {
        while lower.len() >= 2 && turn(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<Point> = Vec::with_capacity(pts.len());
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && turn(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Supporting line of the contour's convex hull through an external point `p`.
///
/// Among hull vertices (seen from `p`) the one furthest around in the requested
/// rotation sense is selected; collinear ties keep the farthest vertex. A `p`
/// that coincides with a hull vertex yields the line to the adjacent vertex.
pub fn tangent_from_point(contour: &Contour, p: Point, side: Side) -> Result<Line2D, GeometryError> {
    let v = supporting_vertex(contour, p, side)?;
    Line2D::through(p, v)
}

/// Hull vertex touched by [`tangent_from_point`].
pub fn supporting_vertex(contour: &Contour, p: Point, side: Side) -> Result<Point, GeometryError> {
    let hull = convex_hull(&contour.points);
    if hull.is_empty() {
        return Err(GeometryError::EmptyInput);
    }
    if strictly_inside(&hull, p) {
        return Err(GeometryError::TangentUndefined { x: p.x, y: p.y });
    }
    let scale = hull.iter().map(|v| v.dist(p)).fold(0.0, f64::max);
    let coincide = 1e-9 * scale.max(1.0);
    let mut best: Option<Point> = None;
    for &v in &hull {
        let dv = v.sub(p);
        if dv.norm() <= coincide {
            continue;
        }
        let Some(b) = best else {
            best = Some(v);
            continue;
        };
        let db = b.sub(p);
        let c = db.cross(dv);
        let tol = 1e-12 * db.norm() * dv.norm();
        let better = match side {
            Side::Clockwise => c > tol,
            Side::CounterClockwise => c < -tol,
        };
        if better || (c.abs() <= tol && db.dot(dv) > 0.0 && dv.norm() > db.norm()) {
            best = Some(v);
        }
    }
    best.ok_or_else(|| GeometryError::Degenerate("hull collapses onto the query point".into()))
}

/// Strict interior test against a counter-clockwise (in raw coordinates) hull.
fn strictly_inside(hull: &[Point], p: Point) -> bool {
    if hull.len() < 3 {
        return false;
    }
    let n = hull.len();
    (0..n).all(|i| {
        let a = hull[i];
        let b = hull[(i + 1) % n];
        let e = b.sub(a);
        e.cross(p.sub(a)) > 1e-9 * e.norm()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::angle_between;
    use proptest::prelude::*;

    fn square() -> Contour {
        Contour {
            points: vec![
                Point::new(0., 0.),
                Point::new(4., 0.),
                Point::new(4., 4.),
                Point::new(0., 4.),
            ],
            closed: true,
        }
    }

    /// Oracle: enumerate every hull vertex as a candidate and keep those whose
    /// line through `p` leaves all vertices on one closed side.
    fn supporting_vertices(pts: &[Point], p: Point) -> Vec<Point> {
        pts.iter()
            .copied()
            .filter(|&v| v != p)
            .filter(|&v| {
                let l = Line2D::through(p, v).unwrap();
                let d: Vec<f64> = pts.iter().map(|&q| l.signed_distance(q)).collect();
                d.iter().all(|&x| x >= -1e-9) || d.iter().all(|&x| x <= 1e-9)
            })
            .collect()
    }

    fn passes_through(l: &Line2D, q: Point) -> bool {
        l.signed_distance(q).abs() < 1e-9
    }

    #[test]
    fn hull_of_square_with_interior_points() {
        let mut pts = square().points;
        pts.push(Point::new(2., 2.));
        pts.push(Point::new(2., 0.));
        let h = convex_hull(&pts);
        assert_eq!(h.len(), 4);
    }

    #[test]
    fn left_of_square() {
        let p = Point::new(-2., 2.);
        let ccw = tangent_from_point(&square(), p, Side::CounterClockwise).unwrap();
        let cw = tangent_from_point(&square(), p, Side::Clockwise).unwrap();
        // looking right from p, counter-clockwise on screen turns upward (towards y = 0)
        assert!(passes_through(&ccw, Point::new(0., 0.)));
        assert!(passes_through(&cw, Point::new(0., 4.)));
        let oracle = supporting_vertices(&square().points, p);
        assert_eq!(oracle, vec![Point::new(0., 0.), Point::new(0., 4.)]);
    }

    #[test]
    fn above_square() {
        let p = Point::new(2., -5.);
        let ccw = tangent_from_point(&square(), p, Side::CounterClockwise).unwrap();
        assert!(passes_through(&ccw, Point::new(4., 0.)));
        let cw = tangent_from_point(&square(), p, Side::Clockwise).unwrap();
        assert!(passes_through(&cw, Point::new(0., 0.)));
        let oracle = supporting_vertices(&square().points, p);
        assert_eq!(oracle, vec![Point::new(0., 0.), Point::new(4., 0.)]);
    }

    #[test]
    fn from_hull_vertex_uses_adjacent_vertex() {
        let p = Point::new(4., 0.);
        let a = tangent_from_point(&square(), p, Side::Clockwise).unwrap();
        let b = tangent_from_point(&square(), p, Side::CounterClockwise).unwrap();
        let adj = [Point::new(0., 0.), Point::new(4., 4.)];
        assert!(adj.iter().any(|&q| passes_through(&a, q)));
        assert!(adj.iter().any(|&q| passes_through(&b, q)));
        assert!(angle_between(&a, &b) > 89.0);
    }

    #[test]
    fn inside_point_is_undefined() {
        assert!(matches!(
            tangent_from_point(&square(), Point::new(2., 2.), Side::Clockwise),
            Err(GeometryError::TangentUndefined { .. })
        ));
    }

    proptest! {
        #[test]
        fn all_hull_vertices_on_one_side(
            pts in proptest::collection::vec((0.0f64..50.0, 0.0f64..50.0), 3..40),
            px in -80.0f64..130.0, py in -80.0f64..130.0,
            cw in any::<bool>()
        ) {
            let pts: Vec<Point> = pts.into_iter().map(Point::from).collect();
            let contour = Contour { points: pts.clone(), closed: true };
            let p = Point::new(px, py);
            let side = if cw { Side::Clockwise } else { Side::CounterClockwise };
            match tangent_from_point(&contour, p, side) {
                Ok(l) => {
                    let d: Vec<f64> = convex_hull(&pts).iter().map(|&q| l.signed_distance(q)).collect();
                    prop_assert!(d.iter().all(|&x| x >= -1e-6) || d.iter().all(|&x| x <= 1e-6));
                }
                Err(GeometryError::TangentUndefined { .. }) => {}
                Err(e) => prop_assert!(false, "{e}"),
            }
        }
    }
}
