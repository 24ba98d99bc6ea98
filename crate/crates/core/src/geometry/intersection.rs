//! Exact polygon overlap areas.

use geo::{Area, BooleanOps, BoundingRect, Intersects, MultiPolygon};

/// Area of `a ∩ b`. Symmetric; never exceeds the area of either input.
/// Both inputs must be valid polygons in the same planar projection.
pub fn intersection_area(a: &MultiPolygon<f64>, b: &MultiPolygon<f64>) -> f64 {
    // Cheap reject before the boolean op.
    match (a.bounding_rect(), b.bounding_rect()) {
        (Some(ra), Some(rb)) if ra.intersects(&rb) => {}
        _ => return 0.0,
    }
    a.intersection(b).unsigned_area()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::rect;

    #[test]
    fn disjoint_squares_have_zero_overlap() {
        let a = rect(0.0, 0.0, 1.0, 1.0);
        let b = rect(2.0, 2.0, 3.0, 3.0);
        assert_eq!(intersection_area(&a, &b), 0.0);
    }

    #[test]
    fn square_with_itself_is_identity() {
        let a = rect(0.0, 0.0, 1.0, 1.0);
        assert!((intersection_area(&a, &a) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn half_shifted_squares_overlap_a_quarter() {
        let a = rect(0.0, 0.0, 1.0, 1.0);
        let b = rect(0.5, 0.5, 1.5, 1.5);
        assert!((intersection_area(&a, &b) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn symmetric_in_arguments() {
        let a = rect(0.0, 0.0, 2.0, 1.0);
        let b = rect(1.0, 0.5, 3.0, 2.0);
        assert_eq!(intersection_area(&a, &b), intersection_area(&b, &a));
    }

    #[test]
    fn intersection_plus_difference_recovers_area() {
        use geo::BooleanOps;
        let a = rect(0.0, 0.0, 2.0, 2.0);
        let b = rect(1.0, 1.0, 3.0, 3.0);
        let inter = intersection_area(&a, &b);
        let diff = a.difference(&b).unsigned_area();
        assert!((inter + diff - a.unsigned_area()).abs() < 1e-9 * a.unsigned_area());
    }
}
