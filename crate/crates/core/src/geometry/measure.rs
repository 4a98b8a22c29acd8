use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use super::{MarkedCurve, Point2};
use crate::{Error, Result};

/// Largest angle a single segment may subtend at a lifting center. At
/// exactly pi the shortest-arc branch is ambiguous.
pub const SUBTENSION_LIMIT: f64 = PI * (1.0 - 1e-9);

/// Signed shoelace area; positive for counterclockwise curves.
pub fn polygon_area(curve: &MarkedCurve) -> Result<f64> {
    if curve.nodes.len() < 3 {
        return Err(Error::InvalidCurve(format!(
            "area needs at least 3 nodes, got {}",
            curve.nodes.len()
        )));
    }
    // Shift to the first node to keep the cross products small.
    let o = curve.nodes[0];
    let twice: f64 = curve.nodes.windows(2).map(|w| (w[0] - o).cross(w[1] - o)).sum();
    Ok(0.5 * twice)
}

pub fn polygon_perimeter(curve: &MarkedCurve) -> Result<f64> {
    if curve.nodes.len() < 2 {
        return Err(Error::InvalidCurve(format!(
            "perimeter needs at least 2 nodes, got {}",
            curve.nodes.len()
        )));
    }
    Ok(curve.segments().map(|(a, b)| a.dist(b)).sum())
}

/// Signed angle subtended at `center` going from `a` to `b` along the
/// straight segment, or an error if the segment is not safely liftable.
#[inline]
pub fn segment_angle(a: Point2, b: Point2, center: Point2, segment: usize) -> Result<f64> {
    let pa = a - center;
    let pb = b - center;
    if pa.norm2() == 0.0 || pb.norm2() == 0.0 {
        return Err(Error::RefinementRequired { segment, angle: PI });
    }
    let angle = pa.cross(pb).atan2(pa.dot(pb));
    if angle.abs() >= SUBTENSION_LIMIT {
        return Err(Error::RefinementRequired { segment, angle });
    }
    Ok(angle)
}

/// Real-valued winding number of the curve about `center`: the lifted angle
/// gained along the curve divided by 2 pi. Closed curves include the closing
/// segment.
pub fn winding_number(curve: &MarkedCurve, center: Point2) -> Result<f64> {
    curve.validate()?;
    let mut total = 0.0;
    for (i, (a, b)) in curve.segments().enumerate() {
        total += segment_angle(a, b, center, i)?;
    }
    Ok(total / TAU)
}

/// Winding number of the forward sub-arc between node indices `from` and `to`.
pub fn arc_winding(curve: &MarkedCurve, from: usize, to: usize, center: Point2) -> Result<f64> {
    let idx = curve.arc_indices(from, to);
    let mut total = 0.0;
    for (k, w) in idx.windows(2).enumerate() {
        total += segment_angle(curve.nodes[w[0]], curve.nodes[w[1]], center, k)?;
    }
    Ok(total / TAU)
}

/// Minimum length of a curve that stays outside `B(center, r0)` while
/// winding `winding` times around it.
pub fn length_lower_bound(r0: f64, winding: f64) -> f64 {
    TAU * r0 * winding.abs()
}

/// A continuously lifted polar angle about a fixed center.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleLift {
    pub center: Point2,
    pub lifted_angle: f64,
    pub last_point: Point2,
}

impl AngleLift {
    pub fn new(center: Point2, p: Point2) -> Result<Self> {
        let d = p - center;
        if d.norm2() == 0.0 {
            return Err(Error::SingularMarker);
        }
        Ok(Self {
            center,
            lifted_angle: d.y.atan2(d.x),
            last_point: p,
        })
    }

    /// Moves the lift to `p` along the shortest arc and returns the increment.
    pub fn advance(&mut self, p: Point2) -> Result<f64> {
        let inc = segment_angle(self.last_point, p, self.center, 0)?;
        self.lifted_angle += inc;
        self.last_point = p;
        Ok(inc)
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn unit_square() -> MarkedCurve {
        MarkedCurve::closed(vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
        ])
    }

    #[test]
    fn square_area_and_orientation() {
        assert_eq!(polygon_area(&unit_square()).unwrap(), 1.0);
        assert_eq!(polygon_area(&unit_square().reversed()).unwrap(), -1.0);
        assert_eq!(unit_square().orientation(), 1);
        assert_eq!(polygon_perimeter(&unit_square()).unwrap(), 4.0);
    }

    #[test]
    fn too_few_nodes() {
        let c = MarkedCurve::closed(vec![Point2::new(0.0, 0.0), Point2::new(1.0, 0.0)]);
        assert!(matches!(polygon_area(&c), Err(Error::InvalidCurve(_))));
        let single = MarkedCurve::open(vec![Point2::new(0.0, 0.0)]);
        assert!(polygon_perimeter(&single).is_err());
    }

    #[test]
    fn open_segment_perimeter() {
        let c = MarkedCurve::open(vec![Point2::new(0.0, 0.0), Point2::new(3.0, 4.0)]);
        assert_eq!(polygon_perimeter(&c).unwrap(), 5.0);
    }

    #[test]
    fn fine_ngon_area_and_perimeter() {
        let n = 4096;
        let c = MarkedCurve::circle(Point2::default(), 1.0, n);
        let nf = n as f64;
        let area_oracle = 0.5 * nf * (TAU / nf).sin();
        let perim_oracle = nf * 2.0 * (PI / nf).sin();
        let a = polygon_area(&c).unwrap();
        let p = polygon_perimeter(&c).unwrap();
        assert!((a - area_oracle).abs() < 1e-12);
        assert!((p - perim_oracle).abs() < 1e-12);
        assert!((a - PI).abs() < 1e-5);
        assert!((p - TAU).abs() < 1e-5);
    }

    #[test]
    fn circle_winds_once() {
        let c = MarkedCurve::circle(Point2::default(), 1.0, 64);
        let w = winding_number(&c, Point2::default()).unwrap();
        assert!((w - 1.0).abs() < 1e-14);
        let outside = winding_number(&c, Point2::new(3.0, 0.5)).unwrap();
        assert!(outside.abs() < 1e-14);
        let cw = winding_number(&c.reversed(), Point2::new(0.2, 0.1)).unwrap();
        assert!((cw + 1.0).abs() < 1e-14);
    }

    #[test]
    fn radial_segment_has_zero_winding() {
        let c = MarkedCurve::open(vec![Point2::new(1.0, 0.0), Point2::new(2.0, 0.0)]);
        assert_eq!(winding_number(&c, Point2::default()).unwrap(), 0.0);
    }

    #[test]
    fn two_turn_spiral() {
        // r = 1 + theta / 2pi over theta in [0, 4pi].
        let n = 4000;
        let nodes = (0..=n)
            .map(|k| {
                let th = 4.0 * PI * k as f64 / n as f64;
                Point2::polar(Point2::default(), 1.0 + th / TAU, th)
            })
            .collect();
        let c = MarkedCurve::open(nodes);
        let w = winding_number(&c, Point2::default()).unwrap();
        assert!((w - 2.0).abs() < 1e-12, "{w}");
    }

    #[test]
    fn segment_through_center_needs_refinement() {
        let c = MarkedCurve::open(vec![Point2::new(-1.0, 0.0), Point2::new(1.0, 0.0)]);
        assert!(matches!(
            winding_number(&c, Point2::default()),
            Err(Error::RefinementRequired { .. })
        ));
        let on_node = MarkedCurve::open(vec![Point2::new(0.0, 0.0), Point2::new(1.0, 0.0)]);
        assert!(winding_number(&on_node, Point2::default()).is_err());
    }

    #[test]
    fn lower_bound_values() {
        assert!((length_lower_bound(0.5, 3.0) - 3.0 * PI).abs() < 1e-15);
        assert_eq!(length_lower_bound(0.7, 0.0), 0.0);
        let ct = 5.0;
        assert!((length_lower_bound(0.25, ct - 2.0) - PI / 2.0 * (ct - 2.0)).abs() < 1e-15);
    }

    #[test]
    fn lift_tracks_multiple_turns() {
        let mut lift = AngleLift::new(Point2::default(), Point2::new(1.0, 0.0)).unwrap();
        for k in 1..=300 {
            let th = 3.0 * TAU * k as f64 / 300.0;
            lift.advance(Point2::polar(Point2::default(), 1.0, th)).unwrap();
        }
        assert!((lift.lifted_angle - 3.0 * TAU).abs() < 1e-12);
        let mut bad = lift;
        assert!(bad.advance(Point2::new(-1.0, 0.0) * -1.0).is_ok());
        assert!(bad.advance(Point2::new(-1.0, 0.0)).is_err());
    }

    fn wobbly_loop(n: usize, amp: f64, center: Point2) -> MarkedCurve {
        MarkedCurve::closed(
            (0..n)
                .map(|k| {
                    let th = TAU * k as f64 / n as f64;
                    Point2::polar(center, 1.0 + amp * (5.0 * th).cos(), th)
                })
                .collect(),
        )
    }

    proptest! {
        #[test]
        fn area_is_orientation_odd(n in 3usize..200, amp in 0.0f64..0.5, cx in -2.0f64..2.0) {
            let c = wobbly_loop(n, amp, Point2::new(cx, 0.3));
            let a = polygon_area(&c).unwrap();
            prop_assert!((polygon_area(&c.reversed()).unwrap() + a).abs() <= 1e-12 * a.abs().max(1.0));
        }

        #[test]
        fn winding_survives_subdivision(n in 8usize..100, amp in 0.0f64..0.5, seg in 0usize..8, s in 0.01f64..0.99) {
            let c = wobbly_loop(n, amp, Point2::default());
            let center = Point2::new(0.1, -0.05);
            let w = winding_number(&c, center).unwrap();
            let mut nodes = c.nodes.clone();
            let (a, b) = c.segment(seg);
            nodes.insert(seg + 1, a.lerp(b, s));
            let w2 = winding_number(&MarkedCurve::closed(nodes), center).unwrap();
            prop_assert!((w - w2).abs() < 1e-12);
            prop_assert!((w - 1.0).abs() < 1e-12);
            let outside = winding_number(&c, Point2::new(5.0, 1.0)).unwrap();
            prop_assert!(outside.abs() < 1e-12);
        }

        #[test]
        fn spirals_respect_length_bound(
            r0 in 0.1f64..2.0,
            growth in 0.0f64..1.0,
            turns in -4.0f64..4.0,
            n in 100usize..2000,
        ) {
            let nodes = (0..=n)
                .map(|k| {
                    let th = TAU * turns * k as f64 / n as f64;
                    Point2::polar(Point2::default(), r0 + growth * th.abs(), th)
                })
                .collect();
            let c = MarkedCurve::open(nodes);
            let w = winding_number(&c, Point2::default()).unwrap();
            prop_assert!((w - turns).abs() < 1e-9);
            // Every node lies outside B(0, r0), but chords cut slightly inside.
            let inner = r0 * (PI * turns.abs() / n as f64).cos();
            prop_assert!(polygon_perimeter(&c).unwrap() >= length_lower_bound(inner, w) * (1.0 - 1e-12));
        }
    }
}
