use std::collections::HashMap;

use super::{MarkedCurve, PatchBoundary, Point2};
use crate::{Error, Result};

/// x-coordinates where the horizontal line at height `y` crosses the
/// boundary, sorted ascending. Uses the half-open rule `min <= y < max` so
/// vertices are counted once.
pub fn scanline_crossings(boundary: &PatchBoundary, y: f64) -> Vec<f64> {
    let mut xs = Vec::new();
    for c in &boundary.components {
        for (a, b) in c.segments() {
            if (a.y <= y) != (b.y <= y) {
                let s = (y - a.y) / (b.y - a.y);
                xs.push(a.x + s * (b.x - a.x));
            }
        }
    }
    xs.sort_by(f64::total_cmp);
    xs
}

/// Even-odd membership test over all boundary components.
pub fn point_in_patch(p: Point2, boundary: &PatchBoundary) -> bool {
    let mut inside = false;
    for c in &boundary.components {
        for (a, b) in c.segments() {
            if (a.y <= p.y) != (b.y <= p.y) {
                let x = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
                if p.x < x {
                    inside = !inside;
                }
            }
        }
    }
    inside
}

/// Midpoint-rule area of `Omega \u{25b3} B(center, radius)` on a
/// `resolution x resolution` grid over `[-3, 3]^2`, which covers `B(x_o, 3)`.
///
/// The error is of order perimeter times grid spacing.
pub fn symmetric_difference_area(
    boundary: &PatchBoundary,
    disk_center: Point2,
    disk_radius: f64,
    resolution: usize,
) -> Result<f64> {
    if resolution < 64 {
        return Err(Error::Domain(format!(
            "symmetric difference needs resolution >= 64, got {resolution}"
        )));
    }
    const HALF: f64 = 3.0;
    let h = 2.0 * HALF / resolution as f64;
    let r2 = disk_radius * disk_radius;
    let mut count = 0usize;
    for j in 0..resolution {
        let y = -HALF + (j as f64 + 0.5) * h;
        let xs = scanline_crossings(boundary, y);
        let mut k = 0;
        let mut inside = false;
        for i in 0..resolution {
            let x = -HALF + (i as f64 + 0.5) * h;
            while k < xs.len() && xs[k] <= x {
                inside = !inside;
                k += 1;
            }
            let in_disk = (Point2::new(x, y) - disk_center).norm2() < r2;
            if inside != in_disk {
                count += 1;
            }
        }
    }
    Ok(count as f64 * h * h)
}

/// Exact area of `Omega \u{2229} B(center, radius)` for a closed polygon,
/// signed like the polygon orientation. Sums the disk-clipped areas of the
/// triangles fanned from the center.
pub fn disk_intersection_area(curve: &MarkedCurve, center: Point2, radius: f64) -> f64 {
    curve
        .segments()
        .map(|(a, b)| triangle_disk_area(a - center, b - center, radius))
        .sum()
}

/// Signed area of `triangle(0, a, b) \u{2229} B(0, r)`.
fn triangle_disk_area(a: Point2, b: Point2, r: f64) -> f64 {
    let d = b - a;
    let qa = d.norm2();
    if qa == 0.0 {
        return 0.0;
    }
    let qb = 2.0 * a.dot(d);
    let qc = a.norm2() - r * r;
    let disc = qb * qb - 4.0 * qa * qc;
    let mut cuts = vec![0.0];
    if disc > 0.0 {
        let sq = disc.sqrt();
        for t in [(-qb - sq) / (2.0 * qa), (-qb + sq) / (2.0 * qa)] {
            if t > 0.0 && t < 1.0 {
                cuts.push(t);
            }
        }
    }
    cuts.push(1.0);
    let mut area = 0.0;
    for w in cuts.windows(2) {
        let p = a + d * w[0];
        let q = a + d * w[1];
        let mid = a + d * (0.5 * (w[0] + w[1]));
        if mid.norm2() <= r * r {
            area += 0.5 * p.cross(q);
        } else {
            area += 0.5 * r * r * p.cross(q).atan2(p.dot(q));
        }
    }
    area
}

pub fn point_segment_distance(p: Point2, a: Point2, b: Point2) -> f64 {
    let d = b - a;
    let l2 = d.norm2();
    if l2 == 0.0 {
        return p.dist(a);
    }
    let s = ((p - a).dot(d) / l2).clamp(0.0, 1.0);
    p.dist(a + d * s)
}

fn point_polyline_distance(p: Point2, c: &MarkedCurve) -> f64 {
    if c.segment_count() == 0 {
        return c.nodes.first().map_or(f64::INFINITY, |q| p.dist(*q));
    }
    c.segments()
        .map(|(a, b)| point_segment_distance(p, a, b))
        .fold(f64::INFINITY, f64::min)
}

/// Symmetric Hausdorff distance between two polylines, measured from each
/// node set to the other polyline.
pub fn hausdorff_distance(a: &MarkedCurve, b: &MarkedCurve) -> f64 {
    let ab = a
        .nodes
        .iter()
        .map(|&p| point_polyline_distance(p, b))
        .fold(0.0, f64::max);
    let ba = b
        .nodes
        .iter()
        .map(|&p| point_polyline_distance(p, a))
        .fold(0.0, f64::max);
    ab.max(ba)
}

fn segments_intersect(p1: Point2, p2: Point2, q1: Point2, q2: Point2) -> bool {
    let d1 = (p2 - p1).cross(q1 - p1);
    let d2 = (p2 - p1).cross(q2 - p1);
    let d3 = (q2 - q1).cross(p1 - q1);
    let d4 = (q2 - q1).cross(p2 - q1);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    let on = |a: Point2, b: Point2, p: Point2, d: f64| {
        d == 0.0 && p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
    };
    on(p1, p2, q1, d1) || on(p1, p2, q2, d2) || on(q1, q2, p1, d3) || on(q1, q2, p2, d4)
}

/// True when no two non-adjacent segments of the curve touch. Segments are
/// bucketed on a uniform grid so typical cost is linear in the node count.
pub fn is_simple(curve: &MarkedCurve) -> bool {
    let m = curve.segment_count();
    if m < 3 {
        return true;
    }
    let mean_len = curve.segments().map(|(a, b)| a.dist(b)).sum::<f64>() / m as f64;
    let cell = mean_len.max(1e-12) * 2.0;
    let key = |v: f64| (v / cell).floor() as i64;
    let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for i in 0..m {
        let (a, b) = curve.segment(i);
        for gx in key(a.x.min(b.x))..=key(a.x.max(b.x)) {
            for gy in key(a.y.min(b.y))..=key(a.y.max(b.y)) {
                buckets.entry((gx, gy)).or_default().push(i);
            }
        }
    }
    let adjacent = |i: usize, j: usize| {
        let d = i.abs_diff(j);
        d <= 1 || (curve.closed && d == m - 1)
    };
    for segs in buckets.values() {
        for (u, &i) in segs.iter().enumerate() {
            for &j in &segs[u + 1..] {
                if adjacent(i, j) {
                    continue;
                }
                let (p1, p2) = curve.segment(i);
                let (q1, q2) = curve.segment(j);
                if segments_intersect(p1, p2, q1, q2) {
                    return false;
                }
            }
        }
    }
    true
}
