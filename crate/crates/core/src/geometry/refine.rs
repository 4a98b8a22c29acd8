use super::{MarkedCurve, Point2};
use crate::{Error, Result};

const MAX_PASSES: usize = 64;

/// Largest turning angle (radians) tolerated at either end of a segment
/// that is still long enough to split without dropping below `h_min`.
pub const MAX_TURN: f64 = 0.25;

/// Re-samples a curve into the spacing band `[h_min, h_max]`.
///
/// Nodes whose two segments are both shorter than `h_min` are dropped unless
/// they are marked (or are the ends of an open curve). Segments longer than
/// `h_max` are bisected, repeatedly, until every segment fits, and so are
/// segments longer than `2 h_min` that end at a node turning by more than
/// [`MAX_TURN`]; new nodes are placed from the four surrounding nodes. Marks are
/// rewritten to follow their nodes.
pub fn refine_and_redistribute(curve: &MarkedCurve, h_min: f64, h_max: f64) -> Result<MarkedCurve> {
    if !(h_min > 0.0 && h_min < 0.5 * h_max) {
        return Err(Error::Domain(format!(
            "refinement band needs 0 < h_min < h_max/2, got [{h_min}, {h_max}]"
        )));
    }
    curve.validate()?;
    let coarse = remove_short(curve, h_min, h_max);
    let mut out = coarse;
    for _ in 0..MAX_PASSES {
        match insert_pass(&out, h_min, h_max) {
            Some(next) => out = next,
            None => break,
        }
    }
    let need = if out.closed { 3 } else { 2 };
    if out.nodes.len() < need {
        return Err(Error::DegenerateCurve(out.nodes.len()));
    }
    Ok(out)
}

fn remove_short(curve: &MarkedCurve, h_min: f64, h_max: f64) -> MarkedCurve {
    let n = curve.nodes.len();
    let mut protected = vec![false; n];
    for &m in &curve.marks {
        protected[m] = true;
    }
    if !curve.closed {
        protected[0] = true;
        protected[n - 1] = true;
    }
    let floor = if curve.closed { 3 } else { 2 };
    let mut keep = vec![true; n];
    let mut kept = n;
    let mut prev_kept = if curve.closed { n - 1 } else { 0 };
    for i in 0..n {
        if protected[i] || kept <= floor {
            if keep[i] {
                prev_kept = i;
            }
            continue;
        }
        let next = (i + 1) % n;
        let p = curve.nodes[prev_kept];
        let q = curve.nodes[i];
        let r = curve.nodes[next];
        if p.dist(q) < h_min && q.dist(r) < h_min && p.dist(r) <= h_max {
            keep[i] = false;
            kept -= 1;
        } else {
            prev_kept = i;
        }
    }
    if kept == n {
        return curve.clone();
    }
    let mut remap = vec![usize::MAX; n];
    let mut nodes = Vec::with_capacity(kept);
    for i in 0..n {
        if keep[i] {
            remap[i] = nodes.len();
            nodes.push(curve.nodes[i]);
        }
    }
    MarkedCurve {
        nodes,
        closed: curve.closed,
        marks: curve.marks.iter().map(|&m| remap[m]).collect(),
    }
}

/// One bisection pass; `None` when nothing needed splitting.
fn insert_pass(curve: &MarkedCurve, h_min: f64, h_max: f64) -> Option<MarkedCurve> {
    let n = curve.nodes.len();
    let m = curve.segment_count();
    let long: Vec<bool> = (0..m)
        .map(|i| {
            let (a, b) = curve.segment(i);
            let len = a.dist(b);
            len > h_max * (1.0 + 1e-12)
                || (len > 2.0 * h_min && turn_at(curve, i).max(turn_at(curve, (i + 1) % n)) > MAX_TURN)
        })
        .collect();
    if !long.iter().any(|&l| l) {
        return None;
    }
    let mut nodes = Vec::with_capacity(n + m);
    let mut remap = vec![0usize; n];
    for i in 0..n {
        remap[i] = nodes.len();
        nodes.push(curve.nodes[i]);
        if i < m && long[i] {
            nodes.push(segment_midpoint(curve, i));
        }
    }
    Some(MarkedCurve {
        nodes,
        closed: curve.closed,
        marks: curve.marks.iter().map(|&k| remap[k]).collect(),
    })
}

/// Midpoint of segment `i`: the chord midpoint pushed out by the sagitta
/// of a circle through the segment and one neighbour. Of the two such
/// circles the flatter one is used, and none when they bend opposite ways,
/// so hairpins and inflections never overshoot. Exact on circles and
/// straight lines.
fn segment_midpoint(curve: &MarkedCurve, i: usize) -> Point2 {
    let n = curve.nodes.len();
    let p1 = curve.nodes[i];
    let p2 = curve.nodes[(i + 1) % n];
    let chord = p2 - p1;
    let half = 0.5 * chord.norm();
    let mid = p1.lerp(p2, 0.5);
    if half == 0.0 {
        return mid;
    }
    let sagitta = |k: f64| {
        let k = k.clamp(-1.0 / half, 1.0 / half);
        half * half * k / (1.0 + (1.0 - half * half * k * k).max(0.0).sqrt())
    };
    let before = (curve.closed || i > 0).then(|| sagitta(circle_curvature(curve.nodes[(i + n - 1) % n], p1, p2)));
    let after = (curve.closed || i + 2 < n).then(|| sagitta(circle_curvature(p1, p2, curve.nodes[(i + 2) % n])));
    let sag = match (before, after) {
        (Some(a), Some(b)) if a * b <= 0.0 => 0.0,
        (Some(a), Some(b)) => {
            if a.abs() < b.abs() {
                a
            } else {
                b
            }
        }
        (Some(a), None) | (None, Some(a)) => a,
        (None, None) => 0.0,
    };
    // A left-turning arc bulges to the right of its chord.
    let normal = chord.perp() * (1.0 / (2.0 * half));
    mid - normal * sag
}

/// Unsigned turning angle at node `j`; zero at the ends of an open curve.
fn turn_at(curve: &MarkedCurve, j: usize) -> f64 {
    let n = curve.nodes.len();
    if !curve.closed && (j == 0 || j + 1 == n) {
        return 0.0;
    }
    let p = curve.nodes[j];
    let a = p - curve.nodes[(j + n - 1) % n];
    let b = curve.nodes[(j + 1) % n] - p;
    a.cross(b).atan2(a.dot(b)).abs()
}

/// Signed curvature of the circle through three points; zero if collinear
/// or degenerate.
fn circle_curvature(a: Point2, b: Point2, c: Point2) -> f64 {
    let denom = a.dist(b) * b.dist(c) * a.dist(c);
    if denom == 0.0 {
        return 0.0;
    }
    2.0 * (b - a).cross(c - b) / denom
}
