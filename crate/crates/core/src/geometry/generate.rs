//! Initial patches with a thin slit or handle.
//!
//! Both shapes are polygons with circular-arc fillets, sampled at a fixed
//! node spacing. Fillet arcs additionally get at least eight nodes per
//! quarter turn so that small roundings stay visibly round.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI, SQRT_2, TAU};

use serde::{Deserialize, Serialize};

use super::{
    disk_intersection_area, is_simple, polygon_area, polygon_perimeter, winding_number, MarkedCurve, PatchBoundary,
    Point2, X_C, X_O,
};
use crate::{Error, Result};

pub const TORUS_MAX_PERIMETER: f64 = 20.0;
pub const PLANE_MAX_PERIMETER: f64 = 20.0;

const MIN_ARC_STEP: f64 = PI / 16.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorParams {
    pub epsilon: f64,
    pub delta: f64,
    pub epsilon_tilde: f64,
    pub stick_width: f64,
    pub corner_rounding: f64,
    pub margin: f64,
    /// Target distance between consecutive nodes on straight edges.
    pub node_spacing: f64,
    /// `c_1` in the plane area budget `c_1 * epsilon^4`.
    pub area_constant: f64,
}

impl GeneratorParams {
    /// The torus family: margin and slit width both scale with `epsilon^2`.
    pub fn torus_preset(epsilon: f64) -> Self {
        Self {
            epsilon,
            delta: 0.25,
            epsilon_tilde: 0.03,
            stick_width: 0.1 * epsilon * epsilon,
            corner_rounding: 0.03,
            margin: 0.05 * epsilon * epsilon,
            node_spacing: 0.01,
            area_constant: 1.0,
        }
    }

    pub fn handle_preset() -> Self {
        Self {
            epsilon: 0.5,
            delta: 0.25,
            epsilon_tilde: 0.03,
            stick_width: 0.01,
            corner_rounding: 0.03,
            margin: 0.0,
            node_spacing: 0.02,
            area_constant: 0.2,
        }
    }

    fn validate(&self, torus: bool) -> Result<()> {
        let positive = [
            ("epsilon", self.epsilon),
            ("delta", self.delta),
            ("epsilon_tilde", self.epsilon_tilde),
            ("stick_width", self.stick_width),
            ("corner_rounding", self.corner_rounding),
            ("node_spacing", self.node_spacing),
            ("area_constant", self.area_constant),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Domain(format!("{name} must be positive, got {v}")));
            }
        }
        if self.delta > 0.25 {
            return Err(Error::Domain(format!("delta must be <= 1/4, got {}", self.delta)));
        }
        if torus {
            if self.margin.is_nan() || self.margin <= 0.0 {
                return Err(Error::Domain(format!("margin must be positive, got {}", self.margin)));
            }
            if self.epsilon_tilde >= self.delta {
                return Err(Error::Domain(format!(
                    "epsilon_tilde {} must be below delta {}",
                    self.epsilon_tilde, self.delta
                )));
            }
        }
        Ok(())
    }
}

/// The tracked sub-arc, as forward node indices on one component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GammaArc {
    pub component: usize,
    pub start: usize,
    pub end: usize,
}

/// The removed slit, kept for membership checks: points with diagonal
/// coordinate in `(s_start, s_end)` and normal offset below `half_width`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StickRect {
    pub origin: Point2,
    pub direction: Point2,
    pub length: f64,
    pub half_width: f64,
}

impl StickRect {
    pub fn contains(&self, p: Point2) -> bool {
        let d = p - self.origin;
        let s = d.dot(self.direction);
        let off = d.cross(self.direction).abs();
        s > 0.0 && s < self.length && off < self.half_width
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationReport {
    /// Torus: `area([0,pi]^2 \ Omega)`. Plane: `|Omega \u{25b3} B(x_o, 1)|`.
    pub area_deficit: f64,
    pub area_budget: f64,
    pub perimeter: f64,
    pub node_count: usize,
    pub simple: bool,
    pub gamma: GammaArc,
    pub gamma_winding: f64,
    /// Distances of the two gamma endpoints from their reference points
    /// (torus: `x_o` and `x_c`; plane: radii about `x_o`).
    pub gamma_start_distance: f64,
    pub gamma_end_distance: f64,
    /// Area of the slit or handle alone, from its construction.
    pub construction_area: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedPatch {
    /// One closed component whose marks are `[gamma.start, gamma.end]`.
    pub boundary: PatchBoundary,
    pub gamma: GammaArc,
    pub report: GenerationReport,
    pub stick: StickRect,
}

/// Builds a closed polyline from straight and circular pieces. Each piece
/// emits its start node and interior nodes; the next piece supplies the end.
struct PathBuilder {
    nodes: Vec<Point2>,
    spacing: f64,
}

impl PathBuilder {
    fn new(spacing: f64) -> Self {
        Self {
            nodes: Vec::new(),
            spacing,
        }
    }

    fn line(&mut self, a: Point2, b: Point2) {
        let len = a.dist(b);
        if len <= 1e-9 * self.spacing {
            return;
        }
        let k = (len / self.spacing).ceil().max(1.0) as usize;
        for i in 0..k {
            self.nodes.push(a.lerp(b, i as f64 / k as f64));
        }
    }

    /// Line through a pinned interior point; returns the pin's node index.
    fn line_with_pin(&mut self, a: Point2, pin: Point2, b: Point2) -> usize {
        self.line(a, pin);
        let idx = self.nodes.len();
        self.line(pin, b);
        idx
    }

    fn arc(&mut self, center: Point2, r: f64, start: f64, sweep: f64) {
        if sweep == 0.0 {
            return;
        }
        let by_len = (sweep.abs() * r / self.spacing).ceil();
        let by_angle = (sweep.abs() / MIN_ARC_STEP).ceil();
        let k = by_len.max(by_angle).max(1.0) as usize;
        for i in 0..k {
            self.nodes
                .push(Point2::polar(center, r, start + sweep * i as f64 / k as f64));
        }
    }
}

struct Fillet {
    center: Point2,
    radius: f64,
    start_angle: f64,
    sweep: f64,
    enter: Point2,
    exit: Point2,
}

fn unit(v: Point2) -> Point2 {
    v * (1.0 / v.norm())
}

/// Rounds the corner `v` between edges from `prev` and to `next`.
fn fillet(prev: Point2, v: Point2, next: Point2, radius: f64) -> Fillet {
    let d_in = unit(v - prev);
    let d_out = unit(next - v);
    let turn = d_in.cross(d_out).atan2(d_in.dot(d_out));
    let t = radius * (0.5 * turn.abs()).tan();
    let enter = v - d_in * t;
    let exit = v + d_out * t;
    let normal = if turn > 0.0 { d_in.perp() } else { -d_in.perp() };
    let center = enter + normal * radius;
    let a = enter - center;
    Fillet {
        center,
        radius,
        start_angle: a.y.atan2(a.x),
        sweep: turn,
        enter,
        exit,
    }
}

fn diag(s: f64) -> Point2 {
    Point2::new(s * FRAC_1_SQRT_2, s * FRAC_1_SQRT_2)
}

/// A quarter-cell patch: the square `[m, pi-m]^2` with rounded corners and a
/// thin diagonal slit cut from the corner near `x_o` toward `x_c`. Gamma runs
/// along the slit's upper wall from near `x_o` to distance `delta` from `x_c`.
pub fn gen_torus_patch(params: &GeneratorParams) -> Result<GeneratedPatch> {
    params.validate(true)?;
    let m = params.margin;
    let w = params.stick_width;
    let hw = 0.5 * w;
    let delta = params.delta;
    let half_diag = PI * FRAC_1_SQRT_2;
    if hw >= delta {
        return Err(Error::Domain(format!("stick width {w} too large for delta {delta}")));
    }
    // Slit centerline ends where the cap's far point sits at 0.75 delta from x_c.
    let s_end = half_diag - 0.75 * delta - hw;
    let normal = Point2::new(-FRAC_1_SQRT_2, FRAC_1_SQRT_2);
    let mouth_upper = Point2::new(m, m + w * FRAC_1_SQRT_2);
    let mouth_lower = Point2::new(m + w * FRAC_1_SQRT_2, m);
    let tip_upper = diag(s_end) + normal * hw;
    let tip_lower = diag(s_end) - normal * hw;
    let hi = PI - m;
    let verts = [
        (mouth_upper, hw),
        (tip_upper, hw),
        (tip_lower, hw),
        (mouth_lower, hw),
        (Point2::new(hi, m), params.corner_rounding),
        (Point2::new(hi, hi), params.corner_rounding),
        (Point2::new(m, hi), params.corner_rounding),
    ];
    let n = verts.len();
    let fillets: Vec<Fillet> = (0..n)
        .map(|i| fillet(verts[(i + n - 1) % n].0, verts[i].0, verts[(i + 1) % n].0, verts[i].1))
        .collect();
    for i in 0..n {
        let a = fillets[i].exit;
        let b = fillets[(i + 1) % n].enter;
        let edge = verts[(i + 1) % n].0 - verts[i].0;
        if (b - a).dot(edge) < -1e-12 {
            return Err(Error::Domain(format!(
                "fillets overlap on edge {i}; reduce corner_rounding or stick_width"
            )));
        }
    }

    // x_c* on the upper wall at distance exactly delta from x_c.
    let s_star = half_diag - (delta * delta - hw * hw).sqrt();
    let pin = diag(s_star) + normal * hw;
    if (pin - fillets[0].exit).dot(diag(1.0)) <= 0.0 || (fillets[1].enter - pin).dot(diag(1.0)) <= 0.0 {
        return Err(Error::Domain(
            "gamma end does not fall on the straight slit wall".into(),
        ));
    }

    let mut path = PathBuilder::new(params.node_spacing);
    let mouth_range_start = path.nodes.len();
    let f = &fillets[0];
    path.arc(f.center, f.radius, f.start_angle, f.sweep);
    let mouth_range_end = path.nodes.len();
    let end = path.line_with_pin(fillets[0].exit, pin, fillets[1].enter);
    for i in 1..n {
        let f = &fillets[i];
        path.arc(f.center, f.radius, f.start_angle, f.sweep);
        path.line(f.exit, fillets[(i + 1) % n].enter);
    }
    let start = (mouth_range_start..mouth_range_end)
        .min_by(|&a, &b| path.nodes[a].norm2().total_cmp(&path.nodes[b].norm2()))
        .expect("mouth fillet has nodes");

    let curve = MarkedCurve::closed(path.nodes).with_marks(vec![start, end]);
    let gamma = GammaArc {
        component: 0,
        start,
        end,
    };
    let area = polygon_area(&curve)?;
    let perimeter = polygon_perimeter(&curve)?;
    let simple = is_simple(&curve);
    let gamma_winding = winding_number(&curve.sub_arc(start, end), X_C)?;
    let start_dist = curve.nodes[start].dist(X_O);
    let end_dist = curve.nodes[end].dist(X_C);
    let stick_origin = diag(m * SQRT_2);
    let report = GenerationReport {
        area_deficit: PI * PI - area,
        area_budget: params.epsilon * params.epsilon,
        perimeter,
        node_count: curve.len(),
        simple,
        gamma,
        gamma_winding,
        gamma_start_distance: start_dist,
        gamma_end_distance: end_dist,
        construction_area: w * (s_end - m * SQRT_2) + 0.5 * PI * hw * hw,
    };
    let stick = StickRect {
        origin: stick_origin,
        direction: diag(1.0),
        length: s_end - m * SQRT_2,
        half_width: hw,
    };
    let out = GeneratedPatch {
        boundary: PatchBoundary::single(curve),
        gamma,
        report,
        stick,
    };
    check_torus(&out, params)?;
    Ok(out)
}

fn check_common(report: &GenerationReport, max_perimeter: f64) -> Result<()> {
    if report.area_deficit > report.area_budget {
        return Err(Error::Infeasible {
            reason: "area budget exceeded".into(),
            achieved: report.area_deficit,
            allowed: report.area_budget,
        });
    }
    if report.perimeter > max_perimeter {
        return Err(Error::Infeasible {
            reason: "perimeter too long".into(),
            achieved: report.perimeter,
            allowed: max_perimeter,
        });
    }
    if !report.simple {
        return Err(Error::Infeasible {
            reason: "boundary is not simple".into(),
            achieved: 1.0,
            allowed: 0.0,
        });
    }
    if report.gamma_winding.abs() > 1.0 {
        return Err(Error::Infeasible {
            reason: "gamma winds more than once".into(),
            achieved: report.gamma_winding.abs(),
            allowed: 1.0,
        });
    }
    Ok(())
}

fn check_torus(p: &GeneratedPatch, params: &GeneratorParams) -> Result<()> {
    let r = &p.report;
    check_common(r, TORUS_MAX_PERIMETER)?;
    let inside = p.boundary.components[0]
        .nodes
        .iter()
        .all(|q| q.x > 0.0 && q.y > 0.0 && q.x < PI && q.y < PI);
    if !inside {
        return Err(Error::Domain("boundary leaves (0, pi)^2".into()));
    }
    if r.gamma_start_distance >= params.epsilon_tilde {
        return Err(Error::Infeasible {
            reason: "gamma start outside the corner ball".into(),
            achieved: r.gamma_start_distance,
            allowed: params.epsilon_tilde,
        });
    }
    if r.gamma_end_distance > params.delta * (1.0 + 1e-12) {
        return Err(Error::Infeasible {
            reason: "gamma end outside the core ball".into(),
            achieved: r.gamma_end_distance,
            allowed: params.delta,
        });
    }
    Ok(())
}

/// The unit disk with a thin radial finger along the positive x-axis out to
/// radius `2 + corner_rounding`. Gamma runs from the finger's lower root on
/// the unit circle out along the lower wall to radius 2.
pub fn gen_handle_patch(params: &GeneratorParams) -> Result<GeneratedPatch> {
    params.validate(false)?;
    let hw = 0.5 * params.stick_width;
    let r = params.corner_rounding;
    if hw + r >= 0.5 {
        return Err(Error::Domain("handle too wide for the unit disk".into()));
    }
    let cx = ((1.0 + r).powi(2) - (hw + r).powi(2)).sqrt();
    let lower_c = Point2::new(cx, -(hw + r));
    let upper_c = Point2::new(cx, hw + r);
    let x_end = 2.0 + r - hw;
    let phi = upper_c.y.atan2(upper_c.x);
    // Angle of the unit-circle tangent point, seen from each fillet center.
    let lower_start = (-lower_c.y).atan2(-lower_c.x);
    let upper_end = (-upper_c.y).atan2(-upper_c.x);

    let mut path = PathBuilder::new(params.node_spacing);
    path.arc(X_O, 1.0, phi, TAU - 2.0 * phi);
    let start = path.nodes.len();
    path.arc(lower_c, r, lower_start, FRAC_PI_2 - lower_start);
    let pin = Point2::new((4.0 - hw * hw).sqrt(), -hw);
    let end = path.line_with_pin(Point2::new(cx, -hw), pin, Point2::new(x_end, -hw));
    path.arc(Point2::new(x_end, 0.0), hw, -FRAC_PI_2, PI);
    path.line(Point2::new(x_end, hw), Point2::new(cx, hw));
    path.arc(upper_c, r, -FRAC_PI_2, upper_end + FRAC_PI_2);

    let curve = MarkedCurve::closed(path.nodes).with_marks(vec![start, end]);
    let gamma = GammaArc {
        component: 0,
        start,
        end,
    };
    let area = polygon_area(&curve)?;
    let sym_diff = area + PI - 2.0 * disk_intersection_area(&curve, X_O, 1.0);
    let report = GenerationReport {
        area_deficit: sym_diff,
        area_budget: params.area_constant * params.epsilon.powi(4),
        perimeter: polygon_perimeter(&curve)?,
        node_count: curve.len(),
        simple: is_simple(&curve),
        gamma,
        gamma_winding: winding_number(&curve.sub_arc(start, end), X_O)?,
        gamma_start_distance: curve.nodes[start].norm(),
        gamma_end_distance: curve.nodes[end].norm(),
        construction_area: 2.0 * hw * (x_end - 1.0) + 0.5 * PI * hw * hw,
    };
    check_common(&report, PLANE_MAX_PERIMETER)?;
    let stick = StickRect {
        origin: Point2::new(1.0, 0.0),
        direction: Point2::new(1.0, 0.0),
        length: x_end - 1.0,
        half_width: hw,
    };
    Ok(GeneratedPatch {
        boundary: PatchBoundary::single(curve),
        gamma,
        report,
        stick,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{point_in_patch, symmetric_difference_area};

    #[test]
    fn torus_preset_meets_budgets() {
        for eps in [0.1, 0.2, 0.3] {
            let g = gen_torus_patch(&GeneratorParams::torus_preset(eps)).unwrap();
            let r = &g.report;
            assert!(r.area_deficit <= eps * eps, "{eps}: {}", r.area_deficit);
            assert!(r.perimeter <= 20.0);
            assert!(r.simple);
            assert!(r.gamma_winding.abs() <= 1.0);
            assert!(r.gamma_start_distance < 0.03);
            assert!((r.gamma_end_distance - 0.25).abs() < 1e-12);
            assert_eq!(g.boundary.components[0].orientation(), 1);
        }
    }

    #[test]
    fn torus_deficit_matches_construction() {
        let p = GeneratorParams {
            delta: 0.2,
            ..GeneratorParams::torus_preset(0.3)
        };
        let g = gen_torus_patch(&p).unwrap();
        let m = p.margin;
        let frame = PI * PI - (PI - 2.0 * m).powi(2);
        let fillets = 3.0 * (1.0 - 0.25 * PI) * p.corner_rounding.powi(2);
        let expected = frame + fillets + g.report.construction_area;
        // Mouth fillets and polygonal arcs account for the remainder.
        assert!(
            (g.report.area_deficit - expected).abs() < 2e-4,
            "{}",
            g.report.area_deficit
        );
        assert!(g.report.area_deficit <= 0.09);
    }

    #[test]
    fn deficit_vanishes_with_margin_and_stick() {
        let p = GeneratorParams {
            margin: 1e-6,
            stick_width: 1e-7,
            corner_rounding: 1e-3,
            node_spacing: 0.002,
            epsilon_tilde: 0.01,
            ..GeneratorParams::torus_preset(0.3)
        };
        let g = gen_torus_patch(&p).unwrap();
        assert!(g.report.area_deficit < 1e-4, "{}", g.report.area_deficit);
    }

    #[test]
    fn stick_points_are_outside() {
        let g = gen_torus_patch(&GeneratorParams::torus_preset(0.3)).unwrap();
        let q = diag(1.0);
        assert!(g.stick.contains(q));
        assert!(!point_in_patch(q, &g.boundary));
        assert!(point_in_patch(Point2::new(1.0, 1.3), &g.boundary));
    }

    #[test]
    fn infeasible_budget_is_reported() {
        let p = GeneratorParams {
            margin: 0.2,
            ..GeneratorParams::torus_preset(0.3)
        };
        match gen_torus_patch(&p) {
            Err(Error::Infeasible { achieved, allowed, .. }) => {
                assert!(achieved > allowed);
                assert!((allowed - 0.09).abs() < 1e-15);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn handle_preset() {
        let p = GeneratorParams::handle_preset();
        let g = gen_handle_patch(&p).unwrap();
        let r = &g.report;
        assert!(r.area_deficit <= 0.2 * 0.5f64.powi(4));
        assert!((r.gamma_start_distance - 1.0).abs() < 1e-12);
        assert!((r.gamma_end_distance - 2.0).abs() < 1e-12);
        assert!(r.gamma_winding.abs() <= 1.0);
        assert!(r.simple && r.perimeter <= 20.0);
        assert_eq!(g.boundary.components[0].orientation(), 1);
        assert!(g.boundary.components[0].nodes.iter().all(|q| q.norm() < 3.0));
    }

    #[test]
    fn thin_handle_within_small_budget() {
        let budget = 1e-2 * 0.5f64.powi(4);
        let p = GeneratorParams {
            area_constant: 1e-2,
            stick_width: 1e-3 * budget / 1.0,
            corner_rounding: 0.02,
            ..GeneratorParams::handle_preset()
        };
        let g = gen_handle_patch(&p).unwrap();
        assert!(g.report.area_deficit <= budget, "{}", g.report.area_deficit);
    }

    #[test]
    fn handle_grid_symmetric_difference_matches_construction() {
        let p = GeneratorParams {
            stick_width: 0.05,
            area_constant: 1.0,
            node_spacing: 0.005,
            ..GeneratorParams::handle_preset()
        };
        let g = gen_handle_patch(&p).unwrap();
        let res = 2048;
        let grid_err = g.report.perimeter * 6.0 / res as f64;
        let a = symmetric_difference_area(&g.boundary, X_O, 1.0, res).unwrap();
        assert!((a - g.report.construction_area).abs() <= 2.0 * grid_err, "{a}");
    }
}
