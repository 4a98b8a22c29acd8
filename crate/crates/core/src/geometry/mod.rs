//! Curve and patch geometry.
//!
//! Curves are polylines of marker nodes. A closed curve joins its last node
//! back to its first. Marks are node indices carried through refinement so
//! that tracked particles keep their identity while the polyline is
//! re-sampled.

mod generate;
mod measure;
mod refine;
mod region;

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use generate::{
    gen_handle_patch, gen_torus_patch, GammaArc, GeneratedPatch, GenerationReport, GeneratorParams, StickRect,
    PLANE_MAX_PERIMETER, TORUS_MAX_PERIMETER,
};
pub use measure::{
    arc_winding, length_lower_bound, polygon_area, polygon_perimeter, segment_angle, winding_number, AngleLift,
    SUBTENSION_LIMIT,
};
pub use refine::refine_and_redistribute;
pub use region::{
    disk_intersection_area, hausdorff_distance, is_simple, point_in_patch, point_segment_distance, scanline_crossings,
    symmetric_difference_area,
};

/// The corner of the fundamental cell, `x_o = (0, 0)`.
pub const X_O: Point2 = Point2 { x: 0.0, y: 0.0 };
/// The center of `[0, pi]^2`, `x_c = (pi/2, pi/2)`.
pub const X_C: Point2 = Point2 {
    x: std::f64::consts::FRAC_PI_2,
    y: std::f64::consts::FRAC_PI_2,
};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn polar(center: Point2, radius: f64, angle: f64) -> Self {
        Self::new(center.x + radius * angle.cos(), center.y + radius * angle.sin())
    }

    #[inline]
    pub fn dot(self, o: Point2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 2D cross product.
    #[inline]
    pub fn cross(self, o: Point2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    #[inline]
    pub fn norm2(self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    #[inline]
    pub fn dist(self, o: Point2) -> f64 {
        (self - o).norm()
    }

    /// Counterclockwise quarter turn, `(x, y) -> (-y, x)`.
    #[inline]
    pub fn perp(self) -> Point2 {
        Point2::new(-self.y, self.x)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn lerp(self, o: Point2, s: f64) -> Point2 {
        self + (o - self) * s
    }
}

impl Add for Point2 {
    type Output = Point2;
    #[inline]
    fn add(self, o: Point2) -> Point2 {
        Point2::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Point2 {
    #[inline]
    fn add_assign(&mut self, o: Point2) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl Sub for Point2 {
    type Output = Point2;
    #[inline]
    fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    #[inline]
    fn mul(self, s: f64) -> Point2 {
        Point2::new(self.x * s, self.y * s)
    }
}

impl Neg for Point2 {
    type Output = Point2;
    #[inline]
    fn neg(self) -> Point2 {
        Point2::new(-self.x, -self.y)
    }
}

/// An oriented polyline of marker nodes, optionally closed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkedCurve {
    pub nodes: Vec<Point2>,
    pub closed: bool,
    /// Node indices of tracked markers. Refinement never removes a marked
    /// node and rewrites these indices when nodes are inserted or removed.
    pub marks: Vec<usize>,
}

impl MarkedCurve {
    pub fn closed(nodes: Vec<Point2>) -> Self {
        Self {
            nodes,
            closed: true,
            marks: Vec::new(),
        }
    }

    pub fn open(nodes: Vec<Point2>) -> Self {
        Self {
            nodes,
            closed: false,
            marks: Vec::new(),
        }
    }

    /// Regular `n`-gon inscribed in the circle, counterclockwise from angle 0.
    pub fn circle(center: Point2, radius: f64, n: usize) -> Self {
        let step = std::f64::consts::TAU / n as f64;
        Self::closed((0..n).map(|k| Point2::polar(center, radius, k as f64 * step)).collect())
    }

    pub fn ellipse(center: Point2, a: f64, b: f64, n: usize) -> Self {
        let step = std::f64::consts::TAU / n as f64;
        Self::closed(
            (0..n)
                .map(|k| {
                    let th = k as f64 * step;
                    Point2::new(center.x + a * th.cos(), center.y + b * th.sin())
                })
                .collect(),
        )
    }

    pub fn with_marks(mut self, marks: Vec<usize>) -> Self {
        self.marks = marks;
        self
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn segment_count(&self) -> usize {
        match (self.closed, self.nodes.len()) {
            (_, 0) | (_, 1) => 0,
            (true, n) => n,
            (false, n) => n - 1,
        }
    }

    /// Endpoints of segment `i`.
    #[inline]
    pub fn segment(&self, i: usize) -> (Point2, Point2) {
        let n = self.nodes.len();
        (self.nodes[i], self.nodes[(i + 1) % n])
    }

    pub fn segments(&self) -> impl Iterator<Item = (Point2, Point2)> + '_ {
        (0..self.segment_count()).map(move |i| self.segment(i))
    }

    /// +1 for counterclockwise, -1 for clockwise, 0 for zero signed area.
    pub fn orientation(&self) -> i8 {
        match polygon_area(self) {
            Ok(a) if a > 0.0 => 1,
            Ok(a) if a < 0.0 => -1,
            _ => 0,
        }
    }

    /// Same curve traversed backwards; marks follow their nodes.
    pub fn reversed(&self) -> Self {
        let n = self.nodes.len();
        let mut nodes = self.nodes.clone();
        nodes.reverse();
        Self {
            nodes,
            closed: self.closed,
            marks: self.marks.iter().map(|&m| n - 1 - m).collect(),
        }
    }

    pub fn mark_point(&self, k: usize) -> Point2 {
        self.nodes[self.marks[k]]
    }

    /// Node indices walked forward from `from` to `to` inclusive.
    pub fn arc_indices(&self, from: usize, to: usize) -> Vec<usize> {
        let n = self.nodes.len();
        if self.closed {
            let count = (to + n - from) % n;
            (0..=count).map(|k| (from + k) % n).collect()
        } else if from <= to {
            (from..=to).collect()
        } else {
            (to..=from).rev().collect()
        }
    }

    /// The forward sub-arc from `from` to `to` as an open curve.
    pub fn sub_arc(&self, from: usize, to: usize) -> MarkedCurve {
        MarkedCurve::open(self.arc_indices(from, to).into_iter().map(|i| self.nodes[i]).collect())
    }

    pub fn validate(&self) -> Result<()> {
        let need = if self.closed { 3 } else { 2 };
        if self.nodes.len() < need {
            return Err(Error::InvalidCurve(format!(
                "{} nodes, need at least {need}",
                self.nodes.len()
            )));
        }
        if let Some(i) = self.nodes.iter().position(|p| !p.is_finite()) {
            return Err(Error::InvalidCurve(format!("node {i} is not finite")));
        }
        if let Some(&m) = self.marks.iter().find(|&&m| m >= self.nodes.len()) {
            return Err(Error::InvalidCurve(format!("mark {m} out of range")));
        }
        Ok(())
    }
}

/// The boundary of a patch `omega = strength * 1_Omega`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchBoundary {
    pub components: Vec<MarkedCurve>,
    pub strength: f64,
}

impl PatchBoundary {
    pub fn new(components: Vec<MarkedCurve>) -> Self {
        Self {
            components,
            strength: 1.0,
        }
    }

    pub fn single(curve: MarkedCurve) -> Self {
        Self::new(vec![curve])
    }

    pub fn empty() -> Self {
        Self::new(Vec::new())
    }

    pub fn node_count(&self) -> usize {
        self.components.iter().map(MarkedCurve::len).sum()
    }

    pub fn perimeter(&self) -> f64 {
        self.components
            .iter()
            .map(|c| polygon_perimeter(c).unwrap_or(0.0))
            .sum()
    }

    /// Sum of signed component areas, which is the patch area when the
    /// components are oriented outward-positive.
    pub fn area(&self) -> f64 {
        self.components.iter().map(|c| polygon_area(c).unwrap_or(0.0)).sum()
    }

    pub fn validate(&self) -> Result<()> {
        for (k, c) in self.components.iter().enumerate() {
            if !c.closed {
                return Err(Error::InvalidCurve(format!("component {k} is not closed")));
            }
            c.validate()?;
        }
        Ok(())
    }
}
