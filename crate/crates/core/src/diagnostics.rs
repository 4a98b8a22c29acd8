//! Measurements along a run: winding ledgers, slope fits, velocity gaps to
//! a reference field, and containment of the tracked markers.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::fields::Velocity2;
use crate::geometry::{point_segment_distance, segment_angle, MarkedCurve, Point2, X_C, X_O};
use crate::state::{PatchState, TrackerRole};
use crate::{Error, Result};

/// A continuously lifted angle about a fixed center, advanced by marker
/// displacements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindingLedger {
    pub center: Point2,
    pub initial_angle: f64,
    pub lifted_angle: f64,
    pub last_point: Point2,
}

impl WindingLedger {
    pub fn new(center: Point2, p: Point2) -> Result<Self> {
        let d = p - center;
        if d.norm2() == 0.0 {
            return Err(Error::SingularMarker);
        }
        let a = d.y.atan2(d.x);
        Ok(Self {
            center,
            initial_angle: a,
            lifted_angle: a,
            last_point: p,
        })
    }

    /// Lifts along the displacement to `p`; exact while each displacement
    /// subtends less than pi at the center.
    pub fn update(&mut self, p: Point2) -> Result<f64> {
        let inc = segment_angle(self.last_point, p, self.center, 0)?;
        self.lifted_angle += inc;
        self.last_point = p;
        Ok(inc)
    }

    /// Adds a rate-form increment without moving the reference point.
    pub fn accumulate(&mut self, increment: f64) {
        self.lifted_angle += increment;
    }

    pub fn turns(&self) -> f64 {
        (self.lifted_angle - self.initial_angle) / TAU
    }
}

/// `dt * u . (x - c)^perp / |x - c|^2`, the angle swept about `center` in
/// one step of length `dt`.
pub fn winding_increment(u: Velocity2, marker: Point2, center: Point2, dt: f64) -> Result<f64> {
    let d = marker - center;
    let r2 = d.norm2();
    if r2 == 0.0 {
        return Err(Error::SingularMarker);
    }
    Ok(dt * u.as_point().dot(d.perp()) / r2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub samples: usize,
}

pub const DEFAULT_TRANSIENT: f64 = 0.1;
pub const MIN_FIT_SAMPLES: usize = 10;

/// Least-squares line through the samples after the first 10% of the time
/// span.
pub fn slope_fit(series: &[(f64, f64)]) -> Result<SlopeFit> {
    slope_fit_after(series, DEFAULT_TRANSIENT)
}

pub fn slope_fit_after(series: &[(f64, f64)], transient: f64) -> Result<SlopeFit> {
    let (t0, t1) = match (series.first(), series.last()) {
        (Some(a), Some(b)) => (a.0, b.0),
        _ => {
            return Err(Error::InsufficientData {
                need: MIN_FIT_SAMPLES,
                got: 0,
            })
        }
    };
    let cutoff = t0 + transient * (t1 - t0);
    let kept: Vec<(f64, f64)> = series.iter().copied().filter(|(t, _)| *t >= cutoff).collect();
    if kept.len() < MIN_FIT_SAMPLES {
        return Err(Error::InsufficientData {
            need: MIN_FIT_SAMPLES,
            got: kept.len(),
        });
    }
    let n = kept.len() as f64;
    let mt = kept.iter().map(|p| p.0).sum::<f64>() / n;
    let my = kept.iter().map(|p| p.1).sum::<f64>() / n;
    let stt: f64 = kept.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let sty: f64 = kept.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let syy: f64 = kept.iter().map(|p| (p.1 - my).powi(2)).sum();
    if stt == 0.0 {
        return Err(Error::Domain("slope fit needs distinct times".into()));
    }
    let slope = sty / stt;
    let intercept = my - slope * mt;
    let sse: f64 = kept.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r2 = if syy == 0.0 { 1.0 } else { 1.0 - sse / syy };
    Ok(SlopeFit {
        slope,
        intercept,
        r2,
        samples: kept.len(),
    })
}

/// Largest pointwise deviation between two velocity samples on a common
/// sample set. This is a sup over samples, not a true sup norm.
pub fn stability_gap(velocity: &[Velocity2], reference: &[Velocity2]) -> Result<f64> {
    if velocity.len() != reference.len() {
        return Err(Error::Domain(format!(
            "sample sets differ in size: {} vs {}",
            velocity.len(),
            reference.len()
        )));
    }
    Ok(velocity
        .iter()
        .zip(reference)
        .fold(0.0, |m, (a, b)| m.max((*a - *b).norm())))
}

/// Midpoints of an `n x n` lattice over `[-3, 3]^2` that fall inside
/// `B(x_o, 3)`.
pub fn disk_gap_lattice(n: usize) -> Vec<Point2> {
    let h = 6.0 / n as f64;
    let mut out = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let p = Point2::new(-3.0 + (i as f64 + 0.5) * h, -3.0 + (j as f64 + 0.5) * h);
            if p.norm2() < 9.0 {
                out.push(p);
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum ContainmentSpec {
    /// `x_c*` in the annulus `delta/2 <= |x - x_c| <= 3 delta/2`, `x_o*` in
    /// `B(x_o, delta)`, gamma outside `B(x_c, delta/2)`.
    TorusAnnulus { delta: f64 },
    /// `|x_1| in [3/4, 5/4]`, `|x_2| in [7/4, 9/4]`, gamma outside `B(x_o, 3/4)`.
    PlaneRings,
}

impl ContainmentSpec {
    /// Radius of the ball that gamma must avoid, which is also the
    /// exclusion radius in the length bound.
    pub fn exclusion_radius(self) -> f64 {
        match self {
            ContainmentSpec::TorusAnnulus { delta } => 0.5 * delta,
            ContainmentSpec::PlaneRings => 0.75,
        }
    }

    pub fn center(self) -> Point2 {
        match self {
            ContainmentSpec::TorusAnnulus { .. } => X_C,
            ContainmentSpec::PlaneRings => X_O,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContainmentFlags {
    pub inner_ok: bool,
    pub outer_ok: bool,
    pub arc_ok: bool,
}

impl ContainmentFlags {
    pub fn all(self) -> bool {
        self.inner_ok && self.outer_ok && self.arc_ok
    }
}

fn in_band(r: f64, lo: f64, hi: f64) -> bool {
    r >= lo && r <= hi
}

/// Evaluates the containment flags. Missing trackers or a missing gamma arc
/// count as satisfied.
pub fn containment_check(state: &PatchState, spec: ContainmentSpec) -> ContainmentFlags {
    let pos = |role| state.tracker(role).map(|(k, _)| state.tracker_position(k));
    let (inner_ok, outer_ok) = match spec {
        ContainmentSpec::TorusAnnulus { delta } => (
            pos(TrackerRole::Inner).is_none_or(|p| in_band(p.dist(X_C), 0.5 * delta, 1.5 * delta)),
            pos(TrackerRole::Outer).is_none_or(|p| p.dist(X_O) <= delta),
        ),
        ContainmentSpec::PlaneRings => (
            pos(TrackerRole::Inner).is_none_or(|p| in_band(p.norm(), 0.75, 1.25)),
            pos(TrackerRole::Outer).is_none_or(|p| in_band(p.norm(), 1.75, 2.25)),
        ),
    };
    let arc_ok = match state.gamma {
        None => true,
        Some(g) => {
            let c = &state.boundary.components[g.component];
            let arc = c.sub_arc(c.marks[g.start_slot], c.marks[g.end_slot]);
            arc_distance(&arc, spec.center()) >= spec.exclusion_radius()
        }
    };
    ContainmentFlags {
        inner_ok,
        outer_ok,
        arc_ok,
    }
}

fn arc_distance(arc: &MarkedCurve, center: Point2) -> f64 {
    arc.segments()
        .map(|(a, b)| point_segment_distance(center, a, b))
        .fold(f64::INFINITY, f64::min)
}

/// First times at which each containment flag failed.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ContainmentMonitor {
    pub inner_failed_at: Option<f64>,
    pub outer_failed_at: Option<f64>,
    pub arc_failed_at: Option<f64>,
}

impl ContainmentMonitor {
    pub fn observe(&mut self, t: f64, flags: ContainmentFlags) {
        if !flags.inner_ok && self.inner_failed_at.is_none() {
            self.inner_failed_at = Some(t);
        }
        if !flags.outer_ok && self.outer_failed_at.is_none() {
            self.outer_failed_at = Some(t);
        }
        if !flags.arc_ok && self.arc_failed_at.is_none() {
            self.arc_failed_at = Some(t);
        }
    }

    /// Earliest failure of any flag.
    pub fn breakdown_time(&self) -> Option<f64> {
        [self.inner_failed_at, self.outer_failed_at, self.arc_failed_at]
            .into_iter()
            .flatten()
            .reduce(f64::min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRow {
    pub t: f64,
    pub perimeter: f64,
    pub area: f64,
    pub turns_inner: f64,
    pub turns_outer: f64,
    /// Geometric winding of gamma about its center; NaN without gamma.
    pub arc_turns: f64,
    /// NaN when not sampled at this row.
    pub stability_gap: f64,
    pub inner_ok: bool,
    pub outer_ok: bool,
    pub arc_ok: bool,
    pub node_count: usize,
}

impl DiagnosticsRow {
    pub fn containment_ok(&self) -> bool {
        self.inner_ok && self.outer_ok && self.arc_ok
    }

    pub fn net_turns(&self) -> f64 {
        self.turns_inner - self.turns_outer
    }

    /// `perimeter >= 2 pi r (|net turns| - slack)` whenever containment
    /// holds; vacuous otherwise.
    pub fn satisfies_length_chain(&self, exclusion_radius: f64, slack: f64) -> bool {
        !self.containment_ok() || self.perimeter >= chain_bound(exclusion_radius, self.net_turns(), slack)
    }
}

/// Allowance for the corner marker plus the initial winding of gamma.
pub const CHAIN_SLACK: f64 = 2.0;

/// Allowance in the plane, where both markers start on the same ray.
pub const PLANE_CHAIN_SLACK: f64 = 1.0;

pub fn chain_bound(exclusion_radius: f64, net_turns: f64, slack: f64) -> f64 {
    TAU * exclusion_radius * (net_turns.abs() - slack).max(0.0)
}

/// Builds a row from the state; `stability_gap` is supplied by the engine.
pub fn diagnostics_row(state: &PatchState, spec: ContainmentSpec, stability_gap: f64) -> DiagnosticsRow {
    let flags = containment_check(state, spec);
    DiagnosticsRow {
        t: state.t,
        perimeter: state.boundary.perimeter(),
        area: state.boundary.area(),
        turns_inner: state.turns(TrackerRole::Inner),
        turns_outer: state.turns(TrackerRole::Outer),
        arc_turns: state.gamma_winding().unwrap_or(f64::NAN),
        stability_gap,
        inner_ok: flags.inner_ok,
        outer_ok: flags.outer_ok,
        arc_ok: flags.arc_ok,
        node_count: state.boundary.node_count(),
    }
}

/// `|N[gamma_t] - N[gamma_0] - (ledger_end - ledger_start)|` in turns, or
/// `None` when gamma is absent or cannot be lifted.
pub fn ledger_consistency(state: &PatchState) -> Option<f64> {
    let g = state.gamma?;
    let now = state.gamma_winding().ok()?;
    let ledgers = state.gamma_ledger_difference()?;
    Some((now - g.initial_winding - ledgers).abs())
}

/// Net turn rate the plane argument guarantees between radii 1 and 2.
pub fn plane_turn_rate_bound() -> f64 {
    ((20.0 / 56.0) / 1.25 - (17.0 / 56.0) / 1.75) / TAU
}

/// Period of rigid rotation at the rate of the quadratic model near `x_c`.
pub const RIGID_PERIOD: f64 = 4.0 * PI;
