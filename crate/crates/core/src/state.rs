//! Evolving patch state with tracked boundary markers.

use serde::{Deserialize, Serialize};

use crate::diagnostics::{ContainmentMonitor, DiagnosticsRow, WindingLedger};
use crate::geometry::{GammaArc, PatchBoundary, Point2};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrackerRole {
    /// The marker expected to rotate faster: `x_c*` on the torus, `x_1` in
    /// the plane.
    Inner,
    Outer,
}

/// A marked boundary node together with its winding ledger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tracker {
    pub name: String,
    pub role: TrackerRole,
    pub component: usize,
    /// Index into the component's `marks`.
    pub slot: usize,
    pub ledger: WindingLedger,
}

/// The tracked sub-arc between two trackers, with its initial winding.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaTrack {
    pub component: usize,
    pub start_slot: usize,
    pub end_slot: usize,
    pub center: Point2,
    pub initial_winding: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchState {
    pub t: f64,
    pub step: u64,
    /// Current step size; engines may reduce it on a stability violation.
    pub dt: f64,
    pub boundary: PatchBoundary,
    pub trackers: Vec<Tracker>,
    pub gamma: Option<GammaTrack>,
    pub monitor: ContainmentMonitor,
    /// Steps in which a marker had to be clamped back into the quarter cell.
    pub symmetry_violations: u64,
    pub notes: Vec<String>,
}

impl PatchState {
    pub fn new(boundary: PatchBoundary, dt: f64) -> Self {
        Self {
            t: 0.0,
            step: 0,
            dt,
            boundary,
            trackers: Vec::new(),
            gamma: None,
            monitor: ContainmentMonitor::default(),
            symmetry_violations: 0,
            notes: Vec::new(),
        }
    }

    /// Registers the node at `marks[slot]` of `component` as a tracker with
    /// a ledger about `center`.
    pub fn track(
        &mut self,
        name: &str,
        role: TrackerRole,
        component: usize,
        slot: usize,
        center: Point2,
    ) -> Result<()> {
        let c = self
            .boundary
            .components
            .get(component)
            .ok_or_else(|| Error::Domain(format!("no component {component}")))?;
        let idx = *c
            .marks
            .get(slot)
            .ok_or_else(|| Error::Domain(format!("component {component} has no mark slot {slot}")))?;
        let ledger = WindingLedger::new(center, c.nodes[idx])?;
        self.trackers.push(Tracker {
            name: name.to_string(),
            role,
            component,
            slot,
            ledger,
        });
        Ok(())
    }

    /// Declares the forward arc between two mark slots as gamma.
    pub fn set_gamma(&mut self, component: usize, start_slot: usize, end_slot: usize, center: Point2) -> Result<()> {
        let c = &self.boundary.components[component];
        let w = crate::geometry::arc_winding(c, c.marks[start_slot], c.marks[end_slot], center)?;
        self.gamma = Some(GammaTrack {
            component,
            start_slot,
            end_slot,
            center,
            initial_winding: w,
        });
        Ok(())
    }

    /// Sets up the standard two-tracker layout from a generated patch whose
    /// single component carries marks `[gamma.start, gamma.end]`.
    pub fn with_gamma_trackers(
        boundary: PatchBoundary,
        dt: f64,
        gamma: GammaArc,
        center: Point2,
        start_role: TrackerRole,
        names: (&str, &str),
    ) -> Result<Self> {
        let mut s = Self::new(boundary, dt);
        let c = &s.boundary.components[gamma.component];
        if c.marks.len() < 2 || c.marks[0] != gamma.start || c.marks[1] != gamma.end {
            return Err(Error::Domain("gamma endpoints must be the first two marks".into()));
        }
        let end_role = match start_role {
            TrackerRole::Inner => TrackerRole::Outer,
            TrackerRole::Outer => TrackerRole::Inner,
        };
        s.track(names.0, start_role, gamma.component, 0, center)?;
        s.track(names.1, end_role, gamma.component, 1, center)?;
        s.set_gamma(gamma.component, 0, 1, center)?;
        Ok(s)
    }

    pub fn tracker_position(&self, k: usize) -> Point2 {
        let tr = &self.trackers[k];
        self.boundary.components[tr.component].mark_point(tr.slot)
    }

    pub fn tracker(&self, role: TrackerRole) -> Option<(usize, &Tracker)> {
        self.trackers.iter().enumerate().find(|(_, t)| t.role == role)
    }

    pub fn turns(&self, role: TrackerRole) -> f64 {
        self.tracker(role).map_or(0.0, |(_, t)| t.ledger.turns())
    }

    /// Current geometric winding of gamma about its center.
    pub fn gamma_winding(&self) -> Result<f64> {
        let g = self
            .gamma
            .ok_or_else(|| Error::Domain("state has no gamma arc".into()))?;
        let c = &self.boundary.components[g.component];
        crate::geometry::arc_winding(c, c.marks[g.start_slot], c.marks[g.end_slot], g.center)
    }

    /// Ledger turns of the gamma end tracker minus the start tracker.
    pub fn gamma_ledger_difference(&self) -> Option<f64> {
        let g = self.gamma?;
        let find = |slot: usize| {
            self.trackers
                .iter()
                .find(|t| t.component == g.component && t.slot == slot)
                .map(|t| t.ledger.turns())
        };
        Some(find(g.end_slot)? - find(g.start_slot)?)
    }

    /// Moves every tracker's ledger to its marker's current position.
    pub fn update_ledgers(&mut self) -> Result<()> {
        for k in 0..self.trackers.len() {
            let p = self.tracker_position(k);
            self.trackers[k].ledger.update(p)?;
        }
        Ok(())
    }

    /// All nodes of all components, in component order.
    pub fn flat_nodes(&self) -> Vec<Point2> {
        self.boundary
            .components
            .iter()
            .flat_map(|c| c.nodes.iter().copied())
            .collect()
    }

    /// Writes flat node positions back, component by component.
    pub fn set_flat_nodes(&mut self, flat: &[Point2]) {
        let mut k = 0;
        for c in &mut self.boundary.components {
            let n = c.nodes.len();
            c.nodes.copy_from_slice(&flat[k..k + n]);
            k += n;
        }
    }
}

/// Copy of `boundary` with its nodes replaced by `flat`.
pub fn with_flat_nodes(boundary: &PatchBoundary, flat: &[Point2]) -> PatchBoundary {
    let mut b = boundary.clone();
    let mut k = 0;
    for c in &mut b.components {
        let n = c.nodes.len();
        c.nodes.copy_from_slice(&flat[k..k + n]);
        k += n;
    }
    b
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "kebab-case")]
pub enum HaltReason {
    Completed,
    NodeCap { nodes: usize, t: f64 },
}

/// What an engine run hands back: the last state, every emitted row, and
/// why it stopped.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub final_state: PatchState,
    pub rows: Vec<DiagnosticsRow>,
    pub halt: HaltReason,
}

/// Number of fixed steps covering `t_end`, rejecting spans that are not an
/// integer multiple of `dt`.
pub fn step_count(t_end: f64, dt: f64) -> Result<u64> {
    if !(dt > 0.0 && t_end > 0.0 && dt.is_finite() && t_end.is_finite()) {
        return Err(Error::Config(format!(
            "need dt > 0 and t_end > 0, got {dt} and {t_end}"
        )));
    }
    let k = (t_end / dt).round();
    if (k * dt - t_end).abs() > 1e-9 * t_end {
        return Err(Error::Config(format!("t_end {t_end} is not a multiple of dt {dt}")));
    }
    Ok(k as u64)
}
