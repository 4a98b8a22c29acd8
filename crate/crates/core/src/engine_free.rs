//! Whole-plane contour dynamics.
//!
//! The velocity of a patch `omega = s 1_Omega` reduces to a boundary
//! integral of the logarithmic kernel,
//! `u(x) = -(s / 2 pi) sum_segments int ln|x - y| dy`,
//! where each segment integral has a closed form.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{
    containment_check, diagnostics_row, disk_gap_lattice, stability_gap, ContainmentSpec, DiagnosticsRow,
};
use crate::fields::{disk_velocity, Velocity2};
use crate::geometry::{is_simple, refine_and_redistribute, MarkedCurve, PatchBoundary, Point2};
use crate::integrate::rk4_step;
use crate::state::{step_count, with_flat_nodes, HaltReason, PatchState, RunOutcome};
use crate::{Error, Result};

/// How each segment's log integral is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Quadrature {
    #[default]
    AnalyticSegment,
    /// `k`-point Gauss-Legendre on segments at least one length away from
    /// the target, closed form on nearer ones.
    Gauss(usize),
}

impl FromStr for Quadrature {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "analytic-segment" {
            return Ok(Quadrature::AnalyticSegment);
        }
        let k = s
            .strip_prefix("gauss-")
            .and_then(|k| k.parse::<usize>().ok())
            .filter(|&k| (1..=32).contains(&k))
            .ok_or_else(|| Error::Config(format!("unknown quadrature '{s}'")))?;
        Ok(Quadrature::Gauss(k))
    }
}

impl fmt::Display for Quadrature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Quadrature::AnalyticSegment => write!(f, "analytic-segment"),
            Quadrature::Gauss(k) => write!(f, "gauss-{k}"),
        }
    }
}

impl TryFrom<String> for Quadrature {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Quadrature> for String {
    fn from(q: Quadrature) -> String {
        q.to_string()
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]` by Newton iteration on
/// the Legendre recurrence.
pub fn gauss_legendre(k: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(k);
    for i in 0..k {
        let mut x = (PI * (i as f64 + 0.75) / (k as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for j in 2..=k {
                let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = k as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out.reverse();
    out
}

#[inline]
fn ln_norm2(p: Point2) -> f64 {
    let r2 = p.norm2();
    if r2 > 0.0 {
        r2.ln()
    } else {
        0.0
    }
}

/// `int_0^L ln|p_a + s tau| ds` for the segment from `x + p_a` to `x + p_b`,
/// given `l = ln|p|^2` at both ends.
#[inline]
fn segment_log_integral(pa: Point2, pb: Point2, la: f64, lb: f64, len: f64) -> f64 {
    let tau = (pb - pa) * (1.0 / len);
    let sa = pa.dot(tau);
    let sb = pb.dot(tau);
    let c = pa.cross(pb).abs();
    0.5 * (sb * lb - sa * la) - len + (c / len) * c.atan2(pa.dot(pb))
}

fn component_sum(x: Point2, c: &MarkedCurve, quad: Quadrature, rule: &[(f64, f64)]) -> Point2 {
    let n = c.nodes.len();
    let segs = c.segment_count();
    let mut acc = Point2::default();
    if segs == 0 {
        return acc;
    }
    let mut pa = c.nodes[0] - x;
    let mut la = ln_norm2(pa);
    for i in 0..segs {
        let pb = c.nodes[(i + 1) % n] - x;
        let lb = ln_norm2(pb);
        let d = pb - pa;
        let len = d.norm();
        if len > 0.0 {
            let far = match quad {
                Quadrature::AnalyticSegment => false,
                Quadrature::Gauss(_) => (pa + pb).norm() * 0.5 >= len,
            };
            let integral = if far {
                let half = 0.5 * len;
                let mid = (pa + pb) * 0.5;
                let dir = d * (1.0 / len);
                rule.iter()
                    .map(|&(s, w)| w * 0.5 * ln_norm2(mid + dir * (s * half)))
                    .sum::<f64>()
                    * half
            } else {
                segment_log_integral(pa, pb, la, lb, len)
            };
            acc += d * (integral / len);
        }
        pa = pb;
        la = lb;
    }
    acc
}

/// Patch velocity at `x`, summing segments in ascending index order.
pub fn cd_velocity(x: Point2, boundary: &PatchBoundary) -> Velocity2 {
    cd_velocity_with(x, boundary, Quadrature::AnalyticSegment)
}

pub fn cd_velocity_with(x: Point2, boundary: &PatchBoundary, quad: Quadrature) -> Velocity2 {
    let rule = match quad {
        Quadrature::Gauss(k) => gauss_legendre(k),
        Quadrature::AnalyticSegment => Vec::new(),
    };
    velocity_with_rule(x, boundary, quad, &rule)
}

fn velocity_with_rule(x: Point2, boundary: &PatchBoundary, quad: Quadrature, rule: &[(f64, f64)]) -> Velocity2 {
    let mut acc = Point2::default();
    for c in &boundary.components {
        acc += component_sum(x, c, quad, rule);
    }
    Velocity2::from(acc * (-boundary.strength / TAU))
}

/// Velocity at many targets. Each target's sum is independent, so the
/// result does not depend on the number of worker threads.
pub fn cd_velocity_many(targets: &[Point2], boundary: &PatchBoundary, quad: Quadrature) -> Vec<Velocity2> {
    let rule = match quad {
        Quadrature::Gauss(k) => gauss_legendre(k),
        Quadrature::AnalyticSegment => Vec::new(),
    };
    targets
        .par_iter()
        .map(|&x| velocity_with_rule(x, boundary, quad, &rule))
        .collect()
}

fn default_stride() -> u64 {
    100
}

fn default_max_nodes() -> usize {
    20_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FreeRunConfig {
    pub dt: f64,
    pub t_end: f64,
    pub h_min: f64,
    pub h_max: f64,
    #[serde(default)]
    pub quadrature: Quadrature,
    #[serde(default = "default_stride")]
    pub output_stride: u64,
    #[serde(default = "default_max_nodes")]
    pub max_nodes: usize,
    /// Side of the lattice over `B(x_o, 3)` for the gap to the disk field;
    /// 0 skips the gap.
    #[serde(default)]
    pub gap_lattice: usize,
    /// Record a note at each output row where the boundary is not simple.
    #[serde(default)]
    pub check_simple: bool,
}

impl FreeRunConfig {
    pub fn validate(&self) -> Result<u64> {
        let steps = step_count(self.t_end, self.dt)?;
        if !(self.h_min > 0.0 && self.h_min < 0.5 * self.h_max) {
            return Err(Error::Config(format!(
                "need 0 < h_min < h_max/2, got {} and {}",
                self.h_min, self.h_max
            )));
        }
        if self.dt > self.h_min {
            return Err(Error::Config(format!(
                "dt {} exceeds h_min {}; markers could skip a node spacing per step",
                self.dt, self.h_min
            )));
        }
        if self.output_stride == 0 {
            return Err(Error::Config("output_stride must be at least 1".into()));
        }
        Ok(steps)
    }

    /// Rankine vortex steady-state check.
    pub fn disk_preset() -> Self {
        Self {
            dt: 0.01,
            t_end: 10.0,
            h_min: 0.01,
            h_max: 0.05,
            quadrature: Quadrature::AnalyticSegment,
            output_stride: 50,
            max_nodes: default_max_nodes(),
            gap_lattice: 0,
            check_simple: false,
        }
    }

    /// One rotation period of the 2:1 ellipse, `9 pi`, in 1500 steps.
    pub fn kirchhoff_preset() -> Self {
        Self {
            dt: 9.0 * PI / 1500.0,
            t_end: 9.0 * PI,
            h_min: 0.02,
            h_max: 0.08,
            quadrature: Quadrature::AnalyticSegment,
            output_stride: 50,
            max_nodes: default_max_nodes(),
            gap_lattice: 0,
            check_simple: false,
        }
    }

    /// Handle run. A coarser band lets the two handle walls cross as the
    /// handle wraps, and the crossings show up as area drift.
    pub fn handle_preset() -> Self {
        Self {
            dt: 0.02,
            t_end: 40.0,
            h_min: 0.02,
            h_max: 0.05,
            quadrature: Quadrature::AnalyticSegment,
            output_stride: 50,
            max_nodes: default_max_nodes(),
            gap_lattice: 256,
            check_simple: false,
        }
    }
}

/// Advances every node by one RK4 step, moves the ledgers, re-samples
/// every component into the spacing band and updates containment.
pub fn step(state: &mut PatchState, cfg: &FreeRunConfig, spec: Option<ContainmentSpec>) -> Result<()> {
    let dt = cfg.dt;
    let x = state.flat_nodes();
    let template = state.boundary.clone();
    let next = rk4_step(&x, dt, |stage| {
        let b = with_flat_nodes(&template, stage);
        Ok(cd_velocity_many(stage, &b, cfg.quadrature))
    })?;
    state.set_flat_nodes(&next);
    state.update_ledgers()?;
    for c in &mut state.boundary.components {
        *c = refine_and_redistribute(c, cfg.h_min, cfg.h_max)?;
    }
    state.step += 1;
    state.t = state.step as f64 * dt;
    if let Some(spec) = spec {
        let flags = containment_check(state, spec);
        state.monitor.observe(state.t, flags);
    }
    Ok(())
}

/// Sup over the disk lattice of the deviation from the Rankine field.
pub fn disk_gap(boundary: &PatchBoundary, lattice: &[Point2]) -> Result<f64> {
    let u = cd_velocity_many(lattice, boundary, Quadrature::AnalyticSegment);
    let reference: Vec<Velocity2> = lattice.iter().map(|&p| disk_velocity(p)).collect();
    stability_gap(&u, &reference)
}

/// Runs to `t_end` from `initial` (which may be a resumed state), emitting
/// a row at every step that is a multiple of `output_stride`.
pub fn run_free<F>(
    cfg: &FreeRunConfig,
    initial: PatchState,
    spec: Option<ContainmentSpec>,
    mut observer: F,
) -> Result<RunOutcome>
where
    F: FnMut(&PatchState, &DiagnosticsRow) -> Result<()>,
{
    let steps = cfg.validate()?;
    let lattice = if cfg.gap_lattice > 0 {
        disk_gap_lattice(cfg.gap_lattice)
    } else {
        Vec::new()
    };
    let spec_or_rings = spec.unwrap_or(ContainmentSpec::PlaneRings);
    let mut state = initial;
    state.dt = cfg.dt;
    let mut rows = Vec::new();
    let mut emit = |state: &mut PatchState, rows: &mut Vec<DiagnosticsRow>| -> Result<()> {
        let gap = if lattice.is_empty() {
            f64::NAN
        } else {
            disk_gap(&state.boundary, &lattice)?
        };
        if cfg.check_simple && !state.boundary.components.iter().all(is_simple) {
            state.notes.push(format!("boundary not simple at t={}", state.t));
        }
        let row = diagnostics_row(state, spec_or_rings, gap);
        observer(state, &row)?;
        rows.push(row);
        Ok(())
    };
    if state.step.is_multiple_of(cfg.output_stride) {
        emit(&mut state, &mut rows)?;
    }
    let mut halt = HaltReason::Completed;
    while state.step < steps {
        step(&mut state, cfg, spec)?;
        let nodes = state.boundary.node_count();
        let capped = nodes > cfg.max_nodes;
        if capped || state.step.is_multiple_of(cfg.output_stride) {
            emit(&mut state, &mut rows)?;
        }
        if capped {
            halt = HaltReason::NodeCap { nodes, t: state.t };
            break;
        }
    }
    Ok(RunOutcome {
        final_state: state,
        rows,
        halt,
    })
}

/// Oracle for the ellipse: rotation rate `ab / (a + b)^2`.
pub fn kirchhoff_rate(a: f64, b: f64) -> f64 {
    a * b / (a + b).powi(2)
}
