//! Odd-symmetric torus evolution by contour advection.
//!
//! Markers carry the patch boundary in the quarter cell `[0, pi]^2`. At
//! every Runge-Kutta stage the patch is rasterized onto the solver grid,
//! the odd-odd Poisson problem is solved spectrally and the velocity is
//! interpolated back to the markers.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use serde::{Deserialize, Serialize};

use crate::diagnostics::{containment_check, diagnostics_row, stability_gap, ContainmentSpec, DiagnosticsRow};
use crate::fields::Velocity2;
use crate::geometry::{refine_and_redistribute, GeneratedPatch, MarkedCurve, PatchBoundary, Point2, X_C, X_O};
use crate::integrate::rk4_step;
use crate::spectral::{FieldKind, FlowGrid, GridField, Interp, SpectralSolver};
use crate::state::{with_flat_nodes, HaltReason, PatchState, RunOutcome, TrackerRole};
use crate::{Error, Result};

/// Sub-rows per grid cell in the rasterizer.
const SUB_ROWS: usize = 4;

/// Tolerance for nodes sitting on the edge of the quarter cell.
const EDGE_TOL: f64 = 1e-12;

/// Cell-averaged indicator of the patch on the `(n+1)^2` solver nodes.
///
/// Each node owns the dual cell of side `h` centred on it. The cell is cut
/// into four horizontal sub-rows; along each sub-row's midline the even-odd
/// crossings give exact covered intervals, which are then split across the
/// cells they overlap.
pub fn rasterize(boundary: &PatchBoundary, n: usize) -> Result<GridField> {
    if n < 4 {
        return Err(Error::Domain(format!("grid size must be at least 4, got {n}")));
    }
    for c in &boundary.components {
        if let Some(p) = c
            .nodes
            .iter()
            .find(|p| !(p.x >= -EDGE_TOL && p.x <= PI + EDGE_TOL && p.y >= -EDGE_TOL && p.y <= PI + EDGE_TOL))
        {
            return Err(Error::Domain(format!(
                "boundary node ({}, {}) lies outside the quarter cell",
                p.x, p.y
            )));
        }
    }
    let h = PI / n as f64;
    let dy = h / SUB_ROWS as f64;
    let rows = SUB_ROWS * (n + 1);
    let row_y = |g: usize| -0.5 * h + (g as f64 + 0.5) * dy;
    let mut crossings: Vec<Vec<f64>> = vec![Vec::new(); rows];
    for c in &boundary.components {
        for (a, b) in c.segments() {
            if a.y == b.y {
                continue;
            }
            let (lo, hi) = if a.y < b.y { (a.y, b.y) } else { (b.y, a.y) };
            let g0 = (((lo + 0.5 * h) / dy - 0.5).floor().max(0.0)) as usize;
            let g1 = ((((hi + 0.5 * h) / dy - 0.5).ceil()).max(0.0) as usize).min(rows - 1);
            for (g, row) in crossings.iter_mut().enumerate().take(g1 + 1).skip(g0) {
                let y = row_y(g);
                if (a.y <= y) != (b.y <= y) {
                    row.push(a.x + (y - a.y) / (b.y - a.y) * (b.x - a.x));
                }
            }
        }
    }
    let stride = n + 1;
    let mut values = vec![0.0; stride * stride];
    let weight = boundary.strength / SUB_ROWS as f64;
    for (g, xs) in crossings.iter_mut().enumerate() {
        let j = g / SUB_ROWS;
        if j == 0 || j >= n {
            continue;
        }
        xs.sort_by(f64::total_cmp);
        for pair in xs.chunks_exact(2) {
            let (x0, x1) = (pair[0], pair[1]);
            let i0 = ((x0 / h + 0.5).floor().max(1.0)) as usize;
            let i1 = ((x1 / h + 0.5).floor() as usize).min(n - 1);
            for i in i0..=i1 {
                let left = (i as f64 - 0.5) * h;
                let right = left + h;
                let covered = if x0 <= left && x1 >= right {
                    1.0
                } else {
                    (x1.min(right) - x0.max(left)).max(0.0) / h
                };
                values[i * stride + j] += covered * weight;
            }
        }
    }
    Ok(GridField {
        n,
        kind: FieldKind::Vorticity,
        values,
    })
}

fn default_interp() -> Interp {
    Interp::Bicubic
}

fn default_delta() -> f64 {
    0.25
}

fn default_stride() -> u64 {
    100
}

fn default_max_nodes() -> usize {
    100_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TorusRunConfig {
    pub dt: f64,
    pub t_end: f64,
    pub n: usize,
    pub h_min: f64,
    pub h_max: f64,
    #[serde(default = "default_interp")]
    pub interp: Interp,
    #[serde(default = "default_stride")]
    pub output_stride: u64,
    /// Core exclusion radius for the containment checks.
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_max_nodes")]
    pub max_nodes: usize,
}

impl TorusRunConfig {
    pub fn validate(&self) -> Result<()> {
        crate::state::step_count(self.t_end, self.dt)?;
        if self.n < 4 {
            return Err(Error::Config(format!("grid size must be at least 4, got {}", self.n)));
        }
        if !(self.h_min > 0.0 && self.h_min < 0.5 * self.h_max) {
            return Err(Error::Config(format!(
                "need 0 < h_min < h_max/2, got {} and {}",
                self.h_min, self.h_max
            )));
        }
        if self.output_stride == 0 {
            return Err(Error::Config("output_stride must be at least 1".into()));
        }
        if !(self.delta > 0.0 && self.delta <= 0.25) {
            return Err(Error::Config(format!("delta must lie in (0, 1/4], got {}", self.delta)));
        }
        Ok(())
    }

    /// Patch evolution preset. The grid is coarser than the 512 default so
    /// that a 30-unit run stays affordable; `dt * max|u| <= h` still holds.
    pub fn theorem_preset() -> Self {
        Self {
            dt: 0.02,
            t_end: 30.0,
            n: 128,
            h_min: 0.004,
            h_max: 0.02,
            interp: Interp::Bicubic,
            output_stride: 25,
            delta: 0.25,
            max_nodes: default_max_nodes(),
        }
    }

    /// Frozen-field curve preset on the 512 grid; `dt` is halved from 0.01
    /// to satisfy the grid stability bound.
    pub fn bc_curve_preset() -> Self {
        Self {
            dt: 0.005,
            t_end: 50.0,
            n: 512,
            h_min: 0.002,
            h_max: 0.01,
            interp: Interp::Bicubic,
            output_stride: 100,
            delta: 0.25,
            max_nodes: default_max_nodes(),
        }
    }

    fn row_interval(&self) -> f64 {
        self.output_stride as f64 * self.dt
    }
}

/// Velocity of the patch at arbitrary points, from one rasterize-and-solve.
pub fn patch_flow(boundary: &PatchBoundary, solver: &SpectralSolver) -> Result<FlowGrid> {
    solver.solve(&rasterize(boundary, solver.n())?)
}

fn clamp_to_cell(p: Point2) -> (Point2, bool) {
    let q = Point2::new(p.x.clamp(0.0, PI), p.y.clamp(0.0, PI));
    (q, q != p)
}

/// One contour-advection step. Every stage re-rasterizes the stage
/// positions and re-solves. If `dt * max|u|` exceeds the grid spacing at
/// any stage, `dt` is halved, a note is recorded and the step restarts
/// from the unchanged state.
pub fn step_torus(state: &mut PatchState, cfg: &TorusRunConfig, solver: &SpectralSolver) -> Result<()> {
    let h = PI / solver.n() as f64;
    let x = state.flat_nodes();
    let template = state.boundary.clone();
    let next = loop {
        let dt = state.dt;
        let mut cfl_violation = None;
        let result = rk4_step(&x, dt, |stage| {
            let clamped: Vec<Point2> = stage.iter().map(|&p| clamp_to_cell(p).0).collect();
            let flow = patch_flow(&with_flat_nodes(&template, &clamped), solver)?;
            let speed = flow.max_speed();
            if dt * speed > h && cfl_violation.is_none() {
                cfl_violation = Some(speed);
            }
            Ok(clamped.iter().map(|&p| flow.velocity_at(p, cfg.interp)).collect())
        })?;
        match cfl_violation {
            None => break result,
            Some(speed) => {
                state.notes.push(format!(
                    "t={}: dt {} * max|u| {:.6} exceeds h {:.6}; dt halved",
                    state.t, dt, speed, h
                ));
                state.dt = 0.5 * dt;
            }
        }
    };
    let mut violated = false;
    let next: Vec<Point2> = next
        .into_iter()
        .map(|p| {
            let (q, moved) = clamp_to_cell(p);
            violated |= moved;
            q
        })
        .collect();
    if violated {
        state.symmetry_violations += 1;
    }
    state.set_flat_nodes(&next);
    state.update_ledgers()?;
    for c in &mut state.boundary.components {
        *c = refine_and_redistribute(c, cfg.h_min, cfg.h_max)?;
    }
    state.t += state.dt;
    state.step += 1;
    let flags = containment_check(state, ContainmentSpec::TorusAnnulus { delta: cfg.delta });
    state.monitor.observe(state.t, flags);
    Ok(())
}

/// Tracker layout for a generated torus patch: gamma runs from `x_o*`
/// near the corner to `x_c*` near the center, both ledgers about `x_c`.
pub fn torus_initial_state(generated: &GeneratedPatch, dt: f64) -> Result<PatchState> {
    PatchState::with_gamma_trackers(
        generated.boundary.clone(),
        dt,
        generated.gamma,
        X_C,
        TrackerRole::Outer,
        ("x_o*", "x_c*"),
    )
}

/// Sup over the solver nodes of the deviation from the stationary flow.
pub fn torus_gap(flow: &FlowGrid, reference: &FlowGrid) -> Result<f64> {
    let pack = |f: &FlowGrid| -> Vec<Velocity2> {
        f.u1.values
            .iter()
            .zip(&f.u2.values)
            .map(|(&a, &b)| Velocity2::new(a, b))
            .collect()
    };
    stability_gap(&pack(flow), &pack(reference))
}

struct RowClock {
    interval: f64,
}

impl RowClock {
    fn index(&self, t: f64) -> f64 {
        (t / self.interval).round()
    }

    fn is_row(&self, t: f64) -> bool {
        (t - self.index(t) * self.interval).abs() <= 1e-9 * self.interval.max(1.0)
    }
}

/// Evolves a patch to `t_end`, emitting a row every `output_stride` steps
/// of the configured `dt` (by time, so rows keep their spacing if `dt` is
/// halved).
pub fn run_torus<F>(cfg: &TorusRunConfig, initial: PatchState, mut observer: F) -> Result<RunOutcome>
where
    F: FnMut(&PatchState, &DiagnosticsRow) -> Result<()>,
{
    cfg.validate()?;
    let solver = SpectralSolver::new(cfg.n)?;
    let reference = solver.bc_flow();
    let spec = ContainmentSpec::TorusAnnulus { delta: cfg.delta };
    let clock = RowClock {
        interval: cfg.row_interval(),
    };
    let mut state = initial;
    if state.step == 0 {
        state.dt = cfg.dt;
    }
    let mut rows = Vec::new();
    let mut emit = |state: &PatchState, rows: &mut Vec<DiagnosticsRow>| -> Result<()> {
        let flow = patch_flow(&state.boundary, &solver)?;
        let gap = torus_gap(&flow, &reference)?;
        let row = diagnostics_row(state, spec, gap);
        observer(state, &row)?;
        rows.push(row);
        Ok(())
    };
    if clock.is_row(state.t) {
        emit(&state, &mut rows)?;
    }
    let mut halt = HaltReason::Completed;
    while state.t < cfg.t_end - 0.5 * state.dt {
        step_torus(&mut state, cfg, &solver)?;
        let nodes = state.boundary.node_count();
        let capped = nodes > cfg.max_nodes;
        if capped || clock.is_row(state.t) {
            emit(&state, &mut rows)?;
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

/// The segment `x_o -> x_c` with marks at `x_o`, at
/// `x* = x_c - (delta/2)(1,1)/sqrt 2` and at `x_c`.
pub fn bc_segment(delta: f64, spacing: f64) -> MarkedCurve {
    let length = X_O.dist(X_C);
    let s_star = length - 0.5 * delta;
    let pieces = (length / spacing).ceil() as usize;
    let mut ss: Vec<f64> = (0..=pieces).map(|k| length * k as f64 / pieces as f64).collect();
    let star = ss.iter().position(|&s| s >= s_star).unwrap_or(pieces);
    if (ss[star] - s_star).abs() <= 1e-9 * spacing {
        ss[star] = s_star;
    } else {
        ss.insert(star, s_star);
    }
    let mut nodes: Vec<Point2> = ss.into_iter().map(along_diagonal).collect();
    let last = nodes.len() - 1;
    nodes[last] = X_C;
    MarkedCurve::open(nodes).with_marks(vec![0, star, last])
}

fn along_diagonal(s: f64) -> Point2 {
    Point2::new(s * FRAC_1_SQRT_2, s * FRAC_1_SQRT_2)
}

/// Result of advecting a material curve in the frozen stationary flow.
#[derive(Debug, Clone)]
pub struct BcCurveOutcome {
    pub rows: Vec<DiagnosticsRow>,
    pub final_curve: MarkedCurve,
    /// First time the `x*` ledger completes one turn about `x_c`.
    pub period: Option<f64>,
    /// Largest drift of the stream function at `x*`.
    pub stream_drift: f64,
}

/// Advects an open curve with marks `[x_o, x*, x_c]` as a passive line in
/// the stationary flow sampled on the `cfg.n` grid. Ledgers of `x_o` and
/// `x*` run about `x_c`; gamma is the sub-arc from `x_o` to `x*`.
pub fn run_bc_curve<F>(cfg: &TorusRunConfig, curve: MarkedCurve, mut observer: F) -> Result<BcCurveOutcome>
where
    F: FnMut(&MarkedCurve, &DiagnosticsRow) -> Result<()>,
{
    cfg.validate()?;
    if curve.closed || curve.marks.len() != 3 {
        return Err(Error::Domain("expected an open curve marked at x_o, x* and x_c".into()));
    }
    let solver = SpectralSolver::new(cfg.n)?;
    let flow = solver.bc_flow();
    let h = PI / cfg.n as f64;
    let max_speed = flow.max_speed();
    let mut dt = cfg.dt;
    let mut notes = Vec::new();
    while dt * max_speed > h {
        notes.push(format!("dt {dt} * max|u| {max_speed:.6} exceeds h {h:.6}; dt halved"));
        dt *= 0.5;
    }
    let mut state = PatchState::new(PatchBoundary::new(vec![curve]), dt);
    state.notes = notes;
    state.track("x_o", TrackerRole::Outer, 0, 0, X_C)?;
    state.track("x*", TrackerRole::Inner, 0, 1, X_C)?;
    state.set_gamma(0, 0, 1, X_C)?;
    let psi_star = flow.stream_at(state.tracker_position(1), cfg.interp);
    let mut stream_drift: f64 = 0.0;
    let clock = RowClock {
        interval: cfg.row_interval(),
    };
    let mut rows = Vec::new();
    let mut emit = |state: &PatchState, rows: &mut Vec<DiagnosticsRow>| -> Result<()> {
        let mut row = diagnostics_row(state, ContainmentSpec::TorusAnnulus { delta: cfg.delta }, f64::NAN);
        row.area = f64::NAN;
        row.inner_ok = true;
        row.outer_ok = true;
        observer(&state.boundary.components[0], &row)?;
        rows.push(row);
        Ok(())
    };
    emit(&state, &mut rows)?;
    let mut period = None;
    let mut prev_turns = 0.0;
    while state.t < cfg.t_end - 0.5 * dt {
        let x = state.flat_nodes();
        let next = rk4_step(&x, dt, |stage| {
            Ok(stage.iter().map(|&p| flow.velocity_at(p, cfg.interp)).collect())
        })?;
        let mut violated = false;
        let next: Vec<Point2> = next
            .into_iter()
            .map(|p| {
                let (q, moved) = clamp_to_cell(p);
                violated |= moved;
                q
            })
            .collect();
        if violated {
            state.symmetry_violations += 1;
        }
        state.set_flat_nodes(&next);
        state.update_ledgers()?;
        for c in &mut state.boundary.components {
            *c = refine_and_redistribute(c, cfg.h_min, cfg.h_max)?;
        }
        state.t += dt;
        state.step += 1;
        let turns = state.turns(TrackerRole::Inner);
        if period.is_none() && turns >= 1.0 {
            let frac = (1.0 - prev_turns) / (turns - prev_turns);
            period = Some(state.t - dt + frac * dt);
        }
        prev_turns = turns;
        let psi = flow.stream_at(state.tracker_position(1), cfg.interp);
        stream_drift = stream_drift.max((psi - psi_star).abs());
        let nodes = state.boundary.node_count();
        if nodes > cfg.max_nodes {
            return Err(Error::Domain(format!(
                "curve exceeded {} nodes at t={}",
                cfg.max_nodes, state.t
            )));
        }
        if clock.is_row(state.t) {
            emit(&state, &mut rows)?;
        }
    }
    Ok(BcCurveOutcome {
        rows,
        final_curve: state.boundary.components.swap_remove(0),
        period,
        stream_drift,
    })
}
