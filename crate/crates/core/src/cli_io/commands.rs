//! The `generate`, `run` and `report` subcommands.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use super::config::{EngineConfig, ExperimentConfig, Scenario};
use super::files::{
    format_boundary, read_boundary, read_rows, read_snapshot, write_atomic, write_json, write_snapshot, CsvWriter,
    Snapshot,
};
use crate::diagnostics::{
    chain_bound, ledger_consistency, slope_fit_after, ContainmentSpec, DiagnosticsRow, SlopeFit, CHAIN_SLACK,
    PLANE_CHAIN_SLACK,
};
use crate::engine_free::run_free;
use crate::engine_torus::{bc_segment, run_bc_curve, run_torus};
use crate::geometry::{
    gen_handle_patch, gen_torus_patch, GammaArc, GenerationReport, MarkedCurve, PatchBoundary, X_C, X_O,
};
use crate::state::{HaltReason, PatchState, TrackerRole};
use crate::{Error, Result};

pub const BOUNDARY_FILE: &str = "boundary.txt";
pub const GENERATION_FILE: &str = "generation.json";
pub const CSV_FILE: &str = "diagnostics.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const SNAPSHOT_DIR: &str = "snapshots";
pub const GROWTH_FILE: &str = "growth.csv";

/// Relative area change allowed over a run.
pub const AREA_DRIFT_TOLERANCE: f64 = 1e-3;
/// Allowed mismatch between ledger and geometric winding, in turns.
pub const LEDGER_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Steps of the configured `dt` between snapshots; a multiple of the
    /// output stride. Defaults to the output stride.
    pub snapshot_stride: Option<u64>,
    pub resume: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GenerateReport {
    pub scenario: Scenario,
    pub node_count: usize,
    pub perimeter: f64,
    /// Signed enclosed area; zero for an open curve.
    pub area: f64,
    pub generation: Option<GenerationReport>,
}

/// Initial boundary for the scenario, from its generator or closed form.
pub fn initial_boundary(cfg: &ExperimentConfig) -> Result<(PatchBoundary, Option<GenerationReport>)> {
    let missing = || Error::Config(format!("scenario {} lacks parameters", cfg.scenario.name()));
    Ok(match cfg.scenario {
        Scenario::TorusTheorem => {
            let g = gen_torus_patch(&cfg.generator_params().ok_or_else(missing)?)?;
            (g.boundary, Some(g.report))
        }
        Scenario::PlaneTheorem => {
            let g = gen_handle_patch(&cfg.generator_params().ok_or_else(missing)?)?;
            (g.boundary, Some(g.report))
        }
        Scenario::BcProposition => {
            let EngineConfig::Torus(t) = cfg.engine() else {
                return Err(missing());
            };
            (PatchBoundary::single(bc_segment(t.delta, t.h_max)), None)
        }
        Scenario::DiskSteady => {
            let s = cfg.shape_params().ok_or_else(missing)?;
            (PatchBoundary::single(MarkedCurve::circle(X_O, s.a, s.nodes)), None)
        }
        Scenario::Kirchhoff => {
            let s = cfg.shape_params().ok_or_else(missing)?;
            (
                PatchBoundary::single(MarkedCurve::ellipse(X_O, s.a, s.b, s.nodes)),
                None,
            )
        }
    })
}

fn resolve(out_dir: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        out_dir.join(p)
    }
}

/// Writes `boundary.txt` and `generation.json` into `out_dir`.
pub fn cmd_generate(cfg: &ExperimentConfig, out_dir: &Path) -> Result<GenerateReport> {
    let (boundary, generation) = initial_boundary(cfg)?;
    fs::create_dir_all(out_dir)?;
    write_atomic(&out_dir.join(BOUNDARY_FILE), format_boundary(&boundary).as_bytes())?;
    let open = boundary.components.iter().any(|c| !c.closed);
    let report = GenerateReport {
        scenario: cfg.scenario,
        node_count: boundary.node_count(),
        perimeter: boundary.perimeter(),
        area: if open { 0.0 } else { boundary.area() },
        generation,
    };
    write_json(&out_dir.join(GENERATION_FILE), &report)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopeSummary {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub samples: usize,
    pub transient_fraction: f64,
    pub c0: f64,
    pub meets_c0: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMetrics {
    pub rows: usize,
    /// Largest `|area - area_0| / |area_0|` over the rows; absent for curves.
    pub area_drift: Option<f64>,
    /// Final `|N[gamma_t] - N[gamma_0] - ledger difference|` in turns.
    pub ledger_consistency: Option<f64>,
    pub breakdown_time: Option<f64>,
    /// Rows that hold containment yet fall short of the length bound.
    pub chain_violations: usize,
    pub net_turns: f64,
    pub max_stability_gap: Option<f64>,
    pub symmetry_violations: u64,
    /// Measured rotation period of `x*` (curve scenario).
    pub period: Option<f64>,
    pub stream_drift: Option<f64>,
}

/// Summary of a run, written atomically as `manifest.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub config: ExperimentConfig,
    pub code_version: String,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub resumed_from: Option<PathBuf>,
    pub halt: HaltReason,
    pub final_row: Option<DiagnosticsRow>,
    pub slope_fit: Option<SlopeSummary>,
    pub metrics: RunMetrics,
    pub invariant_failures: Vec<String>,
    pub notes: Vec<String>,
}

fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0.0, |d| d.as_secs_f64())
}

fn gamma_state(
    boundary: PatchBoundary,
    dt: f64,
    center: crate::geometry::Point2,
    start_role: TrackerRole,
    names: (&str, &str),
) -> Result<PatchState> {
    let c = boundary
        .components
        .first()
        .ok_or_else(|| Error::Domain("boundary has no components".into()))?;
    if c.marks.len() < 2 {
        return Err(Error::Domain("boundary needs gamma endpoint marks".into()));
    }
    let gamma = GammaArc {
        component: 0,
        start: c.marks[0],
        end: c.marks[1],
    };
    PatchState::with_gamma_trackers(boundary, dt, gamma, center, start_role, names)
}

/// Fresh engine state with the scenario's tracker layout.
pub fn initial_state(cfg: &ExperimentConfig, boundary: PatchBoundary) -> Result<PatchState> {
    let dt = match cfg.engine() {
        EngineConfig::Free(f) => f.dt,
        EngineConfig::Torus(t) => t.dt,
    };
    match cfg.scenario {
        Scenario::TorusTheorem => gamma_state(boundary, dt, X_C, TrackerRole::Outer, ("x_o*", "x_c*")),
        Scenario::PlaneTheorem => gamma_state(boundary, dt, X_O, TrackerRole::Inner, ("x1", "x2")),
        _ => Ok(PatchState::new(boundary, dt)),
    }
}

/// Exclusion radius and slack of the perimeter-winding chain, where the
/// scenario has one.
fn chain_parameters(cfg: &ExperimentConfig) -> Option<(f64, f64)> {
    match (cfg.scenario, cfg.engine()) {
        (Scenario::TorusTheorem, EngineConfig::Torus(t)) => Some((
            ContainmentSpec::TorusAnnulus { delta: t.delta }.exclusion_radius(),
            CHAIN_SLACK,
        )),
        (Scenario::PlaneTheorem, _) => Some((ContainmentSpec::PlaneRings.exclusion_radius(), PLANE_CHAIN_SLACK)),
        _ => None,
    }
}

/// Lower bound on the length at each row: the winding chain for the
/// theorem scenarios, `(pi delta / 2) floor(t / T)` for the curve.
pub fn length_bound(cfg: &ExperimentConfig, row: &DiagnosticsRow, period: Option<f64>) -> Option<f64> {
    if let Some((r, slack)) = chain_parameters(cfg) {
        return Some(chain_bound(r, row.net_turns(), slack));
    }
    match (cfg.scenario, cfg.engine(), period) {
        (Scenario::BcProposition, EngineConfig::Torus(t), Some(p)) => Some(0.5 * PI * t.delta * (row.t / p).floor()),
        _ => None,
    }
}

fn summarize(
    cfg: &ExperimentConfig,
    rows: &[DiagnosticsRow],
    period: Option<f64>,
) -> (Option<SlopeSummary>, Option<f64>, usize) {
    let series: Vec<(f64, f64)> = rows.iter().map(|r| (r.t, r.perimeter)).collect();
    let fit = slope_fit_after(&series, cfg.analysis.transient_fraction)
        .ok()
        .map(|f: SlopeFit| SlopeSummary {
            slope: f.slope,
            intercept: f.intercept,
            r2: f.r2,
            samples: f.samples,
            transient_fraction: cfg.analysis.transient_fraction,
            c0: cfg.analysis.c0,
            meets_c0: f.slope >= cfg.analysis.c0,
        });
    let area_drift = rows
        .first()
        .filter(|r| r.area.is_finite() && r.area != 0.0)
        .map(|first| {
            rows.iter()
                .map(|r| ((r.area - first.area) / first.area).abs())
                .fold(0.0, f64::max)
        });
    let chain_violations = rows
        .iter()
        .filter(|r| r.containment_ok())
        .filter(|r| length_bound(cfg, r, period).is_some_and(|b| r.perimeter < b))
        .count();
    (fit, area_drift, chain_violations)
}

fn snapshot_every(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<u64> {
    let stride = cfg.output_stride();
    match opts.snapshot_stride {
        None => Ok(1),
        Some(s) if s > 0 && s % stride == 0 => Ok(s / stride),
        Some(s) => Err(Error::Config(format!(
            "snapshot stride {s} must be a positive multiple of the output stride {stride}"
        ))),
    }
}

/// Runs the configured scenario, writing `diagnostics.csv`, snapshots and
/// `manifest.json` into `out_dir`. With `resume`, the run continues from
/// the snapshot and the CSV is cut back to the snapshot time first.
pub fn cmd_run(cfg: &ExperimentConfig, out_dir: &Path, opts: &RunOptions) -> Result<RunManifest> {
    cfg.check()?;
    let started = unix_now();
    fs::create_dir_all(out_dir)?;
    let every = snapshot_every(cfg, opts)?;
    let engine = cfg.engine();
    let (dt, stride) = match &engine {
        EngineConfig::Free(f) => (f.dt, f.output_stride),
        EngineConfig::Torus(t) => (t.dt, t.output_stride),
    };
    let row_interval = stride as f64 * dt;
    let csv_path = out_dir.join(CSV_FILE);
    let snap_dir = out_dir.join(SNAPSHOT_DIR);
    let scenario = cfg.scenario.name().to_string();

    let (state, mut csv) = match &opts.resume {
        Some(path) => {
            if cfg.scenario == Scenario::BcProposition {
                return Err(Error::Config(
                    "bc-proposition runs are short and cannot be resumed".into(),
                ));
            }
            let snap = read_snapshot(path)?;
            if snap.scenario != scenario {
                return Err(Error::Config(format!(
                    "snapshot belongs to scenario {}, config is {scenario}",
                    snap.scenario
                )));
            }
            let csv = CsvWriter::truncate_from(&csv_path, snap.state.t)?;
            (snap.state, csv)
        }
        None => {
            let boundary = match &cfg.boundary_file {
                Some(p) => read_boundary(&resolve(out_dir, p))?,
                None => initial_boundary(cfg)?.0,
            };
            (initial_state(cfg, boundary)?, CsvWriter::create(&csv_path)?)
        }
    };

    let mut observe = |st: &PatchState, row: &DiagnosticsRow| -> Result<()> {
        csv.push(row)?;
        if ((row.t / row_interval).round() as u64).is_multiple_of(every) {
            write_snapshot(
                &snap_dir,
                &Snapshot {
                    scenario: scenario.clone(),
                    state: st.clone(),
                },
            )?;
        }
        Ok(())
    };

    let (halt, final_state, period, stream_drift) = match (&engine, cfg.scenario) {
        (EngineConfig::Free(f), s) => {
            let spec = (s == Scenario::PlaneTheorem).then_some(ContainmentSpec::PlaneRings);
            let out = run_free(f, state, spec, &mut observe)?;
            (out.halt, Some(out.final_state), None, None)
        }
        (EngineConfig::Torus(t), Scenario::BcProposition) => {
            let curve = state
                .boundary
                .components
                .into_iter()
                .next()
                .ok_or_else(|| Error::Domain("boundary has no components".into()))?;
            let out = run_bc_curve(t, curve, |c, row| {
                let mut st = PatchState::new(PatchBoundary::single(c.clone()), t.dt);
                st.t = row.t;
                st.step = (row.t / t.dt).round() as u64;
                observe(&st, row)
            })?;
            (HaltReason::Completed, None, out.period, Some(out.stream_drift))
        }
        (EngineConfig::Torus(t), _) => {
            let out = run_torus(t, state, &mut observe)?;
            (out.halt, Some(out.final_state), None, None)
        }
    };
    drop(csv);

    let rows = read_rows(&csv_path)?;
    let (slope_fit, area_drift, chain_violations) = summarize(cfg, &rows, period);
    let final_row = rows.last().copied();
    let metrics = RunMetrics {
        rows: rows.len(),
        area_drift,
        ledger_consistency: final_state.as_ref().and_then(ledger_consistency),
        breakdown_time: final_state.as_ref().and_then(|s| s.monitor.breakdown_time()),
        chain_violations,
        net_turns: final_row.map_or(0.0, |r| r.net_turns()),
        max_stability_gap: rows
            .iter()
            .map(|r| r.stability_gap)
            .filter(|g| g.is_finite())
            .reduce(f64::max),
        symmetry_violations: final_state.as_ref().map_or(0, |s| s.symmetry_violations),
        period,
        stream_drift,
    };
    let mut failures = Vec::new();
    if chain_violations > 0 {
        failures.push(format!("{chain_violations} rows violate the perimeter-winding bound"));
    }
    if let Some(d) = area_drift.filter(|&d| d.is_nan() || d > AREA_DRIFT_TOLERANCE) {
        failures.push(format!(
            "relative area drift {d:.3e} exceeds {AREA_DRIFT_TOLERANCE:.0e}"
        ));
    }
    if let Some(l) = metrics
        .ledger_consistency
        .filter(|&l| l.is_nan() || l > LEDGER_TOLERANCE)
    {
        failures.push(format!("ledger and geometric winding differ by {l:.3e} turns"));
    }
    if let Some(f) = slope_fit.as_ref().filter(|f| cfg.analysis.c0 > 0.0 && !f.meets_c0) {
        failures.push(format!("perimeter slope {:.4e} below c0 {:.4e}", f.slope, f.c0));
    }
    let manifest = RunManifest {
        config: cfg.clone(),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        started_unix: started,
        finished_unix: unix_now(),
        resumed_from: opts.resume.clone(),
        halt,
        final_row,
        slope_fit,
        metrics,
        invariant_failures: failures,
        notes: final_state.map(|s| s.notes).unwrap_or_default(),
    };
    write_json(&out_dir.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub rows: usize,
    pub slope_fit: Option<SlopeSummary>,
    pub area_drift: Option<f64>,
    pub chain_violations: usize,
    pub table: PathBuf,
}

/// Turns `diagnostics.csv` into `growth.csv`: time, perimeter, net turns,
/// the length bound at that row and the containment flag.
pub fn cmd_report(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunReport> {
    let rows = read_rows(&out_dir.join(CSV_FILE))?;
    let (slope_fit, area_drift, chain_violations) = summarize(cfg, &rows, None);
    let mut table = String::from("t,perimeter,net_turns,length_bound,containment_ok\n");
    for r in &rows {
        let bound = length_bound(cfg, r, None).unwrap_or(f64::NAN);
        let real = |x: f64| {
            if x.is_finite() {
                format!("{x:.11e}")
            } else {
                "nan".into()
            }
        };
        table += &format!(
            "{},{},{},{},{}\n",
            real(r.t),
            real(r.perimeter),
            real(r.net_turns()),
            real(bound),
            u8::from(r.containment_ok())
        );
    }
    let path = out_dir.join(GROWTH_FILE);
    write_atomic(&path, table.as_bytes())?;
    Ok(RunReport {
        rows: rows.len(),
        slope_fit,
        area_drift,
        chain_violations,
        table: path,
    })
}
