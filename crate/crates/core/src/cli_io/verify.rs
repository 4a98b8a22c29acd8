//! Invariant suites run by `verify`. Randomized cases draw from a seeded
//! ChaCha stream so a report is reproducible from its seed.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine_free::{cd_velocity_many, kirchhoff_rate, run_free, FreeRunConfig, Quadrature};
use crate::engine_torus::rasterize;
use crate::fields::{bc_stream, bc_velocity, bc_velocity_quadratic, disk_velocity, SpectralTruncation};
use crate::geometry::{
    gen_handle_patch, gen_torus_patch, hausdorff_distance, polygon_area, refine_and_redistribute, winding_number,
    GeneratorParams, MarkedCurve, PatchBoundary, Point2, PLANE_MAX_PERIMETER, TORUS_MAX_PERIMETER, X_C, X_O,
};
use crate::state::PatchState;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Geometry,
    Fields,
    Engines,
    All,
}

impl Suite {
    fn includes(self, other: Suite) -> bool {
        self == Suite::All || self == other
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub suite: Suite,
    pub name: String,
    pub passed: bool,
    /// Worst measured deviation.
    pub value: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub suite: Suite,
    pub seed: u64,
    pub passed: bool,
    pub checks: Vec<CheckResult>,
}

fn check(suite: Suite, name: &str, value: f64, tolerance: f64) -> CheckResult {
    CheckResult {
        suite,
        name: name.to_string(),
        passed: value <= tolerance,
        value,
        tolerance,
    }
}

fn worst(values: impl Iterator<Item = f64>) -> f64 {
    values.fold(0.0, |m, v| if v.is_nan() { f64::NAN } else { m.max(v) })
}

/// Runs the requested suites; failures are reported, not returned as errors.
pub fn run_suite(suite: Suite, seed: u64) -> Result<VerifyReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = Vec::new();
    if suite.includes(Suite::Geometry) {
        checks.extend(geometry_checks(&mut rng)?);
    }
    if suite.includes(Suite::Fields) {
        checks.extend(fields_checks(&mut rng));
    }
    if suite.includes(Suite::Engines) {
        checks.extend(engine_checks(&mut rng)?);
    }
    Ok(VerifyReport {
        suite,
        seed,
        passed: checks.iter().all(|c| c.passed),
        checks,
    })
}

fn random_star(rng: &mut ChaCha8Rng, center: Point2) -> MarkedCurve {
    let n = rng.gen_range(8..200);
    let wobble = rng.gen_range(0.0..0.4);
    let k = rng.gen_range(1..6) as f64;
    let phase = rng.gen_range(0.0..TAU);
    MarkedCurve::closed(
        (0..n)
            .map(|i| {
                let th = TAU * i as f64 / n as f64;
                Point2::polar(center, 1.0 + wobble * (k * th + phase).sin(), th)
            })
            .collect(),
    )
}

fn geometry_checks(rng: &mut ChaCha8Rng) -> Result<Vec<CheckResult>> {
    let g = Suite::Geometry;
    let mut out = Vec::new();
    let ngon = MarkedCurve::circle(X_O, 1.0, 4096);
    let formula = 2048.0 * (TAU / 4096.0).sin();
    out.push(check(g, "4096-gon area", (polygon_area(&ngon)? - formula).abs(), 1e-12));
    out.push(check(
        g,
        "4096-gon area near pi",
        (polygon_area(&ngon)? - PI).abs(),
        1e-5,
    ));

    let (mut odd, mut wind_in, mut wind_out, mut refine_wind, mut refine_len) =
        (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..64 {
        let center = Point2::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        let c = random_star(rng, center);
        let a = polygon_area(&c)?;
        odd = odd.max((polygon_area(&c.reversed())? + a).abs());
        wind_in = wind_in.max((winding_number(&c, center)? - 1.0).abs());
        wind_out = wind_out.max(winding_number(&c, center + Point2::new(3.0, 0.0))?.abs());
        let h_max = rng.gen_range(0.02..0.3);
        let r = refine_and_redistribute(&c, 0.3 * h_max, h_max)?;
        refine_wind = refine_wind.max((winding_number(&r, center)? - 1.0).abs());
        let longest = worst(r.segments().map(|(p, q)| p.dist(q) / h_max));
        refine_len = refine_len.max(longest);
    }
    out.push(check(g, "area is orientation-odd", odd, 1e-12));
    out.push(check(g, "winding about interior point", wind_in, 1e-12));
    out.push(check(g, "winding about exterior point", wind_out, 1e-12));
    out.push(check(g, "refinement keeps winding", refine_wind, 1e-12));
    out.push(check(g, "refined segments within h_max", refine_len, 1.0 + 1e-12));

    let torus = gen_torus_patch(&GeneratorParams::torus_preset(0.3))?;
    out.push(check(
        g,
        "torus preset area deficit / budget",
        torus.report.area_deficit / torus.report.area_budget,
        1.0,
    ));
    out.push(check(
        g,
        "torus preset perimeter",
        torus.report.perimeter,
        TORUS_MAX_PERIMETER,
    ));
    out.push(check(
        g,
        "torus preset simple",
        if torus.report.simple { 0.0 } else { 1.0 },
        0.0,
    ));
    let handle = gen_handle_patch(&GeneratorParams::handle_preset())?;
    out.push(check(
        g,
        "handle preset area deficit / budget",
        handle.report.area_deficit / handle.report.area_budget,
        1.0,
    ));
    out.push(check(
        g,
        "handle preset perimeter",
        handle.report.perimeter,
        PLANE_MAX_PERIMETER,
    ));
    out.push(check(
        g,
        "handle gamma start radius",
        (handle.report.gamma_start_distance - 1.0).abs(),
        1e-9,
    ));
    out.push(check(
        g,
        "handle gamma end radius",
        (handle.report.gamma_end_distance - 2.0).abs(),
        1e-9,
    ));
    Ok(out)
}

fn fields_checks(rng: &mut ChaCha8Rng) -> Vec<CheckResult> {
    let f = Suite::Fields;
    let t = SpectralTruncation::default();
    let psi_c = bc_stream(X_C, t);
    let samples: Vec<(f64, f64)> = (0..64)
        .map(|_| (0.5 * rng.gen::<f64>().sqrt(), rng.gen_range(0.0..TAU)))
        .collect();
    // Excess over the bound, tail credited; at most 0 when the bound holds.
    let (psi_excess, u_excess): (Vec<f64>, Vec<f64>) = samples
        .par_iter()
        .map(|&(r, th)| {
            let p = Point2::polar(X_C, r, th);
            let dpsi = (bc_stream(p, t) - psi_c - r * r / 4.0).abs();
            let psi_tol = r.powi(3) / 16.0 + t.stream_tail_bound_at(p) + t.stream_tail_bound_at(X_C);
            let du = (bc_velocity(p, t) - bc_velocity_quadratic(p)).norm();
            let u_tol = r * r / 4.0 + t.velocity_tail_bound_at(p);
            (dpsi - psi_tol, du - u_tol)
        })
        .unzip();
    let mut out = vec![
        check(f, "stream Taylor bound excess", worst(psi_excess.into_iter()), 0.0),
        check(f, "velocity Taylor bound excess", worst(u_excess.into_iter()), 0.0),
    ];
    let edge = worst((0..16).map(|_| {
        let s = rng.gen_range(0.0..PI);
        bc_stream(Point2::new(s, 0.0), t)
            .abs()
            .max(bc_stream(Point2::new(PI, s), t).abs())
    }));
    out.push(check(f, "stream vanishes on the boundary", edge, 1e-12));
    let sym = worst((0..16).map(|_| {
        let p = Point2::new(rng.gen_range(0.1..PI - 0.1), rng.gen_range(0.1..PI - 0.1));
        let q = X_C + (p - X_C).perp();
        let tol = t.stream_tail_bound_at(p) + t.stream_tail_bound_at(q);
        (bc_stream(p, t) - bc_stream(q, t)).abs() - tol
    }));
    out.push(check(f, "stream quarter-turn symmetry excess", sym, 0.0));
    out
}

fn engine_checks(rng: &mut ChaCha8Rng) -> Result<Vec<CheckResult>> {
    let e = Suite::Engines;
    let mut out = Vec::new();
    let disk = PatchBoundary::single(MarkedCurve::circle(X_O, 1.0, 512));
    let targets: Vec<Point2> = (0..100)
        .map(|_| Point2::polar(X_O, rng.gen_range(0.1..3.0), rng.gen_range(0.0..TAU)))
        .collect();
    let u = cd_velocity_many(&targets, &disk, Quadrature::AnalyticSegment);
    let err = worst(targets.iter().zip(&u).map(|(&p, &v)| (v - disk_velocity(p)).norm()));
    out.push(check(e, "disk velocity vs Rankine", err, 1e-4));

    let cfg = FreeRunConfig {
        t_end: 1.0,
        ..FreeRunConfig::disk_preset()
    };
    let run = run_free(&cfg, PatchState::new(disk, cfg.dt), None, |_, _| Ok(()))?;
    let radius = worst(
        run.final_state.boundary.components[0]
            .nodes
            .iter()
            .map(|p| (p.norm() - 1.0).abs()),
    );
    out.push(check(e, "disk radius after t=1", radius, 1e-3));

    let (a, b) = (2.0, 1.0);
    let omega = kirchhoff_rate(a, b);
    let quarter = FreeRunConfig {
        t_end: 0.25 * TAU / omega,
        ..FreeRunConfig::kirchhoff_preset()
    };
    let start = MarkedCurve::ellipse(X_O, a, b, 256);
    let run = run_free(
        &quarter,
        PatchState::new(PatchBoundary::single(start.clone()), quarter.dt),
        None,
        |_, _| Ok(()),
    )?;
    let rotated = MarkedCurve::closed(start.nodes.iter().map(|p| Point2::new(-p.y, p.x)).collect());
    let d = hausdorff_distance(&run.final_state.boundary.components[0], &rotated);
    out.push(check(e, "ellipse after a quarter period", d, 1e-2));

    let n = 256;
    let c = MarkedCurve::circle(X_C, 0.8, 400);
    let field = rasterize(&PatchBoundary::single(c.clone()), n)?;
    let h = PI / n as f64;
    let mass_err = (field.integral() - polygon_area(&c)?).abs();
    out.push(check(e, "raster mass vs shoelace", mass_err, TAU * 0.8 * h));
    Ok(out)
}
