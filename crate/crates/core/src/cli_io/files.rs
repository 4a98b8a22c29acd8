//! On-disk formats: boundary node lists, the diagnostics CSV, state
//! snapshots and atomic JSON writes.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::diagnostics::DiagnosticsRow;
use crate::geometry::{MarkedCurve, PatchBoundary, Point2};
use crate::state::PatchState;
use crate::{Error, Result};

pub const BOUNDARY_MAGIC: &str = "patchwind-boundary";
pub const BOUNDARY_VERSION: u32 = 1;

/// Snapshots above this many nodes are gzip-compressed.
pub const GZIP_NODE_THRESHOLD: usize = 10_000;

pub const CSV_HEADER: &str =
    "t,perimeter,area,turns_inner,turns_outer,arc_turns,stability_gap,inner_ok,outer_ok,arc_ok,node_count";

/// Text form of a boundary: a header line, then per component a
/// descriptor line followed by one `x1 x2` pair per node, 17 significant
/// digits each.
pub fn format_boundary(boundary: &PatchBoundary) -> String {
    let mut out = format!(
        "{BOUNDARY_MAGIC} {BOUNDARY_VERSION}\ncomponents {}\n",
        boundary.components.len()
    );
    for (k, c) in boundary.components.iter().enumerate() {
        let marks: Vec<String> = c.marks.iter().map(|m| m.to_string()).collect();
        out += &format!(
            "component {k} closed {} orientation {} nodes {} marks {}\n",
            c.closed,
            c.orientation(),
            c.nodes.len(),
            if marks.is_empty() {
                "-".to_string()
            } else {
                marks.join(",")
            }
        );
        for p in &c.nodes {
            out += &format!("{:.16e} {:.16e}\n", p.x, p.y);
        }
    }
    out
}

fn parse_err(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::Parse(format!("boundary line {line}: {msg}"))
}

/// Inverse of [`format_boundary`]. The recorded orientation is checked
/// against the nodes.
pub fn parse_boundary(text: &str) -> Result<PatchBoundary> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let mut next = |what: &str| {
        lines
            .next()
            .ok_or_else(|| Error::Parse(format!("boundary ended before {what}")))
    };
    let (ln, header) = next("header")?;
    match header.split_whitespace().collect::<Vec<_>>().as_slice() {
        [magic, v] if *magic == BOUNDARY_MAGIC => {
            if v.parse::<u32>().ok() != Some(BOUNDARY_VERSION) {
                return Err(parse_err(ln, format!("unsupported version {v}")));
            }
        }
        _ => return Err(parse_err(ln, "missing boundary header")),
    }
    let (ln, count) = next("component count")?;
    let count: usize = match count.split_whitespace().collect::<Vec<_>>().as_slice() {
        ["components", n] => n.parse().map_err(|e| parse_err(ln, e))?,
        _ => return Err(parse_err(ln, "expected `components N`")),
    };
    let mut components = Vec::with_capacity(count);
    for k in 0..count {
        let (ln, desc) = next("component descriptor")?;
        let f: Vec<&str> = desc.split_whitespace().collect();
        let (closed, orientation, nodes, marks) = match f.as_slice() {
            ["component", idx, "closed", c, "orientation", o, "nodes", n, "marks", m] => {
                if idx.parse::<usize>().ok() != Some(k) {
                    return Err(parse_err(ln, format!("expected component {k}")));
                }
                let closed: bool = c.parse().map_err(|e| parse_err(ln, e))?;
                let orientation: i8 = o.parse().map_err(|e| parse_err(ln, e))?;
                let n: usize = n.parse().map_err(|e| parse_err(ln, e))?;
                let marks: Vec<usize> = if *m == "-" {
                    Vec::new()
                } else {
                    m.split(',')
                        .map(|s| s.parse().map_err(|e| parse_err(ln, e)))
                        .collect::<Result<_>>()?
                };
                (closed, orientation, n, marks)
            }
            _ => return Err(parse_err(ln, "malformed component descriptor")),
        };
        let mut pts = Vec::with_capacity(nodes);
        for _ in 0..nodes {
            let (ln, l) = next("node")?;
            let xy: Vec<f64> = l
                .split_whitespace()
                .map(|s| s.parse::<f64>().map_err(|e| parse_err(ln, e)))
                .collect::<Result<_>>()?;
            match xy.as_slice() {
                [x, y] => pts.push(Point2::new(*x, *y)),
                _ => return Err(parse_err(ln, "expected two coordinates")),
            }
        }
        let curve = MarkedCurve {
            nodes: pts,
            closed,
            marks,
        };
        curve.validate()?;
        if curve.orientation() != orientation {
            return Err(parse_err(ln, "recorded orientation does not match the nodes"));
        }
        components.push(curve);
    }
    if let Some((ln, extra)) = lines.find(|(_, l)| !l.is_empty()) {
        return Err(parse_err(ln, format!("unexpected trailing content `{extra}`")));
    }
    Ok(PatchBoundary::new(components))
}

pub fn read_boundary(path: &Path) -> Result<PatchBoundary> {
    parse_boundary(&fs::read_to_string(path)?)
}

fn csv_real(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.11e}")
    } else {
        "nan".to_string()
    }
}

/// One CSV line (no newline), 12 significant digits per real.
pub fn format_row(r: &DiagnosticsRow) -> String {
    let b = |v: bool| if v { "1" } else { "0" };
    format!(
        "{},{},{},{},{},{},{},{},{},{},{}",
        csv_real(r.t),
        csv_real(r.perimeter),
        csv_real(r.area),
        csv_real(r.turns_inner),
        csv_real(r.turns_outer),
        csv_real(r.arc_turns),
        csv_real(r.stability_gap),
        b(r.inner_ok),
        b(r.outer_ok),
        b(r.arc_ok),
        r.node_count
    )
}

/// Parses a line written by [`format_row`].
pub fn parse_row(line: &str) -> Result<DiagnosticsRow> {
    let f: Vec<&str> = line.trim().split(',').collect();
    if f.len() != 11 {
        return Err(Error::Parse(format!("expected 11 CSV fields, got {}", f.len())));
    }
    let real = |s: &str| -> Result<f64> {
        if s == "nan" {
            Ok(f64::NAN)
        } else {
            s.parse().map_err(|e| Error::Parse(format!("bad number `{s}`: {e}")))
        }
    };
    let flag = |s: &str| match s {
        "1" => Ok(true),
        "0" => Ok(false),
        _ => Err(Error::Parse(format!("bad flag `{s}`"))),
    };
    Ok(DiagnosticsRow {
        t: real(f[0])?,
        perimeter: real(f[1])?,
        area: real(f[2])?,
        turns_inner: real(f[3])?,
        turns_outer: real(f[4])?,
        arc_turns: real(f[5])?,
        stability_gap: real(f[6])?,
        inner_ok: flag(f[7])?,
        outer_ok: flag(f[8])?,
        arc_ok: flag(f[9])?,
        node_count: f[10]
            .parse()
            .map_err(|e| Error::Parse(format!("bad node count `{}`: {e}", f[10])))?,
    })
}

pub fn read_rows(path: &Path) -> Result<Vec<DiagnosticsRow>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    if lines.next() != Some(CSV_HEADER) {
        return Err(Error::Parse(format!("{} lacks the diagnostics header", path.display())));
    }
    lines.filter(|l| !l.is_empty()).map(parse_row).collect()
}

/// Appends rows to a diagnostics CSV, writing the header on creation.
pub struct CsvWriter {
    file: fs::File,
}

impl CsvWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let mut file = fs::File::create(path)?;
        writeln!(file, "{CSV_HEADER}")?;
        Ok(Self { file })
    }

    /// Opens an existing CSV and drops every row at or after `t`.
    pub fn truncate_from(path: &Path, t: f64) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let mut lines = text.lines();
        if lines.next() != Some(CSV_HEADER) {
            return Err(Error::Parse(format!("{} lacks the diagnostics header", path.display())));
        }
        let mut kept = format!("{CSV_HEADER}\n");
        for l in lines.filter(|l| !l.is_empty()) {
            if parse_row(l)?.t >= t - 1e-9 * t.abs().max(1.0) {
                break;
            }
            kept += l;
            kept.push('\n');
        }
        fs::write(path, &kept)?;
        let file = fs::OpenOptions::new().append(true).open(path)?;
        Ok(Self { file })
    }

    pub fn push(&mut self, row: &DiagnosticsRow) -> Result<()> {
        writeln!(self.file, "{}", format_row(row))?;
        Ok(())
    }
}

/// Writes through a temporary sibling and renames over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Parse(e.to_string()))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

/// A resumable engine state with the scenario it belongs to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub scenario: String,
    pub state: PatchState,
}

/// File name for the snapshot at `step`; `.json.gz` above the node
/// threshold.
pub fn snapshot_name(step: u64, nodes: usize) -> String {
    if nodes > GZIP_NODE_THRESHOLD {
        format!("state_{step:010}.json.gz")
    } else {
        format!("state_{step:010}.json")
    }
}

pub fn write_snapshot(dir: &Path, snap: &Snapshot) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(snapshot_name(snap.state.step, snap.state.boundary.node_count()));
    let json = serde_json::to_vec(snap).map_err(|e| Error::Parse(e.to_string()))?;
    if path.extension().is_some_and(|e| e == "gz") {
        let mut enc = GzEncoder::new(Vec::new(), Compression::default());
        enc.write_all(&json)?;
        write_atomic(&path, &enc.finish()?)?;
    } else {
        write_atomic(&path, &json)?;
    }
    Ok(path)
}

pub fn read_snapshot(path: &Path) -> Result<Snapshot> {
    let raw = fs::read(path)?;
    let json = if path.extension().is_some_and(|e| e == "gz") {
        let mut s = Vec::new();
        GzDecoder::new(raw.as_slice()).read_to_end(&mut s)?;
        s
    } else {
        raw
    };
    serde_json::from_slice(&json).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::geometry::MarkedCurve;

    fn sample_row() -> DiagnosticsRow {
        DiagnosticsRow {
            t: 1.25,
            perimeter: std::f64::consts::TAU,
            area: f64::NAN,
            turns_inner: -0.125,
            turns_outer: 3.0e-17,
            arc_turns: 0.5,
            stability_gap: 1.0e-3,
            inner_ok: true,
            outer_ok: false,
            arc_ok: true,
            node_count: 512,
        }
    }

    #[test]
    fn row_format_is_fixed() {
        assert_eq!(
            format_row(&sample_row()),
            "1.25000000000e0,6.28318530718e0,nan,-1.25000000000e-1,3.00000000000e-17,\
             5.00000000000e-1,1.00000000000e-3,1,0,1,512"
        );
    }

    #[test]
    fn row_round_trips_to_twelve_digits() {
        let r = sample_row();
        let back = parse_row(&format_row(&r)).unwrap();
        assert!((back.perimeter - r.perimeter).abs() < 1e-11 * r.perimeter);
        assert!(back.area.is_nan());
        assert_eq!((back.inner_ok, back.outer_ok, back.node_count), (true, false, 512));
    }

    #[test]
    fn boundary_with_open_and_closed_components() {
        let b = PatchBoundary::new(vec![
            MarkedCurve::circle(Point2::new(1.0, 2.0), 0.5, 9).with_marks(vec![2, 7]),
            MarkedCurve::open(vec![Point2::new(0.0, 0.0), Point2::new(0.1, 0.3)]),
        ]);
        let text = format_boundary(&b);
        assert!(text.starts_with(
            "patchwind-boundary 1\ncomponents 2\ncomponent 0 closed true orientation 1 nodes 9 marks 2,7\n"
        ));
        assert_eq!(parse_boundary(&text).unwrap(), b);
    }

    #[test]
    fn tampered_boundary_is_rejected() {
        let b = PatchBoundary::single(MarkedCurve::circle(Point2::default(), 1.0, 6));
        let text = format_boundary(&b);
        assert!(parse_boundary(&text.replace("orientation 1", "orientation -1")).is_err());
        assert!(parse_boundary(&text.replace("nodes 6", "nodes 7")).is_err());
        assert!(parse_boundary(&format!("{text}1 2\n")).is_err());
        assert!(parse_boundary(&text.replace("boundary 1", "boundary 2")).is_err());
    }

    #[test]
    fn csv_truncation_keeps_earlier_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        let mut w = CsvWriter::create(&path).unwrap();
        for k in 0..5 {
            w.push(&DiagnosticsRow {
                t: k as f64 * 0.5,
                ..sample_row()
            })
            .unwrap();
        }
        drop(w);
        let mut w = CsvWriter::truncate_from(&path, 1.0).unwrap();
        w.push(&DiagnosticsRow { t: 1.0, ..sample_row() }).unwrap();
        drop(w);
        let ts: Vec<f64> = read_rows(&path).unwrap().iter().map(|r| r.t).collect();
        assert_eq!(ts, vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn snapshots_round_trip_plain_and_gzipped() {
        let dir = tempfile::tempdir().unwrap();
        for n in [64, GZIP_NODE_THRESHOLD + 1] {
            let c = MarkedCurve::circle(Point2::new(0.3, -0.2), 1.0 / 3.0, n);
            let mut state = PatchState::new(PatchBoundary::single(c), 0.1);
            state.t = 0.1 * 7.0;
            state.step = 7;
            let snap = Snapshot {
                scenario: "disk-steady".into(),
                state,
            };
            let path = write_snapshot(dir.path(), &snap).unwrap();
            assert_eq!(path.extension().unwrap() == "gz", n > GZIP_NODE_THRESHOLD);
            assert_eq!(read_snapshot(&path).unwrap(), snap);
        }
    }

    proptest! {
        #[test]
        fn boundary_text_is_lossless(
            coords in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 3..40),
        ) {
            let nodes: Vec<Point2> = coords.into_iter().map(|(x, y)| Point2::new(x, y)).collect();
            let b = PatchBoundary::single(MarkedCurve::open(nodes));
            prop_assert_eq!(parse_boundary(&format_boundary(&b)).unwrap(), b);
        }
    }
}
