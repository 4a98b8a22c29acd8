use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use patchwind::cli_io::{
    cmd_generate, cmd_report, cmd_run, error_exit_code, run_exit_code, run_suite, ExperimentConfig, RunOptions, Suite,
    EXIT_INVARIANT, EXIT_OK,
};
use patchwind::Result;

#[derive(Parser)]
#[command(name = "patchwind", version, about = "Vortex-patch perimeter growth experiments")]
struct Cli {
    /// Experiment config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output_dir` from the config.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Steps between state snapshots (a multiple of the output stride).
    #[arg(long, global = true)]
    snapshot_stride: Option<u64>,
    /// Continue a run from this snapshot.
    #[arg(long, global = true)]
    resume: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the initial boundary and its generation report.
    Generate,
    /// Evolve the configured scenario and write diagnostics.
    Run,
    /// Run invariant suites and print a JSON report.
    Verify {
        #[arg(long, value_enum, default_value = "all")]
        suite: Suite,
    },
    /// Build plot-ready tables from a finished run.
    Report,
}

fn load(cli: &Cli) -> Result<(ExperimentConfig, PathBuf)> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| patchwind::Error::Config("--config is required".into()))?;
    let cfg = ExperimentConfig::load(path)?;
    let out = cli.output.clone().unwrap_or_else(|| cfg.output_dir.clone());
    Ok((cfg, out))
}

fn print<T: Serialize>(value: &T) {
    match serde_json::to_string_pretty(value) {
        Ok(s) => println!("{s}"),
        Err(e) => eprintln!("error: {e}"),
    }
}

fn seed(config: Option<&Path>) -> Result<u64> {
    Ok(match config {
        Some(p) => ExperimentConfig::load(p)?.seed,
        None => 0,
    })
}

fn dispatch(cli: &Cli) -> Result<i32> {
    match &cli.command {
        Command::Generate => {
            let (cfg, out) = load(cli)?;
            print(&cmd_generate(&cfg, &out)?);
            Ok(EXIT_OK)
        }
        Command::Run => {
            let (cfg, out) = load(cli)?;
            let opts = RunOptions {
                snapshot_stride: cli.snapshot_stride,
                resume: cli.resume.clone(),
            };
            let manifest = cmd_run(&cfg, &out, &opts)?;
            for f in &manifest.invariant_failures {
                eprintln!("invariant failure: {f}");
            }
            Ok(run_exit_code(&manifest))
        }
        Command::Verify { suite } => {
            let report = run_suite(*suite, seed(cli.config.as_deref())?)?;
            print(&report);
            Ok(if report.passed { EXIT_OK } else { EXIT_INVARIANT })
        }
        Command::Report => {
            let (cfg, out) = load(cli)?;
            print(&cmd_report(&cfg, &out)?);
            Ok(EXIT_OK)
        }
    }
}

fn exit_code(cli: &Cli) -> i32 {
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            error_exit_code(&e)
        }
    }
}

fn main() -> ExitCode {
    ExitCode::from(exit_code(&Cli::parse()) as u8)
}

#[cfg(test)]
mod tests {
    use std::fs;

    use patchwind::cli_io::Scenario;

    use super::*;

    const DISK: &str = r#"
scenario = "disk-steady"

[shape]
nodes = 128
a = 1.0
b = 1.0

[free]
dt = 0.01
t_end = 0.6
h_min = 0.01
h_max = 0.08
output_stride = 5
"#;

    fn run(args: &[&str]) -> i32 {
        let cli = Cli::try_parse_from(std::iter::once("patchwind").chain(args.iter().copied())).unwrap();
        exit_code(&cli)
    }

    fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
        let path = dir.join(name);
        fs::write(&path, text).unwrap();
        path
    }

    fn preset_dir() -> PathBuf {
        Path::new(env!("CARGO_MANIFEST_DIR")).join("../../presets")
    }

    fn s(p: &Path) -> &str {
        p.to_str().unwrap()
    }

    #[test]
    fn preset_files_match_builtin_presets() {
        for scenario in [
            Scenario::TorusTheorem,
            Scenario::PlaneTheorem,
            Scenario::BcProposition,
            Scenario::DiskSteady,
            Scenario::Kirchhoff,
        ] {
            let path = preset_dir().join(format!("{}.toml", scenario.name()));
            let cfg = ExperimentConfig::load(&path).unwrap();
            assert_eq!(cfg, ExperimentConfig::preset(scenario), "{}", path.display());
        }
    }

    #[test]
    fn generate_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = preset_dir().join("plane-theorem.toml");
        let (a, b) = (dir.path().join("a"), dir.path().join("b"));
        for out in [&a, &b] {
            assert_eq!(run(&["generate", "--config", s(&cfg), "--output", s(out)]), EXIT_OK);
        }
        for file in ["boundary.txt", "generation.json"] {
            assert_eq!(
                fs::read(a.join(file)).unwrap(),
                fs::read(b.join(file)).unwrap(),
                "{file}"
            );
        }
    }

    #[test]
    fn run_resume_and_report() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = write_config(dir.path(), "disk.toml", DISK);
        let (full, part) = (dir.path().join("full"), dir.path().join("part"));
        assert_eq!(run(&["run", "--config", s(&cfg), "--output", s(&full)]), EXIT_OK);
        let args = [
            "run",
            "--config",
            s(&cfg),
            "--output",
            s(&part),
            "--snapshot-stride",
            "20",
        ];
        assert_eq!(run(&args), EXIT_OK);
        let snap = part.join("snapshots").join("state_0000000020.json");
        assert!(snap.exists());
        assert!(!part.join("snapshots").join("state_0000000015.json").exists());
        let args = ["run", "--config", s(&cfg), "--output", s(&part), "--resume", s(&snap)];
        assert_eq!(run(&args), EXIT_OK);
        assert_eq!(
            fs::read(full.join("diagnostics.csv")).unwrap(),
            fs::read(part.join("diagnostics.csv")).unwrap()
        );
        let manifest: serde_json::Value =
            serde_json::from_slice(&fs::read(part.join("manifest.json")).unwrap()).unwrap();
        assert_eq!(manifest["metrics"]["rows"], 13);

        assert_eq!(run(&["report", "--config", s(&cfg), "--output", s(&full)]), EXIT_OK);
        let table = fs::read_to_string(full.join("growth.csv")).unwrap();
        assert_eq!(table.lines().count(), 14);
        assert!(table.starts_with("t,perimeter,net_turns,length_bound,containment_ok\n"));
    }

    #[test]
    fn verify_geometry_passes() {
        assert_eq!(run(&["verify", "--suite", "geometry"]), EXIT_OK);
    }

    #[test]
    fn exit_codes() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("out");

        assert_eq!(run(&["run"]), patchwind::cli_io::EXIT_ERROR);

        let unknown = write_config(dir.path(), "unknown.toml", "scenario = \"disk-steady\"\ncolour = 3\n");
        assert_eq!(
            run(&["run", "--config", s(&unknown), "--output", s(&out)]),
            patchwind::cli_io::EXIT_ERROR
        );

        let mut handle = ExperimentConfig::preset(Scenario::PlaneTheorem);
        handle.generator.as_mut().unwrap().area_constant = 0.01;
        let infeasible = write_config(dir.path(), "infeasible.toml", &handle.to_toml().unwrap());
        assert_eq!(
            run(&["generate", "--config", s(&infeasible), "--output", s(&out)]),
            patchwind::cli_io::EXIT_INFEASIBLE
        );

        let mut bc = ExperimentConfig::preset(Scenario::BcProposition);
        let t = bc.torus.as_mut().unwrap();
        t.t_end = 5.0;
        t.n = 128;
        t.h_min = 0.008;
        t.h_max = 0.04;
        t.dt = 0.02;
        t.output_stride = 10;
        bc.analysis.c0 = 100.0;
        let slow = write_config(dir.path(), "slow.toml", &bc.to_toml().unwrap());
        assert_eq!(
            run(&["run", "--config", s(&slow), "--output", s(&out.join("bc"))]),
            EXIT_INVARIANT
        );

        let capped = DISK.replace("output_stride = 5", "output_stride = 5\nmax_nodes = 10");
        let capped = write_config(dir.path(), "capped.toml", &capped);
        assert_eq!(
            run(&["run", "--config", s(&capped), "--output", s(&out.join("cap"))]),
            patchwind::cli_io::EXIT_HALT
        );
    }
}
