//! Experiment configuration: one TOML file per run, unknown keys rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::diagnostics::DEFAULT_TRANSIENT;
use crate::engine_free::FreeRunConfig;
use crate::engine_torus::TorusRunConfig;
use crate::geometry::GeneratorParams;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    TorusTheorem,
    PlaneTheorem,
    BcProposition,
    DiskSteady,
    Kirchhoff,
}

impl Scenario {
    pub fn uses_torus(self) -> bool {
        matches!(self, Scenario::TorusTheorem | Scenario::BcProposition)
    }

    pub fn name(self) -> &'static str {
        match self {
            Scenario::TorusTheorem => "torus-theorem",
            Scenario::PlaneTheorem => "plane-theorem",
            Scenario::BcProposition => "bc-proposition",
            Scenario::DiskSteady => "disk-steady",
            Scenario::Kirchhoff => "kirchhoff",
        }
    }
}

/// Closed-form initial shapes for the steady-state scenarios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShapeParams {
    pub nodes: usize,
    /// Semi-axis along x (the radius for the disk).
    pub a: f64,
    /// Semi-axis along y; ignored for the disk.
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisParams {
    /// Threshold the fitted perimeter slope is compared against.
    #[serde(default)]
    pub c0: f64,
    #[serde(default = "default_transient")]
    pub transient_fraction: f64,
}

fn default_transient() -> f64 {
    DEFAULT_TRANSIENT
}

impl Default for AnalysisParams {
    fn default() -> Self {
        Self {
            c0: 0.0,
            transient_fraction: DEFAULT_TRANSIENT,
        }
    }
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    /// Seeds randomized verification only; the dynamics are deterministic.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Existing boundary file to start from instead of generating one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary_file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub free: Option<FreeRunConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub torus: Option<TorusRunConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shape: Option<ShapeParams>,
    #[serde(default)]
    pub analysis: AnalysisParams,
}

/// The engine settings a scenario resolves to.
#[derive(Debug, Clone, PartialEq)]
pub enum EngineConfig {
    Free(FreeRunConfig),
    Torus(TorusRunConfig),
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// A config for the scenario with every section filled from presets.
    pub fn preset(scenario: Scenario) -> Self {
        let mut cfg = Self {
            scenario,
            seed: 0,
            output_dir: default_output_dir(),
            boundary_file: None,
            generator: None,
            free: None,
            torus: None,
            shape: None,
            analysis: AnalysisParams::default(),
        };
        cfg.generator = cfg.default_generator();
        cfg.shape = cfg.default_shape();
        match cfg.default_engine() {
            EngineConfig::Free(f) => cfg.free = Some(f),
            EngineConfig::Torus(t) => cfg.torus = Some(t),
        }
        if scenario == Scenario::BcProposition {
            cfg.analysis.c0 = 0.1;
        }
        cfg
    }

    /// Rejects engine sections that do not belong to the scenario.
    pub fn check(&self) -> Result<()> {
        let name = self.scenario.name();
        if self.scenario.uses_torus() && self.free.is_some() {
            return Err(Error::Config(format!(
                "scenario {name} runs the torus engine; remove [free]"
            )));
        }
        if !self.scenario.uses_torus() && self.torus.is_some() {
            return Err(Error::Config(format!(
                "scenario {name} runs the plane engine; remove [torus]"
            )));
        }
        let takes_generator = matches!(self.scenario, Scenario::TorusTheorem | Scenario::PlaneTheorem);
        if !takes_generator && self.generator.is_some() {
            return Err(Error::Config(format!("scenario {name} takes no [generator]")));
        }
        let takes_shape = matches!(self.scenario, Scenario::DiskSteady | Scenario::Kirchhoff);
        if !takes_shape && self.shape.is_some() {
            return Err(Error::Config(format!("scenario {name} takes no [shape]")));
        }
        if let Some(s) = &self.shape {
            if s.nodes < 3 || !(s.a > 0.0 && s.b > 0.0) {
                return Err(Error::Config("shape needs at least 3 nodes and positive axes".into()));
            }
        }
        let tf = self.analysis.transient_fraction;
        if !(0.0..1.0).contains(&tf) {
            return Err(Error::Config(format!(
                "transient_fraction must lie in [0, 1), got {tf}"
            )));
        }
        match self.engine() {
            EngineConfig::Free(f) => {
                f.validate()?;
            }
            EngineConfig::Torus(t) => t.validate()?,
        }
        Ok(())
    }

    fn default_generator(&self) -> Option<GeneratorParams> {
        match self.scenario {
            Scenario::TorusTheorem => Some(GeneratorParams::torus_preset(0.3)),
            Scenario::PlaneTheorem => Some(GeneratorParams::handle_preset()),
            _ => None,
        }
    }

    fn default_shape(&self) -> Option<ShapeParams> {
        match self.scenario {
            Scenario::DiskSteady => Some(ShapeParams {
                nodes: 256,
                a: 1.0,
                b: 1.0,
            }),
            Scenario::Kirchhoff => Some(ShapeParams {
                nodes: 256,
                a: 2.0,
                b: 1.0,
            }),
            _ => None,
        }
    }

    fn default_engine(&self) -> EngineConfig {
        match self.scenario {
            Scenario::TorusTheorem => EngineConfig::Torus(TorusRunConfig::theorem_preset()),
            Scenario::BcProposition => EngineConfig::Torus(TorusRunConfig::bc_curve_preset()),
            Scenario::PlaneTheorem => EngineConfig::Free(FreeRunConfig::handle_preset()),
            Scenario::DiskSteady => EngineConfig::Free(FreeRunConfig::disk_preset()),
            Scenario::Kirchhoff => EngineConfig::Free(FreeRunConfig::kirchhoff_preset()),
        }
    }

    pub fn generator_params(&self) -> Option<GeneratorParams> {
        self.generator.clone().or_else(|| self.default_generator())
    }

    pub fn shape_params(&self) -> Option<ShapeParams> {
        self.shape.clone().or_else(|| self.default_shape())
    }

    pub fn engine(&self) -> EngineConfig {
        match (&self.free, &self.torus) {
            (Some(f), _) => EngineConfig::Free(f.clone()),
            (_, Some(t)) => EngineConfig::Torus(t.clone()),
            _ => self.default_engine(),
        }
    }

    /// Steps between output rows, in units of the configured `dt`.
    pub fn output_stride(&self) -> u64 {
        match self.engine() {
            EngineConfig::Free(f) => f.output_stride,
            EngineConfig::Torus(t) => t.output_stride,
        }
    }
}
