//! Experiment configuration: a single JSON document per run.
//!
//! Unknown keys are rejected everywhere. Defaults are filled on load, and the
//! resolved document is what reports embed, so feeding an embedded config
//! back reproduces the run.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cmc_solver::{Initializer, SolveConfig};
use crate::conformal_lab::ConformalFactor;
use crate::error::{Error, Result};
use crate::fiber_grid::{FiberGrid, MetricCoeff};
use crate::twisted_spacetime::{SpacetimeModel, TwistedFunction};
use crate::verification::{Fault, Identity};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Geometry,
    Solve,
    Verify,
    Convergence,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Geometry => "geometry",
            Task::Solve => "solve",
            Task::Verify => "verify",
            Task::Convergence => "convergence",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiberConfig {
    pub dim: usize,
    pub periods: Vec<f64>,
    pub resolution: Vec<usize>,
    /// One coefficient per axis; empty means flat.
    #[serde(default)]
    pub metric: Vec<MetricCoeff>,
}

impl FiberConfig {
    pub fn build(&self) -> Result<FiberGrid> {
        FiberGrid::new(
            self.dim,
            self.periods.clone(),
            self.resolution.clone(),
            self.metric.clone(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpacetimeConfig {
    pub interval: (f64, f64),
    pub fiber: FiberConfig,
    pub twist: TwistedFunction,
}

impl SpacetimeConfig {
    pub fn build(&self) -> Result<SpacetimeModel> {
        SpacetimeModel::new(self.interval, self.fiber.build()?, self.twist.clone())
    }
}

/// Where identity checks draw their graphs from.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    /// Seeded corpus of the configured fiber dimension.
    #[default]
    Corpus,
    /// The configured spacetime and initializer.
    Config,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub identities: Vec<Identity>,
    pub source: Source,
    pub corpus_size: usize,
    /// Conformal exponent for [`Source::Config`] runs.
    pub conformal: ConformalFactor,
    pub fault: Fault,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            identities: Identity::ALL.to_vec(),
            source: Source::Corpus,
            corpus_size: 10,
            conformal: ConformalFactor::StaticPicture,
            fault: Fault::None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvergenceConfig {
    /// Doubling resolutions; empty means `m, 2m, 4m` from the fiber.
    pub levels: Vec<usize>,
    pub quantities: Vec<Identity>,
    pub source: Source,
    pub corpus_size: usize,
    pub conformal: ConformalFactor,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        ConvergenceConfig {
            levels: Vec::new(),
            quantities: vec![Identity::MeanCurvatureTwoPath, Identity::LaplacianTwoPath],
            source: Source::Corpus,
            corpus_size: 10,
            conformal: ConformalFactor::StaticPicture,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
    Binary,
    Gnuplot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub formats: Vec<Format>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("twistbench-out"),
            formats: vec![Format::Json, Format::Csv],
        }
    }
}

impl OutputConfig {
    pub fn wants(&self, format: Format) -> bool {
        self.formats.contains(&format)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub spacetime: SpacetimeConfig,
    pub task: Task,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initializer: Option<Initializer>,
    #[serde(default)]
    pub solve: SolveConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
    #[serde(default)]
    pub convergence: ConvergenceConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: OutputConfig,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Structural checks that need no geometry evaluation.
    pub fn validate(&self) -> Result<()> {
        let (a, b) = self.spacetime.interval;
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::Config(format!(
                "interval ({a}, {b}) is empty or not finite"
            )));
        }
        let fiber = self.spacetime.fiber.build()?;
        self.spacetime.twist.validate(&fiber)?;
        self.solve.validate()?;
        if matches!(self.task, Task::Geometry | Task::Solve) && self.initializer.is_none() {
            return Err(Error::Config(format!(
                "task {} needs an initializer",
                self.task.name()
            )));
        }
        let config_source = match self.task {
            Task::Verify => Some(self.verify.source),
            Task::Convergence => Some(self.convergence.source),
            _ => None,
        };
        if config_source == Some(Source::Config) && self.initializer.is_none() {
            return Err(Error::Config(
                "source \"config\" needs an initializer".into(),
            ));
        }
        if self.task == Task::Verify && self.verify.identities.is_empty() {
            return Err(Error::Config("verify needs at least one identity".into()));
        }
        if self.task == Task::Convergence {
            if self.convergence.quantities.is_empty() {
                return Err(Error::Config(
                    "convergence needs at least one quantity".into(),
                ));
            }
            let levels = self.levels();
            if levels.len() < 2 || levels.windows(2).any(|w| w[1] != 2 * w[0]) {
                return Err(Error::Config(format!(
                    "refinement levels must double: {levels:?}"
                )));
            }
        }
        let corpus_source = config_source == Some(Source::Corpus);
        if corpus_source {
            let size = match self.task {
                Task::Verify => self.verify.corpus_size,
                _ => self.convergence.corpus_size,
            };
            if size == 0 {
                return Err(Error::Config("corpus_size must be positive".into()));
            }
            let r = &self.spacetime.fiber.resolution;
            if r.iter().any(|&m| m != r[0]) {
                return Err(Error::Config(
                    "corpus runs need the same resolution on every axis".into(),
                ));
            }
        }
        if self.output.formats.is_empty() {
            return Err(Error::Config("output.formats is empty".into()));
        }
        Ok(())
    }

    /// Refinement levels, defaulting to `m, 2m, 4m`.
    pub fn levels(&self) -> Vec<usize> {
        if self.convergence.levels.is_empty() {
            let m = self.spacetime.fiber.resolution[0];
            vec![m, 2 * m, 4 * m]
        } else {
            self.convergence.levels.clone()
        }
    }
}
