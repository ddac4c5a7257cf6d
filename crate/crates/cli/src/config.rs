//! Experiment configuration: defaults, then a TOML file, then command-line flags.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ratecode::datagen::MixtureSpec;
use ratecode::mcr2::NormalizationMode;
use ratecode::micl::PriorMode;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Segment,
    SelectEps,
    Classify,
    ClassifyKernel,
    Mcr2Eval,
    Mcr2Train,
    Gen,
    Converge,
}

impl Task {
    pub const ALL: [Task; 8] = [
        Task::Segment,
        Task::SelectEps,
        Task::Classify,
        Task::ClassifyKernel,
        Task::Mcr2Eval,
        Task::Mcr2Train,
        Task::Gen,
        Task::Converge,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Task::Segment => "segment",
            Task::SelectEps => "select-eps",
            Task::Classify => "classify",
            Task::ClassifyKernel => "classify-kernel",
            Task::Mcr2Eval => "mcr2-eval",
            Task::Mcr2Train => "mcr2-train",
            Task::Gen => "gen",
            Task::Converge => "converge",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Task {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        Task::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| CliError::Config(format!("unknown task '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentMethod {
    #[default]
    Greedy,
    Bruteforce,
}

impl FromStr for SegmentMethod {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "greedy" => Ok(SegmentMethod::Greedy),
            "bruteforce" => Ok(SegmentMethod::Bruteforce),
            _ => Err(CliError::Config(format!("unknown segmentation method '{s}'"))),
        }
    }
}

/// Every field is optional so that a file and flags can be layered.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: Option<Task>,
    pub epsilon: Option<f64>,
    pub eps_grid: Option<Vec<f64>>,
    /// `linear`, `poly:<degree>` or `rbf:<gamma>`.
    pub kernel: Option<String>,
    pub seed: Option<u64>,
    /// Sample (or feature) matrix, one sample per row.
    pub input: Option<PathBuf>,
    /// Integer labels of `input`, one per row.
    pub labels: Option<PathBuf>,
    /// Soft membership weights, one row per sample (mcr2 tasks).
    pub membership: Option<PathBuf>,
    /// Points to classify.
    pub test_input: Option<PathBuf>,
    pub test_labels: Option<PathBuf>,
    /// Whether CSV inputs start with a header row.
    pub header: Option<bool>,
    /// Report path; the report goes to stdout when unset.
    pub output: Option<PathBuf>,
    /// Directory for `x,y` plot files.
    pub plots: Option<PathBuf>,
    pub norm: Option<NormalizationMode>,
    pub priors: Option<PriorMode>,
    pub method: Option<SegmentMethod>,
    /// Inline mixture for `gen` and `converge`.
    pub spec: Option<MixtureSpec>,
    /// Mixture file (TOML, or JSON by extension).
    pub spec_file: Option<PathBuf>,
    pub samples: Option<usize>,
    pub outlier_fraction: Option<f64>,
    pub outlier_bound: Option<f64>,
    pub data_out: Option<PathBuf>,
    pub labels_out: Option<PathBuf>,
    pub features_out: Option<PathBuf>,
    /// Feature dimension for a random `mcr2-train` start.
    pub dim: Option<usize>,
    pub steps: Option<usize>,
    pub step_size: Option<f64>,
    pub rank_cap: Option<Vec<usize>>,
    /// Per-class training sizes for `converge`.
    pub sizes: Option<Vec<usize>>,
    pub replications: Option<usize>,
}

macro_rules! overlay {
    ($base:ident, $top:ident, $($field:ident),* $(,)?) => {
        $( if $top.$field.is_some() { $base.$field = $top.$field; } )*
    };
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Fields set in `top` replace those in `self`.
    pub fn overlay(mut self, top: ExperimentConfig) -> Self {
        overlay!(
            self, top, task, epsilon, eps_grid, kernel, seed, input, labels, membership, test_input,
            test_labels, header, output, plots, norm, priors, method, spec, spec_file, samples,
            outlier_fraction, outlier_bound, data_out, labels_out, features_out, dim, steps,
            step_size, rank_cap, sizes, replications,
        );
        self
    }

    pub fn task(&self) -> Result<Task, CliError> {
        self.task.ok_or_else(|| CliError::Config("no task given".into()))
    }

    pub fn header(&self) -> bool {
        self.header.unwrap_or(false)
    }

    pub fn require<'a, T>(&self, value: &'a Option<T>, name: &str) -> Result<&'a T, CliError> {
        value.as_ref().ok_or_else(|| {
            CliError::Config(format!(
                "task {} needs '{name}'",
                self.task.map_or("?", Task::as_str)
            ))
        })
    }

    /// The mixture from `spec` or `spec_file`, with `seed` applied when set.
    pub fn mixture(&self) -> Result<MixtureSpec, CliError> {
        let mut spec = match (&self.spec, &self.spec_file) {
            (Some(s), _) => s.clone(),
            (None, Some(path)) => {
                let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
                let is_json = path.extension().is_some_and(|e| e == "json");
                if is_json {
                    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
                } else {
                    toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
                }
            }
            (None, None) => return Err(self.require::<()>(&None, "spec or spec_file").unwrap_err()),
        };
        if let Some(seed) = self.seed {
            spec.seed = seed;
        }
        spec.validate()?;
        Ok(spec)
    }
}
