//! Command-line flags. Each subcommand is one task; flags mirror config fields.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use ratecode::mcr2::NormalizationMode;
use ratecode::micl::PriorMode;

use crate::config::{ExperimentConfig, SegmentMethod, Task};
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "ratecode", version, about = "Lossy coding length experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Greedy or exhaustive segmentation at a fixed distortion.
    Segment(Flags),
    /// Distortion search over `--eps-grid`.
    SelectEps(Flags),
    /// Minimum incremental coding length classification.
    Classify(Flags),
    /// Kernelized MICL (`--kernel`).
    ClassifyKernel(Flags),
    /// Rate reduction of given features.
    Mcr2Eval(Flags),
    /// Rate reduction maximization over the features themselves.
    Mcr2Train(Flags),
    /// Sample a mixture spec.
    Gen(Flags),
    /// Finite-sample MICL against its asymptotic rule.
    Converge(Flags),
    /// Run the task named in the config file.
    Run(Flags),
}

#[derive(Debug, Default, Args)]
pub struct Flags {
    /// TOML experiment file; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    pub epsilon: Option<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub eps_grid: Option<Vec<f64>>,
    /// linear | poly:d | rbf:gamma
    #[arg(long)]
    pub kernel: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Soft membership CSV (one sample per row, one class per column).
    #[arg(long)]
    pub membership: Option<PathBuf>,
    #[arg(long)]
    pub test_input: Option<PathBuf>,
    #[arg(long)]
    pub test_labels: Option<PathBuf>,
    /// Input CSVs start with a header line.
    #[arg(long)]
    pub header: Option<bool>,
    /// Report path; stdout when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Directory for x,y curve files.
    #[arg(long)]
    pub plots: Option<PathBuf>,
    /// sphere | frobenius | none
    #[arg(long)]
    pub norm: Option<NormalizationMode>,
    /// empirical | uniform
    #[arg(long)]
    pub priors: Option<PriorMode>,
    /// greedy | bruteforce
    #[arg(long)]
    pub method: Option<SegmentMethod>,
    /// Mixture spec file (TOML, or JSON by extension).
    #[arg(long)]
    pub spec_file: Option<PathBuf>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub outlier_fraction: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub outlier_bound: Option<f64>,
    #[arg(long)]
    pub data_out: Option<PathBuf>,
    #[arg(long)]
    pub labels_out: Option<PathBuf>,
    #[arg(long)]
    pub features_out: Option<PathBuf>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub step_size: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub rank_cap: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,
    #[arg(long)]
    pub replications: Option<usize>,
}

impl Command {
    fn split(self) -> (Option<Task>, Flags) {
        match self {
            Command::Segment(f) => (Some(Task::Segment), f),
            Command::SelectEps(f) => (Some(Task::SelectEps), f),
            Command::Classify(f) => (Some(Task::Classify), f),
            Command::ClassifyKernel(f) => (Some(Task::ClassifyKernel), f),
            Command::Mcr2Eval(f) => (Some(Task::Mcr2Eval), f),
            Command::Mcr2Train(f) => (Some(Task::Mcr2Train), f),
            Command::Gen(f) => (Some(Task::Gen), f),
            Command::Converge(f) => (Some(Task::Converge), f),
            Command::Run(f) => (None, f),
        }
    }

    /// Layers defaults, the config file and the flags into one config.
    pub fn into_config(self) -> Result<ExperimentConfig, CliError> {
        let (task, f) = self.split();
        let base = match &f.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        let flag_spec_file = f.spec_file.is_some();
        let top = ExperimentConfig {
            task,
            epsilon: f.epsilon,
            eps_grid: f.eps_grid,
            kernel: f.kernel,
            seed: f.seed,
            input: f.input,
            labels: f.labels,
            membership: f.membership,
            test_input: f.test_input,
            test_labels: f.test_labels,
            header: f.header,
            output: f.output,
            plots: f.plots,
            norm: f.norm,
            priors: f.priors,
            method: f.method,
            spec: None,
            spec_file: f.spec_file,
            samples: f.samples,
            outlier_fraction: f.outlier_fraction,
            outlier_bound: f.outlier_bound,
            data_out: f.data_out,
            labels_out: f.labels_out,
            features_out: f.features_out,
            dim: f.dim,
            steps: f.steps,
            step_size: f.step_size,
            rank_cap: f.rank_cap,
            sizes: f.sizes,
            replications: f.replications,
        };
        let mut config = base.overlay(top);
        // A spec file on the command line beats an inline spec from the config file.
        if flag_spec_file {
            config.spec = None;
        }
        Ok(config)
    }
}
