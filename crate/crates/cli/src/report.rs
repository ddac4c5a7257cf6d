//! Versioned JSON reports.

use std::collections::BTreeMap;
use std::path::PathBuf;

use ratecode::mcr2::RateReport;
use ratecode::micl::{ConvergencePoint, KernelSpec, PriorMode};
use ratecode::segmentation::{DistortionPoint, SegmentationResult};
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, Task};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    pub name: String,
    pub version: String,
}

impl Default for Artifact {
    fn default() -> Self {
        Self {
            name: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub artifact: Artifact,
    pub task: Task,
    pub config: ExperimentConfig,
    pub results: TaskResult,
    /// Named boolean checks, e.g. the precision condition of a rate report.
    pub checks: BTreeMap<String, bool>,
    /// Plot files written, `x,y` CSV.
    pub plots: Vec<PathBuf>,
    pub timings: Timings,
}

/// Wall-clock seconds; the only fields that differ between identical runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub total_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub index: usize,
    pub label: usize,
    /// `(label, δL)` in ascending label order.
    pub scores: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassRank {
    pub class: usize,
    pub rank: usize,
    pub singular_values: Vec<f64>,
    pub top_spread: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TaskResult {
    Segmentation {
        result: SegmentationResult,
        labels: Vec<usize>,
        agreement: Option<f64>,
    },
    DistortionSelection {
        eps_star: f64,
        curve: Vec<DistortionPoint>,
        result: SegmentationResult,
        labels: Vec<usize>,
        agreement: Option<f64>,
    },
    Classification {
        epsilon: f64,
        kernel: Option<KernelSpec>,
        priors: PriorMode,
        predictions: Vec<Prediction>,
        accuracy: Option<f64>,
    },
    Rates {
        report: RateReport,
        ole: Option<f64>,
        between_class_coherence: Option<f64>,
        class_ranks: Option<Vec<ClassRank>>,
    },
    Training {
        initial: RateReport,
        final_report: RateReport,
        trajectory: Vec<f64>,
        rejected_steps: usize,
        between_class_coherence: f64,
        class_ranks: Vec<ClassRank>,
        features_path: Option<PathBuf>,
    },
    Generation {
        n: usize,
        m: usize,
        seed: u64,
        label_counts: Vec<usize>,
        outliers: usize,
        data_path: Option<PathBuf>,
        labels_path: Option<PathBuf>,
    },
    Convergence {
        epsilon: f64,
        grid_points: usize,
        replications: usize,
        points: Vec<ConvergencePoint>,
    },
}
