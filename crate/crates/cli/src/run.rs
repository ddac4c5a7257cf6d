//! Task dispatch.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

use nalgebra::DMatrix;
use ratecode::datagen::{add_outliers, sample_mixture, ComponentShape, Rng};
use ratecode::mcr2::{self, Membership, OptimizeOptions};
use ratecode::micl::{self, AsymptoticClassModel, ClassifierState, KernelClassifier, KernelSpec};
use ratecode::segmentation::{self, label_agreement};
use ratecode::{DataMatrix, Distortion};

use crate::config::{ExperimentConfig, SegmentMethod, Task};
use crate::error::CliError;
use crate::io;
use crate::report::{Artifact, ClassRank, Prediction, Report, TaskResult, Timings};

/// Default distortion of the rate-reduction tasks.
pub const MCR2_DEFAULT_EPSILON: f64 = 0.5;
/// Relative singular-value threshold for class ranks.
pub const RANK_THRESHOLD: f64 = 1e-3;
/// Largest between-class inner product accepted as orthogonal.
pub const ORTHOGONALITY_TOLERANCE: f64 = 1e-2;

struct Outcome {
    results: TaskResult,
    checks: BTreeMap<String, bool>,
    plots: Vec<PathBuf>,
}

impl Outcome {
    fn new(results: TaskResult) -> Self {
        Self {
            results,
            checks: BTreeMap::new(),
            plots: Vec::new(),
        }
    }
}

/// Runs the configured task and returns its report without writing it.
pub fn run(config: &ExperimentConfig) -> Result<Report, CliError> {
    let start = Instant::now();
    let task = config.task()?;
    let outcome = match task {
        Task::Segment => segment(config)?,
        Task::SelectEps => select_eps(config)?,
        Task::Classify => classify(config, None)?,
        Task::ClassifyKernel => {
            let kernel: KernelSpec = config.require(&config.kernel, "kernel")?.parse()?;
            classify(config, Some(kernel))?
        }
        Task::Mcr2Eval => mcr2_eval(config)?,
        Task::Mcr2Train => mcr2_train(config)?,
        Task::Gen => generate(config)?,
        Task::Converge => converge(config)?,
    };
    Ok(Report {
        schema_version: crate::report::SCHEMA_VERSION,
        artifact: Artifact::default(),
        task,
        config: config.clone(),
        results: outcome.results,
        checks: outcome.checks,
        plots: outcome.plots,
        timings: Timings {
            total_seconds: start.elapsed().as_secs_f64(),
        },
    })
}

/// Runs the task and writes the report to `config.output` when set.
pub fn run_and_write(config: &ExperimentConfig) -> Result<Report, CliError> {
    let report = run(config)?;
    if let Some(path) = &config.output {
        let text = serde_json::to_string_pretty(&report).expect("reports serialize");
        std::fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))?;
    }
    Ok(report)
}

fn epsilon(config: &ExperimentConfig) -> Result<Distortion, CliError> {
    Ok(Distortion::new(*config.require(&config.epsilon, "epsilon")?)?)
}

fn input(config: &ExperimentConfig) -> Result<DataMatrix, CliError> {
    io::load_matrix(config.require(&config.input, "input")?, config.header())
}

fn optional_labels(config: &ExperimentConfig, path: &Option<PathBuf>, m: usize) -> Result<Option<Vec<usize>>, CliError> {
    let Some(path) = path else { return Ok(None) };
    let labels = io::load_labels(path, config.header())?;
    if labels.len() != m {
        return Err(ratecode::Error::DimensionMismatch {
            expected: m,
            found: labels.len(),
        }
        .into());
    }
    Ok(Some(labels))
}

fn plot(config: &ExperimentConfig, name: &str, points: &[(f64, f64)], outcome: &mut Outcome) -> Result<(), CliError> {
    if let Some(dir) = &config.plots {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let path = dir.join(name);
        io::save_curve(&path, points)?;
        outcome.plots.push(path);
    }
    Ok(())
}

fn write_labels(config: &ExperimentConfig, labels: &[usize]) -> Result<(), CliError> {
    if let Some(path) = &config.labels_out {
        io::save_labels(path, labels)?;
    }
    Ok(())
}

fn segment(config: &ExperimentConfig) -> Result<Outcome, CliError> {
    let w = input(config)?;
    let eps = epsilon(config)?;
    let result = match config.method.unwrap_or_default() {
        SegmentMethod::Greedy => segmentation::segment_greedy(&w, eps)?,
        SegmentMethod::Bruteforce => {
            segmentation::segment_bruteforce(&w, eps, segmentation::BRUTEFORCE_MAX_SAMPLES)?
        }
    };
    let labels = result.partition.labels();
    let truth = optional_labels(config, &config.labels, w.m())?;
    write_labels(config, &labels)?;
    let mut outcome = Outcome::new(TaskResult::Segmentation {
        agreement: truth.map(|t| label_agreement(&labels, &t)),
        labels,
        result: result.clone(),
    });
    let recomputed = segmentation::segmented_coding_length(&w, &result.partition, eps)?;
    outcome
        .checks
        .insert("total_length_recomputes".into(), (recomputed - result.total_length).abs() <= 1e-6);
    outcome
        .checks
        .insert("merge_deltas_negative".into(), result.merge_trace.iter().all(|s| s.length_delta < 0.0));
    Ok(outcome)
}

fn select_eps(config: &ExperimentConfig) -> Result<Outcome, CliError> {
    let w = input(config)?;
    let grid = config
        .require(&config.eps_grid, "eps_grid")?
        .iter()
        .map(|&e| Distortion::new(e))
        .collect::<Result<Vec<_>, _>>()?;
    let sel = segmentation::select_distortion(&w, &grid)?;
    let labels = sel.segmentation.partition.labels();
    let truth = optional_labels(config, &config.labels, w.m())?;
    write_labels(config, &labels)?;
    let points: Vec<(f64, f64)> = sel.curve.iter().map(|p| (p.epsilon, p.objective)).collect();
    let mut outcome = Outcome::new(TaskResult::DistortionSelection {
        eps_star: sel.eps_star.value(),
        curve: sel.curve,
        agreement: truth.map(|t| label_agreement(&labels, &t)),
        labels,
        result: sel.segmentation,
    });
    plot(config, "eps_objective.csv", &points, &mut outcome)?;
    Ok(outcome)
}

fn classify(config: &ExperimentConfig, kernel: Option<KernelSpec>) -> Result<Outcome, CliError> {
    let train = input(config)?;
    let labels = io::load_labels(config.require(&config.labels, "labels")?, config.header())?;
    let test = io::load_matrix(config.require(&config.test_input, "test_input")?, config.header())?;
    let eps = epsilon(config)?;
    let priors = config.priors.unwrap_or_default();
    let state = ClassifierState::from_labeled(&train, &labels, eps, priors)?;
    let decisions = match kernel {
        None => micl::classify_micl_batch(&test, &state)?,
        Some(k) => KernelClassifier::new(&state, k)?.classify_batch(&test)?,
    };
    let truth = optional_labels(config, &config.test_labels, test.m())?;
    let predicted: Vec<usize> = decisions.iter().map(|d| d.label).collect();
    write_labels(config, &predicted)?;
    let accuracy = truth.map(|t| {
        t.iter().zip(&predicted).filter(|(a, b)| a == b).count() as f64 / t.len() as f64
    });
    Ok(Outcome::new(TaskResult::Classification {
        epsilon: eps.value(),
        kernel,
        priors,
        predictions: decisions
            .into_iter()
            .enumerate()
            .map(|(index, d)| Prediction {
                index,
                label: d.label,
                scores: d.scores,
            })
            .collect(),
        accuracy,
    }))
}

fn membership(config: &ExperimentConfig, m: usize) -> Result<Membership, CliError> {
    let pi = match (&config.labels, &config.membership) {
        (Some(path), _) => Membership::from_labels(&io::load_labels(path, config.header())?)?,
        (None, Some(path)) => io::load_membership(path, config.header())?,
        (None, None) => return Err(CliError::Config("mcr2 tasks need 'labels' or 'membership'".into())),
    };
    if pi.num_samples() != m {
        return Err(ratecode::Error::DimensionMismatch {
            expected: m,
            found: pi.num_samples(),
        }
        .into());
    }
    Ok(pi)
}

fn mcr2_epsilon(config: &ExperimentConfig) -> Result<Distortion, CliError> {
    Ok(Distortion::new(config.epsilon.unwrap_or(MCR2_DEFAULT_EPSILON))?)
}

fn class_ranks(z: &DataMatrix, pi: &Membership) -> Result<Vec<ClassRank>, CliError> {
    Ok(mcr2::class_spectra(z, pi)?
        .into_iter()
        .enumerate()
        .map(|(class, s)| {
            let rank = mcr2::rank_at(&s, RANK_THRESHOLD);
            ClassRank {
                class,
                rank,
                top_spread: mcr2::top_singular_spread(&s, rank.saturating_sub(1)),
                singular_values: s.iter().copied().collect(),
            }
        })
        .collect())
}

fn precision_check(z: &DataMatrix, pi: &Membership, eps: Distortion, ranks: &[ClassRank]) -> Result<bool, CliError> {
    let sizes: Vec<usize> = pi.class_indices()?.iter().map(Vec::len).collect();
    let dims: Vec<usize> = ranks.iter().map(|r| r.rank).collect();
    Ok(mcr2::precision_condition(eps, z.n(), &sizes, &dims))
}

fn mcr2_eval(config: &ExperimentConfig) -> Result<Outcome, CliError> {
    let z = input(config)?;
    let pi = membership(config, z.m())?;
    let eps = mcr2_epsilon(config)?;
    let mode = config.norm.unwrap_or_default();
    let report = mcr2::delta_r(&z, &pi, eps, mode)?;
    let normalized = mcr2::normalize(&z, &pi, mode)?;
    let hard = pi.is_hard();
    let (ole, coherence, ranks) = if hard {
        (
            Some(mcr2::ole_loss(&normalized, &pi)?),
            Some(mcr2::between_class_coherence(&normalized, &pi)?),
            Some(class_ranks(&normalized, &pi)?),
        )
    } else {
        (None, None, None)
    };
    let mut checks = BTreeMap::new();
    checks.insert("delta_r_nonnegative".into(), report.delta_r >= -1e-9);
    if let Some(r) = &ranks {
        checks.insert("precision_condition".into(), precision_check(&normalized, &pi, eps, r)?);
    }
    let mut outcome = Outcome::new(TaskResult::Rates {
        report,
        ole,
        between_class_coherence: coherence,
        class_ranks: ranks,
    });
    outcome.checks = checks;
    Ok(outcome)
}

fn mcr2_train(config: &ExperimentConfig) -> Result<Outcome, CliError> {
    let mode = config.norm.unwrap_or_default();
    let eps = mcr2_epsilon(config)?;
    let (z0, pi) = match &config.input {
        Some(_) => {
            let z = input(config)?;
            let pi = membership(config, z.m())?;
            (mcr2::normalize(&z, &pi, mode)?, pi)
        }
        None => {
            let labels = io::load_labels(config.require(&config.labels, "labels or input")?, config.header())?;
            let pi = Membership::from_labels(&labels)?;
            let d = *config.require(&config.dim, "dim")?;
            let mut rng = Rng::new(config.seed.unwrap_or(0));
            let z = DataMatrix::new(rng.normal_matrix(d, labels.len()))?;
            (mcr2::normalize(&z, &pi, mode)?, pi)
        }
    };
    let defaults = OptimizeOptions::default();
    let opts = OptimizeOptions {
        steps: config.steps.unwrap_or(defaults.steps),
        step_size: config.step_size.unwrap_or(defaults.step_size),
        mode,
        rank_cap: config.rank_cap.clone(),
        max_halvings: defaults.max_halvings,
    };
    let initial = mcr2::delta_r(&z0, &pi, eps, mode)?;
    let out = mcr2::optimize_features(&z0, &pi, eps, &opts)?;
    let final_report = mcr2::delta_r(&out.features, &pi, eps, mode)?;
    let coherence = mcr2::between_class_coherence(&out.features, &pi)?;
    let ranks = class_ranks(&out.features, &pi)?;
    if let Some(path) = &config.features_out {
        io::save_matrix(path, &out.features)?;
    }
    let mut checks = BTreeMap::new();
    checks.insert(
        "trajectory_non_decreasing".into(),
        out.trajectory.windows(2).all(|w| w[1] >= w[0]),
    );
    checks.insert("between_class_orthogonal".into(), coherence <= ORTHOGONALITY_TOLERANCE);
    checks.insert("precision_condition".into(), precision_check(&out.features, &pi, eps, &ranks)?);
    let points: Vec<(f64, f64)> = out.trajectory.iter().enumerate().map(|(i, &v)| (i as f64, v)).collect();
    let mut outcome = Outcome::new(TaskResult::Training {
        initial,
        final_report,
        trajectory: out.trajectory,
        rejected_steps: out.rejected_steps,
        between_class_coherence: coherence,
        class_ranks: ranks,
        features_path: config.features_out.clone(),
    });
    outcome.checks = checks;
    plot(config, "delta_r_trajectory.csv", &points, &mut outcome)?;
    Ok(outcome)
}

fn generate(config: &ExperimentConfig) -> Result<Outcome, CliError> {
    let spec = config.mixture()?;
    let m = *config.require(&config.samples, "samples")?;
    let (mut w, labels) = sample_mixture(&spec, m)?;
    let mut outliers = 0;
    if let Some(fraction) = config.outlier_fraction {
        let bound = config.outlier_bound.unwrap_or(10.0);
        let (corrupted, mask) = add_outliers(&w, fraction, bound, spec.seed.wrapping_add(1))?;
        w = corrupted;
        outliers = mask.iter().filter(|&&b| b).count();
    }
    if let Some(path) = &config.data_out {
        io::save_matrix(path, &w)?;
    }
    if let Some(path) = &config.labels_out {
        io::save_labels(path, &labels)?;
    }
    let mut label_counts = vec![0; spec.components.len()];
    for &l in &labels {
        label_counts[l] += 1;
    }
    Ok(Outcome::new(TaskResult::Generation {
        n: w.n(),
        m,
        seed: spec.seed,
        label_counts,
        outliers,
        data_path: config.data_out.clone(),
        labels_path: config.labels_out.clone(),
    }))
}

fn converge(config: &ExperimentConfig) -> Result<Outcome, CliError> {
    let spec = config.mixture()?;
    let eps = epsilon(config)?;
    let truth = spec
        .components
        .iter()
        .enumerate()
        .map(|(label, c)| match &c.shape {
            ComponentShape::Gaussian { covariance } => {
                let n = c.mean.len();
                let cov = DMatrix::from_fn(n, n, |i, j| covariance[i][j]);
                Ok(AsymptoticClassModel::new(label, c.mean.clone().into(), cov, c.weight)?)
            }
            _ => Err(CliError::Config("converge needs Gaussian components".into())),
        })
        .collect::<Result<Vec<_>, _>>()?;
    let grid = match &config.test_input {
        Some(path) => io::load_matrix(path, config.header())?,
        None => sample_mixture(&spec, config.samples.unwrap_or(500))?.0,
    };
    let sizes = config.sizes.clone().unwrap_or_else(|| vec![50, 200, 800]);
    let replications = config.replications.unwrap_or(5);
    let points = micl::convergence_study(&truth, &sizes, &grid, eps, replications, spec.seed)?;
    let gap: Vec<(f64, f64)> = points.iter().map(|p| (p.m as f64, p.mean_gap)).collect();
    let disagreement: Vec<(f64, f64)> = points.iter().map(|p| (p.m as f64, p.disagreement)).collect();
    let mut outcome = Outcome::new(TaskResult::Convergence {
        epsilon: eps.value(),
        grid_points: grid.m(),
        replications,
        points,
    });
    plot(config, "convergence_gap.csv", &gap, &mut outcome)?;
    plot(config, "convergence_disagreement.csv", &disagreement, &mut outcome)?;
    Ok(outcome)
}

/// Caps the global thread pool from `RATECODE_THREADS` (0 or unset = automatic).
pub fn configure_threads(value: Option<&str>) -> Result<(), CliError> {
    let Some(text) = value else { return Ok(()) };
    let n: usize = text
        .trim()
        .parse()
        .map_err(|_| CliError::Config(format!("RATECODE_THREADS='{text}' is not a count")))?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    Ok(())
}
