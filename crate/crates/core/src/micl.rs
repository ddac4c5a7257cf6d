//! Minimum incremental coding length (MICL) classification.
//!
//! A test sample `x` goes to the class whose training set grows the least,
//! in bits, when `x` is appended to it:
//!
//! ```text
//! δL(x, j) = L(X_j ∪ {x}) − L(X_j) − log₂ π_j
//! ```
//!
//! with `L` the coding length with mean. As the training sets grow, the rule
//! approaches a regularized MAP classifier with a dimension reward; that
//! limiting form is [`classify_asymptotic`]. The kernel variant replaces inner
//! products by kernel evaluations on centered Gram matrices.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coding::{
    centered_coding_length, coding_length_with_mean, effective_dimension, kernel_coding_length,
    DataMatrix, Distortion, GaussianMoments, GramMatrix,
};
use crate::datagen::{sample_mixture, ComponentShape, MixtureComponent, MixtureSpec};
use crate::error::{Error, Result};
use crate::linalg;

/// Training samples of one class with its label prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassModel {
    pub samples: DataMatrix,
    pub prior: f64,
    pub label: usize,
}

impl ClassModel {
    pub fn new(samples: DataMatrix, prior: f64, label: usize) -> Result<Self> {
        if !(prior > 0.0 && prior <= 1.0) {
            return Err(Error::InvalidInput(format!("prior {prior} not in (0, 1]")));
        }
        Ok(Self { samples, prior, label })
    }

    pub fn dim(&self) -> usize {
        self.samples.n()
    }
}

/// How class priors are set when building a classifier from labeled data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorMode {
    /// `π_j = |X_j| / m`.
    #[default]
    Empirical,
    /// `π_j = 1 / K`.
    Uniform,
}

impl FromStr for PriorMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "empirical" => Ok(Self::Empirical),
            "uniform" => Ok(Self::Uniform),
            other => Err(Error::InvalidInput(format!("unknown prior mode '{other}'"))),
        }
    }
}

/// Immutable set of class models sharing one distortion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierState {
    classes: Vec<ClassModel>,
    epsilon: Distortion,
}

impl ClassifierState {
    pub fn new(mut classes: Vec<ClassModel>, epsilon: Distortion) -> Result<Self> {
        if classes.len() < 2 {
            return Err(Error::InvalidInput("need at least two classes".into()));
        }
        let n = classes[0].dim();
        if let Some(c) = classes.iter().find(|c| c.dim() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: c.dim(),
            });
        }
        classes.sort_by_key(|c| c.label);
        if classes.windows(2).any(|w| w[0].label == w[1].label) {
            return Err(Error::InvalidInput("class labels must be distinct".into()));
        }
        let total: f64 = classes.iter().map(|c| c.prior).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!("class priors sum to {total}, expected 1")));
        }
        Ok(Self { classes, epsilon })
    }

    /// Groups the columns of `data` by `labels`.
    pub fn from_labeled(
        data: &DataMatrix,
        labels: &[usize],
        epsilon: Distortion,
        priors: PriorMode,
    ) -> Result<Self> {
        if labels.len() != data.m() {
            return Err(Error::DimensionMismatch {
                expected: data.m(),
                found: labels.len(),
            });
        }
        let mut distinct: Vec<usize> = labels.to_vec();
        distinct.sort_unstable();
        distinct.dedup();
        let k = distinct.len();
        let classes = distinct
            .iter()
            .map(|&label| {
                let idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == label).collect();
                let prior = match priors {
                    PriorMode::Empirical => idx.len() as f64 / data.m() as f64,
                    PriorMode::Uniform => 1.0 / k as f64,
                };
                ClassModel::new(DataMatrix::new(data.select(&idx))?, prior, label)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(classes, epsilon)
    }

    /// Classes sorted by label.
    pub fn classes(&self) -> &[ClassModel] {
        &self.classes
    }

    pub fn epsilon(&self) -> Distortion {
        self.epsilon
    }

    pub fn dim(&self) -> usize {
        self.classes[0].dim()
    }
}

/// Chosen label and the per-class score behind it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub label: usize,
    /// `(label, score)` pairs in ascending label order.
    pub scores: Vec<(usize, f64)>,
}

/// Picks the smallest score (or the largest when `maximize`), with ties going
/// to the smallest label.
fn decide(mut scores: Vec<(usize, f64)>, maximize: bool) -> Decision {
    scores.sort_by_key(|&(l, _)| l);
    let mut best = scores[0];
    for &(label, s) in &scores[1..] {
        let better = if maximize { s > best.1 } else { s < best.1 };
        if better {
            best = (label, s);
        }
    }
    Decision {
        label: best.0,
        scores,
    }
}

fn check_dim(x: &DVector<f64>, n: usize) -> Result<()> {
    if x.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: x.len(),
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("test sample has non-finite entries".into()));
    }
    Ok(())
}

/// `L(X_j ∪ {x}) − L(X_j) − log₂ π_j` in bits.
pub fn incremental_coding_length(x: &DVector<f64>, class: &ClassModel, eps: Distortion) -> Result<f64> {
    check_dim(x, class.dim())?;
    let augmented = class.samples.with_column(x)?;
    Ok(coding_length_with_mean(&augmented, eps) - coding_length_with_mean(&class.samples, eps)
        - class.prior.log2())
}

/// Data part of `δL` without the mean and label terms: the growth of the
/// centered coding length.
pub fn incremental_deviation_length(x: &DVector<f64>, class: &ClassModel, eps: Distortion) -> Result<f64> {
    check_dim(x, class.dim())?;
    let augmented = class.samples.with_column(x)?;
    Ok(centered_coding_length(&augmented, eps) - centered_coding_length(&class.samples, eps))
}

/// MICL decision: argmin over classes of [`incremental_coding_length`].
pub fn classify_micl(x: &DVector<f64>, state: &ClassifierState) -> Result<Decision> {
    let scores = state
        .classes
        .iter()
        .map(|c| Ok((c.label, incremental_coding_length(x, c, state.epsilon)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(decide(scores, false))
}

/// [`classify_micl`] over every column of `xs`, in parallel.
pub fn classify_micl_batch(xs: &DataMatrix, state: &ClassifierState) -> Result<Vec<Decision>> {
    (0..xs.m())
        .into_par_iter()
        .map(|i| classify_micl(&xs.column(i), state))
        .collect()
}

/// Population moments and prior of one class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticClassModel {
    pub label: usize,
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
    pub prior: f64,
}

impl AsymptoticClassModel {
    pub fn new(label: usize, mean: DVector<f64>, covariance: DMatrix<f64>, prior: f64) -> Result<Self> {
        GaussianMoments::new(mean.clone(), covariance.clone(), 1)?;
        if !(prior > 0.0 && prior <= 1.0) {
            return Err(Error::InvalidInput(format!("prior {prior} not in (0, 1]")));
        }
        Ok(Self {
            label,
            mean,
            covariance,
            prior,
        })
    }

    /// Plug-in moments of a class model's training samples.
    pub fn from_class(class: &ClassModel) -> Self {
        let moments = GaussianMoments::from_data(&class.samples);
        Self {
            label: class.label,
            mean: moments.mean,
            covariance: moments.covariance,
            prior: class.prior,
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Natural-log density of `N(mean, cov)` at `x`; `cov` must be positive definite.
pub fn gaussian_log_likelihood(x: &DVector<f64>, mean: &DVector<f64>, cov: &DMatrix<f64>) -> Result<f64> {
    check_dim(x, mean.len())?;
    let n = mean.len() as f64;
    let chol = linalg::symmetrize(cov).cholesky().ok_or(Error::NotPositiveSemidefinite {
        min_eigenvalue: f64::NAN,
        max_eigenvalue: f64::NAN,
    })?;
    let d = x - mean;
    let z = chol.l().solve_lower_triangular(&d).expect("Cholesky factor is non-singular");
    let log_det: f64 = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    Ok(-0.5 * (z.norm_squared() + log_det + n * (2.0 * std::f64::consts::PI).ln()))
}

/// `L_G(x | μ, Σ + ε²/n I) + ln π + ½ D_ε(Σ)`, all in natural log.
pub fn asymptotic_score(x: &DVector<f64>, model: &AsymptoticClassModel, eps: Distortion) -> Result<f64> {
    let n = model.dim();
    let shift = eps.squared() / n as f64;
    let regularized = &model.covariance + DMatrix::identity(n, n) * shift;
    let ll = gaussian_log_likelihood(x, &model.mean, &regularized)?;
    let dim = effective_dimension(&model.covariance, eps)?;
    Ok(ll + model.prior.ln() + 0.5 * dim)
}

/// Limiting value of `δL(x, j)` in bits as the class sample count grows:
/// `½ log₂ det(n/ε² (Σ + ε²/n I)) + (dᵀ(Σ + ε²/n I)⁻¹d − D_ε(Σ)) / (2 ln 2) − log₂ π`.
///
/// It differs from `−asymptotic_score / ln 2` by `(n/2) log₂(n / (2π ε²))`,
/// the same constant for every class.
pub fn asymptotic_incremental_length(
    x: &DVector<f64>,
    model: &AsymptoticClassModel,
    eps: Distortion,
) -> Result<f64> {
    let n = model.dim() as f64;
    let score = asymptotic_score(x, model, eps)?;
    let offset = 0.5 * n * (n / (2.0 * std::f64::consts::PI * eps.squared())).ln();
    Ok((offset - score) / std::f64::consts::LN_2)
}

/// Asymptotic MICL rule: argmax over classes of [`asymptotic_score`].
pub fn classify_asymptotic(
    x: &DVector<f64>,
    models: &[AsymptoticClassModel],
    eps: Distortion,
) -> Result<Decision> {
    if models.is_empty() {
        return Err(Error::InvalidInput("no class models".into()));
    }
    let scores = models
        .iter()
        .map(|m| Ok((m.label, asymptotic_score(x, m, eps)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(decide(scores, true))
}

/// Kernel function choices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelSpec {
    Linear,
    Polynomial { degree: u32 },
    Rbf { gamma: f64 },
}

impl KernelSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Linear => Ok(()),
            KernelSpec::Polynomial { degree } if degree >= 1 => Ok(()),
            KernelSpec::Rbf { gamma } if gamma > 0.0 && gamma.is_finite() => Ok(()),
            other => Err(Error::InvalidInput(format!("invalid kernel parameters: {other}"))),
        }
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelSpec::Linear => write!(f, "linear"),
            KernelSpec::Polynomial { degree } => write!(f, "poly:{degree}"),
            KernelSpec::Rbf { gamma } => write!(f, "rbf:{gamma}"),
        }
    }
}

/// Parses `linear`, `poly:<degree>` or `rbf:<gamma>`.
impl FromStr for KernelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidInput(format!("cannot parse kernel '{s}'"));
        let spec = match s.split_once(':') {
            None if s == "linear" => KernelSpec::Linear,
            Some(("poly", d)) => KernelSpec::Polynomial {
                degree: d.parse().map_err(|_| bad())?,
            },
            Some(("rbf", g)) => KernelSpec::Rbf {
                gamma: g.parse().map_err(|_| bad())?,
            },
            _ => return Err(bad()),
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// `aᵀb`, `(aᵀb + 1)^d` or `exp(−γ ‖a − b‖²)`.
pub fn kernel_eval(a: &DVector<f64>, b: &DVector<f64>, kernel: KernelSpec) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    Ok(match kernel {
        KernelSpec::Linear => a.dot(b),
        KernelSpec::Polynomial { degree } => (a.dot(b) + 1.0).powi(degree as i32),
        KernelSpec::Rbf { gamma } => (-gamma * (a - b).norm_squared()).exp(),
    })
}

/// Kernel Gram matrix of the columns of `w`.
pub fn kernel_gram(w: &DMatrix<f64>, kernel: KernelSpec) -> DMatrix<f64> {
    let m = w.ncols();
    let cols: Vec<DVector<f64>> = w.column_iter().map(|c| c.into_owned()).collect();
    let mut k = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            let v = kernel_eval(&cols[i], &cols[j], kernel).expect("columns share a dimension");
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// Relative eigenvalue threshold for the feature-space rank estimate.
pub const KERNEL_RANK_THRESHOLD: f64 = 1e-9;

/// Kernel version of `δL(x, j)` without a mean term:
/// growth of the centered Gram coding length plus `−log₂ π_j`.
///
/// Both Gram matrices use the same ambient dimension, the numerical rank of
/// the centered augmented Gram matrix.
pub fn kernel_incremental_coding_length(
    x: &DVector<f64>,
    class: &ClassModel,
    eps: Distortion,
    kernel: KernelSpec,
) -> Result<f64> {
    check_dim(x, class.dim())?;
    kernel.validate()?;
    let augmented = class.samples.with_column(x)?;
    let k_aug = kernel_gram(augmented.as_matrix(), kernel);
    let m = class.samples.m();
    let k_train = k_aug.view((0, 0), (m, m)).into_owned();
    let centered_aug = linalg::center_gram(&k_aug);
    let centered_train = linalg::center_gram(&k_train);
    let ambient = linalg::numerical_rank_psd(&centered_aug, KERNEL_RANK_THRESHOLD).clamp(1, m + 1);
    let with_x = kernel_coding_length(&GramMatrix::new(centered_aug, ambient)?, eps)?;
    let without = kernel_coding_length(&GramMatrix::new(centered_train, ambient)?, eps)?;
    Ok(with_x - without - class.prior.log2())
}

/// Kernel coding length `((m + n)/2) Σ log₂(1 + n/(m ε²) λᵢ)` from Gram eigenvalues.
fn kernel_length_from_eigenvalues(eig: &DVector<f64>, ambient: usize, eps: Distortion) -> f64 {
    let m = eig.len();
    let alpha = ambient as f64 / (m as f64 * eps.squared());
    0.5 * (m + ambient) as f64 * linalg::sum_log2_one_plus(eig, alpha)
}

fn rank_from_eigenvalues(eig: &DVector<f64>) -> usize {
    let max = eig.iter().copied().fold(0.0, f64::max);
    if max <= 0.0 {
        return 0;
    }
    eig.iter().filter(|&&l| l > KERNEL_RANK_THRESHOLD * max).count()
}

struct KernelClass {
    label: usize,
    prior: f64,
    samples: Vec<DVector<f64>>,
    gram: DMatrix<f64>,
    centered_eigenvalues: DVector<f64>,
}

/// Kernel MICL classifier with the training-side Gram spectra cached.
pub struct KernelClassifier {
    classes: Vec<KernelClass>,
    kernel: KernelSpec,
    epsilon: Distortion,
    dim: usize,
}

impl KernelClassifier {
    pub fn new(state: &ClassifierState, kernel: KernelSpec) -> Result<Self> {
        kernel.validate()?;
        let classes = state
            .classes
            .iter()
            .map(|c| {
                let gram = kernel_gram(c.samples.as_matrix(), kernel);
                let centered_eigenvalues = linalg::psd_eigenvalues(&linalg::center_gram(&gram))?;
                Ok(KernelClass {
                    label: c.label,
                    prior: c.prior,
                    samples: (0..c.samples.m()).map(|i| c.samples.column(i)).collect(),
                    gram,
                    centered_eigenvalues,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            classes,
            kernel,
            epsilon: state.epsilon,
            dim: state.dim(),
        })
    }

    pub fn kernel(&self) -> KernelSpec {
        self.kernel
    }

    /// Same value as [`kernel_incremental_coding_length`] for every class, in label order.
    pub fn incremental_lengths(&self, x: &DVector<f64>) -> Result<Vec<(usize, f64)>> {
        check_dim(x, self.dim)?;
        self.classes
            .iter()
            .map(|c| {
                let m = c.samples.len();
                let mut aug = c.gram.clone().resize(m + 1, m + 1, 0.0);
                for (i, s) in c.samples.iter().enumerate() {
                    let v = kernel_eval(s, x, self.kernel)?;
                    aug[(i, m)] = v;
                    aug[(m, i)] = v;
                }
                aug[(m, m)] = kernel_eval(x, x, self.kernel)?;
                let eig = linalg::psd_eigenvalues(&linalg::center_gram(&aug))?;
                let ambient = rank_from_eigenvalues(&eig).clamp(1, m + 1);
                let with_x = kernel_length_from_eigenvalues(&eig, ambient, self.epsilon);
                let without = kernel_length_from_eigenvalues(&c.centered_eigenvalues, ambient, self.epsilon);
                Ok((c.label, with_x - without - c.prior.log2()))
            })
            .collect()
    }

    pub fn classify(&self, x: &DVector<f64>) -> Result<Decision> {
        Ok(decide(self.incremental_lengths(x)?, false))
    }

    /// Classifies every column of `xs` in parallel.
    pub fn classify_batch(&self, xs: &DataMatrix) -> Result<Vec<Decision>> {
        (0..xs.m())
            .into_par_iter()
            .map(|i| self.classify(&xs.column(i)))
            .collect()
    }
}

/// Kernel MICL decision.
pub fn classify_micl_kernel(x: &DVector<f64>, state: &ClassifierState, kernel: KernelSpec) -> Result<Decision> {
    let scores = state
        .classes
        .iter()
        .map(|c| Ok((c.label, kernel_incremental_coding_length(x, c, state.epsilon, kernel)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(decide(scores, false))
}

/// Kernel MICL over every column of `xs`, in parallel.
pub fn classify_micl_kernel_batch(
    xs: &DataMatrix,
    state: &ClassifierState,
    kernel: KernelSpec,
) -> Result<Vec<Decision>> {
    KernelClassifier::new(state, kernel)?.classify_batch(xs)
}

/// Finite-sample MICL against its limiting rule at one training size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergencePoint {
    /// Training samples per class.
    pub m: usize,
    /// Fraction of grid points where finite and asymptotic labels differ,
    /// averaged over replications.
    pub disagreement: f64,
    /// Mean `|δL(x, j) − δL∞(x, j)|` over grid points, classes and replications.
    pub mean_gap: f64,
}

/// Draws `m` samples per class from the true Gaussians (`replications`
/// times per size) and compares finite-sample MICL with the asymptotic rule
/// on the columns of `grid`.
pub fn convergence_study(
    truth: &[AsymptoticClassModel],
    sizes: &[usize],
    grid: &DataMatrix,
    eps: Distortion,
    replications: usize,
    seed: u64,
) -> Result<Vec<ConvergencePoint>> {
    if truth.len() < 2 || replications == 0 {
        return Err(Error::InvalidInput("need two classes and at least one replication".into()));
    }
    let points: Vec<DVector<f64>> = (0..grid.m()).map(|i| grid.column(i)).collect();
    let limit_labels: Vec<usize> = points
        .iter()
        .map(|x| classify_asymptotic(x, truth, eps).map(|d| d.label))
        .collect::<Result<_>>()?;
    let limit_lengths: Vec<Vec<f64>> = points
        .iter()
        .map(|x| truth.iter().map(|t| asymptotic_incremental_length(x, t, eps)).collect())
        .collect::<Result<_>>()?;

    sizes
        .iter()
        .enumerate()
        .map(|(si, &m)| {
            let mut disagree = 0usize;
            let mut gap = 0.0;
            for rep in 0..replications {
                let classes = truth
                    .iter()
                    .enumerate()
                    .map(|(ci, t)| {
                        let spec = MixtureSpec {
                            components: vec![MixtureComponent {
                                mean: t.mean.iter().copied().collect(),
                                shape: ComponentShape::Gaussian {
                                    covariance: t
                                        .covariance
                                        .row_iter()
                                        .map(|r| r.iter().copied().collect())
                                        .collect(),
                                },
                                weight: 1.0,
                            }],
                            seed: seed
                                .wrapping_add((si as u64) << 40)
                                .wrapping_add((rep as u64) << 20)
                                .wrapping_add(ci as u64),
                        };
                        let (samples, _) = sample_mixture(&spec, m)?;
                        ClassModel::new(samples, t.prior, t.label)
                    })
                    .collect::<Result<Vec<_>>>()?;
                let state = ClassifierState::new(classes, eps)?;
                let per_point: Vec<(bool, f64)> = points
                    .par_iter()
                    .zip(&limit_labels)
                    .zip(&limit_lengths)
                    .map(|((x, &limit), lengths)| {
                        let d = classify_micl(x, &state)?;
                        let g: f64 = d
                            .scores
                            .iter()
                            .zip(truth)
                            .map(|(&(_, s), _)| s)
                            .zip(ordered_by_label(truth, lengths))
                            .map(|(s, l)| (s - l).abs())
                            .sum();
                        Ok((d.label != limit, g / truth.len() as f64))
                    })
                    .collect::<Result<_>>()?;
                disagree += per_point.iter().filter(|(d, _)| *d).count();
                gap += per_point.iter().map(|(_, g)| g).sum::<f64>();
            }
            let total = (replications * points.len()) as f64;
            Ok(ConvergencePoint {
                m,
                disagreement: disagree as f64 / total,
                mean_gap: gap / total,
            })
        })
        .collect()
}

/// Values aligned with `truth`, reordered into ascending label order.
fn ordered_by_label(truth: &[AsymptoticClassModel], values: &[f64]) -> Vec<f64> {
    let mut pairs: Vec<(usize, f64)> = truth.iter().map(|t| t.label).zip(values.iter().copied()).collect();
    pairs.sort_by_key(|&(l, _)| l);
    pairs.into_iter().map(|(_, v)| v).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn eps(v: f64) -> Distortion {
        Distortion::new(v).unwrap()
    }

    fn cluster(center: &[f64], spread: f64, m: usize) -> DataMatrix {
        let n = center.len();
        DataMatrix::new(DMatrix::from_fn(n, m, |i, j| {
            center[i] + spread * ((i * 31 + j * 17) as f64 * 0.731).sin()
        }))
        .unwrap()
    }

    #[test]
    fn label_cost_is_minus_log_prior() {
        let x = DVector::from_vec(vec![0.2, -0.1]);
        let samples = cluster(&[0.0, 0.0], 0.3, 25);
        let full = ClassModel::new(samples.clone(), 1.0, 1).unwrap();
        let half = ClassModel::new(samples, 0.5, 1).unwrap();
        let a = incremental_coding_length(&x, &full, eps(0.1)).unwrap();
        let b = incremental_coding_length(&x, &half, eps(0.1)).unwrap();
        assert_relative_eq!(b - a, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn mean_of_tight_cluster_is_cheap() {
        let samples = cluster(&[3.0, 1.0], 1e-3, 200);
        let mean = samples.as_matrix().column_sum() / 200.0;
        let class = ClassModel::new(samples, 1.0, 1).unwrap();
        let far = DVector::from_vec(vec![6.0, -2.0]);
        let near = incremental_coding_length(&mean, &class, eps(0.1)).unwrap();
        assert!(near < incremental_coding_length(&far, &class, eps(0.1)).unwrap());
        assert!(near.abs() < 1.0, "near = {near}");
    }

    #[test]
    fn prior_breaks_ties_between_identical_classes() {
        let samples = cluster(&[0.0, 0.0], 1.0, 30);
        let state = ClassifierState::new(
            vec![
                ClassModel::new(samples.clone(), 0.1, 1).unwrap(),
                ClassModel::new(samples, 0.9, 2).unwrap(),
            ],
            eps(0.2),
        )
        .unwrap();
        for x in [[0.0, 0.0], [5.0, -3.0], [-0.4, 0.9]] {
            assert_eq!(classify_micl(&DVector::from_row_slice(&x), &state).unwrap().label, 2);
        }
    }

    #[test]
    fn sample_on_a_tight_cluster_joins_it() {
        let a = cluster(&[0.0, 0.0], 0.05, 20);
        let b = cluster(&[10.0, 10.0], 0.05, 20);
        let x = b.column(3);
        let state = ClassifierState::new(
            vec![ClassModel::new(a, 0.5, 1).unwrap(), ClassModel::new(b, 0.5, 2).unwrap()],
            eps(0.1),
        )
        .unwrap();
        assert_eq!(classify_micl(&x, &state).unwrap().label, 2);
    }

    #[test]
    fn state_validation() {
        let s = cluster(&[0.0], 1.0, 5);
        let one = vec![ClassModel::new(s.clone(), 1.0, 1).unwrap()];
        assert!(ClassifierState::new(one, eps(0.1)).is_err());
        let dup = vec![
            ClassModel::new(s.clone(), 0.5, 1).unwrap(),
            ClassModel::new(s.clone(), 0.5, 1).unwrap(),
        ];
        assert!(ClassifierState::new(dup, eps(0.1)).is_err());
        let bad_priors = vec![
            ClassModel::new(s.clone(), 0.5, 1).unwrap(),
            ClassModel::new(s.clone(), 0.6, 2).unwrap(),
        ];
        assert!(ClassifierState::new(bad_priors, eps(0.1)).is_err());
        assert!(ClassModel::new(s, 0.0, 1).is_err());
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let class = ClassModel::new(cluster(&[0.0, 0.0], 1.0, 5), 1.0, 1).unwrap();
        assert_eq!(
            incremental_coding_length(&DVector::zeros(3), &class, eps(0.1)),
            Err(Error::DimensionMismatch { expected: 2, found: 3 })
        );
    }

    #[test]
    fn kernel_values() {
        let a = DVector::from_vec(vec![1.0, 0.0, 2.0]);
        let b = DVector::from_vec(vec![0.0, 3.0, 0.0]);
        assert_eq!(kernel_eval(&a, &a, KernelSpec::Rbf { gamma: 0.7 }).unwrap(), 1.0);
        assert_eq!(kernel_eval(&a, &b, KernelSpec::Polynomial { degree: 1 }).unwrap(), 1.0);
        let c = DVector::from_vec(vec![0.5, -1.5, 0.25]);
        let lin = kernel_eval(&a, &c, KernelSpec::Linear).unwrap();
        let poly = kernel_eval(&a, &c, KernelSpec::Polynomial { degree: 1 }).unwrap();
        assert_relative_eq!(lin, poly - 1.0, epsilon = 1e-15);
        assert!(kernel_eval(&a, &DVector::zeros(2), KernelSpec::Linear).is_err());
    }

    #[test]
    fn cached_kernel_lengths_match_reference() {
        let a = cluster(&[0.0, 1.0], 0.7, 12);
        let b = cluster(&[2.0, -1.0], 0.4, 9);
        let state = ClassifierState::new(
            vec![ClassModel::new(a, 0.6, 3).unwrap(), ClassModel::new(b, 0.4, 1).unwrap()],
            eps(0.2),
        )
        .unwrap();
        for kernel in [KernelSpec::Linear, KernelSpec::Polynomial { degree: 2 }, KernelSpec::Rbf { gamma: 0.8 }] {
            let cached = KernelClassifier::new(&state, kernel).unwrap();
            let x = DVector::from_vec(vec![0.3, 0.2]);
            for (label, v) in cached.incremental_lengths(&x).unwrap() {
                let class = state.classes().iter().find(|c| c.label == label).unwrap();
                let reference = kernel_incremental_coding_length(&x, class, eps(0.2), kernel).unwrap();
                assert_relative_eq!(v, reference, epsilon = 1e-8, max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn kernel_parsing() {
        assert_eq!("linear".parse::<KernelSpec>().unwrap(), KernelSpec::Linear);
        assert_eq!("poly:3".parse::<KernelSpec>().unwrap(), KernelSpec::Polynomial { degree: 3 });
        assert_eq!("rbf:0.5".parse::<KernelSpec>().unwrap(), KernelSpec::Rbf { gamma: 0.5 });
        assert!("poly:0".parse::<KernelSpec>().is_err());
        assert!("rbf:-1".parse::<KernelSpec>().is_err());
        assert!("sigmoid".parse::<KernelSpec>().is_err());
        assert_eq!(KernelSpec::Rbf { gamma: 0.5 }.to_string(), "rbf:0.5");
    }

    #[test]
    fn asymptotic_rule_survives_singular_covariance() {
        let model = AsymptoticClassModel::new(
            1,
            DVector::zeros(3),
            DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.0, 0.0])),
            1.0,
        )
        .unwrap();
        let s = asymptotic_score(&DVector::from_vec(vec![0.0, 1.0, 0.0]), &model, eps(0.1)).unwrap();
        assert!(s.is_finite());
    }

    #[test]
    fn asymptotic_symmetric_case_is_the_bisector() {
        let mk = |label, mean: [f64; 2]| {
            AsymptoticClassModel::new(label, DVector::from_row_slice(&mean), DMatrix::identity(2, 2), 0.5)
                .unwrap()
        };
        let models = [mk(1, [-1.0, 0.0]), mk(2, [1.0, 0.0])];
        for y in [-3.0, 0.0, 2.5] {
            for x in [-2.0, -0.3, -0.01] {
                let p = DVector::from_vec(vec![x, y]);
                assert_eq!(classify_asymptotic(&p, &models, eps(0.5)).unwrap().label, 1);
                assert_eq!(classify_asymptotic(&(-p), &models, eps(0.5)).unwrap().label, 2);
            }
        }
    }

    #[test]
    fn decide_prefers_smallest_label_on_ties() {
        let d = decide(vec![(3, 1.0), (1, 1.0), (2, 2.0)], false);
        assert_eq!(d.label, 1);
        assert_eq!(d.scores.iter().map(|s| s.0).collect::<Vec<_>>(), vec![1, 2, 3]);
        assert_eq!(decide(vec![(2, 5.0), (1, 5.0)], true).label, 1);
    }
}
