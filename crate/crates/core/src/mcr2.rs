//! Maximal coding rate reduction (MCR²) on feature matrices.
//!
//! Features are the columns of a `d × m` matrix `Z`. Class membership is soft:
//! `k` nonnegative weight vectors summing to one per sample. The rate
//! reduction `ΔR = R − Rᶜ` compares coding all features together with coding
//! each class separately.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::str::FromStr;

use crate::coding::{DataMatrix, Distortion};
use crate::error::{Error, Result};
use crate::linalg;

/// Features as columns; the same container as sample data.
pub type FeatureMatrix = DataMatrix;

/// Tolerance for unit column norms and membership sums.
pub const UNIT_TOLERANCE: f64 = 1e-9;

/// Diagonals of the membership matrices `Π_j`, one row per class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Membership {
    weights: Vec<Vec<f64>>,
}

impl Membership {
    /// `weights[j][i]` is the weight of sample `i` in class `j`.
    pub fn new(weights: Vec<Vec<f64>>) -> Result<Self> {
        let k = weights.len();
        if k == 0 {
            return Err(Error::InvalidInput("membership needs at least one class".into()));
        }
        let m = weights[0].len();
        if m == 0 {
            return Err(Error::InvalidInput("membership over zero samples".into()));
        }
        if let Some(w) = weights.iter().find(|w| w.len() != m) {
            return Err(Error::DimensionMismatch {
                expected: m,
                found: w.len(),
            });
        }
        for i in 0..m {
            let mut sum = 0.0;
            for w in &weights {
                let v = w[i];
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::InvalidInput(format!("weight {v} of sample {i} is not a nonnegative number")));
                }
                sum += v;
            }
            if (sum - 1.0).abs() > UNIT_TOLERANCE {
                return Err(Error::InvalidInput(format!("weights of sample {i} sum to {sum}")));
            }
        }
        Ok(Self { weights })
    }

    /// One-hot membership; class `j` collects the samples labeled with the
    /// `j`-th smallest distinct label.
    pub fn from_labels(labels: &[usize]) -> Result<Self> {
        let mut distinct = labels.to_vec();
        distinct.sort_unstable();
        distinct.dedup();
        let weights = distinct
            .iter()
            .map(|&l| labels.iter().map(|&x| if x == l { 1.0 } else { 0.0 }).collect())
            .collect();
        Self::new(weights)
    }

    /// Every sample split evenly over `k` classes.
    pub fn uniform(k: usize, m: usize) -> Result<Self> {
        Self::new(vec![vec![1.0 / k as f64; m]; k])
    }

    pub fn num_classes(&self) -> usize {
        self.weights.len()
    }

    pub fn num_samples(&self) -> usize {
        self.weights[0].len()
    }

    pub fn weights(&self, class: usize) -> &[f64] {
        &self.weights[class]
    }

    /// `tr Π_j`.
    pub fn trace(&self, class: usize) -> f64 {
        self.weights[class].iter().sum()
    }

    /// True when every weight is exactly 0 or 1.
    pub fn is_hard(&self) -> bool {
        self.weights.iter().flatten().all(|&v| v == 0.0 || v == 1.0)
    }

    /// Sample indices of each class; requires hard membership.
    pub fn class_indices(&self) -> Result<Vec<Vec<usize>>> {
        if !self.is_hard() {
            return Err(Error::HardLabelsRequired);
        }
        Ok(self
            .weights
            .iter()
            .map(|w| (0..w.len()).filter(|&i| w[i] == 1.0).collect())
            .collect())
    }
}

/// How features are normalized before rates are compared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizationMode {
    /// Every column scaled to unit norm.
    #[default]
    Sphere,
    /// Each class scaled so that `‖Z_j‖_F² = m_j`; hard labels only.
    Frobenius,
    /// Features used as given.
    None,
}

impl FromStr for NormalizationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sphere" => Ok(Self::Sphere),
            "frobenius" => Ok(Self::Frobenius),
            "none" => Ok(Self::None),
            other => Err(Error::InvalidInput(format!("unknown normalization mode '{other}'"))),
        }
    }
}

/// Rate of one class inside `Rᶜ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassRate {
    pub class: usize,
    /// `tr Π_j`.
    pub trace: f64,
    /// `½ log₂ det(I + d/(tr Π_j ε²) Z Π_j Zᵀ)`.
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub r: f64,
    pub rc: f64,
    pub delta_r: f64,
    pub per_class_rates: Vec<ClassRate>,
    /// Classes with zero trace, left out of `Rᶜ`.
    pub skipped_classes: Vec<usize>,
    pub epsilon: Distortion,
    pub normalization_mode: NormalizationMode,
    pub d: usize,
    pub m: usize,
}

fn check_membership(z: &FeatureMatrix, pi: &Membership) -> Result<()> {
    if pi.num_samples() != z.m() {
        return Err(Error::DimensionMismatch {
            expected: z.m(),
            found: pi.num_samples(),
        });
    }
    Ok(())
}

/// `Z · diag(√w)`.
fn weighted_columns(z: &DMatrix<f64>, w: &[f64]) -> DMatrix<f64> {
    let mut out = z.clone();
    for (mut col, &wi) in out.column_iter_mut().zip(w) {
        col *= wi.sqrt();
    }
    out
}

/// `½ log₂ det(I + d/(m ε²) Z Zᵀ)`.
pub fn rate_r(z: &FeatureMatrix, eps: Distortion) -> f64 {
    let alpha = z.n() as f64 / (z.m() as f64 * eps.squared());
    0.5 * linalg::log2_det_identity_plus_outer(z.as_matrix(), alpha)
}

fn class_rates(z: &FeatureMatrix, pi: &Membership, eps: Distortion) -> Vec<Option<ClassRate>> {
    let d = z.n() as f64;
    (0..pi.num_classes())
        .into_par_iter()
        .map(|j| {
            let trace = pi.trace(j);
            if trace <= 0.0 {
                return None;
            }
            let alpha = d / (trace * eps.squared());
            let zw = weighted_columns(z.as_matrix(), pi.weights(j));
            Some(ClassRate {
                class: j,
                trace,
                rate: 0.5 * linalg::log2_det_identity_plus_outer(&zw, alpha),
            })
        })
        .collect()
}

/// `Σ_j (tr Π_j / m) · ½ log₂ det(I + d/(tr Π_j ε²) Z Π_j Zᵀ)`.
pub fn rate_rc(z: &FeatureMatrix, pi: &Membership, eps: Distortion) -> Result<f64> {
    check_membership(z, pi)?;
    let m = z.m() as f64;
    Ok(class_rates(z, pi, eps)
        .into_iter()
        .flatten()
        .map(|c| c.trace / m * c.rate)
        .sum())
}

/// Rescales the features according to `mode`.
pub fn normalize(z: &FeatureMatrix, pi: &Membership, mode: NormalizationMode) -> Result<FeatureMatrix> {
    check_membership(z, pi)?;
    let mut out = z.as_matrix().clone();
    match mode {
        NormalizationMode::None => {}
        NormalizationMode::Sphere => {
            for (i, mut col) in out.column_iter_mut().enumerate() {
                let norm = col.norm();
                if norm == 0.0 {
                    return Err(Error::InvalidInput(format!("feature {i} is zero and cannot be normalized")));
                }
                col /= norm;
            }
        }
        NormalizationMode::Frobenius => {
            for idx in pi.class_indices()? {
                let sq: f64 = idx.iter().map(|&i| out.column(i).norm_squared()).sum();
                if sq == 0.0 {
                    continue;
                }
                let scale = (idx.len() as f64 / sq).sqrt();
                for &i in &idx {
                    out.column_mut(i).scale_mut(scale);
                }
            }
        }
    }
    DataMatrix::new(out)
}

/// Normalizes `z` with `mode`, then reports `R`, `Rᶜ` and `ΔR`.
pub fn delta_r(
    z: &FeatureMatrix,
    pi: &Membership,
    eps: Distortion,
    mode: NormalizationMode,
) -> Result<RateReport> {
    let z = normalize(z, pi, mode)?;
    let m = z.m() as f64;
    let r = rate_r(&z, eps);
    let mut per_class_rates = Vec::new();
    let mut skipped_classes = Vec::new();
    for (j, c) in class_rates(&z, pi, eps).into_iter().enumerate() {
        match c {
            Some(c) => per_class_rates.push(c),
            None => skipped_classes.push(j),
        }
    }
    let rc: f64 = per_class_rates.iter().map(|c| c.trace / m * c.rate).sum();
    Ok(RateReport {
        r,
        rc,
        delta_r: r - rc,
        per_class_rates,
        skipped_classes,
        epsilon: eps,
        normalization_mode: mode,
        d: z.n(),
        m: z.m(),
    })
}

fn delta_r_raw(z: &FeatureMatrix, pi: &Membership, eps: Distortion) -> f64 {
    let m = z.m() as f64;
    let rc: f64 = class_rates(z, pi, eps)
        .into_iter()
        .flatten()
        .map(|c| c.trace / m * c.rate)
        .sum();
    rate_r(z, eps) - rc
}

/// `(I + α A)⁻¹ B` for PSD `A`.
fn solve_regularized(a: &DMatrix<f64>, alpha: f64, b: &DMatrix<f64>) -> DMatrix<f64> {
    let d = a.nrows();
    let system = linalg::symmetrize(&(DMatrix::identity(d, d) + a * alpha));
    system
        .cholesky()
        .expect("identity plus PSD is positive definite")
        .solve(b)
}

/// `∂ΔR/∂Z` for unnormalized `Z`.
pub fn grad_delta_r(z: &FeatureMatrix, pi: &Membership, eps: Distortion) -> Result<DMatrix<f64>> {
    check_membership(z, pi)?;
    let zm = z.as_matrix();
    let (d, m) = (z.n() as f64, z.m() as f64);
    let ln2 = std::f64::consts::LN_2;
    let alpha = d / (m * eps.squared());
    let mut grad = solve_regularized(&(zm * zm.transpose()), alpha, zm) * (alpha / ln2);
    let class_coef = d / (m * eps.squared() * ln2);
    let terms: Vec<Option<DMatrix<f64>>> = (0..pi.num_classes())
        .into_par_iter()
        .map(|j| {
            let trace = pi.trace(j);
            if trace <= 0.0 {
                return None;
            }
            let w = pi.weights(j);
            let mut zpi = zm.clone();
            for (mut col, &wi) in zpi.column_iter_mut().zip(w) {
                col *= wi;
            }
            let cov = &zpi * zm.transpose();
            let alpha_j = d / (trace * eps.squared());
            Some(solve_regularized(&cov, alpha_j, &zpi) * class_coef)
        })
        .collect();
    for t in terms.into_iter().flatten() {
        grad -= t;
    }
    Ok(grad)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeOptions {
    pub steps: usize,
    pub step_size: f64,
    pub mode: NormalizationMode,
    /// Optional per-class rank limit applied after each projection.
    pub rank_cap: Option<Vec<usize>>,
    /// Step-size halvings tried before a step is rejected.
    pub max_halvings: usize,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        Self {
            steps: 500,
            step_size: 0.5,
            mode: NormalizationMode::Sphere,
            rank_cap: None,
            max_halvings: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeResult {
    pub features: FeatureMatrix,
    /// `ΔR` before the first step and after every step.
    pub trajectory: Vec<f64>,
    /// Steps rejected after exhausting all halvings.
    pub rejected_steps: usize,
}

/// Truncated-SVD projection of the columns in `idx` onto rank `r`.
fn cap_rank(z: &mut DMatrix<f64>, idx: &[usize], r: usize) {
    if idx.is_empty() || r >= idx.len().min(z.nrows()) {
        return;
    }
    let block = DMatrix::from_fn(z.nrows(), idx.len(), |i, c| z[(i, idx[c])]);
    let svd = block.svd(true, true);
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let mut low = DMatrix::zeros(z.nrows(), idx.len());
    for &k in order.iter().take(r) {
        low += u.column(k) * vt.row(k) * svd.singular_values[k];
    }
    for (c, &i) in idx.iter().enumerate() {
        z.set_column(i, &low.column(c));
    }
}

fn project(
    z: DMatrix<f64>,
    pi: &Membership,
    opts: &OptimizeOptions,
    classes: &Option<Vec<Vec<usize>>>,
) -> Result<FeatureMatrix> {
    let mut z = z;
    if let (Some(caps), Some(classes)) = (&opts.rank_cap, classes) {
        for (idx, &r) in classes.iter().zip(caps) {
            cap_rank(&mut z, idx, r);
        }
    }
    let z = DataMatrix::new(z)?;
    normalize(&z, pi, opts.mode)
}

fn check_feasible(z: &FeatureMatrix, pi: &Membership, mode: NormalizationMode) -> Result<()> {
    match mode {
        NormalizationMode::None => Ok(()),
        NormalizationMode::Sphere => {
            for (i, col) in z.as_matrix().column_iter().enumerate() {
                if (col.norm() - 1.0).abs() > UNIT_TOLERANCE {
                    return Err(Error::InvalidInput(format!("feature {i} does not have unit norm")));
                }
            }
            Ok(())
        }
        NormalizationMode::Frobenius => {
            for (j, idx) in pi.class_indices()?.iter().enumerate() {
                let sq: f64 = idx.iter().map(|&i| z.as_matrix().column(i).norm_squared()).sum();
                let target = idx.len() as f64;
                if (sq - target).abs() > UNIT_TOLERANCE * target.max(1.0) {
                    return Err(Error::InvalidInput(format!(
                        "class {j} has squared Frobenius norm {sq}, expected {target}"
                    )));
                }
            }
            Ok(())
        }
    }
}

/// Projected gradient ascent on `ΔR` with backtracking.
///
/// Each step moves along the gradient, projects back onto the constraint set
/// of `opts.mode` (after the optional rank cap) and accepts the move only if
/// `ΔR` does not decrease, halving the step up to `opts.max_halvings` times.
pub fn optimize_features(
    z0: &FeatureMatrix,
    pi: &Membership,
    eps: Distortion,
    opts: &OptimizeOptions,
) -> Result<OptimizeResult> {
    check_membership(z0, pi)?;
    check_feasible(z0, pi, opts.mode)?;
    if !(opts.step_size > 0.0 && opts.step_size.is_finite()) {
        return Err(Error::InvalidInput(format!("step size {} must be positive", opts.step_size)));
    }
    let classes = match &opts.rank_cap {
        Some(caps) => {
            if caps.len() != pi.num_classes() {
                return Err(Error::DimensionMismatch {
                    expected: pi.num_classes(),
                    found: caps.len(),
                });
            }
            Some(pi.class_indices()?)
        }
        None => None,
    };
    let mut z = z0.clone();
    if classes.is_some() {
        z = project(z.into_inner(), pi, opts, &classes)?;
    }
    let mut current = delta_r_raw(&z, pi, eps);
    let mut trajectory = vec![current];
    let mut rejected_steps = 0;
    for _ in 0..opts.steps {
        let grad = grad_delta_r(&z, pi, eps)?;
        let mut eta = opts.step_size;
        let mut accepted = false;
        for _ in 0..=opts.max_halvings {
            let candidate = project(z.as_matrix() + &grad * eta, pi, opts, &classes)?;
            let value = delta_r_raw(&candidate, pi, eps);
            if value >= current {
                z = candidate;
                current = value;
                accepted = true;
                break;
            }
            eta *= 0.5;
        }
        if !accepted {
            rejected_steps += 1;
        }
        trajectory.push(current);
    }
    Ok(OptimizeResult {
        features: z,
        trajectory,
        rejected_steps,
    })
}

/// `‖Z‖_* − Σ_j ‖Z_j‖_*`; needs hard membership.
pub fn ole_loss(z: &FeatureMatrix, pi: &Membership) -> Result<f64> {
    check_membership(z, pi)?;
    let classes = pi.class_indices()?;
    let total = linalg::nuclear_norm(z.as_matrix());
    let parts: f64 = classes
        .iter()
        .filter(|idx| !idx.is_empty())
        .map(|idx| linalg::nuclear_norm(&z.select(idx)))
        .sum();
    Ok(total - parts)
}

/// `R([Z_i Z_j]) − ½ (R(Z_i) + R(Z_j))`.
pub fn pairwise_rate_distance(zi: &FeatureMatrix, zj: &FeatureMatrix, eps: Distortion) -> Result<f64> {
    if zi.n() != zj.n() {
        return Err(Error::DimensionMismatch {
            expected: zi.n(),
            found: zj.n(),
        });
    }
    let joined = DMatrix::from_fn(zi.n(), zi.m() + zj.m(), |r, c| {
        if c < zi.m() {
            zi.as_matrix()[(r, c)]
        } else {
            zj.as_matrix()[(r, c - zi.m())]
        }
    });
    let joined = DataMatrix::new(joined)?;
    Ok(rate_r(&joined, eps) - 0.5 * (rate_r(zi, eps) + rate_r(zj, eps)))
}

/// `ε⁴ < min_j (m_j / m)(d² / d_j²)`.
pub fn precision_condition(eps: Distortion, d: usize, class_sizes: &[usize], class_dims: &[usize]) -> bool {
    let m: usize = class_sizes.iter().sum();
    let bound = class_sizes
        .iter()
        .zip(class_dims)
        .filter(|(_, &dj)| dj > 0)
        .map(|(&mj, &dj)| (mj as f64 / m as f64) * (d as f64 / dj as f64).powi(2))
        .fold(f64::INFINITY, f64::min);
    eps.squared().powi(2) < bound
}

/// Largest `|z_aᵀ z_b|` over pairs of features from different classes.
pub fn between_class_coherence(z: &FeatureMatrix, pi: &Membership) -> Result<f64> {
    check_membership(z, pi)?;
    let classes = pi.class_indices()?;
    let mut worst: f64 = 0.0;
    for a in 0..classes.len() {
        for b in a + 1..classes.len() {
            let cross = z.select(&classes[a]).transpose() * z.select(&classes[b]);
            if !cross.is_empty() {
                worst = worst.max(cross.amax());
            }
        }
    }
    Ok(worst)
}

/// Singular values of each class block, sorted descending.
pub fn class_spectra(z: &FeatureMatrix, pi: &Membership) -> Result<Vec<DVector<f64>>> {
    check_membership(z, pi)?;
    Ok(pi
        .class_indices()?
        .iter()
        .map(|idx| linalg::singular_values(&z.select(idx)))
        .collect())
}

/// Count of singular values above `rel * σ_max`.
pub fn rank_at(singular: &DVector<f64>, rel: f64) -> usize {
    let max = singular.iter().copied().fold(0.0, f64::max);
    if max == 0.0 {
        return 0;
    }
    singular.iter().filter(|&&s| s > rel * max).count()
}

/// `(max − min) / max` over the `count` largest singular values.
pub fn top_singular_spread(singular: &DVector<f64>, count: usize) -> f64 {
    let top: Vec<f64> = singular.iter().copied().take(count).collect();
    if top.len() < 2 {
        return 0.0;
    }
    let max = top.iter().copied().fold(f64::MIN, f64::max);
    let min = top.iter().copied().fold(f64::MAX, f64::min);
    if max == 0.0 {
        0.0
    } else {
        (max - min) / max
    }
}
