//! Seeded synthetic data: Gaussian mixtures, unions of subspaces, rings and
//! outlier injection.
//!
//! The random stream is xoshiro256++ seeded through SplitMix64
//! (`Xoshiro256PlusPlus::seed_from_u64`). Uniforms take the top 53 bits of each
//! 64-bit output, `u = (x >> 11) · 2⁻⁵³`, and normals come from Box–Muller
//! pairs, so the whole pipeline can be reproduced from the seed alone.
//!
//! Draw order for [`sample_mixture`]: first `m` uniforms choose every
//! sample's component, then samples are generated column by column.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};

use crate::coding::DataMatrix;
use crate::error::{Error, Result};
use crate::linalg;

/// Portable random stream with uniform and Box–Muller normal draws.
#[derive(Debug, Clone)]
pub struct Rng {
    inner: Xoshiro256PlusPlus,
    spare_normal: Option<f64>,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: Xoshiro256PlusPlus::seed_from_u64(seed),
            spare_normal: None,
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on `[lo, hi)`.
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in `0..k` (`k > 0`).
    pub fn below(&mut self, k: usize) -> usize {
        ((self.uniform() * k as f64) as usize).min(k - 1)
    }

    /// Standard normal.
    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.spare_normal = Some(r * theta.sin());
        r * theta.cos()
    }

    pub fn normal_vector(&mut self, len: usize) -> DVector<f64> {
        DVector::from_fn(len, |_, _| self.normal())
    }

    pub fn normal_matrix(&mut self, rows: usize, cols: usize) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(rows, cols);
        for j in 0..cols {
            for i in 0..rows {
                out[(i, j)] = self.normal();
            }
        }
        out
    }

    /// Draws a component index from (non-negative, normalized) weights.
    pub fn categorical(&mut self, weights: &[f64]) -> usize {
        let u = self.uniform();
        let mut acc = 0.0;
        for (j, &w) in weights.iter().enumerate() {
            acc += w;
            if u < acc {
                return j;
            }
        }
        weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
    }

    /// `k` distinct indices from `0..m`, via a partial Fisher–Yates shuffle.
    pub fn choose_distinct(&mut self, m: usize, k: usize) -> Vec<usize> {
        let mut pool: Vec<usize> = (0..m).collect();
        for i in 0..k.min(m) {
            let j = i + self.below(m - i);
            pool.swap(i, j);
        }
        pool.truncate(k.min(m));
        pool
    }

    /// Haar-distributed random orthogonal `n × n` matrix.
    pub fn orthogonal(&mut self, n: usize) -> DMatrix<f64> {
        let g = self.normal_matrix(n, n);
        let qr = g.qr();
        let (mut q, r) = qr.unpack();
        for j in 0..n {
            if r[(j, j)] < 0.0 {
                let mut col = q.column_mut(j);
                col *= -1.0;
            }
        }
        q
    }
}

/// How samples of one component are spread around its mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ComponentShape {
    /// Full covariance (rows of an `n × n` PSD matrix); may be singular.
    Gaussian { covariance: Vec<Vec<f64>> },
    /// `basis · (scale · z) + noise · e`, basis given as `n` rows of `d_j` entries
    /// with orthonormal columns.
    Subspace {
        basis: Vec<Vec<f64>>,
        scale: f64,
        #[serde(default)]
        noise: f64,
    },
    /// A circle of `radius` in the first two coordinates plus isotropic noise.
    Ring {
        radius: f64,
        #[serde(default)]
        noise: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub mean: Vec<f64>,
    #[serde(flatten)]
    pub shape: ComponentShape,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureSpec {
    pub components: Vec<MixtureComponent>,
    #[serde(default)]
    pub seed: u64,
}

fn rows_to_matrix(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if nrows == 0 || ncols == 0 {
        return Err(Error::InvalidSpec(format!("{what} is empty")));
    }
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::InvalidSpec(format!("{what} has ragged rows")));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

enum Sampler {
    Affine { mean: DVector<f64>, factor: DMatrix<f64> },
    Subspace { mean: DVector<f64>, basis: DMatrix<f64>, scale: f64, noise: f64 },
    Ring { mean: DVector<f64>, radius: f64, noise: f64 },
}

impl Sampler {
    fn draw(&self, rng: &mut Rng) -> DVector<f64> {
        match self {
            Sampler::Affine { mean, factor } => mean + factor * rng.normal_vector(factor.ncols()),
            Sampler::Subspace { mean, basis, scale, noise } => {
                let inner = rng.normal_vector(basis.ncols()) * *scale;
                let ambient = rng.normal_vector(mean.len()) * *noise;
                mean + basis * inner + ambient
            }
            Sampler::Ring { mean, radius, noise } => {
                let theta = rng.uniform_in(0.0, 2.0 * std::f64::consts::PI);
                let mut x = mean.clone();
                x[0] += radius * theta.cos();
                x[1] += radius * theta.sin();
                x + rng.normal_vector(mean.len()) * *noise
            }
        }
    }
}

impl MixtureSpec {
    /// Ambient dimension (length of the first component mean).
    pub fn dim(&self) -> usize {
        self.components.first().map_or(0, |c| c.mean.len())
    }

    pub fn validate(&self) -> Result<()> {
        self.samplers().map(|_| ())
    }

    fn samplers(&self) -> Result<Vec<Sampler>> {
        if self.components.is_empty() {
            return Err(Error::InvalidSpec("no components".into()));
        }
        let n = self.dim();
        if n == 0 {
            return Err(Error::InvalidSpec("component mean is empty".into()));
        }
        let total: f64 = self.components.iter().map(|c| c.weight).sum();
        if self.components.iter().any(|c| !(c.weight >= 0.0) || !c.weight.is_finite()) {
            return Err(Error::InvalidSpec("weights must be finite and non-negative".into()));
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidSpec(format!("weights sum to {total}, expected 1")));
        }
        self.components
            .iter()
            .enumerate()
            .map(|(j, c)| {
                if c.mean.len() != n {
                    return Err(Error::InvalidSpec(format!(
                        "component {j} mean has length {}, expected {n}",
                        c.mean.len()
                    )));
                }
                if c.mean.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidSpec(format!("component {j} mean is not finite")));
                }
                let mean = DVector::from_column_slice(&c.mean);
                match &c.shape {
                    ComponentShape::Gaussian { covariance } => {
                        let cov = rows_to_matrix(covariance, "covariance")?;
                        if cov.nrows() != n || cov.ncols() != n {
                            return Err(Error::InvalidSpec(format!(
                                "component {j} covariance must be {n}x{n}"
                            )));
                        }
                        linalg::check_symmetric(&cov, 1e-12)
                            .map_err(|e| Error::InvalidSpec(format!("component {j}: {e}")))?;
                        let eig = SymmetricEigen::new(linalg::symmetrize(&cov));
                        let max = eig.eigenvalues.max();
                        if eig.eigenvalues.min() < -linalg::PSD_TOLERANCE * max.max(1.0) {
                            return Err(Error::InvalidSpec(format!(
                                "component {j} covariance is not PSD"
                            )));
                        }
                        let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
                        let factor = &eig.eigenvectors * DMatrix::from_diagonal(&roots);
                        Ok(Sampler::Affine { mean, factor })
                    }
                    ComponentShape::Subspace { basis, scale, noise } => {
                        let basis = rows_to_matrix(basis, "basis")?;
                        if basis.nrows() != n {
                            return Err(Error::InvalidSpec(format!(
                                "component {j} basis must have {n} rows"
                            )));
                        }
                        let gram = basis.transpose() * &basis;
                        let off = (gram - DMatrix::identity(basis.ncols(), basis.ncols())).amax();
                        if off > 1e-9 {
                            return Err(Error::InvalidSpec(format!(
                                "component {j} basis is not orthonormal ({off:e})"
                            )));
                        }
                        if !(*scale >= 0.0) || !(*noise >= 0.0) {
                            return Err(Error::InvalidSpec(format!(
                                "component {j} scale and noise must be non-negative"
                            )));
                        }
                        Ok(Sampler::Subspace { mean, basis, scale: *scale, noise: *noise })
                    }
                    ComponentShape::Ring { radius, noise } => {
                        if n < 2 {
                            return Err(Error::InvalidSpec("ring needs dimension >= 2".into()));
                        }
                        if !(*radius >= 0.0) || !(*noise >= 0.0) {
                            return Err(Error::InvalidSpec(format!(
                                "component {j} radius and noise must be non-negative"
                            )));
                        }
                        Ok(Sampler::Ring { mean, radius: *radius, noise: *noise })
                    }
                }
            })
            .collect()
    }

    /// Two concentric 2-D rings with equal weights.
    pub fn two_rings(inner: f64, outer: f64, noise: f64, seed: u64) -> Self {
        let ring = |radius| MixtureComponent {
            mean: vec![0.0, 0.0],
            shape: ComponentShape::Ring { radius, noise },
            weight: 0.5,
        };
        Self {
            components: vec![ring(inner), ring(outer)],
            seed,
        }
    }

    /// Gaussian components with diagonal covariances.
    pub fn diagonal_gaussians(means: &[Vec<f64>], variances: &[Vec<f64>], seed: u64) -> Self {
        let k = means.len();
        let components = means
            .iter()
            .zip(variances)
            .map(|(mean, var)| MixtureComponent {
                mean: mean.clone(),
                shape: ComponentShape::Gaussian {
                    covariance: (0..var.len())
                        .map(|i| (0..var.len()).map(|j| if i == j { var[i] } else { 0.0 }).collect())
                        .collect(),
                },
                weight: 1.0 / k as f64,
            })
            .collect();
        Self { components, seed }
    }
}

/// Draws `m` samples; returns the data and each sample's component index.
pub fn sample_mixture(spec: &MixtureSpec, m: usize) -> Result<(DataMatrix, Vec<usize>)> {
    if m == 0 {
        return Err(Error::InvalidSpec("sample count must be positive".into()));
    }
    let samplers = spec.samplers()?;
    let weights: Vec<f64> = spec.components.iter().map(|c| c.weight).collect();
    let mut rng = Rng::new(spec.seed);
    let labels: Vec<usize> = (0..m).map(|_| rng.categorical(&weights)).collect();
    let columns: Vec<DVector<f64>> = labels.iter().map(|&j| samplers[j].draw(&mut rng)).collect();
    Ok((DataMatrix::from_columns(&columns)?, labels))
}

/// Replaces `⌊fraction · m⌋` random columns by uniform draws from `[-bound, bound]ⁿ`.
///
/// Returns the corrupted data and a mask marking the replaced columns.
pub fn add_outliers(
    w: &DataMatrix,
    fraction: f64,
    bound: f64,
    seed: u64,
) -> Result<(DataMatrix, Vec<bool>)> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::InvalidInput(format!("outlier fraction {fraction} not in [0, 1)")));
    }
    if !(bound > 0.0) || !bound.is_finite() {
        return Err(Error::InvalidInput(format!("outlier bound {bound} must be positive")));
    }
    let m = w.m();
    let count = (fraction * m as f64).floor() as usize;
    let mut rng = Rng::new(seed);
    let chosen = rng.choose_distinct(m, count);
    let mut data = w.as_matrix().clone();
    let mut mask = vec![false; m];
    for &i in &chosen {
        mask[i] = true;
        for r in 0..w.n() {
            data[(r, i)] = rng.uniform_in(-bound, bound);
        }
    }
    Ok((DataMatrix::new(data)?, mask))
}
