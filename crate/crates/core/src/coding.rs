//! Lossy coding rate and coding length of finite sample sets.
//!
//! A sample set is an `n × m` matrix `W` whose columns are samples. Coding
//! `W` up to mean squared error `ε²` costs
//!
//! ```text
//! R(W) = ½ log₂ det(I + n/(m ε²) · W Wᵀ)      bits per vector
//! L(W) = (m + n) · R(W)                       bits in total
//! ```
//!
//! All log-determinants are taken on whichever of `W Wᵀ` (`n × n`) and
//! `Wᵀ W` (`m × m`) is smaller; both carry the same non-zero spectrum.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// An `n × m` real sample matrix; columns are samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DMatrix<f64>", into = "DMatrix<f64>")]
pub struct DataMatrix(DMatrix<f64>);

impl DataMatrix {
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(Error::InvalidInput(format!(
                "sample matrix must be at least 1x1, got {}x{}",
                data.nrows(),
                data.ncols()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            let (row, col) = (pos % data.nrows(), pos / data.nrows());
            return Err(Error::InvalidInput(format!(
                "non-finite entry at row {row}, column {col}"
            )));
        }
        Ok(Self(data))
    }

    /// Builds a matrix from sample vectors of equal length.
    pub fn from_columns(columns: &[DVector<f64>]) -> Result<Self> {
        let n = columns
            .first()
            .ok_or_else(|| Error::InvalidInput("no samples".into()))?
            .len();
        if let Some(bad) = columns.iter().find(|c| c.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: bad.len(),
            });
        }
        Self::new(DMatrix::from_columns(columns))
    }

    /// Ambient dimension.
    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    /// Number of samples.
    pub fn m(&self) -> usize {
        self.0.ncols()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn column(&self, i: usize) -> DVector<f64> {
        self.0.column(i).into_owned()
    }

    /// Columns at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> DMatrix<f64> {
        self.0.select_columns(indices)
    }

    /// Appends one sample as a new last column.
    pub fn with_column(&self, x: &DVector<f64>) -> Result<Self> {
        if x.len() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                found: x.len(),
            });
        }
        let m = self.m();
        let mut out = self.0.clone().insert_column(m, 0.0);
        out.set_column(m, x);
        Self::new(out)
    }
}

impl TryFrom<DMatrix<f64>> for DataMatrix {
    type Error = Error;

    fn try_from(value: DMatrix<f64>) -> Result<Self> {
        Self::new(value)
    }
}

impl From<DataMatrix> for DMatrix<f64> {
    fn from(value: DataMatrix) -> Self {
        value.0
    }
}

/// Allowable RMS reconstruction error `ε > 0`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Distortion(f64);

impl Distortion {
    pub fn new(epsilon: f64) -> Result<Self> {
        if epsilon.is_finite() && epsilon > 0.0 {
            Ok(Self(epsilon))
        } else {
            Err(Error::InvalidDistortion(epsilon))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn squared(self) -> f64 {
        self.0 * self.0
    }
}

impl TryFrom<f64> for Distortion {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        Self::new(value)
    }
}

impl From<Distortion> for f64 {
    fn from(value: Distortion) -> Self {
        value.0
    }
}

/// Sample mean, biased (1/m) covariance and sample count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianMoments {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
    pub count: usize,
}

impl GaussianMoments {
    pub fn new(mean: DVector<f64>, covariance: DMatrix<f64>, count: usize) -> Result<Self> {
        if count == 0 {
            return Err(Error::InvalidInput("moment count must be positive".into()));
        }
        if covariance.nrows() != mean.len() {
            return Err(Error::DimensionMismatch {
                expected: mean.len(),
                found: covariance.nrows(),
            });
        }
        if mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("mean has non-finite entries".into()));
        }
        linalg::check_symmetric(&covariance, 1e-12)?;
        linalg::psd_eigenvalues(&covariance)?;
        Ok(Self {
            mean,
            covariance,
            count,
        })
    }

    /// Empirical moments of the columns of `x`.
    pub fn from_data(x: &DataMatrix) -> Self {
        let (centered, mean) = linalg::center_columns(x.as_matrix());
        let covariance = linalg::symmetrize(&(&centered * centered.transpose())) / x.m() as f64;
        Self {
            mean,
            covariance,
            count: x.m(),
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// A symmetric PSD matrix of inner products (or kernel values) between `m`
/// samples, plus the ambient dimension used in the `n/ε²` scaling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GramMatrix {
    gram: DMatrix<f64>,
    ambient_dim: usize,
}

impl GramMatrix {
    pub fn new(gram: DMatrix<f64>, ambient_dim: usize) -> Result<Self> {
        if ambient_dim == 0 {
            return Err(Error::InvalidInput("ambient dimension must be positive".into()));
        }
        if gram.nrows() == 0 {
            return Err(Error::InvalidInput("Gram matrix must be at least 1x1".into()));
        }
        linalg::check_symmetric(&gram, 1e-12)?;
        Ok(Self { gram, ambient_dim })
    }

    /// `WᵀW` with ambient dimension `n`.
    pub fn from_data(w: &DataMatrix) -> Self {
        let gram = linalg::symmetrize(&(w.as_matrix().transpose() * w.as_matrix()));
        Self {
            gram,
            ambient_dim: w.n(),
        }
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    /// Number of samples `m`.
    pub fn size(&self) -> usize {
        self.gram.nrows()
    }
}

/// Bits per vector: `½ log₂ det(I + n/(m ε²) W Wᵀ)`.
pub fn coding_rate(w: &DataMatrix, eps: Distortion) -> f64 {
    let alpha = w.n() as f64 / (w.m() as f64 * eps.squared());
    0.5 * linalg::log2_det_identity_plus_outer(w.as_matrix(), alpha)
}

/// Total bits for `m` zero-mean vectors: `(m + n) · R(W)`.
pub fn coding_length(w: &DataMatrix, eps: Distortion) -> f64 {
    (w.m() + w.n()) as f64 * coding_rate(w, eps)
}

/// Bits for the deviations about the sample mean, excluding the mean itself.
///
/// Equals `((m+n)/2) log₂ det(I + n/ε² Σ̂)` with the biased covariance `Σ̂`.
pub fn centered_coding_length(x: &DataMatrix, eps: Distortion) -> f64 {
    let (n, m) = (x.n(), x.m());
    let (centered, _) = linalg::center_columns(x.as_matrix());
    let alpha = n as f64 / (m as f64 * eps.squared());
    0.5 * (m + n) as f64 * linalg::log2_det_identity_plus_outer(&centered, alpha)
}

/// Bits to code the sample mean: `(n/2) log₂(1 + μᵀμ/ε²)`.
pub fn mean_coding_length(mean: &DVector<f64>, eps: Distortion) -> f64 {
    0.5 * mean.len() as f64 * (mean.norm_squared() / eps.squared()).ln_1p() / std::f64::consts::LN_2
}

/// Coding length of a sample set with non-zero mean: deviations about the
/// mean plus the mean vector.
pub fn coding_length_with_mean(x: &DataMatrix, eps: Distortion) -> f64 {
    let mean = x.as_matrix().column_sum() / x.m() as f64;
    centered_coding_length(x, eps) + mean_coding_length(&mean, eps)
}

/// Zero-mean coding length computed from inner products only:
/// `((m + n)/2) log₂ det(I_m + n/(m ε²) K)`.
pub fn kernel_coding_length(k: &GramMatrix, eps: Distortion) -> Result<f64> {
    let m = k.size();
    let n = k.ambient_dim();
    let alpha = n as f64 / (m as f64 * eps.squared());
    Ok(0.5 * (m + n) as f64 * linalg::log2_det_identity_plus(k.as_matrix(), alpha)?)
}

/// Distortion-softened dimension `tr(Σ (Σ + ε²/n I)⁻¹) = Σᵢ λᵢ / (ε²/n + λᵢ)`.
pub fn effective_dimension(sigma: &DMatrix<f64>, eps: Distortion) -> Result<f64> {
    linalg::check_symmetric(sigma, 1e-12)?;
    let n = sigma.nrows();
    let shift = eps.squared() / n as f64;
    let eig = linalg::psd_eigenvalues(sigma)?;
    Ok(eig.iter().map(|&l| l / (shift + l)).sum())
}
