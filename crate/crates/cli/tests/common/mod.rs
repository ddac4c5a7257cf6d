#![allow(dead_code)]

use std::path::Path;
use std::process::Command;

use nalgebra::DMatrix;
use ratecode::{DataMatrix, Distortion};

/// `log₂ |det A|` by Gaussian elimination with partial pivoting.
pub fn lu_log2_det(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut a: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| a[(i, j)]).collect()).collect();
    let mut total = 0.0;
    for k in 0..n {
        let p = (k..n).max_by(|&x, &y| a[x][k].abs().total_cmp(&a[y][k].abs())).unwrap();
        a.swap(k, p);
        let pivot = a[k][k];
        total += pivot.abs().log2();
        for i in k + 1..n {
            let f = a[i][k] / pivot;
            for j in k..n {
                a[i][j] -= f * a[k][j];
            }
        }
    }
    total
}

/// `(m+n)/2 · log₂ det(I + n/(m ε²) W Wᵀ)` on the `n × n` side.
pub fn length_outer(w: &DMatrix<f64>, eps: f64) -> f64 {
    let (n, m) = w.shape();
    let a = DMatrix::identity(n, n) + w * w.transpose() * (n as f64 / (m as f64 * eps * eps));
    (m + n) as f64 / 2.0 * lu_log2_det(&a)
}

/// Same length on the `m × m` side.
pub fn length_inner(w: &DMatrix<f64>, eps: f64) -> f64 {
    let (n, m) = w.shape();
    let a = DMatrix::identity(m, m) + w.transpose() * w * (n as f64 / (m as f64 * eps * eps));
    (m + n) as f64 / 2.0 * lu_log2_det(&a)
}

/// Coding length with mean from the explicit covariance and mean terms.
pub fn length_with_mean(x: &DMatrix<f64>, eps: f64) -> f64 {
    let (n, m) = x.shape();
    let mut mu = vec![0.0; n];
    for j in 0..m {
        for i in 0..n {
            mu[i] += x[(i, j)] / m as f64;
        }
    }
    let sigma = DMatrix::from_fn(n, n, |a, b| {
        (0..m).map(|j| (x[(a, j)] - mu[a]) * (x[(b, j)] - mu[b])).sum::<f64>() / m as f64
    });
    let a = DMatrix::identity(n, n) + sigma * (n as f64 / (eps * eps));
    let mu2: f64 = mu.iter().map(|v| v * v).sum();
    (m + n) as f64 / 2.0 * lu_log2_det(&a) + n as f64 / 2.0 * (1.0 + mu2 / (eps * eps)).log2()
}

pub fn eps(v: f64) -> Distortion {
    Distortion::new(v).unwrap()
}

pub fn data(w: DMatrix<f64>) -> DataMatrix {
    DataMatrix::new(w).unwrap()
}

/// Runs the built binary; panics with its stderr on failure.
pub fn ratecode(dir: &Path, args: &[&str]) -> std::process::Output {
    let out = Command::new(env!("CARGO_BIN_EXE_ratecode"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap();
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

/// The report at `path` with run timings removed.
pub fn report_without_timings(path: &Path) -> serde_json::Value {
    let mut v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    v.as_object_mut().unwrap().remove("timings");
    v
}
