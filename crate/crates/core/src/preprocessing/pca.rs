//! PCA for dimension reduction and rank reduction, plus the covariance
//! spectrum helpers shared with the propose-test-release module.

use crate::dataset::DatasetMatrix;
use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PcaMode {
    /// Rows become A_k^T x (k columns).
    Dim,
    /// Rows become A_k A_k^T x (d columns, covariance rank <= k).
    Rank,
}

/// Empirical covariance about the empirical mean, normalized by n.
pub fn covariance(data: &DatasetMatrix) -> Result<DMatrix<f64>> {
    if data.has_missing() {
        return Err(Error::MissingData(
            "covariance requires complete data".into(),
        ));
    }
    let n = data.n();
    let d = data.d();
    let mut mean = DVector::zeros(d);
    for r in data.rows() {
        mean += r;
    }
    mean /= n as f64;
    let mut cov = DMatrix::zeros(d, d);
    for r in data.rows() {
        let c = r - &mean;
        cov.syger(1.0 / n as f64, &c, &c, 1.0);
    }
    // syger fills the lower triangle; mirror it
    for i in 0..d {
        for j in (i + 1)..d {
            cov[(i, j)] = cov[(j, i)];
        }
    }
    Ok(cov)
}

/// Eigen-decomposition of a symmetric matrix, eigenvalues sorted descending,
/// each eigenvector's largest-magnitude component made positive.
pub fn sorted_eigen(sym: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let eig = sym
        .clone()
        .try_symmetric_eigen(1e-13, 10_000)
        .ok_or_else(|| Error::Numeric("eigendecomposition did not converge".into()))?;
    let d = sym.nrows();
    let mut idx: Vec<usize> = (0..d).collect();
    idx.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let values: Vec<f64> = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(d, d);
    for (col, &i) in idx.iter().enumerate() {
        let mut v = eig.eigenvectors.column(i).clone_owned();
        // deterministic sign: largest-|component| positive
        let mut lead = 0;
        for r in 1..d {
            if v[r].abs() > v[lead].abs() {
                lead = r;
            }
        }
        if v[lead] < 0.0 {
            v = -v;
        }
        vectors.set_column(col, &v);
    }
    Ok((values, vectors))
}

/// Top-k eigenvectors (columns) and the full eigenvalue spectrum of the
/// empirical covariance.
pub fn pca_components(data: &DatasetMatrix, k: usize) -> Result<(DMatrix<f64>, Vec<f64>)> {
    if k == 0 || k > data.d() {
        return Err(Error::Parameter(format!(
            "k = {k} must be in 1..={}",
            data.d()
        )));
    }
    let cov = covariance(data)?;
    let (values, vectors) = sorted_eigen(&cov)?;
    Ok((vectors.columns(0, k).clone_owned(), values))
}

/// Apply PCA with the given mode. Labels are carried through.
pub fn apply_pca(data: &DatasetMatrix, k: usize, mode: PcaMode) -> Result<DatasetMatrix> {
    let (a_k, _) = pca_components(data, k)?;
    let rows: Vec<DVector<f64>> = match mode {
        PcaMode::Dim => data.rows().iter().map(|x| a_k.transpose() * x).collect(),
        PcaMode::Rank => data
            .rows()
            .iter()
            .map(|x| &a_k * (a_k.transpose() * x))
            .collect(),
    };
    let d_out = match mode {
        PcaMode::Dim => k,
        PcaMode::Rank => data.d(),
    };
    Ok(DatasetMatrix::from_transformed(
        rows,
        vec![vec![false; d_out]; data.n()],
        data.labels().map(|l| l.to_vec()),
    ))
}

/// Gap between the k-th and (k+1)-th eigenvalues of the empirical covariance.
pub fn eigen_gap(data: &DatasetMatrix, k: usize) -> Result<f64> {
    if k == 0 || k >= data.d() {
        return Err(Error::Parameter(format!(
            "eigen gap needs 1 <= k < d = {}",
            data.d()
        )));
    }
    let cov = covariance(data)?;
    let (values, _) = sorted_eigen(&cov)?;
    Ok((values[k - 1] - values[k]).max(0.0))
}
