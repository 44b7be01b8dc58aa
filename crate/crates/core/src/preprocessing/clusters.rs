//! Good-cluster search, approximate deduplication and quantization.
//!
//! A ball B(x, eta) around a dataset point x is a good cluster when the
//! annulus (eta, 3*eta] around x contains no dataset point, i.e. the cluster
//! is separated from the rest of the data. Membership uses the closed ball
//! (distance <= eta).

use crate::dataset::DatasetMatrix;
use crate::error::{Error, Result};
use nalgebra::DVector;

/// A qualifying ball: its center row index and all member row indices
/// (including the center).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoodCluster {
    pub center: usize,
    pub members: Vec<usize>,
}

fn require_complete(data: &DatasetMatrix, what: &str) -> Result<()> {
    if data.has_missing() {
        return Err(Error::MissingData(format!("{what} requires complete data")));
    }
    Ok(())
}

fn clusters_of(rows: &[(usize, DVector<f64>)], eta: f64) -> Vec<GoodCluster> {
    let mut out = Vec::new();
    for (ci, (cidx, center)) in rows.iter().enumerate() {
        let mut members = Vec::new();
        let mut good = true;
        for (i, (idx, row)) in rows.iter().enumerate() {
            let dist = (row - center).norm();
            if dist <= eta {
                members.push((i, *idx));
            } else if dist <= 3.0 * eta {
                good = false;
                break;
            }
        }
        let _ = ci;
        if good {
            out.push(GoodCluster {
                center: *cidx,
                members: members.into_iter().map(|(_, idx)| idx).collect(),
            });
        }
    }
    out
}

/// All good clusters of `data`, one per qualifying center, in row order.
pub fn find_good_clusters(data: &DatasetMatrix, eta: f64) -> Result<Vec<GoodCluster>> {
    require_complete(data, "good-cluster search")?;
    if !(eta > 0.0) {
        return Err(Error::Parameter("eta must be > 0".into()));
    }
    let rows: Vec<(usize, DVector<f64>)> = data.rows().iter().cloned().enumerate().collect();
    Ok(clusters_of(&rows, eta))
}

/// Pick the next cluster to process: largest membership first, ties broken by
/// the lowest center row index.
fn pick_largest(clusters: &[GoodCluster]) -> Option<&GoodCluster> {
    clusters
        .iter()
        .filter(|c| c.members.len() >= 2)
        .max_by(|a, b| {
            a.members
                .len()
                .cmp(&b.members.len())
                .then(b.center.cmp(&a.center))
        })
}

/// Deduplication: repeatedly find the largest good cluster of the current
/// dataset and drop its non-center members, until only singleton clusters
/// remain. Clusters are re-discovered after every removal. Returns per-input
/// row: `true` if the row survives.
pub fn dedup_kept_mask(data: &DatasetMatrix, eta: f64) -> Result<Vec<bool>> {
    require_complete(data, "deduplication")?;
    if !(eta > 0.0) {
        return Err(Error::Parameter("eta must be > 0".into()));
    }
    let mut alive: Vec<(usize, DVector<f64>)> = data.rows().iter().cloned().enumerate().collect();
    loop {
        let clusters = clusters_of(&alive, eta);
        let Some(target) = pick_largest(&clusters) else {
            break;
        };
        let center = target.center;
        let drop: Vec<usize> = target
            .members
            .iter()
            .copied()
            .filter(|&m| m != center)
            .collect();
        alive.retain(|(idx, _)| !drop.contains(idx));
    }
    let mut kept = vec![false; data.n()];
    for (idx, _) in &alive {
        kept[*idx] = true;
    }
    Ok(kept)
}

/// Deduplication over a complete dataset; output rows are a subset of the
/// input rows (labels follow their rows).
pub fn apply_dedup(data: &DatasetMatrix, eta: f64) -> Result<DatasetMatrix> {
    let kept = dedup_kept_mask(data, eta)?;
    let rows: Vec<DVector<f64>> = data
        .rows()
        .iter()
        .zip(&kept)
        .filter(|(_, &k)| k)
        .map(|(r, _)| r.clone())
        .collect();
    let missing = vec![vec![false; data.d()]; rows.len()];
    let labels = data.labels().map(|l| {
        l.iter()
            .zip(&kept)
            .filter(|(_, &k)| k)
            .map(|(v, _)| *v)
            .collect()
    });
    Ok(DatasetMatrix::from_transformed(rows, missing, labels))
}

/// Quantization: process the initially-found good clusters in reverse order
/// of size (ties: lowest center row index), replacing every member with the
/// cluster's representative (its center point, which every member is within
/// eta of); each row moves at most once. Row count is preserved.
pub fn apply_quantize(data: &DatasetMatrix, eta: f64) -> Result<DatasetMatrix> {
    let clusters = find_good_clusters(data, eta)?;
    let mut order: Vec<&GoodCluster> = clusters.iter().filter(|c| c.members.len() >= 2).collect();
    order.sort_by(|a, b| {
        b.members
            .len()
            .cmp(&a.members.len())
            .then(a.center.cmp(&b.center))
    });

    let mut rows: Vec<DVector<f64>> = data.rows().to_vec();
    let mut moved = vec![false; data.n()];
    for cluster in order {
        if cluster.members.iter().all(|&m| moved[m]) {
            continue;
        }
        let representative = data.row(cluster.center).clone();
        for &m in &cluster.members {
            if !moved[m] {
                rows[m] = representative.clone();
                moved[m] = true;
            }
        }
    }
    Ok(DatasetMatrix::from_transformed(
        rows,
        vec![vec![false; data.d()]; data.n()],
        data.labels().map(|l| l.to_vec()),
    ))
}
