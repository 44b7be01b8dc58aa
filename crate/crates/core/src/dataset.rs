//! Dataset container and the two dataset metrics everything else is built on.
//!
//! Rows live in the unit Euclidean ball. Missing entries are an explicit
//! per-cell mask, never a sentinel value; metric operations refuse masked
//! inputs rather than guessing.

use crate::error::{Error, Result};
use nalgebra::DVector;
use std::path::Path;

const BALL_TOL: f64 = 1e-9;

/// An n x d real matrix of records, with an explicit missing-entry mask and
/// optional per-row labels. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetMatrix {
    rows: Vec<DVector<f64>>,
    missing: Vec<Vec<bool>>,
    labels: Option<Vec<f64>>,
}

impl DatasetMatrix {
    /// Build a complete (no missing entries) dataset. Rows must lie in the
    /// unit ball.
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        let missing = rows.iter().map(|r| vec![false; r.len()]).collect();
        Self::with_missing(rows, missing, None).map_err(|e| match e {
            Error::Dimension(m) if n == 0 => Error::InvalidData(m),
            other => other,
        })
    }

    /// Build a dataset with a missing-entry mask and optional labels.
    pub fn with_missing(
        rows: Vec<Vec<f64>>,
        missing: Vec<Vec<bool>>,
        labels: Option<Vec<f64>>,
    ) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidData("need at least one row".into()));
        }
        let d = rows[0].len();
        if d == 0 {
            return Err(Error::InvalidData("need at least one feature".into()));
        }
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::Dimension("ragged rows".into()));
        }
        if missing.len() != rows.len() || missing.iter().any(|m| m.len() != d) {
            return Err(Error::Dimension(
                "missing mask shape does not match rows".into(),
            ));
        }
        if let Some(l) = &labels {
            if l.len() != rows.len() {
                return Err(Error::Dimension("label count does not match rows".into()));
            }
        }
        for (i, (r, m)) in rows.iter().zip(&missing).enumerate() {
            let sq: f64 = r
                .iter()
                .zip(m.iter())
                .filter(|(_, &miss)| !miss)
                .map(|(v, _)| v * v)
                .sum();
            if !sq.is_finite() {
                return Err(Error::InvalidData(format!(
                    "row {i} has non-finite entries"
                )));
            }
            if sq > 1.0 + BALL_TOL {
                return Err(Error::InvalidData(format!(
                    "row {i} has norm {:.6} > 1; records must lie in the unit ball",
                    sq.sqrt()
                )));
            }
        }
        Ok(Self {
            rows: rows.into_iter().map(DVector::from_vec).collect(),
            missing,
            labels,
        })
    }

    /// Construct without the unit-ball check. Used for the outputs of
    /// transformations (scaling, imputation) that legitimately leave the ball.
    pub fn from_transformed(
        rows: Vec<DVector<f64>>,
        missing: Vec<Vec<bool>>,
        labels: Option<Vec<f64>>,
    ) -> Self {
        debug_assert!(!rows.is_empty());
        debug_assert_eq!(rows.len(), missing.len());
        Self {
            rows,
            missing,
            labels,
        }
    }

    /// Scale rows with norm > 1 back onto the sphere (ingest option).
    pub fn new_normalized(mut rows: Vec<Vec<f64>>) -> Result<Self> {
        for r in &mut rows {
            let norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 1.0 {
                for v in r.iter_mut() {
                    *v /= norm;
                }
            }
        }
        Self::new(rows)
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn d(&self) -> usize {
        self.rows[0].len()
    }

    pub fn row(&self, i: usize) -> &DVector<f64> {
        &self.rows[i]
    }

    pub fn rows(&self) -> &[DVector<f64>] {
        &self.rows
    }

    pub fn mask(&self) -> &[Vec<bool>] {
        &self.missing
    }

    pub fn is_missing(&self, i: usize, j: usize) -> bool {
        self.missing[i][j]
    }

    pub fn has_missing(&self) -> bool {
        self.missing.iter().any(|m| m.iter().any(|&b| b))
    }

    /// Total count of masked cells.
    pub fn missing_count(&self) -> usize {
        self.missing
            .iter()
            .map(|m| m.iter().filter(|&&b| b).count())
            .sum()
    }

    pub fn labels(&self) -> Option<&[f64]> {
        self.labels.as_deref()
    }

    /// Same rows, labels dropped.
    pub fn without_labels(&self) -> Self {
        Self {
            rows: self.rows.clone(),
            missing: self.missing.clone(),
            labels: None,
        }
    }

    /// Replace one row (by value, keeping its mask), producing a neighboring
    /// dataset. The new row must respect the unit ball on unmasked cells.
    pub fn replace_row(&self, i: usize, row: Vec<f64>) -> Result<Self> {
        if i >= self.n() {
            return Err(Error::Input(format!("row index {i} out of range")));
        }
        if row.len() != self.d() {
            return Err(Error::Dimension("replacement row has wrong width".into()));
        }
        let sq: f64 = row
            .iter()
            .zip(&self.missing[i])
            .filter(|(_, &m)| !m)
            .map(|(v, _)| v * v)
            .sum();
        if sq > 1.0 + BALL_TOL {
            return Err(Error::InvalidData(
                "replacement row leaves the unit ball".into(),
            ));
        }
        let mut out = self.clone();
        out.rows[i] = DVector::from_vec(row);
        Ok(out)
    }

    fn require_same_shape(&self, other: &Self) -> Result<()> {
        if self.n() != other.n() || self.d() != other.d() {
            return Err(Error::Dimension(format!(
                "shape mismatch: {}x{} vs {}x{}",
                self.n(),
                self.d(),
                other.n(),
                other.d()
            )));
        }
        Ok(())
    }

    /// Read from CSV: header row, empty cell = missing, optional trailing
    /// `label` column. `normalize` rescales out-of-ball rows onto the sphere.
    pub fn read_csv(path: &Path, normalize: bool) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_path(path)?;
        let headers = reader.headers()?.clone();
        let has_label = headers
            .iter()
            .next_back()
            .map(|h| h.trim().eq_ignore_ascii_case("label"))
            .unwrap_or(false);
        let width = headers.len();
        let d = if has_label { width - 1 } else { width };
        if d == 0 {
            return Err(Error::InvalidData("no feature columns".into()));
        }

        let mut rows = Vec::new();
        let mut missing = Vec::new();
        let mut labels = Vec::new();
        for (ln, record) in reader.records().enumerate() {
            let record = record?;
            if record.len() != width {
                return Err(Error::Dimension(format!("row {ln} has wrong column count")));
            }
            let mut row = Vec::with_capacity(d);
            let mut mask = Vec::with_capacity(d);
            for j in 0..d {
                let cell = record[j].trim();
                if cell.is_empty() {
                    row.push(0.0);
                    mask.push(true);
                } else {
                    let v: f64 = cell
                        .parse()
                        .map_err(|_| Error::InvalidData(format!("row {ln} col {j}: bad number")))?;
                    row.push(v);
                    mask.push(false);
                }
            }
            if has_label {
                let cell = record[d].trim();
                if cell.is_empty() {
                    return Err(Error::InvalidData(format!("row {ln}: empty label")));
                }
                labels.push(
                    cell.parse::<f64>()
                        .map_err(|_| Error::InvalidData(format!("row {ln}: bad label")))?,
                );
            }
            rows.push(row);
            missing.push(mask);
        }
        if normalize {
            for (r, m) in rows.iter_mut().zip(&missing) {
                let sq: f64 = r
                    .iter()
                    .zip(m)
                    .filter(|(_, &miss)| !miss)
                    .map(|(v, _)| v * v)
                    .sum();
                if sq > 1.0 {
                    let norm = sq.sqrt();
                    for v in r.iter_mut() {
                        *v /= norm;
                    }
                }
            }
        }
        Self::with_missing(rows, missing, if has_label { Some(labels) } else { None })
    }

    /// Write as CSV with generated `f0..f{d-1}` headers (and `label` if present).
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut writer = csv::Writer::from_path(path)?;
        let mut header: Vec<String> = (0..self.d()).map(|j| format!("f{j}")).collect();
        if self.labels.is_some() {
            header.push("label".into());
        }
        writer.write_record(&header)?;
        for i in 0..self.n() {
            let mut rec: Vec<String> = (0..self.d())
                .map(|j| {
                    if self.missing[i][j] {
                        String::new()
                    } else {
                        format!("{}", self.rows[i][j])
                    }
                })
                .collect();
            if let Some(l) = &self.labels {
                rec.push(format!("{}", l[i]));
            }
            writer.write_record(&rec)?;
        }
        writer.flush()?;
        Ok(())
    }
}

/// Sum over rows of the Euclidean distance between corresponding rows.
pub fn d12_distance(a: &DatasetMatrix, b: &DatasetMatrix) -> Result<f64> {
    a.require_same_shape(b)?;
    if a.has_missing() || b.has_missing() {
        return Err(Error::MissingData("d12 requires complete datasets".into()));
    }
    Ok(a.rows()
        .iter()
        .zip(b.rows())
        .map(|(x, y)| (x - y).norm())
        .sum())
}

/// Count of rows where the two datasets differ in any coordinate or mask bit.
pub fn hamming_distance(a: &DatasetMatrix, b: &DatasetMatrix) -> Result<usize> {
    a.require_same_shape(b)?;
    Ok((0..a.n())
        .filter(|&i| a.row(i) != b.row(i) || a.mask()[i] != b.mask()[i])
        .count())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn complete(rows: Vec<Vec<f64>>) -> DatasetMatrix {
        DatasetMatrix::new(rows).unwrap()
    }

    #[test]
    fn rejects_out_of_ball_rows() {
        assert!(DatasetMatrix::new(vec![vec![0.9, 0.9]]).is_err());
        assert!(DatasetMatrix::new(vec![vec![0.6, 0.8]]).is_ok());
    }

    #[test]
    fn normalization_rescales() {
        let ds = DatasetMatrix::new_normalized(vec![vec![3.0, 4.0], vec![0.1, 0.1]]).unwrap();
        assert!((ds.row(0).norm() - 1.0).abs() < 1e-12);
        assert!((ds.row(1)[0] - 0.1).abs() < 1e-12);
    }

    #[test]
    fn masked_norm_check_ignores_missing_cells() {
        // the masked cell's stored value is irrelevant
        let ds = DatasetMatrix::with_missing(vec![vec![0.9, 5.0]], vec![vec![false, true]], None)
            .unwrap();
        assert!(ds.is_missing(0, 1));
    }

    #[test]
    fn d12_identical_is_zero() {
        let a = complete(vec![vec![0.1, 0.2], vec![0.3, 0.0]]);
        assert_eq!(d12_distance(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn d12_unit_vector_rows() {
        // two rows each displaced by a unit vector
        let a = complete(vec![vec![0.0, 0.0], vec![0.0, 0.0]]);
        let b = complete(vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert!((d12_distance(&a, &b).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn d12_matches_rowwise_oracle() {
        let mut rng = crate::sampling::rng_from_seed(3);
        for _ in 0..20 {
            let mk = |rng: &mut rand_chacha::ChaCha8Rng| {
                (0..4)
                    .map(|_| {
                        let v: Vec<f64> = (0..3)
                            .map(|_| rand::Rng::gen_range(rng, -0.5..0.5))
                            .collect();
                        v
                    })
                    .collect::<Vec<_>>()
            };
            let ra = mk(&mut rng);
            let rb = mk(&mut rng);
            // independent per-row loop
            let mut expect = 0.0;
            for (x, y) in ra.iter().zip(&rb) {
                let mut sq = 0.0;
                for (u, v) in x.iter().zip(y) {
                    sq += (u - v) * (u - v);
                }
                expect += sq.sqrt();
            }
            let got = d12_distance(&complete(ra), &complete(rb)).unwrap();
            assert!((got - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn d12_rejects_masked_and_mismatched() {
        let a = complete(vec![vec![0.1, 0.2]]);
        let b = complete(vec![vec![0.1, 0.2], vec![0.0, 0.0]]);
        assert!(matches!(d12_distance(&a, &b), Err(Error::Dimension(_))));
        let m = DatasetMatrix::with_missing(vec![vec![0.1, 0.0]], vec![vec![false, true]], None)
            .unwrap();
        assert!(matches!(d12_distance(&m, &m), Err(Error::MissingData(_))));
    }

    #[test]
    fn hamming_counts_rows() {
        let a = complete(vec![vec![0.1, 0.2], vec![0.3, 0.0], vec![0.0, 0.0]]);
        assert_eq!(hamming_distance(&a, &a).unwrap(), 0);
        let b = a.replace_row(1, vec![0.25, 0.0]).unwrap();
        assert_eq!(hamming_distance(&a, &b).unwrap(), 1);
        let mut c = a.clone();
        for i in 0..3 {
            c = c
                .replace_row(i, vec![0.01 * (i as f64 + 1.0), 0.0])
                .unwrap();
        }
        assert_eq!(hamming_distance(&a, &c).unwrap(), 3);
    }

    #[test]
    fn csv_roundtrip_with_missing_and_labels() {
        let dir = std::env::temp_dir().join("predp_csv_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("ds.csv");
        let ds = DatasetMatrix::with_missing(
            vec![vec![0.5, 0.0], vec![0.1, 0.2]],
            vec![vec![false, true], vec![false, false]],
            Some(vec![1.0, 0.0]),
        )
        .unwrap();
        ds.write_csv(&path).unwrap();
        let back = DatasetMatrix::read_csv(&path, false).unwrap();
        assert_eq!(back, ds);
    }

    proptest! {
        // triangle inequality of d12 on random 5x3 matrices
        #[test]
        fn d12_triangle_inequality(seed in 0u64..200) {
            let mut rng = crate::sampling::rng_from_seed(seed);
            let mk = |rng: &mut rand_chacha::ChaCha8Rng| {
                let rows: Vec<Vec<f64>> = (0..5)
                    .map(|_| (0..3).map(|_| rand::Rng::gen_range(rng, -0.5..0.5)).collect())
                    .collect();
                complete(rows)
            };
            let a = mk(&mut rng);
            let b = mk(&mut rng);
            let c = mk(&mut rng);
            let ab = d12_distance(&a, &b).unwrap();
            let bc = d12_distance(&b, &c).unwrap();
            let ac = d12_distance(&a, &c).unwrap();
            prop_assert!(ac <= ab + bc + 1e-12);
        }

        // hamming 1 implies d12 at most the ball diameter
        #[test]
        fn single_swap_diameter_bound(seed in 0u64..200) {
            let mut rng = crate::sampling::rng_from_seed(seed.wrapping_add(1000));
            let rows: Vec<Vec<f64>> = (0..5)
                .map(|_| (0..3).map(|_| rand::Rng::gen_range(&mut rng, -0.5..0.5)).collect())
                .collect();
            let a = complete(rows);
            let b = a
                .replace_row(2, (0..3).map(|_| rand::Rng::gen_range(&mut rng, -0.5..0.5)).collect())
                .unwrap();
            prop_assert!(hamming_distance(&a, &b).unwrap() <= 1);
            prop_assert!(d12_distance(&a, &b).unwrap() <= 2.0 + 1e-12);
        }
    }
}
