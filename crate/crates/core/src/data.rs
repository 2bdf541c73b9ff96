//! Training data and weight vectors.

use std::ops::Index;

use ndarray::{Array1, Array2, ArrayView1, Axis};

use crate::error::{Error, Result};

/// An `n x p` design matrix with its `n` responses.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Array2<f64>,
    responses: Array1<f64>,
    feature_names: Option<Vec<String>>,
}

impl Dataset {
    pub fn new(features: Array2<f64>, responses: Array1<f64>) -> Result<Self> {
        let (n, p) = features.dim();
        if n == 0 || p == 0 {
            return Err(Error::invalid(format!(
                "dataset must have at least one row and one column, got {n}x{p}"
            )));
        }
        if responses.len() != n {
            return Err(Error::dims("dataset responses", n, responses.len()));
        }
        if !features.iter().chain(responses.iter()).all(|v| v.is_finite()) {
            return Err(Error::invalid("dataset contains non-finite entries"));
        }
        Ok(Dataset {
            features,
            responses,
            feature_names: None,
        })
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.p() {
            return Err(Error::dims("feature names", self.p(), names.len()));
        }
        self.feature_names = Some(names);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.features.nrows()
    }

    pub fn p(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn responses(&self) -> &Array1<f64> {
        &self.responses
    }

    pub fn feature_names(&self) -> Option<&[String]> {
        self.feature_names.as_deref()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.features.row(i)
    }

    /// Copies the given rows, in the given order, into a new dataset.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Dataset> {
        if let Some(&bad) = rows.iter().find(|&&r| r >= self.n()) {
            return Err(Error::invalid(format!(
                "row index {bad} out of range for {} rows",
                self.n()
            )));
        }
        Ok(Dataset {
            features: self.features.select(Axis(0), rows),
            responses: rows.iter().map(|&r| self.responses[r]).collect(),
            feature_names: self.feature_names.clone(),
        })
    }
}

/// A length-`p` real weight vector.
///
/// The support is always derived from the stored values, so it can never
/// drift out of sync with them.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(Array1<f64>);

impl WeightVector {
    pub fn new(weights: Array1<f64>) -> Result<Self> {
        if !weights.iter().all(|w| w.is_finite()) {
            return Err(Error::invalid("weight vector contains non-finite entries"));
        }
        Ok(WeightVector(weights))
    }

    pub fn from_vec(weights: Vec<f64>) -> Result<Self> {
        Self::new(Array1::from(weights))
    }

    pub fn zeros(p: usize) -> Self {
        WeightVector(Array1::zeros(p))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_array(&self) -> &Array1<f64> {
        &self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice().expect("weight vectors are contiguous")
    }

    pub fn into_inner(self) -> Array1<f64> {
        self.0
    }

    /// Indices of the nonzero coordinates, ascending.
    pub fn support(&self) -> Vec<usize> {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, &w)| w != 0.0)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn nnz(&self) -> usize {
        self.0.iter().filter(|&&w| w != 0.0).count()
    }

    /// Returns a copy with coordinate `index` replaced by `value`.
    pub fn with_coordinate(&self, index: usize, value: f64) -> Result<Self> {
        if index >= self.len() {
            return Err(Error::invalid(format!(
                "feature index {index} out of range for p = {}",
                self.len()
            )));
        }
        if !value.is_finite() {
            return Err(Error::invalid("replacement weight is not finite"));
        }
        let mut out = self.0.clone();
        out[index] = value;
        Ok(WeightVector(out))
    }
}

impl Index<usize> for WeightVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn dataset_rejects_ragged_and_nonfinite() {
        assert!(Dataset::new(array![[1.0, 2.0]], array![1.0, 2.0]).is_err());
        assert!(Dataset::new(array![[f64::NAN]], array![1.0]).is_err());
        assert!(Dataset::new(Array2::zeros((0, 3)), Array1::zeros(0)).is_err());
        assert!(Dataset::new(array![[1.0, 2.0]], array![1.0]).is_ok());
    }

    #[test]
    fn support_tracks_values() {
        let w = WeightVector::from_vec(vec![0.0, -1.5, 0.0, 2.0]).unwrap();
        assert_eq!(w.support(), vec![1, 3]);
        let w = w.with_coordinate(1, 0.0).unwrap();
        assert_eq!(w.support(), vec![3]);
        assert!(w.with_coordinate(4, 1.0).is_err());
    }

    #[test]
    fn select_rows_keeps_order() {
        let d = Dataset::new(array![[1.0], [2.0], [3.0]], array![10.0, 20.0, 30.0]).unwrap();
        let s = d.select_rows(&[2, 0]).unwrap();
        assert_eq!(s.responses(), &array![30.0, 10.0]);
        assert_eq!(s.features(), &array![[3.0], [1.0]]);
    }
}
