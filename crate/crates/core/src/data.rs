//! Row-major sample containers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Samples of a single class, stored row-major (`n` rows of `dim` values).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSamples {
    dim: usize,
    data: Vec<f64>,
}

impl ClassSamples {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidConfig("dimension must be at least 1".into()));
        }
        if data.len() % dim != 0 {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: data.len() % dim,
            });
        }
        crate::error::check_finite(&data, "class samples")?;
        Ok(Self { dim, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let dim = rows.first().map(|r| r.as_ref().len()).ok_or(Error::EmptySamples)?;
        let mut data = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::new(dim, data)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Appends rows; each must have `dim` entries.
    pub fn extend_rows<R: AsRef<[f64]>>(&mut self, rows: &[R]) -> Result<()> {
        for row in rows {
            let row = row.as_ref();
            if row.len() != self.dim {
                return Err(Error::DimensionMismatch {
                    expected: self.dim,
                    found: row.len(),
                });
            }
            crate::error::check_finite(row, "appended sample")?;
        }
        for row in rows {
            self.data.extend_from_slice(row.as_ref());
        }
        Ok(())
    }

    /// Keeps only the listed columns, in the given order.
    pub fn select_columns(&self, columns: &[usize]) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::InvalidConfig("no columns selected".into()));
        }
        if let Some(&bad) = columns.iter().find(|&&c| c >= self.dim) {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: bad + 1,
            });
        }
        let data = self
            .rows()
            .flat_map(|row| columns.iter().map(move |&c| row[c]))
            .collect();
        Self::new(columns.len(), data)
    }
}

/// A matrix of real-valued samples with integer class labels.
///
/// Labels are dense class indices `0..n_classes()`; `label_names` keeps the
/// external name of each class (for synthetic data these are `"1"`, `"2"`, ...).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    dim: usize,
    features: Vec<f64>,
    labels: Vec<usize>,
    label_names: Vec<String>,
}

impl LabeledDataset {
    pub fn new(
        dim: usize,
        features: Vec<f64>,
        labels: Vec<usize>,
        label_names: Vec<String>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidConfig("dimension must be at least 1".into()));
        }
        if features.len() != labels.len() * dim {
            return Err(Error::DimensionMismatch {
                expected: labels.len() * dim,
                found: features.len(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= label_names.len()) {
            return Err(Error::InvalidConfig(format!(
                "label index {bad} out of range for {} classes",
                label_names.len()
            )));
        }
        crate::error::check_finite(&features, "dataset features")?;
        Ok(Self {
            dim,
            features,
            labels,
            label_names,
        })
    }

    /// Builds a dataset whose class names are `"1"..="c"`.
    pub fn with_numbered_classes(
        dim: usize,
        features: Vec<f64>,
        labels: Vec<usize>,
        n_classes: usize,
    ) -> Result<Self> {
        let names = (1..=n_classes).map(|c| c.to_string()).collect();
        Self::new(dim, features, labels, names)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_classes(&self) -> usize {
        self.label_names.len()
    }

    pub fn label_names(&self) -> &[String] {
        &self.label_names
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.features.chunks_exact(self.dim)
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Rows belonging to class `class`, in dataset order.
    pub fn class_samples(&self, class: usize) -> Result<ClassSamples> {
        let data: Vec<f64> = self
            .rows()
            .zip(&self.labels)
            .filter(|(_, &l)| l == class)
            .flat_map(|(row, _)| row.iter().copied())
            .collect();
        if data.is_empty() {
            return Err(Error::TooFewSamples {
                class,
                found: 0,
                required: 1,
            });
        }
        ClassSamples::new(self.dim, data)
    }

    /// Appends `extra.len() / len()` columns per row. `extra` is row-major.
    pub fn append_columns(&self, k: usize, extra: &[f64]) -> Result<Self> {
        if extra.len() != k * self.len() {
            return Err(Error::DimensionMismatch {
                expected: k * self.len(),
                found: extra.len(),
            });
        }
        let new_dim = self.dim + k;
        let mut features = Vec::with_capacity(self.len() * new_dim);
        for (i, row) in self.rows().enumerate() {
            features.extend_from_slice(row);
            features.extend_from_slice(&extra[i * k..(i + 1) * k]);
        }
        Self::new(new_dim, features, self.labels.clone(), self.label_names.clone())
    }
}
