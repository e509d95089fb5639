//! Per-class kernel posterior classifier.
//!
//! Fitting only partitions the training data by class; bandwidths are chosen
//! lazily at each query, independently for every class. A query is assigned
//! to the class maximizing `ln p̂_y + ln f̂_y(x)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{ClassSamples, LabeledDataset};
use crate::density::{log_class_density, BandwidthVector};
use crate::error::{check_finite, Error, Result};
use crate::rodeo::{local_bandwidths, RodeoParams};
use crate::selection::{select_relevant, BandwidthSample, SelectionResult};

/// Bandwidth of the fixed-kernel baseline: the unit-scale Gaussian kernel
/// `exp(−‖x − x'‖²)` written as a product of normal densities.
pub const DEFAULT_FIXED_BANDWIDTH: f64 = std::f64::consts::FRAC_1_SQRT_2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorMode {
    /// `p̂_y = n_y / n`.
    #[default]
    Empirical,
    /// `1 / c` for every class.
    Uniform,
}

/// How class densities are evaluated at a query.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictMode {
    /// Local per-coordinate bandwidths from the greedy search.
    Rodeo,
    /// One bandwidth for every coordinate and class.
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassModel {
    pub label: String,
    pub samples: ClassSamples,
    pub prior: f64,
}

impl ClassModel {
    pub fn n(&self) -> usize {
        self.samples.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitModel {
    dim: usize,
    classes: Vec<ClassModel>,
    params: RodeoParams,
    prior_mode: PriorMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    /// Winning class index.
    pub label: usize,
    /// `ln p̂_y + ln f̂_y(x)` per class.
    pub log_scores: Vec<f64>,
    /// Scores normalized to sum to one.
    pub posteriors: Vec<f64>,
    /// Bandwidths used for each class.
    pub bandwidths: Vec<BandwidthVector>,
}

/// Index of the largest score; ties go to the lowest index.
pub fn argmax_lowest(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

fn normalize_log(scores: &[f64]) -> Vec<f64> {
    let total = crate::numeric::log_sum_exp(scores);
    scores.iter().map(|s| (s - total).exp()).collect()
}

impl FitModel {
    pub fn fit(data: &LabeledDataset, params: RodeoParams) -> Result<Self> {
        Self::fit_with(data, params, PriorMode::Empirical)
    }

    pub fn fit_with(data: &LabeledDataset, params: RodeoParams, prior_mode: PriorMode) -> Result<Self> {
        params.validate()?;
        if data.is_empty() {
            return Err(Error::EmptySamples);
        }
        if data.n_classes() < 2 {
            return Err(Error::InvalidConfig(format!(
                "need at least 2 classes, got {}",
                data.n_classes()
            )));
        }
        let counts = data.class_counts();
        if let Some((class, &found)) = counts.iter().enumerate().find(|(_, &c)| c < 2) {
            return Err(Error::TooFewSamples {
                class,
                found,
                required: 2,
            });
        }
        let classes = (0..data.n_classes())
            .map(|c| {
                Ok(ClassModel {
                    label: data.label_names()[c].clone(),
                    samples: data.class_samples(c)?,
                    prior: 0.0,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut model = Self {
            dim: data.dim(),
            classes,
            params,
            prior_mode,
        };
        model.refresh_priors();
        Ok(model)
    }

    fn refresh_priors(&mut self) {
        let total: usize = self.classes.iter().map(ClassModel::n).sum();
        let c = self.classes.len() as f64;
        for class in &mut self.classes {
            class.prior = match self.prior_mode {
                PriorMode::Empirical => class.n() as f64 / total as f64,
                PriorMode::Uniform => 1.0 / c,
            };
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn classes(&self) -> &[ClassModel] {
        &self.classes
    }

    pub fn labels(&self) -> Vec<String> {
        self.classes.iter().map(|c| c.label.clone()).collect()
    }

    pub fn priors(&self) -> Vec<f64> {
        self.classes.iter().map(|c| c.prior).collect()
    }

    pub fn params(&self) -> &RodeoParams {
        &self.params
    }

    pub fn prior_mode(&self) -> PriorMode {
        self.prior_mode
    }

    pub fn total_samples(&self) -> usize {
        self.classes.iter().map(ClassModel::n).sum()
    }

    /// Adds training rows to one class and recomputes the priors.
    pub fn add_samples<R: AsRef<[f64]>>(&mut self, class: usize, rows: &[R]) -> Result<()> {
        let target = self.classes.get_mut(class).ok_or_else(|| {
            Error::InvalidConfig(format!("class index {class} out of range"))
        })?;
        target.samples.extend_rows(rows)?;
        self.refresh_priors();
        Ok(())
    }

    /// Local bandwidths and log-density of one class at `x`.
    pub fn class_bandwidths(&self, class: usize, x: &[f64]) -> Result<crate::rodeo::LocalBandwidthResult> {
        local_bandwidths(x, &self.classes[class].samples, &self.params).map_err(|e| match e {
            Error::TooFewSamples { found, required, .. } => Error::TooFewSamples {
                class,
                found,
                required,
            },
            other => other,
        })
    }

    pub fn predict(&self, x: &[f64], mode: PredictMode) -> Result<Prediction> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        check_finite(x, "query point")?;
        let per_class = (0..self.classes.len())
            .map(|c| {
                let class = &self.classes[c];
                let (log_density, h) = match mode {
                    PredictMode::Rodeo => {
                        let r = self.class_bandwidths(c, x)?;
                        (r.log_density, r.h_hat)
                    }
                    PredictMode::Fixed(h) => {
                        let h = BandwidthVector::uniform(self.dim, h)?;
                        (log_class_density(x, &class.samples, &h)?, h)
                    }
                };
                Ok((class.prior.ln() + log_density, h))
            })
            .collect::<Result<Vec<_>>>()?;
        let (log_scores, bandwidths): (Vec<f64>, Vec<BandwidthVector>) = per_class.into_iter().unzip();
        Ok(Prediction {
            label: argmax_lowest(&log_scores),
            posteriors: normalize_log(&log_scores),
            log_scores,
            bandwidths,
        })
    }

    /// Order-preserving parallel prediction.
    pub fn predict_batch<P>(&self, points: &[P], mode: PredictMode) -> Result<Vec<Prediction>>
    where
        P: AsRef<[f64]> + Sync,
    {
        points.par_iter().map(|p| self.predict(p.as_ref(), mode)).collect()
    }

    /// Predicts every row of `data`.
    pub fn predict_dataset(&self, data: &LabeledDataset, mode: PredictMode) -> Result<Vec<Prediction>> {
        let rows: Vec<&[f64]> = data.rows().collect();
        self.predict_batch(&rows, mode)
    }

    /// Local bandwidths at each of the class's own training points.
    pub fn training_bandwidths(&self, class: usize) -> Result<BandwidthSample> {
        let samples = &self.classes[class].samples;
        let rows: Vec<&[f64]> = samples.rows().collect();
        let h = rows
            .par_iter()
            .map(|x| self.class_bandwidths(class, x).map(|r| r.h_hat.into_inner()))
            .collect::<Result<Vec<_>>>()?;
        BandwidthSample::from_rows(&h)
    }

    /// Relevant variables of one class from its training-point bandwidths.
    pub fn select_class(&self, class: usize, alpha: f64) -> Result<SelectionResult> {
        select_relevant(&self.training_bandwidths(class)?, alpha)
    }
}

/// Bandwidths of class `class` at the queries predicted as that class.
/// `None` when fewer than two queries were assigned to it.
pub fn predicted_label_bandwidths(predictions: &[Prediction], class: usize) -> Option<BandwidthSample> {
    let rows: Vec<&[f64]> = predictions
        .iter()
        .filter(|p| p.label == class)
        .map(|p| p.bandwidths[class].as_slice())
        .collect();
    if rows.len() < 2 {
        return None;
    }
    BandwidthSample::from_rows(&rows).ok()
}
