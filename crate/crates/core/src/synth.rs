//! Seeded generators for the synthetic benchmark designs.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::rng::StreamSeed;

const SPLIT_TRAIN: u64 = 0;
const SPLIT_TEST: u64 = 1;
const NOISE_TAG: u64 = 0x6e6f_6973_65;

/// How one column of one class is distributed.
#[derive(Debug, Clone, Copy)]
enum Column {
    Normal { mean: f64, sd: f64 },
    Uniform,
}

/// Draws `counts[c]` rows for each class, column by column from independent
/// substreams keyed by `(split, class, column)`. Rows are grouped by class.
fn generate<F>(seed: StreamSeed, split: u64, dim: usize, counts: &[usize], column: F) -> Result<LabeledDataset>
where
    F: Fn(usize, usize) -> Column,
{
    let total: usize = counts.iter().sum();
    let mut features = vec![0.0; total * dim];
    let mut labels = Vec::with_capacity(total);
    let mut offset = 0;
    for (class, &n) in counts.iter().enumerate() {
        for j in 0..dim {
            let mut rng = seed.stream(&[split, class as u64, j as u64]);
            let values: Vec<f64> = match column(class, j) {
                Column::Normal { mean, sd } => {
                    let dist = Normal::new(mean, sd)
                        .map_err(|e| Error::InvalidConfig(format!("bad normal column: {e}")))?;
                    dist.sample_iter(&mut rng).take(n).collect()
                }
                Column::Uniform => (0..n).map(|_| rng.random::<f64>()).collect(),
            };
            for (i, v) in values.into_iter().enumerate() {
                features[(offset + i) * dim + j] = v;
            }
        }
        labels.extend(std::iter::repeat_n(class, n));
        offset += n;
    }
    LabeledDataset::with_numbered_classes(dim, features, labels, counts.len())
}

/// Ten classes in 30 variables. Class `y` (1-based) has relevant variables
/// `y..=y+5` with `X_i ~ N(0.5, (0.02 (i − y + 1))²)`; every other variable is
/// `Uniform(0, 1)`.
pub fn gen_example1(
    seed: impl Into<StreamSeed>,
    n_train_per_class: usize,
    n_test_per_class: usize,
) -> Result<(LabeledDataset, LabeledDataset)> {
    let seed = seed.into();
    let column = |class: usize, j: usize| {
        let offset = j as i64 - class as i64;
        if (0..6).contains(&offset) {
            Column::Normal {
                mean: 0.5,
                sd: 0.02 * (offset + 1) as f64,
            }
        } else {
            Column::Uniform
        }
    };
    Ok((
        generate(seed, SPLIT_TRAIN, 30, &[n_train_per_class; 10], column)?,
        generate(seed, SPLIT_TEST, 30, &[n_test_per_class; 10], column)?,
    ))
}

/// Relevant variables of class `class` (0-based) in the ten-class design.
pub fn example1_relevant(class: usize) -> Vec<usize> {
    (class..class + 6).collect()
}

/// Five classes whose first two variables are bivariate normal with
/// covariance `diag(0.1², 0.2²)`; the other eight are `Uniform(0, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example2Config {
    /// Location of each class in the two relevant variables.
    pub means: Vec<[f64; 2]>,
    pub sds: [f64; 2],
    pub n_irrelevant: usize,
    /// 1-based classes to include, in output order.
    pub class_subset: Vec<usize>,
}

impl Default for Example2Config {
    /// Class 1 at the center, classes 2–5 at distances 0.15, 0.30, 0.45 and
    /// 0.60 to the right, above, to the left and below.
    fn default() -> Self {
        Self {
            means: vec![[0.5, 0.5], [0.65, 0.5], [0.5, 0.8], [0.05, 0.5], [0.5, -0.1]],
            sds: [0.1, 0.2],
            n_irrelevant: 8,
            class_subset: vec![1, 2, 3, 4, 5],
        }
    }
}

impl Example2Config {
    pub fn with_subset(classes: &[usize]) -> Self {
        Self {
            class_subset: classes.to_vec(),
            ..Self::default()
        }
    }

    pub fn dim(&self) -> usize {
        2 + self.n_irrelevant
    }

    fn validate(&self) -> Result<()> {
        if self.class_subset.len() < 2 {
            return Err(Error::InvalidConfig("class subset needs at least 2 classes".into()));
        }
        for &c in &self.class_subset {
            if c == 0 || c > self.means.len() {
                return Err(Error::InvalidConfig(format!(
                    "class {c} is not defined (have {} classes)",
                    self.means.len()
                )));
            }
        }
        let mut seen = self.class_subset.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != self.class_subset.len() {
            return Err(Error::InvalidConfig("class subset has duplicates".into()));
        }
        Ok(())
    }
}

pub fn gen_example2(
    seed: impl Into<StreamSeed>,
    config: &Example2Config,
    n_train_per_class: usize,
    n_test_per_class: usize,
) -> Result<(LabeledDataset, LabeledDataset)> {
    config.validate()?;
    let seed = seed.into();
    let k = config.class_subset.len();
    let column = |class: usize, j: usize| {
        // Streams are keyed by position in the subset, distributions by the
        // original class number.
        let original = config.class_subset[class] - 1;
        if j < 2 {
            Column::Normal {
                mean: config.means[original][j],
                sd: config.sds[j],
            }
        } else {
            Column::Uniform
        }
    };
    let names: Vec<String> = config.class_subset.iter().map(|c| c.to_string()).collect();
    let rename = |d: LabeledDataset| {
        LabeledDataset::new(d.dim(), d.features().to_vec(), d.labels().to_vec(), names.clone())
    };
    Ok((
        rename(generate(seed, SPLIT_TRAIN, config.dim(), &vec![n_train_per_class; k], column)?)?,
        rename(generate(seed, SPLIT_TEST, config.dim(), &vec![n_test_per_class; k], column)?)?,
    ))
}

/// Two one-dimensional classes, `N(0, 1)` and `N(separation, 1)`.
pub fn gen_gaussian_pair(
    seed: impl Into<StreamSeed>,
    separation: f64,
    n_train_per_class: usize,
    n_test_per_class: usize,
) -> Result<(LabeledDataset, LabeledDataset)> {
    let seed = seed.into();
    let column = |class: usize, _| Column::Normal {
        mean: class as f64 * separation,
        sd: 1.0,
    };
    Ok((
        generate(seed, SPLIT_TRAIN, 1, &[n_train_per_class; 2], column)?,
        generate(seed, SPLIT_TEST, 1, &[n_test_per_class; 2], column)?,
    ))
}

/// Appends `k` independent `N(0, 1)` columns.
pub fn add_noise_variables(data: &LabeledDataset, k: usize, seed: impl Into<StreamSeed>) -> Result<LabeledDataset> {
    if k == 0 {
        return Err(Error::InvalidConfig("noise column count must be at least 1".into()));
    }
    let seed = seed.into();
    let n = data.len();
    let mut extra = vec![0.0; n * k];
    for c in 0..k {
        let rng = seed.stream(&[NOISE_TAG, c as u64]);
        for (i, v) in Normal::new(0.0, 1.0).unwrap().sample_iter(rng).take(n).enumerate() {
            extra[i * k + c] = v;
        }
    }
    data.append_columns(k, &extra)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::mean_sd;

    fn column(data: &LabeledDataset, class: usize, j: usize) -> Vec<f64> {
        data.rows()
            .zip(data.labels())
            .filter(|(_, &l)| l == class)
            .map(|(r, _)| r[j])
            .collect()
    }

    #[test]
    fn example1_shapes_and_supports() {
        let (train, test) = gen_example1(7, 150, 100).unwrap();
        assert_eq!((train.len(), train.dim()), (1500, 30));
        assert_eq!((test.len(), test.dim()), (1000, 30));
        assert_eq!(train.class_counts(), vec![150; 10]);
        assert_eq!(test.class_counts(), vec![100; 10]);
        for (row, &label) in train.rows().zip(train.labels()) {
            for (j, &v) in row.iter().enumerate() {
                if !example1_relevant(label).contains(&j) {
                    assert!((0.0..=1.0).contains(&v));
                }
            }
        }
    }

    #[test]
    fn example1_relevant_column_moments() {
        let (train, _) = gen_example1(3, 150, 100).unwrap();
        let (m, _) = mean_sd(&column(&train, 0, 0));
        assert!((m - 0.5).abs() <= 4.0 * 0.02 / 150f64.sqrt());
        // Class 4, variable 9 is its sixth relevant variable: sd 0.12.
        let (m, s) = mean_sd(&column(&train, 3, 8));
        assert!((m - 0.5).abs() <= 4.0 * 0.12 / 150f64.sqrt());
        assert!((s - 0.12).abs() < 0.03);
    }

    #[test]
    fn reproducible_and_replications_differ() {
        let a = gen_example1(StreamSeed::new(5, 0), 20, 10).unwrap();
        let b = gen_example1(StreamSeed::new(5, 0), 20, 10).unwrap();
        let c = gen_example1(StreamSeed::new(5, 1), 20, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.0, c.0);
    }

    #[test]
    fn example2_variances_and_subset() {
        let cfg = Example2Config::default();
        let (train, test) = gen_example2(11, &cfg, 1000, 100).unwrap();
        assert_eq!(train.dim(), 10);
        assert_eq!(test.class_counts(), vec![100; 5]);
        let (_, s1) = mean_sd(&column(&train, 0, 0));
        let (_, s2) = mean_sd(&column(&train, 0, 1));
        // Sample variance se ≈ σ²√(2/n).
        assert!((s1 * s1 - 0.01).abs() < 4.0 * 0.01 * (2.0f64 / 1000.0).sqrt());
        assert!((s2 * s2 - 0.04).abs() < 4.0 * 0.04 * (2.0f64 / 1000.0).sqrt());

        let (two, _) = gen_example2(11, &Example2Config::with_subset(&[3, 5]), 50, 10).unwrap();
        assert_eq!(two.n_classes(), 2);
        assert_eq!(two.label_names(), &["3".to_string(), "5".to_string()]);
        let (m, _) = mean_sd(&column(&two, 1, 1));
        assert!((m - (-0.1)).abs() < 4.0 * 0.2 / 50f64.sqrt());

        assert!(gen_example2(1, &Example2Config::with_subset(&[1, 6]), 5, 5).is_err());
        assert!(gen_example2(1, &Example2Config::with_subset(&[2]), 5, 5).is_err());
    }

    #[test]
    fn default_layout_surrounds_class_one() {
        let cfg = Example2Config::default();
        let center = cfg.means[0];
        let mut distances: Vec<f64> = cfg.means[1..]
            .iter()
            .map(|m| ((m[0] - center[0]).powi(2) + (m[1] - center[1]).powi(2)).sqrt())
            .collect();
        for (d, expected) in distances.iter().zip([0.15, 0.30, 0.45, 0.60]) {
            assert!((d - expected).abs() < 1e-12);
        }
        distances.dedup();
        assert_eq!(distances.len(), 4);
        // One class on each side of the center.
        let offsets: Vec<[f64; 2]> = cfg.means[1..]
            .iter()
            .map(|m| [m[0] - center[0], m[1] - center[1]])
            .collect();
        assert!(offsets.iter().any(|o| o[0] > 0.0) && offsets.iter().any(|o| o[0] < 0.0));
        assert!(offsets.iter().any(|o| o[1] > 0.0) && offsets.iter().any(|o| o[1] < 0.0));
    }

    #[test]
    fn noise_columns_are_appended() {
        let (train, _) = gen_example1(1, 150, 10).unwrap();
        let noisy = add_noise_variables(&train, 5, 42).unwrap();
        assert_eq!(noisy.dim(), 35);
        assert_eq!(noisy.labels(), train.labels());
        for (a, b) in noisy.rows().zip(train.rows()) {
            assert_eq!(&a[..30], b);
        }
        for c in 30..35 {
            let col: Vec<f64> = noisy.rows().map(|r| r[c]).collect();
            let (m, _) = mean_sd(&col);
            assert!(m.abs() <= 4.0 / (1500f64).sqrt());
        }
        assert!(add_noise_variables(&train, 0, 1).is_err());
    }
}
