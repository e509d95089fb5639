//! Relevant-variable detection from a matrix of local bandwidths.
//!
//! The `d` columns are treated as the groups of a one-way ANOVA. When the
//! group means differ, the means are sorted and Tukey's HSD picks the largest
//! rank `o` whose mean is significantly below every larger mean; the
//! variables with mean bandwidth at most the `o`-th smallest are relevant.

use serde::{Deserialize, Serialize};

use crate::dist::{f_upper_quantile, studentized_range_upper_quantile};
use crate::error::{Error, Result};

/// Default significance level.
pub const DEFAULT_ALPHA: f64 = 0.05;

/// `n × d` local bandwidths: one row per point, one column per variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandwidthSample {
    n: usize,
    d: usize,
    values: Vec<f64>,
}

impl BandwidthSample {
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let d = rows.first().map(|r| r.as_ref().len()).ok_or(Error::EmptySamples)?;
        let mut values = Vec::with_capacity(rows.len() * d);
        for row in rows {
            let row = row.as_ref();
            if row.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: row.len(),
                });
            }
            if row.iter().any(|&h| !(h.is_finite() && h > 0.0)) {
                return Err(Error::Domain("bandwidths must be finite and positive".into()));
            }
            values.extend_from_slice(row);
        }
        Ok(Self {
            n: rows.len(),
            d,
            values,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.d + j]
    }

    /// Column means `h̄_j`.
    pub fn means(&self) -> Vec<f64> {
        let mut means = vec![0.0; self.d];
        for row in self.values.chunks_exact(self.d) {
            for (m, v) in means.iter_mut().zip(row) {
                *m += v;
            }
        }
        means.iter_mut().for_each(|m| *m /= self.n as f64);
        means
    }

    fn check_shape(&self) -> Result<()> {
        if self.n < 2 || self.d < 2 {
            return Err(Error::Contract(format!(
                "bandwidth tests need n >= 2 and d >= 2, got n = {}, d = {}",
                self.n, self.d
            )));
        }
        Ok(())
    }
}

/// One-way ANOVA of the column means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaResult {
    pub means: Vec<f64>,
    pub ms_between: f64,
    pub ms_within: f64,
    pub df_between: f64,
    pub df_within: f64,
    /// `MS_B / MS_w`; `None` when `MS_w = 0`.
    pub f_stat: Option<f64>,
    pub critical: f64,
    pub rejected: bool,
    /// Set when every column is constant, so `MS_w = 0`.
    pub degenerate: bool,
}

pub fn anova_equal_means(bw: &BandwidthSample, alpha: f64) -> Result<AnovaResult> {
    bw.check_shape()?;
    let (n, d) = (bw.n as f64, bw.d as f64);
    let means = bw.means();
    let grand = means.iter().sum::<f64>() / d;
    let ss_between = n * means.iter().map(|m| (m - grand).powi(2)).sum::<f64>();
    let ss_within: f64 = bw
        .values
        .chunks_exact(bw.d)
        .map(|row| row.iter().zip(&means).map(|(v, m)| (v - m).powi(2)).sum::<f64>())
        .sum();
    let df_between = d - 1.0;
    let df_within = n * d - d;
    let ms_between = ss_between / df_between;
    let ms_within = ss_within / df_within;
    let critical = f_upper_quantile(alpha, df_between, df_within)?;
    let degenerate = ms_within == 0.0;
    let f_stat = (!degenerate).then(|| ms_between / ms_within);
    Ok(AnovaResult {
        means,
        ms_between,
        ms_within,
        df_between,
        df_within,
        f_stat,
        critical,
        rejected: f_stat.is_some_and(|f| f > critical),
        degenerate,
    })
}

/// Result of the sorted-mean Tukey cut.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TukeyCut {
    /// 1-based rank `o` in the increasing order of means.
    pub rank: usize,
    /// Column index of the `o`-th smallest mean.
    pub variable: usize,
    /// `q_{α,d,nd−d} / √2`.
    pub threshold: f64,
}

/// Column indices ordered by increasing mean, ties by index.
pub fn sorted_order(means: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..means.len()).collect();
    order.sort_by(|&a, &b| means[a].total_cmp(&means[b]));
    order
}

/// Largest rank `m < d` such that `|t_{m*n*}|` exceeds `q/√2` for every `n > m`.
pub fn tukey_cut(bw: &BandwidthSample, alpha: f64, anova: &AnovaResult) -> Result<Option<TukeyCut>> {
    if !anova.rejected {
        return Err(Error::Contract(
            "the Tukey cut requires a rejected ANOVA".into(),
        ));
    }
    let means = &anova.means;
    let d = means.len();
    let q = studentized_range_upper_quantile(alpha, d as u32, anova.df_within)?;
    let threshold = q / std::f64::consts::SQRT_2;
    let se = (anova.ms_within * 2.0 / bw.n as f64).sqrt();
    let order = sorted_order(means);
    let significant = |m: usize, k: usize| (means[order[m]] - means[order[k]]).abs() / se > threshold;
    let cut = (0..d - 1)
        .rev()
        .find(|&m| (m + 1..d).all(|k| significant(m, k)))
        .map(|m| TukeyCut {
            rank: m + 1,
            variable: order[m],
            threshold,
        });
    Ok(cut)
}

/// Per-class outcome of the two tests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub means: Vec<f64>,
    pub f_stat: Option<f64>,
    pub f_critical: f64,
    pub anova_rejected: bool,
    pub degenerate: bool,
    pub cut: Option<TukeyCut>,
    /// Relevant variables, ascending column index.
    pub relevant: Vec<usize>,
    pub complement: Vec<usize>,
}

impl SelectionResult {
    pub fn is_relevant(&self, j: usize) -> bool {
        self.relevant.binary_search(&j).is_ok()
    }
}

pub fn select_relevant(bw: &BandwidthSample, alpha: f64) -> Result<SelectionResult> {
    let anova = anova_equal_means(bw, alpha)?;
    let cut = if anova.rejected {
        tukey_cut(bw, alpha, &anova)?
    } else {
        None
    };
    let (relevant, complement): (Vec<usize>, Vec<usize>) = match &cut {
        Some(c) => {
            let bound = anova.means[c.variable];
            (0..bw.d).partition(|&j| anova.means[j] <= bound)
        }
        None => (Vec::new(), (0..bw.d).collect()),
    };
    Ok(SelectionResult {
        means: anova.means,
        f_stat: anova.f_stat,
        f_critical: anova.critical,
        anova_rejected: anova.rejected,
        degenerate: anova.degenerate,
        cut,
        relevant,
        complement,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn columns(cols: &[&[f64]]) -> BandwidthSample {
        let n = cols[0].len();
        let rows: Vec<Vec<f64>> = (0..n).map(|i| cols.iter().map(|c| c[i]).collect()).collect();
        BandwidthSample::from_rows(&rows).unwrap()
    }

    #[test]
    fn constant_identical_columns_are_degenerate() {
        let bw = columns(&[&[1.0, 1.0, 1.0], &[1.0, 1.0, 1.0]]);
        let a = anova_equal_means(&bw, 0.05).unwrap();
        assert!(a.degenerate && !a.rejected && a.f_stat.is_none());
        let s = select_relevant(&bw, 0.05).unwrap();
        assert!(s.relevant.is_empty() && s.degenerate);
        assert_eq!(s.complement, vec![0, 1]);
    }

    #[test]
    fn equal_group_means_give_zero_f() {
        let bw = columns(&[&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]]);
        let a = anova_equal_means(&bw, 0.05).unwrap();
        assert_eq!(a.f_stat, Some(0.0));
        assert!(!a.rejected);
    }

    #[test]
    fn separated_groups_hand_computation() {
        let jitter = 1e-3;
        let bw = columns(&[&[1.0, 1.0 + jitter, 1.0 - jitter], &[2.0, 2.0 + jitter, 2.0 - jitter]]);
        // Means 1 and 2; SSB = 3·(0.25 + 0.25) = 1.5 on 1 df;
        // SSW = 4·jitter² on 4 df, so F = 1.5 / jitter².
        let a = anova_equal_means(&bw, 0.05).unwrap();
        let f = a.f_stat.unwrap();
        assert!((f - 1.5 / (jitter * jitter)).abs() / f < 1e-9);
        assert!(a.rejected);
        assert!((a.critical - f_upper_quantile(0.05, 1.0, 4.0).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn tukey_cut_requires_rejection() {
        let bw = columns(&[&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]]);
        let a = anova_equal_means(&bw, 0.05).unwrap();
        assert!(matches!(tukey_cut(&bw, 0.05, &a), Err(Error::Contract(_))));
    }

    #[test]
    fn tukey_cut_three_means() {
        let n = 20;
        let mk = |m: f64| -> Vec<f64> { (0..n).map(|i| m + 1e-3 * ((i % 5) as f64 - 2.0)).collect() };
        let (a, b, c) = (mk(0.1), mk(0.12), mk(6.0));
        let bw = columns(&[&c, &a, &b]);
        let anova = anova_equal_means(&bw, 0.05).unwrap();
        // Direct evaluation of the cut rule: gap 0.12 → 6.0 and 0.1 → 0.12
        // against q(0.05, 3, 57)/√2 with se = √(2 MS_w / n).
        let q = studentized_range_upper_quantile(0.05, 3, 57.0).unwrap();
        let se = (anova.ms_within * 2.0 / n as f64).sqrt();
        assert!((6.0 - 0.12) / se > q / 2f64.sqrt());
        let cut = tukey_cut(&bw, 0.05, &anova).unwrap().unwrap();
        assert_eq!(cut.rank, 2);
        assert_eq!(cut.variable, 2);
        let s = select_relevant(&bw, 0.05).unwrap();
        assert_eq!(s.relevant, vec![1, 2]);
        assert_eq!(s.complement, vec![0]);
    }

    #[test]
    fn two_variables_one_small() {
        let bw = columns(&[&[5.0, 5.001, 4.999], &[0.01, 0.011, 0.009]]);
        let s = select_relevant(&bw, 0.05).unwrap();
        assert_eq!(s.cut.as_ref().unwrap().rank, 1);
        assert_eq!(s.relevant, vec![1]);
    }

    #[test]
    fn identical_columns_select_nothing() {
        let bw = columns(&[&[1.0, 1.1, 0.9, 1.0], &[1.0, 1.1, 0.9, 1.0], &[1.0, 1.1, 0.9, 1.0]]);
        let s = select_relevant(&bw, 0.05).unwrap();
        assert!(!s.anova_rejected);
        assert!(s.relevant.is_empty());
    }

    #[test]
    fn null_rejection_rate_matches_alpha() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let normal = Normal::new(1.0, 0.1).unwrap();
        let reps = 1000;
        let (n, d) = (30, 6);
        let mut rejections = 0;
        for _ in 0..reps {
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..d).map(|_| normal.sample(&mut rng)).collect())
                .collect();
            let bw = BandwidthSample::from_rows(&rows).unwrap();
            if anova_equal_means(&bw, 0.05).unwrap().rejected {
                rejections += 1;
            }
        }
        // Binomial(1000, 0.05): sd ≈ 6.9, allow ±4 sd.
        assert!((rejections as f64 - 50.0).abs() <= 28.0, "{rejections}");
    }

    #[test]
    fn rejects_bad_shapes() {
        let one_row = BandwidthSample::from_rows(&[[1.0, 2.0]]).unwrap();
        assert!(anova_equal_means(&one_row, 0.05).is_err());
        let one_col = BandwidthSample::from_rows(&[[1.0], [2.0]]).unwrap();
        assert!(anova_equal_means(&one_col, 0.05).is_err());
        assert!(BandwidthSample::from_rows(&[[1.0, 0.0]]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn selection_is_a_prefix_and_scale_invariant(
            seed in 0u64..10_000,
            scale in 0.01f64..100.0,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let d = 6;
            let centers = [0.05, 0.07, 1.0, 1.0, 1.02, 0.98];
            let rows: Vec<Vec<f64>> = (0..25)
                .map(|_| centers.iter().map(|&c| {
                    let v: f64 = Normal::new(c, 0.05 * c).unwrap().sample(&mut rng);
                    v.abs() + 1e-6
                }).collect())
                .collect();
            let bw = BandwidthSample::from_rows(&rows).unwrap();
            let s = select_relevant(&bw, 0.05).unwrap();

            let mut all: Vec<usize> = s.relevant.iter().chain(&s.complement).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..d).collect::<Vec<_>>());
            if !s.anova_rejected {
                prop_assert!(s.relevant.is_empty());
            }
            if let (Some(max_r), Some(min_c)) = (
                s.relevant.iter().map(|&j| s.means[j]).reduce(f64::max),
                s.complement.iter().map(|&j| s.means[j]).reduce(f64::min),
            ) {
                prop_assert!(max_r <= min_c);
            }

            let scaled: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|v| v * scale).collect()).collect();
            let t = select_relevant(&BandwidthSample::from_rows(&scaled).unwrap(), 0.05).unwrap();
            prop_assert_eq!(&s.relevant, &t.relevant);
            let (fs, ft) = (s.f_stat.unwrap(), t.f_stat.unwrap());
            prop_assert!((fs - ft).abs() <= 1e-8 * fs.abs());
        }
    }
}
