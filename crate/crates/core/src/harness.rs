//! Replicated experiments and their summary statistics.
//!
//! Each replication draws its data from its own substream, so the report is a
//! function of the configuration alone: replications run in parallel, and
//! results are aggregated in replication order. Wall-clock times are kept on
//! the report for display but never serialized.

use std::time::Instant;

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::{predicted_label_bandwidths, FitModel, PredictMode, Prediction, PriorMode};
use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::numeric::mean_sd;
use crate::rng::{substream, StreamSeed};
use crate::rodeo::RodeoParams;
use crate::selection::{select_relevant, SelectionResult, DEFAULT_ALPHA};
use crate::synth::{add_noise_variables, gen_example1, gen_example2, gen_gaussian_pair, Example2Config};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Generator {
    /// Ten classes, thirty variables, six relevant per class.
    Example1,
    /// Two relevant variables and eight uniform ones.
    Example2 { config: Example2Config },
    /// One-dimensional `N(0, 1)` against `N(separation, 1)`.
    GaussianPair { separation: f64 },
}

impl Generator {
    pub fn generate(&self, seed: StreamSeed, n_train: usize, n_test: usize) -> Result<(LabeledDataset, LabeledDataset)> {
        match self {
            Generator::Example1 => gen_example1(seed, n_train, n_test),
            Generator::Example2 { config } => gen_example2(seed, config, n_train, n_test),
            Generator::GaussianPair { separation } => gen_gaussian_pair(seed, *separation, n_train, n_test),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Method {
    Rodeo,
    Fixed { h: f64 },
}

impl Method {
    pub fn mode(&self) -> PredictMode {
        match *self {
            Method::Rodeo => PredictMode::Rodeo,
            Method::Fixed { h } => PredictMode::Fixed(h),
        }
    }

    pub fn name(&self) -> String {
        match self {
            Method::Rodeo => "rodeo".into(),
            Method::Fixed { h } => format!("fixed(h={h})"),
        }
    }
}

/// Which bandwidths feed variable selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionSource {
    /// Bandwidths found at test queries, grouped by predicted label.
    #[default]
    PredictedLabels,
    /// Bandwidths found at each class's own training points.
    Training,
    /// No selection.
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub generator: Generator,
    pub n_train_per_class: usize,
    pub n_test_per_class: usize,
    pub replications: usize,
    pub seed: u64,
    pub methods: Vec<Method>,
    pub params: RodeoParams,
    pub prior_mode: PriorMode,
    pub alpha: f64,
    pub selection: SelectionSource,
    /// Extra `N(0, 1)` columns appended to both splits; 0 for none.
    pub noise_variables: usize,
}

impl ExperimentConfig {
    pub fn new(generator: Generator, n_train_per_class: usize, n_test_per_class: usize, replications: usize, seed: u64) -> Self {
        Self {
            generator,
            n_train_per_class,
            n_test_per_class,
            replications,
            seed,
            methods: vec![Method::Rodeo],
            params: RodeoParams::default(),
            prior_mode: PriorMode::Empirical,
            alpha: DEFAULT_ALPHA,
            selection: SelectionSource::PredictedLabels,
            noise_variables: 0,
        }
    }

    pub fn with_methods(mut self, methods: Vec<Method>) -> Self {
        self.methods = methods;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::InvalidConfig("at least one replication is required".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidConfig("at least one method is required".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidConfig(format!("alpha must be in (0, 1), got {}", self.alpha)));
        }
        self.params.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub specificity: f64,
    /// Classes never predicted; each contributes precision 0.
    pub zero_predicted: usize,
}

/// `confusion[t][p]` counts points of true class `t` predicted as `p`.
pub fn confusion_matrix(truth: &[usize], predicted: &[usize], n_classes: usize) -> Result<Vec<Vec<usize>>> {
    if truth.len() != predicted.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            found: predicted.len(),
        });
    }
    let mut m = vec![vec![0; n_classes]; n_classes];
    for (&t, &p) in truth.iter().zip(predicted) {
        if t >= n_classes || p >= n_classes {
            return Err(Error::Domain(format!("label out of range for {n_classes} classes")));
        }
        m[t][p] += 1;
    }
    Ok(m)
}

/// Accuracy with macro-averaged precision and specificity.
pub fn metrics(confusion: &[Vec<usize>]) -> Result<Metrics> {
    let c = confusion.len();
    if c == 0 || confusion.iter().any(|row| row.len() != c) {
        return Err(Error::Domain("confusion matrix must be square and nonempty".into()));
    }
    let total: usize = confusion.iter().flatten().sum();
    if total == 0 {
        return Err(Error::EmptySamples);
    }
    let trace: usize = (0..c).map(|i| confusion[i][i]).sum();
    let mut precision = 0.0;
    let mut specificity = 0.0;
    let mut zero_predicted = 0;
    for k in 0..c {
        let tp = confusion[k][k];
        let predicted: usize = (0..c).map(|t| confusion[t][k]).sum();
        let actual: usize = confusion[k].iter().sum();
        let fp = predicted - tp;
        let tn = total - actual - fp;
        if predicted == 0 {
            zero_predicted += 1;
        } else {
            precision += tp as f64 / predicted as f64;
        }
        if tn + fp > 0 {
            specificity += tn as f64 / (tn + fp) as f64;
        }
    }
    Ok(Metrics {
        accuracy: trace as f64 / total as f64,
        precision: precision / c as f64,
        specificity: specificity / c as f64,
        zero_predicted,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZScores {
    pub values: Vec<f64>,
    /// Set when the bandwidth means have zero spread; `values` are then 0.
    pub degenerate: bool,
}

/// Standardizes one class's mean bandwidths across variables.
pub fn bandwidth_zscores(means: &[f64]) -> Result<ZScores> {
    if means.len() < 2 {
        return Err(Error::Domain("z-scores need at least 2 variables".into()));
    }
    let (m, sd) = mean_sd(means);
    if sd == 0.0 || !sd.is_finite() {
        return Ok(ZScores {
            values: vec![0.0; means.len()],
            degenerate: true,
        });
    }
    Ok(ZScores {
        values: means.iter().map(|h| (h - m) / sd).collect(),
        degenerate: false,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRun {
    pub method: Method,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSelection {
    pub relevant: Vec<usize>,
    pub means: Vec<f64>,
    pub degenerate: bool,
}

/// Outcome of one replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRow {
    pub replication: usize,
    pub runs: Vec<MethodRun>,
    /// Per class; `None` when the class had too few bandwidth rows.
    pub selections: Vec<Option<ClassSelection>>,
    #[serde(skip)]
    pub seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub sd: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self { mean: f64::NAN, sd: f64::NAN };
        }
        let (mean, sd) = mean_sd(values);
        Self { mean, sd }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub accuracy: Summary,
    pub precision: Summary,
    pub specificity: Summary,
    /// Never-predicted classes, summed over replications.
    pub zero_predicted: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub replication: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationReport {
    pub config: ExperimentConfig,
    pub label_names: Vec<String>,
    pub dim: usize,
    pub completed: usize,
    pub failures: Vec<Failure>,
    pub methods: Vec<MethodSummary>,
    /// `detection[class][variable]`: fraction of completed replications in
    /// which the variable was selected for the class.
    pub detection: Vec<Vec<f64>>,
    /// Replications in which selection could not run for the class.
    pub selection_skipped: Vec<usize>,
    /// Mean over replications of the per-class mean bandwidths.
    pub mean_bandwidths: Vec<Vec<f64>>,
    /// Mean over replications of the per-class bandwidth z-scores; empty when
    /// `dim < 2`.
    pub zscores: Vec<Vec<f64>>,
    pub zscore_degenerate: Vec<usize>,
    pub rows: Vec<ReplicationRow>,
    #[serde(skip)]
    pub seconds_per_replication: Vec<f64>,
}

const NOISE_TRAIN: u64 = 0x7472_6169_6e;
const NOISE_TEST: u64 = 0x7465_7374;

/// Generates the data of replication `rep`, with noise columns if configured.
pub fn replication_data(config: &ExperimentConfig, rep: usize) -> Result<(LabeledDataset, LabeledDataset)> {
    let seed = StreamSeed::new(config.seed, rep as u64);
    let (mut train, mut test) = config
        .generator
        .generate(seed, config.n_train_per_class, config.n_test_per_class)?;
    if config.noise_variables > 0 {
        let noise_seed = |tag| StreamSeed::new(substream(config.seed, &[rep as u64, tag]).next_u64(), rep as u64);
        train = add_noise_variables(&train, config.noise_variables, noise_seed(NOISE_TRAIN))?;
        test = add_noise_variables(&test, config.noise_variables, noise_seed(NOISE_TEST))?;
    }
    Ok((train, test))
}

fn accuracy_metrics(test: &LabeledDataset, preds: &[Prediction]) -> Result<Metrics> {
    let predicted: Vec<usize> = preds.iter().map(|p| p.label).collect();
    metrics(&confusion_matrix(test.labels(), &predicted, test.n_classes())?)
}

fn summarize(sel: SelectionResult) -> ClassSelection {
    ClassSelection {
        relevant: sel.relevant,
        means: sel.means,
        degenerate: sel.degenerate,
    }
}

/// Runs one replication: generate, fit, classify with every method, select.
pub fn run_one(config: &ExperimentConfig, rep: usize) -> Result<ReplicationRow> {
    let start = Instant::now();
    let (train, test) = replication_data(config, rep)?;
    let model = FitModel::fit_with(&train, config.params.clone(), config.prior_mode)?;

    let mut runs = Vec::with_capacity(config.methods.len());
    let mut rodeo_preds: Option<Vec<Prediction>> = None;
    for &method in &config.methods {
        let preds = model.predict_dataset(&test, method.mode())?;
        runs.push(MethodRun {
            method,
            metrics: accuracy_metrics(&test, &preds)?,
        });
        if method == Method::Rodeo {
            rodeo_preds = Some(preds);
        }
    }

    let c = model.n_classes();
    let selections = match config.selection {
        SelectionSource::None => vec![None; c],
        SelectionSource::Training => (0..c)
            .map(|k| model.select_class(k, config.alpha).ok().map(summarize))
            .collect(),
        SelectionSource::PredictedLabels => {
            let preds = match rodeo_preds {
                Some(p) => p,
                None => model.predict_dataset(&test, PredictMode::Rodeo)?,
            };
            (0..c)
                .map(|k| {
                    predicted_label_bandwidths(&preds, k)
                        .and_then(|bw| select_relevant(&bw, config.alpha).ok())
                        .map(summarize)
                })
                .collect()
        }
    };
    Ok(ReplicationRow {
        replication: rep,
        runs,
        selections,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Runs every replication in parallel and aggregates in replication order.
///
/// A replication that fails is recorded and excluded from every aggregate.
pub fn run_replications(config: &ExperimentConfig) -> Result<ReplicationReport> {
    config.validate()?;
    let (probe, _) = config.generator.generate(StreamSeed::new(config.seed, 0), 1, 1)?;
    let c = probe.n_classes();
    let dim = probe.dim() + config.noise_variables;
    let label_names = probe.label_names().to_vec();

    let outcomes: Vec<Result<ReplicationRow>> = (0..config.replications)
        .into_par_iter()
        .map(|rep| run_one(config, rep))
        .collect();

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (rep, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(row) => rows.push(row),
            Err(e) => failures.push(Failure {
                replication: rep,
                message: e.to_string(),
            }),
        }
    }
    let completed = rows.len();

    let methods = config
        .methods
        .iter()
        .enumerate()
        .map(|(m, &method)| {
            let pick = |f: fn(&Metrics) -> f64| rows.iter().map(|r| f(&r.runs[m].metrics)).collect::<Vec<_>>();
            MethodSummary {
                method,
                accuracy: Summary::of(&pick(|x| x.accuracy)),
                precision: Summary::of(&pick(|x| x.precision)),
                specificity: Summary::of(&pick(|x| x.specificity)),
                zero_predicted: rows.iter().map(|r| r.runs[m].metrics.zero_predicted).sum(),
            }
        })
        .collect();

    let mut detection = vec![vec![0.0; dim]; c];
    let mut selection_skipped = vec![0; c];
    let mut bw_sum = vec![vec![0.0; dim]; c];
    let mut z_sum = vec![vec![0.0; dim]; c];
    let mut zscore_degenerate = vec![0; c];
    let mut used = vec![0usize; c];
    for row in &rows {
        for (k, sel) in row.selections.iter().enumerate() {
            let Some(sel) = sel else {
                selection_skipped[k] += 1;
                continue;
            };
            used[k] += 1;
            for &j in &sel.relevant {
                detection[k][j] += 1.0;
            }
            for (acc, h) in bw_sum[k].iter_mut().zip(&sel.means) {
                *acc += h;
            }
            if dim >= 2 {
                let z = bandwidth_zscores(&sel.means)?;
                zscore_degenerate[k] += z.degenerate as usize;
                for (acc, v) in z_sum[k].iter_mut().zip(&z.values) {
                    *acc += v;
                }
            }
        }
    }
    let average = |sums: Vec<Vec<f64>>| -> Vec<Vec<f64>> {
        sums.into_iter()
            .zip(&used)
            .map(|(row, &n)| row.into_iter().map(|v| if n > 0 { v / n as f64 } else { f64::NAN }).collect())
            .collect()
    };
    if completed > 0 {
        for row in detection.iter_mut() {
            for v in row.iter_mut() {
                *v /= completed as f64;
            }
        }
    }
    let seconds_per_replication = rows.iter().map(|r| r.seconds).collect();
    Ok(ReplicationReport {
        config: config.clone(),
        label_names,
        dim,
        completed,
        failures,
        methods,
        detection,
        selection_skipped,
        mean_bandwidths: average(bw_sum),
        zscores: if dim >= 2 { average(z_sum) } else { Vec::new() },
        zscore_degenerate,
        rows,
        seconds_per_replication,
    })
}

impl ReplicationReport {
    pub fn method(&self, method: Method) -> Option<&MethodSummary> {
        self.methods.iter().find(|m| m.method == method)
    }

    /// Aligned text tables: method summaries, then detection probabilities.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "replications: {} completed, {} failed\n\n",
            self.completed,
            self.failures.len()
        ));
        out.push_str(&format!(
            "{:<16} {:>18} {:>18} {:>18} {:>10}\n",
            "method", "accuracy", "precision", "specificity", "time/s"
        ));
        let (time, _) = if self.seconds_per_replication.is_empty() {
            (f64::NAN, 0.0)
        } else {
            mean_sd(&self.seconds_per_replication)
        };
        let cell = |s: &Summary| format!("{:.4} ({:.4})", s.mean, s.sd);
        for m in &self.methods {
            out.push_str(&format!(
                "{:<16} {:>18} {:>18} {:>18} {:>10.2}\n",
                m.method.name(),
                cell(&m.accuracy),
                cell(&m.precision),
                cell(&m.specificity),
                time
            ));
        }
        if self.detection.iter().any(|row| row.iter().any(|&v| v > 0.0)) {
            out.push_str("\ndetection probability (class x variable)\n");
            out.push_str(&format!("{:<8}", "class"));
            for j in 0..self.dim {
                out.push_str(&format!(" {:>5}", format!("x{}", j + 1)));
            }
            out.push('\n');
            for (name, row) in self.label_names.iter().zip(&self.detection) {
                out.push_str(&format!("{name:<8}"));
                for v in row {
                    out.push_str(&format!(" {v:>5.2}"));
                }
                out.push('\n');
            }
        }
        out
    }
}
