use std::path::PathBuf;

use clap::{Args, ValueEnum};
use npkdc::harness::{replication_data, SelectionSource};
use npkdc::sample_size::{plan_inputs, plan_sizes};
use npkdc::synth::Example2Config;
use npkdc::{
    run_replications, ExperimentConfig, FitModel, Generator, Method, PredictMode, PriorMode, RodeoParams,
    SelectionResult, DEFAULT_FIXED_BANDWIDTH,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{CliError, Result};
use crate::io::{read_csv, read_dataset, read_model, write_dataset, write_model, Output};
use crate::{ExampleKind, Format, GlobalOpts};

#[derive(Clone, Copy, ValueEnum)]
pub enum PriorArg {
    Empirical,
    Uniform,
}

impl From<PriorArg> for PriorMode {
    fn from(p: PriorArg) -> Self {
        match p {
            PriorArg::Empirical => PriorMode::Empirical,
            PriorArg::Uniform => PriorMode::Uniform,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Rodeo,
    Fixed,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum SelectionArg {
    Predicted,
    Training,
    None,
}

#[derive(Args)]
pub struct DesignArgs {
    #[arg(long, value_enum)]
    example: ExampleKind,
    /// Classes to include from the five-class design, e.g. `3,5`.
    #[arg(long, value_delimiter = ',')]
    classes: Option<Vec<usize>>,
    /// Mean of the second class in the `pair` design.
    #[arg(long, default_value_t = 2.0)]
    separation: f64,
    #[arg(long, default_value_t = 150)]
    n_train: usize,
    #[arg(long, default_value_t = 100)]
    n_test: usize,
    /// Append this many N(0,1) noise columns.
    #[arg(long, default_value_t = 0)]
    noise: usize,
}

impl DesignArgs {
    fn generator(&self) -> Result<Generator> {
        if self.classes.is_some() && self.example != ExampleKind::Two {
            return Err(CliError::Usage("--classes applies to --example 2 only".into()));
        }
        Ok(match self.example {
            ExampleKind::One => Generator::Example1,
            ExampleKind::Two => Generator::Example2 {
                config: match &self.classes {
                    Some(c) => Example2Config::with_subset(c),
                    None => Example2Config::default(),
                },
            },
            ExampleKind::Pair => Generator::GaussianPair {
                separation: self.separation,
            },
        })
    }

    fn name(&self) -> &'static str {
        match self.example {
            ExampleKind::One => "example1",
            ExampleKind::Two => "example2",
            ExampleKind::Pair => "pair",
        }
    }
}

#[derive(Args)]
pub struct GenArgs {
    #[command(flatten)]
    design: DesignArgs,
    /// Directory receiving `<name>_train.csv` and `<name>_test.csv`.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
pub struct TrainArgs {
    /// Labeled training CSV.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value_t = PriorArg::Empirical)]
    prior: PriorArg,
}

#[derive(Args)]
pub struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    /// CSV of queries; a `label` column, when present, is used to report accuracy.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value_t = ModeArg::Rodeo)]
    mode: ModeArg,
    /// Bandwidth for `--mode fixed`.
    #[arg(long, default_value_t = DEFAULT_FIXED_BANDWIDTH)]
    h: f64,
}

#[derive(Args)]
pub struct SelectArgs {
    /// Labeled CSV; bandwidths are searched at each class's own points.
    #[arg(long)]
    data: PathBuf,
    /// Only this class label.
    #[arg(long)]
    class: Option<String>,
}

#[derive(Args)]
pub struct PlanArgs {
    /// Labeled pilot CSV.
    #[arg(long)]
    data: PathBuf,
    /// Total training size to distribute over the classes.
    #[arg(long)]
    budget: usize,
    /// Target error level for the feasibility check.
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
}

#[derive(Args)]
pub struct BenchArgs {
    #[command(flatten)]
    design: DesignArgs,
    #[arg(long, default_value_t = 20)]
    reps: usize,
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [ModeArg::Rodeo, ModeArg::Fixed])]
    methods: Vec<ModeArg>,
    /// Bandwidth of the fixed-kernel method.
    #[arg(long, default_value_t = DEFAULT_FIXED_BANDWIDTH)]
    fixed_h: f64,
    /// Bandwidths used for variable detection.
    #[arg(long, value_enum, default_value_t = SelectionArg::Predicted)]
    selection: SelectionArg,
    #[arg(long, value_enum, default_value_t = PriorArg::Empirical)]
    prior: PriorArg,
}

fn params(g: &GlobalOpts) -> Result<RodeoParams> {
    let p = RodeoParams {
        c0: g.c0,
        gamma: g.gamma,
        h_min: g.h_min,
        ..RodeoParams::default()
    };
    p.validate()?;
    Ok(p)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(CliError::Usage(format!("--alpha must be in (0, 1), got {alpha}")))
    }
}

fn seed_or_generated(g: &GlobalOpts) -> u64 {
    g.seed.unwrap_or_else(|| {
        let seed = rand::random::<u64>();
        eprintln!("seed: {seed}");
        seed
    })
}

fn output(g: &GlobalOpts) -> Output {
    Output(g.output.clone())
}

pub fn gen(g: &GlobalOpts, a: &GenArgs) -> Result<()> {
    let seed = seed_or_generated(g);
    let mut config = ExperimentConfig::new(a.design.generator()?, a.design.n_train, a.design.n_test, 1, seed);
    config.noise_variables = a.design.noise;
    let (train, test) = replication_data(&config, 0)?;
    if !a.out_dir.is_dir() {
        return Err(CliError::data(&a.out_dir, "output directory does not exist"));
    }
    for (split, data) in [("train", &train), ("test", &test)] {
        let path = a.out_dir.join(format!("{}_{split}.csv", a.design.name()));
        write_dataset(&path, data)?;
        println!(
            "{split}: {} rows x {} columns, {} classes -> {}",
            data.len(),
            data.dim(),
            data.n_classes(),
            path.display()
        );
    }
    Ok(())
}

pub fn train(g: &GlobalOpts, a: &TrainArgs) -> Result<()> {
    let data = read_dataset(&a.data)?;
    let model = FitModel::fit_with(&data, params(g)?, a.prior.into())?;
    write_model(&output(g), &model)?;
    eprintln!(
        "trained on {} rows, {} variables, {} classes",
        data.len(),
        data.dim(),
        data.n_classes()
    );
    Ok(())
}

pub fn predict(g: &GlobalOpts, a: &PredictArgs) -> Result<()> {
    let model = read_model(&a.model)?;
    let table = read_csv(&a.data)?;
    if table.dim != model.dim() {
        return Err(CliError::data(
            &a.data,
            format!("dimension mismatch: model has {} variables, data has {}", model.dim(), table.dim),
        ));
    }
    let mode = match a.mode {
        ModeArg::Rodeo => PredictMode::Rodeo,
        ModeArg::Fixed => PredictMode::Fixed(a.h),
    };
    let points: Vec<&[f64]> = table.features.chunks_exact(table.dim).collect();
    let preds = model.predict_batch(&points, mode)?;
    let labels = model.labels();

    let mut rows = Vec::with_capacity(preds.len() + 1);
    let mut header = vec!["label".to_string()];
    header.extend(labels.iter().map(|l| format!("p_{l}")));
    rows.push(header);
    for p in &preds {
        let mut row = vec![labels[p.label].clone()];
        row.extend(p.posteriors.iter().map(|v| v.to_string()));
        rows.push(row);
    }
    let out = output(g);
    out.write_csv(&rows)?;

    if let Some(truth) = &table.labels {
        let correct = preds
            .iter()
            .zip(truth)
            .filter(|(p, t)| labels[p.label] == **t)
            .count();
        let line = format!(
            "accuracy: {} ({correct}/{})",
            correct as f64 / preds.len() as f64,
            preds.len()
        );
        if out.0.is_some() {
            println!("{line}");
        } else {
            eprintln!("{line}");
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct ClassSelectionOut {
    label: String,
    /// 1-based, matching the `x<j>` column names.
    relevant: Vec<usize>,
    n_queries: usize,
    mean_bandwidths: Vec<f64>,
    f_stat: Option<f64>,
    f_critical: f64,
    anova_rejected: bool,
    degenerate: bool,
}

#[derive(Serialize)]
struct SelectionOut {
    alpha: f64,
    classes: Vec<ClassSelectionOut>,
}

fn selection_out(label: String, n: usize, sel: SelectionResult) -> ClassSelectionOut {
    ClassSelectionOut {
        label,
        relevant: sel.relevant.iter().map(|j| j + 1).collect(),
        n_queries: n,
        mean_bandwidths: sel.means,
        f_stat: sel.f_stat,
        f_critical: sel.f_critical,
        anova_rejected: sel.anova_rejected,
        degenerate: sel.degenerate,
    }
}

fn join<T: ToString>(values: &[T], sep: &str) -> String {
    values.iter().map(T::to_string).collect::<Vec<_>>().join(sep)
}

pub fn select(g: &GlobalOpts, a: &SelectArgs) -> Result<()> {
    check_alpha(g.alpha)?;
    let data = read_dataset(&a.data)?;
    let model = FitModel::fit(&data, params(g)?)?;
    let classes: Vec<usize> = match &a.class {
        Some(label) => vec![model
            .labels()
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| CliError::Usage(format!("no class labeled `{label}`")))?],
        None => (0..model.n_classes()).collect(),
    };
    let selections = classes
        .iter()
        .map(|&c| {
            let sel = model.select_class(c, g.alpha)?;
            Ok(selection_out(model.classes()[c].label.clone(), model.classes()[c].n(), sel))
        })
        .collect::<Result<Vec<_>>>()?;
    let report = SelectionOut {
        alpha: g.alpha,
        classes: selections,
    };
    let out = output(g);
    match g.format {
        Format::Json => out.write_json(&report),
        Format::Csv => {
            let mut rows = vec![vec!["label".into(), "relevant".into(), "anova_rejected".into(), "degenerate".into()]];
            for c in &report.classes {
                rows.push(vec![
                    c.label.clone(),
                    join(&c.relevant, " "),
                    c.anova_rejected.to_string(),
                    c.degenerate.to_string(),
                ]);
            }
            out.write_csv(&rows)
        }
        Format::Table => {
            let mut text = format!("{:<10} {:>8}  relevant variables\n", "class", "F");
            for c in &report.classes {
                let f = c.f_stat.map_or("-".to_string(), |f| format!("{f:.2}"));
                let vars: Vec<String> = c.relevant.iter().map(|j| format!("x{j}")).collect();
                text.push_str(&format!("{:<10} {:>8}  {}\n", c.label, f, vars.join(" ")));
            }
            out.write_bytes(text.as_bytes())
        }
    }
}

#[derive(Serialize)]
struct PlanClassOut {
    label: String,
    n_current: usize,
    n_planned: usize,
    #[serde(rename = "A")]
    a: f64,
    #[serde(rename = "B")]
    b: Option<f64>,
    r_hat: usize,
}

#[derive(Serialize)]
struct PlanOut {
    n_total: usize,
    epsilon: f64,
    lambda: f64,
    feasible: bool,
    classes: Vec<PlanClassOut>,
}

pub fn plan(g: &GlobalOpts, a: &PlanArgs) -> Result<()> {
    check_alpha(g.alpha)?;
    let data = read_dataset(&a.data)?;
    let model = FitModel::fit(&data, params(g)?)?;
    let selections = (0..model.n_classes())
        .into_par_iter()
        .map(|c| model.select_class(c, g.alpha))
        .collect::<npkdc::Result<Vec<_>>>()?;
    for (class, sel) in model.classes().iter().zip(&selections) {
        if sel.relevant.is_empty() {
            eprintln!("class {}: no relevant variables, planned at the uniform share", class.label);
        }
    }
    let inputs = plan_inputs(&model, &selections, &npkdc::density::kernel_constants())?;
    let plan = plan_sizes(&inputs, a.epsilon, a.budget)?;
    let report = PlanOut {
        n_total: plan.n_total,
        epsilon: plan.epsilon,
        lambda: plan.lambda,
        feasible: plan.feasible,
        classes: model
            .classes()
            .iter()
            .enumerate()
            .map(|(i, c)| PlanClassOut {
                label: c.label.clone(),
                n_current: c.n(),
                n_planned: plan.sizes[i],
                a: plan.a[i],
                b: plan.b[i],
                r_hat: plan.r_hat[i],
            })
            .collect(),
    };
    let out = output(g);
    match g.format {
        Format::Json => out.write_json(&report),
        Format::Csv | Format::Table => {
            let mut rows = vec![vec![
                "label".to_string(),
                "n_current".into(),
                "n_planned".into(),
                "A".into(),
                "B".into(),
                "r_hat".into(),
            ]];
            for c in &report.classes {
                rows.push(vec![
                    c.label.clone(),
                    c.n_current.to_string(),
                    c.n_planned.to_string(),
                    c.a.to_string(),
                    c.b.map_or(String::new(), |b| b.to_string()),
                    c.r_hat.to_string(),
                ]);
            }
            if g.format == Format::Csv {
                out.write_csv(&rows)
            } else {
                let text: String = rows
                    .iter()
                    .map(|r| format!("{:<10} {:>10} {:>10} {:>14} {:>14} {:>6}\n", r[0], r[1], r[2], short(&r[3]), short(&r[4]), r[5]))
                    .collect();
                out.write_bytes(text.as_bytes())
            }
        }
    }
}

fn short(v: &str) -> String {
    v.parse::<f64>().map_or(v.to_string(), |x| format!("{x:.4}"))
}

pub fn bench(g: &GlobalOpts, a: &BenchArgs) -> Result<()> {
    let Some(seed) = g.seed else {
        return Err(CliError::Usage("bench requires --seed (or NPKDC_SEED)".into()));
    };
    check_alpha(g.alpha)?;
    if a.methods.is_empty() {
        return Err(CliError::Usage("--methods needs at least one method".into()));
    }
    let mut config = ExperimentConfig::new(a.design.generator()?, a.design.n_train, a.design.n_test, a.reps, seed);
    let mut methods: Vec<Method> = Vec::new();
    for m in &a.methods {
        let method = match m {
            ModeArg::Rodeo => Method::Rodeo,
            ModeArg::Fixed => Method::Fixed { h: a.fixed_h },
        };
        if !methods.contains(&method) {
            methods.push(method);
        }
    }
    config.methods = methods;
    config.params = params(g)?;
    config.prior_mode = a.prior.into();
    config.alpha = g.alpha;
    config.noise_variables = a.design.noise;
    config.selection = match a.selection {
        SelectionArg::Predicted => SelectionSource::PredictedLabels,
        SelectionArg::Training => SelectionSource::Training,
        SelectionArg::None => SelectionSource::None,
    };
    let report = run_replications(&config)?;
    for f in &report.failures {
        eprintln!("replication {} failed: {}", f.replication, f.message);
    }
    let out = output(g);
    match g.format {
        Format::Json => out.write_json(&report),
        Format::Table => out.write_bytes(report.render_table().as_bytes()),
        Format::Csv => {
            let mut rows = vec![vec![
                "replication".to_string(),
                "method".into(),
                "accuracy".into(),
                "precision".into(),
                "specificity".into(),
            ]];
            for row in &report.rows {
                for run in &row.runs {
                    rows.push(vec![
                        row.replication.to_string(),
                        run.method.name(),
                        run.metrics.accuracy.to_string(),
                        run.metrics.precision.to_string(),
                        run.metrics.specificity.to_string(),
                    ]);
                }
            }
            out.write_csv(&rows)
        }
    }
}

