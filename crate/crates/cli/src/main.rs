//! `npkdc`: generate data, train, predict, select variables, plan sample sizes
//! and run replicated benchmarks from the command line.

mod commands;
mod error;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "npkdc", version, about = "Kernel density classification with per-class variable detection")]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
pub struct GlobalOpts {
    /// Seed for every random draw.
    #[arg(long, global = true, env = "NPKDC_SEED")]
    pub seed: Option<u64>,
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true, env = "NPKDC_THREADS")]
    pub threads: Option<usize>,
    /// Significance level of the variable-selection tests.
    #[arg(long, global = true, env = "NPKDC_ALPHA", default_value_t = npkdc::DEFAULT_ALPHA)]
    pub alpha: f64,
    /// Initial-bandwidth constant: h0 = c0 / ln ln n.
    #[arg(long, global = true, env = "NPKDC_C0", default_value_t = 10.0)]
    pub c0: f64,
    /// Bandwidth shrink factor per step.
    #[arg(long, global = true, env = "NPKDC_GAMMA", default_value_t = 0.9)]
    pub gamma: f64,
    /// Smallest bandwidth the search may reach (default: h0 * gamma^100).
    #[arg(long, global = true, env = "NPKDC_H_MIN")]
    pub h_min: Option<f64>,
    /// Output file (default: standard output).
    #[arg(short, long, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, global = true, value_enum, env = "NPKDC_FORMAT", default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Table,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExampleKind {
    #[value(name = "1")]
    One,
    #[value(name = "2")]
    Two,
    /// Two 1-d normal classes, N(0,1) and N(separation,1).
    Pair,
}

#[derive(Subcommand)]
enum Command {
    /// Write synthetic train/test CSV files.
    Gen(commands::GenArgs),
    /// Fit a model from a labeled CSV and write it as JSON.
    Train(commands::TrainArgs),
    /// Classify the rows of a CSV with a saved model.
    Predict(commands::PredictArgs),
    /// Report each class's relevant variables.
    Select(commands::SelectArgs),
    /// Plan per-class training sizes for a total budget.
    Plan(commands::PlanArgs),
    /// Run replicated experiments on a synthetic design.
    Bench(commands::BenchArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.global.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start worker pool: {e}");
            return ExitCode::from(3);
        }
    }
    let g = &cli.global;
    let result = match &cli.command {
        Command::Gen(a) => commands::gen(g, a),
        Command::Train(a) => commands::train(g, a),
        Command::Predict(a) => commands::predict(g, a),
        Command::Select(a) => commands::select(g, a),
        Command::Plan(a) => commands::plan(g, a),
        Command::Bench(a) => commands::bench(g, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
