//! Nonparametric kernel density classification with per-class, per-variable
//! bandwidths.
//!
//! Each class keeps its training points. At a query, a greedy search shrinks
//! one bandwidth per variable while the density keeps changing by more than
//! its noise level; variables that matter to a class end with small
//! bandwidths. Averaging those bandwidths over many queries and testing them
//! (ANOVA, then Tukey's studentized range) gives each class its own set of
//! relevant variables.
//!
//! ```
//! use npkdc::{FitModel, PredictMode, RodeoParams};
//! use npkdc::synth::gen_gaussian_pair;
//!
//! let (train, test) = gen_gaussian_pair(3, 2.0, 200, 50)?;
//! let model = FitModel::fit(&train, RodeoParams::default())?;
//! let preds = model.predict_dataset(&test, PredictMode::Rodeo)?;
//! let correct = preds.iter().zip(test.labels()).filter(|(p, &y)| p.label == y).count();
//! assert!(correct > 60);
//! # Ok::<(), npkdc::Error>(())
//! ```

pub mod classifier;
pub mod data;
pub mod density;
pub mod dist;
pub mod error;
pub mod harness;
pub mod numeric;
pub mod rng;
pub mod rodeo;
pub mod sample_size;
pub mod selection;
pub mod synth;

pub use classifier::{FitModel, PredictMode, Prediction, PriorMode, DEFAULT_FIXED_BANDWIDTH};
pub use data::{ClassSamples, LabeledDataset};
pub use density::{BandwidthVector, VarianceMode};
pub use error::{Error, Result};
pub use harness::{run_replications, ExperimentConfig, Generator, Method, ReplicationReport};
pub use rodeo::{local_bandwidths, LocalBandwidthResult, RodeoParams};
pub use sample_size::{plan_sizes, two_stage, SizePlan};
pub use selection::{select_relevant, BandwidthSample, SelectionResult, DEFAULT_ALPHA};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/density.md")]
    mod density {}
    #[doc = include_str!("../../../book/src/rodeo.md")]
    mod rodeo {}
    #[doc = include_str!("../../../book/src/selection.md")]
    mod selection {}
    #[doc = include_str!("../../../book/src/classification.md")]
    mod classification {}
    #[doc = include_str!("../../../book/src/sample-size.md")]
    mod sample_size {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
