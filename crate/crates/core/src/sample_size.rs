//! Per-class training-size planning.
//!
//! The error bound of the classifier is dominated by
//! `Σ_y A_y B_y` with `A_y = n_y^((2+r_y)/(4+r_y))` (a rate term) and `B_y` a
//! density-complexity term. For a fixed total budget the planner makes `A`
//! proportional to `B`, estimating `B_y` by Monte Carlo over the class's own
//! pilot samples.

use serde::{Deserialize, Serialize};

use crate::classifier::FitModel;
use crate::data::{ClassSamples, LabeledDataset};
use crate::density::{sample_log_weights, KernelConstants};
use crate::error::{Error, Result};
use crate::rodeo::RodeoParams;
use crate::selection::SelectionResult;

/// Smallest pilot size per class accepted by [`two_stage`].
pub const MIN_PILOT_PER_CLASS: usize = 30;

/// `A = n^((2+r)/(4+r))`.
pub fn a_value(n: f64, r: usize) -> f64 {
    let r = r as f64;
    n.powf((2.0 + r) / (4.0 + r))
}

/// Scale constants `k_j = h̄_j · n^(1/(4+r))`, reading each mean bandwidth
/// as `k_j n^(-1/(4+r))`.
pub fn k_hat(relevant_bandwidths: &[f64], n: usize, r: usize) -> Vec<f64> {
    let rate = (n as f64).powf(1.0 / (4.0 + r as f64));
    relevant_bandwidths.iter().map(|h| h * rate).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BEstimate {
    pub b: f64,
    /// `(ν/2) · mean |Σ_j k_j² f̂^(jj)(x)| / f̂(x)`.
    pub curvature_term: f64,
    /// `κ(r) (Π_j k_j)^(-1/2) · mean f̂(x)^(-1/2)`.
    pub spread_term: f64,
    pub k_hat: Vec<f64>,
    /// Samples skipped because `f̂(x)` underflowed to zero.
    pub excluded: usize,
}

/// Monte Carlo estimate of `B` for one class.
///
/// `f̂` is the class density restricted to `relevant`, with bandwidths
/// `mean_bandwidths[relevant]`; the class's own samples serve as draws from
/// `f`, so each integral `∫ g` becomes the sample mean of `g(x)/f̂(x)`.
pub fn estimate_b(
    samples: &ClassSamples,
    relevant: &[usize],
    mean_bandwidths: &[f64],
    constants: &KernelConstants,
) -> Result<BEstimate> {
    let r = relevant.len();
    if r == 0 {
        return Err(Error::Contract("estimate_b needs at least one relevant variable".into()));
    }
    if mean_bandwidths.len() != samples.dim() {
        return Err(Error::DimensionMismatch {
            expected: samples.dim(),
            found: mean_bandwidths.len(),
        });
    }
    let restricted = samples.select_columns(relevant)?;
    let h: Vec<f64> = relevant.iter().map(|&j| mean_bandwidths[j]).collect();
    if h.iter().any(|&v| !(v.is_finite() && v > 0.0)) {
        return Err(Error::Domain("mean bandwidths must be positive".into()));
    }
    let n = restricted.len();
    let k = k_hat(&h, n, r);

    let mut curvature = 0.0;
    let mut spread = 0.0;
    let mut used = 0usize;
    for x in restricted.rows() {
        let logw = sample_log_weights(x, &restricted, &h);
        let shift = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if shift == f64::NEG_INFINITY {
            continue;
        }
        // Shifted sums: f̂ = e^shift · f_s / n and f̂^(jj) = e^shift · c_j / n.
        let mut f_s = 0.0;
        let mut curv_s = 0.0;
        for (i, lw) in logw.iter().enumerate() {
            let w = (lw - shift).exp();
            f_s += w;
            let row = restricted.row(i);
            let mut inner = 0.0;
            for (jj, (&kj, &hj)) in k.iter().zip(&h).enumerate() {
                let u = (x[jj] - row[jj]) / hj;
                inner += kj * kj * (u * u - 1.0) / (hj * hj);
            }
            curv_s += w * inner;
        }
        let log_f = shift + f_s.ln() - (n as f64).ln();
        if !log_f.is_finite() {
            continue;
        }
        curvature += (curv_s / f_s).abs();
        spread += (-0.5 * log_f).exp();
        used += 1;
    }
    if used == 0 {
        return Err(Error::Numerical("density vanished at every sample".into()));
    }
    let curvature_term = 0.5 * constants.nu * curvature / used as f64;
    let k_prod_log: f64 = k.iter().map(|v| v.ln()).sum();
    let spread_term = constants.kappa(r as u32)? * (-0.5 * k_prod_log).exp() * spread / used as f64;
    Ok(BEstimate {
        b: curvature_term + spread_term,
        curvature_term,
        spread_term,
        k_hat: k,
        excluded: n - used,
    })
}

/// Planner input for one class. `b` is `None` when no relevant variable was
/// found; such classes receive the uniform share.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanInput {
    pub n_current: usize,
    pub r_hat: usize,
    pub b: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizePlan {
    /// Integer sizes, summing to `n_total`.
    pub sizes: Vec<usize>,
    /// Sizes before rounding.
    pub unrounded: Vec<f64>,
    /// `A_y` at the unrounded sizes.
    pub a: Vec<f64>,
    pub b: Vec<Option<f64>>,
    pub r_hat: Vec<usize>,
    /// Proportionality constant `A_y = λ B_y`.
    pub lambda: f64,
    pub epsilon: f64,
    pub n_total: usize,
    /// `Σ A_y B_y ≤ n_total · ε` at the solution.
    pub feasible: bool,
    /// Classes planned at the uniform share for lack of relevant variables.
    pub uniform_share: Vec<usize>,
}

/// Largest-remainder rounding preserving `total`. Ties go to the lower index.
pub fn round_preserving_total(values: &[f64], total: usize) -> Vec<usize> {
    let mut sizes: Vec<usize> = values.iter().map(|v| v.max(0.0).floor() as usize).collect();
    let assigned: usize = sizes.iter().sum();
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = values[a] - values[a].floor();
        let fb = values[b] - values[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    let mut remaining = total.saturating_sub(assigned);
    for &i in order.iter().cycle() {
        if remaining == 0 {
            break;
        }
        sizes[i] += 1;
        remaining -= 1;
    }
    sizes
}

/// Solves `A_y(n_y) = λ B_y` for all classes with `Σ n_y = n_total`.
pub fn plan_sizes(inputs: &[PlanInput], epsilon: f64, n_total: usize) -> Result<SizePlan> {
    if !(epsilon > 0.0) {
        return Err(Error::Domain(format!("epsilon must be positive, got {epsilon}")));
    }
    if inputs.is_empty() {
        return Err(Error::EmptySamples);
    }
    let current: usize = inputs.iter().map(|p| p.n_current).sum();
    if n_total < current {
        return Err(Error::InvalidConfig(format!(
            "budget {n_total} is below the current total {current}"
        )));
    }
    for p in inputs {
        if let Some(b) = p.b {
            if !(b.is_finite() && b > 0.0) {
                return Err(Error::Domain(format!("B must be positive, got {b}")));
            }
        }
    }
    let c = inputs.len() as f64;
    let share = n_total as f64 / c;
    let planned: Vec<usize> = (0..inputs.len())
        .filter(|&i| inputs[i].r_hat > 0 && inputs[i].b.is_some())
        .collect();
    let uniform_share: Vec<usize> = (0..inputs.len()).filter(|i| !planned.contains(i)).collect();
    let budget = n_total as f64 - share * uniform_share.len() as f64;

    let exponent = |r: usize| (4.0 + r as f64) / (2.0 + r as f64);
    let ln_size = |i: usize, ln_lambda: f64| {
        let p = &inputs[i];
        exponent(p.r_hat) * (ln_lambda + p.b.unwrap().ln())
    };
    let total_at = |ln_lambda: f64| -> f64 { planned.iter().map(|&i| ln_size(i, ln_lambda).exp()).sum() };

    let mut unrounded = vec![share; inputs.len()];
    let mut ln_lambda = f64::NAN;
    if !planned.is_empty() {
        let (mut lo, mut hi) = (-1.0, 1.0);
        while total_at(lo) > budget {
            lo *= 2.0;
        }
        while total_at(hi) < budget {
            hi *= 2.0;
        }
        for _ in 0..300 {
            let mid = 0.5 * (lo + hi);
            if mid == lo || mid == hi {
                break;
            }
            if total_at(mid) < budget {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        ln_lambda = 0.5 * (lo + hi);
        for &i in &planned {
            unrounded[i] = ln_size(i, ln_lambda).exp();
        }
    }

    let a: Vec<f64> = unrounded
        .iter()
        .zip(inputs)
        .map(|(&n, p)| a_value(n, p.r_hat))
        .collect();
    let bound: f64 = planned.iter().map(|&i| a[i] * inputs[i].b.unwrap()).sum();
    Ok(SizePlan {
        sizes: round_preserving_total(&unrounded, n_total),
        unrounded,
        a,
        b: inputs.iter().map(|p| p.b).collect(),
        r_hat: inputs.iter().map(|p| p.r_hat).collect(),
        lambda: ln_lambda.exp(),
        epsilon,
        n_total,
        feasible: bound <= n_total as f64 * epsilon,
        uniform_share,
    })
}

/// Planner inputs for every class of a fitted model, given its selections.
pub fn plan_inputs(
    model: &FitModel,
    selections: &[SelectionResult],
    constants: &KernelConstants,
) -> Result<Vec<PlanInput>> {
    if selections.len() != model.n_classes() {
        return Err(Error::DimensionMismatch {
            expected: model.n_classes(),
            found: selections.len(),
        });
    }
    model
        .classes()
        .iter()
        .zip(selections)
        .map(|(class, sel)| {
            let b = if sel.relevant.is_empty() {
                None
            } else {
                Some(estimate_b(&class.samples, &sel.relevant, &sel.means, constants)?.b)
            };
            Ok(PlanInput {
                n_current: class.n(),
                r_hat: sel.relevant.len(),
                b,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoStageOutcome {
    pub plan: SizePlan,
    pub selections: Vec<SelectionResult>,
    /// Additional samples asked of the sampler, per class.
    pub requested: Vec<usize>,
    pub received: Vec<usize>,
    pub shortfall: Vec<usize>,
    pub model: FitModel,
}

/// Estimation step on the pilot, then one resampling step.
///
/// `sampler(class, count)` should return up to `count` new rows for `class`;
/// returning fewer is recorded as a shortfall.
pub fn two_stage<S>(
    pilot: &LabeledDataset,
    params: RodeoParams,
    alpha: f64,
    epsilon: f64,
    n_total: usize,
    mut sampler: S,
) -> Result<TwoStageOutcome>
where
    S: FnMut(usize, usize) -> Vec<Vec<f64>>,
{
    if let Some((class, &found)) = pilot
        .class_counts()
        .iter()
        .enumerate()
        .find(|(_, &n)| n < MIN_PILOT_PER_CLASS)
    {
        return Err(Error::TooFewSamples {
            class,
            found,
            required: MIN_PILOT_PER_CLASS,
        });
    }
    let mut model = FitModel::fit(pilot, params)?;
    let selections = (0..model.n_classes())
        .map(|c| model.select_class(c, alpha))
        .collect::<Result<Vec<_>>>()?;
    let inputs = plan_inputs(&model, &selections, &crate::density::kernel_constants())?;
    let plan = plan_sizes(&inputs, epsilon, n_total)?;

    let mut requested = Vec::with_capacity(inputs.len());
    let mut received = Vec::with_capacity(inputs.len());
    for (class, (input, &target)) in inputs.iter().zip(&plan.sizes).enumerate() {
        let need = target.saturating_sub(input.n_current);
        requested.push(need);
        if need == 0 {
            received.push(0);
            continue;
        }
        let mut rows = sampler(class, need);
        rows.truncate(need);
        received.push(rows.len());
        model.add_samples(class, &rows)?;
    }
    let shortfall = requested.iter().zip(&received).map(|(r, g)| r - g).collect();
    Ok(TwoStageOutcome {
        plan,
        selections,
        requested,
        received,
        shortfall,
        model,
    })
}
