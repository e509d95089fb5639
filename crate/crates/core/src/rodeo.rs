//! Greedy per-coordinate bandwidth shrinking at a single query point.
//!
//! All bandwidths start at a common large `h0`. Each sweep visits the active
//! coordinates in ascending order; coordinate `j` is shrunk by `gamma` while
//! the bandwidth derivative `|Z_j|` exceeds the noise threshold
//! `λ_j = s_j √(2 ln(n c_n))`, and leaves the active set otherwise.

use serde::{Deserialize, Serialize};

use crate::data::ClassSamples;
use crate::density::{check_query, log_class_density, sample_log_weights, BandwidthVector, VarianceMode};
use crate::error::{domain, Error, Result};

/// The `c_n` sequence in the threshold `λ_j = s_j √(2 ln(n c_n))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CnRule {
    /// `c_n = ln n`.
    LogN,
    Constant(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RodeoParams {
    pub c0: f64,
    pub gamma: f64,
    pub cn: CnRule,
    /// Bandwidth floor; `None` means `h0 · gamma^100`.
    pub h_min: Option<f64>,
    /// Overrides `c0 / ln ln n` when set.
    pub h0: Option<f64>,
    /// Maximum number of shrinks per coordinate.
    pub max_steps: u32,
    pub variance: VarianceMode,
}

impl Default for RodeoParams {
    fn default() -> Self {
        Self {
            c0: 10.0,
            gamma: 0.9,
            cn: CnRule::LogN,
            h_min: None,
            h0: None,
            max_steps: 200,
            variance: VarianceMode::OfMean,
        }
    }
}

impl RodeoParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "gamma must lie in (0, 1), got {}",
                self.gamma
            )));
        }
        if !(self.c0.is_finite() && self.c0 > 0.0) {
            return Err(Error::InvalidConfig(format!("c0 must be positive, got {}", self.c0)));
        }
        if let Some(h) = self.h_min {
            if !(h.is_finite() && h > 0.0) {
                return Err(Error::InvalidConfig("h_min must be positive".into()));
            }
        }
        if let Some(h) = self.h0 {
            if !(h.is_finite() && h > 0.0) {
                return Err(Error::InvalidConfig("h0 must be positive".into()));
            }
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidConfig("max_steps must be at least 1".into()));
        }
        if let CnRule::Constant(c) = self.cn {
            if !(c.is_finite() && c > 0.0) {
                return Err(Error::InvalidConfig("c_n must be positive".into()));
            }
        }
        Ok(())
    }

    fn cn(&self, n: usize) -> f64 {
        match self.cn {
            CnRule::LogN => (n as f64).ln(),
            CnRule::Constant(c) => c,
        }
    }

    /// `√(2 ln(n c_n))`, clamped at zero.
    pub fn threshold_factor(&self, n: usize) -> f64 {
        (2.0 * (n as f64 * self.cn(n)).ln()).max(0.0).sqrt()
    }

    /// The starting bandwidth for a class of `n` samples.
    pub fn start_bandwidth(&self, n: usize) -> Result<f64> {
        match self.h0 {
            Some(h) => Ok(h),
            None => initial_bandwidth(n, self),
        }
    }

    fn floor(&self, h0: f64) -> f64 {
        self.h_min.unwrap_or(h0 * self.gamma.powi(100))
    }
}

/// `h0 = c0 / ln ln n`; requires `ln ln n > 1`, i.e. `n ≥ 16`.
pub fn initial_bandwidth(n: usize, params: &RodeoParams) -> Result<f64> {
    let loglog = (n as f64).ln().ln();
    if !(loglog > 1.0) {
        return Err(domain(format!(
            "initial bandwidth needs ln ln n > 1 (n >= 16), got n = {n}"
        )));
    }
    Ok(params.c0 / loglog)
}

/// Outcome of the bandwidth search at one query point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalBandwidthResult {
    pub h_hat: BandwidthVector,
    pub h0: f64,
    /// `ln f̂(x; ĥ)`.
    pub log_density: f64,
    pub steps_taken: Vec<u32>,
}

impl LocalBandwidthResult {
    pub fn density(&self) -> f64 {
        self.log_density.exp()
    }
}

pub fn local_bandwidths(
    x: &[f64],
    samples: &ClassSamples,
    params: &RodeoParams,
) -> Result<LocalBandwidthResult> {
    params.validate()?;
    let n = samples.len();
    if n < 2 {
        return Err(Error::TooFewSamples {
            class: 0,
            found: n,
            required: 2,
        });
    }
    let d = samples.dim();
    let h0 = params.start_bandwidth(n)?;
    check_query(x, samples, &BandwidthVector::uniform(d, h0)?)?;
    let h_min = params.floor(h0);
    if h0 < h_min {
        return Err(Error::InvalidConfig(format!(
            "h0 = {h0} lies below h_min = {h_min}"
        )));
    }
    let threshold = params.threshold_factor(n);

    let sq: Vec<f64> = samples
        .rows()
        .flat_map(|row| row.iter().zip(x).map(|(a, b)| (b - a) * (b - a)))
        .collect();
    let n_f = n as f64;

    let mut steps = vec![0u32; d];
    let mut h = vec![h0; d];
    let mut active: Vec<usize> = (0..d).collect();
    let mut logw = sample_log_weights(x, samples, &h);
    // exp(logw - max logw), refreshed only after a shrink changes logw.
    let mut w = vec![0.0; n];
    let mut terms = vec![0.0; n];
    let mut stale = true;

    while !active.is_empty() {
        let mut still_active = Vec::with_capacity(active.len());
        for &j in &active {
            if stale {
                let shift = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                for (wi, lw) in w.iter_mut().zip(&logw) {
                    *wi = (lw - shift).exp();
                }
                stale = false;
            }
            let hj = h[j];
            let h2 = hj * hj;
            let h3 = h2 * hj;
            for (i, (t, wi)) in terms.iter_mut().zip(&w).enumerate() {
                *t = wi * (sq[i * d + j] - h2) / h3;
            }
            let mean = terms.iter().sum::<f64>() / n_f;
            let var = terms.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / (n_f - 1.0);
            let spread = match params.variance {
                VarianceMode::OfMean => (var / n_f).sqrt(),
                VarianceMode::PerSample => var.sqrt(),
            };
            let shrink = if spread == 0.0 {
                mean != 0.0
            } else {
                mean.abs() > spread * threshold
            };
            if !shrink || steps[j] >= params.max_steps {
                continue;
            }
            let next = h0 * params.gamma.powi(steps[j] as i32 + 1);
            if next < h_min {
                continue;
            }
            // ln K_next − ln K_h = ln(h/next) − ½ s (1/next² − 1/h²).
            let shift = (hj / next).ln();
            let curv = 0.5 * (1.0 / (next * next) - 1.0 / h2);
            for (i, lw) in logw.iter_mut().enumerate() {
                *lw += shift - curv * sq[i * d + j];
            }
            stale = true;
            h[j] = next;
            steps[j] += 1;
            still_active.push(j);
        }
        active = still_active;
    }

    let h_hat = BandwidthVector::new(h)?;
    let log_density = log_class_density(x, samples, &h_hat)?;
    Ok(LocalBandwidthResult {
        h_hat,
        h0,
        log_density,
        steps_taken: steps,
    })
}
