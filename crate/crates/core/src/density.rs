//! Product-Gaussian kernel mathematics.
//!
//! Every quantity here is a sample average of per-sample products of `d`
//! one-dimensional kernels. The products are accumulated as log-weights
//! `log Π_k (1/h_k) K(u_ik)`, and sample averages are taken after shifting by
//! the largest log-weight, so `d = 64` with small bandwidths never underflows
//! before the final (optional) exponentiation.

use serde::{Deserialize, Serialize};

use crate::data::ClassSamples;
use crate::error::{check_finite, domain, Error, Result};

/// `ln √(2π)`.
pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Standard Gaussian kernel `(2π)^(-1/2) exp(-u²/2)`.
pub fn gaussian_kernel(u: f64) -> Result<f64> {
    if !u.is_finite() {
        return Err(domain("kernel argument must be finite"));
    }
    Ok((-0.5 * u * u - LN_SQRT_2PI).exp())
}

/// Per-coordinate kernel bandwidths, all strictly positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct BandwidthVector(Vec<f64>);

impl BandwidthVector {
    pub fn new(h: Vec<f64>) -> Result<Self> {
        if h.is_empty() {
            return Err(domain("bandwidth vector must be nonempty"));
        }
        if h.iter().any(|&v| !(v.is_finite() && v > 0.0)) {
            return Err(domain("bandwidths must be finite and positive"));
        }
        Ok(Self(h))
    }

    pub fn uniform(dim: usize, h: f64) -> Result<Self> {
        Self::new(vec![h; dim])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl TryFrom<Vec<f64>> for BandwidthVector {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<BandwidthVector> for Vec<f64> {
    fn from(h: BandwidthVector) -> Self {
        h.0
    }
}

/// How the spread `s_j` of the bandwidth derivative is estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceMode {
    /// Standard error of the mean: `s² = Σ (Z_ji − Z̄)² / (n(n−1))`.
    #[default]
    OfMean,
    /// Sample standard deviation of the individual `Z_ji`.
    PerSample,
}

/// Kernel moment constants of the standard Gaussian kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelConstants {
    /// Per-coordinate second moment `∫ u² K(u) du`.
    pub nu: f64,
}

impl KernelConstants {
    /// `(∫ K_r²)^(1/2)` for the `r`-dimensional product kernel, i.e. `(2√π)^(-r/2)`.
    pub fn kappa(&self, r: u32) -> Result<f64> {
        if r < 1 {
            return Err(domain("kappa requires r >= 1"));
        }
        Ok((2.0 * std::f64::consts::PI.sqrt()).powf(-(r as f64) / 2.0))
    }
}

pub fn kernel_constants() -> KernelConstants {
    KernelConstants { nu: 1.0 }
}

pub(crate) fn check_query(x: &[f64], samples: &ClassSamples, h: &BandwidthVector) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    if x.len() != samples.dim() {
        return Err(Error::DimensionMismatch {
            expected: samples.dim(),
            found: x.len(),
        });
    }
    if h.len() != samples.dim() {
        return Err(Error::DimensionMismatch {
            expected: samples.dim(),
            found: h.len(),
        });
    }
    check_finite(x, "query point")
}

/// Log of `Π_k (1/h_k) K((x_k − x_ik)/h_k)` for every sample `i`.
pub(crate) fn sample_log_weights(x: &[f64], samples: &ClassSamples, h: &[f64]) -> Vec<f64> {
    let log_norm: f64 = -h.iter().map(|v| v.ln()).sum::<f64>() - h.len() as f64 * LN_SQRT_2PI;
    samples
        .rows()
        .map(|row| {
            let quad: f64 = row
                .iter()
                .zip(x)
                .zip(h)
                .map(|((xi, xq), hk)| {
                    let u = (xq - xi) / hk;
                    u * u
                })
                .sum();
            log_norm - 0.5 * quad
        })
        .collect()
}

/// `ln f̂(x)` with `f̂(x) = (1/n) Σ_i Π_j (1/h_j) K((x_j − x_ij)/h_j)`.
pub fn log_class_density(x: &[f64], samples: &ClassSamples, h: &BandwidthVector) -> Result<f64> {
    check_query(x, samples, h)?;
    let logw = sample_log_weights(x, samples, h.as_slice());
    Ok(crate::numeric::log_sum_exp(&logw) - (samples.len() as f64).ln())
}

/// A weighted sample average held as `exp(log_scale) · mean`, with the
/// matching spread `exp(log_scale) · spread`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct ScaledAverage {
    pub log_scale: f64,
    pub mean: f64,
    pub spread: f64,
}

/// Averages `factor_i · exp(logw_i)` with the max-shift, returning the mean
/// and the spread estimate selected by `mode`.
pub(crate) fn scaled_average<F>(logw: &[f64], mut factor: F, mode: VarianceMode) -> ScaledAverage
where
    F: FnMut(usize) -> f64,
{
    let n = logw.len();
    let shift = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let terms: Vec<f64> = logw
        .iter()
        .enumerate()
        .map(|(i, &lw)| factor(i) * (lw - shift).exp())
        .collect();
    let mean = terms.iter().sum::<f64>() / n as f64;
    let spread = if n < 2 {
        0.0
    } else {
        let ss: f64 = terms.iter().map(|t| (t - mean).powi(2)).sum();
        let var = ss / (n - 1) as f64;
        match mode {
            VarianceMode::OfMean => (var / n as f64).sqrt(),
            VarianceMode::PerSample => var.sqrt(),
        }
    };
    ScaledAverage {
        log_scale: shift,
        mean,
        spread,
    }
}

/// Derivative of the class density with respect to one bandwidth, and its
/// estimated standard deviation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RodeoDerivative {
    pub z: f64,
    pub s: f64,
}

/// `Z_j = ∂f̂/∂h_j` with `s_j` the standard error of the mean.
pub fn rodeo_derivative(
    x: &[f64],
    samples: &ClassSamples,
    h: &BandwidthVector,
    j: usize,
) -> Result<RodeoDerivative> {
    rodeo_derivative_with(x, samples, h, j, VarianceMode::OfMean)
}

pub fn rodeo_derivative_with(
    x: &[f64],
    samples: &ClassSamples,
    h: &BandwidthVector,
    j: usize,
    mode: VarianceMode,
) -> Result<RodeoDerivative> {
    check_query(x, samples, h)?;
    if j >= samples.dim() {
        return Err(Error::DimensionMismatch {
            expected: samples.dim(),
            found: j + 1,
        });
    }
    let logw = sample_log_weights(x, samples, h.as_slice());
    let hj = h.as_slice()[j];
    let avg = scaled_average(
        &logw,
        |i| {
            let diff = x[j] - samples.row(i)[j];
            (diff * diff - hj * hj) / (hj * hj * hj)
        },
        mode,
    );
    let scale = avg.log_scale.exp();
    Ok(RodeoDerivative {
        z: avg.mean * scale,
        s: avg.spread * scale,
    })
}

/// `∂²f̂/∂x_j²` at `x`.
pub fn second_partial(
    x: &[f64],
    samples: &ClassSamples,
    h: &BandwidthVector,
    j: usize,
) -> Result<f64> {
    check_query(x, samples, h)?;
    if j >= samples.dim() {
        return Err(Error::DimensionMismatch {
            expected: samples.dim(),
            found: j + 1,
        });
    }
    let logw = sample_log_weights(x, samples, h.as_slice());
    let hj = h.as_slice()[j];
    let avg = scaled_average(
        &logw,
        |i| {
            let u = (x[j] - samples.row(i)[j]) / hj;
            (u * u - 1.0) / (hj * hj)
        },
        VarianceMode::OfMean,
    );
    Ok(avg.mean * avg.log_scale.exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

    // Direct non-log evaluation, independent of the log-weight path.
    fn direct_density(x: &[f64], rows: &[Vec<f64>], h: &[f64]) -> f64 {
        let mut total = 0.0;
        for row in rows {
            let mut prod = 1.0;
            for k in 0..x.len() {
                let u = (x[k] - row[k]) / h[k];
                prod *= FRAC_1_SQRT_2PI * (-0.5 * u * u).exp() / h[k];
            }
            total += prod;
        }
        total / rows.len() as f64
    }

    fn random_instance(rng: &mut ChaCha8Rng, n: usize, d: usize) -> (Vec<f64>, Vec<Vec<f64>>, Vec<f64>) {
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let x = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let h = (0..d).map(|_| rng.random_range(0.3..1.5)).collect();
        (x, rows, h)
    }

    #[test]
    fn kernel_values() {
        assert!((gaussian_kernel(0.0).unwrap() - 0.398_942_3).abs() < 1e-7);
        assert!((gaussian_kernel(1.0).unwrap() - 0.241_970_7).abs() < 1e-7);
        assert_eq!(gaussian_kernel(2.5).unwrap(), gaussian_kernel(-2.5).unwrap());
        assert!(gaussian_kernel(f64::NAN).is_err());
        assert!(gaussian_kernel(f64::INFINITY).is_err());
    }

    #[test]
    fn density_at_single_coincident_point() {
        let s = ClassSamples::from_rows(&[[0.3, -0.2]]).unwrap();
        let h = BandwidthVector::uniform(2, 1.0).unwrap();
        let v = log_class_density(&[0.3, -0.2], &s, &h).unwrap();
        assert!((v - (-1.837_877)).abs() < 1e-6);
    }

    #[test]
    fn far_point_contributes_nothing() {
        let s = ClassSamples::from_rows(&[[0.0, 0.0], [1e6, -1e6]]).unwrap();
        let h = BandwidthVector::uniform(2, 1.0).unwrap();
        let v = log_class_density(&[0.0, 0.0], &s, &h).unwrap();
        let expected = (0.5 / (2.0 * std::f64::consts::PI)).ln();
        assert!((v - expected).abs() < 1e-12);
    }

    #[test]
    fn density_errors() {
        let empty = ClassSamples::new(2, vec![]).unwrap();
        let h = BandwidthVector::uniform(2, 1.0).unwrap();
        assert_eq!(log_class_density(&[0.0, 0.0], &empty, &h), Err(Error::EmptySamples));
        let s = ClassSamples::from_rows(&[[0.0, 0.0]]).unwrap();
        assert!(matches!(
            log_class_density(&[0.0], &s, &h),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(BandwidthVector::new(vec![1.0, 0.0]).is_err());
        assert!(BandwidthVector::new(vec![1.0, -2.0]).is_err());
    }

    #[test]
    fn log_density_matches_direct_product_in_five_dims() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let (x, rows, h) = random_instance(&mut rng, 40, 5);
            let s = ClassSamples::from_rows(&rows).unwrap();
            let hb = BandwidthVector::new(h.clone()).unwrap();
            let log_form = log_class_density(&x, &s, &hb).unwrap().exp();
            let direct = direct_density(&x, &rows, &h);
            assert!(((log_form - direct) / direct).abs() <= 1e-10);
        }
    }

    #[test]
    fn log_density_survives_high_dimension_underflow() {
        // 64 coordinates with tiny bandwidths: the direct product underflows.
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64 * 0.01; 64]).collect();
        let s = ClassSamples::from_rows(&rows).unwrap();
        let h = BandwidthVector::uniform(64, 1e-3).unwrap();
        let v = log_class_density(&[0.5; 64], &s, &h).unwrap();
        assert!(v.is_finite());
        assert!(v < -745.0);
    }

    #[test]
    fn derivative_at_coincident_point() {
        let s = ClassSamples::from_rows(&[[0.7]]).unwrap();
        let h = BandwidthVector::uniform(1, 1.0).unwrap();
        let r = rodeo_derivative(&[0.7], &s, &h, 0).unwrap();
        assert!((r.z - (-0.398_942_3)).abs() < 1e-7);
        assert_eq!(r.s, 0.0);
    }

    #[test]
    fn second_partial_at_coincident_point() {
        let s = ClassSamples::from_rows(&[[0.7]]).unwrap();
        let h = BandwidthVector::uniform(1, 1.0).unwrap();
        let v = second_partial(&[0.7], &s, &h, 0).unwrap();
        assert!((v - (-0.398_942_3)).abs() < 1e-7);
    }

    #[test]
    fn derivative_matches_finite_difference_in_bandwidth() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let step = 1e-5;
        for _ in 0..100 {
            let d = rng.random_range(1..=5);
            let n = rng.random_range(2..=30);
            let (x, rows, h) = random_instance(&mut rng, n, d);
            let j = rng.random_range(0..d);
            let s = ClassSamples::from_rows(&rows).unwrap();
            let z = rodeo_derivative(&x, &s, &BandwidthVector::new(h.clone()).unwrap(), j)
                .unwrap()
                .z;
            let mut up = h.clone();
            up[j] += step;
            let mut down = h.clone();
            down[j] -= step;
            let fd = (direct_density(&x, &rows, &up) - direct_density(&x, &rows, &down)) / (2.0 * step);
            // Floor the denominator at 1% of f/h_j so cancellation near Z = 0
            // does not turn rounding noise into a huge relative error.
            let floor = 1e-2 * direct_density(&x, &rows, &h) / h[j];
            assert!((z - fd).abs() / fd.abs().max(floor) <= 1e-4, "z={z} fd={fd}");
        }
    }

    #[test]
    fn second_partial_matches_finite_difference_in_x() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let step = 1e-4;
        for _ in 0..100 {
            let d = rng.random_range(1..=4);
            let n = rng.random_range(1..=20);
            let (x, rows, h) = random_instance(&mut rng, n, d);
            let j = rng.random_range(0..d);
            let s = ClassSamples::from_rows(&rows).unwrap();
            let v = second_partial(&x, &s, &BandwidthVector::new(h.clone()).unwrap(), j).unwrap();
            let mut up = x.clone();
            up[j] += step;
            let mut down = x.clone();
            down[j] -= step;
            let f0 = direct_density(&x, &rows, &h);
            let fd = (direct_density(&up, &rows, &h) - 2.0 * f0 + direct_density(&down, &rows, &h))
                / (step * step);
            let floor = 1e-2 * f0 / (h[j] * h[j]);
            assert!((v - fd).abs() / fd.abs().max(floor) <= 1e-3, "v={v} fd={fd}");
        }
    }

    fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
        let step = (b - a) / panels as f64;
        let mut acc = f(a) + f(b);
        for i in 1..panels {
            acc += f(a + i as f64 * step) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        acc * step / 3.0
    }

    #[test]
    fn one_dimensional_density_integrates_to_one() {
        let pts = [[-0.4], [0.1], [0.15], [0.9], [2.0]];
        let s = ClassSamples::from_rows(&pts).unwrap();
        let hv = 0.3;
        let h = BandwidthVector::uniform(1, hv).unwrap();
        let total = simpson(
            |t| log_class_density(&[t], &s, &h).unwrap().exp(),
            -0.4 - 10.0 * hv,
            2.0 + 10.0 * hv,
            20_000,
        );
        assert!((total - 1.0).abs() < 1e-6);
    }

    #[test]
    fn second_partial_integrates_to_zero() {
        let pts = [[-0.4], [0.1], [0.9]];
        let s = ClassSamples::from_rows(&pts).unwrap();
        let h = BandwidthVector::uniform(1, 0.25).unwrap();
        let total = simpson(|t| second_partial(&[t], &s, &h, 0).unwrap(), -6.0, 7.0, 20_000);
        assert!(total.abs() < 1e-8);
    }

    #[test]
    fn kernel_constant_values() {
        let k = kernel_constants();
        assert_eq!(k.nu, 1.0);
        assert!((k.kappa(1).unwrap() - 0.531_125_9).abs() < 1e-7);
        assert!((k.kappa(2).unwrap() - 0.282_094_8).abs() < 1e-7);
        assert!(k.kappa(3).unwrap() < k.kappa(2).unwrap());
        assert!(k.kappa(0).is_err());
    }

    #[test]
    fn per_sample_variance_mode_scales_by_sqrt_n() {
        let rows = [[0.0], [0.5], [1.1], [-0.3]];
        let s = ClassSamples::from_rows(&rows).unwrap();
        let h = BandwidthVector::uniform(1, 0.7).unwrap();
        let mean_mode = rodeo_derivative_with(&[0.2], &s, &h, 0, VarianceMode::OfMean).unwrap();
        let raw = rodeo_derivative_with(&[0.2], &s, &h, 0, VarianceMode::PerSample).unwrap();
        assert_eq!(mean_mode.z, raw.z);
        assert!((raw.s - 2.0 * mean_mode.s).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn density_is_positive_and_permutation_equivariant(
            pts in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 3), 2..25),
            x in prop::collection::vec(-3.0f64..3.0, 3),
            h in prop::collection::vec(0.05f64..2.0, 3),
            j in 0usize..3,
            rot in 0usize..25,
        ) {
            let hb = BandwidthVector::new(h).unwrap();
            let s = ClassSamples::from_rows(&pts).unwrap();
            let mut permuted = pts.clone();
            let len = permuted.len();
            permuted.rotate_left(rot % len);
            permuted.reverse();
            let p = ClassSamples::from_rows(&permuted).unwrap();

            let a = log_class_density(&x, &s, &hb).unwrap();
            // A finite log-density is a strictly positive density.
            prop_assert!(a.is_finite());
            let b = log_class_density(&x, &p, &hb).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));

            // Signed sums can cancel, so tolerances are relative to the
            // magnitude bound f̂ · max|factor| rather than to the result.
            let hj = hb.as_slice()[j];
            let bound = a.exp() * (1.0 / hj + 36.0 / hj.powi(3)) + 1e-300;
            let za = rodeo_derivative(&x, &s, &hb, j).unwrap();
            let zb = rodeo_derivative(&x, &p, &hb, j).unwrap();
            prop_assert!((za.z - zb.z).abs() <= 1e-12 * bound);
            prop_assert!((za.s - zb.s).abs() <= 1e-12 * bound);

            let sa = second_partial(&x, &s, &hb, j).unwrap();
            let sb = second_partial(&x, &p, &hb, j).unwrap();
            prop_assert!((sa - sb).abs() <= 1e-12 * bound);
        }
    }
}
