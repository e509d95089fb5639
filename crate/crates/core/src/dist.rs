//! Upper-tail quantiles for the tests applied to bandwidth means: standard
//! normal, Student t, F and the studentized range.
//!
//! Degrees of freedom are `f64`; pass `f64::INFINITY` for the limiting forms.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use statrs::function::beta::beta_reg;
use statrs::function::erf::{erfc, erfc_inv};
use statrs::function::gamma::{gamma_lr, gamma_ur, ln_gamma};

use crate::error::{domain, Error, Result};
use crate::numeric::{integrate, invert_increasing};

/// Above this many degrees of freedom the studentized range uses its `df = ∞` form.
pub const STUDENTIZED_DF_LIMIT: f64 = 5000.0;

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(domain(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

fn check_df(df: f64, name: &str) -> Result<()> {
    if df > 0.0 && !df.is_nan() {
        Ok(())
    } else {
        Err(domain(format!("{name} must be positive, got {df}")))
    }
}

/// `Φ(z)`.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// `1 − Φ(z)`, accurate in the upper tail.
pub fn normal_sf(z: f64) -> f64 {
    0.5 * erfc(z / std::f64::consts::SQRT_2)
}

fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// `z` with `P(Z > z) = alpha`.
pub fn normal_upper_quantile(alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(std::f64::consts::SQRT_2 * erfc_inv(2.0 * alpha))
}

/// `P(F_{df1,df2} ≤ x)`.
pub fn f_cdf(x: f64, df1: f64, df2: f64) -> Result<f64> {
    check_df(df1, "df1")?;
    check_df(df2, "df2")?;
    if x <= 0.0 {
        return Ok(0.0);
    }
    if df2.is_infinite() {
        return Ok(gamma_lr(0.5 * df1, 0.5 * df1 * x));
    }
    let t = df1 * x / (df1 * x + df2);
    Ok(beta_reg(0.5 * df1, 0.5 * df2, t))
}

/// `P(F_{df1,df2} > x)`, evaluated without cancellation in the upper tail.
pub fn f_sf(x: f64, df1: f64, df2: f64) -> Result<f64> {
    check_df(df1, "df1")?;
    check_df(df2, "df2")?;
    if x <= 0.0 {
        return Ok(1.0);
    }
    if df2.is_infinite() {
        return Ok(gamma_ur(0.5 * df1, 0.5 * df1 * x));
    }
    let t = df2 / (df1 * x + df2);
    Ok(beta_reg(0.5 * df2, 0.5 * df1, t))
}

/// `x` with `P(F_{df1,df2} > x) = alpha`, by bracketed root finding on the
/// regularized incomplete beta function.
pub fn f_upper_quantile(alpha: f64, df1: f64, df2: f64) -> Result<f64> {
    check_alpha(alpha)?;
    check_df(df1, "df1")?;
    check_df(df2, "df2")?;
    let target = 1.0 - alpha;
    invert_increasing(
        |x| if target > 0.5 { 1.0 - f_sf(x, df1, df2).unwrap() } else { f_cdf(x, df1, df2).unwrap() },
        target,
        1.0,
        1e-10,
    )
    .ok_or_else(|| Error::Numerical("F quantile bracket failed".into()))
}

/// `t` with `P(T_df > t) = alpha`, for `alpha < 0.5`.
pub fn t_upper_quantile(alpha: f64, df: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if alpha >= 0.5 {
        return Err(domain("t_upper_quantile requires alpha < 0.5"));
    }
    Ok(f_upper_quantile(2.0 * alpha, 1.0, df)?.sqrt())
}

/// `P(W ≤ w)` for the range `W` of `k` independent standard normals.
fn range_cdf(w: f64, k: u32) -> f64 {
    if w <= 0.0 {
        return 0.0;
    }
    let km1 = (k - 1) as i32;
    let inner = |z: f64| {
        // Φ(z) − Φ(z − w), taken from whichever tail keeps precision.
        let diff = if z > 0.0 {
            normal_sf(z - w) - normal_sf(z)
        } else {
            normal_cdf(z) - normal_cdf(z - w)
        };
        normal_pdf(z) * diff.max(0.0).powi(km1)
    };
    let v = k as f64 * integrate(inner, -8.5, 8.5, 1e-13);
    v.clamp(0.0, 1.0)
}

/// `ln` density of `S = √(χ²_ν / ν)`.
fn scale_log_density(s: f64, nu: f64) -> f64 {
    0.5 * nu * nu.ln() - ln_gamma(0.5 * nu) - (0.5 * nu - 1.0) * std::f64::consts::LN_2
        + (nu - 1.0) * s.ln()
        - 0.5 * nu * s * s
}

/// `P(Q_{k,df} ≤ q)`: the range CDF averaged over the independent scale
/// `S = √(χ²_df/df)` with the outer integral truncated where the scale
/// density drops below `e^-30` of its peak.
pub fn studentized_range_cdf(q: f64, k: u32, df: f64) -> Result<f64> {
    if k < 2 {
        return Err(domain(format!("studentized range needs k >= 2, got {k}")));
    }
    check_df(df, "df")?;
    if q <= 0.0 {
        return Ok(0.0);
    }
    if df > STUDENTIZED_DF_LIMIT {
        return Ok(range_cdf(q, k));
    }
    let mode = ((df - 1.0).max(0.0) / df).sqrt().max(1e-3);
    let peak = scale_log_density(mode, df);
    let width = (1.0 / (2.0 * df)).sqrt().min(0.5);
    let mut lo = mode;
    while lo > 0.0 && scale_log_density(lo, df) - peak > -30.0 {
        lo -= width;
    }
    let lo = lo.max(0.0);
    let mut hi = mode;
    while scale_log_density(hi, df) - peak > -30.0 {
        hi += width;
    }
    let v = integrate(
        |s| {
            if s <= 0.0 {
                0.0
            } else {
                scale_log_density(s, df).exp() * range_cdf(q * s, k)
            }
        },
        lo,
        hi,
        1e-10,
    );
    Ok(v.clamp(0.0, 1.0))
}

type QuantileKey = (u64, u32, u64);

fn quantile_cache() -> &'static Mutex<HashMap<QuantileKey, f64>> {
    static CACHE: OnceLock<Mutex<HashMap<QuantileKey, f64>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// `q` with `P(Q_{k,df} > q) = alpha`. Results are memoized per `(alpha, k, df)`.
pub fn studentized_range_upper_quantile(alpha: f64, k: u32, df: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if k < 2 {
        return Err(domain(format!("studentized range needs k >= 2, got {k}")));
    }
    check_df(df, "df")?;
    let df = if df > STUDENTIZED_DF_LIMIT { f64::INFINITY } else { df };
    let key = (alpha.to_bits(), k, df.to_bits());
    if let Some(&q) = quantile_cache().lock().unwrap().get(&key) {
        return Ok(q);
    }
    let target = 1.0 - alpha;
    let q = invert_increasing(
        |q| studentized_range_cdf(q, k, df).unwrap(),
        target,
        2.0,
        1e-7,
    )
    .ok_or_else(|| Error::Numerical("studentized range bracket failed".into()))?;
    quantile_cache().lock().unwrap().insert(key, q);
    Ok(q)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_quantiles() {
        assert!((normal_upper_quantile(0.025).unwrap() - 1.959_963_984_540_054).abs() < 1e-9);
        assert!(normal_upper_quantile(0.5).unwrap().abs() < 1e-12);
        assert!(normal_upper_quantile(0.0).is_err());
        assert!(normal_upper_quantile(1.0).is_err());
    }

    #[test]
    fn f_quantile_reference_values() {
        // Square of the two-sided 5% t critical value with 10 df (2.228139).
        let f = f_upper_quantile(0.05, 1.0, 10.0).unwrap();
        assert!((f - 4.964_6).abs() < 1e-4);
        let t = t_upper_quantile(0.025, 10.0).unwrap();
        assert!((t * t - f).abs() < 1e-8);
        for nu in [1.0, 3.0, 12.0, 100.0] {
            assert!((f_upper_quantile(0.5, nu, nu).unwrap() - 1.0).abs() < 1e-8);
        }
        // df2 = ∞: chi-square(1) upper 5% point.
        let chi = f_upper_quantile(0.05, 1.0, f64::INFINITY).unwrap();
        assert!((chi - 3.841_458_820_694_124).abs() < 1e-8);
    }

    #[test]
    fn f_quantile_is_decreasing_in_alpha() {
        let mut prev = f64::INFINITY;
        for alpha in [0.001, 0.01, 0.05, 0.1, 0.3, 0.7, 0.95] {
            let q = f_upper_quantile(alpha, 4.0, 30.0).unwrap();
            assert!(q < prev);
            prev = q;
        }
    }

    #[test]
    fn f_round_trip() {
        for alpha in [0.01, 0.05, 0.1] {
            for (d1, d2) in [(1.0, 10.0), (4.0, 60.0), (29.0, 1490.0), (9.0, f64::INFINITY)] {
                let q = f_upper_quantile(alpha, d1, d2).unwrap();
                assert!((f_cdf(q, d1, d2).unwrap() - (1.0 - alpha)).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn f_domain_errors() {
        assert!(f_upper_quantile(0.05, 0.0, 3.0).is_err());
        assert!(f_upper_quantile(1.5, 1.0, 3.0).is_err());
        assert!(f_cdf(1.0, 1.0, -1.0).is_err());
    }

    #[test]
    fn studentized_range_two_groups_infinite_df() {
        // Range of two normals is √2·|N(0,1)|, so q = √2 z_{0.025}.
        let expected = std::f64::consts::SQRT_2 * normal_upper_quantile(0.025).unwrap();
        let q = studentized_range_upper_quantile(0.05, 2, f64::INFINITY).unwrap();
        assert!((q - expected).abs() < 1e-6);
        assert!((q - 2.7718).abs() < 1e-3);
    }

    #[test]
    fn studentized_range_table_values() {
        // Harter (1960) table entries.
        let cases = [
            (0.05, 3, 10.0, 3.877),
            (0.05, 10, 60.0, 4.646),
            (0.01, 5, 10.0, 6.136),
            (0.05, 5, f64::INFINITY, 3.858),
        ];
        for (alpha, k, df, expected) in cases {
            let q = studentized_range_upper_quantile(alpha, k, df).unwrap();
            assert!((q - expected).abs() < 2e-3, "q({alpha},{k},{df}) = {q}");
        }
    }

    #[test]
    fn studentized_range_increases_with_groups() {
        let mut prev = 0.0;
        for k in 2..=12 {
            let q = studentized_range_upper_quantile(0.05, k, 30.0).unwrap();
            assert!(q > prev);
            prev = q;
        }
    }

    #[test]
    fn studentized_range_domain_errors() {
        assert!(studentized_range_upper_quantile(0.05, 1, 10.0).is_err());
        assert!(studentized_range_upper_quantile(0.0, 3, 10.0).is_err());
        assert!(studentized_range_cdf(1.0, 3, 0.0).is_err());
    }
}
