//! Small statistical utilities: empirical quantiles, distribution quantiles,
//! two-sample Kolmogorov-Smirnov distance, autocorrelation, and log-volumes
//! of balls and cubes.

use crate::error::{Error, Result};
use statrs::distribution::{ChiSquared, Continuous, ContinuousCDF, Normal};
use statrs::function::gamma::ln_gamma;

/// Empirical quantile with linear interpolation between order statistics
/// (the type-7 convention): position `h = (n - 1) * gamma` on the sorted
/// sample, interpolating between `floor(h)` and `ceil(h)`.
///
/// `xs` must be sorted ascending and nonempty; `gamma` must lie in `[0, 1]`.
pub fn quantile_sorted(xs: &[f64], gamma: f64) -> f64 {
    assert!(!xs.is_empty(), "quantile of empty sample");
    assert!((0.0..=1.0).contains(&gamma), "quantile level out of range");
    let n = xs.len();
    if n == 1 {
        return xs[0];
    }
    let h = (n - 1) as f64 * gamma;
    let lo = h.floor() as usize;
    if lo + 1 >= n {
        return xs[n - 1];
    }
    let frac = h - lo as f64;
    xs[lo] + frac * (xs[lo + 1] - xs[lo])
}

/// Sorts a copy of the sample and evaluates [`quantile_sorted`].
pub fn quantile(xs: &[f64], gamma: f64) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("NaN in sample"));
    quantile_sorted(&v, gamma)
}

/// Quantile of the chi-squared distribution with `df` degrees of freedom.
///
/// Starts from the library inverse and polishes with Newton steps on the
/// regularized incomplete gamma CDF until `|F(x) - p| <= 1e-12`.
pub fn chi_square_quantile(df: f64, p: f64) -> Result<f64> {
    if !(df > 0.0) {
        return Err(Error::InvalidParameter {
            what: format!("chi-squared degrees of freedom must be positive, got {df}"),
        });
    }
    if !(0.0 < p && p < 1.0) {
        return Err(Error::InvalidParameter {
            what: format!("quantile level must be in (0, 1), got {p}"),
        });
    }
    let dist = ChiSquared::new(df).map_err(|e| Error::InvalidParameter {
        what: format!("chi-squared({df}): {e}"),
    })?;
    let mut x = dist.inverse_cdf(p).max(f64::MIN_POSITIVE);
    for _ in 0..64 {
        let err = dist.cdf(x) - p;
        if err.abs() <= 1e-12 {
            break;
        }
        let d = dist.pdf(x);
        if d <= 0.0 || !d.is_finite() {
            break;
        }
        let step = err / d;
        let next = x - step;
        x = if next > 0.0 { next } else { x / 2.0 };
    }
    Ok(x)
}

/// Standard normal quantile.
pub fn standard_normal_quantile(p: f64) -> Result<f64> {
    if !(0.0 < p && p < 1.0) {
        return Err(Error::InvalidParameter {
            what: format!("quantile level must be in (0, 1), got {p}"),
        });
    }
    let dist = Normal::new(0.0, 1.0).expect("standard normal");
    let mut x = dist.inverse_cdf(p);
    for _ in 0..8 {
        let err = dist.cdf(x) - p;
        if err.abs() <= 1e-15 {
            break;
        }
        let d = dist.pdf(x);
        if d <= 0.0 {
            break;
        }
        x -= err / d;
    }
    Ok(x)
}

/// Standard normal CDF.
pub fn standard_normal_cdf(x: f64) -> f64 {
    Normal::new(0.0, 1.0).expect("standard normal").cdf(x)
}

/// Two-sample Kolmogorov-Smirnov statistic `sup_x |F_a(x) - F_b(x)|`.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    assert!(!a.is_empty() && !b.is_empty(), "KS of empty sample");
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(|u, v| u.partial_cmp(v).expect("NaN in sample"));
    ys.sort_by(|u, v| u.partial_cmp(v).expect("NaN in sample"));
    let (na, nb) = (xs.len() as f64, ys.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < xs.len() && j < ys.len() {
        let (x, y) = (xs[i], ys[j]);
        if x <= y {
            i += 1;
        }
        if y <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Sample autocorrelation at lags `1..=max_lag` (biased normalization).
pub fn autocorrelation(xs: &[f64], max_lag: usize) -> Vec<f64> {
    let n = xs.len();
    if n < 2 {
        return vec![0.0; max_lag];
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    let c0: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
    (1..=max_lag)
        .map(|k| {
            if k >= n || c0 <= 0.0 {
                return 0.0;
            }
            let ck: f64 = (0..n - k)
                .map(|i| (xs[i] - mean) * (xs[i + k] - mean))
                .sum::<f64>()
                / n as f64;
            ck / c0
        })
        .collect()
}

/// Natural log of the volume of the Euclidean ball of radius `r` in `R^m`.
pub fn log_ball_volume(m: usize, r: f64) -> f64 {
    let mf = m as f64;
    0.5 * mf * std::f64::consts::PI.ln() - ln_gamma(0.5 * mf + 1.0) + mf * r.ln()
}

/// Natural log of the volume of the cube `[-r, r]^m`.
pub fn log_cube_volume(m: usize, r: f64) -> f64 {
    m as f64 * (2.0 * r).ln()
}
