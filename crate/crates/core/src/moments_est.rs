//! Estimating the spectral moments `(σ², λ₂, λ₄)` from an observed smoothed
//! series, for use when the noise model is not known.
//!
//! Four estimators are provided:
//!
//! * `mad`: squared robust scale of the series and of its first and second
//!   differences; insensitive to a sparse signal.
//! * `var`: the same with ordinary sample variances.
//! * `acf`: fit `c(s) ≈ β₀ + β₂s² + β₄s⁴` to the empirical autocovariance
//!   near zero lag and read off `σ² = β₀`, `λ₂ = −2β₂`, `λ₄ = 24β₄`.
//! * `crossing`: robust `σ²`, with `λ₂` from level-crossing counts via the
//!   Rice formula, and `λ₄` the same way from the difference series.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SampledSeries;
use crate::palm::SpectralMoments;

/// Scale factor making the MAD a consistent estimator of a Gaussian σ.
pub const MAD_CONSISTENCY: f64 = 1.4826;

/// Crossing levels sit at this many robust standard deviations from center.
pub const CROSSING_LEVEL: f64 = 2.0 / 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MomentMethod {
    Mad,
    Var,
    Acf,
    Crossing,
}

impl MomentMethod {
    pub const ALL: [MomentMethod; 4] = [
        MomentMethod::Mad,
        MomentMethod::Var,
        MomentMethod::Acf,
        MomentMethod::Crossing,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            MomentMethod::Mad => "mad",
            MomentMethod::Var => "var",
            MomentMethod::Acf => "acf",
            MomentMethod::Crossing => "crossing",
        }
    }
}

impl std::str::FromStr for MomentMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mad" => Ok(MomentMethod::Mad),
            "var" => Ok(MomentMethod::Var),
            "acf" => Ok(MomentMethod::Acf),
            "crossing" | "lindgren" => Ok(MomentMethod::Crossing),
            other => Err(Error::InvalidArgument(format!(
                "unknown moment estimator '{other}'"
            ))),
        }
    }
}

/// How the crossing estimator weights the counts at the off-center levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrossingWeight {
    /// `exp(u²/2)` with `u = 2/3` in standard-deviation units, which undoes
    /// the Rice-formula decay of the crossing rate; scale-equivariant.
    #[default]
    Standardized,
    /// `exp(u²/2)` with `u = (2/3)σ̂` in data units. Under-weights the
    /// off-center levels unless `σ̂ = 1`; matches common reference tables.
    DataUnits,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub sample_size: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lag_window: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<f64>,
    /// Upcrossings of (center, center + u, center − u) for the series and
    /// for its difference series.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crossings: Option<[[usize; 3]; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub moments: SpectralMoments,
    pub method: MomentMethod,
    pub diagnostics: Diagnostics,
    /// The moments fail positivity or `Δ > 0`, or the estimator had too
    /// little to work with; they must not be used for p-values.
    pub degenerate: bool,
}

impl MomentEstimate {
    fn new(moments: SpectralMoments, method: MomentMethod, diagnostics: Diagnostics) -> Self {
        let degenerate = moments.validate().is_err();
        Self {
            moments,
            method,
            diagnostics,
            degenerate,
        }
    }

    /// The moments, or an error if the estimate is degenerate.
    pub fn usable(&self) -> Result<SpectralMoments> {
        if self.degenerate {
            return Err(Error::InvalidMoments(format!(
                "{} estimate is degenerate: {:?}",
                self.method.name(),
                self.moments
            )));
        }
        Ok(self.moments)
    }
}

/// `(x[i+1] − x[i]) / spacing`
pub fn difference(series: &SampledSeries) -> Result<SampledSeries> {
    if series.len() < 2 {
        return Err(Error::InvalidArgument(
            "differencing needs at least two samples".into(),
        ));
    }
    let h = series.spacing();
    let d = series
        .values()
        .windows(2)
        .map(|w| (w[1] - w[0]) / h)
        .collect();
    SampledSeries::new(d, h, series.origin())
}

pub(crate) fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    v.sort_unstable_by(f64::total_cmp);
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// `(1.4826 · MAD)²`, the Gaussian-consistent robust variance.
pub fn mad_variance(values: &[f64]) -> f64 {
    let center = median(values);
    let dev: Vec<f64> = values.iter().map(|v| (v - center).abs()).collect();
    (MAD_CONSISTENCY * median(&dev)).powi(2)
}

/// Unbiased sample variance.
pub fn sample_variance(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
}

fn check_len(series: &SampledSeries, min: usize) -> Result<()> {
    if series.len() < min {
        return Err(Error::InvalidArgument(format!(
            "moment estimation needs at least {min} samples, got {}",
            series.len()
        )));
    }
    Ok(())
}

fn scale_based(
    series: &SampledSeries,
    method: MomentMethod,
    scale: fn(&[f64]) -> f64,
) -> Result<MomentEstimate> {
    check_len(series, 3)?;
    let d1 = difference(series)?;
    let d2 = difference(&d1)?;
    let moments = SpectralMoments {
        sigma2: scale(series.values()),
        lambda2: scale(d1.values()),
        lambda4: scale(d2.values()),
    };
    Ok(MomentEstimate::new(
        moments,
        method,
        Diagnostics {
            sample_size: series.len(),
            ..Default::default()
        },
    ))
}

pub fn estimate_moments_mad(series: &SampledSeries) -> Result<MomentEstimate> {
    scale_based(series, MomentMethod::Mad, mad_variance)
}

pub fn estimate_moments_var(series: &SampledSeries) -> Result<MomentEstimate> {
    scale_based(series, MomentMethod::Var, sample_variance)
}

/// Default ACF lag window: `max(5, ⌈3γ / spacing⌉)`.
pub fn default_lag_window(gamma: Option<f64>, spacing: f64) -> usize {
    match gamma {
        Some(g) => ((3.0 * g / spacing).ceil() as usize).max(5),
        None => 5,
    }
}

/// Empirical autocovariance at lags `0..=max_lag` (divisor `n`).
pub fn autocovariance(values: &[f64], max_lag: usize) -> Vec<f64> {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = values.iter().map(|v| v - mean).collect();
    (0..=max_lag.min(n.saturating_sub(1)))
        .map(|s| {
            centered[..n - s]
                .iter()
                .zip(&centered[s..])
                .map(|(a, b)| a * b)
                .sum::<f64>()
                / n as f64
        })
        .collect()
}

/// Least-squares fit of `β₀ + β₂s² + β₄s⁴` to `acf[k]` at `s = k·spacing`,
/// returned as `(σ², λ₂, λ₄) = (β₀, −2β₂, 24β₄)`.
pub fn fit_acf_polynomial(acf: &[f64], spacing: f64) -> Result<SpectralMoments> {
    if acf.len() < 4 {
        return Err(Error::InvalidArgument(format!(
            "ACF fit needs lags 0..3 at least, got {} lags",
            acf.len()
        )));
    }
    let design = DMatrix::from_fn(acf.len(), 3, |k, j| {
        let s2 = (k as f64 * spacing).powi(2);
        s2.powi(j as i32)
    });
    let svd = design.clone().svd(true, true);
    let sv = &svd.singular_values;
    let largest = sv.max();
    if !(sv.min() > 1e-12 * largest) {
        return Err(Error::InvalidArgument("singular ACF design matrix".into()));
    }
    let beta = svd
        .solve(&DVector::from_column_slice(acf), 0.0)
        .map_err(|e| Error::InvalidArgument(format!("ACF least squares failed: {e}")))?;
    Ok(SpectralMoments {
        sigma2: beta[0],
        lambda2: -2.0 * beta[1],
        lambda4: 24.0 * beta[2],
    })
}

pub fn estimate_moments_acf(series: &SampledSeries, lag_window: usize) -> Result<MomentEstimate> {
    if lag_window < 3 {
        return Err(Error::InvalidArgument(format!(
            "ACF lag window must be at least 3, got {lag_window}"
        )));
    }
    check_len(series, lag_window + 2)?;
    let acf = autocovariance(series.values(), lag_window);
    let moments = fit_acf_polynomial(&acf, series.spacing())?;
    Ok(MomentEstimate::new(
        moments,
        MomentMethod::Acf,
        Diagnostics {
            sample_size: series.len(),
            lag_window: Some(lag_window),
            ..Default::default()
        },
    ))
}

/// Number of upcrossings of `level`: `x[i] < level <= x[i+1]`.
pub fn count_upcrossings(values: &[f64], level: f64) -> usize {
    values
        .windows(2)
        .filter(|w| w[0] < level && w[1] >= level)
        .count()
}

/// Rate-based estimate of `λ/σ²` for one series: returns the robust
/// variance, the squared angular crossing rate, and the three counts.
fn crossing_rate(values: &[f64], duration: f64, weight: CrossingWeight) -> (f64, f64, [usize; 3]) {
    let var = mad_variance(values);
    let sd = var.sqrt();
    let center = values.iter().sum::<f64>() / values.len() as f64;
    let u = CROSSING_LEVEL * sd;
    let counts = [
        count_upcrossings(values, center),
        count_upcrossings(values, center + u),
        count_upcrossings(values, center - u),
    ];
    let w = match weight {
        CrossingWeight::Standardized => (0.5 * CROSSING_LEVEL * CROSSING_LEVEL).exp(),
        CrossingWeight::DataUnits => (0.5 * u * u).exp(),
    };
    let pooled = (counts[0] as f64 + w * (counts[1] + counts[2]) as f64) / 3.0;
    let angular = 2.0 * PI * pooled / duration;
    (var, angular * angular, counts)
}

pub fn estimate_moments_crossing(series: &SampledSeries) -> Result<MomentEstimate> {
    estimate_moments_crossing_with(series, CrossingWeight::default())
}

/// Crossing estimator: `λ̂ = σ̂² (2π N̄ / T)²` where `N̄` pools upcrossings of
/// the center and of the levels `±(2/3)σ̂`, the latter re-weighted by
/// `exp(u²/2)`. `λ̂₄` comes from the difference series in the same way.
pub fn estimate_moments_crossing_with(
    series: &SampledSeries,
    weight: CrossingWeight,
) -> Result<MomentEstimate> {
    check_len(series, 3)?;
    let h = series.spacing();
    let x = series.values();
    let d1 = difference(series)?;
    let (sigma2, rate_x, counts_x) = crossing_rate(x, (x.len() - 1) as f64 * h, weight);
    let dv = d1.values();
    let (lambda2_robust, rate_d, counts_d) = crossing_rate(dv, (dv.len() - 1) as f64 * h, weight);
    let moments = SpectralMoments {
        sigma2,
        lambda2: sigma2 * rate_x,
        lambda4: lambda2_robust * rate_d,
    };
    let mut est = MomentEstimate::new(
        moments,
        MomentMethod::Crossing,
        Diagnostics {
            sample_size: series.len(),
            level: Some(CROSSING_LEVEL),
            crossings: Some([counts_x, counts_d]),
            ..Default::default()
        },
    );
    if counts_x[0] < 2 || counts_d[0] < 2 {
        est.degenerate = true;
    }
    Ok(est)
}

/// Dispatch on `method`; `gamma` sets the default ACF lag window.
pub fn estimate_moments(
    series: &SampledSeries,
    method: MomentMethod,
    lag_window: Option<usize>,
    gamma: Option<f64>,
) -> Result<MomentEstimate> {
    match method {
        MomentMethod::Mad => estimate_moments_mad(series),
        MomentMethod::Var => estimate_moments_var(series),
        MomentMethod::Acf => estimate_moments_acf(
            series,
            lag_window.unwrap_or_else(|| default_lag_window(gamma, series.spacing())),
        ),
        MomentMethod::Crossing => estimate_moments_crossing(series),
    }
}
