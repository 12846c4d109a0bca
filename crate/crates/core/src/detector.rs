//! The end-to-end detection procedure: smooth, find local maxima, assign
//! p-values, apply a multiple-testing procedure.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maxima::{find_local_maxima, LocalMaximum};
use crate::model::SampledSeries;
use crate::moments_est::{estimate_moments, MomentMethod};
use crate::mtp::{decide, Method, MtpDecision};
use crate::palm::{gaussian_model_moments, GaussianModelParams, PalmDistribution, SpectralMoments};
use crate::smoothing::{convolve, make_gaussian_kernel, DEFAULT_KERNEL_TRUNCATION};

/// Where the spectral moments of the smoothed noise come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum MomentsSource {
    /// Closed form for noise `σ ∫ w_ν dB` smoothed with the detector kernel.
    GaussianModel { sigma: f64, nu: f64 },
    /// Estimated from the smoothed series itself.
    Estimated {
        method: MomentMethod,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lag_window: Option<usize>,
    },
    Explicit {
        sigma2: f64,
        lambda2: f64,
        lambda4: f64,
    },
}

impl Default for MomentsSource {
    fn default() -> Self {
        MomentsSource::Estimated {
            method: MomentMethod::Mad,
            lag_window: None,
        }
    }
}

impl From<SpectralMoments> for MomentsSource {
    fn from(m: SpectralMoments) -> Self {
        MomentsSource::Explicit {
            sigma2: m.sigma2,
            lambda2: m.lambda2,
            lambda4: m.lambda4,
        }
    }
}

fn default_truncation() -> f64 {
    DEFAULT_KERNEL_TRUNCATION
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    /// Kernel bandwidth in time units.
    pub gamma: f64,
    #[serde(default = "default_truncation")]
    pub kernel_truncation: f64,
    pub alpha: f64,
    pub method: Method,
    #[serde(default)]
    pub moments_source: MomentsSource,
    #[serde(default = "default_true")]
    pub subtract_mean: bool,
}

impl DetectorConfig {
    pub fn new(gamma: f64, alpha: f64, method: Method, moments_source: MomentsSource) -> Self {
        Self {
            gamma,
            kernel_truncation: DEFAULT_KERNEL_TRUNCATION,
            alpha,
            method,
            moments_source,
            subtract_mean: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "gamma must be positive, got {}",
                self.gamma
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if let MomentsSource::GaussianModel { sigma, nu } = self.moments_source {
            GaussianModelParams::new(sigma, nu, self.gamma)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionResult {
    /// Every candidate maximum with its p-value and decision.
    pub maxima: Vec<LocalMaximum>,
    pub decision: MtpDecision,
    pub moments_used: SpectralMoments,
    /// Samples at each end excluded from the candidate set.
    pub boundary_excluded: usize,
    pub config: DetectorConfig,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl DetectionResult {
    pub fn rejected(&self) -> impl Iterator<Item = &LocalMaximum> {
        self.maxima.iter().filter(|m| m.rejected == Some(true))
    }

    pub fn num_rejected(&self) -> usize {
        self.decision.num_rejected()
    }
}

/// Run the full procedure on `series`.
pub fn detect(series: &SampledSeries, config: &DetectorConfig) -> Result<DetectionResult> {
    config.validate()?;
    let spacing = series.spacing();
    let kernel = make_gaussian_kernel(config.gamma, config.kernel_truncation, spacing)?;
    let mut warnings = Vec::new();
    if kernel.aliasing {
        warnings.push(format!(
            "gamma {} is not above the grid spacing {spacing}; the sampled kernel aliases and \
             p-values are unreliable",
            config.gamma
        ));
    }
    if series.len() < kernel.len() + 2 {
        return Err(Error::InvalidInput(format!(
            "series of length {} is too short for a kernel of {} points",
            series.len(),
            kernel.len()
        )));
    }
    let centered = if config.subtract_mean {
        let mean = series.mean();
        series.map(|v| v - mean)?
    } else {
        series.clone()
    };
    let smoothed = convolve(&centered, &kernel)?;
    let moments = resolve_moments(&smoothed.series, config)?;
    let maxima = find_local_maxima(&smoothed.series, smoothed.boundary);
    let (maxima, decision) = test_maxima(maxima, &moments, config.alpha, config.method)?;
    Ok(DetectionResult {
        maxima,
        decision,
        moments_used: moments,
        boundary_excluded: smoothed.boundary,
        config: config.clone(),
        warnings,
    })
}

/// Spectral moments for the smoothed series under `config`.
pub fn resolve_moments(
    smoothed: &SampledSeries,
    config: &DetectorConfig,
) -> Result<SpectralMoments> {
    match config.moments_source {
        MomentsSource::GaussianModel { sigma, nu } => Ok(gaussian_model_moments(
            &GaussianModelParams::new(sigma, nu, config.gamma)?,
        )),
        MomentsSource::Estimated { method, lag_window } => {
            estimate_moments(smoothed, method, lag_window, Some(config.gamma))?.usable()
        }
        MomentsSource::Explicit {
            sigma2,
            lambda2,
            lambda4,
        } => SpectralMoments::new(sigma2, lambda2, lambda4),
    }
}

/// Assign p-values to `maxima` and mark the ones rejected by `method`.
pub fn test_maxima(
    maxima: Vec<LocalMaximum>,
    moments: &SpectralMoments,
    alpha: f64,
    method: Method,
) -> Result<(Vec<LocalMaximum>, MtpDecision)> {
    let dist = PalmDistribution::new(*moments)?;
    let p: Vec<f64> = maxima.iter().map(|m| dist.p_value(m.height)).collect();
    let decision = decide(method, &p, alpha, Some(&dist))?;
    let mut rejected = vec![false; maxima.len()];
    for &i in &decision.rejected_indices {
        rejected[i] = true;
    }
    let maxima = maxima
        .into_iter()
        .zip(p)
        .zip(rejected)
        .map(|((m, p), r)| LocalMaximum {
            p_value: Some(p),
            rejected: Some(r),
            ..m
        })
        .collect();
    Ok((maxima, decision))
}
