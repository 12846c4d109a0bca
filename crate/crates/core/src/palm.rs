//! Height distribution of local maxima of a smooth stationary Gaussian
//! process, and the spectral moments that determine it.
//!
//! With `σ²` the variance of the smoothed noise and `λ₂`, `λ₄` the variances
//! of its first and second derivatives, the right cdf of the height of a
//! local maximum is
//!
//! ```text
//! F(u) = 1 − Φ(u √(λ₄/Δ)) + √(2πλ₂²/(λ₄σ²)) φ(u/σ) Φ(u √(λ₂²/(Δσ²))),
//! Δ = σ²λ₄ − λ₂²,
//! ```
//!
//! and the expected number of local maxima per unit length is
//! `√(λ₄/λ₂) / 2π`. A maximum at height `x` gets p-value `F(x)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maxima::LocalMaximum;
use crate::normal;

/// Above this many standard deviations the cdf is assembled in log space.
const LOG_SPACE_CUTOFF: f64 = 8.0;
const MAX_BISECTIONS: usize = 200;

/// `(σ², λ₂, λ₄)` of the smoothed noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralMoments {
    pub sigma2: f64,
    pub lambda2: f64,
    pub lambda4: f64,
}

impl SpectralMoments {
    /// Validated moments: all positive and `Δ > 0`.
    pub fn new(sigma2: f64, lambda2: f64, lambda4: f64) -> Result<Self> {
        let m = Self {
            sigma2,
            lambda2,
            lambda4,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let all_positive = [self.sigma2, self.lambda2, self.lambda4]
            .iter()
            .all(|v| *v > 0.0 && v.is_finite());
        if !all_positive {
            return Err(Error::InvalidMoments(format!(
                "moments must be positive and finite, got {self:?}"
            )));
        }
        if self.delta() <= 0.0 {
            return Err(Error::InvalidMoments(format!(
                "σ²λ₄ − λ₂² = {} is not positive",
                self.delta()
            )));
        }
        Ok(())
    }

    /// Δ = σ²λ₄ − λ₂²
    pub fn delta(&self) -> f64 {
        self.sigma2 * self.lambda4 - self.lambda2 * self.lambda2
    }

    pub fn sigma(&self) -> f64 {
        self.sigma2.sqrt()
    }

    /// All three moments multiplied by `factor` (the effect of scaling the
    /// process by `√factor`).
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            sigma2: self.sigma2 * factor,
            lambda2: self.lambda2 * factor,
            lambda4: self.lambda4 * factor,
        }
    }
}

/// Noise scale `σ`, noise autocorrelation bandwidth `ν` and smoothing
/// bandwidth `γ` of the Gaussian autocorrelation model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianModelParams {
    pub sigma: f64,
    pub nu: f64,
    pub gamma: f64,
}

impl GaussianModelParams {
    pub fn new(sigma: f64, nu: f64, gamma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "sigma must be positive, got {sigma}"
            )));
        }
        if !(nu >= 0.0 && nu.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "nu must be non-negative, got {nu}"
            )));
        }
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "gamma must be positive, got {gamma}"
            )));
        }
        Ok(Self { sigma, nu, gamma })
    }

    /// ξ = √(γ² + ν²)
    pub fn xi(&self) -> f64 {
        self.gamma.hypot(self.nu)
    }
}

/// Closed-form moments of Gaussian-kernel-smoothed noise with Gaussian
/// autocorrelation (kernel truncation ignored).
pub fn gaussian_model_moments(params: &GaussianModelParams) -> SpectralMoments {
    let xi = params.xi();
    let s2 = params.sigma * params.sigma;
    let root_pi = PI.sqrt();
    SpectralMoments {
        sigma2: s2 / (2.0 * root_pi * xi),
        lambda2: s2 / (4.0 * root_pi * xi.powi(3)),
        lambda4: 3.0 * s2 / (8.0 * root_pi * xi.powi(5)),
    }
}

/// The height distribution of local maxima for a fixed set of moments, with
/// the coefficients of its closed form precomputed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PalmDistribution {
    moments: SpectralMoments,
    sigma: f64,
    // √(λ₄/Δ)
    outer: f64,
    // √(λ₂²/(Δσ²))
    inner: f64,
    // √(2πλ₂²/(λ₄σ²))
    tail_coef: f64,
}

impl PalmDistribution {
    pub fn new(moments: SpectralMoments) -> Result<Self> {
        moments.validate()?;
        let SpectralMoments {
            sigma2,
            lambda2,
            lambda4,
        } = moments;
        let delta = moments.delta();
        Ok(Self {
            moments,
            sigma: sigma2.sqrt(),
            outer: (lambda4 / delta).sqrt(),
            inner: (lambda2 * lambda2 / (delta * sigma2)).sqrt(),
            tail_coef: (2.0 * PI * lambda2 * lambda2 / (lambda4 * sigma2)).sqrt(),
        })
    }

    pub fn moments(&self) -> &SpectralMoments {
        &self.moments
    }

    /// F(u) = P(height > u)
    pub fn right_cdf(&self, u: f64) -> f64 {
        if u / self.sigma > LOG_SPACE_CUTOFF {
            return self.ln_right_cdf(u).exp();
        }
        let f = normal::sf(u * self.outer)
            + self.tail_coef * normal::pdf(u / self.sigma) * normal::cdf(u * self.inner);
        f.clamp(0.0, 1.0)
    }

    /// ln F(u), finite for every finite `u`.
    pub fn ln_right_cdf(&self, u: f64) -> f64 {
        if u / self.sigma <= LOG_SPACE_CUTOFF {
            return self.right_cdf(u).ln();
        }
        let ln_first = normal::ln_sf(u * self.outer);
        let ln_second =
            self.tail_coef.ln() + normal::ln_pdf(u / self.sigma) + normal::cdf(u * self.inner).ln();
        let (hi, lo) = if ln_first > ln_second {
            (ln_first, ln_second)
        } else {
            (ln_second, ln_first)
        };
        hi + (lo - hi).exp().ln_1p()
    }

    /// Large-`u` approximation `√(2πλ₂²/(λ₄σ²)) φ(u/σ)`.
    pub fn tail_approximation(&self, u: f64) -> f64 {
        self.tail_coef * normal::pdf(u / self.sigma)
    }

    /// `u` with `F(u) = p`, by bracketed bisection on the strictly
    /// decreasing cdf.
    pub fn inverse(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "probability must lie in (0, 1), got {p}"
            )));
        }
        let ln_p = p.ln();
        // Invariant: F(lo) >= p > F(hi).
        let above = |u: f64| self.ln_right_cdf(u) >= ln_p;
        let (mut lo, mut hi);
        if above(0.0) {
            lo = 0.0;
            hi = self.sigma;
            while above(hi) {
                lo = hi;
                hi *= 2.0;
            }
        } else {
            hi = 0.0;
            lo = -self.sigma;
            while !above(lo) {
                hi = lo;
                lo *= 2.0;
            }
        }
        for _ in 0..MAX_BISECTIONS {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if above(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let (flo, fhi) = (self.right_cdf(lo), self.right_cdf(hi));
        Ok(if (flo - p).abs() <= (fhi - p).abs() {
            lo
        } else {
            hi
        })
    }

    /// Expected number of local maxima per unit length.
    pub fn maxima_rate(&self) -> f64 {
        (self.moments.lambda4 / self.moments.lambda2).sqrt() / (2.0 * PI)
    }

    /// Expected number of local maxima in a window of length `length`,
    /// optionally only those above `u`.
    pub fn expected_count(&self, length: f64, u: Option<f64>) -> f64 {
        let all = length * self.maxima_rate();
        match u {
            None => all,
            Some(u) => all * self.right_cdf(u),
        }
    }

    /// p-value of a maximum at `height`, floored at the smallest positive
    /// normal float so extreme heights still give a valid p-value.
    pub fn p_value(&self, height: f64) -> f64 {
        self.right_cdf(height).max(f64::MIN_POSITIVE)
    }
}

pub fn peak_height_right_cdf(m: &SpectralMoments, u: f64) -> Result<f64> {
    Ok(PalmDistribution::new(*m)?.right_cdf(u))
}

pub fn peak_height_right_cdf_inverse(m: &SpectralMoments, p: f64) -> Result<f64> {
    PalmDistribution::new(*m)?.inverse(p)
}

pub fn tail_approximation(m: &SpectralMoments, u: f64) -> Result<f64> {
    Ok(PalmDistribution::new(*m)?.tail_approximation(u))
}

pub fn expected_num_maxima(m: &SpectralMoments, length: f64, u: Option<f64>) -> Result<f64> {
    if !(length > 0.0 && length.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "window length must be positive, got {length}"
        )));
    }
    Ok(PalmDistribution::new(*m)?.expected_count(length, u))
}

/// Attach `p = F(height)` to every maximum, preserving order.
pub fn assign_pvalues(maxima: &[LocalMaximum], m: &SpectralMoments) -> Result<Vec<LocalMaximum>> {
    let dist = PalmDistribution::new(*m)?;
    Ok(maxima
        .iter()
        .map(|mx| LocalMaximum {
            p_value: Some(dist.p_value(mx.height)),
            ..mx.clone()
        })
        .collect())
}
