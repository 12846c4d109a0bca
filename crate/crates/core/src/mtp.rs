//! Bonferroni and Benjamini–Hochberg decisions over the random set of local
//! maxima, plus the deterministic and asymptotic height thresholds.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::palm::{PalmDistribution, SpectralMoments};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Bonferroni,
    Bh,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Bonferroni => "bonferroni",
            Method::Bh => "bh",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bonferroni" | "bon" => Ok(Method::Bonferroni),
            "bh" | "fdr" => Ok(Method::Bh),
            other => Err(Error::InvalidArgument(format!("unknown method '{other}'"))),
        }
    }
}

/// Outcome of one multiple-testing procedure.
///
/// Bonferroni rejects `p < p_threshold`; BH rejects `p <= p_threshold`.
/// With no tests the p-threshold is `+∞` and nothing is rejected. When BH
/// finds no qualifying step the p-threshold is 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MtpDecision {
    pub method: Method,
    pub alpha: f64,
    pub num_tests: usize,
    #[serde(with = "crate::serde_float")]
    pub p_threshold: f64,
    /// Height cut corresponding to `p_threshold`, when moments were given.
    #[serde(default, with = "crate::serde_float::option")]
    pub height_threshold: Option<f64>,
    /// Positions in the input p-value list, ascending.
    pub rejected_indices: Vec<usize>,
}

impl MtpDecision {
    pub fn num_rejected(&self) -> usize {
        self.rejected_indices.len()
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )))
    }
}

fn check_pvalues(p_values: &[f64]) -> Result<()> {
    match p_values.iter().position(|p| !(*p > 0.0 && *p <= 1.0)) {
        None => Ok(()),
        Some(i) => Err(Error::InvalidInput(format!(
            "p-value {} at position {i} is outside (0, 1]",
            p_values[i]
        ))),
    }
}

fn height_for(dist: Option<&PalmDistribution>, p: f64) -> Result<Option<f64>> {
    let Some(d) = dist else { return Ok(None) };
    Ok(Some(if p >= 1.0 {
        f64::NEG_INFINITY
    } else if p <= 0.0 || p.is_infinite() {
        f64::INFINITY
    } else {
        d.inverse(p)?
    }))
}

/// Reject every `p < α/m̃`, with `m̃` the number of p-values.
pub fn bonferroni(
    p_values: &[f64],
    alpha: f64,
    dist: Option<&PalmDistribution>,
) -> Result<MtpDecision> {
    check_alpha(alpha)?;
    check_pvalues(p_values)?;
    let m = p_values.len();
    if m == 0 {
        return Ok(MtpDecision {
            method: Method::Bonferroni,
            alpha,
            num_tests: 0,
            p_threshold: f64::INFINITY,
            height_threshold: dist.map(|_| f64::INFINITY),
            rejected_indices: Vec::new(),
        });
    }
    let cut = alpha / m as f64;
    let rejected_indices = (0..m).filter(|&i| p_values[i] < cut).collect();
    Ok(MtpDecision {
        method: Method::Bonferroni,
        alpha,
        num_tests: m,
        p_threshold: cut,
        height_threshold: height_for(dist, cut)?,
        rejected_indices,
    })
}

/// Benjamini–Hochberg step-up: with ascending `p_(1) <= ... <= p_(m̃)`,
/// take the largest `k` with `p_(k) <= kα/m̃` and reject the `k` smallest.
///
/// Since heights and p-values are in reverse order under a strictly
/// decreasing cdf, this is the same rejection set as stepping through the
/// ordered heights against `F⁻¹((m̃ − i + 1)α/m̃)`.
pub fn bh(p_values: &[f64], alpha: f64, dist: Option<&PalmDistribution>) -> Result<MtpDecision> {
    check_alpha(alpha)?;
    check_pvalues(p_values)?;
    let m = p_values.len();
    if m == 0 {
        return Ok(MtpDecision {
            method: Method::Bh,
            alpha,
            num_tests: 0,
            p_threshold: f64::INFINITY,
            height_threshold: dist.map(|_| f64::INFINITY),
            rejected_indices: Vec::new(),
        });
    }
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p_values[a].total_cmp(&p_values[b]));
    let k = (1..=m)
        .rev()
        .find(|&i| p_values[order[i - 1]] <= bh_cutoff(i, m, alpha))
        .unwrap_or(0);
    let mut rejected_indices: Vec<usize> = order[..k].to_vec();
    rejected_indices.sort_unstable();
    let p_threshold = if k == 0 { 0.0 } else { bh_cutoff(k, m, alpha) };
    Ok(MtpDecision {
        method: Method::Bh,
        alpha,
        num_tests: m,
        p_threshold,
        height_threshold: height_for(dist, p_threshold)?,
        rejected_indices,
    })
}

/// `kα/m`, the step-`k` BH cutoff.
pub fn bh_cutoff(k: usize, m: usize, alpha: f64) -> f64 {
    k as f64 * alpha / m as f64
}

pub fn decide(
    method: Method,
    p_values: &[f64],
    alpha: f64,
    dist: Option<&PalmDistribution>,
) -> Result<MtpDecision> {
    match method {
        Method::Bonferroni => bonferroni(p_values, alpha, dist),
        Method::Bh => bh(p_values, alpha, dist),
    }
}

/// `u*_Bon = F⁻¹(α / E[m̃])` over a window of length `length`.
pub fn bonferroni_deterministic_threshold(
    m: &SpectralMoments,
    length: f64,
    alpha: f64,
) -> Result<f64> {
    check_alpha(alpha)?;
    let dist = PalmDistribution::new(*m)?;
    if !(length > 0.0 && length.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "window length must be positive, got {length}"
        )));
    }
    let target = alpha / dist.expected_count(length, None);
    if target >= 1.0 {
        return Err(Error::Domain(format!(
            "α / E[m̃] = {target} is not below one; the window is too short"
        )));
    }
    dist.inverse(target)
}

/// Universal-threshold form of `u*_Bon`:
/// `σ √(2 log((L/α) √(λ₂ / (2π σ²))))`.
pub fn bonferroni_approx_threshold(m: &SpectralMoments, length: f64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    m.validate()?;
    let arg = (length / alpha) * (m.lambda2 / (2.0 * PI * m.sigma2)).sqrt();
    if !(arg > 1.0) {
        return Err(Error::Domain(format!(
            "logarithm argument {arg} must exceed one"
        )));
    }
    Ok(m.sigma() * (2.0 * arg.ln()).sqrt())
}

/// Right-cdf level of the asymptotic BH threshold,
/// `αA₁ / (A₁ + E[m̃₀ per unit length](1 − α))`.
pub fn asymptotic_bh_level(m: &SpectralMoments, signal_fraction: f64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if !(signal_fraction > 0.0 && signal_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "signal fraction must lie in (0, 1), got {signal_fraction}"
        )));
    }
    let rate = PalmDistribution::new(*m)?.maxima_rate();
    Ok(alpha * signal_fraction / (signal_fraction + rate * (1.0 - alpha)))
}

/// `u*_BH = F⁻¹(αA₁ / (A₁ + E[m̃₀;[0,1]](1 − α)))`.
pub fn asymptotic_bh_threshold(
    m: &SpectralMoments,
    signal_fraction: f64,
    alpha: f64,
) -> Result<f64> {
    let level = asymptotic_bh_level(m, signal_fraction, alpha)?;
    PalmDistribution::new(*m)?.inverse(level)
}
