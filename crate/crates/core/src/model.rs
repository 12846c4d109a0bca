//! Ground-truth synthesis: truncated-Gaussian peak trains and stationary
//! Gaussian noise with a Gaussian autocovariance, sampled on a uniform grid.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::normal;
use crate::smoothing::{self, Kernel};

/// Default half-support of the peak shape in units of its scale.
pub const DEFAULT_PEAK_TRUNCATION: f64 = 2.0;

/// Half-support of the noise-generating kernel in units of ν.
pub const NOISE_KERNEL_TRUNCATION: f64 = 4.0;

/// Uniformly sampled real-valued signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledSeries {
    values: Vec<f64>,
    spacing: f64,
    origin: f64,
}

impl SampledSeries {
    pub fn new(values: Vec<f64>, spacing: f64, origin: f64) -> Result<Self> {
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "grid spacing must be positive and finite, got {spacing}"
            )));
        }
        if !origin.is_finite() {
            return Err(Error::InvalidArgument("grid origin must be finite".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite sample at index {i}"
            )));
        }
        Ok(Self {
            values,
            spacing,
            origin,
        })
    }

    /// Series on `grid` with the given values; lengths must agree.
    pub fn on_grid(values: Vec<f64>, grid: &Grid) -> Result<Self> {
        if values.len() != grid.length {
            return Err(Error::InvalidArgument(format!(
                "{} values for a grid of length {}",
                values.len(),
                grid.length
            )));
        }
        Self::new(values, grid.spacing, grid.origin)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn origin(&self) -> f64 {
        self.origin
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Time of sample `index`.
    pub fn time(&self, index: usize) -> f64 {
        self.origin + index as f64 * self.spacing
    }

    pub fn grid(&self) -> Grid {
        Grid {
            length: self.values.len(),
            spacing: self.spacing,
            origin: self.origin,
        }
    }

    pub fn mean(&self) -> f64 {
        if self.values.is_empty() {
            return 0.0;
        }
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Copy with `f` applied to every sample.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(
            self.values.iter().map(|&v| f(v)).collect(),
            self.spacing,
            self.origin,
        )
    }

    /// Sub-series `[start, start + len)`.
    pub fn slice(&self, start: usize, len: usize) -> Result<Self> {
        if start + len > self.values.len() {
            return Err(Error::InvalidArgument(format!(
                "slice [{start}, {}) exceeds length {}",
                start + len,
                self.values.len()
            )));
        }
        Ok(Self {
            values: self.values[start..start + len].to_vec(),
            spacing: self.spacing,
            origin: self.time(start),
        })
    }
}

/// Sampling grid: `length` points at `origin + i * spacing`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub length: usize,
    pub spacing: f64,
    pub origin: f64,
}

impl Grid {
    pub fn new(length: usize, spacing: f64, origin: f64) -> Self {
        Self {
            length,
            spacing,
            origin,
        }
    }

    /// Unit-spaced grid starting at zero.
    pub fn unit(length: usize) -> Self {
        Self::new(length, 1.0, 0.0)
    }

    pub fn time(&self, index: usize) -> f64 {
        self.origin + index as f64 * self.spacing
    }

    /// Grid extended by `margin` samples on each side.
    pub fn extended(&self, margin: usize) -> Self {
        Self {
            length: self.length + 2 * margin,
            spacing: self.spacing,
            origin: self.origin - margin as f64 * self.spacing,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.length == 0 {
            return Err(Error::InvalidArgument(
                "grid length must be at least 1".into(),
            ));
        }
        if !(self.spacing > 0.0 && self.spacing.is_finite()) || !self.origin.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "grid spacing must be positive and origin finite, got spacing {} origin {}",
                self.spacing, self.origin
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub amplitude: f64,
    pub location: f64,
}

/// Train of equal-shaped peaks `a_j / b * φ((t - τ_j) / b)`, each truncated
/// to `|t - τ_j| <= truncation * b`.
///
/// The truncated shape is not renormalized, so the height of a peak is
/// `a_j / sqrt(2π b²)` and its action falls short of one by the Gaussian
/// mass outside the truncation (about 4.6% at the default of 2).
/// Overlapping supports are allowed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalSpec {
    pub peaks: Vec<Peak>,
    pub scale: f64,
    #[serde(default = "default_peak_truncation")]
    pub truncation: f64,
}

fn default_peak_truncation() -> f64 {
    DEFAULT_PEAK_TRUNCATION
}

impl SignalSpec {
    pub fn new(peaks: Vec<Peak>, scale: f64, truncation: f64) -> Result<Self> {
        let spec = Self {
            peaks,
            scale,
            truncation,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(Error::InvalidSpec(format!(
                "peak scale must be positive, got {}",
                self.scale
            )));
        }
        if !(self.truncation > 0.0 && self.truncation.is_finite()) {
            return Err(Error::InvalidSpec(format!(
                "peak truncation must be positive, got {}",
                self.truncation
            )));
        }
        for (j, p) in self.peaks.iter().enumerate() {
            if !(p.amplitude > 0.0 && p.amplitude.is_finite()) {
                return Err(Error::InvalidSpec(format!(
                    "peak {j} amplitude must be positive, got {}",
                    p.amplitude
                )));
            }
            if !p.location.is_finite() {
                return Err(Error::InvalidSpec(format!(
                    "peak {j} location is not finite"
                )));
            }
        }
        Ok(())
    }

    pub fn num_peaks(&self) -> usize {
        self.peaks.len()
    }

    /// Half-width of each peak's support in time units.
    pub fn half_support(&self) -> f64 {
        self.truncation * self.scale
    }

    /// Height of the untruncated peak maximum, `a / sqrt(2π b²)`.
    pub fn peak_height(&self, amplitude: f64) -> f64 {
        amplitude * normal::pdf(0.0) / self.scale
    }

    /// μ(t)
    pub fn value_at(&self, t: f64) -> f64 {
        let half = self.half_support();
        self.peaks
            .iter()
            .filter(|p| (t - p.location).abs() <= half)
            .map(|p| p.amplitude * normal::pdf((t - p.location) / self.scale) / self.scale)
            .sum()
    }
}

/// Stationary Gaussian noise `z(t) = σ ∫ w_ν(s - t) dB(s)`; `nu = 0` is
/// white noise on the grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub sigma: f64,
    pub nu: f64,
}

impl NoiseSpec {
    pub fn new(sigma: f64, nu: f64) -> Result<Self> {
        let spec = Self { sigma, nu };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidSpec(format!(
                "noise sigma must be positive, got {}",
                self.sigma
            )));
        }
        if !(self.nu >= 0.0 && self.nu.is_finite()) {
            return Err(Error::InvalidSpec(format!(
                "noise nu must be non-negative, got {}",
                self.nu
            )));
        }
        Ok(())
    }

    /// Noise-generating kernel for `nu > 0` on a grid with this spacing.
    pub fn kernel(&self, spacing: f64) -> Result<Option<Kernel>> {
        if self.nu == 0.0 {
            return Ok(None);
        }
        smoothing::make_gaussian_kernel(self.nu, NOISE_KERNEL_TRUNCATION, spacing).map(Some)
    }
}

/// μ(t) sampled on `grid`.
pub fn synthesize_signal(spec: &SignalSpec, grid: &Grid) -> Result<SampledSeries> {
    spec.validate()?;
    grid.validate()?;
    let values = (0..grid.length)
        .map(|i| spec.value_at(grid.time(i)))
        .collect();
    SampledSeries::on_grid(values, grid)
}

/// Noise sampled on `grid`, deterministic in `seed`.
pub fn synthesize_noise(spec: &NoiseSpec, grid: &Grid, seed: u64) -> Result<SampledSeries> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    synthesize_noise_with(spec, grid, &mut rng)
}

/// Noise sampled on `grid` using the caller's generator.
///
/// White samples have variance `σ² / spacing` so that, after the
/// `spacing`-weighted discrete convolution, the result approximates the
/// continuous stochastic integral. For `nu > 0` the white sequence is drawn
/// on a grid padded by the kernel half-width, so every output sample is a
/// full-kernel average and the series is stationary up to its edges.
pub fn synthesize_noise_with<R: Rng + ?Sized>(
    spec: &NoiseSpec,
    grid: &Grid,
    rng: &mut R,
) -> Result<SampledSeries> {
    spec.validate()?;
    grid.validate()?;
    let white_sd = spec.sigma / grid.spacing.sqrt();
    let values = match spec.kernel(grid.spacing)? {
        None => (0..grid.length)
            .map(|_| white_sd * rng.sample::<f64, _>(StandardNormal))
            .collect(),
        Some(kernel) => {
            let n = grid.length + 2 * kernel.half_width;
            let white: Vec<f64> = (0..n)
                .map(|_| white_sd * rng.sample::<f64, _>(StandardNormal))
                .collect();
            smoothing::convolve_valid(&white, &kernel)
        }
    };
    SampledSeries::on_grid(values, grid)
}

/// Signal plus noise, sample by sample.
pub fn synthesize_dataset(
    signal: &SignalSpec,
    noise: &NoiseSpec,
    grid: &Grid,
    seed: u64,
) -> Result<SampledSeries> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    synthesize_dataset_with(signal, noise, grid, &mut rng)
}

pub fn synthesize_dataset_with<R: Rng + ?Sized>(
    signal: &SignalSpec,
    noise: &NoiseSpec,
    grid: &Grid,
    rng: &mut R,
) -> Result<SampledSeries> {
    let mu = synthesize_signal(signal, grid)?;
    let z = synthesize_noise_with(noise, grid, rng)?;
    let values = mu
        .values()
        .iter()
        .zip(z.values())
        .map(|(m, z)| m + z)
        .collect();
    SampledSeries::on_grid(values, grid)
}
