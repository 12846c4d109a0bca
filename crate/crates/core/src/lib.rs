//! Peak detection in noisy one-dimensional series with error-rate control.
//!
//! The pipeline smooths an observed series with a Gaussian kernel, takes its
//! interior local maxima as candidate peaks, assigns each a p-value from the
//! height distribution of local maxima of a smooth stationary Gaussian
//! process, and applies Bonferroni or Benjamini-Hochberg to the p-values.

pub mod detector;
pub mod error;
pub mod evaluation;
pub mod io;
pub mod maxima;
pub mod model;
pub mod moments_est;
pub mod mtp;
pub mod normal;
pub mod palm;
pub(crate) mod serde_float;
pub mod smoothing;

pub use detector::{detect, DetectionResult, DetectorConfig, MomentsSource};
pub use error::{Error, Result};
pub use evaluation::{run_simulation, SimConfig, SimReport};
pub use maxima::{find_local_maxima, LocalMaximum};
pub use model::{Grid, NoiseSpec, Peak, SampledSeries, SignalSpec};
pub use moments_est::{estimate_moments, MomentEstimate, MomentMethod};
pub use mtp::{Method, MtpDecision};
pub use palm::{gaussian_model_moments, GaussianModelParams, PalmDistribution, SpectralMoments};
pub use smoothing::{convolve, make_gaussian_kernel, Kernel};
