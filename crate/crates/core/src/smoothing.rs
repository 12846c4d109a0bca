//! Discrete kernel smoothing with a truncated Gaussian kernel.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SampledSeries;
use crate::normal;

/// Default kernel half-support in units of the bandwidth.
pub const DEFAULT_KERNEL_TRUNCATION: f64 = 4.0;

/// Symmetric sampled kernel whose weights times `spacing` sum to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    pub weights: Vec<f64>,
    pub spacing: f64,
    pub half_width: usize,
    /// Bandwidth below the grid spacing: the sampled kernel aliases and the
    /// continuous-process moments no longer describe the smoothed series.
    pub aliasing: bool,
}

impl Kernel {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Truncated Gaussian kernel `φ(t/γ)/γ` on `|t| <= c_w γ`, renormalized to
/// unit mass on the grid. `gamma` is in time units.
pub fn make_gaussian_kernel(gamma: f64, truncation: f64, spacing: f64) -> Result<Kernel> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "kernel bandwidth must be positive, got {gamma}"
        )));
    }
    if !(truncation > 0.0 && truncation.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "kernel truncation must be positive, got {truncation}"
        )));
    }
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "grid spacing must be positive, got {spacing}"
        )));
    }
    // Small slack so that e.g. 4 * 1.5 / 1 lands on 6 rather than 5.999...
    let half_width = (truncation * gamma / spacing + 1e-9).floor() as usize;
    let mut weights: Vec<f64> = (0..=2 * half_width)
        .map(|i| {
            let k = i as f64 - half_width as f64;
            normal::pdf(k * spacing / gamma) / gamma
        })
        .collect();
    let mass: f64 = weights.iter().sum::<f64>() * spacing;
    for w in &mut weights {
        *w /= mass;
    }
    Ok(Kernel {
        weights,
        spacing,
        half_width,
        aliasing: gamma <= spacing,
    })
}

/// Smoothed series together with the width of the boundary zone at each
/// end, where the kernel was only partially inside the data.
#[derive(Debug, Clone, PartialEq)]
pub struct Smoothed {
    pub series: SampledSeries,
    pub boundary: usize,
}

/// Same-length discrete convolution `Σ_k w_k x_{i-k} · spacing`.
///
/// Interior points use the full kernel. Within `half_width` of either end the
/// kernel is cut to its in-range part and renormalized, and the result
/// records that zone so inference can exclude it.
pub fn convolve(series: &SampledSeries, kernel: &Kernel) -> Result<Smoothed> {
    let n = series.len();
    let h = kernel.half_width;
    if n < kernel.len() {
        return Err(Error::InvalidArgument(format!(
            "series of length {n} is shorter than the kernel ({})",
            kernel.len()
        )));
    }
    if (series.spacing() - kernel.spacing).abs() > 1e-12 * series.spacing() {
        return Err(Error::InvalidArgument(format!(
            "kernel spacing {} does not match series spacing {}",
            kernel.spacing,
            series.spacing()
        )));
    }
    let x = series.values();
    let interior = convolve_valid(x, kernel);
    let mut out = Vec::with_capacity(n);
    let edge = |i: usize| {
        let lo = i.saturating_sub(h);
        let hi = (i + h).min(n - 1);
        let mut acc = 0.0;
        let mut mass = 0.0;
        for j in lo..=hi {
            // kernel index for sample j contributing to output i
            let w = kernel.weights[j + h - i];
            acc += w * x[j];
            mass += w;
        }
        acc / mass
    };
    out.extend((0..h).map(edge));
    out.extend(interior);
    out.extend((n - h..n).map(edge));
    Ok(Smoothed {
        series: SampledSeries::new(out, series.spacing(), series.origin())?,
        boundary: h,
    })
}

/// "Valid" convolution: output `i` is centered on input `i + half_width`,
/// giving `len - 2 * half_width` values (empty if the input is too short).
pub fn convolve_valid(x: &[f64], kernel: &Kernel) -> Vec<f64> {
    let k = kernel.len();
    if x.len() < k {
        return Vec::new();
    }
    let scale = kernel.spacing;
    x.windows(k)
        .map(|win| {
            // symmetric kernel, so correlation and convolution coincide
            win.iter()
                .zip(&kernel.weights)
                .map(|(a, w)| a * w)
                .sum::<f64>()
                * scale
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{synthesize_noise, Grid, NoiseSpec};
    use approx::assert_relative_eq;

    #[test]
    fn kernel_support_and_mass() {
        let k = make_gaussian_kernel(1.5, 4.0, 1.0).unwrap();
        assert_eq!(k.len(), 13);
        assert_eq!(k.half_width, 6);
        assert!(!k.aliasing);
        assert_relative_eq!(
            k.weights.iter().sum::<f64>() * k.spacing,
            1.0,
            epsilon = 1e-12
        );
        for i in 0..k.half_width {
            assert_eq!(k.weights[i], k.weights[k.len() - 1 - i]);
        }
        assert!(k.weights.iter().all(|&w| w >= 0.0));
    }

    #[test]
    fn kernel_mass_with_fractional_spacing() {
        let k = make_gaussian_kernel(2.0, 4.0, 0.3).unwrap();
        assert_relative_eq!(k.weights.iter().sum::<f64>() * 0.3, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn kernel_at_grid_spacing_is_flagged() {
        let k = make_gaussian_kernel(1.0, 4.0, 1.0).unwrap();
        assert!(k.aliasing);
        assert_eq!(k.len(), 9);
        assert!(make_gaussian_kernel(0.0, 4.0, 1.0).is_err());
        assert!(make_gaussian_kernel(-1.0, 4.0, 1.0).is_err());
    }

    #[test]
    fn kernel_center_weight() {
        let k = make_gaussian_kernel(3.0, 4.0, 1.0).unwrap();
        let raw = normal::pdf(0.0) / 3.0;
        assert!((raw - 0.13298).abs() < 1e-5);
        assert!((k.weights[k.half_width] - raw).abs() / raw < 1e-3);
    }

    #[test]
    fn impulse_reproduces_kernel() {
        let k = make_gaussian_kernel(1.5, 4.0, 1.0).unwrap();
        let mut x = vec![0.0; 41];
        x[20] = 1.0;
        let s = SampledSeries::new(x, 1.0, 0.0).unwrap();
        let y = convolve(&s, &k).unwrap();
        assert_eq!(y.boundary, 6);
        for (j, w) in k.weights.iter().enumerate() {
            assert_relative_eq!(y.series.values()[20 - 6 + j], *w, epsilon = 1e-15);
        }
    }

    #[test]
    fn constant_is_preserved_everywhere() {
        let k = make_gaussian_kernel(2.0, 4.0, 0.5).unwrap();
        let s = SampledSeries::new(vec![3.25; 50], 0.5, 0.0).unwrap();
        let y = convolve(&s, &k).unwrap();
        for v in y.series.values() {
            assert_relative_eq!(*v, 3.25, epsilon = 1e-12);
        }
    }

    #[test]
    fn too_short_series_is_rejected() {
        let k = make_gaussian_kernel(3.0, 4.0, 1.0).unwrap();
        let s = SampledSeries::new(vec![0.0; 10], 1.0, 0.0).unwrap();
        assert!(matches!(convolve(&s, &k), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn gaussian_peak_widens_in_quadrature() {
        // a φ(t/b)/b smoothed with w_γ gives a φ(t/ξ)/ξ, ξ = sqrt(b² + γ²)
        let (a, b, gamma, spacing) = (10.0, 3.0, 4.0, 0.05);
        let n = 4001;
        let center = 100.0;
        let x: Vec<f64> = (0..n)
            .map(|i| {
                let t = i as f64 * spacing;
                a * normal::pdf((t - center) / b) / b
            })
            .collect();
        let s = SampledSeries::new(x, spacing, 0.0).unwrap();
        let k = make_gaussian_kernel(gamma, 8.0, spacing).unwrap();
        let y = convolve(&s, &k).unwrap();
        let got = y.series.values()[2000];
        let want = a * normal::pdf(0.0) / 5.0;
        assert!((got - want).abs() / want < 1e-6, "{got} vs {want}");
    }

    #[test]
    fn translation_equivariant_on_interior() {
        let k = make_gaussian_kernel(1.5, 4.0, 1.0).unwrap();
        let z = synthesize_noise(&NoiseSpec::new(1.0, 0.0).unwrap(), &Grid::unit(200), 1).unwrap();
        let shift = 7;
        let x0 = z.values()[shift..].to_vec();
        let x1 = z.values()[..200 - shift].to_vec();
        let y0 = convolve(&SampledSeries::new(x0, 1.0, 0.0).unwrap(), &k).unwrap();
        let y1 = convolve(&SampledSeries::new(x1, 1.0, 0.0).unwrap(), &k).unwrap();
        let h = k.half_width;
        for i in h..(200 - shift - h - shift) {
            assert_relative_eq!(
                y0.series.values()[i],
                y1.series.values()[i + shift],
                epsilon = 1e-14
            );
        }
    }

    #[test]
    fn smoothed_white_noise_variance() {
        let z = synthesize_noise(
            &NoiseSpec::new(1.0, 0.0).unwrap(),
            &Grid::unit(1_000_000),
            17,
        )
        .unwrap();
        let k = make_gaussian_kernel(1.5, 4.0, 1.0).unwrap();
        let y = convolve_valid(z.values(), &k);
        let var = y.iter().map(|v| v * v).sum::<f64>() / y.len() as f64;
        let want = 1.0 / (2.0 * std::f64::consts::PI.sqrt() * 1.5);
        assert!((var - want).abs() / want < 0.02, "{var} vs {want}");
    }

    #[test]
    fn composition_matches_single_wider_kernel() {
        // w_γ ⊛ w_ν = w_ξ, checked on a fine grid with wide truncation
        let spacing = 0.05;
        let (gamma, nu): (f64, f64) = (1.2, 0.9);
        let xi: f64 = (gamma * gamma + nu * nu).sqrt();
        let kg = make_gaussian_kernel(gamma, 10.0, spacing).unwrap();
        let kn = make_gaussian_kernel(nu, 10.0, spacing).unwrap();
        let kx = make_gaussian_kernel(xi, 10.0, spacing).unwrap();
        let z = synthesize_noise(
            &NoiseSpec::new(1.0, 0.0).unwrap(),
            &Grid::new(3000, spacing, 0.0),
            3,
        )
        .unwrap();
        let twice = convolve_valid(&convolve_valid(z.values(), &kg), &kn);
        let once = convolve_valid(z.values(), &kx);
        let scale = once.iter().map(|v| v.abs()).fold(0.0, f64::max);
        // align both outputs on the input sample they are centered on
        let shift = kg.half_width + kn.half_width;
        let shift_x = kx.half_width;
        let start = shift.max(shift_x);
        let end = 3000 - start;
        for c in start..end {
            let a = twice[c - shift];
            let b = once[c - shift_x];
            assert!((a - b).abs() <= 1e-8 * scale, "at {c}: {a} vs {b}");
        }
    }
}
