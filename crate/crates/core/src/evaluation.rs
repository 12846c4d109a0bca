//! Ground truth bookkeeping, error and power metrics, the Monte Carlo
//! harness, and the matched-filter bandwidth formulas.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detector::{test_maxima, DetectionResult};
use crate::error::{Error, Result};
use crate::maxima::{local_maxima_indices, LocalMaximum};
use crate::model::{
    synthesize_dataset_with, Grid, NoiseSpec, Peak, SignalSpec, NOISE_KERNEL_TRUNCATION,
};
use crate::mtp::Method;
use crate::palm::{gaussian_model_moments, GaussianModelParams};
use crate::smoothing::{convolve_valid, make_gaussian_kernel, DEFAULT_KERNEL_TRUNCATION};

/// Closed interval `[lo, hi]` in time units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn contains(&self, t: f64) -> bool {
        self.lo <= t && t <= self.hi
    }

    pub fn len(&self) -> f64 {
        (self.hi - self.lo).max(0.0)
    }

    pub fn is_empty(&self) -> bool {
        self.hi < self.lo
    }

    fn expand(&self, by: f64) -> Self {
        Self::new(self.lo - by, self.hi + by)
    }
}

/// Union of intervals as a sorted list of disjoint intervals.
pub fn union(intervals: &[Interval]) -> Vec<Interval> {
    let mut v: Vec<Interval> = intervals
        .iter()
        .copied()
        .filter(|i| !i.is_empty())
        .collect();
    v.sort_by(|a, b| a.lo.total_cmp(&b.lo));
    let mut out: Vec<Interval> = Vec::with_capacity(v.len());
    for i in v {
        match out.last_mut() {
            Some(last) if i.lo <= last.hi => last.hi = last.hi.max(i.hi),
            _ => out.push(i),
        }
    }
    out
}

/// `window` minus a sorted disjoint union. Boundary points stay with the
/// union, so the pieces are open at the shared ends.
pub fn complement(disjoint: &[Interval], window: Interval) -> Vec<Interval> {
    let mut out = Vec::new();
    let mut start = window.lo;
    for i in disjoint {
        if i.hi < window.lo || i.lo > window.hi {
            continue;
        }
        if i.lo > start {
            out.push(Interval::new(start, i.lo));
        }
        start = start.max(i.hi);
    }
    if start < window.hi {
        out.push(Interval::new(start, window.hi));
    }
    out
}

fn covers(set: &[Interval], t: f64) -> bool {
    set.iter().any(|i| i.contains(t))
}

/// Signal, expanded-signal and null regions for a known peak train.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRegions {
    pub window: Interval,
    /// `S_j = [τ_j − c_h b, τ_j + c_h b]`, in peak order.
    pub supports: Vec<Interval>,
    /// `S_{j,γ}`: each support widened by the kernel half-support.
    pub expanded: Vec<Interval>,
    pub s1: Vec<Interval>,
    pub s1_gamma: Vec<Interval>,
    pub s0: Vec<Interval>,
    pub s0_gamma: Vec<Interval>,
    /// Per-peak regions used for power: each support with any overlap with
    /// a neighbour split at the middle of the overlap.
    pub rejection_regions: Vec<Interval>,
}

impl TruthRegions {
    pub fn num_peaks(&self) -> usize {
        self.supports.len()
    }

    pub fn in_signal(&self, t: f64) -> bool {
        covers(&self.s1, t)
    }

    /// Peak whose rejection region holds `t`; the left peak wins on a
    /// shared endpoint.
    pub fn peak_of(&self, t: f64) -> Option<usize> {
        self.rejection_regions.iter().position(|r| r.contains(t))
    }
}

pub fn truth_regions(
    signal: &SignalSpec,
    gamma: f64,
    kernel_truncation: f64,
    window: Interval,
) -> TruthRegions {
    let half = signal.half_support();
    let mut locations: Vec<f64> = signal.peaks.iter().map(|p| p.location).collect();
    locations.sort_by(f64::total_cmp);
    let supports: Vec<Interval> = locations
        .iter()
        .map(|&tau| Interval::new(tau - half, tau + half))
        .collect();
    let reach = kernel_truncation * gamma;
    let expanded: Vec<Interval> = supports.iter().map(|s| s.expand(reach)).collect();
    let rejection_regions = (0..supports.len())
        .map(|j| {
            let mut r = supports[j];
            if j > 0 && supports[j - 1].hi > r.lo {
                r.lo = 0.5 * (r.lo + supports[j - 1].hi);
            }
            if j + 1 < supports.len() && supports[j + 1].lo < r.hi {
                r.hi = 0.5 * (supports[j + 1].lo + r.hi);
            }
            r
        })
        .collect();
    let s1 = union(&supports);
    let s1_gamma = union(&expanded);
    let s0 = complement(&s1, window);
    let s0_gamma = complement(&s1_gamma, window);
    TruthRegions {
        window,
        supports,
        expanded,
        s1,
        s1_gamma,
        s0,
        s0_gamma,
        rejection_regions,
    }
}

/// Counts for one detection run against the truth.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunCounts {
    /// Rejected maxima outside the signal region.
    pub v: usize,
    /// Rejected maxima inside the signal region.
    pub w: usize,
    pub r: usize,
    /// Peaks whose rejection region holds at least one rejected maximum.
    pub detected_peaks: usize,
    /// Number of local maxima tested, and how many fall outside / inside
    /// the signal region.
    pub m: usize,
    pub m0: usize,
    pub m1: usize,
    /// Peaks whose rejection region holds more than one local maximum.
    pub peaks_with_multiple_maxima: usize,
    pub num_peaks: usize,
}

impl RunCounts {
    /// `V / (R ∨ 1)`
    pub fn fdp(&self) -> f64 {
        self.v as f64 / self.r.max(1) as f64
    }

    pub fn any_false(&self) -> bool {
        self.v > 0
    }

    /// Fraction of peaks detected; 0 when there are no peaks.
    pub fn power(&self) -> f64 {
        if self.num_peaks == 0 {
            0.0
        } else {
            self.detected_peaks as f64 / self.num_peaks as f64
        }
    }

    pub fn multi_max_fraction(&self) -> f64 {
        if self.num_peaks == 0 {
            0.0
        } else {
            self.peaks_with_multiple_maxima as f64 / self.num_peaks as f64
        }
    }
}

pub fn classify(result: &DetectionResult, regions: &TruthRegions) -> RunCounts {
    classify_maxima(&result.maxima, regions)
}

/// Classify maxima carrying `rejected` flags; unflagged ones count as
/// tested and accepted.
pub fn classify_maxima(maxima: &[LocalMaximum], regions: &TruthRegions) -> RunCounts {
    let j = regions.num_peaks();
    let mut c = RunCounts {
        m: maxima.len(),
        num_peaks: j,
        ..Default::default()
    };
    let mut hit = vec![false; j];
    let mut per_peak = vec![0usize; j];
    for mx in maxima {
        let signal = regions.in_signal(mx.time);
        if signal {
            c.m1 += 1;
        }
        let peak = regions.peak_of(mx.time);
        if let Some(p) = peak {
            per_peak[p] += 1;
        }
        if mx.rejected == Some(true) {
            if signal {
                c.w += 1;
            } else {
                c.v += 1;
            }
            if let Some(p) = peak {
                hit[p] = true;
            }
        }
    }
    c.m0 = c.m - c.m1;
    c.r = c.v + c.w;
    c.detected_peaks = hit.iter().filter(|&&h| h).count();
    c.peaks_with_multiple_maxima = per_peak.iter().filter(|&&n| n > 1).count();
    c
}

/// Equally spaced train of equal peaks, centered in its window.
///
/// The window length keeps the signal fraction `|𝕊₁| / L` equal to that of
/// non-overlapping peaks at `reference_spacing`; with the defaults this is
/// `L = 2000` and `τ_j = 100 j − 50`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakTrainLayout {
    pub num_peaks: usize,
    pub amplitude: f64,
    pub scale: f64,
    #[serde(default = "default_peak_truncation")]
    pub truncation: f64,
    pub peak_spacing: f64,
    #[serde(default = "default_reference_spacing")]
    pub reference_spacing: f64,
}

fn default_peak_truncation() -> f64 {
    crate::model::DEFAULT_PEAK_TRUNCATION
}

fn default_reference_spacing() -> f64 {
    100.0
}

impl PeakTrainLayout {
    /// 20 peaks with `b = 3`, truncated at `±2b`, spaced 100 apart.
    pub fn standard(amplitude: f64) -> Self {
        Self {
            num_peaks: 20,
            amplitude,
            scale: 3.0,
            truncation: 2.0,
            peak_spacing: 100.0,
            reference_spacing: 100.0,
        }
    }

    pub fn with_peak_spacing(mut self, spacing: f64) -> Self {
        self.peak_spacing = spacing;
        self
    }

    /// Number of unit-spaced samples in the window.
    pub fn window_length(&self) -> usize {
        let width = 2.0 * self.truncation * self.scale;
        let j = self.num_peaks as f64;
        let covered = width + (j - 1.0).max(0.0) * self.peak_spacing.min(width);
        (covered * self.reference_spacing / width).round() as usize
    }

    pub fn build(&self) -> Result<(SignalSpec, Grid)> {
        if !(self.peak_spacing > 0.0 && self.reference_spacing > 0.0) {
            return Err(Error::InvalidSpec("peak spacings must be positive".into()));
        }
        let length = self.window_length();
        let span = (self.num_peaks.max(1) - 1) as f64 * self.peak_spacing;
        let first = (length as f64 - span) / 2.0;
        let peaks = (0..self.num_peaks)
            .map(|j| Peak {
                amplitude: self.amplitude,
                location: first + j as f64 * self.peak_spacing,
            })
            .collect();
        let signal = SignalSpec::new(peaks, self.scale, self.truncation)?;
        Ok((signal, Grid::unit(length)))
    }
}

/// `{1.0, 1.5, …, 6.5}`
pub fn default_gamma_grid() -> Vec<f64> {
    (0..12).map(|i| 1.0 + 0.5 * i as f64).collect()
}

/// `{1.0, 1.1, …, 3.5}`
pub fn fine_gamma_grid() -> Vec<f64> {
    (0..=25).map(|i| 1.0 + 0.1 * i as f64).collect()
}

fn default_methods() -> Vec<Method> {
    vec![Method::Bonferroni, Method::Bh]
}

fn default_truncation() -> f64 {
    DEFAULT_KERNEL_TRUNCATION
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub signal: SignalSpec,
    pub noise: NoiseSpec,
    pub grid: Grid,
    pub gammas: Vec<f64>,
    #[serde(default = "default_truncation")]
    pub kernel_truncation: f64,
    pub alpha: f64,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    pub replications: usize,
    pub seed: u64,
    /// Peak spacing of the layout, when the train came from one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub peak_spacing: Option<f64>,
}

impl SimConfig {
    pub fn from_layout(
        layout: &PeakTrainLayout,
        noise: NoiseSpec,
        gammas: Vec<f64>,
        alpha: f64,
        replications: usize,
        seed: u64,
    ) -> Result<Self> {
        let (signal, grid) = layout.build()?;
        Ok(Self {
            signal,
            noise,
            grid,
            gammas,
            kernel_truncation: DEFAULT_KERNEL_TRUNCATION,
            alpha,
            methods: default_methods(),
            replications,
            seed,
            peak_spacing: Some(layout.peak_spacing),
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.signal.validate()?;
        self.noise.validate()?;
        if self.replications == 0 {
            return Err(Error::InvalidArgument(
                "replications must be at least 1".into(),
            ));
        }
        if self.gammas.is_empty() || self.methods.is_empty() {
            return Err(Error::InvalidArgument(
                "at least one gamma and one method are required".into(),
            ));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        for &g in &self.gammas {
            GaussianModelParams::new(self.noise.sigma, self.noise.nu, g)?;
        }
        if !(self.grid.spacing > 0.0) || self.grid.length < 3 {
            return Err(Error::InvalidArgument(
                "simulation grid needs at least 3 points and positive spacing".into(),
            ));
        }
        Ok(())
    }

    /// Observation window in time units.
    pub fn window(&self) -> Interval {
        Interval::new(self.grid.origin, self.grid.time(self.grid.length - 1))
    }

    /// Samples added on each side before smoothing and cropped afterwards.
    pub fn margin(&self) -> usize {
        let gamma_max = self.gammas.iter().cloned().fold(0.0, f64::max);
        let reach = NOISE_KERNEL_TRUNCATION * self.noise.nu + self.kernel_truncation * gamma_max;
        (reach / self.grid.spacing).ceil() as usize
    }
}

/// Metrics for one `(γ, method)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimEntry {
    pub gamma: f64,
    pub method: Method,
    pub fwer: f64,
    pub fwer_se: f64,
    pub fdr: f64,
    pub fdr_se: f64,
    pub power: f64,
    pub power_se: f64,
    /// Fraction of peaks with more than one local maximum.
    pub multi_max: f64,
    pub multi_max_se: f64,
    pub mean_maxima: f64,
    pub mean_rejections: f64,
    pub mean_false_rejections: f64,
    pub mean_detected_peaks: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub config: SimConfig,
    pub entries: Vec<SimEntry>,
}

impl SimReport {
    pub fn entry(&self, gamma: f64, method: Method) -> Option<&SimEntry> {
        self.entries
            .iter()
            .find(|e| e.method == method && (e.gamma - gamma).abs() < 1e-9)
    }
}

/// Generator for replication `rep`: one base seed, one stream per
/// replication.
pub fn replication_rng(seed: u64, rep: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep);
    rng
}

/// Counts of one replication for every `(γ, method)` cell, in the order
/// `gammas × methods`.
pub fn simulate_replication(config: &SimConfig, rep: u64) -> Result<Vec<RunCounts>> {
    let margin = config.margin();
    let n = config.grid.length;
    let padded = config.grid.extended(margin);
    let mut rng = replication_rng(config.seed, rep);
    let y = synthesize_dataset_with(&config.signal, &config.noise, &padded, &mut rng)?;
    let window = config.window();
    let mut out = Vec::with_capacity(config.gammas.len() * config.methods.len());
    for &gamma in &config.gammas {
        let kernel = make_gaussian_kernel(gamma, config.kernel_truncation, config.grid.spacing)?;
        // valid output i is centered on padded sample i + half_width
        let smoothed = convolve_valid(y.values(), &kernel);
        let x = &smoothed[margin - kernel.half_width..][..n];
        let maxima: Vec<LocalMaximum> = local_maxima_indices(x, 0)
            .into_iter()
            .map(|i| LocalMaximum {
                index: i,
                time: config.grid.time(i),
                height: x[i],
                p_value: None,
                rejected: None,
            })
            .collect();
        let moments = gaussian_model_moments(&GaussianModelParams::new(
            config.noise.sigma,
            config.noise.nu,
            gamma,
        )?);
        let regions = truth_regions(&config.signal, gamma, config.kernel_truncation, window);
        for &method in &config.methods {
            let (tested, _) = test_maxima(maxima.clone(), &moments, config.alpha, method)?;
            out.push(classify_maxima(&tested, &regions));
        }
    }
    Ok(out)
}

fn mean_se(values: impl Iterator<Item = f64> + Clone, n: usize) -> (f64, f64) {
    let nf = n as f64;
    let mean = values.clone().sum::<f64>() / nf;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    (mean, (var / nf).sqrt())
}

/// Run every replication and summarize per `(γ, method)`.
///
/// Replications run in parallel; the per-cell reduction is a sequential
/// pass over replications in index order, so the report depends only on
/// the configuration.
pub fn run_simulation(config: &SimConfig) -> Result<SimReport> {
    config.validate()?;
    let reps: Vec<Vec<RunCounts>> = (0..config.replications as u64)
        .into_par_iter()
        .map(|rep| simulate_replication(config, rep))
        .collect::<Result<_>>()?;
    let n = reps.len();
    let mut entries = Vec::new();
    let cells = config
        .gammas
        .iter()
        .flat_map(|&g| config.methods.iter().map(move |&m| (g, m)));
    for (k, (gamma, method)) in cells.enumerate() {
        let col = reps.iter().map(move |r| r[k]);
        let (fwer, _) = mean_se(col.clone().map(|c| c.any_false() as u8 as f64), n);
        let (fdr, fdr_se) = mean_se(col.clone().map(|c| c.fdp()), n);
        let (power, power_se) = mean_se(col.clone().map(|c| c.power()), n);
        let (multi_max, multi_max_se) = mean_se(col.clone().map(|c| c.multi_max_fraction()), n);
        let avg =
            |f: fn(&RunCounts) -> usize| col.clone().map(|c| f(&c) as f64).sum::<f64>() / n as f64;
        entries.push(SimEntry {
            gamma,
            method,
            fwer,
            fwer_se: (fwer * (1.0 - fwer) / n as f64).sqrt(),
            fdr,
            fdr_se,
            power,
            power_se,
            multi_max,
            multi_max_se,
            mean_maxima: avg(|c| c.m),
            mean_rejections: avg(|c| c.r),
            mean_false_rejections: avg(|c| c.v),
            mean_detected_peaks: avg(|c| c.detected_peaks),
        });
    }
    Ok(SimReport {
        config: config.clone(),
        entries,
    })
}

/// `γ* = √(b² − 2ν²)`, or 0 when `ν ≥ b/√2`.
pub fn optimal_gamma(b: f64, nu: f64) -> Result<f64> {
    if !(b > 0.0 && b.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "peak scale must be positive, got {b}"
        )));
    }
    if !(nu >= 0.0 && nu.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "nu must be non-negative, got {nu}"
        )));
    }
    let d = b * b - 2.0 * nu * nu;
    Ok(if d > 0.0 { d.sqrt() } else { 0.0 })
}

/// Smoothed peak height over smoothed noise sd, `h_γ(0) / σ_γ`, for an
/// untruncated Gaussian peak of unit action.
pub fn matched_filter_objective(b: f64, nu: f64, gamma: f64, sigma: f64) -> Result<f64> {
    if !(b > 0.0 && b.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "peak scale must be positive, got {b}"
        )));
    }
    let params = GaussianModelParams::new(sigma, nu, gamma)?;
    let height = 1.0 / (2.0 * PI * (b * b + gamma * gamma)).sqrt();
    Ok(height / gaussian_model_moments(&params).sigma())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_peak(tau: f64) -> SignalSpec {
        SignalSpec::new(
            vec![Peak {
                amplitude: 10.0,
                location: tau,
            }],
            3.0,
            2.0,
        )
        .unwrap()
    }

    fn maximum(time: f64, rejected: bool) -> LocalMaximum {
        LocalMaximum {
            index: time as usize,
            time,
            height: 1.0,
            p_value: Some(0.5),
            rejected: Some(rejected),
        }
    }

    #[test]
    fn single_peak_regions() {
        let r = truth_regions(&one_peak(50.0), 1.5, 4.0, Interval::new(0.0, 100.0));
        assert_eq!(r.supports, vec![Interval::new(44.0, 56.0)]);
        assert_eq!(r.expanded, vec![Interval::new(38.0, 62.0)]);
        assert_eq!(
            r.s0,
            vec![Interval::new(0.0, 44.0), Interval::new(56.0, 100.0)]
        );
        assert_eq!(
            r.s0_gamma,
            vec![Interval::new(0.0, 38.0), Interval::new(62.0, 100.0)]
        );
        assert_eq!(r.rejection_regions, r.supports);
        let r0 = truth_regions(&one_peak(50.0), 0.0, 4.0, Interval::new(0.0, 100.0));
        assert_eq!(r0.expanded, r0.supports);
    }

    #[test]
    fn overlap_is_split_at_midpoint() {
        let s = SignalSpec::new(
            vec![
                Peak {
                    amplitude: 1.0,
                    location: 10.0,
                },
                Peak {
                    amplitude: 1.0,
                    location: 0.0,
                },
            ],
            3.0,
            2.0,
        )
        .unwrap();
        let r = truth_regions(&s, 1.0, 4.0, Interval::new(-20.0, 30.0));
        assert_eq!(
            r.supports,
            vec![Interval::new(-6.0, 6.0), Interval::new(4.0, 16.0)]
        );
        assert_eq!(
            r.rejection_regions,
            vec![Interval::new(-6.0, 5.0), Interval::new(5.0, 16.0)]
        );
        assert_eq!(r.s1, vec![Interval::new(-6.0, 16.0)]);
        assert_eq!(r.peak_of(5.0), Some(0));
        assert_eq!(r.peak_of(5.5), Some(1));
    }

    #[test]
    fn rejection_regions_tile_the_signal_region() {
        for d in [5.0, 9.0, 11.0, 12.0, 30.0] {
            let layout = PeakTrainLayout::standard(10.0).with_peak_spacing(d);
            let (s, g) = layout.build().unwrap();
            let window = Interval::new(0.0, g.time(g.length - 1));
            let r = truth_regions(&s, 3.0, 4.0, window);
            let total: f64 = r.rejection_regions.iter().map(|i| i.len()).sum();
            let s1: f64 = r.s1.iter().map(|i| i.len()).sum();
            assert!((total - s1).abs() < 1e-9, "D={d}");
            for w in r.rejection_regions.windows(2) {
                assert!(w[0].hi <= w[1].lo + 1e-12);
            }
            let s0: f64 = r.s0.iter().map(|i| i.len()).sum();
            assert!((s0 + s1 - window.len()).abs() < 1e-9);
        }
    }

    #[test]
    fn classification_examples() {
        let r = truth_regions(&one_peak(50.0), 3.0, 4.0, Interval::new(0.0, 100.0));
        let c = classify_maxima(&[maximum(50.0, true), maximum(10.0, true)], &r);
        assert_eq!((c.v, c.w, c.r), (1, 1, 2));
        assert_eq!(c.fdp(), 0.5);
        let c = classify_maxima(&[maximum(50.0, false), maximum(10.0, false)], &r);
        assert_eq!((c.v, c.w, c.fdp()), (0, 0, 0.0));
        let c = classify_maxima(&[maximum(48.0, true), maximum(53.0, true)], &r);
        assert_eq!((c.w, c.detected_peaks), (2, 1));
        assert_eq!(c.peaks_with_multiple_maxima, 1);
        // transition region counts as false
        let c = classify_maxima(&[maximum(58.0, true)], &r);
        assert_eq!((c.v, c.w), (1, 0));
        assert_eq!((c.m, c.m0, c.m1), (1, 1, 0));
    }

    #[test]
    fn standard_layout() {
        let (s, g) = PeakTrainLayout::standard(10.0).build().unwrap();
        assert_eq!(g.length, 2000);
        let taus: Vec<f64> = s.peaks.iter().map(|p| p.location).collect();
        let want: Vec<f64> = (1..=20).map(|j| 100.0 * j as f64 - 50.0).collect();
        assert_eq!(taus, want);
        let overlap = PeakTrainLayout::standard(10.0).with_peak_spacing(9.0);
        assert_eq!(overlap.window_length(), 1525);
    }

    #[test]
    fn gamma_grids() {
        let g = default_gamma_grid();
        assert_eq!(g.len(), 12);
        assert_eq!(g[0], 1.0);
        assert_eq!(g[11], 6.5);
        let f = fine_gamma_grid();
        assert_eq!(f.len(), 26);
        assert!((f[25] - 3.5).abs() < 1e-12);
    }

    #[test]
    fn optimal_gamma_values() {
        assert_eq!(optimal_gamma(3.0, 0.0).unwrap(), 3.0);
        assert!((optimal_gamma(3.0, 2.0).unwrap() - 1.0).abs() < 1e-12);
        assert!((optimal_gamma(3.0, 1.0).unwrap() - 7f64.sqrt()).abs() < 1e-12);
        assert_eq!(optimal_gamma(3.0, 3.0).unwrap(), 0.0);
        assert!(optimal_gamma(0.0, 1.0).is_err());
    }

    #[test]
    fn matched_filter_values() {
        let v = matched_filter_objective(3.0, 0.0, 3.0, 1.0).unwrap();
        assert!((v - 0.094031 / 0.306645).abs() < 1e-4, "{v}");
        let argmax = |nu: f64| {
            (1..=1000)
                .map(|i| i as f64 * 0.01)
                .max_by(|a, b| {
                    let fa = matched_filter_objective(3.0, nu, *a, 1.0).unwrap();
                    let fb = matched_filter_objective(3.0, nu, *b, 1.0).unwrap();
                    fa.total_cmp(&fb)
                })
                .unwrap()
        };
        assert!((argmax(0.0) - 3.0).abs() <= 0.01);
        assert!((argmax(1.0) - 7f64.sqrt()).abs() <= 0.01);
        let mut prev = f64::INFINITY;
        for i in 1..=1000 {
            let f = matched_filter_objective(3.0, 3.0, i as f64 * 0.01, 1.0).unwrap();
            assert!(f < prev);
            prev = f;
        }
    }

    #[test]
    fn simulation_is_reproducible_and_bounded() {
        let config = SimConfig::from_layout(
            &PeakTrainLayout::standard(10.0),
            NoiseSpec::new(1.0, 0.0).unwrap(),
            vec![2.0, 3.0],
            0.05,
            20,
            99,
        )
        .unwrap();
        let a = run_simulation(&config).unwrap();
        let b = run_simulation(&config).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.entries.len(), 4);
        for e in &a.entries {
            for v in [e.fwer, e.fdr, e.power, e.multi_max] {
                assert!((0.0..=1.0).contains(&v));
            }
            assert!(e.fdr <= e.fwer + 1e-12);
        }
    }

    #[test]
    fn replication_streams_differ() {
        use rand::Rng;
        let a: u64 = replication_rng(1, 0).random();
        let b: u64 = replication_rng(1, 1).random();
        let c: u64 = replication_rng(1, 0).random();
        assert_ne!(a, b);
        assert_eq!(a, c);
    }

    #[test]
    fn simulation_rejects_bad_config() {
        let mut config = SimConfig::from_layout(
            &PeakTrainLayout::standard(10.0),
            NoiseSpec::new(1.0, 0.0).unwrap(),
            vec![3.0],
            0.05,
            1,
            0,
        )
        .unwrap();
        config.replications = 0;
        assert!(run_simulation(&config).is_err());
    }
}
