use peakmt::evaluation::{
    default_gamma_grid, run_simulation, PeakTrainLayout, SimConfig, SimReport,
};
use peakmt::maxima::local_maxima_indices;
use peakmt::model::{synthesize_noise, Grid, NoiseSpec};
use peakmt::mtp::{bonferroni_deterministic_threshold, Method};
use peakmt::palm::{gaussian_model_moments, GaussianModelParams, PalmDistribution};
use peakmt::smoothing::{convolve_valid, make_gaussian_kernel};

fn standard(amplitude: f64, reps: usize, seed: u64) -> SimReport {
    let config = SimConfig::from_layout(
        &PeakTrainLayout::standard(amplitude),
        NoiseSpec::new(1.0, 0.0).unwrap(),
        default_gamma_grid(),
        0.05,
        reps,
        seed,
    )
    .unwrap();
    run_simulation(&config).unwrap()
}

#[test]
fn multiple_maxima_per_peak_fall_with_gamma_and_snr() {
    let r10 = standard(10.0, 1000, 41);
    let r15 = standard(15.0, 1000, 42);
    let grid = default_gamma_grid();
    for r in [&r10, &r15] {
        for w in grid.windows(2) {
            let a = r.entry(w[0], Method::Bh).unwrap();
            let b = r.entry(w[1], Method::Bh).unwrap();
            let se = a.multi_max_se.hypot(b.multi_max_se);
            assert!(
                b.multi_max - a.multi_max <= 3.0 * se,
                "gamma {} -> {}",
                w[0],
                w[1]
            );
        }
    }
    for &g in &grid {
        let a = r10.entry(g, Method::Bh).unwrap();
        let b = r15.entry(g, Method::Bh).unwrap();
        let se = a.multi_max_se.hypot(b.multi_max_se);
        assert!(b.multi_max - a.multi_max <= 3.0 * se, "gamma {g}");
    }
    assert!(
        r10.entry(1.0, Method::Bh).unwrap().multi_max
            > r10.entry(3.0, Method::Bh).unwrap().multi_max
    );
}

#[test]
fn report_invariants() {
    let r = standard(10.0, 200, 8);
    for e in &r.entries {
        for v in [e.fwer, e.fdr, e.power, e.multi_max] {
            assert!((0.0..=1.0).contains(&v));
        }
        assert!(e.fdr <= e.fwer);
        assert!(e.mean_detected_peaks <= e.mean_rejections - e.mean_false_rejections + 1e-12);
    }
    for &g in &default_gamma_grid() {
        let bon = r.entry(g, Method::Bonferroni).unwrap();
        let bh = r.entry(g, Method::Bh).unwrap();
        assert!(bh.power >= bon.power);
    }
}

#[test]
fn noise_correlation_is_accounted_for() {
    // with nu > 0 the p-values use the combined bandwidth; error stays controlled
    let config = SimConfig::from_layout(
        &PeakTrainLayout::standard(10.0),
        NoiseSpec::new(1.0, 1.0).unwrap(),
        vec![2.0],
        0.05,
        1000,
        12,
    )
    .unwrap();
    let r = run_simulation(&config).unwrap();
    assert!(r.entry(2.0, Method::Bonferroni).unwrap().fwer <= 0.0646);
    assert!(r.entry(2.0, Method::Bh).unwrap().fdr <= 0.0646);
}

#[test]
fn tail_fraction_above_bonferroni_threshold() {
    // fraction of null maxima above u*_Bon matches F(u*) = α/E
    let gamma = 3.0;
    let m = gaussian_model_moments(&GaussianModelParams::new(1.0, 0.0, gamma).unwrap());
    let u = bonferroni_deterministic_threshold(&m, 2000.0, 0.05).unwrap();
    let want = PalmDistribution::new(m).unwrap().right_cdf(u);
    assert!((want - 3.848e-4).abs() < 1e-6);
    let k = make_gaussian_kernel(gamma, 4.0, 1.0).unwrap();
    let (mut above, mut total) = (0usize, 0usize);
    for seed in 0..40 {
        let n = 100_000;
        let z = synthesize_noise(
            &NoiseSpec::new(1.0, 0.0).unwrap(),
            &Grid::unit(n + 2 * k.half_width),
            seed,
        )
        .unwrap();
        let x = convolve_valid(z.values(), &k);
        for i in local_maxima_indices(&x, 0) {
            total += 1;
            if x[i] > u {
                above += 1;
            }
        }
    }
    let frac = above as f64 / total as f64;
    let se = (want * (1.0 - want) / total as f64).sqrt();
    assert!(
        (frac - want).abs() <= 4.0 * se,
        "{frac} vs {want} (se {se}, n {total})"
    );
}
