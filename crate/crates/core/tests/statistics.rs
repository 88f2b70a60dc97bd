//! Seeded statistical checks of the sampling layer.

use statrs::distribution::{ContinuousCDF, Normal};
use wstate_core::detection::W1_BLOCK;
use wstate_core::experiment::{
    rng_for, run_full_pipeline, sample_counts, NoiseModel, PipelineConfig,
};
use wstate_core::network::{Geometry, Wavevectors};
use wstate_core::tomography::{tau_forward, tau_from_counts, PHASE_SETTINGS};

#[test]
fn population_frequencies_converge_at_multinomial_rate() {
    let probs = run_full_pipeline(&PipelineConfig::default()).unwrap().populations.probabilities;
    let n = 10_000u64;
    let p = 1.0 / 3.0;
    let sd = (p * (1.0 - p) / n as f64).sqrt();
    let mut z: Vec<f64> = (0..100)
        .map(|seed| {
            let c = sample_counts(&probs, n, &NoiseModel::none(), &mut rng_for(seed, 0)).unwrap();
            assert_eq!(W1_BLOCK.iter().map(|&i| c[i]).sum::<u64>(), n);
            (c[W1_BLOCK[0]] as f64 / n as f64 - p) / sd
        })
        .collect();
    z.sort_by(f64::total_cmp);
    let normal = Normal::standard();
    let m = z.len() as f64;
    let d = z
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = normal.cdf(x);
            (f - i as f64 / m).abs().max((f - (i + 1) as f64 / m).abs())
        })
        .fold(0.0, f64::max);
    // Kolmogorov-Smirnov critical value at the 5% level for 100 samples.
    assert!(d < 1.36 / m.sqrt(), "D = {d}");
}

#[test]
fn sampled_tau_within_three_sigma() {
    let out = run_full_pipeline(&PipelineConfig::default()).unwrap();
    let block = out.model.reduced[0].elements().view((3, 3), (4, 4)).into_owned();
    let mut g = Geometry::zero(Wavevectors::default());
    g.l_m = 0.3e-6;
    g.l_b = 0.1e-6;
    let (mut checks, mut inside) = (0u32, 0u32);
    for (si, &(r, b)) in PHASE_SETTINGS.iter().enumerate() {
        let analytic = tau_forward(&block, &g.with_phases(r, b)).unwrap();
        for seed in 0..100 {
            let c = sample_counts(&analytic.tau, 10_000, &NoiseModel::none(), &mut rng_for(seed, si as u64)).unwrap();
            let tau = tau_from_counts(&[c[0], c[1], c[2], c[3]]).unwrap();
            // Entries that vanish identically have no fluctuations to test.
            for i in (0..4).filter(|&i| analytic.tau[i] > 1e-12) {
                checks += 1;
                inside += ((tau.tau[i] - analytic.tau[i]).abs() <= 3.0 * tau.sigma[i]) as u32;
            }
        }
    }
    assert!(checks >= 1200, "{checks}");
    assert!(inside as f64 >= 0.99 * checks as f64, "{inside}/{checks}");
}

#[test]
fn sampled_ideal_fidelity_mostly_above_099() {
    let mut above = 0;
    for seed in 0..50 {
        let cfg = PipelineConfig {
            shots: Some(10_000),
            seed,
            ..PipelineConfig::default()
        };
        let f = run_full_pipeline(&cfg).unwrap().reconstruction.fidelity.value;
        above += (f >= 0.99) as u32;
    }
    assert!(above >= 48, "{above}/50");
}

#[test]
fn noisy_fidelity_brackets_reference_value() {
    for seed in 0..10 {
        let cfg = PipelineConfig {
            shots: Some(10_000),
            seed,
            noise: NoiseModel::car(30.0).with_jitter(0.1),
            ..PipelineConfig::default()
        };
        let f = run_full_pipeline(&cfg).unwrap().reconstruction.fidelity.value;
        assert!((0.85..=0.97).contains(&f), "seed {seed}: {f}");
    }
}

#[test]
fn car_counts_ratio() {
    let probs = run_full_pipeline(&PipelineConfig::default()).unwrap().populations.probabilities;
    let c = sample_counts(&probs, 1_000_000, &NoiseModel::car(30.0), &mut rng_for(8, 0)).unwrap();
    let dominant = W1_BLOCK.iter().map(|&i| c[i] as f64).sum::<f64>() / 3.0;
    let acc: Vec<f64> = (0..8).filter(|i| !W1_BLOCK.contains(i)).map(|i| c[i] as f64).collect();
    let ratio = dominant / (acc.iter().sum::<f64>() / acc.len() as f64);
    assert!((ratio - 30.0).abs() / 30.0 < 0.1, "{ratio}");
}
