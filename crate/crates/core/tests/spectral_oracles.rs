//! Frequency-domain oracle tests: Welch estimates checked against a single
//! full-length DFT periodogram and against time-domain statistics.

mod common;

use common::{
    dft_periodogram, sample_variance, sine_epoch, uniform_noise_epoch, EPOCH_LEN, FS,
};
use vigil_core::dataio::{synth_dataset, SynthConfig, VigilanceState};
use vigil_core::features::hjorth;
use vigil_core::spectral::{
    band_power, peak_frequency, relative_power, spectral_entropy, welch_psd, BandDef,
    WelchConfig,
};

fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in xs.iter().enumerate() {
        if v > xs[best] {
            best = i;
        }
    }
    best
}

#[test]
fn sine_peak_matches_dft_oracle() {
    for freq in [6.0, 10.0, 23.5] {
        let epoch = sine_epoch(freq, 1.0, EPOCH_LEN);
        let psd = welch_psd(&epoch, &WelchConfig::default()).unwrap();
        let (oracle_freqs, oracle_density) = dft_periodogram(epoch.samples(), FS);
        let oracle_peak = oracle_freqs[argmax(&oracle_density)];

        let all = BandDef::new("all", 0.1, FS / 2.0).unwrap();
        let peak = peak_frequency(&psd, &all).unwrap();
        assert!(
            (peak.freq_hz - oracle_peak).abs() <= psd.df() + 1e-9,
            "freq {freq}: welch peak {} vs oracle {oracle_peak}",
            peak.freq_hz
        );
        // Total power agrees with the oracle's integral and with A²/2.
        let oracle_total: f64 = oracle_density.iter().sum::<f64>() * (FS / EPOCH_LEN as f64);
        assert!((psd.total_power() - oracle_total).abs() / oracle_total < 0.03);
        assert!((psd.total_power() - 0.5).abs() / 0.5 < 0.03);
    }
}

#[test]
fn theta_sine_peak_via_band_query() {
    let epoch = sine_epoch(6.0, 1.0, EPOCH_LEN);
    let psd = welch_psd(&epoch, &WelchConfig::default()).unwrap();
    let peak = peak_frequency(&psd, &BandDef::theta()).unwrap();
    let (oracle_freqs, oracle_density) = dft_periodogram(epoch.samples(), FS);
    let oracle_peak = oracle_freqs[argmax(&oracle_density)];
    assert!((peak.freq_hz - oracle_peak).abs() <= psd.df());
}

#[test]
fn parseval_holds_on_white_noise() {
    for seed in 0..20u64 {
        let epoch = uniform_noise_epoch(seed, EPOCH_LEN);
        let psd = welch_psd(&epoch, &WelchConfig::default()).unwrap();
        let variance = sample_variance(epoch.samples());
        let dev = (psd.total_power() - variance).abs() / variance;
        assert!(dev < 0.02, "seed {seed}: deviation {dev}");
    }
}

#[test]
fn delta_sine_concentrates_in_band() {
    let epoch = sine_epoch(2.0, 1.0, EPOCH_LEN);
    let psd = welch_psd(&epoch, &WelchConfig::default()).unwrap();
    let delta = band_power(&psd, &BandDef::delta()).unwrap();
    let total = band_power(&psd, &BandDef::total_range()).unwrap();
    assert!(delta / total >= 0.95, "delta fraction {}", delta / total);
    // Against the full-spectrum sum as the independent route.
    assert!(delta / psd.total_power() >= 0.95);
}

#[test]
fn white_noise_entropy_is_high() {
    for seed in 0..10u64 {
        let epoch = uniform_noise_epoch(seed, EPOCH_LEN);
        let psd = welch_psd(&epoch, &WelchConfig::default()).unwrap();
        let h = spectral_entropy(&psd, &BandDef::total_range()).unwrap();
        assert!(h > 0.9, "seed {seed}: entropy {h}");
    }
}

#[test]
fn white_noise_mobility_is_sqrt_two() {
    // var(Δx) = 2 var(x) for i.i.d. noise; averaged over 100 seeds.
    let mut mean_mobility = 0.0;
    for seed in 0..100u64 {
        let epoch = uniform_noise_epoch(seed, EPOCH_LEN);
        mean_mobility += hjorth(&epoch).unwrap().mobility;
    }
    mean_mobility /= 100.0;
    assert!(
        (mean_mobility - 2.0_f64.sqrt()).abs() / 2.0_f64.sqrt() < 0.01,
        "mean mobility {mean_mobility}"
    );
}

#[test]
fn scaling_invariance_of_spectral_features() {
    let epoch = uniform_noise_epoch(3, EPOCH_LEN);
    let config = WelchConfig::default();
    let psd = welch_psd(&epoch, &config).unwrap();
    let total = BandDef::total_range();
    let base_rel = relative_power(&psd, &BandDef::delta(), &total).unwrap();
    let base_peak = peak_frequency(&psd, &BandDef::beta()).unwrap();
    let base_entropy = spectral_entropy(&psd, &total).unwrap();
    let base_power = band_power(&psd, &BandDef::alpha()).unwrap();

    for c in [0.001, 0.37, 8.0, 1024.0, 77777.5] {
        let scaled = vigil_core::dataio::Epoch::new(
            0,
            epoch.samples().iter().map(|x| c * x).collect(),
            None,
        )
        .unwrap();
        let psd_c = welch_psd(&scaled, &config).unwrap();
        let rel = relative_power(&psd_c, &BandDef::delta(), &total).unwrap();
        let peak = peak_frequency(&psd_c, &BandDef::beta()).unwrap();
        let entropy = spectral_entropy(&psd_c, &total).unwrap();
        let power = band_power(&psd_c, &BandDef::alpha()).unwrap();

        assert!((rel - base_rel).abs() < 1e-12, "c={c}: rel {rel} vs {base_rel}");
        assert!(
            (peak.freq_hz - base_peak.freq_hz).abs() < 1e-12,
            "c={c}: peak moved"
        );
        assert!((entropy - base_entropy).abs() < 1e-12, "c={c}");
        let expected = c * c * base_power;
        assert!(
            (power - expected).abs() / expected < 1e-12,
            "c={c}: band power {power} vs {expected}"
        );
    }
}

#[test]
fn canonical_band_fractions_sum_below_one() {
    for seed in 0..20u64 {
        let epoch = uniform_noise_epoch(seed, EPOCH_LEN);
        let psd = welch_psd(&epoch, &WelchConfig::default()).unwrap();
        let total = BandDef::total_range();
        let sum: f64 = BandDef::canonical()
            .iter()
            .map(|b| relative_power(&psd, b, &total).unwrap())
            .sum();
        assert!(sum <= 1.0 + 1e-9, "seed {seed}: sum {sum}");
    }
}

#[test]
fn synthetic_sws_has_more_delta_than_wake() {
    let config = SynthConfig {
        n_per_class: 20,
        ..SynthConfig::default()
    };
    let ds = synth_dataset(&config, 99).unwrap();
    let welch = WelchConfig::default();
    let total = BandDef::total_range();
    let mut sums = [0.0f64; 3];
    let mut counts = [0usize; 3];
    for epoch in ds.epochs() {
        let psd = welch_psd(epoch, &welch).unwrap();
        let rel = relative_power(&psd, &BandDef::delta(), &total).unwrap();
        let c = epoch.label().unwrap().code();
        sums[c] += rel;
        counts[c] += 1;
    }
    let mean = |c: usize| sums[c] / counts[c] as f64;
    let (wake, sws) = (mean(VigilanceState::Wake.code()), mean(VigilanceState::Sws.code()));
    assert!(sws > wake, "sws delta {sws} <= wake delta {wake}");
    // And each synthetic SWS epoch individually is delta-dominated.
    assert!(sws > 0.5, "mean SWS delta fraction {sws}");
}
