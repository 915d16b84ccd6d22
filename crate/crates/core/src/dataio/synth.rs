//! Seeded synthetic EEG generator.
//!
//! Produces labeled epochs whose spectral signatures mirror the three
//! vigilance states: SWS carries a large-amplitude 1–3 Hz oscillation, REM a
//! moderate theta oscillation with burst amplitude modulation, and Wake a
//! low-amplitude mix of 15–40 Hz components. All classes ride on Gaussian
//! noise. Output is deterministic per seed and pre-quantized to the CSV
//! amplitude precision, so files round-trip bit-exactly.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

use super::csv::quantize_amplitude;
use super::{derive_seed, Dataset, Epoch, VigilanceState};

/// Oscillation parameters for one vigilance state.
#[derive(Debug, Clone, Copy)]
pub struct ClassOscillation {
    /// Center frequency in Hz.
    pub center_hz: f64,
    /// Oscillation amplitude in µV.
    pub amplitude_uv: f64,
    /// Fraction of each 1 s cycle the oscillation is at full amplitude
    /// (1.0 = continuous; below 1.0 the off-phase is attenuated to 20%).
    pub burst_duty: f64,
}

/// Configuration of the synthetic generator.
#[derive(Debug, Clone, Copy)]
pub struct SynthConfig {
    pub n_per_class: usize,
    pub fs_hz: f64,
    pub epoch_seconds: f64,
    /// Standard deviation of the additive Gaussian noise, in µV.
    pub noise_sigma_uv: f64,
    pub wake: ClassOscillation,
    pub sws: ClassOscillation,
    pub rem: ClassOscillation,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_per_class: 200,
            fs_hz: super::DEFAULT_FS_HZ,
            epoch_seconds: super::DEFAULT_EPOCH_SECONDS,
            noise_sigma_uv: 5.0,
            wake: ClassOscillation {
                center_hz: 25.0,
                amplitude_uv: 15.0,
                burst_duty: 1.0,
            },
            sws: ClassOscillation {
                center_hz: 2.0,
                amplitude_uv: 100.0,
                burst_duty: 1.0,
            },
            rem: ClassOscillation {
                center_hz: 7.0,
                amplitude_uv: 40.0,
                burst_duty: 0.5,
            },
        }
    }
}

impl SynthConfig {
    fn class(&self, state: VigilanceState) -> ClassOscillation {
        match state {
            VigilanceState::Wake => self.wake,
            VigilanceState::Sws => self.sws,
            VigilanceState::Rem => self.rem,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_per_class == 0 {
            return Err(Error::Config("n_per_class must be positive".into()));
        }
        if !(self.fs_hz > 0.0) || !(self.epoch_seconds > 0.0) {
            return Err(Error::Config(
                "fs and epoch_seconds must be positive".into(),
            ));
        }
        if !(self.noise_sigma_uv >= 0.0) {
            return Err(Error::Config("noise_sigma must be non-negative".into()));
        }
        let nyquist = self.fs_hz / 2.0;
        for (name, osc) in [
            ("wake", self.wake),
            ("sws", self.sws),
            ("rem", self.rem),
        ] {
            // 1.6× covers the upper end of the wake component draw.
            if !(osc.center_hz > 0.0) || osc.center_hz * 1.6 >= nyquist {
                return Err(Error::Config(format!(
                    "{name} center frequency {} Hz out of range for fs {} Hz",
                    osc.center_hz, self.fs_hz
                )));
            }
            if !(osc.amplitude_uv >= 0.0) {
                return Err(Error::Config(format!("{name} amplitude must be >= 0")));
            }
            if !(osc.burst_duty > 0.0 && osc.burst_duty <= 1.0) {
                return Err(Error::Config(format!(
                    "{name} burst duty must be in (0, 1], got {}",
                    osc.burst_duty
                )));
            }
        }
        Ok(())
    }
}

/// Generates `n_per_class` labeled epochs per vigilance state.
///
/// Epochs are ordered class-major (all Wake, then SWS, then REM). Each epoch
/// draws its phase and exact component frequencies from a PRNG stream derived
/// from `(seed, class, epoch_index)`, so datasets are bit-identical per seed.
pub fn synth_dataset(config: &SynthConfig, seed: u64) -> Result<Dataset> {
    config.validate()?;
    let n_samples = (config.fs_hz * config.epoch_seconds).round() as usize;
    let mut epochs = Vec::with_capacity(3 * config.n_per_class);
    for state in VigilanceState::ALL {
        for k in 0..config.n_per_class {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
                seed,
                state.code() as u64 + 1,
                k as u64,
            ));
            let samples = synth_epoch(config, state, n_samples, &mut rng);
            epochs.push(Epoch::new(epochs.len(), samples, Some(state))?);
        }
    }
    Dataset::new(
        epochs,
        format!("synthetic seed={seed} n_per_class={}", config.n_per_class),
    )
}

fn synth_epoch(
    config: &SynthConfig,
    state: VigilanceState,
    n_samples: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    let osc = config.class(state);
    let two_pi = std::f64::consts::TAU;

    // Component frequencies and phases. SWS wanders within ±1 Hz of its
    // center, REM stays on its theta center, Wake mixes three components
    // spread over [0.6, 1.6]× the center (15–40 Hz at defaults).
    let components: Vec<(f64, f64, f64)> = match state {
        VigilanceState::Sws => {
            let f = rng.random_range((osc.center_hz - 1.0).max(0.5)..osc.center_hz + 1.0);
            vec![(f, osc.amplitude_uv, rng.random_range(0.0..two_pi))]
        }
        VigilanceState::Rem => vec![(
            osc.center_hz,
            osc.amplitude_uv,
            rng.random_range(0.0..two_pi),
        )],
        VigilanceState::Wake => (0..3)
            .map(|_| {
                (
                    rng.random_range(osc.center_hz * 0.6..osc.center_hz * 1.6),
                    osc.amplitude_uv / 3.0,
                    rng.random_range(0.0..two_pi),
                )
            })
            .collect(),
    };
    let burst_phase = rng.random_range(0.0..1.0);
    let noise = Normal::new(0.0, config.noise_sigma_uv.max(f64::MIN_POSITIVE)).unwrap();

    (0..n_samples)
        .map(|n| {
            let t = n as f64 / config.fs_hz;
            let envelope = if osc.burst_duty < 1.0 {
                // 1 s burst cycle: full amplitude for `duty` of it, 20% after.
                if (t + burst_phase).fract() < osc.burst_duty {
                    1.0
                } else {
                    0.2
                }
            } else {
                1.0
            };
            let tone: f64 = components
                .iter()
                .map(|(f, a, phi)| a * (two_pi * f * t + phi).sin())
                .sum();
            let x = envelope * tone
                + if config.noise_sigma_uv > 0.0 {
                    noise.sample(rng)
                } else {
                    0.0
                };
            quantize_amplitude(x)
        })
        .collect()
}

/// Parses the flat key-value synthetic-config format.
///
/// Lines are `key = value`; `#` starts a comment; unknown keys are rejected.
/// Keys (units in parentheses): `n_per_class`, `fs` (Hz), `epoch_seconds` (s),
/// `noise_sigma` (µV), and per class `{wake,sws,rem}_center_hz` (Hz),
/// `{wake,sws,rem}_amplitude_uv` (µV), `{wake,sws,rem}_duty` (fraction).
pub fn parse_synth_config(text: &str) -> Result<SynthConfig> {
    let mut config = SynthConfig::default();
    for (i, raw_line) in text.lines().enumerate() {
        let line = match raw_line.find('#') {
            Some(pos) => &raw_line[..pos],
            None => raw_line,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Format(format!("config line {}: expected `key = value`", i + 1))
        })?;
        let key = key.trim();
        let value = value.trim();
        let parse_f64 = || -> Result<f64> {
            value.parse().map_err(|_| {
                Error::Parse(format!(
                    "config line {}: `{value}` is not a number",
                    i + 1
                ))
            })
        };
        match key {
            "n_per_class" => {
                config.n_per_class = value.parse().map_err(|_| {
                    Error::Parse(format!("config line {}: `{value}` is not a count", i + 1))
                })?
            }
            "fs" => config.fs_hz = parse_f64()?,
            "epoch_seconds" => config.epoch_seconds = parse_f64()?,
            "noise_sigma" => config.noise_sigma_uv = parse_f64()?,
            "wake_center_hz" => config.wake.center_hz = parse_f64()?,
            "wake_amplitude_uv" => config.wake.amplitude_uv = parse_f64()?,
            "wake_duty" => config.wake.burst_duty = parse_f64()?,
            "sws_center_hz" => config.sws.center_hz = parse_f64()?,
            "sws_amplitude_uv" => config.sws.amplitude_uv = parse_f64()?,
            "sws_duty" => config.sws.burst_duty = parse_f64()?,
            "rem_center_hz" => config.rem.center_hz = parse_f64()?,
            "rem_amplitude_uv" => config.rem.amplitude_uv = parse_f64()?,
            "rem_duty" => config.rem.burst_duty = parse_f64()?,
            other => {
                return Err(Error::Config(format!(
                    "config line {}: unknown key `{other}`",
                    i + 1
                )))
            }
        }
    }
    config.validate()?;
    Ok(config)
}
