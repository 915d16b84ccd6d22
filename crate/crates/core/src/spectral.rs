//! Welch power spectral density estimation and frequency-domain features:
//! band power, relative power, peak frequency, spectral entropy.
//!
//! The PSD is one-sided in µV²/Hz: per-segment mean removal, taper,
//! periodogram, average across segments, window power normalization
//! (`1 / (fs · Σw²)`), interior bins doubled. The integral `Σ density · df`
//! of a white-noise epoch therefore approximates its time-domain variance.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::dataio::Epoch;
use crate::error::{Error, Result};

/// One-sided power spectral density on a uniform frequency grid.
#[derive(Debug, Clone)]
pub struct Psd {
    freqs: Vec<f64>,
    density: Vec<f64>,
    df: f64,
}

impl Psd {
    /// Builds a PSD from an explicit grid, validating uniform ascending
    /// frequencies and non-negative density.
    pub fn new(freqs: Vec<f64>, density: Vec<f64>) -> Result<Self> {
        if freqs.len() != density.len() {
            return Err(Error::Input(format!(
                "freqs ({}) and density ({}) lengths differ",
                freqs.len(),
                density.len()
            )));
        }
        if freqs.len() < 2 {
            return Err(Error::Input("PSD needs at least 2 bins".into()));
        }
        let df = freqs[1] - freqs[0];
        if !(df > 0.0) {
            return Err(Error::Input("frequency grid must be ascending".into()));
        }
        for w in freqs.windows(2) {
            if ((w[1] - w[0]) - df).abs() > 1e-9 * df.max(1.0) {
                return Err(Error::Input("frequency grid must be uniform".into()));
            }
        }
        if density.iter().any(|&d| !(d >= 0.0)) {
            return Err(Error::Input("density must be non-negative".into()));
        }
        Ok(Self { freqs, density, df })
    }

    pub fn freqs(&self) -> &[f64] {
        &self.freqs
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    /// Bin width in Hz.
    pub fn df(&self) -> f64 {
        self.df
    }

    /// Total power `Σ density · df` in µV².
    pub fn total_power(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.df
    }

    /// Writes the `freq_hz,density` CSV dump used for plot reproduction.
    pub fn write_csv(&self, w: &mut impl std::io::Write) -> Result<()> {
        writeln!(w, "freq_hz,density")?;
        for (f, d) in self.freqs.iter().zip(&self.density) {
            writeln!(w, "{f},{d}")?;
        }
        Ok(())
    }

    fn band_bins(&self, band: &BandDef) -> std::ops::Range<usize> {
        // Half-open [lo, hi): first bin with f >= lo, first bin with f >= hi.
        let start = self.freqs.partition_point(|&f| f < band.lo_hz);
        let end = self.freqs.partition_point(|&f| f < band.hi_hz);
        start..end
    }
}

/// A named half-open frequency band `[lo, hi)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandDef {
    pub name: String,
    pub lo_hz: f64,
    pub hi_hz: f64,
}

impl BandDef {
    pub fn new(name: impl Into<String>, lo_hz: f64, hi_hz: f64) -> Result<Self> {
        let name = name.into();
        if !(lo_hz >= 0.0 && lo_hz < hi_hz) {
            return Err(Error::Config(format!(
                "band `{name}`: need 0 <= lo < hi, got [{lo_hz}, {hi_hz})"
            )));
        }
        Ok(Self { name, lo_hz, hi_hz })
    }

    pub fn delta() -> Self {
        Self::new("delta", 0.5, 4.0).unwrap()
    }

    pub fn theta() -> Self {
        Self::new("theta", 4.0, 8.0).unwrap()
    }

    pub fn alpha() -> Self {
        Self::new("alpha", 8.0, 12.0).unwrap()
    }

    pub fn beta() -> Self {
        Self::new("beta", 12.0, 30.0).unwrap()
    }

    pub fn gamma() -> Self {
        Self::new("gamma", 30.0, 100.0).unwrap()
    }

    /// The five canonical EEG bands, delta through gamma.
    pub fn canonical() -> [Self; 5] {
        [
            Self::delta(),
            Self::theta(),
            Self::alpha(),
            Self::beta(),
            Self::gamma(),
        ]
    }

    /// Normalization range for relative power: the canonical band extremes.
    pub fn total_range() -> Self {
        Self::new("total", 0.5, 100.0).unwrap()
    }
}

/// Segment taper for Welch averaging.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowKind {
    Hann,
    Rectangular,
}

impl WindowKind {
    fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            // Periodic Hann, the spectral-analysis variant.
            WindowKind::Hann => (0..n)
                .map(|i| {
                    let x = std::f64::consts::PI * i as f64 / n as f64;
                    let s = x.sin();
                    s * s
                })
                .collect(),
            WindowKind::Rectangular => vec![1.0; n],
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            WindowKind::Hann => "hann",
            WindowKind::Rectangular => "rectangular",
        }
    }
}

/// Welch estimator configuration.
///
/// Defaults: 1000-sample (2 s at 500 Hz) segments, 50% overlap, Hann taper,
/// giving df = 0.5 Hz and 9 averaged segments per 10 s epoch — fine enough to
/// resolve the 0.5 Hz delta edge.
#[derive(Debug, Clone, Copy)]
pub struct WelchConfig {
    pub segment_len: usize,
    /// Overlap fraction in [0, 1).
    pub overlap: f64,
    pub window: WindowKind,
}

impl Default for WelchConfig {
    fn default() -> Self {
        Self {
            segment_len: 1000,
            overlap: 0.5,
            window: WindowKind::Hann,
        }
    }
}

/// Estimates the one-sided PSD of an epoch by Welch's method.
pub fn welch_psd(epoch: &Epoch, config: &WelchConfig) -> Result<Psd> {
    welch_psd_samples(epoch.samples(), crate::dataio::DEFAULT_FS_HZ, config)
}

/// [`welch_psd`] on a raw sample slice with an explicit sampling rate.
pub fn welch_psd_samples(samples: &[f64], fs_hz: f64, config: &WelchConfig) -> Result<Psd> {
    let seg = config.segment_len;
    if seg < 2 {
        return Err(Error::Config(format!(
            "segment_len must be at least 2, got {seg}"
        )));
    }
    if seg > samples.len() {
        return Err(Error::Config(format!(
            "segment_len {seg} exceeds epoch length {}",
            samples.len()
        )));
    }
    if !(0.0..1.0).contains(&config.overlap) {
        return Err(Error::Config(format!(
            "overlap must be in [0, 1), got {}",
            config.overlap
        )));
    }
    if !(fs_hz > 0.0) {
        return Err(Error::Config(format!("fs must be positive, got {fs_hz}")));
    }

    let hop = (seg as f64 * (1.0 - config.overlap)).round().max(1.0) as usize;
    let n_segments = (samples.len() - seg) / hop + 1;
    let window = config.window.coefficients(seg);
    let window_power: f64 = window.iter().map(|w| w * w).sum();

    let n_bins = seg / 2 + 1;
    let mut accum = vec![0.0; n_bins];
    let fft = FftPlanner::<f64>::new().plan_fft_forward(seg);
    let mut buf: Vec<Complex<f64>> = vec![Complex::default(); seg];

    for s in 0..n_segments {
        let chunk = &samples[s * hop..s * hop + seg];
        let mean = chunk.iter().sum::<f64>() / seg as f64;
        for (b, (x, w)) in buf.iter_mut().zip(chunk.iter().zip(&window)) {
            *b = Complex::new((x - mean) * w, 0.0);
        }
        fft.process(&mut buf);
        for (a, b) in accum.iter_mut().zip(buf.iter()) {
            *a += b.norm_sqr();
        }
    }

    let scale = 1.0 / (fs_hz * window_power * n_segments as f64);
    let df = fs_hz / seg as f64;
    let nyquist_bin = if seg % 2 == 0 { Some(n_bins - 1) } else { None };
    let density: Vec<f64> = accum
        .iter()
        .enumerate()
        .map(|(k, &a)| {
            let one_sided = if k == 0 || Some(k) == nyquist_bin {
                1.0
            } else {
                2.0
            };
            a * scale * one_sided
        })
        .collect();
    let freqs: Vec<f64> = (0..n_bins).map(|k| k as f64 * df).collect();
    Psd::new(freqs, density)
}

/// Absolute band power: `Σ density · df` over bins with `lo <= f < hi`.
pub fn band_power(psd: &Psd, band: &BandDef) -> Result<f64> {
    let bins = psd.band_bins(band);
    if bins.is_empty() {
        return Err(Error::BandResolution {
            band: band.name.clone(),
            detail: format!(
                "[{}, {}) Hz contains no grid points at df = {} Hz",
                band.lo_hz,
                band.hi_hz,
                psd.df()
            ),
        });
    }
    Ok(psd.density[bins].iter().sum::<f64>() * psd.df)
}

/// Band power normalized by the power in `total` (0 when total power is 0).
pub fn relative_power(psd: &Psd, band: &BandDef, total: &BandDef) -> Result<f64> {
    let band_pow = band_power(psd, band)?;
    let total_pow = band_power(psd, total)?;
    if total_pow <= 0.0 {
        return Ok(0.0);
    }
    Ok(band_pow / total_pow)
}

/// Peak frequency of a band; `degenerate` marks an all-zero band, whose peak
/// is reported at the band's low edge by convention.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakFrequency {
    pub freq_hz: f64,
    pub degenerate: bool,
}

/// Frequency of the maximum density within a band, ties toward the lowest
/// frequency.
pub fn peak_frequency(psd: &Psd, band: &BandDef) -> Result<PeakFrequency> {
    let bins = psd.band_bins(band);
    if bins.is_empty() {
        return Err(Error::BandResolution {
            band: band.name.clone(),
            detail: "no bins in band".into(),
        });
    }
    let mut best_k = bins.start;
    let mut best_d = psd.density[bins.start];
    for k in bins.clone() {
        if psd.density[k] > best_d {
            best_d = psd.density[k];
            best_k = k;
        }
    }
    if best_d <= 0.0 {
        return Ok(PeakFrequency {
            freq_hz: band.lo_hz,
            degenerate: true,
        });
    }
    Ok(PeakFrequency {
        freq_hz: psd.freqs[best_k],
        degenerate: false,
    })
}

/// Normalized Shannon entropy of the density over a range: 0 for power
/// concentrated in one bin, 1 for an exactly flat spectrum, 0 by convention
/// when the range holds no power.
pub fn spectral_entropy(psd: &Psd, range: &BandDef) -> Result<f64> {
    let bins = psd.band_bins(range);
    if bins.is_empty() {
        return Err(Error::BandResolution {
            band: range.name.clone(),
            detail: "no bins in range".into(),
        });
    }
    let m = bins.len();
    if m == 1 {
        return Ok(0.0);
    }
    let total: f64 = psd.density[bins.clone()].iter().sum();
    if total <= 0.0 {
        return Ok(0.0);
    }
    let mut entropy = 0.0;
    for &d in &psd.density[bins] {
        if d > 0.0 {
            let p = d / total;
            entropy -= p * p.ln();
        }
    }
    Ok((entropy / (m as f64).ln()).clamp(0.0, 1.0))
}
