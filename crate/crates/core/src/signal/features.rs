//! Amplitude and spectral characteristics of a single segment.
//!
//! All spectra use a rectangular window. Mean frequency and bandpower work on
//! the one-sided periodogram of the unpadded segment; the dominant frequency
//! is read from a zero-padded DFT for finer bin spacing.

use std::fmt;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A closed frequency band in Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub lo: f64,
    pub hi: f64,
}

impl Band {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Band { lo, hi }
    }
}

impl fmt::Display for Band {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}Hz", self.lo, self.hi)
    }
}

/// Search band for the dominant frequency.
pub const SPINDLE_BAND: Band = Band::new(6.0, 14.0);

/// The fifteen contiguous 2 Hz bands `[0.5, 2.5], [2.5, 4.5], …, [28.5, 30.5]`.
pub fn standard_bands() -> Vec<Band> {
    (0..15)
        .map(|k| Band::new(0.5 + 2.0 * k as f64, 2.5 + 2.0 * k as f64))
        .collect()
}

/// Bands must be well-formed, sorted and non-overlapping.
pub fn validate_bands(bands: &[Band]) -> Result<()> {
    for b in bands {
        if !(b.lo.is_finite() && b.hi.is_finite() && 0.0 <= b.lo && b.lo < b.hi) {
            return Err(Error::input(format!("invalid band [{}, {}]", b.lo, b.hi)));
        }
    }
    for pair in bands.windows(2) {
        if pair[1].lo < pair[0].hi {
            return Err(Error::input(format!(
                "bands {} and {} overlap or are out of order",
                pair[0], pair[1]
            )));
        }
    }
    Ok(())
}

fn non_empty(segment: &[f64]) -> Result<()> {
    if segment.is_empty() {
        return Err(Error::input("empty segment"));
    }
    Ok(())
}

fn check_rate(sample_rate: f64) -> Result<()> {
    if !(sample_rate.is_finite() && sample_rate > 0.0) {
        return Err(Error::input(format!("sample rate {sample_rate} must be positive")));
    }
    Ok(())
}

/// Mean of `|x[n]|`.
pub fn mean_amplitude(segment: &[f64]) -> Result<f64> {
    non_empty(segment)?;
    Ok(segment.iter().map(|x| x.abs()).sum::<f64>() / segment.len() as f64)
}

/// `max |x[n]|`
pub fn max_amplitude(segment: &[f64]) -> Result<f64> {
    non_empty(segment)?;
    Ok(segment.iter().fold(0.0, |m, x| m.max(x.abs())))
}

fn dft(segment: &[f64], len: usize) -> Vec<Complex<f64>> {
    let mut buf: Vec<Complex<f64>> = segment.iter().map(|&x| Complex::new(x, 0.0)).collect();
    buf.resize(len, Complex::new(0.0, 0.0));
    FftPlanner::new().plan_fft_forward(len).process(&mut buf);
    buf
}

/// One-sided periodogram as per-bin power masses.
///
/// Bin `k` sits at `k·fs/N` and spreads its power uniformly over the cell
/// `[f_k − df/2, f_k + df/2] ∩ [0, fs/2]`. The masses sum to the mean
/// square of the segment.
#[derive(Debug, Clone)]
pub struct Periodogram {
    power: Vec<f64>,
    bin_width: f64,
    nyquist: f64,
}

impl Periodogram {
    pub fn new(segment: &[f64], sample_rate: f64) -> Result<Self> {
        non_empty(segment)?;
        check_rate(sample_rate)?;
        let n = segment.len();
        let spectrum = dft(segment, n);
        let norm = (n * n) as f64;
        let power = (0..=n / 2)
            .map(|k| {
                let p = spectrum[k].norm_sqr() / norm;
                // Interior bins fold in their negative-frequency twin.
                if k == 0 || 2 * k == n {
                    p
                } else {
                    2.0 * p
                }
            })
            .collect();
        Ok(Periodogram {
            power,
            bin_width: sample_rate / n as f64,
            nyquist: sample_rate / 2.0,
        })
    }

    pub fn frequency(&self, k: usize) -> f64 {
        k as f64 * self.bin_width
    }

    pub fn power(&self) -> &[f64] {
        &self.power
    }

    pub fn nyquist(&self) -> f64 {
        self.nyquist
    }

    pub fn total_power(&self) -> f64 {
        self.power.iter().sum()
    }

    fn cell(&self, k: usize) -> (f64, f64) {
        let f = self.frequency(k);
        (
            (f - self.bin_width / 2.0).max(0.0),
            (f + self.bin_width / 2.0).min(self.nyquist),
        )
    }

    /// Power inside `[lo, hi]`, weighting edge bins by the covered fraction
    /// of their cell.
    pub fn band_power(&self, band: Band) -> Result<f64> {
        if !(0.0 <= band.lo && band.lo < band.hi && band.hi <= self.nyquist) {
            return Err(Error::input(format!(
                "band [{}, {}] must satisfy 0 <= lo < hi <= Nyquist ({})",
                band.lo, band.hi, self.nyquist
            )));
        }
        Ok(self
            .power
            .iter()
            .enumerate()
            .map(|(k, &p)| {
                let (a, b) = self.cell(k);
                let overlap = b.min(band.hi) - a.max(band.lo);
                if overlap <= 0.0 || b <= a {
                    0.0
                } else {
                    p * overlap / (b - a)
                }
            })
            .sum())
    }
}

/// Frequency of the largest DFT magnitude inside `band`.
///
/// The segment is zero-padded to the next power of two that is at least
/// four times its length. Equal magnitudes resolve to the lowest frequency.
pub fn dominant_frequency(segment: &[f64], sample_rate: f64, band: Band) -> Result<f64> {
    if segment.len() < 2 {
        return Err(Error::input("dominant frequency needs at least 2 samples"));
    }
    check_rate(sample_rate)?;
    if !(0.0 <= band.lo && band.lo < band.hi) {
        return Err(Error::input(format!("invalid search band [{}, {}]", band.lo, band.hi)));
    }
    if band.hi > sample_rate / 2.0 {
        return Err(Error::input(format!(
            "sample rate {sample_rate} Hz too low: Nyquist is below {} Hz",
            band.hi
        )));
    }
    let len = (4 * segment.len()).next_power_of_two();
    let step = sample_rate / len as f64;
    let first = (band.lo / step).ceil() as usize;
    let last = ((band.hi / step).floor() as usize).min(len / 2);
    if first > last {
        return Err(Error::input(format!("no frequency bin inside {band}")));
    }
    let spectrum = dft(segment, len);
    let mut best = first;
    for k in first + 1..=last {
        if spectrum[k].norm_sqr() > spectrum[best].norm_sqr() {
            best = k;
        }
    }
    Ok(best as f64 * step)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanFrequency {
    pub hz: f64,
    /// Set when the segment carries no power; `hz` is then 0.
    pub zero_power: bool,
}

/// Power-weighted mean frequency over the one-sided periodogram.
pub fn mean_frequency(segment: &[f64], sample_rate: f64) -> Result<MeanFrequency> {
    let pg = Periodogram::new(segment, sample_rate)?;
    let total = pg.total_power();
    if total == 0.0 {
        return Ok(MeanFrequency {
            hz: 0.0,
            zero_power: true,
        });
    }
    let weighted: f64 = pg.power().iter().enumerate().map(|(k, p)| pg.frequency(k) * p).sum();
    Ok(MeanFrequency {
        hz: weighted / total,
        zero_power: false,
    })
}

pub fn bandpower(segment: &[f64], sample_rate: f64, band: Band) -> Result<f64> {
    Periodogram::new(segment, sample_rate)?.band_power(band)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub dominant_band: Band,
    pub bands: Vec<Band>,
    /// Subtract the segment mean before spectral features.
    pub detrend: bool,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            dominant_band: SPINDLE_BAND,
            bands: standard_bands(),
            detrend: false,
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<()> {
        validate_bands(&[self.dominant_band])?;
        validate_bands(&self.bands)
    }

    /// Column names in output order, units in brackets.
    pub fn attribute_names(&self) -> Vec<String> {
        let mut names: Vec<String> = [
            "mean_amplitude[uV]",
            "max_amplitude[uV]",
            "mean_frequency[Hz]",
            "dominant_frequency[Hz]",
            "amp_freq_ratio[uV/Hz]",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        names.extend(self.bands.iter().map(|b| format!("bandpower_{}-{}[uV^2]", b.lo, b.hi)));
        names
    }
}

/// Per-segment characteristics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub mean_amplitude: f64,
    pub max_amplitude: f64,
    pub mean_frequency: f64,
    pub dominant_frequency: f64,
    pub amp_freq_ratio: f64,
    pub bandpowers: Vec<f64>,
}

impl FeatureRow {
    /// Values in column order: the five scalar features, then bandpowers
    /// from low to high.
    pub fn values(&self) -> Vec<f64> {
        let mut v = vec![
            self.mean_amplitude,
            self.max_amplitude,
            self.mean_frequency,
            self.dominant_frequency,
            self.amp_freq_ratio,
        ];
        v.extend_from_slice(&self.bandpowers);
        v
    }
}

pub fn feature_row(segment: &[f64], sample_rate: f64, config: &FeatureConfig) -> Result<FeatureRow> {
    config.validate()?;
    let mean_amplitude = mean_amplitude(segment)?;
    let max_amplitude = max_amplitude(segment)?;

    let detrended;
    let spectral: &[f64] = if config.detrend {
        let mean = segment.iter().sum::<f64>() / segment.len() as f64;
        detrended = segment.iter().map(|x| x - mean).collect::<Vec<_>>();
        &detrended
    } else {
        segment
    };

    let dominant_frequency = dominant_frequency(spectral, sample_rate, config.dominant_band)?;
    let mean_frequency = mean_frequency(spectral, sample_rate)?.hz;
    let pg = Periodogram::new(spectral, sample_rate)?;
    let bandpowers = config
        .bands
        .iter()
        .map(|&b| pg.band_power(b))
        .collect::<Result<Vec<_>>>()?;

    Ok(FeatureRow {
        mean_amplitude,
        max_amplitude,
        mean_frequency,
        dominant_frequency,
        amp_freq_ratio: mean_amplitude / dominant_frequency,
        bandpowers,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn sine(freq: f64, amp: f64, fs: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| amp * (2.0 * PI * freq * i as f64 / fs).sin()).collect()
    }

    /// Direct O(N²) DFT magnitudes at frequency `f` (zero-padded grid).
    fn naive_magnitude(x: &[f64], fs: f64, f: f64) -> f64 {
        let (mut re, mut im) = (0.0, 0.0);
        for (i, &v) in x.iter().enumerate() {
            let phase = -2.0 * PI * f * i as f64 / fs;
            re += v * phase.cos();
            im += v * phase.sin();
        }
        (re * re + im * im).sqrt()
    }

    #[test]
    fn amplitude_examples() {
        assert_eq!(mean_amplitude(&[5.0; 10]).unwrap(), 5.0);
        assert_eq!(mean_amplitude(&[3.0, -3.0, 3.0, -3.0]).unwrap(), 3.0);
        let s = sine(10.0, 20.0, 200.0, 200);
        let expected = 2.0 * 20.0 / PI;
        assert!((mean_amplitude(&s).unwrap() - expected).abs() / expected < 0.01);
        assert!(mean_amplitude(&[]).is_err());
    }

    #[test]
    fn max_amplitude_examples() {
        let s = sine(10.0, 20.0, 200.0, 200);
        assert_eq!(max_amplitude(&s).unwrap(), 20.0);
        assert_eq!(max_amplitude(&[-7.0; 4]).unwrap(), 7.0);
        assert_eq!(max_amplitude(&[0.0; 4]).unwrap(), 0.0);
        assert!(max_amplitude(&[]).is_err());
    }

    #[test]
    fn dominant_frequency_examples() {
        let fs = 200.0;
        let s = sine(10.0, 20.0, fs, 200);
        let bin = fs / 1024.0;
        let f = dominant_frequency(&s, fs, SPINDLE_BAND).unwrap();
        assert!((f - 10.0).abs() <= bin, "{f}");

        let mixed: Vec<f64> = s.iter().zip(sine(25.0, 50.0, fs, 200)).map(|(a, b)| a + b).collect();
        let f = dominant_frequency(&mixed, fs, SPINDLE_BAND).unwrap();
        assert!((f - 10.0).abs() <= bin, "{f}");

        let lowest = (6.0 / bin).ceil() * bin;
        assert_eq!(dominant_frequency(&[0.0; 200], fs, SPINDLE_BAND).unwrap(), lowest);
        assert!(dominant_frequency(&[1.0], fs, SPINDLE_BAND).is_err());
        assert!(dominant_frequency(&s, 20.0, SPINDLE_BAND).is_err());
    }

    #[test]
    fn dominant_frequency_matches_naive_dft_argmax() {
        let fs = 200.0;
        let x: Vec<f64> = (0..150)
            .map(|i| {
                let t = i as f64 / fs;
                12.0 * (2.0 * PI * 11.3 * t).sin() + 9.0 * (2.0 * PI * 7.1 * t + 0.4).cos()
            })
            .collect();
        let len = 1024.0;
        let (mut best_f, mut best_m) = (0.0, -1.0);
        let mut k = (6.0 * len / fs).ceil();
        while k * fs / len <= 14.0 {
            let m = naive_magnitude(&x, fs, k * fs / len);
            if m > best_m {
                best_m = m;
                best_f = k * fs / len;
            }
            k += 1.0;
        }
        assert_eq!(dominant_frequency(&x, fs, SPINDLE_BAND).unwrap(), best_f);
    }

    #[test]
    fn mean_frequency_examples() {
        let fs = 200.0;
        let f = mean_frequency(&sine(10.0, 20.0, fs, 200), fs).unwrap();
        assert!((f.hz - 10.0).abs() / 10.0 < 0.02);
        let dc = mean_frequency(&[4.0; 64], fs).unwrap();
        assert_eq!(dc.hz, 0.0);
        assert!(!dc.zero_power);
        let two: Vec<f64> = sine(5.0, 10.0, fs, 200)
            .iter()
            .zip(sine(15.0, 10.0, fs, 200))
            .map(|(a, b)| a + b)
            .collect();
        assert!((mean_frequency(&two, fs).unwrap().hz - 10.0).abs() / 10.0 < 0.03);
        let silent = mean_frequency(&[0.0; 16], fs).unwrap();
        assert!(silent.zero_power && silent.hz == 0.0);
    }

    #[test]
    fn bandpower_examples() {
        let fs = 200.0;
        let s = sine(10.0, 20.0, fs, 200);
        let p = bandpower(&s, fs, Band::new(8.5, 10.5)).unwrap();
        assert!((p - 200.0).abs() / 200.0 < 0.05, "{p}");
        let total = Periodogram::new(&s, fs).unwrap().total_power();
        assert!(bandpower(&s, fs, Band::new(20.5, 22.5)).unwrap() < 0.01 * total);
        assert!(bandpower(&s, fs, Band::new(5.0, 5.0)).is_err());
        assert!(bandpower(&s, fs, Band::new(90.0, 101.0)).is_err());
    }

    #[test]
    fn edge_bins_are_split_fractionally() {
        // 10 Hz line with 1 Hz bins: its cell is [9.5, 10.5].
        let fs = 200.0;
        let s = sine(10.0, 20.0, fs, 200);
        let half = bandpower(&s, fs, Band::new(10.0, 12.0)).unwrap();
        assert!((half - 100.0).abs() < 1e-9, "{half}");
    }

    #[test]
    fn parseval_over_partition() {
        let fs = 173.0;
        for n in [1usize, 2, 7, 64, 101] {
            let x: Vec<f64> = (0..n).map(|i| ((i * 37 % 11) as f64 - 4.3) * 1.7).collect();
            let ms = x.iter().map(|v| v * v).sum::<f64>() / n as f64;
            let pg = Periodogram::new(&x, fs).unwrap();
            let ny = pg.nyquist();
            let cuts = [0.0, 0.3, 5.0, 17.25, 40.0, ny];
            let sum: f64 = cuts
                .windows(2)
                .map(|w| pg.band_power(Band::new(w[0], w[1])).unwrap())
                .sum();
            assert!((sum - ms).abs() <= 1e-9 * ms.max(1e-300), "n={n} {sum} vs {ms}");
        }
    }

    #[test]
    fn feature_row_for_sine_and_silence() {
        let fs = 200.0;
        let cfg = FeatureConfig::default();
        let row = feature_row(&sine(10.0, 20.0, fs, 200), fs, &cfg).unwrap();
        assert!((row.mean_amplitude - 12.732).abs() < 0.13);
        assert_eq!(row.max_amplitude, 20.0);
        assert!((row.dominant_frequency - 10.0).abs() <= fs / 1024.0);
        assert_eq!(row.amp_freq_ratio, row.mean_amplitude / row.dominant_frequency);
        assert_eq!(row.bandpowers.len(), 15);
        let peak = row
            .bandpowers
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert_eq!(cfg.bands[peak], Band::new(8.5, 10.5));

        let zero = feature_row(&[0.0; 200], fs, &cfg).unwrap();
        assert_eq!(
            (zero.mean_amplitude, zero.max_amplitude, zero.mean_frequency),
            (0.0, 0.0, 0.0)
        );
        assert!(zero.bandpowers.iter().all(|&p| p == 0.0));
        assert_eq!(zero.dominant_frequency, (6.0f64 * 1024.0 / fs).ceil() * fs / 1024.0);
    }

    #[test]
    fn detrend_removes_dc_from_spectral_features() {
        let fs = 200.0;
        let shifted: Vec<f64> = sine(10.0, 20.0, fs, 200).iter().map(|x| x + 30.0).collect();
        let raw = feature_row(&shifted, fs, &FeatureConfig::default()).unwrap();
        let cfg = FeatureConfig {
            detrend: true,
            ..FeatureConfig::default()
        };
        let det = feature_row(&shifted, fs, &cfg).unwrap();
        assert!(raw.mean_frequency < 5.0);
        assert!((det.mean_frequency - 10.0).abs() < 1e-6);
        assert_eq!(raw.mean_amplitude, det.mean_amplitude);
        // A constant is all DC: after detrending it is silence.
        let flat = feature_row(&[3.0; 100], fs, &cfg).unwrap();
        assert_eq!(flat.dominant_frequency, (6.0f64 * 512.0 / fs).ceil() * fs / 512.0);
    }

    #[test]
    fn band_list_shape() {
        let bands = standard_bands();
        assert_eq!(bands.len(), 15);
        assert_eq!(bands[0], Band::new(0.5, 2.5));
        assert_eq!(bands[14], Band::new(28.5, 30.5));
        assert!(bands.windows(2).all(|w| w[0].hi == w[1].lo && w[1].hi - w[1].lo == 2.0));
        validate_bands(&bands).unwrap();
        assert!(validate_bands(&[Band::new(2.0, 4.0), Band::new(3.0, 5.0)]).is_err());
        assert_eq!(FeatureConfig::default().attribute_names().len(), 20);
    }
}
