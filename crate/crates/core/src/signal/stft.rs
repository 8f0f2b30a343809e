use std::f64::consts::PI;

use ndarray::{Array2, Axis};
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::AudioBuffer;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum WindowKind {
    /// Periodic Hann.
    #[default]
    Hann,
    Rectangular,
}

impl WindowKind {
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            WindowKind::Hann => (0..n)
                .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
                .collect(),
            WindowKind::Rectangular => vec![1.0; n],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StftConfig {
    pub n_fft: usize,
    pub hop: usize,
    pub window: WindowKind,
    /// Reflect-pad `n_fft / 2` samples on both sides so frame `k` is centred
    /// on sample `k * hop`.
    pub center: bool,
}

impl Default for StftConfig {
    fn default() -> Self {
        Self {
            n_fft: 2048,
            hop: 512,
            window: WindowKind::Hann,
            center: true,
        }
    }
}

impl StftConfig {
    pub fn new(n_fft: usize, hop: usize) -> Self {
        Self {
            n_fft,
            hop,
            ..Self::default()
        }
    }

    /// 75% overlap Hann analysis of length `n_fft`.
    pub fn quarter_hop(n_fft: usize) -> Self {
        Self::new(n_fft, n_fft / 4)
    }

    pub fn n_bins(&self) -> usize {
        self.n_fft / 2 + 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_fft < 2 || self.n_fft % 2 != 0 {
            return Err(Error::invalid_config(format!(
                "n_fft must be even and >= 2, got {}",
                self.n_fft
            )));
        }
        if self.hop == 0 || self.n_fft % self.hop != 0 {
            return Err(Error::invalid_config(format!(
                "hop {} must divide n_fft {}",
                self.hop, self.n_fft
            )));
        }
        let w = self.window.coefficients(self.n_fft);
        let sums = overlap_sums(&w, self.hop);
        let (lo, hi) = sums
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), &s| (lo.min(s), hi.max(s)));
        if lo <= 0.0 || (hi - lo) / hi > 1e-9 {
            return Err(Error::invalid_config(format!(
                "{:?} window with n_fft={} hop={} violates constant overlap-add",
                self.window, self.n_fft, self.hop
            )));
        }
        Ok(())
    }

    /// Number of frames produced for a signal of `len` samples.
    pub fn n_frames(&self, len: usize) -> usize {
        if self.center {
            len.div_ceil(self.hop) + 1
        } else {
            len.saturating_sub(self.n_fft).div_ceil(self.hop) + 1
        }
    }
}

/// Sum of squared window over every hop-shifted copy, one value per phase.
fn overlap_sums(w: &[f64], hop: usize) -> Vec<f64> {
    (0..hop)
        .map(|j| w.iter().skip(j).step_by(hop).map(|v| v * v).sum())
        .collect()
}

/// Frames × bins complex STFT together with the configuration that made it.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrogram {
    pub data: Array2<Complex64>,
    pub config: StftConfig,
    pub sample_rate: u32,
    pub original_length: usize,
}

impl ComplexSpectrogram {
    pub fn n_frames(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_bins(&self) -> usize {
        self.data.ncols()
    }

    pub fn bin_hz(&self) -> f64 {
        self.sample_rate as f64 / self.config.n_fft as f64
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            data: Array2::zeros(self.data.raw_dim()),
            ..self.clone()
        }
    }

    pub fn with_data(&self, data: Array2<Complex64>) -> Self {
        Self {
            data,
            config: self.config,
            sample_rate: self.sample_rate,
            original_length: self.original_length,
        }
    }

    /// Element-wise real gain; `gains` must have the spectrogram's shape.
    pub fn apply_mask(&self, gains: &Array2<f64>) -> Result<Self> {
        if gains.dim() != self.data.dim() {
            return Err(Error::invalid_input(format!(
                "mask shape {:?} does not match spectrogram {:?}",
                gains.dim(),
                self.data.dim()
            )));
        }
        let mut data = self.data.clone();
        data.zip_mut_with(gains, |x, &g| *x *= g);
        Ok(self.with_data(data))
    }

    pub fn same_shape(&self, other: &ComplexSpectrogram) -> bool {
        self.data.dim() == other.data.dim()
            && self.config == other.config
            && self.sample_rate == other.sample_rate
    }

    pub fn power(&self) -> Array2<f64> {
        self.data.mapv(|c| c.norm_sqr())
    }
}

/// Mirror index without edge repetition (`dcba|abcd|cba`), valid for any offset.
fn reflect_index(i: isize, len: usize) -> usize {
    if len == 1 {
        return 0;
    }
    let period = 2 * (len as isize - 1);
    let m = i.rem_euclid(period);
    if m < len as isize {
        m as usize
    } else {
        (period - m) as usize
    }
}

/// Windowed FFT frames of `signal` with an arbitrary analysis window.
///
/// With `center`, the signal is reflect-padded by `n/2` on the left; the
/// right side is reflect-padded for `n/2` samples and zero beyond.
pub(crate) fn analyze_frames(
    signal: &[f64],
    window: &[f64],
    hop: usize,
    n_frames: usize,
    center: bool,
) -> Array2<Complex64> {
    let n = window.len();
    let n_bins = n / 2 + 1;
    let len = signal.len();
    let offset = if center { (n / 2) as isize } else { 0 };
    let sample_at = |p: isize| -> f64 {
        let i = p - offset;
        if i >= 0 && (i as usize) < len {
            signal[i as usize]
        } else if center && i >= -(n as isize / 2) && i < (len + n / 2) as isize {
            signal[reflect_index(i, len)]
        } else {
            0.0
        }
    };

    let fft = FftPlanner::new().plan_fft_forward(n);
    let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
    let mut buf = vec![Complex64::default(); n];
    let mut out = Array2::<Complex64>::zeros((n_frames, n_bins));
    for (k, mut row) in out.axis_iter_mut(Axis(0)).enumerate() {
        let start = (k * hop) as isize;
        for (j, b) in buf.iter_mut().enumerate() {
            *b = Complex64::new(sample_at(start + j as isize) * window[j], 0.0);
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        for (dst, src) in row.iter_mut().zip(&buf[..n_bins]) {
            *dst = *src;
        }
    }
    out
}

pub fn stft(audio: &AudioBuffer, config: &StftConfig) -> Result<ComplexSpectrogram> {
    if audio.is_empty() {
        return Err(Error::invalid_input("cannot analyse an empty buffer"));
    }
    config.validate()?;
    let window = config.window.coefficients(config.n_fft);
    let n_frames = config.n_frames(audio.len());
    let data = analyze_frames(audio.samples(), &window, config.hop, n_frames, config.center);
    Ok(ComplexSpectrogram {
        data,
        config: *config,
        sample_rate: audio.sample_rate(),
        original_length: audio.len(),
    })
}

/// Largest output length `istft` can synthesise from `n_frames` frames.
pub fn max_istft_len(config: &StftConfig, n_frames: usize) -> usize {
    if n_frames == 0 {
        return 0;
    }
    let span = (n_frames - 1) * config.hop + config.n_fft;
    if config.center {
        span - config.n_fft / 2
    } else {
        span
    }
}

/// Least-squares inverse STFT: overlap-add of windowed frames divided by the
/// summed squared window (the canonical dual of the analysis window).
pub fn istft(spec: &ComplexSpectrogram, length: usize) -> Result<AudioBuffer> {
    let config = spec.config;
    config.validate()?;
    let n = config.n_fft;
    if spec.n_bins() != config.n_bins() {
        return Err(Error::invalid_input(format!(
            "spectrogram has {} bins, config expects {}",
            spec.n_bins(),
            config.n_bins()
        )));
    }
    let max_len = max_istft_len(&config, spec.n_frames());
    if length > max_len {
        return Err(Error::invalid_input(format!(
            "requested {length} samples but {} frames represent at most {max_len}",
            spec.n_frames()
        )));
    }
    let window = config.window.coefficients(n);
    let total = (spec.n_frames().saturating_sub(1)) * config.hop + n;
    let mut acc = vec![0.0; total];
    let mut norm = vec![0.0; total];

    let ifft = FftPlanner::new().plan_fft_inverse(n);
    let mut scratch = vec![Complex64::default(); ifft.get_inplace_scratch_len()];
    let mut buf = vec![Complex64::default(); n];
    let scale = 1.0 / n as f64;
    for (k, row) in spec.data.axis_iter(Axis(0)).enumerate() {
        buf[0] = Complex64::new(row[0].re, 0.0);
        for f in 1..n / 2 {
            buf[f] = row[f];
            buf[n - f] = row[f].conj();
        }
        buf[n / 2] = Complex64::new(row[n / 2].re, 0.0);
        ifft.process_with_scratch(&mut buf, &mut scratch);
        let start = k * config.hop;
        for j in 0..n {
            acc[start + j] += buf[j].re * scale * window[j];
            norm[start + j] += window[j] * window[j];
        }
    }
    let offset = if config.center { n / 2 } else { 0 };
    let samples = (0..length)
        .map(|i| {
            let w = norm[offset + i];
            if w > 1e-10 {
                acc[offset + i] / w
            } else {
                0.0
            }
        })
        .collect();
    Ok(AudioBuffer::from_trusted(samples, spec.sample_rate))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn noise(len: usize, seed: u64) -> AudioBuffer {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        AudioBuffer::new((0..len).map(|_| rng.random_range(-1.0..1.0)).collect(), 44100).unwrap()
    }

    fn rel_err(a: &[f64], b: &[f64]) -> f64 {
        let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
        let den: f64 = b.iter().map(|y| y * y).sum();
        (num / den).sqrt()
    }

    #[test]
    fn zero_signal_gives_zero_spectrogram() {
        let spec = stft(&AudioBuffer::zeros(44100, 44100), &StftConfig::default()).unwrap();
        assert!(spec.data.iter().all(|c| c.norm() == 0.0));
        let back = istft(&spec, 44100).unwrap();
        assert!(back.samples().iter().all(|&s| s == 0.0));
    }

    #[test]
    fn white_noise_round_trip() {
        let x = noise(44100, 1);
        let spec = stft(&x, &StftConfig::default()).unwrap();
        assert_eq!(spec.n_bins(), 1025);
        let y = istft(&spec, x.len()).unwrap();
        assert!(rel_err(y.samples(), x.samples()) < 1e-6);
    }

    #[test]
    fn short_and_odd_lengths_round_trip() {
        for len in [1, 7, 100, 1023, 1025, 3001] {
            let x = noise(len, len as u64);
            let spec = stft(&x, &StftConfig::default()).unwrap();
            let y = istft(&spec, len).unwrap();
            assert!(rel_err(y.samples(), x.samples()) < 1e-6, "len {len}");
        }
    }

    #[test]
    fn uncentered_round_trip() {
        let cfg = StftConfig {
            center: false,
            ..StftConfig::default()
        };
        let x = noise(10_000, 3);
        let spec = stft(&x, &cfg).unwrap();
        let y = istft(&spec, x.len()).unwrap();
        // First/last samples only see a window tail; interior is exact.
        assert!(rel_err(&y.samples()[16..9_984], &x.samples()[16..9_984]) < 1e-6);
    }

    #[test]
    fn identity_mask_matches_plain_round_trip() {
        let x = noise(20_000, 4);
        let spec = stft(&x, &StftConfig::default()).unwrap();
        let ones = Array2::from_elem(spec.data.dim(), 1.0);
        let a = istft(&spec.apply_mask(&ones).unwrap(), x.len()).unwrap();
        let b = istft(&spec, x.len()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sine_peak_matches_direct_dft() {
        let sr = 44100;
        let x: Vec<f64> = (0..sr)
            .map(|i| (2.0 * PI * 1000.0 * i as f64 / sr as f64).sin())
            .collect();
        let cfg = StftConfig::default();
        let spec = stft(&AudioBuffer::new(x.clone(), sr).unwrap(), &cfg).unwrap();
        let expected_bin = (1000.0 * 2048.0 / sr as f64).round() as usize;
        assert_eq!(expected_bin, 46);
        for k in 4..spec.n_frames() - 4 {
            let row = spec.data.row(k);
            let peak = (0..row.len())
                .max_by(|&a, &b| row[a].norm().total_cmp(&row[b].norm()))
                .unwrap();
            assert_eq!(peak, expected_bin, "frame {k}");
        }
        // Brute-force DFT of one interior frame.
        let w = WindowKind::Hann.coefficients(2048);
        let k = 20;
        let start = k * 512 - 1024;
        for f in [40usize, 46, 52] {
            let dft: Complex64 = (0..2048)
                .map(|j| {
                    let ang = -2.0 * PI * (f * j) as f64 / 2048.0;
                    Complex64::from_polar(x[start + j] * w[j], ang)
                })
                .sum();
            assert!((dft - spec.data[[k, f]]).norm() < 1e-8 * (1.0 + dft.norm()));
        }
    }

    #[test]
    fn rejects_empty_and_non_cola() {
        let empty = AudioBuffer::new(vec![], 16000).unwrap();
        assert!(matches!(
            stft(&empty, &StftConfig::default()),
            Err(Error::InvalidInput(_))
        ));
        let x = noise(4096, 5);
        assert!(matches!(
            stft(&x, &StftConfig::new(2048, 1024)),
            Err(Error::InvalidConfig(_))
        ));
        assert!(matches!(
            stft(&x, &StftConfig::new(2048, 500)),
            Err(Error::InvalidConfig(_))
        ));
        let rect = StftConfig {
            window: WindowKind::Rectangular,
            ..StftConfig::new(256, 256)
        };
        assert!(stft(&x, &rect).is_ok());
    }

    #[test]
    fn istft_rejects_overlong_request() {
        let x = noise(5000, 6);
        let spec = stft(&x, &StftConfig::default()).unwrap();
        let max = max_istft_len(&spec.config, spec.n_frames());
        assert!(istft(&spec, max).is_ok());
        assert!(matches!(istft(&spec, max + 1), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn parseval_against_windowed_energy() {
        let x = noise(30_000, 7);
        let cfg = StftConfig::default();
        let spec = stft(&x, &cfg).unwrap();
        let n = cfg.n_fft;
        let spectral: f64 = spec
            .data
            .axis_iter(Axis(0))
            .map(|row| {
                let mut e = row[0].norm_sqr() + row[n / 2].norm_sqr();
                e += 2.0 * row.iter().skip(1).take(n / 2 - 1).map(|c| c.norm_sqr()).sum::<f64>();
                e / n as f64
            })
            .sum();
        // Interior samples are covered with a constant squared-window sum
        // (1.5 for periodic Hann at 75% overlap); only the padded edges deviate.
        let cola = overlap_sums(&WindowKind::Hann.coefficients(n), cfg.hop)[0];
        assert!((cola - 1.5).abs() < 1e-12);
        let w = WindowKind::Hann.coefficients(n);
        let direct: f64 = (0..spec.n_frames())
            .map(|k| {
                (0..n)
                    .map(|j| {
                        let p = (k * cfg.hop + j) as isize - (n / 2) as isize;
                        let s = if p >= 0 && (p as usize) < x.len() {
                            x.samples()[p as usize]
                        } else if p >= -(n as isize / 2) && p < (x.len() + n / 2) as isize {
                            x.samples()[reflect_index(p, x.len())]
                        } else {
                            0.0
                        };
                        (s * w[j]).powi(2)
                    })
                    .sum::<f64>()
            })
            .sum();
        assert!((spectral - direct).abs() / direct < 1e-6);
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(24))]
        #[test]
        fn linearity(a in -3.0f64..3.0, b in -3.0f64..3.0, seed in 0u64..1000) {
            let x = noise(6000, seed);
            let y = noise(6000, seed + 1);
            let cfg = StftConfig::default();
            let mix: Vec<f64> = x.samples().iter().zip(y.samples()).map(|(p, q)| a * p + b * q).collect();
            let lhs = stft(&AudioBuffer::new(mix, 44100).unwrap(), &cfg).unwrap();
            let sx = stft(&x, &cfg).unwrap();
            let sy = stft(&y, &cfg).unwrap();
            let scale = sx.data.iter().map(|c| c.norm()).fold(0.0, f64::max);
            for ((l, p), q) in lhs.data.iter().zip(sx.data.iter()).zip(sy.data.iter()) {
                let rhs = p * a + q * b;
                proptest::prop_assert!((l - rhs).norm() <= 1e-9 * scale * (a.abs() + b.abs() + 1.0));
            }
        }

        #[test]
        fn round_trip_any_signal(seed in 0u64..10_000, len in 1usize..9000) {
            let x = noise(len, seed);
            let y = istft(&stft(&x, &StftConfig::default()).unwrap(), len).unwrap();
            proptest::prop_assert!(rel_err(y.samples(), x.samples()) < 1e-6);
        }
    }
}
