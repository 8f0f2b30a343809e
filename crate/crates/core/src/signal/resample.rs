use std::f64::consts::PI;

use super::AudioBuffer;
use crate::error::{Error, Result};

/// Zero crossings of the prototype sinc on each side of the kernel centre.
const ZERO_CROSSINGS: f64 = 32.0;
/// Cutoff as a fraction of the lower of the two Nyquist frequencies.
const ROLLOFF: f64 = 0.9;
/// Kaiser shape for > 80 dB side lobes.
const KAISER_BETA: f64 = 8.6;
/// Kernel table oversampling per input sample; linear interpolation between
/// entries keeps table error near -120 dB.
const TABLE_OVERSAMPLE: usize = 512;

fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let q = x * x / 4.0;
    for k in 1..200 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

/// Kaiser-windowed sinc low-pass, tabulated on `[0, half_width]`.
struct SincKernel {
    table: Vec<f64>,
    half_width: f64,
    step: f64,
}

impl SincKernel {
    /// `cutoff` in cycles per input sample.
    fn new(cutoff: f64) -> Self {
        let half_width = ZERO_CROSSINGS / (2.0 * cutoff);
        let step = 1.0 / TABLE_OVERSAMPLE as f64;
        let n = (half_width / step).ceil() as usize + 2;
        let norm = bessel_i0(KAISER_BETA);
        let table = (0..n)
            .map(|i| {
                let t = i as f64 * step;
                if t >= half_width {
                    return 0.0;
                }
                let x = 2.0 * cutoff * t;
                let sinc = if x == 0.0 { 1.0 } else { (PI * x).sin() / (PI * x) };
                let r = t / half_width;
                let win = bessel_i0(KAISER_BETA * (1.0 - r * r).sqrt()) / norm;
                2.0 * cutoff * sinc * win
            })
            .collect();
        Self {
            table,
            half_width,
            step,
        }
    }

    fn eval(&self, t: f64) -> f64 {
        let t = t.abs();
        if t >= self.half_width {
            return 0.0;
        }
        let pos = t / self.step;
        let i = pos as usize;
        let frac = pos - i as f64;
        self.table[i] * (1.0 - frac) + self.table[i + 1] * frac
    }
}

/// Resamples by an arbitrary positive `ratio = output rate / input rate`.
pub(crate) fn resample_by_ratio(samples: &[f64], ratio: f64) -> Vec<f64> {
    let out_len = (samples.len() as f64 * ratio).round() as usize;
    let cutoff = 0.5 * ROLLOFF * ratio.min(1.0);
    let kernel = SincKernel::new(cutoff);
    let len = samples.len() as isize;
    (0..out_len)
        .map(|n| {
            let t = n as f64 / ratio;
            let lo = ((t - kernel.half_width).ceil() as isize).max(0);
            let hi = ((t + kernel.half_width).floor() as isize).min(len - 1);
            (lo..=hi)
                .map(|i| samples[i as usize] * kernel.eval(t - i as f64))
                .sum()
        })
        .collect()
}

/// Band-limited sample-rate conversion; identical rates return a copy.
pub fn resample(audio: &AudioBuffer, target_rate: u32) -> Result<AudioBuffer> {
    if target_rate == 0 {
        return Err(Error::invalid_input("target rate must be positive"));
    }
    if target_rate == audio.sample_rate() {
        return Ok(audio.clone());
    }
    let ratio = target_rate as f64 / audio.sample_rate() as f64;
    Ok(AudioBuffer::from_trusted(
        resample_by_ratio(audio.samples(), ratio),
        target_rate,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use rustfft::FftPlanner;

    fn sine(freq: f64, sr: u32, secs: f64) -> AudioBuffer {
        let n = (sr as f64 * secs) as usize;
        AudioBuffer::new(
            (0..n)
                .map(|i| (2.0 * PI * freq * i as f64 / sr as f64).sin())
                .collect(),
            sr,
        )
        .unwrap()
    }

    /// Peak frequency of a Hann-windowed FFT with parabolic interpolation.
    fn fft_peak_hz(x: &[f64], sr: u32) -> f64 {
        let n = x.len();
        let mut buf: Vec<Complex64> = x
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let w = 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos();
                Complex64::new(v * w, 0.0)
            })
            .collect();
        FftPlanner::new().plan_fft_forward(n).process(&mut buf);
        let mags: Vec<f64> = buf[..n / 2].iter().map(|c| c.norm().ln()).collect();
        let k = (1..n / 2 - 1)
            .max_by(|&a, &b| mags[a].total_cmp(&mags[b]))
            .unwrap();
        let (a, b, c) = (mags[k - 1], mags[k], mags[k + 1]);
        let delta = 0.5 * (a - c) / (a - 2.0 * b + c);
        (k as f64 + delta) * sr as f64 / n as f64
    }

    #[test]
    fn same_rate_is_bit_identical() {
        let x = sine(440.0, 44100, 0.1);
        assert_eq!(resample(&x, 44100).unwrap(), x);
    }

    #[test]
    fn duration_is_preserved() {
        for (from, to, n) in [(44100, 16000, 44100), (16000, 44100, 12345), (48000, 44100, 999)] {
            let x = AudioBuffer::zeros(n, from);
            let y = resample(&x, to).unwrap();
            let expected = n as f64 * to as f64 / from as f64;
            assert!((y.len() as f64 - expected).abs() <= 1.0);
        }
    }

    #[test]
    fn tone_frequency_survives_downsampling() {
        let y = resample(&sine(1000.0, 44100, 2.0), 16000).unwrap();
        let inner = &y.samples()[1000..y.len() - 1000];
        assert!((fft_peak_hz(inner, 16000) - 1000.0).abs() < 1.0);
        // Passband gain stays near unity.
        let rms = (inner.iter().map(|v| v * v).sum::<f64>() / inner.len() as f64).sqrt();
        assert!((rms - 0.5f64.sqrt()).abs() < 0.01);
    }

    #[test]
    fn content_above_new_nyquist_is_rejected() {
        let x = sine(10_000.0, 44100, 1.0);
        let y = resample(&x, 16000).unwrap();
        let inner = &y.samples()[500..y.len() - 500];
        let rms = (inner.iter().map(|v| v * v).sum::<f64>() / inner.len() as f64).sqrt();
        let rejection_db = 20.0 * (rms / x.rms()).log10();
        assert!(rejection_db <= -60.0, "rejection only {rejection_db:.1} dB");
    }

    #[test]
    fn upsampling_round_trip_keeps_band_limited_signal() {
        let x = sine(500.0, 16000, 0.5);
        let up = resample(&x, 44100).unwrap();
        let back = resample(&up, 16000).unwrap();
        let err: f64 = x.samples()[400..7600]
            .iter()
            .zip(&back.samples()[400..7600])
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        let norm: f64 = x.samples()[400..7600].iter().map(|a| a * a).sum::<f64>().sqrt();
        assert!(err / norm < 1e-3);
    }

    #[test]
    fn zero_rate_is_rejected() {
        assert!(resample(&AudioBuffer::zeros(10, 100), 0).is_err());
    }
}
