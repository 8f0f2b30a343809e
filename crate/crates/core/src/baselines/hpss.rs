use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{istft, stft, AudioBuffer, ComplexSpectrogram, StftConfig};
use crate::util::sliding_median;

/// Median-filtering harmonic/percussive separation settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HpssConfig {
    /// Frames in the time-direction (harmonic) median filter.
    pub kernel_time: usize,
    /// Bins in the frequency-direction (percussive) median filter.
    pub kernel_freq: usize,
    /// Separation factor; values above 1 leave a residual that is folded
    /// into the stationary estimate.
    pub margin: f64,
    pub mask_power: f64,
}

impl Default for HpssConfig {
    fn default() -> Self {
        Self {
            kernel_time: 31,
            kernel_freq: 31,
            margin: 1.0,
            mask_power: 2.0,
        }
    }
}

impl HpssConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, k) in [("kernel_time", self.kernel_time), ("kernel_freq", self.kernel_freq)] {
            if k < 3 || k % 2 == 0 {
                return Err(Error::invalid_config(format!("{name} must be odd and >= 3, got {k}")));
            }
        }
        if !(self.margin >= 1.0 && self.margin.is_finite()) {
            return Err(Error::invalid_config(format!("margin must be >= 1, got {}", self.margin)));
        }
        if !(self.mask_power > 0.0 && self.mask_power.is_finite()) {
            return Err(Error::invalid_config("mask_power must be positive"));
        }
        Ok(())
    }
}

/// Soft percussive mask `P^p / (P^p + (margin·H)^p)` for a spectrogram.
pub fn percussive_mask(spec: &ComplexSpectrogram, cfg: &HpssConfig) -> Result<Array2<f64>> {
    cfg.validate()?;
    let mag = spec.data.mapv(|c| c.norm());
    let mut harmonic = Array2::zeros(mag.raw_dim());
    for (f, col) in mag.axis_iter(Axis(1)).enumerate() {
        let med = sliding_median(&col.to_vec(), cfg.kernel_time);
        harmonic.column_mut(f).assign(&ndarray::Array1::from(med));
    }
    let mut percussive = Array2::zeros(mag.raw_dim());
    for (k, row) in mag.axis_iter(Axis(0)).enumerate() {
        let med = sliding_median(&row.to_vec(), cfg.kernel_freq);
        percussive.row_mut(k).assign(&ndarray::Array1::from(med));
    }
    let mut mask = percussive;
    mask.zip_mut_with(&harmonic, |p, &h| {
        let h = cfg.margin * h;
        *p = if *p <= 0.0 && h <= 0.0 {
            0.5
        } else if *p <= 0.0 {
            0.0
        } else {
            // Ratio form avoids overflow of large powers.
            1.0 / (1.0 + (h / *p).powf(cfg.mask_power))
        };
    });
    Ok(mask)
}

/// Returns `(impulsive, stationary)`; the stationary estimate holds the
/// harmonic and residual parts, so the two always sum to the mixture.
pub fn hpss_separate(
    mixture: &AudioBuffer,
    cfg: &HpssConfig,
    stft_config: &StftConfig,
) -> Result<(AudioBuffer, AudioBuffer)> {
    let spec = stft(mixture, stft_config)?;
    let mask = percussive_mask(&spec, cfg)?;
    let complement = mask.mapv(|m| 1.0 - m);
    let impulsive = istft(&spec.apply_mask(&mask)?, mixture.len())?;
    let stationary = istft(&spec.apply_mask(&complement)?, mixture.len())?;
    Ok((impulsive, stationary))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn rel_sum_err(i: &AudioBuffer, s: &AudioBuffer, x: &AudioBuffer) -> f64 {
        let e: f64 = i
            .samples()
            .iter()
            .zip(s.samples())
            .zip(x.samples())
            .map(|((a, b), c)| (a + b - c).powi(2))
            .sum();
        (e / x.energy()).sqrt()
    }

    fn tone(len: usize) -> AudioBuffer {
        AudioBuffer::new(
            (0..len)
                .map(|i| 0.5 * (2.0 * PI * 440.0 * i as f64 / 44100.0).sin())
                .collect(),
            44100,
        )
        .unwrap()
    }

    #[test]
    fn estimates_sum_to_mixture_for_any_margin() {
        let x = tone(44100);
        for margin in [1.0, 2.0, 4.0] {
            let cfg = HpssConfig {
                margin,
                ..HpssConfig::default()
            };
            let (i, s) = hpss_separate(&x, &cfg, &StftConfig::default()).unwrap();
            assert!(rel_sum_err(&i, &s, &x) < 1e-9);
        }
    }

    #[test]
    fn masks_are_unit_interval() {
        let x = tone(20_000);
        let spec = stft(&x, &StftConfig::default()).unwrap();
        let m = percussive_mask(&spec, &HpssConfig::default()).unwrap();
        assert!(m.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn steady_tone_stays_stationary() {
        let x = tone(44100 * 2);
        let (imp, _) = hpss_separate(&x, &HpssConfig::default(), &StftConfig::default()).unwrap();
        // Ignore kernel_time/2 frames at each end.
        let edge = 15 * 512;
        let inner = |b: &AudioBuffer| b.samples()[edge..b.len() - edge].iter().map(|v| v * v).sum::<f64>();
        let ratio_db = 10.0 * (inner(&imp) / inner(&x)).log10();
        assert!(ratio_db <= -30.0, "{ratio_db:.1} dB");
    }

    #[test]
    fn click_in_silence_is_percussive() {
        let mut x = vec![0.0; 44100];
        for (i, v) in x[22050..22050 + 20].iter_mut().enumerate() {
            *v = if i % 2 == 0 { 0.8 } else { -0.8 };
        }
        let x = AudioBuffer::new(x, 44100).unwrap();
        let (imp, _) = hpss_separate(&x, &HpssConfig::default(), &StftConfig::default()).unwrap();
        let dot: f64 = imp.samples().iter().zip(x.samples()).map(|(a, b)| a * b).sum();
        // Energy of the projection of the estimate on the click.
        assert!(dot / x.energy() >= 0.9, "captured {:.3}", dot / x.energy());
        assert!(imp.energy() / x.energy() >= 0.9);
    }

    #[test]
    fn config_validation() {
        let bad = [
            HpssConfig { kernel_time: 4, ..HpssConfig::default() },
            HpssConfig { kernel_freq: 1, ..HpssConfig::default() },
            HpssConfig { margin: 0.5, ..HpssConfig::default() },
            HpssConfig { mask_power: 0.0, ..HpssConfig::default() },
        ];
        for cfg in bad {
            assert!(matches!(cfg.validate(), Err(Error::InvalidConfig(_))));
        }
    }
}
