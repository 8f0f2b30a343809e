use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{stft, AudioBuffer, ComplexSpectrogram, StftConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossConfig {
    /// Magnitude compression exponent.
    pub compression_c: f64,
    pub lambda_sp: f64,
    pub lambda_mr: f64,
    pub lambda_i: f64,
    pub lambda_s: f64,
    pub lambda_m: f64,
    /// Window lengths of the multi-resolution term, each analysed with a
    /// quarter hop.
    pub mr_window_lengths: Vec<usize>,
    /// Analysis used by the single-resolution term of `loss_source`.
    pub stft: StftConfig,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            compression_c: 0.6,
            lambda_sp: 1000.0,
            lambda_mr: 500.0,
            lambda_i: 1.0,
            lambda_s: 10.0,
            lambda_m: 1.0,
            mr_window_lengths: vec![256, 512, 1024],
            stft: StftConfig::default(),
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.compression_c > 0.0 && self.compression_c <= 1.0) {
            return Err(Error::invalid_config(format!(
                "compression_c must lie in (0, 1], got {}",
                self.compression_c
            )));
        }
        let lambdas = [
            self.lambda_sp,
            self.lambda_mr,
            self.lambda_i,
            self.lambda_s,
            self.lambda_m,
        ];
        if lambdas.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return Err(Error::invalid_config("loss weights must be finite and non-negative"));
        }
        if self.mr_window_lengths.is_empty() {
            return Err(Error::invalid_config("mr_window_lengths is empty"));
        }
        for &n in &self.mr_window_lengths {
            StftConfig::quarter_hop(n).validate()?;
        }
        self.stft.validate()
    }

    pub fn mr_configs(&self) -> Vec<StftConfig> {
        self.mr_window_lengths
            .iter()
            .map(|&n| StftConfig::quarter_hop(n))
            .collect()
    }
}

fn compressed(z: Complex64, c: f64) -> (f64, Complex64) {
    let mag = z.norm();
    if mag == 0.0 {
        return (0.0, Complex64::default());
    }
    let m = mag.powf(c);
    (m, z * (m / mag))
}

/// Compressed magnitude error plus compressed complex error, summed over
/// every bin.
pub fn loss_sp(est: &ComplexSpectrogram, reference: &ComplexSpectrogram, cfg: &LossConfig) -> Result<f64> {
    if est.data.dim() != reference.data.dim() {
        return Err(Error::invalid_input(format!(
            "spectrogram shapes differ: {:?} vs {:?}",
            est.data.dim(),
            reference.data.dim()
        )));
    }
    let c = cfg.compression_c;
    Ok(est
        .data
        .iter()
        .zip(reference.data.iter())
        .map(|(&a, &b)| {
            let (ma, za) = compressed(a, c);
            let (mb, zb) = compressed(b, c);
            (ma - mb).powi(2) + (za - zb).norm_sqr()
        })
        .sum())
}

fn check_aligned(a: &AudioBuffer, b: &AudioBuffer) -> Result<()> {
    if a.len() != b.len() || a.sample_rate() != b.sample_rate() {
        return Err(Error::invalid_input(format!(
            "signals differ: {} samples at {} Hz vs {} at {} Hz",
            a.len(),
            a.sample_rate(),
            b.len(),
            b.sample_rate()
        )));
    }
    Ok(())
}

/// `loss_sp` summed over the configured resolutions.
pub fn loss_mr(est: &AudioBuffer, reference: &AudioBuffer, cfg: &LossConfig) -> Result<f64> {
    check_aligned(est, reference)?;
    cfg.mr_configs().iter().try_fold(0.0, |acc, sc| {
        Ok(acc + loss_sp(&stft(est, sc)?, &stft(reference, sc)?, cfg)?)
    })
}

/// Weighted single plus multi-resolution loss for one source.
pub fn loss_source(est: &AudioBuffer, reference: &AudioBuffer, cfg: &LossConfig) -> Result<f64> {
    check_aligned(est, reference)?;
    let sp = loss_sp(&stft(est, &cfg.stft)?, &stft(reference, &cfg.stft)?, cfg)?;
    Ok(cfg.lambda_sp * sp + cfg.lambda_mr * loss_mr(est, reference, cfg)?)
}

/// Weighted terms of the total loss; `total` is their sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub impulsive: f64,
    pub stationary: f64,
    pub mixture: f64,
    pub total: f64,
}

pub fn loss_total(
    est_i: &AudioBuffer,
    est_s: &AudioBuffer,
    ref_i: &AudioBuffer,
    ref_s: &AudioBuffer,
    mixture: &AudioBuffer,
    cfg: &LossConfig,
) -> Result<LossBreakdown> {
    cfg.validate()?;
    for x in [est_s, ref_i, ref_s, mixture] {
        check_aligned(est_i, x)?;
    }
    let est_m = est_i.add(est_s)?;
    let impulsive = cfg.lambda_i * loss_source(est_i, ref_i, cfg)?;
    let stationary = cfg.lambda_s * loss_source(est_s, ref_s, cfg)?;
    let mixture = cfg.lambda_m * loss_source(&est_m, mixture, cfg)?;
    Ok(LossBreakdown {
        impulsive,
        stationary,
        mixture,
        total: impulsive + stationary + mixture,
    })
}
