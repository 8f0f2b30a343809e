use serde::{Deserialize, Serialize};

use super::{
    apply_deep_filter, oracle_deep_filters, oracle_erb_gains, DeepFilter, TwoStageParams,
    DEFAULT_RIDGE,
};
use crate::error::{Error, Result};
use crate::signal::{istft, make_erb_filterbank, stft, AudioBuffer, ComplexSpectrogram, StftConfig};

/// Which stages of the engine run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeparationMode {
    ErbOnly,
    DfOnly,
    TwoStage,
}

const STEM_TOLERANCE: f64 = 1e-4;

/// Separates `mixture` using gains and filters estimated from the true stems.
/// Returns `(impulsive, stationary)` estimates of the mixture's length.
pub fn separate_oracle(
    mixture: &AudioBuffer,
    impulsive: &AudioBuffer,
    stationary: &AudioBuffer,
    params: &TwoStageParams,
    mode: SeparationMode,
    stft_config: &StftConfig,
) -> Result<(AudioBuffer, AudioBuffer)> {
    params.validate(stft_config.n_fft)?;
    for stem in [impulsive, stationary] {
        if stem.len() != mixture.len() || stem.sample_rate() != mixture.sample_rate() {
            return Err(Error::invalid_input("stems and mixture differ in length or rate"));
        }
    }
    let mix_energy = mixture.energy();
    let err: f64 = mixture
        .samples()
        .iter()
        .zip(impulsive.samples())
        .zip(stationary.samples())
        .map(|((m, i), s)| (m - i - s).powi(2))
        .sum();
    let rel_err = if mix_energy > 0.0 {
        (err / mix_energy).sqrt()
    } else if err > 0.0 {
        f64::INFINITY
    } else {
        0.0
    };
    if rel_err > STEM_TOLERANCE {
        return Err(Error::InconsistentStems { rel_err });
    }

    let len = mixture.len();
    let mix_spec = stft(mixture, stft_config)?;
    let fb = make_erb_filterbank(mixture.sample_rate(), stft_config.n_fft, params.n_erb)?;
    let run = |stem: &AudioBuffer| -> Result<AudioBuffer> {
        let target = stft(stem, stft_config)?;
        let stage1 = match mode {
            SeparationMode::DfOnly => mix_spec.clone(),
            _ => stage_one(&mix_spec, &target, &fb)?,
        };
        let refined = match mode {
            SeparationMode::ErbOnly => stage1,
            _ => {
                let fit = oracle_deep_filters(&stage1, &target, params, DEFAULT_RIDGE)?;
                apply_deep_filter(&stage1, &DeepFilter::Static(fit.taps), params)?
            }
        };
        istft(&refined, len)
    };
    Ok((run(impulsive)?, run(stationary)?))
}

fn stage_one(
    mix: &ComplexSpectrogram,
    target: &ComplexSpectrogram,
    fb: &crate::signal::ErbFilterbank,
) -> Result<ComplexSpectrogram> {
    let gains = oracle_erb_gains(mix, target, fb)?;
    mix.apply_mask(&crate::signal::expand_band_gains(&gains, fb)?)
}
