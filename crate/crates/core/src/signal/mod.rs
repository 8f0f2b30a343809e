//! Time-frequency machinery shared by every other module.

mod audio;
mod erb;
pub mod filters;
mod level;
mod resample;
mod stft;
mod wav;

pub use audio::AudioBuffer;
pub use erb::{erb_band_energies, erb_rate, erb_rate_to_hz, expand_band_gains, make_erb_filterbank, ErbFilterbank};
pub use level::{a_weighted_level, a_weighting_sections};
pub use resample::resample;
pub(crate) use resample::resample_by_ratio;
pub(crate) use stft::analyze_frames;
pub use stft::{istft, max_istft_len, stft, ComplexSpectrogram, StftConfig, WindowKind};
pub use wav::{read_wav, write_audio_f32, write_wav_f32, write_wav_pcm16};
