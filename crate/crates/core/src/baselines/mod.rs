//! Signal-processing separation baselines.

mod daubechies;
pub mod dwt;
pub mod hpss;
pub mod wavelet;

pub use dwt::{wavedec, waverec, BoundaryMode, Daubechies, WaveletDecomposition};
pub use hpss::{hpss_separate, percussive_mask, HpssConfig};
pub use wavelet::{
    wavelet_impulse_separate, wavelet_impulse_separate_with_report, WaveletConfig, WaveletReport,
};
