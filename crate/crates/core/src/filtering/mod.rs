//! Two-stage separation engine: real ERB band gains followed by low-band
//! complex deep filtering, for the impulsive and the stationary source.
//!
//! Gains and filters normally come from a predictor; here they are estimated
//! from ground-truth stems (`oracle_*`), which upper-bounds any predictor
//! sharing the same filtering structure.

mod deep_filter;
mod oracle;
mod separate;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use deep_filter::{apply_deep_filter, apply_erb_gains, DeepFilter, DeepFilterSet};
pub use oracle::{oracle_deep_filters, oracle_erb_gains, OracleFilterFit, DEFAULT_RIDGE};
pub use separate::{separate_oracle, SeparationMode};

/// Parameterisation of the two-stage filter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TwoStageParams {
    /// Number of rectangular ERB bands for the gain stage.
    pub n_erb: usize,
    /// Low-frequency bins processed by the complex filter.
    pub n_feat: usize,
    /// Complex filter order `M`; each filter has `M + 1` taps.
    pub filter_order: usize,
}

impl Default for TwoStageParams {
    fn default() -> Self {
        Self {
            n_erb: 24,
            n_feat: 256,
            filter_order: 8,
        }
    }
}

impl TwoStageParams {
    pub fn n_taps(&self) -> usize {
        self.filter_order + 1
    }

    /// Upper edge of the deep-filtered region in Hz.
    pub fn f_df(&self, sample_rate: u32, n_fft: usize) -> f64 {
        self.n_feat as f64 * sample_rate as f64 / n_fft as f64
    }

    pub fn validate(&self, n_fft: usize) -> Result<()> {
        if self.n_feat == 0 || self.n_feat > n_fft / 2 + 1 {
            return Err(Error::invalid_config(format!(
                "n_feat {} must lie in 1..={}",
                self.n_feat,
                n_fft / 2 + 1
            )));
        }
        if self.n_erb < 2 {
            return Err(Error::invalid_config("n_erb must be at least 2"));
        }
        Ok(())
    }
}

/// Per-source frames × bands gain matrices, all entries in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ErbGains {
    pub impulsive: Array2<f64>,
    pub stationary: Array2<f64>,
}

impl ErbGains {
    pub fn new(impulsive: Array2<f64>, stationary: Array2<f64>) -> Result<Self> {
        for (name, g) in [("impulsive", &impulsive), ("stationary", &stationary)] {
            if let Some(v) = g.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(Error::invalid_input(format!("{name} gain {v} outside [0, 1]")));
            }
        }
        if impulsive.dim() != stationary.dim() {
            return Err(Error::invalid_input("gain matrices differ in shape"));
        }
        Ok(Self {
            impulsive,
            stationary,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_parameters() {
        let p = TwoStageParams::default();
        assert_eq!((p.n_erb, p.n_feat, p.filter_order), (24, 256, 8));
        let f_df = p.f_df(44100, 2048);
        assert!(f_df < 6000.0 && f_df > 5500.0);
        assert!(p.validate(2048).is_ok());
        assert!(TwoStageParams { n_feat: 2000, ..p }.validate(2048).is_err());
    }

    #[test]
    fn gains_must_be_unit_interval() {
        let ok = Array2::from_elem((2, 3), 0.5);
        assert!(ErbGains::new(ok.clone(), ok.clone()).is_ok());
        let bad = Array2::from_elem((2, 3), -0.1);
        assert!(ErbGains::new(ok, bad).is_err());
    }
}
